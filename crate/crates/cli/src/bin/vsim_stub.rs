//! A miniature external "simulator" for pipeline testing without a real
//! Verilog toolchain. It follows the same compile-then-run contract the
//! harness expects, so it plugs into the command templates:
//!
//! ```text
//! compile: vsim-stub compile {out} {sources}
//! run:     vsim-stub run {binary}
//! ```
//!
//! Scope is deliberately tiny: single-output, 1-bit combinational designs
//! built from `assign` statements over `~ ! & | ^ && || == != ?:` and the
//! constants 0/1. The testbench is a parseable placeholder module carrying
//! one directive line:
//!
//! ```text
//! // stub-tb: vectors=128 inputs=a,b output=y
//! module tb; endmodule
//! ```
//!
//! During `run`, vector `i` drives each listed input with bit `j` of `i`
//! (j = position in the list), evaluates the design, and prints
//! `index=<i> out=<bit>`. Real verification belongs to a real simulator;
//! this exists so harness plumbing and protocol tests run hermetically.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;
use verigrade_core::frontend::{self, Category, SourceText};

#[derive(Debug, Serialize, Deserialize)]
struct Bundle {
    dut_source: String,
    vectors: u64,
    inputs: Vec<String>,
    output: String,
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let result = match args.split_first() {
        Some((cmd, rest)) if cmd == "compile" => compile(rest),
        Some((cmd, rest)) if cmd == "run" => run(rest),
        _ => Err("usage: vsim-stub compile <out> <sources...> | vsim-stub run <binary>".into()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("vsim-stub: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn compile(args: &[String]) -> Result<(), String> {
    let (out, sources) = args
        .split_first()
        .ok_or("compile needs <out> and at least one source")?;
    if sources.is_empty() {
        return Err("compile needs at least one source file".into());
    }
    let mut dut: Option<String> = None;
    let mut directive: Option<String> = None;
    for path in sources {
        let text =
            std::fs::read_to_string(path).map_err(|e| format!("cannot read `{path}`: {e}"))?;
        if let Err(diags) = frontend::parse(&SourceText::labeled(text.clone(), path.clone())) {
            return Err(format!("`{path}` does not parse: {diags}"));
        }
        match find_directive(&text) {
            Some(d) => {
                if directive.replace(d).is_some() {
                    return Err("more than one testbench (stub-tb directive) supplied".into());
                }
            }
            None => {
                if dut.replace(text).is_some() {
                    return Err("more than one design file supplied".into());
                }
            }
        }
    }
    let directive = directive.ok_or("no testbench: missing `// stub-tb:` directive")?;
    let dut_source = dut.ok_or("no design file supplied")?;
    let (vectors, inputs, output) = parse_directive(&directive)?;
    let bundle = Bundle {
        dut_source,
        vectors,
        inputs,
        output,
    };
    let encoded = serde_json::to_string(&bundle).map_err(|e| e.to_string())?;
    std::fs::write(out, encoded).map_err(|e| format!("cannot write `{out}`: {e}"))
}

fn find_directive(text: &str) -> Option<String> {
    text.lines()
        .map(str::trim)
        .find(|l| l.starts_with("// stub-tb:"))
        .map(|l| l.trim_start_matches("// stub-tb:").trim().to_string())
}

fn parse_directive(directive: &str) -> Result<(u64, Vec<String>, String), String> {
    let mut vectors = None;
    let mut inputs = None;
    let mut output = None;
    for field in directive.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| format!("malformed directive field `{field}`"))?;
        match key {
            "vectors" => {
                vectors = Some(
                    value
                        .parse::<u64>()
                        .map_err(|_| format!("bad vectors count `{value}`"))?,
                )
            }
            "inputs" => {
                inputs = Some(
                    value
                        .split(',')
                        .filter(|s| !s.is_empty())
                        .map(str::to_string)
                        .collect::<Vec<_>>(),
                )
            }
            "output" => output = Some(value.to_string()),
            other => return Err(format!("unknown directive key `{other}`")),
        }
    }
    Ok((
        vectors.ok_or("directive missing vectors=")?,
        inputs.ok_or("directive missing inputs=")?,
        output.ok_or("directive missing output=")?,
    ))
}

fn run(args: &[String]) -> Result<(), String> {
    let [binary] = args else {
        return Err("run takes exactly one argument: the compiled bundle".into());
    };
    let encoded =
        std::fs::read_to_string(binary).map_err(|e| format!("cannot read `{binary}`: {e}"))?;
    let bundle: Bundle =
        serde_json::from_str(&encoded).map_err(|e| format!("corrupt bundle: {e}"))?;
    let design = Design::from_source(&bundle.dut_source)?;
    let mut stdout = String::new();
    for i in 0..bundle.vectors {
        let mut env: BTreeMap<&str, bool> = BTreeMap::new();
        for (j, name) in bundle.inputs.iter().enumerate() {
            env.insert(name.as_str(), (i >> j) & 1 == 1);
        }
        let bit = design.eval_signal(&bundle.output, &env, &mut BTreeSet::new())?;
        stdout.push_str(&format!("index={i} out={}\n", u8::from(bit)));
    }
    print!("{stdout}");
    Ok(())
}

/// The design, reduced to `signal → expression` over canonical tokens.
struct Design {
    assigns: BTreeMap<String, Expr>,
}

impl Design {
    fn from_source(source: &str) -> Result<Self, String> {
        let ast = frontend::parse(&SourceText::inline(source))
            .map_err(|d| format!("design does not parse: {d}"))?;
        let mut assigns = BTreeMap::new();
        for elem in ast.elements(Category::Assign) {
            let name = elem
                .canonical_name
                .strip_prefix("assign:")
                .unwrap_or(&elem.canonical_name)
                .to_string();
            if name.contains(',') {
                return Err(format!("stub cannot evaluate concatenated target `{name}`"));
            }
            // token_sequence is [assign, <name>, =, rhs...].
            let rhs = match elem.token_sequence.as_slice() {
                [kw, lhs, eq, rest @ ..] if kw == "assign" && lhs == &name && eq == "=" => rest,
                _ => {
                    return Err(format!(
                        "stub cannot evaluate assign target shape for `{name}`"
                    ))
                }
            };
            let expr = ExprParser::new(rhs).parse_all()?;
            assigns.insert(name, expr);
        }
        // Net declarations with initializers behave like assigns.
        for elem in ast.elements(Category::NetDecl) {
            if let Some(eq) = elem.token_sequence.iter().position(|t| t == "=") {
                let expr = ExprParser::new(&elem.token_sequence[eq + 1..]).parse_all()?;
                assigns.insert(elem.canonical_name.clone(), expr);
            }
        }
        Ok(Design { assigns })
    }

    fn eval_signal(
        &self,
        name: &str,
        env: &BTreeMap<&str, bool>,
        visiting: &mut BTreeSet<String>,
    ) -> Result<bool, String> {
        if let Some(v) = env.get(name) {
            return Ok(*v);
        }
        if !visiting.insert(name.to_string()) {
            return Err(format!("combinational cycle through `{name}`"));
        }
        let expr = self
            .assigns
            .get(name)
            .ok_or_else(|| format!("signal `{name}` is never assigned"))?;
        let v = self.eval_expr(expr, env, visiting)?;
        visiting.remove(name);
        Ok(v)
    }

    fn eval_expr(
        &self,
        expr: &Expr,
        env: &BTreeMap<&str, bool>,
        visiting: &mut BTreeSet<String>,
    ) -> Result<bool, String> {
        Ok(match expr {
            Expr::Const(b) => *b,
            Expr::Signal(name) => self.eval_signal(name, env, visiting)?,
            Expr::Not(inner) => !self.eval_expr(inner, env, visiting)?,
            Expr::Bin(op, lhs, rhs) => {
                let l = self.eval_expr(lhs, env, visiting)?;
                let r = self.eval_expr(rhs, env, visiting)?;
                match op {
                    BinOp::And => l & r,
                    BinOp::Or => l | r,
                    BinOp::Xor => l ^ r,
                    BinOp::Eq => l == r,
                    BinOp::Ne => l != r,
                }
            }
            Expr::Cond(c, t, e) => {
                if self.eval_expr(c, env, visiting)? {
                    self.eval_expr(t, env, visiting)?
                } else {
                    self.eval_expr(e, env, visiting)?
                }
            }
        })
    }
}

enum Expr {
    Const(bool),
    Signal(String),
    Not(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Cond(Box<Expr>, Box<Expr>, Box<Expr>),
}

#[derive(Clone, Copy)]
enum BinOp {
    And,
    Or,
    Xor,
    Eq,
    Ne,
}

/// Precedence-climbing parser over canonical token strings.
struct ExprParser<'a> {
    tokens: &'a [String],
    pos: usize,
}

impl<'a> ExprParser<'a> {
    fn new(tokens: &'a [String]) -> Self {
        ExprParser { tokens, pos: 0 }
    }

    fn peek(&self) -> Option<&str> {
        self.tokens.get(self.pos).map(String::as_str)
    }

    fn eat(&mut self, t: &str) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn parse_all(mut self) -> Result<Expr, String> {
        let e = self.parse_ternary()?;
        match self.peek() {
            None => Ok(e),
            Some(t) => Err(format!("stub cannot evaluate token `{t}`")),
        }
    }

    fn parse_ternary(&mut self) -> Result<Expr, String> {
        let cond = self.parse_binary(0)?;
        if self.eat("?") {
            let t = self.parse_ternary()?;
            if !self.eat(":") {
                return Err("expected `:` in conditional".into());
            }
            let e = self.parse_ternary()?;
            return Ok(Expr::Cond(Box::new(cond), Box::new(t), Box::new(e)));
        }
        Ok(cond)
    }

    fn level(op: &str) -> Option<(BinOp, u8)> {
        Some(match op {
            "||" => (BinOp::Or, 1),
            "&&" => (BinOp::And, 2),
            "|" => (BinOp::Or, 3),
            "^" => (BinOp::Xor, 4),
            "&" => (BinOp::And, 5),
            "==" => (BinOp::Eq, 6),
            "!=" => (BinOp::Ne, 6),
            _ => return None,
        })
    }

    fn parse_binary(&mut self, min_level: u8) -> Result<Expr, String> {
        let mut lhs = self.parse_unary()?;
        while let Some((op, level)) = self.peek().and_then(Self::level) {
            if level < min_level {
                break;
            }
            self.pos += 1;
            let rhs = self.parse_binary(level + 1)?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> Result<Expr, String> {
        match self.peek() {
            Some("~") | Some("!") => {
                self.pos += 1;
                Ok(Expr::Not(Box::new(self.parse_unary()?)))
            }
            Some("(") => {
                self.pos += 1;
                let e = self.parse_ternary()?;
                if !self.eat(")") {
                    return Err("expected `)`".into());
                }
                Ok(e)
            }
            Some(tok) if tok.contains('\'') => {
                let value = parse_canonical_literal(tok)?;
                self.pos += 1;
                Ok(Expr::Const(value))
            }
            Some(tok) if is_ident(tok) => {
                let name = tok.to_string();
                self.pos += 1;
                Ok(Expr::Signal(name))
            }
            Some(tok) => Err(format!("stub cannot evaluate token `{tok}`")),
            None => Err("unexpected end of expression".into()),
        }
    }
}

fn is_ident(tok: &str) -> bool {
    let mut chars = tok.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '$')
}

/// Canonical numeric tokens look like `1'h0`, `'h1`, `4'sh2`.
fn parse_canonical_literal(tok: &str) -> Result<bool, String> {
    let after = tok
        .split_once('\'')
        .map(|(_, rest)| rest)
        .ok_or_else(|| format!("bad literal `{tok}`"))?;
    let digits = after.trim_start_matches('s');
    let value = digits
        .strip_prefix('h')
        .and_then(|hex| u64::from_str_radix(hex, 16).ok())
        .ok_or_else(|| format!("stub cannot evaluate literal `{tok}`"))?;
    match value {
        0 => Ok(false),
        1 => Ok(true),
        _ => Err(format!("stub is 1-bit only; literal `{tok}` is out of range")),
    }
}
