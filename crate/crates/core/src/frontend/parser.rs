//! Recursive descent parser for the supported synthesizable subset.
//!
//! Accepted constructs: one module per file, ANSI and non-ANSI port
//! styles, parameter/net/reg declarations, continuous assigns, always and
//! initial blocks (begin/end, if/else, case variants, blocking and
//! nonblocking assignments), module and gate-primitive instantiations,
//! and function declarations. Generate blocks, delays, system tasks,
//! loops and everything SystemVerilog are rejected with a positioned
//! diagnostic naming the construct.
//!
//! The parser is total: any input yields either a [`VerilogAst`] or
//! [`SyntaxDiagnostics`] — never a panic. Recursion depth is bounded.

use super::ast::{AstElement, Category, MutationSites, SyntaxDiagnostics, VerilogAst};
use super::lexer::tokenize;
use super::token::{Keyword, Span, Token, TokenKind};
use std::collections::BTreeMap;

const MAX_DEPTH: usize = 256;

/// Operator pairs eligible for single-site mutation flips.
pub(crate) fn flip_operator(op: &str) -> Option<&'static str> {
    Some(match op {
        "&" => "|",
        "|" => "&",
        "&&" => "||",
        "||" => "&&",
        "+" => "-",
        "-" => "+",
        "==" => "!=",
        "!=" => "==",
        "^" => "&",
        "<" => ">",
        ">" => "<",
        "<<" => ">>",
        ">>" => "<<",
        _ => return None,
    })
}

struct PErr {
    offset: usize,
    message: String,
}

type PResult<T> = Result<T, PErr>;

/// Parse a single Verilog module. Returns diagnostics instead of an AST
/// for any input outside the supported subset.
pub fn parse_source(src: &str) -> Result<VerilogAst, SyntaxDiagnostics> {
    let tokens = match tokenize(src) {
        Ok(t) => t,
        Err(e) => return Err(SyntaxDiagnostics::single_error(src, e.offset, e.message)),
    };
    let mut parser = Parser {
        src,
        tokens,
        pos: 0,
        depth: 0,
        elements: BTreeMap::new(),
        sites: MutationSites::default(),
    };
    match parser.parse_file() {
        Ok(name) => Ok(VerilogAst::new(name, parser.elements, parser.sites)),
        Err(e) => Err(SyntaxDiagnostics::single_error(src, e.offset, e.message)),
    }
}

struct Parser<'a> {
    src: &'a str,
    tokens: Vec<Token>,
    pos: usize,
    depth: usize,
    elements: BTreeMap<Category, Vec<AstElement>>,
    sites: MutationSites,
}

impl<'a> Parser<'a> {
    // ------------------------------------------------------------------
    // Primitives
    // ------------------------------------------------------------------

    fn peek(&self) -> Option<&TokenKind> {
        self.tokens.get(self.pos).map(|t| &t.kind)
    }

    fn peek_at(&self, off: usize) -> Option<&TokenKind> {
        self.tokens.get(self.pos + off).map(|t| &t.kind)
    }

    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn cur_offset(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|t| t.span.0)
            .unwrap_or(self.src.len())
    }

    fn prev_end(&self) -> usize {
        if self.pos == 0 {
            0
        } else {
            self.tokens[self.pos - 1].span.1
        }
    }

    fn bump(&mut self) -> usize {
        let i = self.pos;
        self.pos += 1;
        i
    }

    fn err<T>(&self, message: impl Into<String>) -> PResult<T> {
        Err(PErr {
            offset: self.cur_offset(),
            message: message.into(),
        })
    }

    fn at_kw(&self, kw: Keyword) -> bool {
        matches!(self.peek(), Some(TokenKind::Keyword(k)) if *k == kw)
    }

    fn at_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Some(TokenKind::Punct(q)) if *q == p)
    }

    fn eat_kw(&mut self, kw: Keyword) -> bool {
        if self.at_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.at_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: Keyword) -> PResult<usize> {
        if self.at_kw(kw) {
            Ok(self.bump())
        } else {
            self.err(format!("expected `{}`", kw.as_str()))
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<usize> {
        if self.at_punct(p) {
            Ok(self.bump())
        } else {
            self.err(format!("expected `{p}`"))
        }
    }

    fn expect_ident(&mut self) -> PResult<(usize, String)> {
        match self.peek() {
            Some(TokenKind::Ident(name)) => {
                let name = name.clone();
                Ok((self.bump(), name))
            }
            _ => self.err("expected identifier"),
        }
    }

    fn enter(&mut self) -> PResult<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return self.err("nesting too deep");
        }
        Ok(())
    }

    fn leave(&mut self) {
        self.depth -= 1;
    }

    fn canon_range(&self, range: std::ops::Range<usize>) -> Vec<String> {
        self.tokens[range].iter().map(|t| t.canonical()).collect()
    }

    fn push_element(&mut self, category: Category, name: String, tokens: Vec<String>, span: Span) {
        self.elements.entry(category).or_default().push(AstElement {
            category,
            canonical_name: name,
            token_sequence: tokens,
            span,
        });
    }

    // ------------------------------------------------------------------
    // File and module structure
    // ------------------------------------------------------------------

    fn parse_file(&mut self) -> PResult<String> {
        if self.at_end() {
            return self.err("empty source: expected a module");
        }
        let name = self.parse_module()?;
        if !self.at_end() {
            if self.at_kw(Keyword::Module) {
                return self.err("multiple modules in one source; expected exactly one");
            }
            return self.err("unexpected tokens after `endmodule`");
        }
        Ok(name)
    }

    fn parse_module(&mut self) -> PResult<String> {
        let start_idx = self.expect_kw(Keyword::Module)?;
        let (_, name) = self.expect_ident()?;
        if self.eat_punct("#") {
            self.expect_punct("(")?;
            self.parse_parameter_ports()?;
            self.expect_punct(")")?;
        }
        if self.eat_punct("(") {
            self.parse_port_list()?;
            self.expect_punct(")")?;
        }
        self.expect_punct(";")?;
        while !self.at_kw(Keyword::Endmodule) {
            if self.at_end() {
                return self.err("unexpected end of input: expected `endmodule`");
            }
            self.parse_module_item()?;
        }
        let end_idx = self.bump();
        let span = (self.tokens[start_idx].span.0, self.tokens[end_idx].span.1);
        let module_elem = AstElement {
            category: Category::Module,
            canonical_name: name.clone(),
            token_sequence: vec!["module".to_string(), name.clone()],
            span,
        };
        self.elements
            .entry(Category::Module)
            .or_default()
            .insert(0, module_elem);
        Ok(name)
    }

    fn parse_parameter_ports(&mut self) -> PResult<()> {
        if self.at_punct(")") {
            return Ok(());
        }
        self.expect_kw(Keyword::Parameter)?;
        let mut prefix = self.finish_param_prefix(self.pos - 1)?;
        loop {
            self.parse_param_assign(prefix.clone(), Keyword::Parameter)?;
            if !self.eat_punct(",") {
                break;
            }
            if self.eat_kw(Keyword::Parameter) {
                prefix = self.finish_param_prefix(self.pos - 1)?;
            }
        }
        Ok(())
    }

    /// Consumes optional `signed`/range modifiers after a `parameter`
    /// keyword at `kw_idx` and returns the shared prefix token range.
    fn finish_param_prefix(&mut self, kw_idx: usize) -> PResult<std::ops::Range<usize>> {
        self.eat_kw(Keyword::Signed);
        if self.at_punct("[") {
            self.parse_range()?;
        }
        Ok(kw_idx..self.pos)
    }

    fn parse_param_assign(
        &mut self,
        prefix: std::ops::Range<usize>,
        kw: Keyword,
    ) -> PResult<()> {
        let (name_idx, name) = self.expect_ident()?;
        self.expect_punct("=")?;
        let expr_start = self.pos;
        self.parse_expr()?;
        let mut tokens = vec![kw.as_str().to_string()];
        tokens.extend(self.canon_range(prefix.start + 1..prefix.end));
        tokens.extend(self.canon_range(name_idx..self.pos));
        let span = (self.tokens[prefix.start].span.0, self.prev_end());
        let _ = expr_start;
        self.push_element(Category::Parameter, name, tokens, span);
        Ok(())
    }

    fn parse_port_list(&mut self) -> PResult<()> {
        if self.at_punct(")") {
            return Ok(());
        }
        let ansi = matches!(
            self.peek(),
            Some(TokenKind::Keyword(
                Keyword::Input | Keyword::Output | Keyword::Inout
            ))
        );
        if ansi {
            loop {
                self.parse_port_decl_group(true)?;
                if !self.eat_punct(",") {
                    break;
                }
            }
        } else {
            // Non-ANSI header: a bare name list. Directions come from body
            // declarations, which produce the Port elements.
            loop {
                self.expect_ident()?;
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        Ok(())
    }

    /// One direction group: `input [wire|reg] [signed] [range] name {, name}`.
    /// In ANSI headers a `,` followed by a direction keyword starts a new
    /// group, handled by the caller.
    fn parse_port_decl_group(&mut self, header: bool) -> PResult<()> {
        let prefix_start = self.pos;
        match self.peek() {
            Some(TokenKind::Keyword(
                Keyword::Input | Keyword::Output | Keyword::Inout,
            )) => {
                self.bump();
            }
            _ => return self.err("expected port direction"),
        }
        if matches!(
            self.peek(),
            Some(TokenKind::Keyword(
                Keyword::Wire | Keyword::Reg | Keyword::Tri | Keyword::Integer
            ))
        ) {
            self.bump();
        }
        self.eat_kw(Keyword::Signed);
        if self.at_punct("[") {
            self.parse_range()?;
        }
        let prefix = prefix_start..self.pos;
        loop {
            let (name_idx, name) = self.expect_ident()?;
            let mut end = self.pos;
            if header && self.at_punct("=") {
                self.bump();
                self.parse_expr()?;
                end = self.pos;
            }
            let mut tokens = self.canon_range(prefix.clone());
            tokens.extend(self.canon_range(name_idx..end));
            let span = (self.tokens[prefix.start].span.0, self.tokens[end - 1].span.1);
            self.push_element(Category::Port, name, tokens, span);
            if header {
                // Carried-over names share the direction group; a direction
                // keyword after `,` belongs to the next group.
                if self.at_punct(",")
                    && matches!(
                        self.peek_at(1),
                        Some(TokenKind::Keyword(
                            Keyword::Input | Keyword::Output | Keyword::Inout
                        ))
                    )
                {
                    return Ok(());
                }
                if !self.eat_punct(",") {
                    return Ok(());
                }
            } else {
                if !self.eat_punct(",") {
                    self.expect_punct(";")?;
                    return Ok(());
                }
            }
        }
    }

    fn parse_range(&mut self) -> PResult<()> {
        self.expect_punct("[")?;
        self.parse_expr()?;
        self.expect_punct(":")?;
        self.parse_expr()?;
        self.expect_punct("]")?;
        Ok(())
    }

    // ------------------------------------------------------------------
    // Module items
    // ------------------------------------------------------------------

    fn parse_module_item(&mut self) -> PResult<()> {
        match self.peek() {
            Some(TokenKind::Keyword(kw)) => match kw {
                Keyword::Input | Keyword::Output | Keyword::Inout => {
                    self.parse_port_decl_group(false)
                }
                Keyword::Parameter | Keyword::Localparam => self.parse_param_decl(),
                Keyword::Wire
                | Keyword::Tri
                | Keyword::Tri0
                | Keyword::Tri1
                | Keyword::Wand
                | Keyword::Wor
                | Keyword::Trireg
                | Keyword::Supply0
                | Keyword::Supply1 => self.parse_net_decl(),
                Keyword::Reg | Keyword::Integer => self.parse_reg_decl(),
                Keyword::Assign => self.parse_assign(),
                Keyword::Always => self.parse_always(),
                Keyword::Initial => self.parse_initial(),
                Keyword::Function => self.parse_function(),
                Keyword::And
                | Keyword::Or
                | Keyword::Nand
                | Keyword::Nor
                | Keyword::Xor
                | Keyword::Xnor
                | Keyword::Not
                | Keyword::Buf => self.parse_gate_instance(),
                Keyword::Generate | Keyword::Genvar => {
                    self.err(format!("unsupported construct `{}`", kw.as_str()))
                }
                Keyword::Specify | Keyword::Task | Keyword::Real | Keyword::Time => {
                    self.err(format!("unsupported construct `{}`", kw.as_str()))
                }
                other => self.err(format!("unexpected `{}` in module body", other.as_str())),
            },
            Some(TokenKind::Ident(name)) if name == "defparam" || name == "specparam" => {
                self.err(format!("unsupported construct `{name}`"))
            }
            Some(TokenKind::Ident(_)) => self.parse_module_instance(),
            Some(TokenKind::SysIdent(name)) => {
                self.err(format!("unsupported system task `${name}`"))
            }
            Some(other) => self.err(format!("expected module item, found `{other}`")),
            None => self.err("unexpected end of input"),
        }
    }

    fn parse_param_decl(&mut self) -> PResult<()> {
        let kw = if self.at_kw(Keyword::Parameter) {
            Keyword::Parameter
        } else {
            Keyword::Localparam
        };
        let prefix_start = self.bump();
        self.eat_kw(Keyword::Signed);
        if self.at_punct("[") {
            self.parse_range()?;
        }
        let prefix = prefix_start..self.pos;
        loop {
            self.parse_param_assign(prefix.clone(), kw)?;
            if !self.eat_punct(",") {
                break;
            }
        }
        self.expect_punct(";")?;
        Ok(())
    }

    fn parse_net_decl(&mut self) -> PResult<()> {
        let prefix_start = self.bump();
        self.eat_kw(Keyword::Signed);
        if self.at_punct("[") {
            self.parse_range()?;
        }
        let prefix = prefix_start..self.pos;
        loop {
            let (name_idx, name) = self.expect_ident()?;
            if self.at_punct("=") {
                self.bump();
                self.parse_expr()?;
            }
            let mut tokens = self.canon_range(prefix.clone());
            tokens.extend(self.canon_range(name_idx..self.pos));
            let span = (self.tokens[prefix.start].span.0, self.prev_end());
            self.push_element(Category::NetDecl, name, tokens, span);
            if !self.eat_punct(",") {
                break;
            }
        }
        self.expect_punct(";")?;
        Ok(())
    }

    fn parse_reg_decl(&mut self) -> PResult<()> {
        let prefix_start = self.bump();
        self.eat_kw(Keyword::Signed);
        if self.at_punct("[") {
            self.parse_range()?;
        }
        let prefix = prefix_start..self.pos;
        loop {
            let (name_idx, name) = self.expect_ident()?;
            // Optional memory dimensions and initializer.
            while self.at_punct("[") {
                self.parse_range()?;
            }
            if self.at_punct("=") {
                self.bump();
                self.parse_expr()?;
            }
            let mut tokens = self.canon_range(prefix.clone());
            tokens.extend(self.canon_range(name_idx..self.pos));
            let span = (self.tokens[prefix.start].span.0, self.prev_end());
            self.push_element(Category::RegDecl, name, tokens, span);
            if !self.eat_punct(",") {
                break;
            }
        }
        self.expect_punct(";")?;
        Ok(())
    }

    fn parse_assign(&mut self) -> PResult<()> {
        let kw_idx = self.expect_kw(Keyword::Assign)?;
        loop {
            let start = self.pos;
            let names = self.parse_lvalue()?;
            self.expect_punct("=")?;
            self.parse_expr()?;
            let mut tokens = vec!["assign".to_string()];
            tokens.extend(self.canon_range(start..self.pos));
            let span = (self.tokens[kw_idx].span.0, self.prev_end());
            self.push_element(
                Category::Assign,
                format!("assign:{}", names.join(",")),
                tokens,
                span,
            );
            if !self.eat_punct(",") {
                break;
            }
        }
        self.expect_punct(";")?;
        Ok(())
    }

    fn parse_always(&mut self) -> PResult<()> {
        let kw_idx = self.expect_kw(Keyword::Always)?;
        self.parse_event_control()?;
        let mut lhs = Vec::new();
        self.parse_statement(&mut lhs)?;
        let span = (self.tokens[kw_idx].span.0, self.prev_end());
        let tokens = self.canon_range(kw_idx..self.pos);
        self.push_element(
            Category::Always,
            format!("always:{}", dedup_names(lhs).join(",")),
            tokens,
            span,
        );
        Ok(())
    }

    fn parse_initial(&mut self) -> PResult<()> {
        let kw_idx = self.expect_kw(Keyword::Initial)?;
        let mut lhs = Vec::new();
        self.parse_statement(&mut lhs)?;
        let span = (self.tokens[kw_idx].span.0, self.prev_end());
        let tokens = self.canon_range(kw_idx..self.pos);
        self.push_element(
            Category::Other,
            format!("initial:{}", dedup_names(lhs).join(",")),
            tokens,
            span,
        );
        Ok(())
    }

    fn parse_event_control(&mut self) -> PResult<()> {
        if !self.eat_punct("@") {
            return Ok(());
        }
        if self.eat_punct("*") {
            return Ok(());
        }
        self.expect_punct("(")?;
        if self.eat_punct("*") {
            self.expect_punct(")")?;
            return Ok(());
        }
        loop {
            if self.at_kw(Keyword::Posedge) || self.at_kw(Keyword::Negedge) {
                self.bump();
            }
            self.parse_expr()?;
            if self.eat_kw(Keyword::Or) || self.eat_punct(",") {
                continue;
            }
            break;
        }
        self.expect_punct(")")?;
        Ok(())
    }

    fn parse_function(&mut self) -> PResult<()> {
        let kw_idx = self.expect_kw(Keyword::Function)?;
        self.eat_kw(Keyword::Automatic);
        self.eat_kw(Keyword::Signed);
        if self.at_punct("[") {
            self.parse_range()?;
        }
        if self.at_kw(Keyword::Integer) || self.at_kw(Keyword::Real) {
            self.bump();
        }
        let (_, name) = self.expect_ident()?;
        if self.eat_punct("(") {
            // ANSI-style function arguments; discard element bookkeeping.
            if !self.at_punct(")") {
                loop {
                    if matches!(
                        self.peek(),
                        Some(TokenKind::Keyword(Keyword::Input | Keyword::Output))
                    ) {
                        self.bump();
                    }
                    self.eat_kw(Keyword::Reg);
                    self.eat_kw(Keyword::Signed);
                    if self.at_punct("[") {
                        self.parse_range()?;
                    }
                    self.expect_ident()?;
                    if !self.eat_punct(",") {
                        break;
                    }
                }
            }
            self.expect_punct(")")?;
        }
        self.expect_punct(";")?;
        // Local declarations, then one body statement.
        loop {
            match self.peek() {
                Some(TokenKind::Keyword(Keyword::Input)) => {
                    self.bump();
                    self.eat_kw(Keyword::Signed);
                    if self.at_punct("[") {
                        self.parse_range()?;
                    }
                    loop {
                        self.expect_ident()?;
                        if !self.eat_punct(",") {
                            break;
                        }
                    }
                    self.expect_punct(";")?;
                }
                Some(TokenKind::Keyword(Keyword::Reg | Keyword::Integer)) => {
                    self.bump();
                    if self.at_punct("[") {
                        self.parse_range()?;
                    }
                    loop {
                        self.expect_ident()?;
                        while self.at_punct("[") {
                            self.parse_range()?;
                        }
                        if !self.eat_punct(",") {
                            break;
                        }
                    }
                    self.expect_punct(";")?;
                }
                _ => break,
            }
        }
        let mut lhs = Vec::new();
        self.parse_statement(&mut lhs)?;
        self.expect_kw(Keyword::Endfunction)?;
        let span = (self.tokens[kw_idx].span.0, self.prev_end());
        let tokens = self.canon_range(kw_idx..self.pos);
        self.push_element(Category::FunctionDecl, name, tokens, span);
        Ok(())
    }

    fn parse_gate_instance(&mut self) -> PResult<()> {
        let kw_idx = self.bump();
        let gate = match &self.tokens[kw_idx].kind {
            TokenKind::Keyword(k) => k.as_str(),
            _ => unreachable!("caller checked a gate keyword"),
        };
        loop {
            let start = self.pos;
            let inst_name = match self.peek() {
                Some(TokenKind::Ident(n)) => {
                    let n = n.clone();
                    self.bump();
                    Some(n)
                }
                _ => None,
            };
            self.expect_punct("(")?;
            let mut first_conn_names = Vec::new();
            if !self.at_punct(")") {
                let mut first = true;
                loop {
                    let conn_start = self.pos;
                    self.parse_expr()?;
                    if first {
                        first_conn_names = self.idents_in_range(conn_start..self.pos);
                        first = false;
                    }
                    if !self.eat_punct(",") {
                        break;
                    }
                }
            }
            self.expect_punct(")")?;
            let name = match inst_name {
                Some(n) => n,
                None if !first_conn_names.is_empty() => {
                    format!("{gate}:{}", first_conn_names.join(","))
                }
                None => format!(
                    "{gate}#{}",
                    self.elements
                        .get(&Category::Instance)
                        .map(Vec::len)
                        .unwrap_or(0)
                ),
            };
            let mut tokens = vec![gate.to_string()];
            tokens.extend(self.canon_range(start..self.pos));
            let span = (self.tokens[kw_idx].span.0, self.prev_end());
            self.push_element(Category::Instance, name, tokens, span);
            if !self.eat_punct(",") {
                break;
            }
        }
        self.expect_punct(";")?;
        Ok(())
    }

    fn parse_module_instance(&mut self) -> PResult<()> {
        let type_idx = self.pos;
        self.expect_ident()?;
        if self.eat_punct("#") {
            self.expect_punct("(")?;
            if !self.at_punct(")") {
                loop {
                    if self.at_punct(".") {
                        self.bump();
                        self.expect_ident()?;
                        self.expect_punct("(")?;
                        if !self.at_punct(")") {
                            self.parse_expr()?;
                        }
                        self.expect_punct(")")?;
                    } else {
                        self.parse_expr()?;
                    }
                    if !self.eat_punct(",") {
                        break;
                    }
                }
            }
            self.expect_punct(")")?;
        }
        let shared_prefix = type_idx..self.pos;
        loop {
            let inst_start = self.pos;
            let (_, inst_name) = match self.peek() {
                Some(TokenKind::Ident(_)) => self.expect_ident()?,
                _ => return self.err("expected instance name"),
            };
            if self.at_punct("[") {
                self.parse_range()?;
            }
            self.expect_punct("(")?;
            if !self.at_punct(")") {
                loop {
                    if self.at_punct(".") {
                        self.bump();
                        self.expect_ident()?;
                        self.expect_punct("(")?;
                        if !self.at_punct(")") {
                            self.parse_expr()?;
                        }
                        self.expect_punct(")")?;
                    } else {
                        self.parse_expr()?;
                    }
                    if !self.eat_punct(",") {
                        break;
                    }
                }
            }
            self.expect_punct(")")?;
            let mut tokens = self.canon_range(shared_prefix.clone());
            tokens.extend(self.canon_range(inst_start..self.pos));
            let span = (self.tokens[type_idx].span.0, self.prev_end());
            self.push_element(Category::Instance, inst_name, tokens, span);
            if !self.eat_punct(",") {
                break;
            }
        }
        self.expect_punct(";")?;
        Ok(())
    }

    // ------------------------------------------------------------------
    // Statements
    // ------------------------------------------------------------------

    fn parse_statement(&mut self, lhs: &mut Vec<String>) -> PResult<()> {
        self.enter()?;
        let r = self.parse_statement_inner(lhs);
        self.leave();
        r
    }

    fn parse_statement_inner(&mut self, lhs: &mut Vec<String>) -> PResult<()> {
        match self.peek() {
            Some(TokenKind::Keyword(Keyword::Begin)) => {
                self.bump();
                if self.eat_punct(":") {
                    self.expect_ident()?;
                }
                while !self.at_kw(Keyword::End) {
                    if self.at_end() {
                        return self.err("unexpected end of input: expected `end`");
                    }
                    self.parse_statement(lhs)?;
                }
                self.bump();
                Ok(())
            }
            Some(TokenKind::Keyword(Keyword::If)) => {
                self.bump();
                self.expect_punct("(")?;
                self.parse_expr()?;
                self.expect_punct(")")?;
                let then_start = self.cur_offset();
                self.parse_statement(lhs)?;
                let then_span = (then_start, self.prev_end());
                if self.eat_kw(Keyword::Else) {
                    let else_start = self.cur_offset();
                    self.parse_statement(lhs)?;
                    let else_span = (else_start, self.prev_end());
                    self.sites.if_else.push((then_span, else_span));
                }
                Ok(())
            }
            Some(TokenKind::Keyword(Keyword::Case | Keyword::Casex | Keyword::Casez)) => {
                self.bump();
                self.expect_punct("(")?;
                self.parse_expr()?;
                self.expect_punct(")")?;
                while !self.at_kw(Keyword::Endcase) {
                    if self.at_end() {
                        return self.err("unexpected end of input: expected `endcase`");
                    }
                    if self.eat_kw(Keyword::Default) {
                        self.eat_punct(":");
                    } else {
                        loop {
                            self.parse_expr()?;
                            if !self.eat_punct(",") {
                                break;
                            }
                        }
                        self.expect_punct(":")?;
                    }
                    self.parse_statement(lhs)?;
                }
                self.bump();
                Ok(())
            }
            Some(TokenKind::Punct(";")) => {
                self.bump();
                Ok(())
            }
            Some(TokenKind::Punct("#")) => self.err("unsupported construct: delay control"),
            Some(TokenKind::Punct("@")) => {
                self.err("unsupported construct: event control inside statement")
            }
            Some(TokenKind::SysIdent(name)) => {
                let msg = format!("unsupported system task `${name}`");
                self.err(msg)
            }
            Some(TokenKind::Keyword(
                kw @ (Keyword::For
                | Keyword::While
                | Keyword::Repeat
                | Keyword::Forever
                | Keyword::Generate),
            )) => {
                let msg = format!("unsupported construct `{}`", kw.as_str());
                self.err(msg)
            }
            Some(TokenKind::Ident(_)) | Some(TokenKind::Punct("{")) => {
                let names = self.parse_lvalue()?;
                if !self.eat_punct("=") && !self.eat_punct("<=") {
                    return self.err("expected `=` or `<=` in assignment");
                }
                self.parse_expr()?;
                self.expect_punct(";")?;
                lhs.extend(names);
                Ok(())
            }
            Some(other) => {
                let msg = format!("expected statement, found `{other}`");
                self.err(msg)
            }
            None => self.err("unexpected end of input: expected statement"),
        }
    }

    /// Parses an assignment target and returns the base signal names.
    fn parse_lvalue(&mut self) -> PResult<Vec<String>> {
        self.enter()?;
        let r = self.parse_lvalue_inner();
        self.leave();
        r
    }

    fn parse_lvalue_inner(&mut self) -> PResult<Vec<String>> {
        if self.eat_punct("{") {
            let mut names = Vec::new();
            loop {
                names.extend(self.parse_lvalue()?);
                if !self.eat_punct(",") {
                    break;
                }
            }
            self.expect_punct("}")?;
            return Ok(names);
        }
        let (_, name) = self.expect_ident()?;
        while self.at_punct("[") {
            self.bump();
            self.parse_expr()?;
            if self.eat_punct(":") || self.eat_punct("+:") || self.eat_punct("-:") {
                self.parse_expr()?;
            }
            self.expect_punct("]")?;
        }
        Ok(vec![name])
    }

    // ------------------------------------------------------------------
    // Expressions
    // ------------------------------------------------------------------

    fn parse_expr(&mut self) -> PResult<()> {
        self.enter()?;
        let r = self.parse_ternary();
        self.leave();
        r
    }

    fn parse_ternary(&mut self) -> PResult<()> {
        self.parse_binary(0)?;
        if self.eat_punct("?") {
            let then_start = self.cur_offset();
            self.parse_expr()?;
            let then_span = (then_start, self.prev_end());
            self.expect_punct(":")?;
            let else_start = self.cur_offset();
            self.parse_expr()?;
            let else_span = (else_start, self.prev_end());
            self.sites.ternary.push((then_span, else_span));
        }
        Ok(())
    }

    fn binary_level(op: &str) -> Option<u8> {
        Some(match op {
            "||" => 1,
            "&&" => 2,
            "|" => 3,
            "^" | "^~" | "~^" => 4,
            "&" => 5,
            "==" | "!=" | "===" | "!==" => 6,
            "<" | "<=" | ">" | ">=" => 7,
            "<<" | ">>" | "<<<" | ">>>" => 8,
            "+" | "-" => 9,
            "*" | "/" | "%" => 10,
            "**" => 11,
            _ => return None,
        })
    }

    fn parse_binary(&mut self, min_level: u8) -> PResult<()> {
        self.enter()?;
        let r = self.parse_binary_inner(min_level);
        self.leave();
        r
    }

    fn parse_binary_inner(&mut self, min_level: u8) -> PResult<()> {
        self.parse_unary()?;
        loop {
            let (op, level) = match self.peek() {
                Some(TokenKind::Punct(p)) => match Self::binary_level(p) {
                    Some(l) if l >= min_level => (*p, l),
                    _ => break,
                },
                _ => break,
            };
            let op_idx = self.bump();
            if flip_operator(op).is_some() {
                self.sites
                    .operators
                    .push((self.tokens[op_idx].span, self.tokens[op_idx].kind_punct()));
            }
            self.parse_binary(level + 1)?;
        }
        Ok(())
    }

    fn parse_unary(&mut self) -> PResult<()> {
        self.enter()?;
        let r = self.parse_unary_inner();
        self.leave();
        r
    }

    fn parse_unary_inner(&mut self) -> PResult<()> {
        match self.peek() {
            Some(TokenKind::Punct(
                p @ ("~" | "!" | "&" | "|" | "^" | "+" | "-" | "~&" | "~|" | "~^" | "^~"),
            )) => {
                let _ = p;
                self.bump();
                self.parse_unary()
            }
            _ => self.parse_primary(),
        }
    }

    fn parse_primary(&mut self) -> PResult<()> {
        self.enter()?;
        let r = self.parse_primary_inner();
        self.leave();
        r
    }

    fn parse_primary_inner(&mut self) -> PResult<()> {
        match self.peek() {
            Some(TokenKind::Literal(lit)) => {
                let is_num = lit.numeric_value().is_some();
                let idx = self.bump();
                if is_num {
                    self.sites.literals.push(self.tokens[idx].span);
                }
                Ok(())
            }
            Some(TokenKind::StringLit(_)) => {
                self.bump();
                Ok(())
            }
            Some(TokenKind::Punct("(")) => {
                self.bump();
                self.parse_expr()?;
                self.expect_punct(")")?;
                Ok(())
            }
            Some(TokenKind::Punct("{")) => {
                self.bump();
                self.parse_expr()?;
                if self.at_punct("{") {
                    // Replication: {N{expr, ...}}.
                    self.bump();
                    loop {
                        self.parse_expr()?;
                        if !self.eat_punct(",") {
                            break;
                        }
                    }
                    self.expect_punct("}")?;
                    self.expect_punct("}")?;
                    return Ok(());
                }
                while self.eat_punct(",") {
                    self.parse_expr()?;
                }
                self.expect_punct("}")?;
                Ok(())
            }
            Some(TokenKind::Ident(_)) => {
                self.bump();
                if self.at_punct("(") {
                    // Function call.
                    self.bump();
                    if !self.at_punct(")") {
                        loop {
                            self.parse_expr()?;
                            if !self.eat_punct(",") {
                                break;
                            }
                        }
                    }
                    self.expect_punct(")")?;
                    return Ok(());
                }
                while self.at_punct("[") {
                    self.bump();
                    self.parse_expr()?;
                    if self.eat_punct(":") || self.eat_punct("+:") || self.eat_punct("-:") {
                        self.parse_expr()?;
                    }
                    self.expect_punct("]")?;
                }
                Ok(())
            }
            Some(TokenKind::SysIdent(name)) => {
                let msg = format!("unsupported system function `${name}`");
                self.err(msg)
            }
            Some(other) => {
                let msg = format!("expected expression, found `{other}`");
                self.err(msg)
            }
            None => self.err("unexpected end of input: expected expression"),
        }
    }

    fn idents_in_range(&self, range: std::ops::Range<usize>) -> Vec<String> {
        self.tokens[range]
            .iter()
            .filter_map(|t| match &t.kind {
                TokenKind::Ident(n) => Some(n.clone()),
                _ => None,
            })
            .collect()
    }
}

impl Token {
    fn kind_punct(&self) -> &'static str {
        match self.kind {
            TokenKind::Punct(p) => p,
            _ => "",
        }
    }
}

fn dedup_names(names: Vec<String>) -> Vec<String> {
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    for n in names {
        if seen.insert(n.clone()) {
            out.push(n);
        }
    }
    out
}
