//! Token definitions and canonical token rendering.
//!
//! Numeric literals are normalized at lex time so that radix spelling does
//! not matter downstream: `4'b0101`, `4'h5` and `4'd5` all render to the
//! same canonical token string. Literals containing `x`/`z` digits cannot
//! be value-normalized and are kept as expanded binary patterns instead.

use num_bigint::BigUint;
use serde::Serialize;
use std::fmt;

/// Byte-offset span `[start, end)` into the original source text.
pub type Span = (usize, usize);

/// A lexed token with its source span.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
}

impl Token {
    /// Canonical string used for token-sequence comparison and AST dumps.
    pub fn canonical(&self) -> String {
        self.kind.canonical()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Keyword(Keyword),
    Ident(String),
    /// `$`-prefixed system identifier, e.g. `$display`.
    SysIdent(String),
    Literal(Literal),
    StringLit(String),
    /// Operator or punctuation, interned as a static string.
    Punct(&'static str),
}

impl TokenKind {
    pub fn canonical(&self) -> String {
        match self {
            TokenKind::Keyword(k) => k.as_str().to_string(),
            TokenKind::Ident(s) => s.clone(),
            TokenKind::SysIdent(s) => format!("${s}"),
            TokenKind::Literal(l) => l.canonical(),
            TokenKind::StringLit(s) => format!("\"{s}\""),
            TokenKind::Punct(p) => (*p).to_string(),
        }
    }
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.canonical())
    }
}

/// A normalized Verilog numeric literal.
///
/// `Value` carries an exact numeric value (radix-independent, truncated to
/// the declared width when one is present). `Bits` carries patterns with
/// `x`/`z` digits, expanded to binary so that `8'hzz` and `8'bzzzzzzzz`
/// compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Literal {
    pub width: Option<u32>,
    pub signed: bool,
    pub value: LiteralValue,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum LiteralValue {
    /// Exact value, stored as lowercase hex digits without leading zeros.
    Num(String),
    /// Binary pattern containing `x` and/or `z` digits.
    Bits(String),
}

impl Literal {
    pub fn from_value(width: Option<u32>, signed: bool, value: BigUint) -> Self {
        let value = match width {
            Some(w) => truncate_to_width(value, w),
            None => value,
        };
        Literal {
            width,
            signed,
            value: LiteralValue::Num(value.to_str_radix(16)),
        }
    }

    pub fn from_bits(width: Option<u32>, signed: bool, bits: String) -> Self {
        let bits = normalize_bits(&bits, width);
        if bits.contains('x') || bits.contains('z') {
            Literal {
                width,
                signed,
                value: LiteralValue::Bits(bits),
            }
        } else {
            // Pattern resolved to plain binary after expansion; fold into Num.
            let v = BigUint::parse_bytes(bits.as_bytes(), 2).unwrap_or_default();
            Literal::from_value(width, signed, v)
        }
    }

    /// Unsigned numeric value when the literal has no `x`/`z` digits.
    pub fn numeric_value(&self) -> Option<BigUint> {
        match &self.value {
            LiteralValue::Num(hex) => BigUint::parse_bytes(hex.as_bytes(), 16),
            LiteralValue::Bits(_) => None,
        }
    }

    pub fn canonical(&self) -> String {
        let w = self
            .width
            .map(|w| w.to_string())
            .unwrap_or_default();
        let s = if self.signed { "s" } else { "" };
        match &self.value {
            LiteralValue::Num(hex) => format!("{w}'{s}h{hex}"),
            LiteralValue::Bits(bits) => format!("{w}'{s}b{bits}"),
        }
    }
}

fn truncate_to_width(value: BigUint, width: u32) -> BigUint {
    let one: BigUint = 1u8.into();
    value % (one << width as usize)
}

/// Expand or trim a binary pattern to its declared width. Verilog
/// zero-extends short patterns (x/z-extends when the leading digit is x/z)
/// and truncates long ones to the low bits.
fn normalize_bits(bits: &str, width: Option<u32>) -> String {
    let trimmed: String = {
        let s = bits.trim_start_matches('0');
        if s.is_empty() {
            "0".to_string()
        } else {
            s.to_string()
        }
    };
    match width {
        None => trimmed,
        Some(w) => {
            let w = w as usize;
            let cur = bits.len();
            if cur >= w {
                let low = &bits[cur - w..];
                let s = low.trim_start_matches('0');
                if s.is_empty() {
                    "0".to_string()
                } else {
                    s.to_string()
                }
            } else {
                let lead = bits.chars().next().unwrap_or('0');
                let pad = match lead {
                    'x' => 'x',
                    'z' => 'z',
                    _ => '0',
                };
                let mut out = String::with_capacity(w);
                for _ in 0..(w - cur) {
                    out.push(pad);
                }
                out.push_str(bits);
                let s = out.trim_start_matches('0');
                if s.is_empty() {
                    "0".to_string()
                } else {
                    s.to_string()
                }
            }
        }
    }
}

macro_rules! keywords {
    ($($variant:ident => $text:literal),+ $(,)?) => {
        /// Reserved words recognized by the lexer.
        #[derive(Debug, Clone, Copy, PartialEq, Eq)]
        pub enum Keyword {
            $($variant),+
        }

        impl Keyword {
            pub fn as_str(self) -> &'static str {
                match self {
                    $(Keyword::$variant => $text),+
                }
            }

            pub fn lookup(text: &str) -> Option<Keyword> {
                match text {
                    $($text => Some(Keyword::$variant),)+
                    _ => None,
                }
            }
        }
    };
}

keywords! {
    Module => "module",
    Endmodule => "endmodule",
    Input => "input",
    Output => "output",
    Inout => "inout",
    Wire => "wire",
    Tri => "tri",
    Tri0 => "tri0",
    Tri1 => "tri1",
    Wand => "wand",
    Wor => "wor",
    Trireg => "trireg",
    Supply0 => "supply0",
    Supply1 => "supply1",
    Reg => "reg",
    Integer => "integer",
    Parameter => "parameter",
    Localparam => "localparam",
    Assign => "assign",
    Always => "always",
    Initial => "initial",
    Begin => "begin",
    End => "end",
    If => "if",
    Else => "else",
    Case => "case",
    Casex => "casex",
    Casez => "casez",
    Endcase => "endcase",
    Default => "default",
    Posedge => "posedge",
    Negedge => "negedge",
    Or => "or",
    And => "and",
    Nand => "nand",
    Nor => "nor",
    Xor => "xor",
    Xnor => "xnor",
    Not => "not",
    Buf => "buf",
    Function => "function",
    Endfunction => "endfunction",
    Signed => "signed",
    Automatic => "automatic",
    Generate => "generate",
    Endgenerate => "endgenerate",
    Genvar => "genvar",
    For => "for",
    While => "while",
    Repeat => "repeat",
    Forever => "forever",
    Specify => "specify",
    Endspecify => "endspecify",
    Real => "real",
    Time => "time",
    Task => "task",
    Endtask => "endtask",
}
