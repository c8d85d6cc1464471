//! Hand-rolled lexer for the supported Verilog subset.
//!
//! Comments, attribute instances `(* ... *)` and harmless compiler
//! directives are dropped as trivia. Sized literals (`4'b0101`, `8'hFF`)
//! are lexed as single tokens and normalized in [`super::token::Literal`].
//! The lexer never panics: any byte sequence either tokenizes or produces
//! a positioned [`LexError`].

use super::token::{Keyword, Literal, Token, TokenKind};
use num_bigint::BigUint;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexError {
    pub offset: usize,
    pub message: String,
}

/// Compiler directives skipped to end of line; anything else after a
/// backtick is outside the subset and reported as an error.
const SKIPPED_DIRECTIVES: &[&str] = &[
    "timescale",
    "default_nettype",
    "resetall",
    "celldefine",
    "endcelldefine",
];

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    tokens: Vec<Token>,
}

/// Tokenize `src` into a flat token list (no EOF sentinel).
pub fn tokenize(src: &str) -> Result<Vec<Token>, LexError> {
    let mut lx = Lexer {
        src,
        bytes: src.as_bytes(),
        pos: 0,
        tokens: Vec::new(),
    };
    lx.run()?;
    Ok(lx.tokens)
}

impl<'a> Lexer<'a> {
    fn err(&self, offset: usize, message: impl Into<String>) -> LexError {
        LexError {
            offset,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn peek_at(&self, off: usize) -> Option<u8> {
        self.bytes.get(self.pos + off).copied()
    }

    fn starts_with(&self, s: &str) -> bool {
        self.src[self.pos..].starts_with(s)
    }

    fn push(&mut self, kind: TokenKind, start: usize) {
        self.tokens.push(Token {
            kind,
            span: (start, self.pos),
        });
    }

    fn last_is_at_sign(&self) -> bool {
        matches!(
            self.tokens.last(),
            Some(Token {
                kind: TokenKind::Punct("@"),
                ..
            })
        )
    }

    fn run(&mut self) -> Result<(), LexError> {
        while self.pos < self.bytes.len() {
            let c = self.bytes[self.pos];
            match c {
                b' ' | b'\t' | b'\r' | b'\n' | 0x0c => self.pos += 1,
                b'/' if self.peek_at(1) == Some(b'/') => self.skip_line(),
                b'/' if self.peek_at(1) == Some(b'*') => self.skip_block_comment()?,
                b'(' if self.peek_at(1) == Some(b'*')
                    && self.peek_at(2) != Some(b')')
                    && !self.last_is_at_sign() =>
                {
                    self.skip_attribute()?
                }
                b'`' => self.directive()?,
                b'"' => self.string_literal()?,
                b'\\' => self.escaped_ident(),
                b'\'' => self.based_literal(None)?,
                b'0'..=b'9' => self.number()?,
                b'a'..=b'z' | b'A'..=b'Z' | b'_' => self.word(),
                b'$' => self.sys_ident()?,
                _ => self.punct()?,
            }
        }
        Ok(())
    }

    fn skip_line(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
            self.pos += 1;
        }
    }

    fn skip_block_comment(&mut self) -> Result<(), LexError> {
        let start = self.pos;
        self.pos += 2;
        while self.pos < self.bytes.len() {
            if self.starts_with("*/") {
                self.pos += 2;
                return Ok(());
            }
            self.pos += 1;
        }
        Err(self.err(start, "unterminated block comment"))
    }

    fn skip_attribute(&mut self) -> Result<(), LexError> {
        let start = self.pos;
        self.pos += 2;
        while self.pos < self.bytes.len() {
            if self.starts_with("*)") {
                self.pos += 2;
                return Ok(());
            }
            self.pos += 1;
        }
        Err(self.err(start, "unterminated attribute instance"))
    }

    fn directive(&mut self) -> Result<(), LexError> {
        let start = self.pos;
        self.pos += 1;
        let word_start = self.pos;
        while self
            .peek()
            .map(|c| c.is_ascii_alphanumeric() || c == b'_')
            .unwrap_or(false)
        {
            self.pos += 1;
        }
        let name = &self.src[word_start..self.pos];
        if SKIPPED_DIRECTIVES.contains(&name) {
            self.skip_line();
            Ok(())
        } else {
            Err(self.err(start, format!("unsupported compiler directive `{name}`")))
        }
    }

    fn string_literal(&mut self) -> Result<(), LexError> {
        let start = self.pos;
        self.pos += 1;
        let mut value = String::new();
        while let Some(c) = self.peek() {
            match c {
                b'"' => {
                    self.pos += 1;
                    self.push(TokenKind::StringLit(value), start);
                    return Ok(());
                }
                b'\n' => break,
                b'\\' => {
                    value.push('\\');
                    self.pos += 1;
                    if let Some(esc) = self.peek() {
                        // Escapes are kept verbatim; only the closing quote matters.
                        value.push(esc as char);
                        self.pos += 1;
                    }
                }
                _ => {
                    let ch = self.src[self.pos..].chars().next().unwrap();
                    value.push(ch);
                    self.pos += ch.len_utf8();
                }
            }
        }
        Err(self.err(start, "unterminated string literal"))
    }

    fn escaped_ident(&mut self) {
        let start = self.pos;
        self.pos += 1;
        let name_start = self.pos;
        while self
            .peek()
            .map(|c| !c.is_ascii_whitespace())
            .unwrap_or(false)
        {
            self.pos += 1;
        }
        let name = self.src[name_start..self.pos].to_string();
        self.push(TokenKind::Ident(format!("\\{name}")), start);
    }

    fn word(&mut self) {
        let start = self.pos;
        while self
            .peek()
            .map(|c| c.is_ascii_alphanumeric() || c == b'_' || c == b'$')
            .unwrap_or(false)
        {
            self.pos += 1;
        }
        let text = &self.src[start..self.pos];
        let kind = match Keyword::lookup(text) {
            Some(k) => TokenKind::Keyword(k),
            None => TokenKind::Ident(text.to_string()),
        };
        self.push(kind, start);
    }

    fn sys_ident(&mut self) -> Result<(), LexError> {
        let start = self.pos;
        self.pos += 1;
        let name_start = self.pos;
        while self
            .peek()
            .map(|c| c.is_ascii_alphanumeric() || c == b'_' || c == b'$')
            .unwrap_or(false)
        {
            self.pos += 1;
        }
        if name_start == self.pos {
            return Err(self.err(start, "stray `$`"));
        }
        let name = self.src[name_start..self.pos].to_string();
        self.push(TokenKind::SysIdent(name), start);
        Ok(())
    }

    fn number(&mut self) -> Result<(), LexError> {
        let start = self.pos;
        let digits = self.take_digits(|c| c.is_ascii_digit() || c == b'_');
        // Peek past spaces for a base marker: `4 'b0101` is one literal.
        let mut look = self.pos;
        while self
            .bytes
            .get(look)
            .map(|c| *c == b' ' || *c == b'\t')
            .unwrap_or(false)
        {
            look += 1;
        }
        if self.bytes.get(look) == Some(&b'\'')
            && self
                .bytes
                .get(look + 1)
                .map(|c| is_base_or_sign(*c))
                .unwrap_or(false)
        {
            let width: u32 = digits
                .parse()
                .map_err(|_| self.err(start, "literal width out of range"))?;
            if width == 0 {
                return Err(self.err(start, "zero-width literal"));
            }
            self.pos = look;
            return self.based_literal_at(start, Some(width));
        }
        if self.peek() == Some(b'.') && self.peek_at(1).map(|c| c.is_ascii_digit()).unwrap_or(false)
        {
            return Err(self.err(start, "real literal not supported"));
        }
        let value = BigUint::parse_bytes(digits.as_bytes(), 10)
            .ok_or_else(|| self.err(start, "malformed decimal literal"))?;
        self.push(
            TokenKind::Literal(Literal::from_value(None, false, value)),
            start,
        );
        Ok(())
    }

    fn take_digits(&mut self, pred: impl Fn(u8) -> bool) -> String {
        let start = self.pos;
        while self.peek().map(&pred).unwrap_or(false) {
            self.pos += 1;
        }
        self.src[start..self.pos].replace('_', "")
    }

    fn based_literal(&mut self, width: Option<u32>) -> Result<(), LexError> {
        let start = self.pos;
        self.based_literal_at(start, width)
    }

    fn based_literal_at(&mut self, start: usize, width: Option<u32>) -> Result<(), LexError> {
        debug_assert_eq!(self.peek(), Some(b'\''));
        self.pos += 1;
        let mut signed = false;
        if matches!(self.peek(), Some(b's') | Some(b'S')) {
            signed = true;
            self.pos += 1;
        }
        let base = match self.peek().map(|c| c.to_ascii_lowercase()) {
            Some(b'b') => 2u32,
            Some(b'o') => 8,
            Some(b'd') => 10,
            Some(b'h') => 16,
            _ => return Err(self.err(start, "malformed based literal: missing base")),
        };
        self.pos += 1;
        // Whitespace is permitted between base and digits.
        while matches!(self.peek(), Some(b' ') | Some(b'\t')) {
            self.pos += 1;
        }
        let digit_start = self.pos;
        while self
            .peek()
            .map(|c| c.is_ascii_alphanumeric() || c == b'_' || c == b'?')
            .unwrap_or(false)
        {
            self.pos += 1;
        }
        let digits = self.src[digit_start..self.pos]
            .replace('_', "")
            .to_ascii_lowercase()
            .replace('?', "z");
        if digits.is_empty() {
            return Err(self.err(start, "malformed based literal: missing digits"));
        }
        let lit = parse_based_digits(base, &digits, width, signed)
            .ok_or_else(|| self.err(start, "malformed based literal digits"))?;
        self.push(TokenKind::Literal(lit), start);
        Ok(())
    }

    fn punct(&mut self) -> Result<(), LexError> {
        const MULTI: &[&str] = &[
            "<<<", ">>>", "===", "!==", "<=", ">=", "==", "!=", "&&", "||", "<<", ">>", "~&",
            "~|", "~^", "^~", "**", "+:", "-:",
        ];
        const SINGLE: &[&str] = &[
            "+", "-", "*", "/", "%", "&", "|", "^", "~", "!", "<", ">", "=", "(", ")", "[", "]",
            "{", "}", ";", ",", ".", ":", "?", "@", "#",
        ];
        let start = self.pos;
        for m in MULTI {
            if self.starts_with(m) {
                self.pos += m.len();
                self.push(TokenKind::Punct(m), start);
                return Ok(());
            }
        }
        for s in SINGLE {
            if self.starts_with(s) {
                self.pos += s.len();
                self.push(TokenKind::Punct(s), start);
                return Ok(());
            }
        }
        let ch = self.src[self.pos..].chars().next().unwrap_or('\u{fffd}');
        Err(self.err(start, format!("unexpected character `{ch}`")))
    }
}

fn is_base_or_sign(c: u8) -> bool {
    matches!(
        c.to_ascii_lowercase(),
        b'b' | b'o' | b'd' | b'h' | b's'
    )
}

fn parse_based_digits(
    base: u32,
    digits: &str,
    width: Option<u32>,
    signed: bool,
) -> Option<Literal> {
    let has_xz = digits.contains('x') || digits.contains('z');
    match base {
        10 => {
            if has_xz {
                // `'dx` / `'dz`: a single digit meaning an all-x/all-z value.
                if digits.len() != 1 {
                    return None;
                }
                let bit = digits.chars().next().unwrap();
                let bits = match width {
                    Some(w) => bit.to_string().repeat(w as usize),
                    None => bit.to_string(),
                };
                Some(Literal::from_bits(width, signed, bits))
            } else {
                if !digits.bytes().all(|c| c.is_ascii_digit()) {
                    return None;
                }
                let v = BigUint::parse_bytes(digits.as_bytes(), 10)?;
                Some(Literal::from_value(width, signed, v))
            }
        }
        2 | 8 | 16 => {
            let bits_per_digit = match base {
                2 => 1,
                8 => 3,
                _ => 4,
            };
            let mut bits = String::with_capacity(digits.len() * bits_per_digit);
            for d in digits.chars() {
                match d {
                    'x' | 'z' => {
                        for _ in 0..bits_per_digit {
                            bits.push(d);
                        }
                    }
                    _ => {
                        let v = d.to_digit(base)?;
                        for i in (0..bits_per_digit).rev() {
                            bits.push(if (v >> i) & 1 == 1 { '1' } else { '0' });
                        }
                    }
                }
            }
            Some(Literal::from_bits(width, signed, bits))
        }
        _ => None,
    }
}
