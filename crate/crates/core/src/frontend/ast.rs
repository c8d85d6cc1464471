//! Category-structured AST produced by the parser.
//!
//! Rather than a deep expression tree, the parser decomposes a module into
//! flat per-category element lists. Each element carries a canonical name
//! (its identity for coverage/redundancy set arithmetic) and a normalized
//! token sequence (the operand for sequence similarity). Byte spans back
//! into the original source support mutation and coverage checks.

use super::token::Span;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

/// Structural category an AST element belongs to. The set is closed;
/// constructs that fit nowhere else (currently `initial` blocks) map to
/// [`Category::Other`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Module,
    Port,
    Parameter,
    NetDecl,
    RegDecl,
    Assign,
    Always,
    Instance,
    FunctionDecl,
    Other,
}

impl Category {
    pub const ALL: [Category; 10] = [
        Category::Module,
        Category::Port,
        Category::Parameter,
        Category::NetDecl,
        Category::RegDecl,
        Category::Assign,
        Category::Always,
        Category::Instance,
        Category::FunctionDecl,
        Category::Other,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Category::Module => "module",
            Category::Port => "port",
            Category::Parameter => "parameter",
            Category::NetDecl => "net",
            Category::RegDecl => "reg",
            Category::Assign => "assign",
            Category::Always => "always",
            Category::Instance => "instance",
            Category::FunctionDecl => "function",
            Category::Other => "other",
        }
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .iter()
            .copied()
            .find(|c| c.tag() == s)
            .ok_or_else(|| format!("unknown category tag `{s}`"))
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// One structural element of a parsed module.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AstElement {
    pub category: Category,
    /// Stable identity under whitespace/comment changes; identifiers for
    /// named constructs, `<tag>:<lhs-names>` for unnamed ones.
    pub canonical_name: String,
    /// Normalized token strings covering the element.
    pub token_sequence: Vec<String>,
    /// Byte span into the original source.
    pub span: Span,
}

/// Source locations usable for single-site mutations, collected as a side
/// product of parsing.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MutationSites {
    /// Binary/unary operator token spans in expression context.
    pub operators: Vec<(Span, &'static str)>,
    /// Numeric literal spans in expression context (x/z-free only).
    pub literals: Vec<Span>,
    /// `(then, else)` statement spans of if/else statements.
    pub if_else: Vec<(Span, Span)>,
    /// `(then, else)` expression spans of conditional (`?:`) expressions.
    pub ternary: Vec<(Span, Span)>,
}

/// A successfully parsed single-module source file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerilogAst {
    pub module_name: String,
    elements: BTreeMap<Category, Vec<AstElement>>,
    pub(crate) mutation_sites: MutationSites,
}

impl VerilogAst {
    pub(crate) fn new(
        module_name: String,
        elements: BTreeMap<Category, Vec<AstElement>>,
        mutation_sites: MutationSites,
    ) -> Self {
        VerilogAst {
            module_name,
            elements,
            mutation_sites,
        }
    }

    /// Elements of one category in source order.
    pub fn elements(&self, category: Category) -> &[AstElement] {
        self.elements.get(&category).map(Vec::as_slice).unwrap_or(&[])
    }

    /// All (category, elements) pairs with at least one element, in
    /// category order.
    pub fn categories(&self) -> impl Iterator<Item = (Category, &[AstElement])> {
        Category::ALL
            .iter()
            .copied()
            .filter_map(move |c| {
                let elems = self.elements(c);
                (!elems.is_empty()).then_some((c, elems))
            })
    }

    pub fn is_empty_category(&self, category: Category) -> bool {
        self.elements(category).is_empty()
    }

    /// Element-to-span index over every element of every category.
    pub fn span_index(&self) -> Vec<(&AstElement, Span)> {
        Category::ALL
            .iter()
            .flat_map(|c| self.elements(*c))
            .map(|e| (e, e.span))
            .collect()
    }

    /// Canonical JSON document with stable key order, suitable for
    /// golden-file testing. Spans are reported as character offsets.
    pub fn to_canonical_json(&self, source: &str) -> serde_json::Value {
        let byte_to_char = byte_to_char_index(source);
        let dump = |c: Category| -> Vec<serde_json::Value> {
            self.elements(c)
                .iter()
                .map(|e| {
                    serde_json::json!({
                        "name": e.canonical_name,
                        "tokens": e.token_sequence,
                        "span": [
                            byte_to_char(e.span.0),
                            byte_to_char(e.span.1),
                        ],
                    })
                })
                .collect()
        };
        let mut elements = serde_json::Map::new();
        for c in Category::ALL {
            elements.insert(c.tag().to_string(), serde_json::Value::Array(dump(c)));
        }
        serde_json::json!({
            "module_name": self.module_name,
            "elements": elements,
        })
    }
}

fn byte_to_char_index(source: &str) -> impl Fn(usize) -> usize + '_ {
    move |byte_off: usize| source[..byte_off.min(source.len())].chars().count()
}

/// Severity of a diagnostic message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

/// A positioned diagnostic. `offset` counts characters from the start of
/// the source; `line`/`column` are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub offset: usize,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

/// Parse failure report. `ok()` is false exactly when an error-severity
/// message is present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SyntaxDiagnostics {
    pub messages: Vec<Diagnostic>,
}

impl SyntaxDiagnostics {
    pub fn ok(&self) -> bool {
        !self
            .messages
            .iter()
            .any(|m| m.severity == Severity::Error)
    }

    pub(crate) fn single_error(source: &str, byte_offset: usize, message: String) -> Self {
        let (offset, line, column) = locate(source, byte_offset);
        SyntaxDiagnostics {
            messages: vec![Diagnostic {
                severity: Severity::Error,
                offset,
                line,
                column,
                message,
            }],
        }
    }
}

impl fmt::Display for SyntaxDiagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, m) in self.messages.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{}:{}: {}", m.line, m.column, m.message)?;
        }
        Ok(())
    }
}

/// Convert a byte offset into (char offset, 1-based line, 1-based column).
fn locate(source: &str, byte_offset: usize) -> (usize, usize, usize) {
    let byte_offset = byte_offset.min(source.len());
    let mut char_off = 0;
    let mut line = 1;
    let mut column = 1;
    for (b, ch) in source.char_indices() {
        if b >= byte_offset {
            break;
        }
        char_off += 1;
        if ch == '\n' {
            line += 1;
            column = 1;
        } else {
            column += 1;
        }
    }
    (char_off, line, column)
}
