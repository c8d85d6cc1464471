//! Known-bad implementation synthesis by single-site mutation.
//!
//! Produces up to one mutant per kind from a golden module: a binary
//! operator flip (`&` ↔ `|`, `+` ↔ `-`, ...), a constant with its lowest
//! bit flipped, and an if/else (or ternary) branch swap. Sites come from
//! the parser's span bookkeeping, so each splice is textual and the rest
//! of the module is untouched. Every returned mutant re-parses.

use crate::frontend::{self, flip_operator, SourceText, Span};

#[derive(Debug, Clone)]
pub struct MutationOutcome {
    pub mutants: Vec<SourceText>,
    pub warnings: Vec<String>,
}

/// Derives known-bad variants of `golden`. A module with no eligible site
/// of any kind yields an empty list plus a warning.
pub fn mutate_for_validation(golden: &SourceText) -> Result<MutationOutcome, frontend::SyntaxDiagnostics> {
    let ast = frontend::parse(golden)?;
    let sites = &ast.mutation_sites;
    let mut mutants = Vec::new();
    let mut warnings = Vec::new();

    match sites
        .operators
        .iter()
        .find_map(|(span, op)| flip_operator(op).map(|new_op| (*span, new_op)))
    {
        Some((span, new_op)) => {
            push_if_parses(
                &mut mutants,
                &mut warnings,
                splice(&golden.text, span, new_op),
                "mutant:op-flip",
            );
        }
        None => warnings.push("no flippable binary operator found".to_string()),
    }

    match sites.literals.first() {
        Some(span) => match flip_literal(&golden.text[span.0..span.1]) {
            Some(flipped) => push_if_parses(
                &mut mutants,
                &mut warnings,
                splice(&golden.text, *span, &flipped),
                "mutant:const-flip",
            ),
            None => warnings.push("first constant could not be bit-flipped".to_string()),
        },
        None => warnings.push("no constant found".to_string()),
    }

    let branch_site = sites.if_else.first().or_else(|| sites.ternary.first());
    match branch_site {
        Some((then_span, else_span)) => {
            push_if_parses(
                &mut mutants,
                &mut warnings,
                swap_spans(&golden.text, *then_span, *else_span),
                "mutant:branch-swap",
            );
        }
        None => warnings.push("no if/else or conditional branch found".to_string()),
    }

    if mutants.is_empty() {
        warnings.push(format!(
            "`{}` has no mutable site; provide known-bad implementations explicitly",
            golden.origin
        ));
    }
    Ok(MutationOutcome { mutants, warnings })
}

fn push_if_parses(
    mutants: &mut Vec<SourceText>,
    warnings: &mut Vec<String>,
    text: String,
    label: &str,
) {
    let candidate = SourceText::labeled(text, label);
    if frontend::parse(&candidate).is_ok() {
        mutants.push(candidate);
    } else {
        warnings.push(format!("{label} did not re-parse; dropped"));
    }
}

fn splice(text: &str, span: Span, replacement: &str) -> String {
    let mut out = String::with_capacity(text.len() + replacement.len());
    out.push_str(&text[..span.0]);
    out.push_str(replacement);
    out.push_str(&text[span.1..]);
    out
}

fn swap_spans(text: &str, a: Span, b: Span) -> String {
    debug_assert!(a.1 <= b.0, "branch spans must be ordered");
    let mut out = String::with_capacity(text.len());
    out.push_str(&text[..a.0]);
    out.push_str(&text[b.0..b.1]);
    out.push_str(&text[a.1..b.0]);
    out.push_str(&text[a.0..a.1]);
    out.push_str(&text[b.1..]);
    out
}

/// Flips the lowest bit of a numeric literal, preserving its textual
/// radix style so the mutant stays visually close to the original.
fn flip_literal(original: &str) -> Option<String> {
    let tokens = frontend::lexer::tokenize(original).ok()?;
    let lit = match tokens.as_slice() {
        [tok] => match &tok.kind {
            frontend::TokenKind::Literal(l) => l.clone(),
            _ => return None,
        },
        _ => return None,
    };
    let value = lit.numeric_value()?;
    let flipped = value ^ num_bigint::BigUint::from(1u8);

    let trimmed = original.trim();
    if let Some(tick) = trimmed.find('\'') {
        let (size_part, rest) = trimmed.split_at(tick);
        let mut chars = rest.chars();
        chars.next(); // the tick
        let mut base_part = String::from("'");
        for c in chars {
            base_part.push(c);
            if matches!(c.to_ascii_lowercase(), 'b' | 'o' | 'd' | 'h') {
                break;
            }
        }
        let radix = match base_part
            .chars()
            .last()
            .map(|c| c.to_ascii_lowercase())
        {
            Some('b') => 2,
            Some('o') => 8,
            Some('d') => 10,
            Some('h') => 16,
            _ => return None,
        };
        let width: Option<u32> = size_part.trim().parse().ok();
        let mut digits = flipped.to_str_radix(radix);
        if let Some(w) = width {
            // Pad to the digit count the width implies, matching the
            // common zero-padded spelling.
            let per_digit = match radix {
                2 => 1,
                8 => 3,
                16 => 4,
                _ => 0,
            };
            if per_digit > 0 {
                let want = (w as usize).div_ceil(per_digit);
                while digits.len() < want {
                    digits.insert(0, '0');
                }
            }
        }
        Some(format!("{size_part}{base_part}{digits}"))
    } else {
        Some(flipped.to_str_radix(10))
    }
}
