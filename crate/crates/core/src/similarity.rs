//! Weighted structural similarity between two parsed modules.
//!
//! Per category the score combines three signals over that category's
//! elements: normalized Levenshtein similarity of the concatenated token
//! sequences (`0.6·sim`), name-multiset coverage of golden elements
//! (`0.5·cov`), and a redundancy penalty for generated elements with no
//! golden counterpart (`−0.3·red`). Category contributions are weighted
//! and summed, then the sum is clamped to `[0, 1]`. An identical pair
//! reaches the raw maximum `1.1` and clamps to exactly `1.0`.

use crate::frontend::{Category, VerilogAst};
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

pub const SIM_COEFF: f64 = 0.6;
pub const COV_COEFF: f64 = 0.5;
pub const RED_COEFF: f64 = 0.3;

#[derive(Debug, Error)]
pub enum WeightsError {
    #[error("failed to read weights file: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse weights file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unknown category tag `{0}`")]
    UnknownCategory(String),
    #[error("weight for `{0}` is negative ({1})")]
    Negative(String, f64),
    #[error("weight for `{0}` is not a number")]
    NotANumber(String),
    #[error("weights sum to zero; at least one category must have positive weight")]
    ZeroSum,
}

/// Per-category importance weights, normalized to sum 1 on construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryWeights {
    weights: BTreeMap<Category, f64>,
}

impl Default for CategoryWeights {
    /// Uniform weight over all categories. At scoring time weights are
    /// renormalized over the categories that actually occur in the pair,
    /// so the default behaves as uniform-over-relevant.
    fn default() -> Self {
        let weights = Category::ALL
            .iter()
            .map(|c| (*c, 1.0 / Category::ALL.len() as f64))
            .collect();
        CategoryWeights { weights }
    }
}

impl CategoryWeights {
    /// Builds weights from raw non-negative values, normalizing to sum 1.
    pub fn from_raw(raw: BTreeMap<Category, f64>) -> Result<Self, WeightsError> {
        for (c, w) in &raw {
            if w.is_nan() || w.is_infinite() {
                return Err(WeightsError::NotANumber(c.tag().to_string()));
            }
            if *w < 0.0 {
                return Err(WeightsError::Negative(c.tag().to_string(), *w));
            }
        }
        let total: f64 = raw.values().sum();
        if total <= 0.0 {
            return Err(WeightsError::ZeroSum);
        }
        let weights = raw.into_iter().map(|(c, w)| (c, w / total)).collect();
        Ok(CategoryWeights { weights })
    }

    /// Loads a flat `tag = weight` TOML document, e.g.
    /// `module = 1.0
    ///  port = 2.0`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, WeightsError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, WeightsError> {
        let table: toml::Table = text.parse()?;
        let mut raw = BTreeMap::new();
        for (key, value) in table {
            let category: Category = key
                .parse()
                .map_err(|_| WeightsError::UnknownCategory(key.clone()))?;
            let w = match value {
                toml::Value::Float(f) => f,
                toml::Value::Integer(i) => i as f64,
                _ => return Err(WeightsError::NotANumber(key)),
            };
            raw.insert(category, w);
        }
        Self::from_raw(raw)
    }

    pub fn get(&self, category: Category) -> f64 {
        self.weights.get(&category).copied().unwrap_or(0.0)
    }
}

/// Per-category breakdown of one comparison.
#[derive(Debug, Clone, Serialize)]
pub struct CategoryScore {
    pub category: Category,
    pub weight: f64,
    pub sim: f64,
    pub cov: f64,
    pub red: f64,
    pub contribution: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AstScoreReport {
    pub per_category: Vec<CategoryScore>,
    pub raw_sum: f64,
    pub clamped_score: f64,
}

/// Normalized Levenshtein similarity between two token sequences:
/// `1 − lev(a, b) / max(|a|, |b|)`, and 1.0 when both are empty.
pub fn sequence_similarity<T: PartialEq>(gen_tokens: &[T], gold_tokens: &[T]) -> f64 {
    let (n, m) = (gen_tokens.len(), gold_tokens.len());
    if n == 0 && m == 0 {
        return 1.0;
    }
    let dist = levenshtein(gen_tokens, gold_tokens);
    1.0 - dist as f64 / n.max(m) as f64
}

/// Classic two-row Levenshtein over arbitrary comparable items.
fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, ai) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, bj) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ai != bj);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Coverage and redundancy between golden and generated element name
/// multisets: `cov = |G ∩ D| / |G|` (1 when G is empty) and
/// `red = |D − G| / |D|` (0 when D is empty). Duplicate names match
/// one-to-one.
pub fn category_coverage(gen_names: &[String], gold_names: &[String]) -> (f64, f64) {
    let mut gold_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for g in gold_names {
        *gold_counts.entry(g.as_str()).or_default() += 1;
    }
    let mut gen_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for d in gen_names {
        *gen_counts.entry(d.as_str()).or_default() += 1;
    }
    let intersection: usize = gen_counts
        .iter()
        .map(|(name, dc)| gold_counts.get(name).copied().unwrap_or(0).min(*dc))
        .sum();
    let cov = if gold_names.is_empty() {
        1.0
    } else {
        intersection as f64 / gold_names.len() as f64
    };
    let red = if gen_names.is_empty() {
        0.0
    } else {
        (gen_names.len() - intersection) as f64 / gen_names.len() as f64
    };
    (cov, red)
}

fn concat_tokens(ast: &VerilogAst, category: Category) -> Vec<&str> {
    ast.elements(category)
        .iter()
        .flat_map(|e| e.token_sequence.iter().map(String::as_str))
        .collect()
}

fn element_names(ast: &VerilogAst, category: Category) -> Vec<String> {
    ast.elements(category)
        .iter()
        .map(|e| e.canonical_name.clone())
        .collect()
}

/// Scores a generated module against a golden module.
///
/// Weights are renormalized over the categories non-empty on either side,
/// so categories absent from both modules never dilute the score and a
/// hallucinated category draws weight away from matching ones.
pub fn ast_score(gen: &VerilogAst, gold: &VerilogAst, weights: &CategoryWeights) -> AstScoreReport {
    let relevant: Vec<Category> = Category::ALL
        .iter()
        .copied()
        .filter(|c| !gen.is_empty_category(*c) || !gold.is_empty_category(*c))
        .collect();
    let mass: f64 = relevant.iter().map(|c| weights.get(*c)).sum();
    let per_category: Vec<CategoryScore> = relevant
        .iter()
        .map(|&category| {
            let weight = if mass > 0.0 {
                weights.get(category) / mass
            } else {
                // Configured weights put no mass on any relevant category;
                // fall back to uniform so the score stays defined.
                1.0 / relevant.len() as f64
            };
            let gen_tokens = concat_tokens(gen, category);
            let gold_tokens = concat_tokens(gold, category);
            let sim = sequence_similarity(&gen_tokens, &gold_tokens);
            let (cov, red) =
                category_coverage(&element_names(gen, category), &element_names(gold, category));
            let contribution = weight * (SIM_COEFF * sim + COV_COEFF * cov - RED_COEFF * red);
            CategoryScore {
                category,
                weight,
                sim,
                cov,
                red,
                contribution,
            }
        })
        .collect();
    let raw_sum: f64 = per_category.iter().map(|c| c.contribution).sum();
    AstScoreReport {
        per_category,
        raw_sum,
        clamped_score: raw_sum.clamp(0.0, 1.0),
    }
}
