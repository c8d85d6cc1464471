//! Output traces and bit-exact trace comparison.
//!
//! Testbenches are expected to emit one line per test vector in the form
//! `index=<n> out=<value>`. The harness keeps only such lines, trims
//! trailing whitespace and folds hex case; `x`/`z` digits survive folding
//! and only ever match themselves.

use serde::{Deserialize, Serialize};

/// Normalized testbench output: one record per test vector.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OutputTrace {
    records: Vec<String>,
}

impl OutputTrace {
    /// Builds a trace from raw simulator stdout, keeping only record lines.
    pub fn from_stdout(stdout: &str) -> Self {
        let records = stdout
            .lines()
            .filter(|l| l.trim_start().starts_with("index="))
            .map(normalize_record)
            .collect();
        OutputTrace { records }
    }

    /// Builds a trace from already-separated record lines (e.g. a saved
    /// golden trace); each line is normalized.
    pub fn from_records<I, S>(lines: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        OutputTrace {
            records: lines
                .into_iter()
                .map(|l| normalize_record(l.as_ref()))
                .collect(),
        }
    }

    pub fn records(&self) -> &[String] {
        &self.records
    }

    pub fn vector_count(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

impl Serialize for OutputTrace {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.records.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for OutputTrace {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let lines = Vec::<String>::deserialize(deserializer)?;
        Ok(OutputTrace::from_records(lines))
    }
}

fn normalize_record(line: &str) -> String {
    line.trim_start().trim_end().to_ascii_lowercase()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerdictStatus {
    Pass,
    Fail,
    CompileError,
    Timeout,
    SimCrash,
}

/// Location and content of the first trace divergence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mismatch {
    pub index: usize,
    pub expected: Option<String>,
    pub actual: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionalVerdict {
    pub status: VerdictStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_mismatch: Option<Mismatch>,
}

impl FunctionalVerdict {
    pub fn pass() -> Self {
        FunctionalVerdict {
            status: VerdictStatus::Pass,
            first_mismatch: None,
        }
    }

    pub fn of_status(status: VerdictStatus) -> Self {
        FunctionalVerdict {
            status,
            first_mismatch: None,
        }
    }

    pub fn is_pass(&self) -> bool {
        self.status == VerdictStatus::Pass
    }
}

/// Compares a candidate trace against the golden trace: `Pass` only when
/// the vector counts match and every record is identical after
/// normalization; otherwise `Fail` with the first divergence.
pub fn compare_traces(candidate: &OutputTrace, golden: &OutputTrace) -> FunctionalVerdict {
    let cand = candidate.records();
    let gold = golden.records();
    for (i, (c, g)) in cand.iter().zip(gold.iter()).enumerate() {
        if c != g {
            return FunctionalVerdict {
                status: VerdictStatus::Fail,
                first_mismatch: Some(Mismatch {
                    index: i,
                    expected: Some(g.clone()),
                    actual: Some(c.clone()),
                }),
            };
        }
    }
    if cand.len() != gold.len() {
        let i = cand.len().min(gold.len());
        return FunctionalVerdict {
            status: VerdictStatus::Fail,
            first_mismatch: Some(Mismatch {
                index: i,
                expected: gold.get(i).cloned(),
                actual: cand.get(i).cloned(),
            }),
        };
    }
    FunctionalVerdict::pass()
}
