//! Dataset ingestion, adaptive filtration and the difficulty split.
//!
//! A sample survives filtration when the mean of its k candidate rewards
//! lies inside `[alpha_min, alpha_max]` (closed on both ends) and the
//! population standard deviation strictly exceeds `beta_min_std`. Kept
//! samples get a difficulty `1 − (μ − α_min)/(α_max − α_min)` and land in
//! the `Hard` bucket when it strictly exceeds 0.5.

use crate::exec;
use crate::frontend::{self, SourceText};
use crate::grpo::population_stats;
use crate::harness::OutputTrace;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;
use thiserror::Error;

/// Minimum saved-trace length for an ingested sample.
pub const MIN_TRACE_VECTORS: usize = 100;

#[derive(Debug, Error)]
pub enum CurationError {
    #[error("invalid filtration config: {0}")]
    BadConfig(String),
    #[error("sample `{sample_id}` has {got} rewards, expected k={want}")]
    WrongRewardCount {
        sample_id: String,
        got: usize,
        want: usize,
    },
    #[error("sample `{sample_id}` carries reward {value} outside {{0}} ∪ [0.1, 1.1] ∪ {{2.0}}")]
    IllegalReward { sample_id: String, value: f64 },
    #[error("mean reward {mean} outside [{lo}, {hi}]; run filtration before difficulty scoring")]
    MeanOutOfRange { mean: f64, lo: f64, hi: f64 },
    #[error("no rewards supplied for sample `{0}`")]
    MissingRewards(String),
    #[error("dataset I/O failure: {0}")]
    Io(#[from] std::io::Error),
}

/// Filtration thresholds. Defaults: `k = 8`, `alpha_min = 0.3`,
/// `alpha_max = 1.8`, `beta_min_std = 0.1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FiltrationConfig {
    pub k: usize,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub beta_min_std: f64,
}

impl Default for FiltrationConfig {
    fn default() -> Self {
        FiltrationConfig {
            k: 8,
            alpha_min: 0.3,
            alpha_max: 1.8,
            beta_min_std: 0.1,
        }
    }
}

impl FiltrationConfig {
    pub fn validate(&self) -> Result<(), CurationError> {
        if self.k < 2 {
            return Err(CurationError::BadConfig(format!(
                "k must be >= 2, got {}",
                self.k
            )));
        }
        if !(self.alpha_min >= 0.0 && self.alpha_min < self.alpha_max) {
            return Err(CurationError::BadConfig(format!(
                "need 0 <= alpha_min < alpha_max, got [{}, {}]",
                self.alpha_min, self.alpha_max
            )));
        }
        if !(self.beta_min_std >= 0.0) {
            return Err(CurationError::BadConfig(format!(
                "beta_min_std must be >= 0, got {}",
                self.beta_min_std
            )));
        }
        Ok(())
    }
}

/// One curated unit: prompt, golden implementation, testbench and the
/// saved golden simulation output. `reasoning` is pass-through metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSample {
    pub sample_id: String,
    pub prompt: String,
    #[serde(with = "source_as_string")]
    pub golden_code: SourceText,
    #[serde(with = "source_as_string")]
    pub testbench: SourceText,
    pub golden_trace: OutputTrace,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning: Option<String>,
}

/// Serializes embedded sources as plain strings; origins are derived from
/// the surrounding sample on load.
mod source_as_string {
    use super::SourceText;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(src: &SourceText, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&src.text)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<SourceText, D::Error> {
        Ok(SourceText::inline(String::deserialize(de)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Bucket {
    Hard,
    Simple,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    LowMean,
    HighMean,
    LowVariance,
}

/// Filtration verdict for one sample.
#[derive(Debug, Clone, Serialize)]
pub struct SampleVerdict {
    pub sample_id: String,
    pub mean_reward: f64,
    pub std_reward: f64,
    pub kept: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drop_reason: Option<DropReason>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub difficulty: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bucket: Option<Bucket>,
}

fn legal_reward(r: f64) -> bool {
    const EPS: f64 = 1e-9;
    r.is_finite()
        && (r.abs() <= EPS
            || (r - 2.0).abs() <= EPS
            || (0.1 - EPS..=1.1 + EPS).contains(&r))
}

/// Difficulty `δ = 1 − (μ − α_min)/(α_max − α_min)`; only defined for
/// means that survived filtration.
pub fn difficulty_score(mean_reward: f64, cfg: &FiltrationConfig) -> Result<f64, CurationError> {
    cfg.validate()?;
    if !(cfg.alpha_min..=cfg.alpha_max).contains(&mean_reward) {
        return Err(CurationError::MeanOutOfRange {
            mean: mean_reward,
            lo: cfg.alpha_min,
            hi: cfg.alpha_max,
        });
    }
    Ok(1.0 - (mean_reward - cfg.alpha_min) / (cfg.alpha_max - cfg.alpha_min))
}

/// Assesses one sample's candidate rewards against the filtration rules.
pub fn assess_sample(
    sample_id: &str,
    candidate_rewards: &[f64],
    cfg: &FiltrationConfig,
) -> Result<SampleVerdict, CurationError> {
    cfg.validate()?;
    if candidate_rewards.len() != cfg.k {
        return Err(CurationError::WrongRewardCount {
            sample_id: sample_id.to_string(),
            got: candidate_rewards.len(),
            want: cfg.k,
        });
    }
    if let Some(bad) = candidate_rewards.iter().find(|r| !legal_reward(**r)) {
        return Err(CurationError::IllegalReward {
            sample_id: sample_id.to_string(),
            value: *bad,
        });
    }
    let (mean, std) = population_stats(candidate_rewards);
    let drop_reason = if mean < cfg.alpha_min {
        Some(DropReason::LowMean)
    } else if mean > cfg.alpha_max {
        Some(DropReason::HighMean)
    } else if !(std > cfg.beta_min_std) {
        Some(DropReason::LowVariance)
    } else {
        None
    };
    let kept = drop_reason.is_none();
    let (difficulty, bucket) = if kept {
        let d = difficulty_score(mean, cfg)?;
        let bucket = if d > 0.5 { Bucket::Hard } else { Bucket::Simple };
        (Some(d), Some(bucket))
    } else {
        (None, None)
    };
    Ok(SampleVerdict {
        sample_id: sample_id.to_string(),
        mean_reward: mean,
        std_reward: std,
        kept,
        drop_reason,
        difficulty,
        bucket,
    })
}

/// Aggregate counts plus per-sample verdicts, ordered by sample id.
#[derive(Debug, Clone, Serialize)]
pub struct FilterReport {
    pub total: usize,
    pub kept: usize,
    pub dropped: usize,
    pub hard: usize,
    pub simple: usize,
    pub dropped_low_mean: usize,
    pub dropped_high_mean: usize,
    pub dropped_low_variance: usize,
    pub verdicts: Vec<SampleVerdict>,
}

#[derive(Debug, Clone)]
pub struct FilterOutcome {
    /// Kept samples ordered by sample id.
    pub filtered: Vec<DatasetSample>,
    pub hard: Vec<DatasetSample>,
    pub simple: Vec<DatasetSample>,
    pub report: FilterReport,
}

/// Filters a dataset given each sample's k candidate rewards. Assessment
/// may run in parallel; outputs are merged by sample id so the result is
/// identical to sequential execution.
pub fn filter_dataset(
    scored: &[(DatasetSample, Vec<f64>)],
    cfg: &FiltrationConfig,
    workers: usize,
) -> Result<FilterOutcome, CurationError> {
    cfg.validate()?;
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|a, b| scored[*a].0.sample_id.cmp(&scored[*b].0.sample_id));

    let verdicts: Vec<Result<SampleVerdict, CurationError>> = exec::map_bounded(
        &order,
        workers,
        |&idx| {
            let (sample, rewards) = &scored[idx];
            assess_sample(&sample.sample_id, rewards, cfg)
        },
    );

    let mut filtered = Vec::new();
    let mut hard = Vec::new();
    let mut simple = Vec::new();
    let mut report = FilterReport {
        total: scored.len(),
        kept: 0,
        dropped: 0,
        hard: 0,
        simple: 0,
        dropped_low_mean: 0,
        dropped_high_mean: 0,
        dropped_low_variance: 0,
        verdicts: Vec::with_capacity(scored.len()),
    };
    for (&idx, verdict) in order.iter().zip(verdicts) {
        let verdict = verdict?;
        let sample = &scored[idx].0;
        if verdict.kept {
            report.kept += 1;
            filtered.push(sample.clone());
            match verdict.bucket {
                Some(Bucket::Hard) => {
                    report.hard += 1;
                    hard.push(sample.clone());
                }
                Some(Bucket::Simple) => {
                    report.simple += 1;
                    simple.push(sample.clone());
                }
                None => unreachable!("kept samples are always bucketed"),
            }
        } else {
            report.dropped += 1;
            match verdict.drop_reason {
                Some(DropReason::LowMean) => report.dropped_low_mean += 1,
                Some(DropReason::HighMean) => report.dropped_high_mean += 1,
                Some(DropReason::LowVariance) => report.dropped_low_variance += 1,
                None => unreachable!("dropped samples carry a reason"),
            }
        }
        report.verdicts.push(verdict);
    }
    Ok(FilterOutcome {
        filtered,
        hard,
        simple,
        report,
    })
}

/// A per-line ingestion failure.
#[derive(Debug, Clone, Serialize)]
pub struct IngestError {
    /// 1-based line number in the input file.
    pub line: usize,
    pub message: String,
}

#[derive(Debug)]
pub struct IngestOutcome {
    pub samples: Vec<DatasetSample>,
    pub errors: Vec<IngestError>,
}

/// Reads a line-delimited JSON dataset, validating each sample: the golden
/// implementation must parse and the saved trace must carry at least
/// [`MIN_TRACE_VECTORS`] vectors. Malformed lines are reported with their
/// line numbers; ingestion continues past them.
pub fn ingest_dataset(path: impl AsRef<Path>) -> Result<IngestOutcome, CurationError> {
    let file = std::fs::File::open(path.as_ref())?;
    let reader = std::io::BufReader::new(file);
    let mut samples = Vec::new();
    let mut errors = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_sample_line(&line) {
            Ok(sample) => samples.push(sample),
            Err(message) => errors.push(IngestError {
                line: line_no,
                message,
            }),
        }
    }
    Ok(IngestOutcome { samples, errors })
}

/// Parses and validates one dataset line.
pub fn parse_sample_line(line: &str) -> Result<DatasetSample, String> {
    let mut sample: DatasetSample =
        serde_json::from_str(line).map_err(|e| format!("malformed sample: {e}"))?;
    sample.golden_code.origin = format!("{}:golden", sample.sample_id);
    sample.testbench.origin = format!("{}:testbench", sample.sample_id);
    if let Err(diags) = frontend::parse(&sample.golden_code) {
        return Err(format!(
            "golden code does not parse: {}",
            diags.messages.first().map(|m| m.message.as_str()).unwrap_or("?")
        ));
    }
    let n = sample.golden_trace.vector_count();
    if n < MIN_TRACE_VECTORS {
        return Err(format!(
            "vector_count < {MIN_TRACE_VECTORS}: saved trace has only {n} vectors"
        ));
    }
    Ok(sample)
}

/// Joins dataset samples with a rewards file (`{"sample_id": ..,
/// "rewards": [..]}` per line) by sample id.
pub fn join_rewards(
    samples: Vec<DatasetSample>,
    rewards_path: impl AsRef<Path>,
) -> Result<(Vec<(DatasetSample, Vec<f64>)>, Vec<IngestError>), CurationError> {
    #[derive(Deserialize)]
    struct RewardLine {
        sample_id: String,
        rewards: Vec<f64>,
    }
    let file = std::fs::File::open(rewards_path.as_ref())?;
    let reader = std::io::BufReader::new(file);
    let mut by_id: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut errors = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<RewardLine>(&line) {
            Ok(r) => {
                by_id.insert(r.sample_id, r.rewards);
            }
            Err(e) => errors.push(IngestError {
                line: idx + 1,
                message: format!("malformed rewards line: {e}"),
            }),
        }
    }
    let mut joined = Vec::new();
    for sample in samples {
        match by_id.remove(&sample.sample_id) {
            Some(rewards) => joined.push((sample, rewards)),
            None => {
                return Err(CurationError::MissingRewards(sample.sample_id));
            }
        }
    }
    Ok((joined, errors))
}
