//! Tiered candidate reward.
//!
//! A candidate earns `2.0` when its simulated output reproduces the saved
//! golden trace bit-exactly, `0.1 + ast_score` when it is syntactically
//! correct (it parses *and* the simulator compiles it) but functionally
//! wrong, and `0` otherwise. Infrastructure failures — a missing simulator,
//! a broken scratch directory — are hard errors, never a zero reward.

use crate::curation::DatasetSample;
use crate::exec;
use crate::frontend::{self, SourceText};
use crate::grpo::{population_stats, GrpoError, RolloutGroup};
use crate::harness::{
    run_simulation, FunctionalVerdict, HarnessError, SimOutcome, SimulatorConfig, VerdictStatus,
};
use crate::similarity::{ast_score, CategoryWeights};
use serde::Serialize;
use thiserror::Error;

pub const REWARD_FUNCTIONAL: f64 = 2.0;
pub const REWARD_SYNTAX_BASE: f64 = 0.1;
pub const REWARD_AST_WEIGHT: f64 = 1.0;

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("simulator infrastructure failure: {0}")]
    Infra(#[from] HarnessError),
    #[error("invalid sample `{sample_id}`: {reason}")]
    InvalidSample { sample_id: String, reason: String },
    #[error("a rollout group needs at least 2 candidates, got {0}")]
    GroupTooSmall(usize),
}

/// Full verdict trail for one candidate.
#[derive(Debug, Clone, Serialize)]
pub struct CandidateScore {
    pub candidate_id: String,
    /// Parses in the frontend and compiles under the simulator.
    pub syntax_ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ast_score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub functional: Option<FunctionalVerdict>,
    pub reward: f64,
    /// Parse or compile diagnostics when a tier was missed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// The reward tiers as a pure function of the three signals.
pub fn combine_reward(syntax_ok: bool, functionally_correct: bool, ast_score: f64) -> f64 {
    if functionally_correct {
        REWARD_FUNCTIONAL
    } else if syntax_ok {
        REWARD_SYNTAX_BASE + REWARD_AST_WEIGHT * ast_score
    } else {
        0.0
    }
}

/// Scores one candidate against a dataset sample: parse, then simulate and
/// compare against the saved golden trace, then fall back to structural
/// similarity. All intermediate verdicts are retained.
pub fn score_candidate(
    candidate: &SourceText,
    sample: &DatasetSample,
    weights: &CategoryWeights,
    cfg: &SimulatorConfig,
) -> Result<CandidateScore, ScoreError> {
    let candidate_id = candidate.origin.clone();
    let golden_ast = frontend::parse(&sample.golden_code).map_err(|d| ScoreError::InvalidSample {
        sample_id: sample.sample_id.clone(),
        reason: format!("golden code does not parse: {d}"),
    })?;

    let candidate_ast = match frontend::parse(candidate) {
        Ok(ast) => ast,
        Err(diags) => {
            return Ok(CandidateScore {
                candidate_id,
                syntax_ok: false,
                ast_score: None,
                functional: None,
                reward: combine_reward(false, false, 0.0),
                detail: Some(format!("parse error: {diags}")),
            });
        }
    };

    let outcome = run_simulation(candidate, &sample.testbench, cfg)?;
    if let SimOutcome::CompileFailed { log, .. } = &outcome {
        // Parseable here but rejected by the simulator: not syntactically
        // correct for reward purposes.
        return Ok(CandidateScore {
            candidate_id,
            syntax_ok: false,
            ast_score: None,
            functional: Some(FunctionalVerdict::of_status(VerdictStatus::CompileError)),
            reward: combine_reward(false, false, 0.0),
            detail: Some(format!("simulator compile failed: {}", first_line(log))),
        });
    }
    let functional = outcome.verdict_against(&sample.golden_trace);
    let structural = ast_score(&candidate_ast, &golden_ast, weights).clamped_score;
    let reward = combine_reward(true, functional.is_pass(), structural);
    Ok(CandidateScore {
        candidate_id,
        syntax_ok: true,
        ast_score: Some(structural),
        functional: Some(functional),
        reward,
    detail: None,
    })
}

fn first_line(log: &str) -> &str {
    log.lines().next().unwrap_or("")
}

/// One slot of a scored group: either a full score or the infrastructure
/// error that invalidated the slot.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "slot")]
#[serde(rename_all = "snake_case")]
pub enum SlotOutcome {
    Scored(CandidateScore),
    Invalid { candidate_id: String, error: String },
}

impl SlotOutcome {
    pub fn reward(&self) -> Option<f64> {
        match self {
            SlotOutcome::Scored(s) => Some(s.reward),
            SlotOutcome::Invalid { .. } => None,
        }
    }
}

/// Scores for one rollout group, with population statistics over the
/// valid slots.
#[derive(Debug, Clone, Serialize)]
pub struct GroupScore {
    pub prompt_id: String,
    pub slots: Vec<SlotOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std: Option<f64>,
    pub warnings: Vec<String>,
}

impl GroupScore {
    pub fn valid_rewards(&self) -> Vec<f64> {
        self.slots.iter().filter_map(|s| s.reward()).collect()
    }

    /// Converts the valid rewards into a normalized rollout group.
    pub fn to_rollout_group(&self, delta_stab: f64) -> Result<RolloutGroup, GrpoError> {
        RolloutGroup::from_rewards(self.prompt_id.clone(), self.valid_rewards(), delta_stab)
    }
}

/// Scores a whole candidate group for one sample. Simulations run
/// concurrently up to `workers`; output order follows candidate order.
/// Per-candidate infrastructure failures invalidate their slot (with a
/// warning) instead of failing the group.
pub fn score_group(
    candidates: &[SourceText],
    sample: &DatasetSample,
    weights: &CategoryWeights,
    cfg: &SimulatorConfig,
    workers: usize,
) -> Result<GroupScore, ScoreError> {
    if candidates.len() < 2 {
        return Err(ScoreError::GroupTooSmall(candidates.len()));
    }
    // Surface sample-level problems once, before burning G simulations.
    frontend::parse(&sample.golden_code).map_err(|d| ScoreError::InvalidSample {
        sample_id: sample.sample_id.clone(),
        reason: format!("golden code does not parse: {d}"),
    })?;

    let results: Vec<Result<CandidateScore, ScoreError>> = exec::map_bounded(
        candidates,
        workers,
        |candidate| score_candidate(candidate, sample, weights, cfg),
    );
    let mut slots = Vec::with_capacity(candidates.len());
    let mut warnings = Vec::new();
    for (candidate, result) in candidates.iter().zip(results) {
        match result {
            Ok(score) => slots.push(SlotOutcome::Scored(score)),
            Err(e) => {
                warnings.push(format!(
                    "slot `{}` excluded from statistics: {e}",
                    candidate.origin
                ));
                slots.push(SlotOutcome::Invalid {
                    candidate_id: candidate.origin.clone(),
                    error: e.to_string(),
                });
            }
        }
    }
    let rewards: Vec<f64> = slots.iter().filter_map(|s| s.reward()).collect();
    let (mean, std) = if rewards.is_empty() {
        (None, None)
    } else {
        let (m, s) = population_stats(&rewards);
        (Some(m), Some(s))
    };
    Ok(GroupScore {
        prompt_id: sample.sample_id.clone(),
        slots,
        mean,
        std,
        warnings,
    })
}
