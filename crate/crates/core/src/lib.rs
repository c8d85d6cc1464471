//! Deterministic grading toolkit for generated Verilog.
//!
//! The crate scores candidate RTL against a golden reference through three
//! tiers — parseability, structural AST similarity, and functional
//! equivalence under a testbench driven by an external simulator — and
//! provides the group-relative advantage and clipped-surrogate math plus
//! dataset filtration used to train code generators on those scores.
//!
//! Modules:
//!
//! - [`frontend`]: lexer/parser producing a category-structured AST.
//! - [`similarity`]: weighted per-category structural similarity score.
//! - [`harness`]: external-simulator driver, trace comparison, testbench
//!   validation and mutation-based known-bad generation.
//! - [`reward`]: the tiered reward combining the three signals.
//! - [`grpo`]: group-normalized advantages, clipped surrogate objective,
//!   KL penalty and analytic gradients over supplied log-probabilities.
//! - [`curation`]: dataset ingestion, adaptive filtration and the
//!   hard/simple difficulty split.
//!
//! The `parallel` feature (on by default) runs batch work on a rayon
//! thread pool; without it every batched operation falls back to an
//! equivalent sequential path with identical results.

pub mod curation;
pub mod exec;
pub mod frontend;
pub mod grpo;
pub mod harness;
pub mod reward;
pub mod similarity;

pub use frontend::{Category, SourceText, SyntaxDiagnostics, VerilogAst};
