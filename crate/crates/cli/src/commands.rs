//! Subcommand implementations.

use crate::config::{resolve_sim_config, resolve_workers, FileConfig};
use crate::{Cli, CliError, Command, SimArgs};
use serde::Deserialize;
use std::io::Write;
use std::path::{Path, PathBuf};
use verigrade_core::curation::{
    self, filter_dataset, join_rewards, DatasetSample, FiltrationConfig,
};
use verigrade_core::frontend::{self, SourceText};
use verigrade_core::grpo::{grpo_objective, objective_gradient, GrpoBatch, GrpoConfig, RolloutGroup};
use verigrade_core::harness::{
    mutate_for_validation, validate_testbench, HarnessError,
};
use verigrade_core::reward::{score_candidate, score_group, ScoreError};
use verigrade_core::similarity::{ast_score, CategoryWeights};

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    let file_cfg = FileConfig::load(cli.config.as_deref())?;
    let json = cli.json;
    match cli.command {
        Command::Parse { file } => cmd_parse(&file, json),
        Command::AstScore {
            golden,
            candidate,
            weights,
        } => cmd_ast_score(&golden, &candidate, weights.as_deref(), &file_cfg, json),
        Command::Score {
            sample,
            candidate,
            weights,
            sim,
        } => cmd_score(&sample, &candidate, weights.as_deref(), &sim, &file_cfg, json),
        Command::ScoreGroup {
            sample,
            candidates,
            weights,
            sim,
        } => cmd_score_group(&sample, &candidates, weights.as_deref(), &sim, &file_cfg, json),
        Command::GrpoAdvantage {
            input,
            output,
            delta_stab,
        } => cmd_grpo_advantage(&input, output.as_deref(), delta_stab, json),
        Command::GrpoObjective {
            input,
            epsilon,
            beta_kl,
            delta_stab,
            group_size,
            gradients,
        } => cmd_grpo_objective(&input, epsilon, beta_kl, delta_stab, group_size, gradients, json),
        Command::Filter {
            data,
            rewards,
            output_base,
            k,
            alpha_min,
            alpha_max,
            beta_min_std,
            workers,
        } => cmd_filter(
            &data,
            &rewards,
            output_base,
            FiltrationConfig {
                k,
                alpha_min,
                alpha_max,
                beta_min_std,
            },
            workers,
            json,
        ),
        Command::ValidateTb {
            golden,
            testbench,
            sample,
            bad,
            auto_mutants,
            sim,
        } => cmd_validate_tb(
            golden.as_deref(),
            testbench.as_deref(),
            sample.as_deref(),
            &bad,
            auto_mutants,
            &sim,
            &file_cfg,
            json,
        ),
        Command::Mutate { golden, output_dir } => cmd_mutate(&golden, output_dir.as_deref(), json),
    }
}

// ----------------------------------------------------------------------
// Shared plumbing
// ----------------------------------------------------------------------

fn read_source(path: &Path) -> Result<SourceText, CliError> {
    SourceText::from_file(path)
        .map_err(|e| CliError::Usage(format!("cannot read `{}`: {e}", path.display())))
}

fn load_weights(flag: Option<&Path>, file_cfg: &FileConfig) -> Result<CategoryWeights, CliError> {
    let path = flag.map(Path::to_path_buf).or_else(|| file_cfg.weights.clone());
    match path {
        Some(p) => CategoryWeights::load(&p)
            .map_err(|e| CliError::Usage(format!("weights `{}`: {e}", p.display()))),
        None => Ok(CategoryWeights::default()),
    }
}

fn load_sample(path: &Path) -> Result<DatasetSample, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read `{}`: {e}", path.display())))?;
    curation::parse_sample_line(text.trim())
        .map_err(|e| CliError::Domain(format!("sample `{}`: {e}", path.display())))
}

fn score_error(e: ScoreError) -> CliError {
    match e {
        ScoreError::Infra(h) => harness_error(h),
        other => CliError::Domain(other.to_string()),
    }
}

fn harness_error(e: HarnessError) -> CliError {
    match &e {
        HarnessError::ToolMissing { .. } => CliError::Infra(format!(
            "{e}; point --compile-cmd/--run-cmd (or VERIGRADE_COMPILE_CMD/VERIGRADE_RUN_CMD) at an installed simulator"
        )),
        HarnessError::BadConfig(_) | HarnessError::NoKnownBad => CliError::Usage(e.to_string()),
        HarnessError::Io(_) => CliError::Infra(e.to_string()),
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), CliError> {
    let line = serde_json::to_string(value)
        .map_err(|e| CliError::Infra(format!("serialization failure: {e}")))?;
    println!("{line}");
    Ok(())
}

fn num(v: f64) -> String {
    format!("{v:.6}")
}

// ----------------------------------------------------------------------
// parse / ast-score
// ----------------------------------------------------------------------

fn cmd_parse(file: &Path, json: bool) -> Result<(), CliError> {
    let source = read_source(file)?;
    match frontend::parse(&source) {
        Ok(ast) => {
            let doc = ast.to_canonical_json(&source.text);
            println!(
                "{}",
                serde_json::to_string_pretty(&doc)
                    .map_err(|e| CliError::Infra(e.to_string()))?
            );
            Ok(())
        }
        Err(diags) => {
            if json {
                print_json(&serde_json::json!({
                    "ok": false,
                    "messages": diags.messages,
                }))?;
            }
            Err(CliError::Domain(format!(
                "`{}` does not parse: {diags}",
                file.display()
            )))
        }
    }
}

fn cmd_ast_score(
    golden: &Path,
    candidate: &Path,
    weights: Option<&Path>,
    file_cfg: &FileConfig,
    json: bool,
) -> Result<(), CliError> {
    let weights = load_weights(weights, file_cfg)?;
    let gold = frontend::parse(&read_source(golden)?)
        .map_err(|d| CliError::Domain(format!("golden `{}`: {d}", golden.display())))?;
    let cand = frontend::parse(&read_source(candidate)?)
        .map_err(|d| CliError::Domain(format!("candidate `{}`: {d}", candidate.display())))?;
    let report = ast_score(&cand, &gold, &weights);
    if json {
        print_json(&report)?;
    } else {
        println!("{}", num(report.clamped_score));
    }
    Ok(())
}

// ----------------------------------------------------------------------
// score / score-group
// ----------------------------------------------------------------------

fn cmd_score(
    sample_path: &Path,
    candidate: &Path,
    weights: Option<&Path>,
    sim: &SimArgs,
    file_cfg: &FileConfig,
    json: bool,
) -> Result<(), CliError> {
    let sample = load_sample(sample_path)?;
    let weights = load_weights(weights, file_cfg)?;
    let cfg = resolve_sim_config(sim, file_cfg)?;
    let score =
        score_candidate(&read_source(candidate)?, &sample, &weights, &cfg).map_err(score_error)?;
    if json {
        print_json(&score)?;
    } else {
        println!("{}", num(score.reward));
    }
    Ok(())
}

fn cmd_score_group(
    sample_path: &Path,
    candidates: &[PathBuf],
    weights: Option<&Path>,
    sim: &SimArgs,
    file_cfg: &FileConfig,
    json: bool,
) -> Result<(), CliError> {
    let sample = load_sample(sample_path)?;
    let weights = load_weights(weights, file_cfg)?;
    let cfg = resolve_sim_config(sim, file_cfg)?;
    let workers = resolve_workers(sim.workers)?;
    let sources: Vec<SourceText> = candidates
        .iter()
        .map(|p| read_source(p))
        .collect::<Result<_, _>>()?;
    let group = score_group(&sources, &sample, &weights, &cfg, workers).map_err(score_error)?;
    if json {
        for slot in &group.slots {
            print_json(slot)?;
        }
        print_json(&serde_json::json!({
            "summary": {
                "prompt_id": group.prompt_id,
                "mean": group.mean,
                "std": group.std,
                "warnings": group.warnings,
            }
        }))?;
    } else {
        for (path, slot) in candidates.iter().zip(&group.slots) {
            match slot.reward() {
                Some(r) => println!("{} {}", path.display(), num(r)),
                None => println!("{} invalid", path.display()),
            }
        }
        match (group.mean, group.std) {
            (Some(m), Some(s)) => println!("mean {} std {}", num(m), num(s)),
            _ => println!("mean n/a std n/a"),
        }
        for w in &group.warnings {
            eprintln!("warning: {w}");
        }
    }
    Ok(())
}

// ----------------------------------------------------------------------
// grpo-advantage / grpo-objective
// ----------------------------------------------------------------------

#[derive(Deserialize)]
struct RewardGroupLine {
    prompt_id: String,
    rewards: Vec<f64>,
}

fn cmd_grpo_advantage(
    input: &Path,
    output: Option<&Path>,
    delta_stab: f64,
    json: bool,
) -> Result<(), CliError> {
    let text = std::fs::read_to_string(input)
        .map_err(|e| CliError::Usage(format!("cannot read `{}`: {e}", input.display())))?;
    let mut lines = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: RewardGroupLine = serde_json::from_str(line).map_err(|e| {
            CliError::Domain(format!("{}:{}: malformed group: {e}", input.display(), idx + 1))
        })?;
        let group = RolloutGroup::from_rewards(parsed.prompt_id, parsed.rewards, delta_stab)
            .map_err(|e| {
                CliError::Domain(format!("{}:{}: {e}", input.display(), idx + 1))
            })?;
        lines.push(
            serde_json::to_string(&group).map_err(|e| CliError::Infra(e.to_string()))?,
        );
    }
    let body = lines.join("\n") + "\n";
    match output {
        Some(path) => {
            std::fs::write(path, &body)
                .map_err(|e| CliError::Infra(format!("cannot write `{}`: {e}", path.display())))?;
            if !json {
                println!("wrote {} groups to {}", lines.len(), path.display());
            }
        }
        None => print!("{body}"),
    }
    Ok(())
}

fn cmd_grpo_objective(
    input: &Path,
    epsilon: f64,
    beta_kl: f64,
    delta_stab: f64,
    group_size: usize,
    gradients: bool,
    json: bool,
) -> Result<(), CliError> {
    let text = std::fs::read_to_string(input)
        .map_err(|e| CliError::Usage(format!("cannot read `{}`: {e}", input.display())))?;
    #[derive(Deserialize)]
    struct BatchLine {
        prompt_id: String,
        #[serde(flatten)]
        batch: GrpoBatch,
    }
    let mut groups: Vec<(String, Vec<GrpoBatch>)> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: BatchLine = serde_json::from_str(line).map_err(|e| {
            CliError::Domain(format!("{}:{}: malformed record: {e}", input.display(), idx + 1))
        })?;
        match groups.last_mut() {
            Some((id, batch)) if *id == parsed.prompt_id => batch.push(parsed.batch),
            _ => groups.push((parsed.prompt_id, vec![parsed.batch])),
        }
    }
    for (prompt_id, batch) in &groups {
        let cfg = GrpoConfig {
            epsilon,
            beta_kl,
            delta_stab,
            group_size: if group_size == 0 { batch.len() } else { group_size },
        };
        let breakdown = grpo_objective(batch, &cfg)
            .map_err(|e| CliError::Domain(format!("group `{prompt_id}`: {e}")))?;
        if json {
            let grads = if gradients {
                Some(
                    objective_gradient(batch, &cfg)
                        .map_err(|e| CliError::Domain(format!("group `{prompt_id}`: {e}")))?,
                )
            } else {
                None
            };
            print_json(&serde_json::json!({
                "prompt_id": prompt_id,
                "objective": breakdown.objective,
                "per_candidate": breakdown.per_candidate,
                "gradients": grads,
            }))?;
        } else {
            println!("{prompt_id} {}", num(breakdown.objective));
        }
    }
    Ok(())
}

// ----------------------------------------------------------------------
// filter
// ----------------------------------------------------------------------

fn cmd_filter(
    data: &Path,
    rewards: &Path,
    output_base: Option<PathBuf>,
    cfg: FiltrationConfig,
    workers: usize,
    json: bool,
) -> Result<(), CliError> {
    let ingest = curation::ingest_dataset(data)
        .map_err(|e| CliError::Usage(format!("cannot read `{}`: {e}", data.display())))?;
    for err in &ingest.errors {
        eprintln!("{}:{}: {}", data.display(), err.line, err.message);
    }
    if ingest.samples.is_empty() && !ingest.errors.is_empty() {
        return Err(CliError::Domain(format!(
            "no usable samples in `{}` ({} rejected)",
            data.display(),
            ingest.errors.len()
        )));
    }
    let (scored, reward_errors) = join_rewards(ingest.samples, rewards)
        .map_err(|e| CliError::Domain(e.to_string()))?;
    for err in &reward_errors {
        eprintln!("{}:{}: {}", rewards.display(), err.line, err.message);
    }
    let outcome =
        filter_dataset(&scored, &cfg, workers).map_err(|e| CliError::Domain(e.to_string()))?;

    let base = output_base.unwrap_or_else(|| data.with_extension(""));
    let write_bucket = |suffix: &str, samples: &[DatasetSample]| -> Result<PathBuf, CliError> {
        let path = PathBuf::from(format!("{}.{suffix}.jsonl", base.display()));
        let mut body = String::new();
        for s in samples {
            body.push_str(
                &serde_json::to_string(s).map_err(|e| CliError::Infra(e.to_string()))?,
            );
            body.push('\n');
        }
        std::fs::write(&path, body)
            .map_err(|e| CliError::Infra(format!("cannot write `{}`: {e}", path.display())))?;
        Ok(path)
    };
    let hard_path = write_bucket("hard", &outcome.hard)?;
    let simple_path = write_bucket("simple", &outcome.simple)?;
    let report_path = PathBuf::from(format!("{}.report.json", base.display()));
    std::fs::write(
        &report_path,
        serde_json::to_string_pretty(&outcome.report)
            .map_err(|e| CliError::Infra(e.to_string()))?,
    )
    .map_err(|e| CliError::Infra(format!("cannot write `{}`: {e}", report_path.display())))?;

    if json {
        print_json(&outcome.report)?;
    } else {
        let r = &outcome.report;
        println!(
            "total {} kept {} (hard {} simple {}) dropped {} (low-mean {} high-mean {} low-variance {})",
            r.total,
            r.kept,
            r.hard,
            r.simple,
            r.dropped,
            r.dropped_low_mean,
            r.dropped_high_mean,
            r.dropped_low_variance
        );
        println!(
            "wrote {} {} {}",
            hard_path.display(),
            simple_path.display(),
            report_path.display()
        );
    }
    Ok(())
}

// ----------------------------------------------------------------------
// validate-tb / mutate
// ----------------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
fn cmd_validate_tb(
    golden: Option<&Path>,
    testbench: Option<&Path>,
    sample: Option<&Path>,
    bad: &[PathBuf],
    auto_mutants: bool,
    sim: &SimArgs,
    file_cfg: &FileConfig,
    json: bool,
) -> Result<(), CliError> {
    let cfg = resolve_sim_config(sim, file_cfg)?;
    let workers = resolve_workers(sim.workers)?;
    let (golden_src, tb_src, saved_trace) = match sample {
        Some(path) => {
            let s = load_sample(path)?;
            (s.golden_code, s.testbench, Some(s.golden_trace))
        }
        None => {
            let g = read_source(golden.expect("clap enforces golden without sample"))?;
            let t = read_source(testbench.expect("clap enforces testbench without sample"))?;
            (g, t, None)
        }
    };

    let mut known_bad: Vec<SourceText> = bad
        .iter()
        .map(|p| read_source(p))
        .collect::<Result<_, _>>()?;
    if auto_mutants || known_bad.is_empty() {
        let outcome = mutate_for_validation(&golden_src)
            .map_err(|d| CliError::Domain(format!("golden does not parse: {d}")))?;
        for w in &outcome.warnings {
            eprintln!("warning: {w}");
        }
        known_bad.extend(outcome.mutants);
    }
    if known_bad.is_empty() {
        return Err(CliError::Domain(
            "no known-bad implementations: mutation found no sites and none were supplied"
                .to_string(),
        ));
    }

    let report = validate_testbench(
        &golden_src,
        &tb_src,
        &known_bad,
        saved_trace.as_ref(),
        &cfg,
        workers,
    )
    .map_err(harness_error)?;
    if json {
        print_json(&report)?;
    } else {
        println!(
            "golden_ok {} vectors {} ({}) known_bad_caught {}/{} valid {}",
            report.golden_ok,
            report.vector_count,
            if report.vector_count_ok { "ok" } else { "short" },
            report.known_bad.iter().filter(|b| b.caught).count(),
            report.known_bad.len(),
            report.valid
        );
        for note in &report.notes {
            println!("note: {note}");
        }
    }
    if report.valid {
        Ok(())
    } else {
        Err(CliError::Domain("testbench is not valid".to_string()))
    }
}

fn cmd_mutate(golden: &Path, output_dir: Option<&Path>, json: bool) -> Result<(), CliError> {
    let source = read_source(golden)?;
    let outcome = mutate_for_validation(&source)
        .map_err(|d| CliError::Domain(format!("`{}` does not parse: {d}", golden.display())))?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    match output_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)
                .map_err(|e| CliError::Infra(format!("cannot create `{}`: {e}", dir.display())))?;
            let stem = golden
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "golden".to_string());
            let mut paths = Vec::new();
            for m in &outcome.mutants {
                let kind = m.origin.trim_start_matches("mutant:");
                let path = dir.join(format!("{stem}.{kind}.v"));
                let mut f = std::fs::File::create(&path).map_err(|e| {
                    CliError::Infra(format!("cannot write `{}`: {e}", path.display()))
                })?;
                f.write_all(m.text.as_bytes())
                    .map_err(|e| CliError::Infra(e.to_string()))?;
                paths.push(path);
            }
            if json {
                print_json(&serde_json::json!({
                    "mutants": paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
                    "warnings": outcome.warnings,
                }))?;
            } else {
                println!("wrote {} mutants to {}", paths.len(), dir.display());
            }
        }
        None => {
            if json {
                for m in &outcome.mutants {
                    print_json(&serde_json::json!({"label": m.origin, "text": m.text}))?;
                }
            } else {
                for m in &outcome.mutants {
                    println!("// --- {} ---", m.origin);
                    println!("{}", m.text);
                }
            }
        }
    }
    Ok(())
}
