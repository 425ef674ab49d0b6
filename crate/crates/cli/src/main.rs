//! `ibkit`: gradient and oracle checks, image corruption, toy-task training
//! and robustness evaluation.
//!
//! Exit status: 0 on success, 1 when a check runs but fails, 2 on usage,
//! input or I/O errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ibkit_core::adapter::{fused_gradcheck, FusedGradCheckConfig, HIDDEN_RATIO};
use ibkit_core::corruptions::{corrupt, CorruptionKind, CorruptionSpec, Image, MAX_SEVERITY, MIN_SEVERITY};
use ibkit_core::oracle::{equivalence_check_with, EquivalenceConfig, IbKind};
use ibkit_harness::report::compare_reports;
use ibkit_harness::{evaluate, load_model, save_model, train, EvalConfig, ModelKind, RobustnessReport, TrainConfig};
use serde::Serialize;
use serde_json::json;

const GRADCHECK_TOLERANCE: f64 = 1e-4;
const EQUIVALENCE_TOLERANCE: f64 = 1e-10;
const NEGATIVE_CONTROL_FLOOR: f64 = 1e-3;

#[derive(Parser)]
#[command(name = "ibkit", version, about = "Covariance-gated adapter verification and robustness toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Finite-difference check of every fused-adapter gradient.
    Gradcheck(GradcheckArgs),
    /// Compare the clustering iterate with its channel-attention form.
    VerifyIb(VerifyIbArgs),
    /// Apply one corruption to an image (PNG or ASCII PPM).
    Corrupt(CorruptArgs),
    /// Train a classifier on clean toy scenes and write a checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint over a corruption grid.
    Eval(EvalArgs),
    /// Side-by-side comparison of two robustness reports.
    Report(ReportArgs),
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Tokens.
    #[arg(long, default_value_t = 8)]
    n: usize,
    /// Channels.
    #[arg(long, default_value_t = 16)]
    d: usize,
    #[arg(long, default_value_t = 4)]
    heads: usize,
    /// MLP hidden width (default 4 d).
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long, default_value_t = 1e-5)]
    step: f64,
}

#[derive(Args)]
struct VerifyIbArgs {
    #[arg(long, default_value_t = 100)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    first_seed: u64,
    #[arg(long, value_parser = parse_ib_kind)]
    kind: IbKind,
    /// Skip center normalization (negative control: deviations must exceed 1e-3).
    #[arg(long)]
    unnormalized: bool,
}

#[derive(Args)]
struct CorruptArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_parser = parse_corruption_kind)]
    kind: CorruptionKind,
    #[arg(long, allow_negative_numbers = true)]
    severity: i64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_parser = parse_model_kind)]
    model: Option<ModelKind>,
    /// JSON training configuration; missing fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    ckpt: PathBuf,
    /// JSON evaluation grid; missing fields take their defaults.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    /// Print the comparison as JSON instead of a table.
    #[arg(long)]
    json: bool,
}

fn parse_ib_kind(s: &str) -> Result<IbKind, String> {
    s.parse().map_err(|e: ibkit_core::Error| e.to_string())
}

fn parse_corruption_kind(s: &str) -> Result<CorruptionKind, String> {
    s.parse().map_err(|e: ibkit_core::Error| e.to_string())
}

fn parse_model_kind(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: ibkit_core::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {}", one_line(&e));
            ExitCode::from(2)
        }
    }
}

fn one_line(e: &anyhow::Error) -> String {
    e.chain().map(ToString::to_string).collect::<Vec<_>>().join(": ").replace('\n', " ")
}

/// `Ok(false)` means a check ran and failed.
fn run(command: Command) -> Result<bool> {
    match command {
        Command::Gradcheck(args) => gradcheck(args),
        Command::VerifyIb(args) => verify_ib(args),
        Command::Corrupt(args) => corrupt_image(args).map(|()| true),
        Command::Train(args) => train_model(args).map(|()| true),
        Command::Eval(args) => eval_model(args).map(|()| true),
        Command::Report(args) => report(args).map(|()| true),
    }
}

fn print_json(value: &impl Serialize) -> Result<()> {
    println!("{}", serde_json::to_string(value)?);
    Ok(())
}

fn gradcheck(args: GradcheckArgs) -> Result<bool> {
    let cfg = FusedGradCheckConfig {
        tokens: args.n,
        dim: args.d,
        heads: args.heads,
        hidden: args.hidden.unwrap_or(HIDDEN_RATIO * args.d),
        step: args.step,
        param_scale: None,
    };
    let check = fused_gradcheck(args.seed, &cfg)?;
    for slot in check.params.slots.iter().chain([&check.input]) {
        print_json(&json!({
            "seed": args.seed,
            "slot": slot.slot,
            "entries": slot.entries,
            "rel_error": slot.rel_error,
            "max_abs_error": slot.max_abs_error,
            "pass": slot.rel_error < GRADCHECK_TOLERANCE,
        }))?;
    }
    let pass = check.passes(GRADCHECK_TOLERANCE);
    print_json(&json!({
        "seed": args.seed,
        "summary": true,
        "slots": check.params.slots.len() + 1,
        "max_rel_error": check.max_rel_error(),
        "tolerance": GRADCHECK_TOLERANCE,
        "pass": pass,
    }))?;
    Ok(pass)
}

fn verify_ib(args: VerifyIbArgs) -> Result<bool> {
    if args.seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    let cfg = EquivalenceConfig {
        normalize_centers: !args.unnormalized,
        ..Default::default()
    };
    let mut all_pass = true;
    let mut worst: f64 = if args.unnormalized { f64::INFINITY } else { 0.0 };
    for seed in args.first_seed..args.first_seed + args.seeds {
        let outcome = equivalence_check_with(seed, args.kind, &cfg)?;
        let pass = if args.unnormalized {
            worst = worst.min(outcome.deviation);
            outcome.deviation > NEGATIVE_CONTROL_FLOOR
        } else {
            worst = worst.max(outcome.deviation);
            outcome.deviation < EQUIVALENCE_TOLERANCE
        };
        all_pass &= pass;
        print_json(&json!({
            "seed": seed,
            "kind": args.kind,
            "normalized_centers": !args.unnormalized,
            "deviation": outcome.deviation,
            "pass": pass,
        }))?;
    }
    print_json(&json!({
        "summary": true,
        "kind": args.kind,
        "seeds": args.seeds,
        "normalized_centers": !args.unnormalized,
        "worst_deviation": worst,
        "pass": all_pass,
    }))?;
    Ok(all_pass)
}

fn corrupt_image(args: CorruptArgs) -> Result<()> {
    let severity = u8::try_from(args.severity)
        .ok()
        .filter(|s| (MIN_SEVERITY..=MAX_SEVERITY).contains(s))
        .with_context(|| {
            format!(
                "severity {} out of range; valid severities are {MIN_SEVERITY}-{MAX_SEVERITY}",
                args.severity
            )
        })?;
    let image = Image::load(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let spec = CorruptionSpec::new(args.kind, severity, args.seed)?;
    corrupt(&image, &spec)?
        .save(&args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn train_model(args: TrainArgs) -> Result<()> {
    let mut config: TrainConfig = match &args.config {
        Some(path) => read_json(path)?,
        None => TrainConfig::default(),
    };
    if let Some(kind) = args.model {
        config.model_kind = kind;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let outcome = train(&config)?;
    save_model(&args.out, &outcome).with_context(|| format!("writing {}", args.out.display()))?;
    print_json(&json!({
        "model_kind": config.model_kind,
        "seed": config.seed,
        "steps": config.steps,
        "final_loss": outcome.trace.last().map(|p| p.loss),
        "checkpoint": args.out,
    }))
}

fn eval_model(args: EvalArgs) -> Result<()> {
    let (model, train_config) =
        load_model(&args.ckpt).with_context(|| format!("loading checkpoint {}", args.ckpt.display()))?;
    let grid: EvalConfig = match &args.grid {
        Some(path) => read_json(path)?,
        None => EvalConfig::default(),
    };
    let report = evaluate(&model, &train_config, &grid)?;
    report
        .save(&args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    print_json(&json!({
        "model_kind": report.model_kind,
        "clean_accuracy": report.clean_accuracy,
        "cells": report.cells.len(),
        "report": args.out,
    }))
}

fn report(args: ReportArgs) -> Result<()> {
    let a = RobustnessReport::load(&args.a).with_context(|| format!("loading {}", args.a.display()))?;
    let b = RobustnessReport::load(&args.b).with_context(|| format!("loading {}", args.b.display()))?;
    let comparison = compare_reports(&a, &b);
    if args.json {
        println!("{}", serde_json::to_string_pretty(&comparison)?);
    } else {
        print!("{}", comparison.to_text());
    }
    Ok(())
}
