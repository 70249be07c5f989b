//! `helm-sketch` command line.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use helm_sketch::pipeline::{run, Command, Fixture, ModelKind, NkpMode, Paths, PipelineError, RunConfig};
use serde_json::{json, Value};

#[derive(Debug, Parser)]
#[command(name = "helm-sketch", version, about = "Intent-conditioned vessel trajectory forecasting")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// JSON run configuration, layered over the fixture preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Preset the configuration starts from.
    #[arg(long, global = true, value_enum, default_value_t = FixtureArg::Ring)]
    fixture: FixtureArg,

    /// Directory holding data/, checkpoints/ and out/. Overrides configured paths.
    #[arg(long, global = true)]
    root: Option<PathBuf>,

    /// Run seed; stream seeds are derived from it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Predictor input channels.
    #[arg(long, global = true, value_parser = clap::builder::PossibleValuesParser::new(["4", "6"]))]
    channels: Option<String>,

    /// Key point fed to the predictor at evaluation.
    #[arg(long, global = true, value_enum)]
    nkp: Option<NkpArg>,

    /// Model to evaluate or predict with.
    #[arg(long, global = true, value_enum)]
    model: Option<ModelArg>,

    /// Fixed timestamps and zero wall times, so reruns are byte-identical.
    #[arg(long, global = true)]
    fixed_clock: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Cmd {
    /// Generate a synthetic fleet CSV and its key nodes.
    Synth,
    /// Parse, resample and split; fit the normalization bounds.
    Ingest,
    /// Train the trajectory encoder on training-split windows.
    TrainEncoder,
    /// Embed labelled training windows into the reference database.
    BuildDb,
    /// Train the motion predictor with the alternating schedule.
    TrainPredictor,
    /// Forecast the test tasks and write GeoJSON.
    Predict,
    /// MSEP, MSEC, MFD and wall time of one model on the test split.
    Evaluate,
    /// Correct, predicted and wrong key point, 4ch and CVM on the same tasks.
    Ablate,
    /// Brute-force entropy and mutual-information checks.
    InfoCheck,
    /// Run every invariant suite.
    Verify,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Synth => Command::Synth,
            Cmd::Ingest => Command::Ingest,
            Cmd::TrainEncoder => Command::TrainEncoder,
            Cmd::BuildDb => Command::BuildDb,
            Cmd::TrainPredictor => Command::TrainPredictor,
            Cmd::Predict => Command::Predict,
            Cmd::Evaluate => Command::Evaluate,
            Cmd::Ablate => Command::Ablate,
            Cmd::InfoCheck => Command::InfoCheck,
            Cmd::Verify => Command::Verify,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FixtureArg {
    Ring,
    Branching,
    Straight,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum NkpArg {
    Predicted,
    Oracle,
    Wrong,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModelArg {
    Ours,
    Cvm,
}

/// Recursive object merge; `over` wins.
fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, o) => *b = o,
    }
}

fn build_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let fixture = match cli.fixture {
        FixtureArg::Ring => Fixture::Ring,
        FixtureArg::Branching => Fixture::Branching,
        FixtureArg::Straight => Fixture::Straight,
    };
    let root = cli.root.clone().unwrap_or_else(|| PathBuf::from("run"));
    let mut cfg = RunConfig::preset(fixture, &root);
    if let Some(path) = &cli.config {
        let text = std::fs::read(path).with_context(|| format!("reading config {}", path.display()))?;
        let over: Value = serde_json::from_slice(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let mut base = serde_json::to_value(&cfg)?;
        merge(&mut base, over);
        cfg = serde_json::from_value(base).with_context(|| format!("invalid config {}", path.display()))?;
    }
    if let Some(root) = &cli.root {
        cfg.paths = Paths::under(root);
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(ch) = &cli.channels {
        cfg.channels = ch.parse()?;
    }
    if let Some(n) = cli.nkp {
        cfg.nkp = match n {
            NkpArg::Predicted => NkpMode::Predicted,
            NkpArg::Oracle => NkpMode::Oracle,
            NkpArg::Wrong => NkpMode::Wrong,
        };
    }
    if let Some(m) = cli.model {
        cfg.model = match m {
            ModelArg::Ours => ModelKind::Ours,
            ModelArg::Cvm => ModelKind::Cvm,
        };
    }
    cfg.fixed_clock |= cli.fixed_clock;
    Ok(cfg)
}

fn error_report(command: Command, kind: &str, message: String) -> Value {
    json!({ "error": { "command": command, "kind": kind, "message": message } })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = Command::from(cli.command);
    let result = build_config(&cli)
        .map_err(|e| error_report(command, "config", format!("{e:#}")))
        .and_then(|cfg| run(command, &cfg).map_err(|e: PipelineError| error_report(command, e.kind(), e.to_string())));
    match result {
        Ok(outcome) => {
            println!("{}", serde_json::to_string_pretty(&outcome).expect("outcome serializes"));
            if outcome.pass {
                ExitCode::SUCCESS
            } else {
                eprintln!("{}", error_report(command, "check_failed", "one or more checks failed".into()));
                ExitCode::from(1)
            }
        }
        Err(report) => {
            eprintln!("{report}");
            ExitCode::from(2)
        }
    }
}
