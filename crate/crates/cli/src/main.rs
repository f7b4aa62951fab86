//! `nli-explain`: command-line driver for corpus checks, training, evaluation
//! and metric utilities. Exit codes: 0 success, 1 rejected input, 2 anything else.

mod commands;
mod config;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use commands::{BleuArgs, EvalArgs, FilterArgs, GenerateArgs, GridArgs, Rejected, ReprArgs, TrainArgs, ValidateArgs};
use config::Config;
use run::RunDir;

#[derive(Debug, Parser)]
#[command(name = "nli-explain", version, about = "Natural language inference with generated explanations")]
struct Cli {
    /// TOML config; a run's manifest.toml also works here.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Parent directory for run directories.
    #[arg(long, global = true, env = "NLI_EXPLAIN_RUNS", default_value = "runs")]
    run_root: PathBuf,
    /// Overrides `training.seed`.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(0..=i64::MAX as u64))]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Drop explanations that are near-copies of label templates.
    Filter(FilterArgs),
    /// Check annotation rules; exits 1 if any example violates them.
    Validate(ValidateArgs),
    /// Train one model.
    Train(TrainArgs),
    /// Train a hyperparameter grid and keep the best run.
    Grid(GridArgs),
    /// Evaluate a checkpoint.
    Eval(EvalArgs),
    /// Write generated explanations for a corpus.
    Generate(GenerateArgs),
    /// Corpus BLEU of candidate files, or inter-annotator BLEU of a corpus.
    Bleu(BleuArgs),
    /// Export encoder sentence representations as a text matrix.
    ReprExport(ReprArgs),
}

impl Command {
    fn apply(&self, cfg: &mut Config) {
        match self {
            Command::Filter(a) => a.apply(cfg),
            Command::Train(a) => a.apply(cfg),
            Command::Grid(a) => a.apply(cfg),
            Command::Eval(a) => a.apply(cfg),
            Command::Generate(a) => a.apply(cfg),
            Command::Validate(_) | Command::Bleu(_) | Command::ReprExport(_) => {}
        }
    }

    /// Files whose hashes go into the manifest.
    fn inputs<'a>(&'a self, cfg: &'a Config) -> Vec<&'a Path> {
        let mut v: Vec<&Path> = Vec::new();
        match self {
            Command::Filter(a) => v.push(&a.input),
            Command::Validate(a) => v.push(&a.input),
            Command::Train(_) | Command::Grid(_) => {
                v.extend([cfg.data.train.as_path(), cfg.data.dev.as_path()]);
                v.extend(cfg.data.embeddings.as_deref());
            }
            Command::Eval(a) => {
                v.extend([a.checkpoint.as_path(), cfg.data.test.as_path()]);
                v.extend(a.classifier.as_deref());
                v.extend(a.annotations.as_deref());
            }
            Command::Generate(a) => {
                v.extend([a.checkpoint.as_path(), cfg.data.test.as_path()]);
                v.extend(a.classifier.as_deref());
            }
            Command::Bleu(a) => {
                v.extend(a.candidates.as_deref());
                v.extend(a.references.iter().map(PathBuf::as_path));
                v.extend(a.inter_annotator.as_deref());
            }
            Command::ReprExport(a) => v.extend([a.checkpoint.as_path(), a.sentences.as_path()]),
        }
        v
    }
}

fn execute(cli: &Cli, argv: &[String]) -> Result<()> {
    let mut cfg = Config::load(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.training.seed = s;
    }
    cli.command.apply(&mut cfg);
    cfg.data.resolve()?;

    let run = RunDir::create(&cli.run_root, cfg.training.seed)?;
    run.write_manifest(&cfg, argv, &cli.command.inputs(&cfg))?;
    log::info!("run directory {}", run.root.display());

    match &cli.command {
        Command::Filter(a) => commands::filter(&cfg, &run, a),
        Command::Validate(a) => commands::validate(&cfg, &run, a),
        Command::Train(_) => commands::train_cmd(&cfg, &run),
        Command::Grid(_) => commands::grid_cmd(&cfg, &run),
        Command::Eval(a) => commands::eval_cmd(&cfg, &run, a),
        Command::Generate(a) => commands::generate(&cfg, &run, a),
        Command::Bleu(a) => commands::bleu_cmd(&cfg, &run, a),
        Command::ReprExport(a) => commands::repr_export(&cfg, &run, a),
    }
}

/// 1 for rejected data (including malformed corpus rows), 2 otherwise.
fn exit_code(err: &anyhow::Error) -> u8 {
    let rejected = err.chain().any(|e| {
        e.is::<Rejected>() || matches!(e.downcast_ref::<nli_explain::Error>(), Some(nli_explain::Error::Parse { .. }))
    });
    if rejected {
        1
    } else {
        2
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(&cli, &argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
