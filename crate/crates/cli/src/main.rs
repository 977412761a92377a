mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use deepwas_core::pipeline::ModelChoice;
use serde_json::Value;

use config::{parse_set, ConfigError};

#[derive(Parser)]
#[command(name = "deepwas", version, about = "Fit variant-effect priors by exact GWAS likelihood")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration; unknown keys are rejected.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set pipeline.train.epochs=5`.
    #[arg(long = "set", value_parser = parse_set, value_name = "KEY=VALUE")]
    sets: Vec<(String, String)>,
    /// Base seed for every random stream of the run.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; falls back to DEEPWAS_THREADS, then to all cores.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TruthArg {
    Network,
    Threshold,
    Constant,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    /// Full Gaussian likelihood.
    Deepwas,
    /// LD score regression.
    Ldsr,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Dense,
    Iterative,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Constant,
    Glm,
    Network,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a semi-synthetic corpus.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        truth: Option<TruthArg>,
        #[arg(long)]
        num_variants: Option<usize>,
    },
    /// Precompute the prior-independent window quantities of a corpus.
    Precompute {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a prior model and write it with logs and a report.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Precomputed windows from `deepwas precompute`.
        #[arg(long)]
        windows: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        method: Option<ObjectiveArg>,
        #[arg(long)]
        solver: Option<SolverArg>,
        #[arg(long)]
        model: Option<ModelArg>,
    },
    /// Score a trained model on held-out windows.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Precomputed windows from `deepwas precompute`.
        #[arg(long)]
        windows: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare dense and iterative solvers window by window.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Precomputed windows from `deepwas precompute`.
        #[arg(long)]
        windows: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn path_set(key: &str, p: &Option<PathBuf>, sets: &mut Vec<(String, String)>) {
    if let Some(p) = p {
        sets.push((key.into(), Value::String(p.display().to_string()).to_string()));
    }
}

/// Flags become overrides applied before the explicit `--set`s, and `--seed`
/// is applied last.
fn overrides(common: &Common, flags: Vec<(String, String)>, seed_key: Option<&str>) -> Vec<(String, String)> {
    let mut sets = flags;
    sets.extend(common.sets.iter().cloned());
    if let (Some(seed), Some(key)) = (common.seed, seed_key) {
        sets.push((key.into(), seed.to_string()));
    }
    sets
}

fn init_threads(requested: Option<usize>) -> anyhow::Result<()> {
    let threads = match requested {
        Some(k) => Some(k),
        None => match std::env::var("DEEPWAS_THREADS") {
            Ok(v) => Some(
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| ConfigError(format!("DEEPWAS_THREADS={v:?} is not a thread count")))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(k) = threads {
        if k == 0 {
            return Err(ConfigError("thread count must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| ConfigError(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate {
            common,
            out,
            truth,
            num_variants,
        } => {
            init_threads(common.threads)?;
            let mut flags = Vec::new();
            path_set("out_dir", &out, &mut flags);
            if let Some(t) = truth {
                let name = match t {
                    TruthArg::Network => "network",
                    TruthArg::Threshold => "threshold",
                    TruthArg::Constant => "constant",
                };
                flags.push(("simulate.truth".into(), format!("\"{name}\"")));
            }
            if let Some(m) = num_variants {
                flags.push(("simulate.num_variants".into(), m.to_string()));
            }
            let sets = overrides(&common, flags, Some("simulate.seed"));
            commands::simulate(&config::resolve(common.config.as_deref(), &sets)?)
        }
        Command::Precompute { common, corpus, out } => {
            init_threads(common.threads)?;
            let mut flags = Vec::new();
            path_set("corpus", &corpus, &mut flags);
            path_set("out", &out, &mut flags);
            let sets = overrides(&common, flags, None);
            commands::precompute(&config::resolve(common.config.as_deref(), &sets)?)
        }
        Command::Train {
            common,
            corpus,
            windows,
            out,
            method,
            solver,
            model,
        } => {
            init_threads(common.threads)?;
            let mut flags = Vec::new();
            path_set("corpus", &corpus, &mut flags);
            path_set("windows_file", &windows, &mut flags);
            path_set("out_dir", &out, &mut flags);
            if let Some(m) = method {
                let objective = match m {
                    ObjectiveArg::Deepwas => "likelihood",
                    ObjectiveArg::Ldsr => "ldsr",
                };
                flags.push(("pipeline.train.objective".into(), format!("\"{objective}\"")));
            }
            if let Some(s) = solver {
                let name = match s {
                    SolverArg::Dense => "dense",
                    SolverArg::Iterative => "iterative",
                };
                flags.push(("pipeline.train.method".into(), format!("\"{name}\"")));
            }
            if let Some(m) = model {
                let json = match m {
                    ModelArg::Constant => r#"{"kind":"constant"}"#.to_string(),
                    ModelArg::Glm => r#"{"kind":"glm"}"#.to_string(),
                    ModelArg::Network => serde_json::to_string(&ModelChoice::default()).expect("serializes"),
                };
                flags.push(("pipeline.model".into(), json));
            }
            let sets = overrides(&common, flags, Some("pipeline.train.seed"));
            commands::train(&config::resolve(common.config.as_deref(), &sets)?)
        }
        Command::Eval {
            common,
            corpus,
            windows,
            model,
            out,
        } => {
            init_threads(common.threads)?;
            let mut flags = Vec::new();
            path_set("corpus", &corpus, &mut flags);
            path_set("windows_file", &windows, &mut flags);
            path_set("model", &model, &mut flags);
            path_set("out", &out, &mut flags);
            let sets = overrides(&common, flags, None);
            commands::eval(&config::resolve(common.config.as_deref(), &sets)?)
        }
        Command::Bench {
            common,
            corpus,
            windows,
            out,
        } => {
            init_threads(common.threads)?;
            let mut flags = Vec::new();
            path_set("corpus", &corpus, &mut flags);
            path_set("windows_file", &windows, &mut flags);
            path_set("out", &out, &mut flags);
            let sets = overrides(&common, flags, Some("bench.seed"));
            commands::bench(&config::resolve(common.config.as_deref(), &sets)?)
        }
    }
}

/// 2: configuration, 3: numerical failure, 4: IO or malformed input.
fn exit_code(err: &anyhow::Error) -> u8 {
    use deepwas_core::Error as E;
    if err.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<E>() {
        Some(E::InvalidArgument(_) | E::EmptyInput(_)) => 2,
        Some(E::Numerical { .. } | E::DegenerateBlock) => 3,
        Some(E::Io { .. } | E::Format { .. } | E::Validation(_)) => 4,
        None => 4,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
