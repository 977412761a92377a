use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use deepwas_core::benchmark::run_benchmark;
use deepwas_core::corpus::{simulate_corpus, Corpus, CorpusPaths};
use deepwas_core::ldcore::{load_windows, save_windows, PrecomputedWindow};
use deepwas_core::pipeline::{evaluate_model, heldout_tail, model_features, precompute_corpus, run_training, WindowConfig};
use deepwas_core::priors::{load_params, save_params};
use deepwas_core::synthgen::TruthKind;
use deepwas_core::trainer::moment_mean_f;
use deepwas_core::Error;

use crate::config::{require, BenchRun, EvalRun, PrecomputeRun, SimulateRun, TrainRun};

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn pretty<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("serializes");
    s.push('\n');
    s.into_bytes()
}

fn json_lines<T: Serialize>(items: &[T]) -> Vec<u8> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("serializes"));
        out.push('\n');
    }
    out.into_bytes()
}

/// Writes to `path`, or to stdout when absent.
fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<(), Error> {
    match path {
        Some(p) => write_file(p, bytes),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| io_err(Path::new("<stdout>"), e)),
    }
}

fn windows_for(corpus: &Corpus, file: &Option<PathBuf>, cfg: &WindowConfig) -> Result<Vec<PrecomputedWindow>, Error> {
    match file {
        Some(path) => {
            let windows = load_windows(path)?;
            if windows.last().is_some_and(|w| w.flank.1 > corpus.num_variants()) {
                return Err(Error::Validation(format!(
                    "{} does not match the corpus",
                    path.display()
                )));
            }
            Ok(windows)
        }
        None => precompute_corpus(corpus, cfg),
    }
}

#[derive(Serialize)]
struct SimulateSummary {
    out_dir: String,
    num_variants: usize,
    sample_size: f64,
    sigma2_n: f64,
    truth: TruthKind,
    mean_f_true: f64,
}

pub fn simulate(run: &SimulateRun) -> anyhow::Result<()> {
    let dir = require(&run.out_dir, "out_dir")?;
    let corpus = simulate_corpus(&run.simulate)?;
    corpus.save(&dir)?;
    let truth = corpus.truth.as_ref().expect("simulated corpora carry a truth");
    let summary = SimulateSummary {
        out_dir: dir.display().to_string(),
        num_variants: corpus.num_variants(),
        sample_size: corpus.stats.sample_size,
        sigma2_n: corpus.stats.sigma2_n,
        truth: truth.kind,
        mean_f_true: truth.f_true.iter().sum::<f64>() / truth.f_true.len() as f64,
    };
    write_file(&dir.join("simulate.json"), &pretty(run))?;
    emit(None, &pretty(&summary))?;
    Ok(())
}

#[derive(Serialize)]
struct PrecomputeSummary {
    out: String,
    num_windows: usize,
    mean_core_len: f64,
    mean_flank_len: f64,
}

pub fn precompute(run: &PrecomputeRun) -> anyhow::Result<()> {
    let dir = require(&run.corpus, "corpus")?;
    let corpus = Corpus::load(&dir)?;
    let windows = precompute_corpus(&corpus, &run.windows)?;
    let out = run.out.clone().unwrap_or_else(|| CorpusPaths::new(&dir).windows());
    save_windows(&windows, &out)?;
    let n = windows.len().max(1) as f64;
    emit(
        None,
        &pretty(&PrecomputeSummary {
            out: out.display().to_string(),
            num_windows: windows.len(),
            mean_core_len: windows.iter().map(|w| w.core_len() as f64).sum::<f64>() / n,
            mean_flank_len: windows.iter().map(|w| w.flank_len() as f64).sum::<f64>() / n,
        }),
    )?;
    Ok(())
}

/// Writes `model.dwpm`, `steps.jsonl`, `report.json` and the resolved
/// `config.json` into the output directory.
pub fn train(run: &TrainRun) -> anyhow::Result<()> {
    let dir = require(&run.corpus, "corpus")?;
    let out = require(&run.out_dir, "out_dir")?;
    run.pipeline.train.validate()?;
    let corpus = Corpus::load(&dir)?;
    let windows = windows_for(&corpus, &run.windows_file, &run.pipeline.windows)?;
    let outcome = run_training(&corpus, &windows, &run.pipeline)?;
    fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;
    save_params(&outcome.state.params, &out.join("model.dwpm"))?;
    write_file(&out.join("steps.jsonl"), &json_lines(&outcome.state.steps))?;
    write_file(&out.join("report.json"), &pretty(&outcome.report))?;
    write_file(&out.join("config.json"), &pretty(run))?;
    for e in &outcome.report.history {
        eprintln!(
            "epoch {:>3}  train objective {:.6e}  held-out {}",
            e.epoch,
            e.train_nll,
            e.heldout_metric.map_or("-".into(), |m| format!("{m:.6}%"))
        );
    }
    Ok(())
}

pub fn eval(run: &EvalRun) -> anyhow::Result<()> {
    let dir = require(&run.corpus, "corpus")?;
    let model = require(&run.model, "model")?;
    let corpus = Corpus::load(&dir)?;
    let params = load_params(&model)?;
    let windows = windows_for(&corpus, &run.windows_file, &run.windows)?;
    let ids = if run.heldout_window_ids.is_empty() {
        heldout_tail(windows.len(), run.heldout_fraction)?
    } else {
        run.heldout_window_ids.clone()
    };
    let annot = model_features(&corpus)?;
    let report = evaluate_model(&params, &annot, &corpus, &windows, &ids)?;
    emit(run.out.as_deref(), &pretty(&report))?;
    Ok(())
}

/// Benchmarks at the true prior when the corpus has one, else at the
/// method-of-moments constant.
pub fn bench(run: &BenchRun) -> anyhow::Result<()> {
    let dir = require(&run.corpus, "corpus")?;
    let corpus = Corpus::load(&dir)?;
    let windows = windows_for(&corpus, &run.windows_file, &run.windows)?;
    let f = match &corpus.truth {
        Some(t) => t.effect_variance(),
        None => {
            let f0 = moment_mean_f(&corpus.stats.beta_hat, corpus.annot.ld_score(), corpus.stats.sigma2_n);
            vec![f0; corpus.num_variants()]
        }
    };
    let records = run_benchmark(&windows, &f, corpus.stats.sigma2_n, &run.bench)?;
    emit(run.out.as_deref(), &json_lines(&records))?;
    Ok(())
}
