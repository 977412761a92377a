//! Per-window comparison of the dense, A-form iterative and B-form iterative
//! solvers: wall time, gradient error against the dense gradient, CG
//! iteration counts and the smallest Ritz value of the solved operator.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::iterlinalg::{draw_probe, nystrom_preconditioner, ritz_values, LinearOperator, ProbeKind};
use crate::ldcore::PrecomputedWindow;
use crate::likelihood::{
    a_form_grad_dense, a_form_grad_iterative, a_form_nll_oracle, window_nll_grad, AOperator, BOperator, Method,
    SolverConfig,
};
use crate::rng::{derive_seed, rng_from, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// Windows taken evenly from the corpus; all of them when larger than the
    /// corpus.
    pub num_windows: usize,
    pub num_probes: usize,
    pub solver: SolverConfig,
    pub nystrom_rank: usize,
    /// Lanczos steps used for the smallest Ritz value.
    pub ritz_steps: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            num_windows: 20,
            num_probes: 100,
            solver: SolverConfig::default(),
            nystrom_rank: 20,
            ritz_steps: 60,
            seed: 0,
        }
    }
}

/// One (window, solver) measurement. `wall_ms` is the only field that is not
/// reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub window: usize,
    /// `chol` (dense factorization), `iter` (CG) or `nys` (CG with a
    /// Nyström preconditioner).
    pub method: String,
    /// `A` (core-sized system) or `B` (flank-sized Woodbury system).
    pub form: String,
    /// Dimension of the system the method factors or iterates on.
    pub dim: usize,
    pub wall_ms: f64,
    /// L2-relative gradient error against the dense gradient.
    pub rel_err: f64,
    /// Relative NLL error against the dense value, when the method returns
    /// an NLL.
    pub nll_rel_err: Option<f64>,
    pub cg_iterations: usize,
    pub min_ritz: Option<f64>,
}

fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

fn min_ritz(op: &dyn LinearOperator, steps: usize, seed: u64) -> Result<f64> {
    let start = draw_probe(ProbeKind::Gaussian, op.dim(), &mut rng_from(seed, &[stream::SLQ]));
    let steps = steps.min(op.dim());
    Ok(ritz_values(op, &start, steps)?.into_iter().fold(f64::INFINITY, f64::min))
}

/// Evenly spaced subset of `0..n` of size `min(k, n)`.
pub fn spread_indices(n: usize, k: usize) -> Vec<usize> {
    if k >= n {
        return (0..n).collect();
    }
    (0..k).map(|i| i * n / k).collect()
}

/// Benchmarks the selected windows with prior variances `f` (one per variant
/// of the corpus).
pub fn run_benchmark(
    windows: &[PrecomputedWindow],
    f: &[f64],
    sigma2_n: f64,
    cfg: &BenchConfig,
) -> Result<Vec<BenchRecord>> {
    if windows.is_empty() {
        return Err(Error::EmptyInput("no windows to benchmark".into()));
    }
    let mut out = Vec::new();
    for i in spread_indices(windows.len(), cfg.num_windows) {
        out.extend(bench_window(&windows[i], f, sigma2_n, cfg)?);
    }
    Ok(out)
}

fn bench_window(window: &PrecomputedWindow, f: &[f64], s: f64, cfg: &BenchConfig) -> Result<Vec<BenchRecord>> {
    let ff = f
        .get(window.flank.0..window.flank.1)
        .ok_or_else(|| Error::InvalidArgument("prior variances do not cover the window".into()))?;
    let seed = derive_seed(cfg.seed, &[window.window_index as u64]);
    let tol = cfg.solver.cg_rel_tol;
    let (core, flank) = (window.core_len(), window.flank_len());
    let record = |method: &str, form: &str, dim, wall: Instant, rel_err, nll_rel_err, iters, ritz| BenchRecord {
        window: window.window_index,
        method: method.into(),
        form: form.into(),
        dim,
        wall_ms: wall.elapsed().as_secs_f64() * 1e3,
        rel_err,
        nll_rel_err,
        cg_iterations: iters,
        min_ritz: ritz,
    };

    let t = Instant::now();
    let reference = a_form_grad_dense(window, ff, s)?.grad;
    let mut rows = vec![record("chol", "A", core, t, 0.0, None, 0, None)];
    let nll_ref = a_form_nll_oracle(window, ff, s, 1e-12)?;

    let a_op = AOperator::new(window, ff, s);
    let t = Instant::now();
    let run = a_form_grad_iterative(window, ff, s, tol, cfg.num_probes, seed, cfg.solver.probe_kind, None)?;
    let ritz_a = min_ritz(&a_op, cfg.ritz_steps, seed)?;
    rows.push(record(
        "iter",
        "A",
        core,
        t,
        rel_l2(&run.grad, &reference),
        None,
        run.report.iterations,
        Some(ritz_a),
    ));

    let rank = cfg.nystrom_rank.min(core.saturating_sub(1)).max(1);
    let t = Instant::now();
    let pre = nystrom_preconditioner(&a_op, rank, s, derive_seed(seed, &[stream::NYSTROM]))?;
    let run = a_form_grad_iterative(window, ff, s, tol, cfg.num_probes, seed, cfg.solver.probe_kind, Some(&pre))?;
    rows.push(record(
        "nys",
        "A",
        core,
        t,
        rel_l2(&run.grad, &reference),
        None,
        run.report.iterations,
        None,
    ));

    let t = Instant::now();
    let dense_b = window_nll_grad(window, ff, s, Method::Dense, &cfg.solver, 0, seed)?;
    rows.push(record(
        "chol",
        "B",
        flank,
        t,
        rel_l2(&dense_b.grad_f_flank, &reference),
        Some(((dense_b.nll - nll_ref) / nll_ref).abs()),
        0,
        None,
    ));

    let t = Instant::now();
    let loss = window_nll_grad(window, ff, s, Method::Iterative, &cfg.solver, cfg.num_probes, seed)?;
    let b_op = BOperator::new(&window.w_mat, ff, s);
    let ritz_b = min_ritz(&b_op, cfg.ritz_steps, seed)?;
    rows.push(record(
        "iter",
        "B",
        flank,
        t,
        rel_l2(&loss.grad_f_flank, &reference),
        Some(((loss.nll - nll_ref) / nll_ref).abs()),
        loss.solver_report.iterations,
        Some(ritz_b),
    ));
    Ok(rows)
}

/// Reproducible part of a record, for determinism checks.
pub fn strip_timing(records: &[BenchRecord]) -> Vec<BenchRecord> {
    records
        .iter()
        .map(|r| BenchRecord {
            wall_ms: 0.0,
            ..r.clone()
        })
        .collect()
}
