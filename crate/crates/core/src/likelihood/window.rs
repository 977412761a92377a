use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::BOperator;
use crate::error::{Error, Result};
use crate::iterlinalg::{cg_solve, draw_probe, slq_logdet, ProbeKind, SolverReport};
use crate::ldcore::PrecomputedWindow;
use crate::rng::{derive_seed, rng_from, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Dense,
    Iterative,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub cg_rel_tol: f64,
    pub cg_max_iter: usize,
    pub slq_probes: usize,
    pub lanczos_steps: usize,
    pub probe_kind: ProbeKind,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            cg_rel_tol: 1e-6,
            cg_max_iter: 1000,
            slq_probes: 100,
            lanczos_steps: 30,
            probe_kind: ProbeKind::Rademacher,
        }
    }
}

/// Loss for one window. `nll = ½ (quad_term + logdet_term)`.
#[derive(Debug, Clone, Serialize)]
pub struct WindowLoss {
    pub nll: f64,
    /// Empty when only the value was requested.
    pub grad_f_flank: Vec<f64>,
    pub solver_report: SolverReport,
    /// `β̂ᵀ A† β̂`.
    pub quad_term: f64,
    /// `log |A|₊`.
    pub logdet_term: f64,
}

fn check_inputs(window: &PrecomputedWindow, f_flank: &[f64], sigma2_n: f64) -> Result<()> {
    if f_flank.len() != window.flank_len() {
        return Err(Error::InvalidArgument(format!(
            "f has length {}, window {} has {} flank variants",
            f_flank.len(),
            window.window_index,
            window.flank_len()
        )));
    }
    if let Some(k) = f_flank.iter().position(|f| !(*f >= 0.0) || !f.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "f[{k}] = {} is not a finite nonnegative value",
            f_flank[k]
        )));
    }
    if !(sigma2_n > 0.0) || !sigma2_n.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "sigma2_N must be positive, got {sigma2_n}"
        )));
    }
    Ok(())
}

/// Single assembly point for value, shared by `null_nll` and `window_nll` so
/// the f = 0 case is reproduced bit for bit.
fn assemble(
    window: &PrecomputedWindow,
    sigma2_n: f64,
    correction: f64,
    logdet_b: f64,
    grad: Vec<f64>,
    report: SolverReport,
) -> Result<WindowLoss> {
    let inv_s = 1.0 / sigma2_n;
    let quad_term = window.quad_null * inv_s - correction * inv_s * inv_s;
    let logdet_term =
        window.core_rank() as f64 * sigma2_n.ln() + window.logpdet_r + logdet_b;
    let nll = 0.5 * (quad_term + logdet_term);
    if !nll.is_finite() {
        return Err(Error::Numerical {
            msg: format!("non-finite NLL in window {}", window.window_index),
            report: Some(report),
        });
    }
    Ok(WindowLoss {
        nll,
        grad_f_flank: grad,
        solver_report: report,
        quad_term,
        logdet_term,
    })
}

/// Null-model loss (f = 0).
pub fn null_nll(window: &PrecomputedWindow, sigma2_n: f64) -> f64 {
    match assemble(window, sigma2_n, 0.0, 0.0, Vec::new(), SolverReport::exact()) {
        Ok(loss) => loss.nll,
        Err(_) => f64::NAN,
    }
}

/// Window NLL without gradient. `seed` drives the SLQ probes of the
/// iterative method and is ignored by the dense one.
pub fn window_nll(
    window: &PrecomputedWindow,
    f_flank: &[f64],
    sigma2_n: f64,
    method: Method,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<WindowLoss> {
    evaluate(window, f_flank, sigma2_n, method, cfg, None, seed)
}

/// Window NLL and its gradient in f over the flank.
pub fn window_nll_grad(
    window: &PrecomputedWindow,
    f_flank: &[f64],
    sigma2_n: f64,
    method: Method,
    cfg: &SolverConfig,
    num_probes: usize,
    seed: u64,
) -> Result<WindowLoss> {
    evaluate(window, f_flank, sigma2_n, method, cfg, Some(num_probes), seed)
}

fn evaluate(
    window: &PrecomputedWindow,
    f_flank: &[f64],
    sigma2_n: f64,
    method: Method,
    cfg: &SolverConfig,
    grad_probes: Option<usize>,
    seed: u64,
) -> Result<WindowLoss> {
    check_inputs(window, f_flank, sigma2_n)?;
    let op = BOperator::new(&window.w_mat, f_flank, sigma2_n);
    let a = op.sqrt_f().component_mul(&window.l_beta);
    match method {
        Method::Dense => dense(window, &op, &a, sigma2_n, grad_probes.is_some()),
        Method::Iterative => iterative(window, &op, &a, sigma2_n, cfg, grad_probes, seed),
    }
}

/// Exact part of the gradient shared by both methods:
/// `½ [−s⁻² t² + s⁻¹ diag W]` with `t = Lβ̂ − s⁻¹ W (g∘z)`.
fn exact_grad_part(window: &PrecomputedWindow, g: &DVector<f64>, z: &DVector<f64>, inv_s: f64) -> Vec<f64> {
    let t = &window.l_beta - (&window.w_mat * g.component_mul(z)) * inv_s;
    (0..t.len())
        .map(|k| 0.5 * (-inv_s * inv_s * t[k] * t[k] + inv_s * window.w_mat[(k, k)]))
        .collect()
}

fn dense(
    window: &PrecomputedWindow,
    op: &BOperator<'_>,
    a: &DVector<f64>,
    sigma2_n: f64,
    want_grad: bool,
) -> Result<WindowLoss> {
    let inv_s = 1.0 / sigma2_n;
    let chol = op
        .to_dense()
        .cholesky()
        .ok_or_else(|| Error::numerical(format!("B not positive definite in window {}", window.window_index)))?;
    let logdet_b = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let z = chol.solve(a);
    let correction = a.dot(&z);
    let mut grad = Vec::new();
    if want_grad {
        let g = op.sqrt_f();
        grad = exact_grad_part(window, g, &z, inv_s);
        // D = W G B⁻¹ G W; diag(D)_k = ‖L⁻¹ (G W)_{:,k}‖².
        let mut gw: DMatrix<f64> = window.w_mat.clone();
        for (i, mut row) in gw.row_iter_mut().enumerate() {
            row *= g[i];
        }
        let l = chol.l();
        if !l.solve_lower_triangular_mut(&mut gw) {
            return Err(Error::numerical("singular Cholesky factor of B"));
        }
        for (k, gk) in grad.iter_mut().enumerate() {
            let dkk = gw.column(k).norm_squared();
            *gk -= 0.5 * inv_s * inv_s * dkk;
        }
    }
    assemble(window, sigma2_n, correction, logdet_b, grad, SolverReport::exact())
}

fn iterative(
    window: &PrecomputedWindow,
    op: &BOperator<'_>,
    a: &DVector<f64>,
    sigma2_n: f64,
    cfg: &SolverConfig,
    grad_probes: Option<usize>,
    seed: u64,
) -> Result<WindowLoss> {
    let inv_s = 1.0 / sigma2_n;
    let (z, report) = cg_solve(op, a, cfg.cg_rel_tol, cfg.cg_max_iter, None)?;
    if !report.converged {
        return Err(Error::Numerical {
            msg: format!("CG did not converge in window {}", window.window_index),
            report: Some(report),
        });
    }
    let correction = a.dot(&z);
    let g = op.sqrt_f();
    // log|B| vanishes identically when f = 0; skip the stochastic estimate.
    let logdet_b = if g.iter().all(|v| *v == 0.0) {
        0.0
    } else {
        slq_logdet(
            op,
            cfg.slq_probes,
            cfg.lanczos_steps,
            derive_seed(seed, &[stream::SLQ]),
            cfg.probe_kind,
        )?
    };
    let mut grad = Vec::new();
    if let Some(num_probes) = grad_probes {
        grad = exact_grad_part(window, g, &z, inv_s);
        if num_probes > 0 && g.iter().any(|v| *v != 0.0) {
            let trace = trace_diag_estimate(window, op, g, inv_s, cfg, num_probes, seed)?;
            for (k, gk) in grad.iter_mut().enumerate() {
                *gk += 0.5 * inv_s * (trace[k] - window.w_mat[(k, k)]);
            }
        }
    }
    assemble(window, sigma2_n, correction, logdet_b, grad, report)
}

/// Estimates `diag(W − s⁻¹ W G B⁻¹ G W) = diag(W (I + s⁻¹ F W)⁻¹)`.
///
/// Each probe u costs one solve `B x = G W u` and contributes
/// `u_k (W y)_k` with `y = u − s⁻¹ G x`. The first two Neumann terms of the
/// target, `W` and `s⁻¹ W F W`, have exact diagonals, so the mean-zero terms
/// `u_k (K u)_k − K_kk` serve as per-coordinate control variates with
/// coefficients fitted by least squares over the probes.
fn trace_diag_estimate(
    window: &PrecomputedWindow,
    op: &BOperator<'_>,
    g: &DVector<f64>,
    inv_s: f64,
    cfg: &SolverConfig,
    num_probes: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let n = g.len();
    let w = &window.w_mat;
    let f = g.component_mul(g);
    let diag_wfw: Vec<f64> = (0..n)
        .map(|k| inv_s * (0..n).map(|j| w[(k, j)] * w[(k, j)] * f[j]).sum::<f64>())
        .collect();
    let probe_seed = derive_seed(seed, &[stream::HUTCHINSON]);
    let mut xs = DMatrix::<f64>::zeros(num_probes, n);
    let mut c1 = DMatrix::<f64>::zeros(num_probes, n);
    let mut c2 = DMatrix::<f64>::zeros(num_probes, n);
    for p in 0..num_probes {
        let mut rng = rng_from(probe_seed, &[p as u64]);
        let u = draw_probe(cfg.probe_kind, n, &mut rng);
        let wu = w * &u;
        let (x, report) = cg_solve(op, &g.component_mul(&wu), cfg.cg_rel_tol, cfg.cg_max_iter, None)?;
        if !report.converged {
            return Err(Error::Numerical {
                msg: format!("CG did not converge for gradient probe {p} in window {}", window.window_index),
                report: Some(report),
            });
        }
        let y = &u - g.component_mul(&x) * inv_s;
        let wy = w * y;
        let wfwu = (w * f.component_mul(&wu)) * inv_s;
        for k in 0..n {
            xs[(p, k)] = u[k] * wy[k];
            c1[(p, k)] = u[k] * wu[k] - w[(k, k)];
            c2[(p, k)] = u[k] * wfwu[k] - diag_wfw[k];
        }
    }
    let np = num_probes as f64;
    Ok((0..n)
        .map(|k| {
            let mean = |m: &DMatrix<f64>| m.column(k).sum() / np;
            let (mx, m1, m2) = (mean(&xs), mean(&c1), mean(&c2));
            let (mut s11, mut s12, mut s22, mut t1, mut t2) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for p in 0..num_probes {
                let (dx, d1, d2) = (xs[(p, k)] - mx, c1[(p, k)] - m1, c2[(p, k)] - m2);
                s11 += d1 * d1;
                s12 += d1 * d2;
                s22 += d2 * d2;
                t1 += d1 * dx;
                t2 += d2 * dx;
            }
            let det = s11 * s22 - s12 * s12;
            // Fall back to one variate when the pair is (nearly) collinear,
            // e.g. Rademacher probes with a diagonal W.
            let (b1, b2) = if det > 1e-10 * s11 * s22 && det > 0.0 {
                ((t1 * s22 - t2 * s12) / det, (t2 * s11 - t1 * s12) / det)
            } else if s11 > 0.0 {
                (t1 / s11, 0.0)
            } else if s22 > 0.0 {
                (0.0, t2 / s22)
            } else {
                (0.0, 0.0)
            };
            mx - b1 * m1 - b2 * m2
        })
        .collect())
}
