use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::iterlinalg::{
    cg_solve, dense_nll_oracle, hutchinson_probe_pairs, LinearOperator, ProbeKind, SolverReport,
};
use crate::ldcore::PrecomputedWindow;

/// `A = R_c₊ F R₊c + s R_cc` for one window.
pub fn dense_a_matrix(window: &PrecomputedWindow, f_flank: &[f64], sigma2_n: f64) -> DMatrix<f64> {
    let r = &window.r_flank_core;
    let mut fr = r.clone();
    for (i, mut row) in fr.row_iter_mut().enumerate() {
        row *= f_flank[i];
    }
    let mut a = r.transpose() * fr + window.r_core() * sigma2_n;
    a = (&a + a.transpose()) * 0.5;
    a
}

/// Matrix-free `A`, applied as `R_c₊ (f ∘ (R₊c v)) + s R_cc v`.
#[derive(Debug, Clone)]
pub struct AOperator<'a> {
    window: &'a PrecomputedWindow,
    f: DVector<f64>,
    sigma2_n: f64,
}

impl<'a> AOperator<'a> {
    pub fn new(window: &'a PrecomputedWindow, f_flank: &[f64], sigma2_n: f64) -> Self {
        Self {
            window,
            f: DVector::from_column_slice(f_flank),
            sigma2_n,
        }
    }
}

impl LinearOperator for AOperator<'_> {
    fn dim(&self) -> usize {
        self.window.core_len()
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let r = &self.window.r_flank_core;
        let rv = r * v;
        let core = rv.rows(self.window.core_offset(), self.window.core_len());
        r.tr_mul(&self.f.component_mul(&rv)) + core * self.sigma2_n
    }
}

/// `½ [β̂ᵀ A† β̂ + log |A|₊]` by eigendecomposition.
pub fn a_form_nll_oracle(window: &PrecomputedWindow, f_flank: &[f64], sigma2_n: f64, rel_tol: f64) -> Result<f64> {
    let a = dense_a_matrix(window, f_flank, sigma2_n);
    let (q, ld) = dense_nll_oracle(&a, &window.beta_core, rel_tol)?;
    Ok(0.5 * (q + ld))
}

/// Output of an A-form gradient evaluation.
#[derive(Debug, Clone)]
pub struct AFormRun {
    pub grad: Vec<f64>,
    pub report: SolverReport,
}

/// Exact A-form gradient `½ [−(r_kᵀα)² + r_kᵀ A⁻¹ r_k]` with `α = A⁻¹β̂`,
/// `r_k` the k-th row of `R₊c`.
pub fn a_form_grad_dense(window: &PrecomputedWindow, f_flank: &[f64], sigma2_n: f64) -> Result<AFormRun> {
    let chol = dense_a_matrix(window, f_flank, sigma2_n)
        .cholesky()
        .ok_or_else(|| Error::numerical("A is not positive definite"))?;
    let alpha = chol.solve(&window.beta_core);
    let ra = &window.r_flank_core * &alpha;
    let mut y = window.r_flank_core.transpose();
    if !chol.l().solve_lower_triangular_mut(&mut y) {
        return Err(Error::numerical("singular Cholesky factor of A"));
    }
    let grad = (0..window.flank_len())
        .map(|k| 0.5 * (-ra[k] * ra[k] + y.column(k).norm_squared()))
        .collect();
    Ok(AFormRun {
        grad,
        report: SolverReport::exact(),
    })
}

/// A-form gradient with CG for `α` and Hutchinson pairs for the trace term.
/// The returned report is the one of the `α` solve.
#[allow(clippy::too_many_arguments)]
pub fn a_form_grad_iterative(
    window: &PrecomputedWindow,
    f_flank: &[f64],
    sigma2_n: f64,
    rel_tol: f64,
    num_probes: usize,
    seed: u64,
    kind: ProbeKind,
    precond: Option<&dyn LinearOperator>,
) -> Result<AFormRun> {
    let op = AOperator::new(window, f_flank, sigma2_n);
    let max_iter = 10 * op.dim() + 100;
    let (alpha, report) = cg_solve(&op, &window.beta_core, rel_tol, max_iter, precond)?;
    if !report.converged {
        return Err(Error::Numerical {
            msg: "CG on A did not converge".into(),
            report: Some(report),
        });
    }
    let ra = &window.r_flank_core * &alpha;
    let pairs = hutchinson_probe_pairs(&op, rel_tol, num_probes, seed, kind, precond)?;
    let mut diag = DVector::zeros(window.flank_len());
    for pair in &pairs {
        let left = &window.r_flank_core * &pair.solution;
        let right = &window.r_flank_core * &pair.probe;
        diag += left.component_mul(&right);
    }
    diag /= pairs.len().max(1) as f64;
    let grad = (0..window.flank_len())
        .map(|k| 0.5 * (-ra[k] * ra[k] + diag[k]))
        .collect();
    Ok(AFormRun { grad, report })
}
