use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{cg_solve, LinearOperator};
use crate::error::{Error, Result};
use crate::rng::{rng_from, stream};

/// Probe distribution for trace and log-determinant estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeKind {
    #[default]
    Rademacher,
    Gaussian,
}

pub fn draw_probe<R: Rng + ?Sized>(kind: ProbeKind, n: usize, rng: &mut R) -> DVector<f64> {
    match kind {
        ProbeKind::Rademacher => {
            DVector::from_fn(n, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 })
        }
        ProbeKind::Gaussian => DVector::from_fn(n, |_, _| rng.sample(StandardNormal)),
    }
}

/// A probe `u` and the solve `op⁻¹ u`.
#[derive(Debug, Clone)]
pub struct ProbePair {
    pub probe: DVector<f64>,
    pub solution: DVector<f64>,
}

/// Draws `num_probes` probes and solves against each with CG, so that
/// `mean((op⁻¹u)ᵀ ∂op u)` estimates `trace(op⁻¹ ∂op)`.
pub fn hutchinson_probe_pairs(
    op: &dyn LinearOperator,
    solve_tol: f64,
    num_probes: usize,
    seed: u64,
    kind: ProbeKind,
    precond: Option<&dyn LinearOperator>,
) -> Result<Vec<ProbePair>> {
    let n = op.dim();
    let max_iter = 10 * n + 100;
    (0..num_probes)
        .map(|p| {
            let mut rng = rng_from(seed, &[stream::HUTCHINSON, p as u64]);
            let probe = draw_probe(kind, n, &mut rng);
            let (solution, report) = cg_solve(op, &probe, solve_tol, max_iter, precond)?;
            if !report.converged {
                return Err(Error::Numerical {
                    msg: format!("CG did not converge for probe {p}"),
                    report: Some(report),
                });
            }
            Ok(ProbePair { probe, solution })
        })
        .collect()
}
