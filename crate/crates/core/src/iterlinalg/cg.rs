use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::LinearOperator;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub iterations: usize,
    /// `‖op(x) − rhs‖ / ‖rhs‖` from the recurrence.
    pub final_residual: f64,
    pub converged: bool,
}

impl SolverReport {
    pub fn exact() -> Self {
        Self {
            iterations: 0,
            final_residual: 0.0,
            converged: true,
        }
    }
}

/// (Preconditioned) conjugate gradients from a zero initial guess.
///
/// `precond`, when given, applies the inverse preconditioner. Hitting
/// `max_iter` is reported through `converged = false`, not as an error.
pub fn cg_solve(
    op: &dyn LinearOperator,
    rhs: &DVector<f64>,
    rel_tol: f64,
    max_iter: usize,
    precond: Option<&dyn LinearOperator>,
) -> Result<(DVector<f64>, SolverReport)> {
    let n = op.dim();
    if rhs.len() != n {
        return Err(Error::InvalidArgument(format!(
            "rhs has length {}, operator dimension is {n}",
            rhs.len()
        )));
    }
    let rhs_norm = rhs.norm();
    if !rhs_norm.is_finite() {
        return Err(Error::numerical("non-finite right-hand side"));
    }
    let mut x = DVector::zeros(n);
    if rhs_norm == 0.0 {
        return Ok((x, SolverReport::exact()));
    }
    let mut r = rhs.clone();
    let mut z = match precond {
        Some(p) => p.apply(&r),
        None => r.clone(),
    };
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    let mut rel = 1.0;
    for it in 1..=max_iter {
        let ap = op.apply(&p);
        let pap = p.dot(&ap);
        let alpha = rz / pap;
        if !alpha.is_finite() {
            return Err(Error::Numerical {
                msg: format!("CG breakdown at iteration {it} (pᵀAp = {pap})"),
                report: Some(SolverReport {
                    iterations: it,
                    final_residual: rel,
                    converged: false,
                }),
            });
        }
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        rel = r.norm() / rhs_norm;
        if !rel.is_finite() {
            return Err(Error::numerical(format!("NaN in CG iterate {it}")));
        }
        if rel <= rel_tol {
            return Ok((
                x,
                SolverReport {
                    iterations: it,
                    final_residual: rel,
                    converged: true,
                },
            ));
        }
        z = match precond {
            Some(pc) => pc.apply(&r),
            None => r.clone(),
        };
        let rz_next = r.dot(&z);
        let beta = rz_next / rz;
        rz = rz_next;
        p = &z + &p * beta;
    }
    Ok((
        x,
        SolverReport {
            iterations: max_iter,
            final_residual: rel,
            converged: false,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iterlinalg::{DiagonalOperator, ScaledIdentity};
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_spd(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::<f64>::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
        &g * g.transpose() / n as f64 + DMatrix::identity(n, n) * 0.1
    }

    #[test]
    fn identity_in_one_iteration() {
        let b = DVector::from_vec(vec![1.0, -2.0, 3.5]);
        let (x, rep) = cg_solve(&ScaledIdentity { dim: 3, scale: 1.0 }, &b, 1e-12, 10, None).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
        assert!((x - b).amax() < 1e-15);
    }

    #[test]
    fn diagonal_system() {
        let op = DiagonalOperator(DVector::from_vec(vec![1.0, 2.0, 4.0]));
        let b = DVector::from_vec(vec![1.0, 2.0, 4.0]);
        let (x, rep) = cg_solve(&op, &b, 1e-12, 10, None).unwrap();
        assert!(rep.converged && rep.final_residual <= 1e-12);
        assert!((x - DVector::from_element(3, 1.0)).amax() < 1e-12);
    }

    #[test]
    fn random_spd_matches_dense_solve() {
        let a = random_spd(80, 1);
        let b = DVector::from_fn(80, |i, _| (i as f64 * 0.37).cos());
        let (x, rep) = cg_solve(&a, &b, 1e-10, 1000, None).unwrap();
        assert!(rep.converged);
        assert!(rep.iterations <= 80 + 5);
        let oracle = a.clone().cholesky().unwrap().solve(&b);
        assert!((&x - &oracle).norm() <= 1e-8 * oracle.norm());
    }

    #[test]
    fn exceeding_max_iter_is_not_an_error() {
        let a = random_spd(50, 2);
        let b = DVector::from_element(50, 1.0);
        let (_, rep) = cg_solve(&a, &b, 1e-14, 2, None).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 2);
    }

    #[test]
    fn nan_is_a_numerical_failure() {
        let op = DiagonalOperator(DVector::from_vec(vec![f64::NAN, 1.0]));
        let b = DVector::from_vec(vec![1.0, 1.0]);
        assert!(matches!(
            cg_solve(&op, &b, 1e-8, 10, None),
            Err(Error::Numerical { .. })
        ));
    }
}
