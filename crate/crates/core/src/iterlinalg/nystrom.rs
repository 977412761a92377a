use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use super::LinearOperator;
use crate::error::{Error, Result};
use crate::rng::{rng_from, stream};

/// Inverse preconditioner from a rank-`ℓ` randomized Nyström approximation
/// `Â = U Λ̂ Uᵀ` of the operator:
///
/// `P⁻¹ = U (Λ̂ + μ)⁻¹ Uᵀ + (λ̂_ℓ + μ)⁻¹ (I − U Uᵀ)`.
#[derive(Debug, Clone)]
pub struct NystromPreconditioner {
    pub u: DMatrix<f64>,
    pub lambdas: DVector<f64>,
    pub shift: f64,
}

impl LinearOperator for NystromPreconditioner {
    fn dim(&self) -> usize {
        self.u.nrows()
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let coef = self.u.tr_mul(x);
        let tail = self.lambdas[self.lambdas.len() - 1] + self.shift;
        let mut scaled = coef.clone();
        for (c, l) in scaled.iter_mut().zip(self.lambdas.iter()) {
            *c /= l + self.shift;
        }
        let low = &self.u * (scaled - coef / tail);
        low + x / tail
    }
}

pub fn nystrom_preconditioner(
    op: &dyn LinearOperator,
    rank: usize,
    shift: f64,
    seed: u64,
) -> Result<NystromPreconditioner> {
    let n = op.dim();
    if rank == 0 || rank >= n {
        return Err(Error::InvalidArgument(format!(
            "Nyström rank must lie in 1..{n}, got {rank}"
        )));
    }
    if !(shift >= 0.0) {
        return Err(Error::InvalidArgument("shift must be nonnegative".into()));
    }
    let mut rng = rng_from(seed, &[stream::NYSTROM]);
    let omega = DMatrix::<f64>::from_fn(n, rank, |_, _| StandardNormal.sample(&mut rng));
    let q = omega.qr().q();
    let mut y = DMatrix::zeros(n, rank);
    for j in 0..rank {
        y.set_column(j, &op.apply(&q.column(j).into_owned()));
    }
    let nu = (n as f64).sqrt() * f64::EPSILON * y.norm();
    let y_nu = &y + &q * nu;
    let core = q.tr_mul(&y_nu);
    let core = (&core + core.transpose()) * 0.5;
    let chol = core
        .cholesky()
        .ok_or_else(|| Error::numerical("Nyström core matrix is not positive definite"))?;
    // B = Y_ν C⁻ᵀ with C Cᵀ = Qᵀ Y_ν
    let c = chol.l();
    let b = c
        .solve_lower_triangular(&y_nu.transpose())
        .ok_or_else(|| Error::numerical("singular Nyström factor"))?
        .transpose();
    let svd = b.svd(true, false);
    let u_full = svd.u.expect("requested U");
    let mut order: Vec<usize> = (0..rank).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let u = DMatrix::from_fn(n, rank, |i, j| u_full[(i, order[j])]);
    let lambdas = DVector::from_fn(rank, |j, _| {
        (svd.singular_values[order[j]].powi(2) - nu).max(0.0)
    });
    Ok(NystromPreconditioner { u, lambdas, shift })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iterlinalg::{cg_solve, DiagonalOperator, ScaledIdentity};

    #[test]
    fn near_exact_rank_converges_fast() {
        let n = 40;
        let op = DiagonalOperator(DVector::from_fn(n, |i, _| (i + 1) as f64));
        let pc = nystrom_preconditioner(&op, n - 1, 1e-10, 3).unwrap();
        let b = DVector::from_fn(n, |i, _| ((i * 7) % 5) as f64 - 2.0);
        let (x, rep) = cg_solve(&op, &b, 1e-6, 100, Some(&pc)).unwrap();
        assert!(rep.converged);
        assert!(rep.iterations <= 3, "took {} iterations", rep.iterations);
        let exact = DVector::from_fn(n, |i, _| b[i] / (i + 1) as f64);
        assert!((x - &exact).norm() <= 1e-5 * exact.norm());
    }

    #[test]
    fn identity_gives_scaled_identity() {
        let op = ScaledIdentity { dim: 12, scale: 1.0 };
        let shift = 0.25;
        let pc = nystrom_preconditioner(&op, 5, shift, 1).unwrap();
        let x = DVector::from_fn(12, |i, _| i as f64 - 4.0);
        let y = pc.apply(&x);
        assert!((y - &x / (1.0 + shift)).amax() < 1e-12);
        let (sol, _) = cg_solve(&op, &x, 1e-12, 50, Some(&pc)).unwrap();
        assert!((sol - x).amax() < 1e-12);
    }

    #[test]
    fn fewer_iterations_on_ill_conditioned_diagonal() {
        let n = 200;
        let d = DVector::from_fn(n, |i, _| 10f64.powf(-4.0 + 4.0 * i as f64 / (n - 1) as f64));
        let op = DiagonalOperator(d);
        let b = DVector::from_element(n, 1.0);
        let (x0, plain) = cg_solve(&op, &b, 1e-6, 10_000, None).unwrap();
        let pc = nystrom_preconditioner(&op, 20, 1e-6, 2).unwrap();
        let (x1, pre) = cg_solve(&op, &b, 1e-6, 10_000, Some(&pc)).unwrap();
        assert!(plain.converged && pre.converged);
        assert!(pre.iterations < plain.iterations, "{} vs {}", pre.iterations, plain.iterations);
        assert!((&x0 - &x1).norm() <= 1e-2 * x0.norm());
    }

    #[test]
    fn rank_must_be_below_dim() {
        let op = ScaledIdentity { dim: 4, scale: 1.0 };
        assert!(matches!(nystrom_preconditioner(&op, 4, 0.0, 0), Err(Error::InvalidArgument(_))));
    }
}
