use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{draw_probe, LinearOperator, ProbeKind};
use crate::error::{Error, Result};
use crate::rng::{rng_from, stream};

const BREAKDOWN: f64 = 1e-14;

/// Tridiagonal coefficients from a Lanczos run.
#[derive(Debug, Clone)]
pub struct LanczosRun {
    pub alphas: Vec<f64>,
    /// Off-diagonals; one shorter than `alphas`.
    pub betas: Vec<f64>,
    pub broke_down: bool,
}

impl LanczosRun {
    fn tridiagonal(&self) -> DMatrix<f64> {
        let k = self.alphas.len();
        let mut t = DMatrix::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = self.alphas[i];
            if i + 1 < k {
                t[(i, i + 1)] = self.betas[i];
                t[(i + 1, i)] = self.betas[i];
            }
        }
        t
    }

    /// Ritz values and the squared first components of their eigenvectors.
    pub fn quadrature(&self) -> (Vec<f64>, Vec<f64>) {
        let eig = SymmetricEigen::new(self.tridiagonal());
        let nodes = eig.eigenvalues.iter().copied().collect();
        let weights = (0..self.alphas.len())
            .map(|j| eig.eigenvectors[(0, j)].powi(2))
            .collect();
        (nodes, weights)
    }
}

/// Plain Lanczos (no reorthogonalization) started from `start`. Stops early
/// when the next β falls below `1e-14 · max(1, |α|)`.
pub fn lanczos(op: &dyn LinearOperator, start: &DVector<f64>, steps: usize) -> Result<LanczosRun> {
    let norm = start.norm();
    if !(norm > 0.0) || start.len() != op.dim() {
        return Err(Error::InvalidArgument("Lanczos needs a nonzero start vector of the operator's size".into()));
    }
    let mut q = start / norm;
    let mut q_prev = DVector::zeros(q.len());
    let mut beta_prev = 0.0;
    let mut alphas = Vec::with_capacity(steps);
    let mut betas = Vec::with_capacity(steps);
    let steps = steps.max(1).min(op.dim());
    for k in 0..steps {
        let mut w = op.apply(&q);
        let alpha = w.dot(&q);
        if !alpha.is_finite() {
            return Err(Error::numerical("non-finite Lanczos coefficient"));
        }
        w.axpy(-alpha, &q, 1.0);
        w.axpy(-beta_prev, &q_prev, 1.0);
        alphas.push(alpha);
        if k + 1 == steps {
            break;
        }
        let beta = w.norm();
        if beta < BREAKDOWN * alpha.abs().max(1.0) {
            return Ok(LanczosRun {
                alphas,
                betas,
                broke_down: true,
            });
        }
        betas.push(beta);
        q_prev = std::mem::replace(&mut q, w / beta);
        beta_prev = beta;
    }
    Ok(LanczosRun {
        alphas,
        betas,
        broke_down: false,
    })
}

pub fn ritz_values(op: &dyn LinearOperator, start: &DVector<f64>, steps: usize) -> Result<Vec<f64>> {
    Ok(lanczos(op, start, steps)?.quadrature().0)
}

/// Stochastic Lanczos quadrature estimate of `log |op|`.
pub fn slq_logdet(
    op: &dyn LinearOperator,
    num_probes: usize,
    lanczos_steps: usize,
    seed: u64,
    kind: ProbeKind,
) -> Result<f64> {
    if num_probes == 0 {
        return Err(Error::InvalidArgument("SLQ needs at least one probe".into()));
    }
    let n = op.dim();
    let mut total = 0.0;
    for p in 0..num_probes {
        let mut rng = rng_from(seed, &[stream::SLQ, p as u64]);
        let v = draw_probe(kind, n, &mut rng);
        let run = lanczos(op, &v, lanczos_steps)?;
        let (nodes, weights) = run.quadrature();
        let mut quad = 0.0;
        for (theta, tau2) in nodes.iter().zip(&weights) {
            if !(*theta > 0.0) {
                return Err(Error::numerical(format!(
                    "Ritz value {theta} is not positive; operator is not SPD"
                )));
            }
            quad += tau2 * theta.ln();
        }
        total += v.norm_squared() * quad;
    }
    Ok(total / num_probes as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iterlinalg::ScaledIdentity;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn identity_logdet_is_zero() {
        let op = ScaledIdentity { dim: 50, scale: 1.0 };
        let est = slq_logdet(&op, 10, 20, 1, ProbeKind::Rademacher).unwrap();
        assert_eq!(est, 0.0);
    }

    #[test]
    fn scaled_identity_exact() {
        let op = ScaledIdentity { dim: 10, scale: 2.0 };
        for kind in [ProbeKind::Rademacher, ProbeKind::Gaussian] {
            for seed in 0..3 {
                let est = slq_logdet(&op, 4, 10, seed, kind).unwrap();
                // Gaussian probes carry ‖v‖² ≠ n, so only Rademacher is exact per probe
                if kind == ProbeKind::Rademacher {
                    assert!((est - 10.0 * 2f64.ln()).abs() < 1e-10);
                }
            }
        }
    }

    fn spd_with_condition(n: usize, cond: f64, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::<f64>::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
        let q = g.qr().q();
        let d = DVector::from_fn(n, |i, _| cond.powf(i as f64 / (n - 1) as f64));
        &q * DMatrix::from_diagonal(&d) * q.transpose()
    }

    #[test]
    fn random_spd_within_three_percent() {
        let a = spd_with_condition(100, 10.0, 21);
        let exact = 2.0 * a.clone().cholesky().unwrap().l().diagonal().map(|x| x.ln()).sum();
        let est = slq_logdet(&a, 100, 30, 5, ProbeKind::Rademacher).unwrap();
        assert!((est - exact).abs() <= 0.03 * exact.abs(), "{est} vs {exact}");
    }

    #[test]
    fn unbiased_over_seeds() {
        let a = spd_with_condition(60, 100.0, 8);
        let exact = 2.0 * a.clone().cholesky().unwrap().l().diagonal().map(|x| x.ln()).sum();
        let ests: Vec<f64> = (0..20)
            .map(|s| slq_logdet(&a, 10, 40, 100 + s, ProbeKind::Rademacher).unwrap())
            .collect();
        let mean = ests.iter().sum::<f64>() / 20.0;
        let var = ests.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / 19.0;
        let se = (var / 20.0).sqrt();
        assert!((mean - exact).abs() <= 2.0 * se + 1e-9, "mean {mean} exact {exact} se {se}");
    }

    #[test]
    fn ritz_values_lie_in_spectrum() {
        let a = spd_with_condition(40, 50.0, 3);
        let v = DVector::from_element(40, 1.0);
        for theta in ritz_values(&a, &v, 15).unwrap() {
            assert!(theta >= 1.0 - 1e-9 && theta <= 50.0 + 1e-9);
        }
    }
}
