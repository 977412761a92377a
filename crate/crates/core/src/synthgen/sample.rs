use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use super::GroundTruth;
use crate::error::{Error, Result};
use crate::ldcore::{clip_spectrum, BandCholesky, BandedCorrelationMatrix, SummaryStats, DEFAULT_CLIP_REL_TOL};
use crate::rng::{rng_from, stream};

/// Largest variant count for the dense square-root fallback.
const DENSE_FALLBACK_MAX: usize = 4096;

enum NoiseFactor {
    Band(BandCholesky),
    /// `U Λ^{1/2}` of the clipped spectrum.
    Dense(DMatrix<f64>),
}

/// Draws `β̂ = Rβ + ε` with `β_m ~ N(0, v_m)` and `ε ~ N(0, σ²_N R)`.
///
/// The noise uses the banded Cholesky factor of R when R is numerically
/// positive definite, and the clipped spectral square root otherwise.
pub struct AssociationSampler<'a> {
    r: &'a BandedCorrelationMatrix,
    noise: NoiseFactor,
}

impl<'a> AssociationSampler<'a> {
    pub fn new(r: &'a BandedCorrelationMatrix) -> Result<Self> {
        let noise = match r.cholesky() {
            Some(chol) => NoiseFactor::Band(chol),
            None if r.num_variants() <= DENSE_FALLBACK_MAX => {
                let spec = clip_spectrum(&r.to_dense(), DEFAULT_CLIP_REL_TOL)?;
                NoiseFactor::Dense(spec.scale_columns(f64::sqrt))
            }
            None => {
                return Err(Error::numerical(format!(
                    "LD matrix with {} variants is not positive definite",
                    r.num_variants()
                )))
            }
        };
        Ok(Self { r, noise })
    }

    /// One draw; `draw` indexes independent replicates under the same seed.
    pub fn sample(&self, effect_var: &[f64], sigma2_n: f64, seed: u64, draw: u64) -> Result<Vec<f64>> {
        let m = self.r.num_variants();
        if effect_var.len() != m {
            return Err(Error::InvalidArgument("effect variances do not match R".into()));
        }
        if effect_var.iter().any(|v| !(*v >= 0.0)) || !(sigma2_n > 0.0) {
            return Err(Error::InvalidArgument("variances must be nonnegative".into()));
        }
        let mut rng = rng_from(seed, &[stream::SAMPLE, draw, 0]);
        let beta: Vec<f64> = effect_var
            .iter()
            .map(|v| {
                let z: f64 = StandardNormal.sample(&mut rng);
                v.sqrt() * z
            })
            .collect();
        let mut rng = rng_from(seed, &[stream::SAMPLE, draw, 1]);
        let eps = match &self.noise {
            NoiseFactor::Band(chol) => {
                let z: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
                chol.mul_lower(&z)
            }
            NoiseFactor::Dense(root) => {
                let z = DVector::<f64>::from_fn(root.ncols(), |_, _| StandardNormal.sample(&mut rng));
                (root * z).iter().copied().collect()
            }
        };
        let scale = sigma2_n.sqrt();
        Ok(self
            .r
            .matvec(&beta)
            .iter()
            .zip(&eps)
            .map(|(rb, e)| rb + scale * e)
            .collect())
    }
}

/// Summary statistics sampled under `truth`.
pub fn sample_associations(r: &BandedCorrelationMatrix, truth: &GroundTruth, seed: u64) -> Result<SummaryStats> {
    let sampler = AssociationSampler::new(r)?;
    let beta_hat = sampler.sample(&truth.effect_variance(), truth.sigma2 / truth.n, seed, 0)?;
    SummaryStats::new(beta_hat, truth.n, truth.sigma2)
}
