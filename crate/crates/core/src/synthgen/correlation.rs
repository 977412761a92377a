use rand::Rng;

use crate::error::{Error, Result};
use crate::ldcore::BandedCorrelationMatrix;
use crate::rng::{rng_from, stream};

pub const DEFAULT_SPACING_BP: u64 = 1000;

/// Moving-average coefficients `a_{m,k} = decay^k · U(0.5, 1.5)`, k = 0..=bw.
pub(crate) fn ma_coefficients(m: usize, bandwidth: usize, decay: f64, seed: u64) -> Vec<Vec<f64>> {
    (0..m)
        .map(|i| {
            let mut rng = rng_from(seed, &[stream::LD, i as u64]);
            (0..=bandwidth)
                .map(|k| decay.powi(k as i32) * rng.random_range(0.5..1.5))
                .collect()
        })
        .collect()
}

/// Correlation matrix of the latent process `x_m = Σ_k a_{m,k} z_{m−k}`,
/// which is banded with the given bandwidth and positive definite. Variants
/// are spaced [`DEFAULT_SPACING_BP`] apart.
pub fn gen_banded_correlation(
    m: usize,
    bandwidth: usize,
    decay: f64,
    seed: u64,
) -> Result<BandedCorrelationMatrix> {
    if m == 0 {
        return Err(Error::EmptyInput("no variants requested".into()));
    }
    if bandwidth >= m {
        return Err(Error::InvalidArgument(format!(
            "bandwidth {bandwidth} must be below the variant count {m}"
        )));
    }
    if !(0.0..=1.0).contains(&decay) {
        return Err(Error::InvalidArgument(format!("decay must lie in [0, 1], got {decay}")));
    }
    let a = ma_coefficients(m, bandwidth, decay, seed);
    let var: Vec<f64> = a.iter().map(|r| r.iter().map(|x| x * x).sum()).collect();
    let stride = bandwidth + 1;
    let mut band = vec![0.0; m * stride];
    for i in 0..m {
        band[i * stride] = 1.0;
        for d in 1..=bandwidth.min(i) {
            let j = i - d;
            // z_{i−k} = z_{j−k'} with k' = k − d.
            let cov: f64 = (d..=bandwidth).map(|k| a[i][k] * a[j][k - d]).sum();
            band[i * stride + d] = cov / (var[i] * var[j]).sqrt();
        }
    }
    let positions = (0..m as u64).map(|i| i * DEFAULT_SPACING_BP).collect();
    BandedCorrelationMatrix::new(bandwidth, positions, band)
}
