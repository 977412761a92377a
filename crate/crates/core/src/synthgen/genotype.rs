use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use super::correlation::{ma_coefficients, DEFAULT_SPACING_BP};
use crate::error::{Error, Result};
use crate::ldcore::{
    plan_windows, precompute_window, BandedCorrelationMatrix, SummaryStats, DEFAULT_CLIP_REL_TOL,
};
use crate::likelihood::{null_nll, window_nll, Method, SolverConfig};
use crate::rng::{rng_from, stream};

/// Individual-level fixture: standardized genotypes and a phenotype.
#[derive(Debug, Clone)]
pub struct TestGenotypeSample {
    /// `M × N`, every row with mean 0 and variance 1.
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub beta_true: DVector<f64>,
    /// `X Xᵀ / N`, stored with full bandwidth.
    pub r: BandedCorrelationMatrix,
    /// `X y / N`.
    pub beta_hat: Vec<f64>,
    pub sigma2: f64,
}

impl TestGenotypeSample {
    pub fn num_individuals(&self) -> usize {
        self.x.ncols()
    }
}

/// Genotypes follow the same moving-average construction as
/// [`super::gen_banded_correlation`], sampled per individual and then
/// standardized; `y = Xᵀβ + ε` with `β_m ~ N(0, v_m)`, `ε ~ N(0, σ²)`.
pub fn gen_genotype_fixture(
    m: usize,
    n: usize,
    bandwidth: usize,
    effect_var: &[f64],
    sigma2: f64,
    seed: u64,
) -> Result<TestGenotypeSample> {
    if m == 0 || n < 2 {
        return Err(Error::InvalidArgument("need at least one variant and two individuals".into()));
    }
    if effect_var.len() != m {
        return Err(Error::InvalidArgument("effect variances do not match M".into()));
    }
    let a = ma_coefficients(m, bandwidth, 0.8, seed);
    let mut rng = rng_from(seed, &[stream::GENOTYPE]);
    let mut x = DMatrix::zeros(m, n);
    for ind in 0..n {
        // Latents z_{−bw}, …, z_{m−1}.
        let z: Vec<f64> = (0..m + bandwidth).map(|_| StandardNormal.sample(&mut rng)).collect();
        for v in 0..m {
            x[(v, ind)] = (0..=bandwidth).map(|k| a[v][k] * z[v + bandwidth - k]).sum();
        }
    }
    for mut row in x.row_iter_mut() {
        let mean: f64 = row.mean();
        row.add_scalar_mut(-mean);
        let sd = (row.norm_squared() / n as f64).sqrt();
        if sd == 0.0 {
            return Err(Error::numerical("constant genotype row"));
        }
        row /= sd;
    }
    let beta_true = DVector::from_iterator(
        m,
        effect_var.iter().map(|v| {
            let z: f64 = StandardNormal.sample(&mut rng);
            v.sqrt() * z
        }),
    );
    let eps = DVector::from_fn(n, |_, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        sigma2.sqrt() * z
    });
    let y = x.tr_mul(&beta_true) + eps;
    let mut rd = &x * x.transpose() / n as f64;
    for i in 0..m {
        rd[(i, i)] = 1.0;
    }
    let positions = (0..m as u64).map(|i| i * DEFAULT_SPACING_BP).collect();
    let r = BandedCorrelationMatrix::from_dense(&rd, m - 1, positions)?;
    let beta_hat = (&x * &y / n as f64).iter().copied().collect();
    Ok(TestGenotypeSample {
        x,
        y,
        beta_true,
        r,
        beta_hat,
        sigma2,
    })
}

/// `NLL(F) − NLL(0)` of `y ~ N(0, XᵀFX + σ²I)`, computed densely.
pub fn y_form_delta_nll(sample: &TestGenotypeSample, effect_var: &[f64]) -> Result<f64> {
    let n = sample.num_individuals();
    let s2 = sample.sigma2;
    let mut fx = sample.x.clone();
    for (i, mut row) in fx.row_iter_mut().enumerate() {
        row *= effect_var[i];
    }
    let mut cov = sample.x.tr_mul(&fx);
    for i in 0..n {
        cov[(i, i)] += s2;
    }
    let chol = cov
        .cholesky()
        .ok_or_else(|| Error::numerical("phenotype covariance is not positive definite"))?;
    let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let quad = sample.y.dot(&chol.solve(&sample.y));
    let model = 0.5 * (quad + logdet);
    let null = 0.5 * (sample.y.norm_squared() / s2 + n as f64 * s2.ln());
    Ok(model - null)
}

/// Same difference from `(β̂, R)` through one window spanning every variant.
pub fn beta_form_delta_nll(sample: &TestGenotypeSample, effect_var: &[f64]) -> Result<f64> {
    let stats = SummaryStats::new(sample.beta_hat.clone(), sample.num_individuals() as f64, sample.sigma2)?;
    let positions = sample.r.positions();
    let span = positions[positions.len() - 1] + 1;
    let plan = plan_windows(positions, span, 0)?;
    let window = precompute_window(&sample.r, &stats, &plan, 0, DEFAULT_CLIP_REL_TOL)?;
    let loss = window_nll(&window, effect_var, stats.sigma2_n, Method::Dense, &SolverConfig::default(), 0)?;
    Ok(loss.nll - null_nll(&window, stats.sigma2_n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardized_rows() {
        let s = gen_genotype_fixture(20, 100, 3, &[0.01; 20], 0.5, 1).unwrap();
        for row in s.x.row_iter() {
            assert!(row.mean().abs() < 1e-12);
            assert!((row.norm_squared() / 100.0 - 1.0).abs() < 1e-12);
        }
        for i in 0..20 {
            assert_eq!(s.r.get(i, i), 1.0);
        }
    }

    #[test]
    fn null_model_phenotype() {
        let s = gen_genotype_fixture(10, 150, 2, &[0.0; 10], 1.0, 2).unwrap();
        assert!(s.beta_true.iter().all(|b| *b == 0.0));
        let mean = s.y.mean();
        assert!(mean.abs() < 4.0 / 150f64.sqrt());
    }

    #[test]
    fn held_in_and_held_out_forms_agree() {
        for seed in 0..5 {
            let m = 30;
            let v: Vec<f64> = (0..m).map(|i| 0.5 / m as f64 * (1 + i % 4) as f64 / 2.5).collect();
            let s = gen_genotype_fixture(m, 150, 4, &v, 0.5, seed).unwrap();
            let a = y_form_delta_nll(&s, &v).unwrap();
            let b = beta_form_delta_nll(&s, &v).unwrap();
            assert!((a - b).abs() < 1e-6, "seed {seed}: {a} vs {b}");
        }
    }
}
