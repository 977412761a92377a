use crate::error::{Error, Result};
use crate::ldcore::PrecomputedWindow;
use crate::likelihood::{null_nll, window_nll, Method, SolverConfig};
use crate::priors::{prior_forward, AnnotationTensor, PriorParams};

/// `100 · (exp(Δℓ / N) − 1)`: the percent increase in per-person likelihood.
pub fn per_person_increase(delta_loglik: f64, n: f64) -> f64 {
    100.0 * (delta_loglik / n).exp_m1()
}

/// Summed log-likelihood gain of the model over `F = 0` on `windows`,
/// computed exactly.
pub fn heldout_delta_loglik(
    params: &PriorParams,
    annot: &AnnotationTensor,
    windows: &[&PrecomputedWindow],
    sigma2_n: f64,
) -> Result<f64> {
    let cfg = SolverConfig::default();
    let mut delta = 0.0;
    for w in windows {
        let idx: Vec<usize> = w.flank_indices().collect();
        let f = prior_forward(params, annot, &idx)?;
        let loss = window_nll(w, &f, sigma2_n, Method::Dense, &cfg, 0)?;
        delta += null_nll(w, sigma2_n) - loss.nll;
    }
    Ok(delta)
}

/// Held-out per-person likelihood increase in percent.
pub fn evaluate_heldout(
    params: &PriorParams,
    annot: &AnnotationTensor,
    windows: &[&PrecomputedWindow],
    sigma2_n: f64,
    n: f64,
) -> Result<f64> {
    Ok(per_person_increase(heldout_delta_loglik(params, annot, windows, sigma2_n)?, n))
}

/// `sqrt(mean((log f̂ − log f)²))`.
pub fn rmse_log_f(f_hat: &[f64], f_true: &[f64]) -> Result<f64> {
    if f_hat.len() != f_true.len() {
        return Err(Error::InvalidArgument(format!(
            "rmse_log_f: {} estimates for {} true values",
            f_hat.len(),
            f_true.len()
        )));
    }
    if f_hat.is_empty() {
        return Err(Error::EmptyInput("rmse_log_f of no variants".into()));
    }
    if let Some(i) = f_hat.iter().chain(f_true).position(|v| !(*v > 0.0)) {
        return Err(Error::InvalidArgument(format!("rmse_log_f needs positive values (entry {i})")));
    }
    let sse: f64 = f_hat.iter().zip(f_true).map(|(a, b)| (a.ln() - b.ln()).powi(2)).sum();
    Ok((sse / f_hat.len() as f64).sqrt())
}

/// Method-of-moments effect variance under a constant prior:
/// `E[β̂²] = l·f + σ²_N`, averaged over variants. Clamped to a small positive
/// floor when the data show no excess variance.
pub fn moment_mean_f(beta_hat: &[f64], ld_scores: &[f64], sigma2_n: f64) -> f64 {
    let m = beta_hat.len().max(1) as f64;
    let mean_b2 = beta_hat.iter().map(|b| b * b).sum::<f64>() / m;
    let mean_l = ld_scores.iter().sum::<f64>() / ld_scores.len().max(1) as f64;
    let est = (mean_b2 - sigma2_n) / mean_l.max(1e-12);
    est.max(1e-3 * sigma2_n)
}
