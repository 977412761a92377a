//! LD score regression objectives. These work in the units of the printed
//! regression: σ² rather than σ²_N, and `Nβ̂²` as the response.

use crate::error::{Error, Result};
use crate::ldcore::{BandedCorrelationMatrix, PrecomputedWindow};

/// `(R∘R) x` over the band.
pub fn squared_r_matvec(r: &BandedCorrelationMatrix, x: &[f64]) -> Vec<f64> {
    (0..r.num_variants())
        .map(|i| {
            let (lo, hi) = r.row_support(i);
            (lo..hi).map(|j| r.get(i, j).powi(2) * x[j]).sum()
        })
        .collect()
}

fn ldsr_weight(l: f64, n: f64, m: f64, h2: f64) -> f64 {
    let t = n * h2 * l / m + 1.0;
    1.0 / (l * t * t)
}

/// Weighted LDSR loss `Σ_i w_i ((N/M)(R∘²f)_i + σ² − Nβ̂²_i)²` and its
/// gradient in f.
#[allow(clippy::too_many_arguments)]
pub fn ldsr_objective(
    r: &BandedCorrelationMatrix,
    beta_hat: &[f64],
    ld_scores: &[f64],
    f: &[f64],
    sigma2: f64,
    n: f64,
    m: f64,
    h2_guess: f64,
) -> Result<(f64, Vec<f64>)> {
    let len = r.num_variants();
    if beta_hat.len() != len || ld_scores.len() != len || f.len() != len {
        return Err(Error::InvalidArgument(
            "LDSR inputs must all have one entry per variant".into(),
        ));
    }
    let pred = squared_r_matvec(r, f);
    let mut value = 0.0;
    let mut dres = vec![0.0; len];
    for i in 0..len {
        let w = ldsr_weight(ld_scores[i], n, m, h2_guess);
        let res = n / m * pred[i] + sigma2 - n * beta_hat[i] * beta_hat[i];
        value += w * res * res;
        dres[i] = 2.0 * w * res * n / m;
    }
    // R∘² is symmetric, so the chain rule is one more banded product.
    Ok((value, squared_r_matvec(r, &dres)))
}

/// LDSR loss restricted to one window's core, with the prediction summed over
/// the window's flank. Returns the gradient in f over the flank.
#[allow(clippy::too_many_arguments)]
pub fn ldsr_window_objective(
    window: &PrecomputedWindow,
    ld_core: &[f64],
    f_flank: &[f64],
    sigma2: f64,
    n: f64,
    m: f64,
    h2_guess: f64,
) -> Result<(f64, Vec<f64>)> {
    if ld_core.len() != window.core_len() || f_flank.len() != window.flank_len() {
        return Err(Error::InvalidArgument("LDSR window input length mismatch".into()));
    }
    let r2 = window.r_flank_core.map(|x| x * x);
    let mut value = 0.0;
    let mut grad = vec![0.0; window.flank_len()];
    for c in 0..window.core_len() {
        let col = r2.column(c);
        let pred: f64 = col.iter().zip(f_flank).map(|(a, b)| a * b).sum();
        let beta = window.beta_core[c];
        let w = ldsr_weight(ld_core[c], n, m, h2_guess);
        let res = n / m * pred + sigma2 - n * beta * beta;
        value += w * res * res;
        let d = 2.0 * w * res * n / m;
        for (g, a) in grad.iter_mut().zip(col.iter()) {
            *g += d * a;
        }
    }
    Ok((value, grad))
}

/// Window-size-one objective `Σ_i [Nβ̂²_i / (N (R∘²f)_i + σ²) + log(N (R∘²f)_i + σ²)]`
/// with f in effect-variance units.
pub fn window1_limit_nll(
    beta_hat: &[f64],
    r: &BandedCorrelationMatrix,
    f: &[f64],
    sigma2: f64,
    n: f64,
) -> f64 {
    squared_r_matvec(r, f)
        .iter()
        .zip(beta_hat)
        .map(|(p, b)| {
            let v = n * p + sigma2;
            n * b * b / v + v.ln()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ldcore::{ld_scores, plan_windows, precompute_all, SummaryStats, WindowPlan, DEFAULT_CLIP_REL_TOL};
    use crate::likelihood::{window_nll, Method, SolverConfig};
    use crate::rng::rng_from;
    use crate::synthgen::gen_banded_correlation;
    use rand::Rng;

    #[test]
    fn single_variant_weights_collapse() {
        let r = BandedCorrelationMatrix::identity(vec![0]);
        let (f, s2, beta, n) = (0.3, 0.5, 0.02, 100.0);
        let (v, g) = ldsr_objective(&r, &[beta], &[1.0], &[f], s2, n, n, 0.0).unwrap();
        let res = f + s2 - n * beta * beta;
        assert!((v - res * res).abs() < 1e-14);
        assert!((g[0] - 2.0 * res).abs() < 1e-12);
    }

    #[test]
    fn exact_fit_has_zero_loss() {
        let m = 30;
        let r = gen_banded_correlation(m, 4, 0.7, 1).unwrap();
        let f: Vec<f64> = (0..m).map(|i| 0.1 + 0.01 * i as f64).collect();
        let (n, mm, s2) = (200.0, m as f64, 0.5);
        let pred = squared_r_matvec(&r, &f);
        let beta: Vec<f64> = pred.iter().map(|p| ((n / mm * p + s2) / n).sqrt()).collect();
        let l = ld_scores(&r);
        let (v, _) = ldsr_objective(&r, &beta, &l, &f, s2, n, mm, 0.5).unwrap();
        assert!(v.abs() < 1e-20, "{v}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = 50;
        let r = gen_banded_correlation(m, 6, 0.8, 2).unwrap();
        let mut rng = rng_from(2, &[1]);
        let beta: Vec<f64> = (0..m).map(|_| rng.random_range(-0.1..0.1)).collect();
        let f: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..1.0)).collect();
        let l = ld_scores(&r);
        let args = (0.5, 300.0, m as f64, 0.5);
        let (_, g) = ldsr_objective(&r, &beta, &l, &f, args.0, args.1, args.2, args.3).unwrap();
        for k in 0..m {
            let h = 1e-5 * f[k].max(1e-2);
            let mut fp = f.clone();
            let mut fm = f.clone();
            fp[k] += h;
            fm[k] -= h;
            let vp = ldsr_objective(&r, &beta, &l, &fp, args.0, args.1, args.2, args.3).unwrap().0;
            let vm = ldsr_objective(&r, &beta, &l, &fm, args.0, args.1, args.2, args.3).unwrap().0;
            let fd = (vp - vm) / (2.0 * h);
            assert!((fd - g[k]).abs() <= 1e-6 * g[k].abs().max(1e-3), "{k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn window_form_matches_global_on_single_window() {
        let m = 40;
        let r = gen_banded_correlation(m, 5, 0.8, 3).unwrap();
        let mut rng = rng_from(3, &[1]);
        let beta: Vec<f64> = (0..m).map(|_| rng.random_range(-0.1..0.1)).collect();
        let f: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..1.0)).collect();
        let stats = SummaryStats::new(beta.clone(), 300.0, 0.5).unwrap();
        let plan = plan_windows(r.positions(), 1 << 40, 0).unwrap();
        let w = &precompute_all(&r, &stats, &plan, DEFAULT_CLIP_REL_TOL).unwrap()[0];
        let l = ld_scores(&r);
        let a = ldsr_objective(&r, &beta, &l, &f, 0.5, 300.0, 40.0, 0.5).unwrap();
        let b = ldsr_window_objective(w, &l, &f, 0.5, 300.0, 40.0, 0.5).unwrap();
        assert!((a.0 - b.0).abs() < 1e-10 * a.0);
        for (x, y) in a.1.iter().zip(&b.1) {
            assert!((x - y).abs() < 1e-10 * x.abs().max(1.0));
        }
    }

    #[test]
    fn identity_closed_form() {
        let r = BandedCorrelationMatrix::identity(vec![0, 10, 20]);
        let beta = [0.1, -0.2, 0.05];
        let (f, s2, n): (f64, f64, f64) = (0.004, 0.6, 250.0);
        let expect: f64 = beta
            .iter()
            .map(|b| n * b * b / (n * f + s2) + (n * f + s2).ln())
            .sum();
        assert!((window1_limit_nll(&beta, &r, &[f; 3], s2, n) - expect).abs() < 1e-12);
        let null: f64 = beta.iter().map(|b| n * b * b / s2 + s2.ln()).sum();
        assert!((window1_limit_nll(&beta, &r, &[0.0; 3], s2, n) - null).abs() < 1e-12);
    }

    #[test]
    fn window1_limit_equals_per_variant_windows() {
        let m = 30;
        let bw = 4;
        let r = gen_banded_correlation(m, bw, 0.8, 4).unwrap();
        let mut rng = rng_from(4, &[1]);
        let beta: Vec<f64> = (0..m).map(|_| rng.random_range(-0.1..0.1)).collect();
        let n = 500.0;
        let f: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..2.0 / n)).collect();
        let stats = SummaryStats::new(beta.clone(), n, 0.5).unwrap();
        let spacing = r.positions()[1] - r.positions()[0];
        let plan = WindowPlan {
            windows: (0..m).map(|i| (i, i + 1)).collect(),
            flanks: (0..m).map(|i| (i.saturating_sub(bw), (i + bw + 1).min(m))).collect(),
            window_span: spacing,
            flank_span: bw as u64 * spacing,
        };
        let windows = precompute_all(&r, &stats, &plan, DEFAULT_CLIP_REL_TOL).unwrap();
        let cfg = SolverConfig::default();
        let total: f64 = windows
            .iter()
            .map(|w| {
                let fw = &f[w.flank.0..w.flank.1];
                window_nll(w, fw, stats.sigma2_n, Method::Dense, &cfg, 0).unwrap().nll
            })
            .sum();
        let limit = window1_limit_nll(&beta, &r, &f, 0.5, n);
        assert!((2.0 * total + m as f64 * n.ln() - limit).abs() < 1e-8);
    }
}
