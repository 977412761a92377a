use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::priors::AnnotationTensor;
use crate::rng::{rng_from, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnotationGenConfig {
    pub window_len: usize,
    pub func_channels: usize,
    pub pred_channels: usize,
    /// Within-window noise around each variant's channel level.
    pub position_noise: f64,
}

impl Default for AnnotationGenConfig {
    fn default() -> Self {
        Self {
            window_len: 144,
            func_channels: 10,
            pred_channels: 3,
            position_noise: 1.0,
        }
    }
}

/// Random annotations. Each functional channel of a variant has a standard
/// normal level plus independent noise per window position; predictions are
/// standard normal; minor allele frequencies are uniform on [0.01, 0.5] with
/// a random reference allele. LD scores are set to 1.
pub fn gen_annotations(m: usize, cfg: &AnnotationGenConfig, seed: u64) -> Result<AnnotationTensor> {
    let (w, d, p) = (cfg.window_len, cfg.func_channels, cfg.pred_channels);
    let per_variant: Vec<(Vec<f32>, Vec<f64>, f64)> = (0..m)
        .into_par_iter()
        .map(|v| {
            let mut rng = rng_from(seed, &[stream::ANNOT, v as u64]);
            let mut func = Vec::with_capacity(d * w);
            for _ in 0..d {
                let level: f64 = StandardNormal.sample(&mut rng);
                for _ in 0..w {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    func.push((level + cfg.position_noise * e) as f32);
                }
            }
            let pred = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
            let maf: f64 = rng.random_range(0.01..0.5);
            let freq = if rng.random::<bool>() { maf } else { 1.0 - maf };
            (func, pred, freq)
        })
        .collect();
    let mut func = Vec::with_capacity(m * d * w);
    let mut pred = Vec::with_capacity(m * p);
    let mut freq = Vec::with_capacity(m);
    for (f, pr, q) in per_variant {
        func.extend(f);
        pred.extend(pr);
        freq.push(q);
    }
    AnnotationTensor::new(w, d, p, func, pred, freq, vec![1.0; m])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_and_determinism() {
        let cfg = AnnotationGenConfig {
            window_len: 6,
            func_channels: 2,
            pred_channels: 1,
            position_noise: 0.5,
        };
        let a = gen_annotations(20, &cfg, 4).unwrap();
        assert_eq!(a.func_data().len(), 20 * 2 * 6);
        assert_eq!(a, gen_annotations(20, &cfg, 4).unwrap());
        assert!((0..20).all(|m| a.maf(m) >= 0.01 && a.maf(m) <= 0.5));
    }
}
