use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::priors::{build_network, network_logits, AnnotationTensor, NetworkSpec, DEFAULT_ALPHA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TruthKind {
    Network,
    Threshold,
    Constant,
}

/// Ground-truth prior in the scaled units where `mean(f_true) = (N/M)(1−σ²)`.
/// The effect variance of variant m is `f_true[m] / N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub f_true: Vec<f64>,
    pub kind: TruthKind,
    pub scale_applied: f64,
    pub target_mean: f64,
    pub n: f64,
    pub sigma2: f64,
}

impl GroundTruth {
    pub fn effect_variance(&self) -> Vec<f64> {
        self.f_true.iter().map(|f| f / self.n).collect()
    }
}

/// Rescales `f_raw` to mean `(N/M)(1−σ²)` with `M = f_raw.len()`.
pub fn scale_ground_truth(f_raw: &[f64], n: f64, sigma2: f64, kind: TruthKind) -> Result<GroundTruth> {
    if f_raw.is_empty() {
        return Err(Error::EmptyInput("no prior values to scale".into()));
    }
    if let Some(i) = f_raw.iter().position(|f| !(*f > 0.0) || !f.is_finite()) {
        return Err(Error::InvalidArgument(format!("f_raw[{i}] = {} is not positive", f_raw[i])));
    }
    if !(n > 0.0) || !(sigma2 > 0.0 && sigma2 <= 1.0) {
        return Err(Error::InvalidArgument("need N > 0 and sigma2 in (0, 1]".into()));
    }
    let m = f_raw.len() as f64;
    let target_mean = n / m * (1.0 - sigma2);
    let mean = f_raw.iter().sum::<f64>() / m;
    let scale = target_mean / mean;
    Ok(GroundTruth {
        f_true: f_raw.iter().map(|f| f * scale).collect(),
        kind,
        scale_applied: scale,
        target_mean,
        n,
        sigma2,
    })
}

/// Sparse indicator prior over channels of `[C_func, C_pred broadcast]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdConfig {
    pub channels: Vec<usize>,
    pub values: Vec<f64>,
    pub thresholds: Vec<f64>,
    /// Inclusive window-position range summed per channel.
    pub positions: (usize, usize),
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self {
            channels: vec![0, 2, 7, 12],
            values: vec![0.7, 0.5, 1.37, 0.5],
            thresholds: vec![0.0, 0.0, -20.0, -10.0],
            positions: (113, 143),
        }
    }
}

/// `log f_m = Σ_d v_d · 1(Σ_{w∈positions} C_{d,w} > e_d) − log M`.
pub fn threshold_log_f(annot: &AnnotationTensor, cfg: &ThresholdConfig) -> Result<Vec<f64>> {
    let (lo, hi) = cfg.positions;
    if hi >= annot.window_len() || lo > hi {
        return Err(Error::InvalidArgument(format!(
            "threshold truth needs window positions {lo}..={hi}, annotations have w = {}",
            annot.window_len()
        )));
    }
    let total = annot.func_channels() + annot.pred_channels();
    if cfg.channels.iter().any(|&d| d >= total)
        || cfg.values.len() != cfg.channels.len()
        || cfg.thresholds.len() != cfg.channels.len()
    {
        return Err(Error::InvalidArgument(format!(
            "threshold channels {:?} do not fit {total} concatenated channels",
            cfg.channels
        )));
    }
    let log_m = (annot.num_variants() as f64).ln();
    Ok((0..annot.num_variants())
        .map(|m| {
            let mut lf = -log_m;
            for ((&d, &v), &e) in cfg.channels.iter().zip(&cfg.values).zip(&cfg.thresholds) {
                let s: f64 = (lo..=hi).map(|pos| annot.concat_channel(m, d, pos)).sum();
                if s > e {
                    lf += v;
                }
            }
            lf
        })
        .collect())
}

pub fn threshold_ground_truth(
    annot: &AnnotationTensor,
    cfg: &ThresholdConfig,
    n: f64,
    sigma2: f64,
) -> Result<GroundTruth> {
    let f_raw: Vec<f64> = threshold_log_f(annot, cfg)?.iter().map(|l| l.exp()).collect();
    scale_ground_truth(&f_raw, n, sigma2, TruthKind::Threshold)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkTruthConfig {
    pub hidden: usize,
    /// Multiplier on the initial weights; larger values make the map more
    /// nonlinear.
    pub gain: f64,
    /// Standard deviation of `log f` contributed by the network.
    pub log_sd: f64,
    pub alpha: f64,
}

impl Default for NetworkTruthConfig {
    fn default() -> Self {
        Self {
            hidden: 16,
            gain: 3.0,
            log_sd: 1.5,
            alpha: DEFAULT_ALPHA,
        }
    }
}

/// `f_raw = (p(1−p))^α · exp(log_sd · z)` where z is the standardized output
/// of a freshly seeded network.
pub fn network_ground_truth(
    annot: &AnnotationTensor,
    cfg: &NetworkTruthConfig,
    n: f64,
    sigma2: f64,
    seed: u64,
) -> Result<GroundTruth> {
    let spec = NetworkSpec {
        hidden: cfg.hidden,
        func_channels: annot.func_channels(),
        pred_channels: annot.pred_channels(),
    };
    let mut net = build_network(&spec, seed)?;
    net.weights.iter_mut().for_each(|w| *w *= cfg.gain);
    let idx: Vec<usize> = (0..annot.num_variants()).collect();
    let o = network_logits(&net, annot, &idx)?;
    let m = o.len() as f64;
    let mean = o.iter().sum::<f64>() / m;
    let sd = (o.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / m).sqrt();
    let sd = if sd > 0.0 { sd } else { 1.0 };
    let f_raw: Vec<f64> = o
        .iter()
        .zip(annot.freq())
        .map(|(x, p)| {
            let p = p.clamp(1e-6, 1.0 - 1e-6);
            (cfg.alpha * (p * (1.0 - p)).ln() + cfg.log_sd * (x - mean) / sd).exp()
        })
        .collect();
    scale_ground_truth(&f_raw, n, sigma2, TruthKind::Network)
}
