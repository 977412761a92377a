//! End-to-end drivers: window precomputation, model initialization, training
//! and evaluation on a corpus.

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::ldcore::{plan_windows, precompute_all, PrecomputedWindow, DEFAULT_CLIP_REL_TOL};
use crate::priors::{
    build_network, calibrate_output_bias, normalize_features, prior_forward, AnnotationTensor, NetworkSpec,
    PriorParams,
};
use crate::rng::derive_seed;
use crate::trainer::{
    evaluate_heldout, moment_mean_f, rmse_log_f, train, EpochRecord, Objective, TrainConfig, TrainState,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    /// Core window length in base pairs.
    pub window_span: u64,
    /// Flank extension on each side in base pairs.
    pub flank_span: u64,
    pub clip_rel_tol: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            window_span: 100_000,
            flank_span: 50_000,
            clip_rel_tol: DEFAULT_CLIP_REL_TOL,
        }
    }
}

pub fn precompute_corpus(corpus: &Corpus, cfg: &WindowConfig) -> Result<Vec<PrecomputedWindow>> {
    let plan = plan_windows(corpus.r.positions(), cfg.window_span, cfg.flank_span)?;
    precompute_all(&corpus.r, &corpus.stats, &plan, cfg.clip_rel_tol)
}

/// The last `ceil(fraction · count)` windows, kept contiguous so that held-out
/// variants share as little LD with training variants as possible.
pub fn heldout_tail(num_windows: usize, fraction: f64) -> Result<Vec<usize>> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!("held-out fraction {fraction} must lie in [0, 1)")));
    }
    let k = (fraction * num_windows as f64).ceil() as usize;
    if k >= num_windows {
        return Err(Error::InvalidArgument("no windows left for training".into()));
    }
    Ok((num_windows - k..num_windows).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelChoice {
    Constant,
    Glm,
    Network { hidden: usize },
}

impl Default for ModelChoice {
    fn default() -> Self {
        ModelChoice::Network { hidden: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub windows: WindowConfig,
    pub model: ModelChoice,
    pub train: TrainConfig,
    /// Used when `train.heldout_window_ids` is empty.
    pub heldout_fraction: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            windows: WindowConfig::default(),
            model: ModelChoice::default(),
            train: TrainConfig::default(),
            heldout_fraction: 0.2,
        }
    }
}

/// Model features: the corpus annotations standardized per channel.
pub fn model_features(corpus: &Corpus) -> Result<AnnotationTensor> {
    Ok(normalize_features(&corpus.annot)?.0)
}

/// Builds the initial model and sets its output offset so that the mean prior
/// variance over `calib_indices` matches a method-of-moments estimate.
pub fn init_model(
    choice: &ModelChoice,
    annot: &AnnotationTensor,
    corpus: &Corpus,
    calib_indices: &[usize],
    seed: u64,
) -> Result<PriorParams> {
    let mut params = match choice {
        ModelChoice::Constant => PriorParams::constant(0.0),
        ModelChoice::Glm => PriorParams::glm(annot.func_channels(), annot.pred_channels()),
        ModelChoice::Network { hidden } => build_network(
            &NetworkSpec {
                hidden: *hidden,
                func_channels: annot.func_channels(),
                pred_channels: annot.pred_channels(),
            },
            derive_seed(seed, &[0x1417]),
        )?,
    };
    let beta: Vec<f64> = calib_indices.iter().map(|&i| corpus.stats.beta_hat[i]).collect();
    let ld: Vec<f64> = calib_indices.iter().map(|&i| corpus.annot.ld_score()[i]).collect();
    let target = moment_mean_f(&beta, &ld, corpus.stats.sigma2_n);
    calibrate_output_bias(&mut params, annot, calib_indices, target)?;
    Ok(params)
}

/// Metrics of a model on a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model_kind: String,
    pub param_count: usize,
    pub num_heldout_windows: usize,
    /// Percent per-person likelihood increase on held-out windows.
    pub heldout_metric: f64,
    /// RMSE of log prior variance against the simulated truth, when known.
    pub rmse_log_f: Option<f64>,
}

pub fn evaluate_model(
    params: &PriorParams,
    annot: &AnnotationTensor,
    corpus: &Corpus,
    windows: &[PrecomputedWindow],
    heldout_ids: &[usize],
) -> Result<EvalReport> {
    let heldout: Vec<&PrecomputedWindow> = heldout_ids
        .iter()
        .map(|&i| {
            windows
                .get(i)
                .ok_or_else(|| Error::InvalidArgument(format!("held-out window {i} out of range")))
        })
        .collect::<Result<_>>()?;
    let metric = evaluate_heldout(params, annot, &heldout, corpus.stats.sigma2_n, corpus.stats.sample_size)?;
    let rmse = match &corpus.truth {
        Some(t) => {
            let all: Vec<usize> = (0..corpus.num_variants()).collect();
            Some(rmse_log_f(&prior_forward(params, annot, &all)?, &t.effect_variance())?)
        }
        None => None,
    };
    Ok(EvalReport {
        model_kind: format!("{:?}", params.model_kind()).to_lowercase(),
        param_count: params.param_count(),
        num_heldout_windows: heldout.len(),
        heldout_metric: metric,
        rmse_log_f: rmse,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub objective: Objective,
    pub num_train_windows: usize,
    pub heldout_window_ids: Vec<usize>,
    pub history: Vec<EpochRecord>,
    pub eval: EvalReport,
}

pub struct TrainOutcome {
    pub state: TrainState,
    pub report: TrainReport,
}

/// Initializes, trains and evaluates one model on precomputed windows.
pub fn run_training(corpus: &Corpus, windows: &[PrecomputedWindow], cfg: &PipelineConfig) -> Result<TrainOutcome> {
    let annot = model_features(corpus)?;
    let mut train_cfg = cfg.train.clone();
    if train_cfg.heldout_window_ids.is_empty() && cfg.heldout_fraction > 0.0 {
        train_cfg.heldout_window_ids = heldout_tail(windows.len(), cfg.heldout_fraction)?;
    }
    let heldout = train_cfg.heldout_window_ids.clone();
    let mut is_heldout = vec![false; windows.len()];
    for &i in &heldout {
        if i >= windows.len() {
            return Err(Error::InvalidArgument(format!("held-out window {i} out of range")));
        }
        is_heldout[i] = true;
    }
    let calib: Vec<usize> = windows
        .iter()
        .enumerate()
        .filter(|(i, _)| !is_heldout[*i])
        .flat_map(|(_, w)| w.core_indices())
        .collect();
    let model = init_model(&cfg.model, &annot, corpus, &calib, train_cfg.seed)?;
    let state = train(&train_cfg, windows, &annot, model, &corpus.stats)?;
    let eval = evaluate_model(&state.params, &annot, corpus, windows, &heldout)?;
    let report = TrainReport {
        objective: train_cfg.objective,
        num_train_windows: windows.len() - heldout.len(),
        heldout_window_ids: heldout,
        history: state.history.clone(),
        eval,
    };
    Ok(TrainOutcome { state, report })
}
