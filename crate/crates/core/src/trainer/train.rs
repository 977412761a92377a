use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::evaluate_heldout;
use super::optim::{warmup_lr, AdamW, Moments};
use crate::error::{Error, Result};
use crate::ldcore::{PrecomputedWindow, SummaryStats};
use crate::likelihood::{ldsr_window_objective, window_nll, window_nll_grad, Method, SolverConfig};
use crate::priors::{prior_backward, prior_forward, AnnotationTensor, ModelKind, PriorParams};
use crate::rng::{derive_seed, rng_from, stream};

/// Per-window loss used for training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// Exact Gaussian likelihood of β̂.
    #[default]
    Likelihood,
    /// Weighted LD score regression restricted to the window core.
    Ldsr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub objective: Objective,
    pub method: Method,
    /// `None` picks 1e-4 for networks and 1e-3 otherwise.
    pub learning_rate: Option<f64>,
    pub warmup_steps: u64,
    pub epochs: usize,
    pub accumulation_steps: usize,
    pub optimizer: AdamW,
    pub seed: u64,
    pub solver: SolverConfig,
    /// Hutchinson probes for the iterative gradient.
    pub num_probes: usize,
    pub heldout_window_ids: Vec<usize>,
    /// Heritability guess in the LDSR weights.
    pub h2_guess: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            objective: Objective::Likelihood,
            method: Method::Dense,
            learning_rate: None,
            warmup_steps: 100,
            epochs: 10,
            accumulation_steps: 12,
            optimizer: AdamW::default(),
            seed: 0,
            solver: SolverConfig::default(),
            num_probes: 100,
            heldout_window_ids: Vec::new(),
            h2_guess: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn learning_rate_for(&self, kind: ModelKind) -> f64 {
        self.learning_rate.unwrap_or(match kind {
            ModelKind::Network => 1e-4,
            ModelKind::Constant | ModelKind::Glm => 1e-3,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.to_string()));
        if let Some(lr) = self.learning_rate {
            if !(lr >= 0.0) || !lr.is_finite() {
                return bad("learning_rate must be finite and nonnegative");
            }
        }
        if self.accumulation_steps == 0 {
            return bad("accumulation_steps must be at least 1");
        }
        if !(self.h2_guess > 0.0) {
            return bad("h2_guess must be positive");
        }
        let o = &self.optimizer;
        if !(0.0..1.0).contains(&o.beta1) || !(0.0..1.0).contains(&o.beta2) || !(o.eps > 0.0) || !(o.weight_decay >= 0.0)
        {
            return bad("optimizer needs betas in [0, 1), eps > 0 and weight_decay >= 0");
        }
        if self.method == Method::Iterative && self.objective == Objective::Likelihood && self.num_probes == 0 {
            return bad("the iterative gradient needs at least one probe");
        }
        Ok(())
    }
}

/// One window visit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Index of the optimizer update this window contributes to (1-based).
    pub step: u64,
    pub epoch: usize,
    pub window: usize,
    pub nll: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Exact objective summed over training windows at the end of the epoch.
    pub train_nll: f64,
    /// Held-out per-person likelihood increase in percent, if windows were
    /// held out.
    pub heldout_metric: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub step: u64,
    pub params: PriorParams,
    pub moments: Moments,
    pub history: Vec<EpochRecord>,
    pub steps: Vec<StepRecord>,
}

/// Shared read-only inputs of every window evaluation.
struct Ctx<'a> {
    cfg: &'a TrainConfig,
    annot: &'a AnnotationTensor,
    stats: &'a SummaryStats,
    num_variants: f64,
}

impl Ctx<'_> {
    /// Objective value and parameter gradient for one window.
    fn value_grad(&self, params: &PriorParams, window: &PrecomputedWindow, seed: u64) -> Result<(f64, Vec<f64>)> {
        let idx: Vec<usize> = window.flank_indices().collect();
        let f = prior_forward(params, self.annot, &idx)?;
        let (value, grad_f) = match self.cfg.objective {
            Objective::Likelihood => {
                let loss = window_nll_grad(
                    window,
                    &f,
                    self.stats.sigma2_n,
                    self.cfg.method,
                    &self.cfg.solver,
                    self.cfg.num_probes,
                    seed,
                )?;
                (loss.nll, loss.grad_f_flank)
            }
            Objective::Ldsr => {
                let (value, grad) = self.ldsr(window, &f)?;
                (value, grad)
            }
        };
        if !value.is_finite() || grad_f.iter().any(|g| !g.is_finite()) {
            return Err(Error::numerical(format!(
                "non-finite loss in window {} (parameter norm {:.6e})",
                window.window_index,
                params.norm()
            )));
        }
        Ok((value, prior_backward(params, self.annot, &idx, &grad_f)?))
    }

    fn ldsr(&self, window: &PrecomputedWindow, f: &[f64]) -> Result<(f64, Vec<f64>)> {
        // The regression is written for f scaled by M.
        let m = self.num_variants;
        let scaled: Vec<f64> = f.iter().map(|v| v * m).collect();
        let ld_core = &self.annot.ld_score()[window.core.0..window.core.1];
        let (value, grad) = ldsr_window_objective(
            window,
            ld_core,
            &scaled,
            self.stats.sigma2,
            self.stats.sample_size,
            m,
            self.cfg.h2_guess,
        )?;
        Ok((value, grad.into_iter().map(|g| g * m).collect()))
    }

    fn value(&self, params: &PriorParams, window: &PrecomputedWindow, seed: u64) -> Result<f64> {
        let idx: Vec<usize> = window.flank_indices().collect();
        let f = prior_forward(params, self.annot, &idx)?;
        match self.cfg.objective {
            Objective::Likelihood => {
                Ok(window_nll(window, &f, self.stats.sigma2_n, self.cfg.method, &self.cfg.solver, seed)?.nll)
            }
            Objective::Ldsr => Ok(self.ldsr(window, &f)?.0),
        }
    }
}

/// Parameters that receive weight decay: everything except the output offset
/// and alpha.
fn decay_mask(params: &PriorParams) -> Vec<bool> {
    let mut mask = vec![true; params.flat().len()];
    mask[params.spec.bias_index()] = false;
    if params.train_alpha {
        let last = mask.len() - 1;
        mask[last] = false;
    }
    mask
}

/// Trains `model` on every window not listed in `heldout_window_ids`.
///
/// Windows are visited in a fresh seeded permutation each epoch; gradients of
/// `accumulation_steps` consecutive windows are averaged into one AdamW
/// update, and a trailing partial group is flushed at the end of the epoch.
pub fn train(
    config: &TrainConfig,
    windows: &[PrecomputedWindow],
    annot: &AnnotationTensor,
    model: PriorParams,
    stats: &SummaryStats,
) -> Result<TrainState> {
    config.validate()?;
    if stats.num_variants() != annot.num_variants() {
        return Err(Error::InvalidArgument(format!(
            "{} summary statistics for {} annotated variants",
            stats.num_variants(),
            annot.num_variants()
        )));
    }
    let mut heldout = vec![false; windows.len()];
    for &id in &config.heldout_window_ids {
        if id >= windows.len() {
            return Err(Error::InvalidArgument(format!("held-out window {id} out of range")));
        }
        heldout[id] = true;
    }
    let train_ids: Vec<usize> = (0..windows.len()).filter(|&i| !heldout[i]).collect();
    if train_ids.is_empty() {
        return Err(Error::EmptyInput("no training windows".into()));
    }
    for w in windows {
        if w.flank.1 > annot.num_variants() {
            return Err(Error::InvalidArgument(format!("window {} exceeds the annotations", w.window_index)));
        }
    }
    let heldout_windows: Vec<&PrecomputedWindow> = config.heldout_window_ids.iter().map(|&i| &windows[i]).collect();

    let ctx = Ctx {
        cfg: config,
        annot,
        stats,
        num_variants: annot.num_variants() as f64,
    };
    let lr = config.learning_rate_for(model.model_kind());
    let mask = decay_mask(&model);
    let n_params = mask.len();
    let mut state = TrainState {
        step: 0,
        params: model,
        moments: Moments::zeros(n_params),
        history: Vec::with_capacity(config.epochs),
        steps: Vec::new(),
    };

    for epoch in 0..config.epochs {
        let mut order = train_ids.clone();
        order.shuffle(&mut rng_from(config.seed, &[stream::SHUFFLE, epoch as u64]));
        for group in order.chunks(config.accumulation_steps) {
            let params = &state.params;
            let results: Vec<Result<(f64, Vec<f64>)>> = group
                .par_iter()
                .map(|&w| ctx.value_grad(params, &windows[w], derive_seed(config.seed, &[epoch as u64, w as u64])))
                .collect();
            let mut mean_grad = vec![0.0; n_params];
            let step = state.step + 1;
            let step_lr = warmup_lr(lr, step, config.warmup_steps);
            for (&w, r) in group.iter().zip(results) {
                let (value, grad) = r?;
                for (a, g) in mean_grad.iter_mut().zip(&grad) {
                    *a += g;
                }
                state.steps.push(StepRecord {
                    step,
                    epoch,
                    window: w,
                    nll: value,
                    lr: step_lr,
                });
            }
            let k = group.len() as f64;
            mean_grad.iter_mut().for_each(|g| *g /= k);
            let mut theta = state.params.flat();
            config
                .optimizer
                .step(&mut theta, &mean_grad, &mut state.moments, step_lr, step, &mask);
            state.params.set_flat(&theta);
            state.step = step;
        }
        let params = &state.params;
        let values: Vec<Result<f64>> = train_ids
            .par_iter()
            .map(|&w| ctx.value(params, &windows[w], derive_seed(config.seed, &[stream::SLQ, epoch as u64, w as u64])))
            .collect();
        let mut train_nll = 0.0;
        for v in values {
            train_nll += v?;
        }
        let heldout_metric = if heldout_windows.is_empty() {
            None
        } else {
            Some(evaluate_heldout(params, annot, &heldout_windows, stats.sigma2_n, stats.sample_size)?)
        };
        state.history.push(EpochRecord {
            epoch,
            train_nll,
            heldout_metric,
        });
    }
    Ok(state)
}
