//! Window mini-batch training of prior models and the evaluation metrics.

mod metrics;
mod optim;
mod train;

pub use metrics::{evaluate_heldout, heldout_delta_loglik, moment_mean_f, per_person_increase, rmse_log_f};
pub use optim::{warmup_lr, AdamW, Moments};
pub use train::{train, EpochRecord, Objective, StepRecord, TrainConfig, TrainState};
