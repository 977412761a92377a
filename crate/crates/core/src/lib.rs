//! Exact Gaussian marginal likelihood of GWAS association statistics over
//! banded LD matrices, and the machinery to fit functionally informed priors
//! with it.
//!
//! The crate is organised bottom-up:
//!
//! - [`ldcore`]: banded LD storage, window planning and the per-window
//!   quantities that do not depend on the prior.
//! - [`iterlinalg`]: matrix-free conjugate gradients, stochastic Lanczos
//!   quadrature, Hutchinson probes, a randomized Nyström preconditioner and
//!   dense oracles.
//! - [`likelihood`]: per-window negative log likelihood and its gradient in
//!   the dense and Woodbury forms, plus the LD-score-regression objective.
//! - [`priors`]: annotation tensors and the constant / GLM / network prior
//!   models.
//! - [`synthgen`]: semi-synthetic corpora and genotype fixtures.
//! - [`trainer`]: AdamW training loop and evaluation metrics.
//! - [`corpus`], [`pipeline`] and [`benchmark`]: on-disk corpora and the
//!   end-to-end drivers used by the CLI.

pub mod benchmark;
pub mod corpus;
pub mod error;
pub mod iterlinalg;
pub mod ldcore;
pub mod likelihood;
pub mod pipeline;
pub mod priors;
pub mod rng;
pub mod synthgen;
pub mod trainer;

pub use error::{Error, Result};
pub use iterlinalg::{LinearOperator, ProbeKind, SolverReport};
pub use ldcore::{BandedCorrelationMatrix, PrecomputedWindow, SummaryStats, WindowPlan};
pub use likelihood::{Method, SolverConfig, WindowLoss};
pub use priors::{AnnotationTensor, ModelKind, ModelSpec, NetworkSpec, PriorParams};
pub use synthgen::{GroundTruth, TruthKind};
pub use trainer::{Objective, TrainConfig, TrainState};
