//! Prior models mapping annotations to per-variant prior variances.

mod annotations;
mod model;
mod params_io;

pub use annotations::{load_annotations, normalize_features, save_annotations, AnnotationTensor, FeatureStats};
pub use model::{
    build_network, calibrate_output_bias, gelu, inverse_softplus, network_logits, prior_backward, prior_forward,
    softplus, ModelKind, ModelSpec, NetworkSpec, PriorParams, DEFAULT_ALPHA,
};
pub use params_io::{load_params, save_params};
