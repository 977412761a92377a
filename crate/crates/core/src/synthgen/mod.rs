//! Semi-synthetic data: banded LD matrices, annotations, ground-truth priors,
//! sampled association statistics and small genotype fixtures.

mod annotations;
mod correlation;
mod genotype;
mod sample;
mod truth;

pub use annotations::{gen_annotations, AnnotationGenConfig};
pub use correlation::{gen_banded_correlation, DEFAULT_SPACING_BP};
pub use genotype::{beta_form_delta_nll, gen_genotype_fixture, y_form_delta_nll, TestGenotypeSample};
pub use sample::{sample_associations, AssociationSampler};
pub use truth::{
    network_ground_truth, scale_ground_truth, threshold_ground_truth, threshold_log_f, GroundTruth,
    NetworkTruthConfig, ThresholdConfig, TruthKind,
};
