//! LD matrices, summary statistics, window planning and the prior-independent
//! per-window precomputation.

mod banded;
mod precompute;
mod spectrum;
mod stats;
mod windows;

pub use banded::{ld_scores, load_banded_matrix, save_banded_matrix, BandedCorrelationMatrix, BandCholesky};
pub use precompute::{
    load_windows, precompute_all, precompute_window, save_windows, PrecomputedWindow,
};
pub use spectrum::{clip_spectrum, ClippedSpectrum, DEFAULT_CLIP_REL_TOL};
pub use stats::{load_summary_stats, save_summary_stats, SummaryStats, VariantRow};
pub use windows::{plan_windows, WindowPlan};
