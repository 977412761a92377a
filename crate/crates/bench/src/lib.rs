//! Shared fixtures for the criterion benchmarks.

use deepwas_core::corpus::{simulate_corpus, Corpus, SimulateConfig};
use deepwas_core::pipeline::{precompute_corpus, WindowConfig};
use deepwas_core::PrecomputedWindow;

pub struct Fixture {
    pub corpus: Corpus,
    pub windows: Vec<PrecomputedWindow>,
    /// True effect variances of every variant.
    pub f: Vec<f64>,
}

impl Fixture {
    /// A simulated corpus with the default window spans.
    pub fn new(num_variants: usize, seed: u64) -> Self {
        let corpus = simulate_corpus(&SimulateConfig {
            num_variants,
            seed,
            ..Default::default()
        })
        .expect("simulation succeeds");
        let windows = precompute_corpus(&corpus, &WindowConfig::default()).expect("precompute succeeds");
        let f = corpus.truth.as_ref().expect("simulated").effect_variance();
        Self { corpus, windows, f }
    }

    pub fn window_f(&self, i: usize) -> &[f64] {
        let w = &self.windows[i];
        &self.f[w.flank.0..w.flank.1]
    }
}
