//! On-disk corpora: an LD matrix, annotations, summary statistics and, for
//! simulated data, the ground truth.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ldcore::{
    ld_scores, load_banded_matrix, load_summary_stats, save_banded_matrix, save_summary_stats,
    BandedCorrelationMatrix, SummaryStats, VariantRow,
};
use crate::priors::{load_annotations, save_annotations, AnnotationTensor};
use crate::synthgen::{
    gen_annotations, gen_banded_correlation, network_ground_truth, sample_associations, threshold_ground_truth,
    AnnotationGenConfig, GroundTruth, NetworkTruthConfig, ThresholdConfig, TruthKind,
};

/// Sample size and variant count of the cohort the desk defaults are scaled
/// from. Simulations keep `N²/M` at this ratio unless N is given.
pub const REFERENCE_N: f64 = 407_527.0;
pub const REFERENCE_M: f64 = 11_904_924.0;

/// `N = sqrt(M · N_ref² / M_ref)`.
pub fn matched_sample_size(m: usize) -> f64 {
    (m as f64 * REFERENCE_N * REFERENCE_N / REFERENCE_M).sqrt().round()
}

/// File layout of a corpus directory.
#[derive(Debug, Clone)]
pub struct CorpusPaths {
    pub dir: PathBuf,
}

impl CorpusPaths {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn ld(&self) -> PathBuf {
        self.dir.join("ld.dwld")
    }

    pub fn annotations(&self) -> PathBuf {
        self.dir.join("annot.dwan")
    }

    pub fn sumstats(&self) -> PathBuf {
        self.dir.join("sumstats.tsv")
    }

    pub fn sumstats_meta(&self) -> PathBuf {
        self.dir.join("sumstats.json")
    }

    pub fn truth(&self) -> PathBuf {
        self.dir.join("truth.json")
    }

    pub fn windows(&self) -> PathBuf {
        self.dir.join("windows.dwpw")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub r: BandedCorrelationMatrix,
    pub stats: SummaryStats,
    pub rows: Vec<VariantRow>,
    pub annot: AnnotationTensor,
    pub truth: Option<GroundTruth>,
}

impl Corpus {
    pub fn num_variants(&self) -> usize {
        self.r.num_variants()
    }

    /// Checks that every component describes the same variants.
    pub fn validate(&self) -> Result<()> {
        let m = self.r.num_variants();
        let sizes = [
            ("summary statistics", self.stats.num_variants()),
            ("variant rows", self.rows.len()),
            ("annotations", self.annot.num_variants()),
        ];
        for (what, n) in sizes {
            if n != m {
                return Err(Error::Validation(format!("{what} cover {n} variants, LD matrix has {m}")));
            }
        }
        for (i, (row, pos)) in self.rows.iter().zip(self.r.positions()).enumerate() {
            if row.position != *pos {
                return Err(Error::Validation(format!(
                    "variant {i} sits at {} in the TSV and {pos} in the LD matrix",
                    row.position
                )));
            }
        }
        if let Some(t) = &self.truth {
            if t.f_true.len() != m {
                return Err(Error::Validation(format!("truth covers {} variants, corpus has {m}", t.f_true.len())));
            }
        }
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let paths = CorpusPaths::new(dir);
        save_banded_matrix(&self.r, &paths.ld())?;
        save_annotations(&self.annot, &paths.annotations())?;
        save_summary_stats(&self.stats, &self.rows, &paths.sumstats(), &paths.sumstats_meta())?;
        if let Some(t) = &self.truth {
            let json = serde_json::to_string_pretty(t).expect("truth serializes");
            fs::write(paths.truth(), json + "\n").map_err(|e| Error::io(paths.truth(), e))?;
        }
        Ok(())
    }

    /// Loads a corpus; `truth.json` is optional.
    pub fn load(dir: &Path) -> Result<Self> {
        let paths = CorpusPaths::new(dir);
        let r = load_banded_matrix(&paths.ld())?;
        let annot = load_annotations(&paths.annotations())?;
        let (stats, rows) = load_summary_stats(&paths.sumstats(), &paths.sumstats_meta())?;
        let truth_path = paths.truth();
        let truth = if truth_path.exists() {
            let text = fs::read_to_string(&truth_path).map_err(|e| Error::io(&truth_path, e))?;
            Some(serde_json::from_str(&text).map_err(|e| Error::format("truth JSON", e.to_string()))?)
        } else {
            None
        };
        let corpus = Self {
            r,
            stats,
            rows,
            annot,
            truth,
        };
        corpus.validate()?;
        Ok(corpus)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub num_variants: usize,
    /// `None` keeps `N²/M` at the reference cohort's ratio.
    pub sample_size: Option<f64>,
    pub bandwidth: usize,
    pub decay: f64,
    pub sigma2: f64,
    pub truth: TruthKind,
    pub annotations: AnnotationGenConfig,
    pub network_truth: NetworkTruthConfig,
    pub threshold_truth: ThresholdConfig,
    pub seed: u64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            num_variants: 2000,
            sample_size: None,
            bandwidth: 50,
            decay: 0.8,
            sigma2: 0.5,
            truth: TruthKind::Network,
            annotations: AnnotationGenConfig::default(),
            network_truth: NetworkTruthConfig::default(),
            threshold_truth: ThresholdConfig::default(),
            seed: 0,
        }
    }
}

impl SimulateConfig {
    pub fn sample_size(&self) -> f64 {
        self.sample_size.unwrap_or_else(|| matched_sample_size(self.num_variants))
    }
}

/// LD values are stored as f32; rounding before use keeps in-memory and
/// reloaded corpora identical.
fn quantize_ld(r: &BandedCorrelationMatrix) -> Result<BandedCorrelationMatrix> {
    let band = r.band_data().iter().map(|x| *x as f32 as f64).collect();
    BandedCorrelationMatrix::new(r.bandwidth(), r.positions().to_vec(), band)
}

/// Same for the f64 annotation columns.
fn quantize(annot: &AnnotationTensor) -> Result<AnnotationTensor> {
    let q = |v: &[f64]| v.iter().map(|x| *x as f32 as f64).collect::<Vec<_>>();
    AnnotationTensor::new(
        annot.window_len(),
        annot.func_channels(),
        annot.pred_channels(),
        annot.func_data().to_vec(),
        q(annot.pred_data()),
        q(annot.freq()),
        q(annot.ld_score()),
    )
}

/// Generates a complete semi-synthetic corpus.
pub fn simulate_corpus(cfg: &SimulateConfig) -> Result<Corpus> {
    let m = cfg.num_variants;
    if m < 2 {
        return Err(Error::InvalidArgument("simulation needs at least two variants".into()));
    }
    let n = cfg.sample_size();
    let r = quantize_ld(&gen_banded_correlation(m, cfg.bandwidth, cfg.decay, cfg.seed)?)?;
    let mut annot = gen_annotations(m, &cfg.annotations, cfg.seed)?;
    annot.set_ld_score(ld_scores(&r))?;
    let annot = quantize(&annot)?;
    let truth = match cfg.truth {
        TruthKind::Network => network_ground_truth(&annot, &cfg.network_truth, n, cfg.sigma2, cfg.seed)?,
        TruthKind::Threshold => threshold_ground_truth(&annot, &cfg.threshold_truth, n, cfg.sigma2)?,
        TruthKind::Constant => crate::synthgen::scale_ground_truth(&vec![1.0; m], n, cfg.sigma2, TruthKind::Constant)?,
    };
    let stats = sample_associations(&r, &truth, cfg.seed)?;
    let rows = r
        .positions()
        .iter()
        .zip(annot.freq())
        .enumerate()
        .map(|(i, (&position, &freq))| VariantRow {
            variant_id: format!("v{i}"),
            position,
            freq,
        })
        .collect();
    let corpus = Corpus {
        r,
        stats,
        rows,
        annot,
        truth: Some(truth),
    };
    corpus.validate()?;
    Ok(corpus)
}
