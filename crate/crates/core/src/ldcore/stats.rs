use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Marginal associations and the residual-variance bookkeeping needed by the
/// likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryStats {
    pub beta_hat: Vec<f64>,
    pub sample_size: f64,
    pub sigma2: f64,
    /// Always `sigma2 / sample_size`.
    pub sigma2_n: f64,
}

impl SummaryStats {
    pub fn new(beta_hat: Vec<f64>, sample_size: f64, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2 <= 1.0) {
            return Err(Error::Validation(format!("sigma2 must lie in (0, 1], got {sigma2}")));
        }
        if !(sample_size > 0.0) {
            return Err(Error::Validation(format!("sample size must be positive, got {sample_size}")));
        }
        if beta_hat.iter().any(|b| !b.is_finite()) {
            return Err(Error::Validation("non-finite beta_hat".into()));
        }
        Ok(Self {
            beta_hat,
            sample_size,
            sigma2,
            sigma2_n: sigma2 / sample_size,
        })
    }

    pub fn num_variants(&self) -> usize {
        self.beta_hat.len()
    }
}

/// One row of the summary-statistics TSV besides `beta_hat`.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantRow {
    pub variant_id: String,
    pub position: u64,
    pub freq: f64,
}

#[derive(Serialize, Deserialize)]
struct StatsMeta {
    #[serde(rename = "N")]
    n: f64,
    sigma2: f64,
}

const HEADER: &str = "variant_id\tposition\tbeta_hat\tfreq";

pub fn save_summary_stats(
    stats: &SummaryStats,
    rows: &[VariantRow],
    tsv: &Path,
    meta: &Path,
) -> Result<()> {
    if rows.len() != stats.beta_hat.len() {
        return Err(Error::InvalidArgument("row count differs from beta_hat length".into()));
    }
    let mut out = String::with_capacity(rows.len() * 48);
    out.push_str(HEADER);
    out.push('\n');
    for (row, b) in rows.iter().zip(&stats.beta_hat) {
        out.push_str(&format!("{}\t{}\t{:?}\t{:?}\n", row.variant_id, row.position, b, row.freq));
    }
    fs::write(tsv, out).map_err(|e| Error::io(tsv, e))?;
    let json = serde_json::to_string_pretty(&StatsMeta {
        n: stats.sample_size,
        sigma2: stats.sigma2,
    })
    .expect("plain struct serializes");
    fs::write(meta, json + "\n").map_err(|e| Error::io(meta, e))
}

pub fn load_summary_stats(tsv: &Path, meta: &Path) -> Result<(SummaryStats, Vec<VariantRow>)> {
    let text = fs::read_to_string(tsv).map_err(|e| Error::io(tsv, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == HEADER => {}
        _ => return Err(Error::format("summary TSV", format!("expected header `{HEADER}`"))),
    }
    let mut beta = Vec::new();
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let bad = |what: &str| Error::format("summary TSV", format!("line {}: {what}", lineno + 2));
        if cols.len() != 4 {
            return Err(bad("expected 4 columns"));
        }
        let position = cols[1].parse().map_err(|_| bad("bad position"))?;
        let b: f64 = cols[2].parse().map_err(|_| bad("bad beta_hat"))?;
        let freq: f64 = cols[3].parse().map_err(|_| bad("bad freq"))?;
        beta.push(b);
        rows.push(VariantRow {
            variant_id: cols[0].to_string(),
            position,
            freq,
        });
    }
    let meta_text = fs::read_to_string(meta).map_err(|e| Error::io(meta, e))?;
    let m: StatsMeta = serde_json::from_str(&meta_text)
        .map_err(|e| Error::format("summary JSON", e.to_string()))?;
    Ok((SummaryStats::new(beta, m.n, m.sigma2)?, rows))
}
