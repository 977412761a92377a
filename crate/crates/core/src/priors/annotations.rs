use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-variant annotations: a `d_func × w` grid of functional channels,
/// `d_pred` scalar predictions, allele frequency and LD score.
///
/// The grid is stored as f32 in variant-major, channel-major order. Window
/// means of every functional channel are cached because all prior models
/// only consume the grid through them.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationTensor {
    num_variants: usize,
    window_len: usize,
    func_channels: usize,
    pred_channels: usize,
    func_data: Vec<f32>,
    pred_data: Vec<f64>,
    freq: Vec<f64>,
    ld_score: Vec<f64>,
    func_mean: Vec<f64>,
}

/// Per-channel statistics removed by [`normalize_features`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub func_mean: Vec<f64>,
    pub func_std: Vec<f64>,
    pub pred_mean: Vec<f64>,
    pub pred_std: Vec<f64>,
}

impl AnnotationTensor {
    pub fn new(
        window_len: usize,
        func_channels: usize,
        pred_channels: usize,
        func_data: Vec<f32>,
        pred_data: Vec<f64>,
        freq: Vec<f64>,
        ld_score: Vec<f64>,
    ) -> Result<Self> {
        let m = freq.len();
        if window_len == 0 && func_channels > 0 {
            return Err(Error::Validation("window length must be positive".into()));
        }
        if func_data.len() != m * func_channels * window_len {
            return Err(Error::Validation(format!(
                "func_data has {} entries, expected {m} x {func_channels} x {window_len}",
                func_data.len()
            )));
        }
        if pred_data.len() != m * pred_channels {
            return Err(Error::Validation("pred_data length mismatch".into()));
        }
        if ld_score.len() != m {
            return Err(Error::Validation("ld_score length mismatch".into()));
        }
        if let Some(i) = freq.iter().position(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Validation(format!("freq[{i}] = {} outside [0, 1]", freq[i])));
        }
        if func_data.iter().any(|v| !v.is_finite()) || pred_data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("non-finite annotation value".into()));
        }
        let mut t = Self {
            num_variants: m,
            window_len,
            func_channels,
            pred_channels,
            func_data,
            pred_data,
            freq,
            ld_score,
            func_mean: Vec::new(),
        };
        t.func_mean = t.compute_func_mean();
        Ok(t)
    }

    fn compute_func_mean(&self) -> Vec<f64> {
        let w = self.window_len;
        self.func_data
            .chunks(w.max(1))
            .map(|c| c.iter().map(|v| *v as f64).sum::<f64>() / w as f64)
            .collect()
    }

    pub fn num_variants(&self) -> usize {
        self.num_variants
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn func_channels(&self) -> usize {
        self.func_channels
    }

    pub fn pred_channels(&self) -> usize {
        self.pred_channels
    }

    pub fn func_data(&self) -> &[f32] {
        &self.func_data
    }

    /// `d_func × w` grid of variant `m`, channel-major.
    pub fn func_grid(&self, m: usize) -> &[f32] {
        let stride = self.func_channels * self.window_len;
        &self.func_data[m * stride..(m + 1) * stride]
    }

    /// Window means of the functional channels of variant `m`.
    pub fn func_mean(&self, m: usize) -> &[f64] {
        &self.func_mean[m * self.func_channels..(m + 1) * self.func_channels]
    }

    pub fn pred(&self, m: usize) -> &[f64] {
        &self.pred_data[m * self.pred_channels..(m + 1) * self.pred_channels]
    }

    pub fn pred_data(&self) -> &[f64] {
        &self.pred_data
    }

    pub fn freq(&self) -> &[f64] {
        &self.freq
    }

    pub fn maf(&self, m: usize) -> f64 {
        self.freq[m].min(1.0 - self.freq[m])
    }

    pub fn ld_score(&self) -> &[f64] {
        &self.ld_score
    }

    pub fn set_ld_score(&mut self, ld_score: Vec<f64>) -> Result<()> {
        if ld_score.len() != self.num_variants {
            return Err(Error::Validation("ld_score length mismatch".into()));
        }
        self.ld_score = ld_score;
        Ok(())
    }

    /// Channel `d` of the concatenation `[func, pred broadcast over w]` at
    /// window position `pos`.
    pub fn concat_channel(&self, m: usize, d: usize, pos: usize) -> f64 {
        if d < self.func_channels {
            self.func_grid(m)[d * self.window_len + pos] as f64
        } else {
            self.pred(m)[d - self.func_channels]
        }
    }

    /// Restriction to variants `lo..hi`.
    pub fn slice(&self, lo: usize, hi: usize) -> Self {
        let stride = self.func_channels * self.window_len;
        Self::new(
            self.window_len,
            self.func_channels,
            self.pred_channels,
            self.func_data[lo * stride..hi * stride].to_vec(),
            self.pred_data[lo * self.pred_channels..hi * self.pred_channels].to_vec(),
            self.freq[lo..hi].to_vec(),
            self.ld_score[lo..hi].to_vec(),
        )
        .expect("slice of a valid tensor is valid")
    }
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let (mut n, mut sum) = (0usize, 0.0);
    for v in values.clone() {
        n += 1;
        sum += v;
    }
    let mean = sum / n as f64;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

/// Standardizes every functional and prediction channel by its genome-wide
/// mean and standard deviation. Zero-variance channels become 0 with their
/// standard deviation recorded as 1.
pub fn normalize_features(raw: &AnnotationTensor) -> Result<(AnnotationTensor, FeatureStats)> {
    let m = raw.num_variants;
    if m < 2 {
        return Err(Error::EmptyInput("normalization needs at least two variants".into()));
    }
    let (w, dfun, dpred) = (raw.window_len, raw.func_channels, raw.pred_channels);
    let stride = dfun * w;
    let mut stats = FeatureStats {
        func_mean: Vec::with_capacity(dfun),
        func_std: Vec::with_capacity(dfun),
        pred_mean: Vec::with_capacity(dpred),
        pred_std: Vec::with_capacity(dpred),
    };
    let mut func = raw.func_data.clone();
    for d in 0..dfun {
        let it = (0..m).flat_map(|v| {
            raw.func_data[v * stride + d * w..v * stride + (d + 1) * w]
                .iter()
                .map(|x| *x as f64)
        });
        let (mean, sd) = mean_std(it);
        let flat = sd <= 1e-12;
        let sd = if flat { 1.0 } else { sd };
        for v in 0..m {
            for x in &mut func[v * stride + d * w..v * stride + (d + 1) * w] {
                *x = if flat { 0.0 } else { ((*x as f64 - mean) / sd) as f32 };
            }
        }
        stats.func_mean.push(mean);
        stats.func_std.push(sd);
    }
    let mut pred = raw.pred_data.clone();
    for d in 0..dpred {
        let (mean, sd) = mean_std((0..m).map(|v| raw.pred_data[v * dpred + d]));
        let flat = sd <= 1e-12;
        let sd = if flat { 1.0 } else { sd };
        for v in 0..m {
            pred[v * dpred + d] = if flat { 0.0 } else { (raw.pred_data[v * dpred + d] - mean) / sd };
        }
        stats.pred_mean.push(mean);
        stats.pred_std.push(sd);
    }
    let t = AnnotationTensor::new(w, dfun, dpred, func, pred, raw.freq.clone(), raw.ld_score.clone())?;
    Ok((t, stats))
}

const MAGIC: &[u8; 4] = b"DWAN";
const VERSION: u32 = 1;

/// Writes `DWAN`: magic, u32 version, u64 num_variants, u32 d_func, u32 w,
/// u32 d_pred, then f32 func_data, pred_data, freq and ld_score.
pub fn save_annotations(annot: &AnnotationTensor, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut buf = Vec::with_capacity(32 + 4 * annot.func_data.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(annot.num_variants as u64).to_le_bytes());
    buf.extend_from_slice(&(annot.func_channels as u32).to_le_bytes());
    buf.extend_from_slice(&(annot.window_len as u32).to_le_bytes());
    buf.extend_from_slice(&(annot.pred_channels as u32).to_le_bytes());
    for v in &annot.func_data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for v in annot.pred_data.iter().chain(&annot.freq).chain(&annot.ld_score) {
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out.write_all(&buf)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_annotations(path: &Path) -> Result<AnnotationTensor> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    BufReader::new(file)
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    parse_dwan(&bytes)
}

fn parse_dwan(bytes: &[u8]) -> Result<AnnotationTensor> {
    let bad = |msg: &str| Error::format("DWAN", msg);
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(bad("missing DWAN magic"));
    }
    if bytes.len() < 28 {
        return Err(bad("truncated header"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let m = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let (dfun, w, dpred) = (u32_at(16) as usize, u32_at(20) as usize, u32_at(24) as usize);
    let nfunc = m
        .checked_mul(dfun)
        .and_then(|x| x.checked_mul(w))
        .ok_or_else(|| bad("header sizes overflow"))?;
    let total = nfunc + m * dpred + 2 * m;
    if bytes.len() != 28 + 4 * total {
        return Err(bad(&format!(
            "expected {} payload bytes, found {}",
            4 * total,
            bytes.len() - 28
        )));
    }
    let mut vals = bytes[28..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()));
    let func: Vec<f32> = vals.by_ref().take(nfunc).collect();
    let mut rest: Vec<f64> = vals.map(|v| v as f64).collect();
    let ld = rest.split_off(m * dpred + m);
    let freq = rest.split_off(m * dpred);
    AnnotationTensor::new(w, dfun, dpred, func, rest, freq, ld)
        .map_err(|e| bad(&e.to_string()))
}
