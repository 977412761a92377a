use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"DWLD";
const VERSION: u32 = 1;
const LOAD_DIAG_TOL: f64 = 1e-3;

/// Symmetric LD matrix stored as its lower band.
///
/// Row `i` holds `bandwidth + 1` values; slot `k` is `R[i, i - k]`, so slot 0
/// is the diagonal. Slots reaching before column 0 are stored as zero.
/// Entries further than `bandwidth` from the diagonal are implicitly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedCorrelationMatrix {
    num_variants: usize,
    bandwidth: usize,
    positions: Vec<u64>,
    band_data: Vec<f64>,
}

impl BandedCorrelationMatrix {
    pub fn new(bandwidth: usize, positions: Vec<u64>, band_data: Vec<f64>) -> Result<Self> {
        let num_variants = positions.len();
        if band_data.len() != num_variants * (bandwidth + 1) {
            return Err(Error::Validation(format!(
                "band storage has {} values, expected {} x {}",
                band_data.len(),
                num_variants,
                bandwidth + 1
            )));
        }
        if let Some(i) = positions.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Validation(format!(
                "positions not strictly increasing at index {}",
                i + 1
            )));
        }
        if let Some(v) = band_data.iter().find(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("non-finite band entry {v}")));
        }
        let stride = bandwidth + 1;
        for i in 0..num_variants {
            let d = band_data[i * stride];
            if (d - 1.0).abs() > LOAD_DIAG_TOL {
                return Err(Error::Validation(format!(
                    "diagonal entry {i} is {d}, expected 1"
                )));
            }
        }
        Ok(Self {
            num_variants,
            bandwidth,
            positions,
            band_data,
        })
    }

    pub fn identity(positions: Vec<u64>) -> Self {
        let m = positions.len();
        Self::new(0, positions, vec![1.0; m]).expect("identity is valid")
    }

    /// Builds the band from a dense symmetric matrix, keeping `bandwidth`
    /// off-diagonals (lower triangle is read).
    pub fn from_dense(dense: &DMatrix<f64>, bandwidth: usize, positions: Vec<u64>) -> Result<Self> {
        let m = dense.nrows();
        if dense.ncols() != m || positions.len() != m {
            return Err(Error::InvalidArgument("dense matrix shape mismatch".into()));
        }
        let stride = bandwidth + 1;
        let mut band = vec![0.0; m * stride];
        for i in 0..m {
            for k in 0..=bandwidth.min(i) {
                band[i * stride + k] = dense[(i, i - k)];
            }
        }
        Self::new(bandwidth, positions, band)
    }

    pub fn num_variants(&self) -> usize {
        self.num_variants
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn positions(&self) -> &[u64] {
        &self.positions
    }

    pub fn band_data(&self) -> &[f64] {
        &self.band_data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let k = hi - lo;
        if k > self.bandwidth {
            0.0
        } else {
            self.band_data[hi * (self.bandwidth + 1) + k]
        }
    }

    /// Dense copy of the block `rows x cols` (half-open index ranges).
    pub fn dense_block(&self, rows: (usize, usize), cols: (usize, usize)) -> DMatrix<f64> {
        DMatrix::from_fn(rows.1 - rows.0, cols.1 - cols.0, |r, c| {
            self.get(rows.0 + r, cols.0 + c)
        })
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        self.dense_block((0, self.num_variants), (0, self.num_variants))
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.num_variants);
        let mut y = vec![0.0; self.num_variants];
        let stride = self.bandwidth + 1;
        for i in 0..self.num_variants {
            let row = &self.band_data[i * stride..(i + 1) * stride];
            y[i] += row[0] * x[i];
            for k in 1..=self.bandwidth.min(i) {
                let r = row[k];
                y[i] += r * x[i - k];
                y[i - k] += r * x[i];
            }
        }
        y
    }

    /// Row range `[lo, hi)` of column indices that may be nonzero in row `i`.
    pub fn row_support(&self, i: usize) -> (usize, usize) {
        (
            i.saturating_sub(self.bandwidth),
            (i + self.bandwidth + 1).min(self.num_variants),
        )
    }

    /// Banded lower Cholesky factor, or `None` when the matrix is not
    /// numerically positive definite.
    pub fn cholesky(&self) -> Option<BandCholesky> {
        let m = self.num_variants;
        let bw = self.bandwidth;
        let stride = bw + 1;
        // l[i * stride + k] = L[i, i - k]
        let mut l = vec![0.0; m * stride];
        for i in 0..m {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let mut sum = self.get(i, j);
                let k0 = i.saturating_sub(bw).max(j.saturating_sub(bw));
                for k in k0..j {
                    sum -= l[i * stride + (i - k)] * l[j * stride + (j - k)];
                }
                if j == i {
                    if sum <= 0.0 || !sum.is_finite() {
                        return None;
                    }
                    l[i * stride] = sum.sqrt();
                } else {
                    l[i * stride + (i - j)] = sum / l[j * stride];
                }
            }
        }
        Some(BandCholesky {
            num_variants: m,
            bandwidth: bw,
            factor: l,
        })
    }
}

/// Lower-triangular banded factor `L` with `R = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    num_variants: usize,
    bandwidth: usize,
    factor: Vec<f64>,
}

impl BandCholesky {
    /// Computes `L z`.
    pub fn mul_lower(&self, z: &[f64]) -> Vec<f64> {
        let stride = self.bandwidth + 1;
        (0..self.num_variants)
            .map(|i| {
                (0..=self.bandwidth.min(i))
                    .map(|k| self.factor[i * stride + k] * z[i - k])
                    .sum()
            })
            .collect()
    }
}

/// Per-variant LD scores `l_m = Σ_m' R²_{m m'}` over the stored band.
pub fn ld_scores(r: &BandedCorrelationMatrix) -> Vec<f64> {
    let m = r.num_variants;
    let stride = r.bandwidth + 1;
    let mut scores = vec![0.0; m];
    for i in 0..m {
        let row = &r.band_data[i * stride..(i + 1) * stride];
        scores[i] += row[0] * row[0];
        for k in 1..=r.bandwidth.min(i) {
            let sq = row[k] * row[k];
            scores[i] += sq;
            scores[i - k] += sq;
        }
    }
    scores
}

pub fn save_banded_matrix(r: &BandedCorrelationMatrix, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = |bytes: &[u8]| w.write_all(bytes).map_err(|e| Error::io(path, e));
    write(MAGIC)?;
    write(&VERSION.to_le_bytes())?;
    write(&(r.num_variants as u64).to_le_bytes())?;
    write(&(r.bandwidth as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(r.band_data.len() * 4);
    for &v in &r.band_data {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    write(&buf)?;
    buf.clear();
    for &p in &r.positions {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    write(&buf)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_banded_matrix(path: &Path) -> Result<BandedCorrelationMatrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    BufReader::new(file)
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    parse_dwld(&bytes)
}

fn parse_dwld(bytes: &[u8]) -> Result<BandedCorrelationMatrix> {
    let fmt = |msg: &str| Error::format("DWLD", msg);
    if bytes.len() < 24 || &bytes[..4] != MAGIC {
        return Err(fmt("missing DWLD magic"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(fmt(&format!("unsupported version {version}")));
    }
    let m = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let bw = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    let band_len = m
        .checked_mul(bw + 1)
        .ok_or_else(|| fmt("header dimensions overflow"))?;
    let expected = 24 + band_len * 4 + m * 8;
    if bytes.len() != expected {
        return Err(fmt(&format!(
            "expected {expected} bytes for M={m}, bandwidth={bw}, found {}",
            bytes.len()
        )));
    }
    let band_data = bytes[24..24 + band_len * 4]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    let positions = bytes[24 + band_len * 4..]
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    BandedCorrelationMatrix::new(bw, positions, band_data)
}
