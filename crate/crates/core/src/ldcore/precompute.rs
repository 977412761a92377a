use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{clip_spectrum, BandedCorrelationMatrix, ClippedSpectrum, SummaryStats, WindowPlan};
use crate::error::{Error, Result};

/// Prior-independent quantities for one window.
///
/// With `c` the core and `+` the flank: `L = R₊c R†cc`, `W = R₊c R†cc Rc₊`,
/// `l_beta = L β̂c` and `quad_null = β̂cᵀ R†cc β̂c`.
#[derive(Debug, Clone)]
pub struct PrecomputedWindow {
    pub window_index: usize,
    pub core: (usize, usize),
    pub flank: (usize, usize),
    pub pinv_factors: ClippedSpectrum,
    /// `|flank| x |core|` slice of R.
    pub r_flank_core: DMatrix<f64>,
    pub l_mat: DMatrix<f64>,
    pub w_mat: DMatrix<f64>,
    pub logpdet_r: f64,
    pub beta_core: DVector<f64>,
    pub l_beta: DVector<f64>,
    pub quad_null: f64,
}

impl PrecomputedWindow {
    pub fn from_parts(
        window_index: usize,
        core: (usize, usize),
        flank: (usize, usize),
        r_flank_core: DMatrix<f64>,
        pinv_factors: ClippedSpectrum,
        beta_core: DVector<f64>,
    ) -> Self {
        // V = R₊c U Λ^{-1/2}, so W = V Vᵀ is PSD by construction.
        let ru = &r_flank_core * &pinv_factors.eigvecs;
        let mut v = ru.clone();
        for (j, mut col) in v.column_iter_mut().enumerate() {
            col /= pinv_factors.eigvals[j].sqrt();
        }
        let mut w_mat = &v * v.transpose();
        let n = w_mat.nrows();
        for i in 0..n {
            for j in 0..i {
                let m = 0.5 * (w_mat[(i, j)] + w_mat[(j, i)]);
                w_mat[(i, j)] = m;
                w_mat[(j, i)] = m;
            }
        }
        let mut ru_scaled = ru;
        for (j, mut col) in ru_scaled.column_iter_mut().enumerate() {
            col /= pinv_factors.eigvals[j];
        }
        let l_mat = &ru_scaled * pinv_factors.eigvecs.transpose();
        let l_beta = &l_mat * &beta_core;
        let quad_null = pinv_factors.pinv_quadratic(&beta_core);
        Self {
            window_index,
            core,
            flank,
            logpdet_r: pinv_factors.logpdet,
            pinv_factors,
            r_flank_core,
            l_mat,
            w_mat,
            beta_core,
            l_beta,
            quad_null,
        }
    }

    pub fn core_len(&self) -> usize {
        self.core.1 - self.core.0
    }

    pub fn flank_len(&self) -> usize {
        self.flank.1 - self.flank.0
    }

    pub fn core_rank(&self) -> usize {
        self.pinv_factors.rank
    }

    pub fn core_indices(&self) -> std::ops::Range<usize> {
        self.core.0..self.core.1
    }

    pub fn flank_indices(&self) -> std::ops::Range<usize> {
        self.flank.0..self.flank.1
    }

    /// Offset of the core's first variant inside the flank.
    pub fn core_offset(&self) -> usize {
        self.core.0 - self.flank.0
    }

    /// `R_cc`, read out of the stored flank-by-core slice.
    pub fn r_core(&self) -> DMatrix<f64> {
        self.r_flank_core
            .rows(self.core_offset(), self.core_len())
            .into_owned()
    }
}

pub fn precompute_window(
    r: &BandedCorrelationMatrix,
    stats: &SummaryStats,
    plan: &WindowPlan,
    i: usize,
    rel_tol: f64,
) -> Result<PrecomputedWindow> {
    let core = *plan
        .windows
        .get(i)
        .ok_or_else(|| Error::InvalidArgument(format!("window {i} out of range")))?;
    let flank = plan.flanks[i];
    if stats.num_variants() != r.num_variants() {
        return Err(Error::InvalidArgument(
            "summary statistics and LD matrix disagree on variant count".into(),
        ));
    }
    let r_flank_core = r.dense_block(flank, core);
    let r_core = r.dense_block(core, core);
    let spectrum = clip_spectrum(&r_core, rel_tol)?;
    let beta_core = DVector::from_column_slice(&stats.beta_hat[core.0..core.1]);
    Ok(PrecomputedWindow::from_parts(
        i,
        core,
        flank,
        r_flank_core,
        spectrum,
        beta_core,
    ))
}

/// Precomputes every window. Windows are independent; the output order is
/// the plan order whatever the thread schedule.
pub fn precompute_all(
    r: &BandedCorrelationMatrix,
    stats: &SummaryStats,
    plan: &WindowPlan,
    rel_tol: f64,
) -> Result<Vec<PrecomputedWindow>> {
    (0..plan.len())
        .into_par_iter()
        .map(|i| precompute_window(r, stats, plan, i, rel_tol))
        .collect()
}

const MAGIC: &[u8; 4] = b"DWPW";
const VERSION: u32 = 1;

/// Writes windows as `DWPW`: magic, u32 version, u64 count, then per window
/// u64 index, core and flank bounds, rank, followed by little-endian f64
/// eigenvalues, eigenvectors (column-major), core β̂ and the flank-by-core R
/// slice (column-major). `L` and `W` are rebuilt on load.
pub fn save_windows(windows: &[PrecomputedWindow], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(windows.len() as u64).to_le_bytes());
    for win in windows {
        for v in [
            win.window_index,
            win.core.0,
            win.core.1,
            win.flank.0,
            win.flank.1,
            win.pinv_factors.rank,
        ] {
            buf.extend_from_slice(&(v as u64).to_le_bytes());
        }
        let floats = win
            .pinv_factors
            .eigvals
            .iter()
            .chain(win.pinv_factors.eigvecs.iter())
            .chain(win.beta_core.iter())
            .chain(win.r_flank_core.iter());
        for x in floats {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        w.write_all(&buf).map_err(|e| Error::io(path, e))?;
        buf.clear();
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_windows(path: &Path) -> Result<Vec<PrecomputedWindow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    BufReader::new(file)
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    let mut cur = Cursor { bytes: &bytes, at: 0 };
    if cur.take(4)? != MAGIC {
        return Err(Error::format("DWPW", "missing magic"));
    }
    let version = u32::from_le_bytes(cur.take(4)?.try_into().unwrap());
    if version != VERSION {
        return Err(Error::format("DWPW", format!("unsupported version {version}")));
    }
    let count = cur.u64()? as usize;
    let mut out = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let index = cur.u64()? as usize;
        let core = (cur.u64()? as usize, cur.u64()? as usize);
        let flank = (cur.u64()? as usize, cur.u64()? as usize);
        let rank = cur.u64()? as usize;
        if core.1 <= core.0 || flank.0 > core.0 || flank.1 < core.1 || rank > core.1 - core.0 {
            return Err(Error::format("DWPW", format!("inconsistent ranges in window {index}")));
        }
        let nc = core.1 - core.0;
        let nf = flank.1 - flank.0;
        let eigvals = DVector::from_vec(cur.f64s(rank)?);
        let eigvecs = DMatrix::from_vec(nc, rank, cur.f64s(nc * rank)?);
        let beta_core = DVector::from_vec(cur.f64s(nc)?);
        let r_flank_core = DMatrix::from_vec(nf, nc, cur.f64s(nf * nc)?);
        let logpdet = eigvals.iter().map(|l| l.ln()).sum();
        let spectrum = ClippedSpectrum {
            eigvecs,
            eigvals,
            logpdet,
            rank,
        };
        out.push(PrecomputedWindow::from_parts(
            index,
            core,
            flank,
            r_flank_core,
            spectrum,
            beta_core,
        ));
    }
    if cur.at != bytes.len() {
        return Err(Error::format("DWPW", "trailing bytes"));
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .at
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::format("DWPW", "truncated file"))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        Ok(self
            .take(n.checked_mul(8).ok_or_else(|| Error::format("DWPW", "size overflow"))?)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ldcore::{plan_windows, DEFAULT_CLIP_REL_TOL};
    use crate::synthgen::gen_banded_correlation;

    fn stats_for(m: usize, seed: u64) -> SummaryStats {
        let beta = (0..m)
            .map(|i| ((i as f64 + seed as f64) * 0.731).sin() * 0.05)
            .collect();
        SummaryStats::new(beta, 1000.0, 0.5).unwrap()
    }

    #[test]
    fn identity_matrix_window() {
        let pos: Vec<u64> = (0..30).map(|i| i * 10).collect();
        let r = BandedCorrelationMatrix::identity(pos.clone());
        let plan = plan_windows(&pos, 100, 20).unwrap();
        let stats = stats_for(30, 0);
        let w = precompute_window(&r, &stats, &plan, 1, DEFAULT_CLIP_REL_TOL).unwrap();
        assert_eq!(w.core, (10, 20));
        assert_eq!(w.flank, (8, 22));
        assert_eq!(w.logpdet_r, 0.0);
        let off = w.core_offset();
        for i in 0..w.flank_len() {
            for j in 0..w.core_len() {
                let e = if i == j + off { 1.0 } else { 0.0 };
                assert!((w.l_mat[(i, j)] - e).abs() < 1e-14);
            }
            for j in 0..w.flank_len() {
                let in_core = i >= off && i < off + w.core_len();
                let e = if i == j && in_core { 1.0 } else { 0.0 };
                assert!((w.w_mat[(i, j)] - e).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn flank_equal_core_gives_projected_r() {
        let r = gen_banded_correlation(20, 4, 0.7, 5).unwrap();
        let plan = plan_windows(r.positions(), 1_000_000, 0).unwrap();
        let stats = stats_for(20, 1);
        let w = precompute_window(&r, &stats, &plan, 0, DEFAULT_CLIP_REL_TOL).unwrap();
        assert_eq!(w.flank, w.core);
        let dense = r.to_dense();
        let s = clip_spectrum(&dense, DEFAULT_CLIP_REL_TOL).unwrap();
        let oracle = &dense * s.pinv() * &dense;
        assert!((&w.w_mat - oracle).amax() < 1e-10);
    }

    #[test]
    fn w_matches_dense_oracle_on_random_band() {
        let r = gen_banded_correlation(60, 10, 0.8, 9).unwrap();
        let plan = plan_windows(r.positions(), 20 * 1000, 10 * 1000).unwrap();
        assert_eq!(plan.len(), 3);
        let stats = stats_for(60, 2);
        let dense = r.to_dense();
        for i in 0..plan.len() {
            let w = precompute_window(&r, &stats, &plan, i, DEFAULT_CLIP_REL_TOL).unwrap();
            let (c, f) = (w.core, w.flank);
            let r_fc = dense.view((f.0, c.0), (f.1 - f.0, c.1 - c.0)).into_owned();
            let r_cc = dense.view((c.0, c.0), (c.1 - c.0, c.1 - c.0)).into_owned();
            let pinv = r_cc.clone().pseudo_inverse(1e-12).unwrap();
            let oracle = &r_fc * &pinv * r_fc.transpose();
            assert!((&w.w_mat - &oracle).amax() < 1e-10, "window {i}");
            let eig = w.w_mat.clone().symmetric_eigenvalues();
            assert!(eig.min() >= -1e-8);
            assert!(w.quad_null >= 0.0);
            assert!((&w.w_mat - w.w_mat.transpose()).amax() <= 1e-8);
        }
    }

    #[test]
    fn windows_roundtrip_through_file() {
        let r = gen_banded_correlation(50, 5, 0.6, 1).unwrap();
        let plan = plan_windows(r.positions(), 15_000, 5_000).unwrap();
        let stats = stats_for(50, 3);
        let ws = precompute_all(&r, &stats, &plan, DEFAULT_CLIP_REL_TOL).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.dwpw");
        save_windows(&ws, &path).unwrap();
        let back = load_windows(&path).unwrap();
        assert_eq!(back.len(), ws.len());
        for (a, b) in ws.iter().zip(&back) {
            assert_eq!(a.w_mat, b.w_mat);
            assert_eq!(a.l_beta, b.l_beta);
            assert_eq!(a.quad_null, b.quad_null);
            assert_eq!(a.logpdet_r, b.logpdet_r);
        }
    }
}
