use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigenvalues at or below `DEFAULT_CLIP_REL_TOL * λ_max` are discarded.
pub const DEFAULT_CLIP_REL_TOL: f64 = 1e-8;

const SYMMETRY_TOL: f64 = 1e-6;

/// Retained eigenpairs of a symmetric block, sorted by decreasing eigenvalue.
#[derive(Debug, Clone)]
pub struct ClippedSpectrum {
    /// `n x rank`, orthonormal columns.
    pub eigvecs: DMatrix<f64>,
    /// Strictly above the clip threshold.
    pub eigvals: DVector<f64>,
    pub logpdet: f64,
    pub rank: usize,
}

impl ClippedSpectrum {
    pub fn dim(&self) -> usize {
        self.eigvecs.nrows()
    }

    /// Dense pseudo-inverse `U Λ⁻¹ Uᵀ`.
    pub fn pinv(&self) -> DMatrix<f64> {
        let scaled = self.scale_columns(|l| 1.0 / l);
        &scaled * self.eigvecs.transpose()
    }

    /// Nearest PSD matrix of this rank, `U Λ Uᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let scaled = self.scale_columns(|l| l);
        &scaled * self.eigvecs.transpose()
    }

    /// `U diag(g(λ))`.
    pub fn scale_columns(&self, g: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let mut out = self.eigvecs.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            col *= g(self.eigvals[j]);
        }
        out
    }

    /// `bᵀ A† b` for the clipped matrix.
    pub fn pinv_quadratic(&self, b: &DVector<f64>) -> f64 {
        let proj = self.eigvecs.tr_mul(b);
        proj.iter()
            .zip(self.eigvals.iter())
            .map(|(p, l)| p * p / l)
            .sum()
    }
}

/// Eigendecomposes `block` and drops eigenvalues `≤ rel_tol · λ_max`.
pub fn clip_spectrum(block: &DMatrix<f64>, rel_tol: f64) -> Result<ClippedSpectrum> {
    let n = block.nrows();
    if block.ncols() != n {
        return Err(Error::InvalidArgument("clip_spectrum needs a square block".into()));
    }
    if n == 0 {
        return Err(Error::EmptyInput("empty block".into()));
    }
    let scale = block.amax().max(1.0);
    for i in 0..n {
        for j in 0..i {
            if (block[(i, j)] - block[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(Error::InvalidArgument(format!(
                    "block not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    let sym = (block + block.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let lambda_max = eig.eigenvalues[order[0]];
    if !(lambda_max > 0.0) {
        return Err(Error::DegenerateBlock);
    }
    let threshold = rel_tol * lambda_max;
    let kept: Vec<usize> = order
        .into_iter()
        .filter(|&k| eig.eigenvalues[k] > threshold)
        .collect();
    let rank = kept.len();
    let eigvals = DVector::from_iterator(rank, kept.iter().map(|&k| eig.eigenvalues[k]));
    let eigvecs = DMatrix::from_fn(n, rank, |i, j| eig.eigenvectors[(i, kept[j])]);
    let logpdet = eigvals.iter().map(|l| l.ln()).sum();
    Ok(ClippedSpectrum {
        eigvecs,
        eigvals,
        logpdet,
        rank,
    })
}
