use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::ldcore::clip_spectrum;

/// `(bᵀ A† b, log |A|₊)` by full eigendecomposition with the same clipping
/// rule as [`clip_spectrum`].
pub fn dense_nll_oracle(a: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> Result<(f64, f64)> {
    if b.len() != a.nrows() {
        return Err(Error::InvalidArgument("vector length differs from matrix size".into()));
    }
    let s = clip_spectrum(a, rel_tol)?;
    Ok((s.pinv_quadratic(b), s.logpdet))
}

/// `log |A|` through Cholesky; `None` when `A` is not positive definite.
pub fn dense_logdet_spd(a: &DMatrix<f64>) -> Option<f64> {
    let chol = a.clone().cholesky()?;
    Some(2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}
