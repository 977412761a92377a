use nalgebra::{DMatrix, DVector};

use crate::iterlinalg::LinearOperator;

/// `v ↦ v + s⁻¹ F^{1/2} W F^{1/2} v`; SPD with every eigenvalue ≥ 1.
#[derive(Debug, Clone)]
pub struct BOperator<'a> {
    w: &'a DMatrix<f64>,
    sqrt_f: DVector<f64>,
    inv_s: f64,
}

impl<'a> BOperator<'a> {
    pub fn new(w: &'a DMatrix<f64>, f_flank: &[f64], sigma2_n: f64) -> Self {
        Self {
            w,
            sqrt_f: DVector::from_iterator(f_flank.len(), f_flank.iter().map(|f| f.sqrt())),
            inv_s: 1.0 / sigma2_n,
        }
    }

    pub fn sqrt_f(&self) -> &DVector<f64> {
        &self.sqrt_f
    }

    /// Dense `B`.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.sqrt_f.len();
        let g = &self.sqrt_f;
        DMatrix::from_fn(n, n, |i, j| {
            let d = if i == j { 1.0 } else { 0.0 };
            d + self.inv_s * g[i] * self.w[(i, j)] * g[j]
        })
    }
}

impl LinearOperator for BOperator<'_> {
    fn dim(&self) -> usize {
        self.sqrt_f.len()
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let gv = self.sqrt_f.component_mul(v);
        let wgv = self.w * gv;
        v + self.sqrt_f.component_mul(&wgv) * self.inv_s
    }
}
