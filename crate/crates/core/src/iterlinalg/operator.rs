use nalgebra::{DMatrix, DVector};

/// A square linear map known only through its action on vectors.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;

    fn apply(&self, x: &DVector<f64>) -> DVector<f64>;

    fn is_spd(&self) -> bool {
        true
    }
}

impl LinearOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        self * x
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        (**self).apply(x)
    }

    fn is_spd(&self) -> bool {
        (**self).is_spd()
    }
}

/// `scale · I`.
#[derive(Debug, Clone, Copy)]
pub struct ScaledIdentity {
    pub dim: usize,
    pub scale: f64,
}

impl LinearOperator for ScaledIdentity {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        x * self.scale
    }

    fn is_spd(&self) -> bool {
        self.scale > 0.0
    }
}

#[derive(Debug, Clone)]
pub struct DiagonalOperator(pub DVector<f64>);

impl LinearOperator for DiagonalOperator {
    fn dim(&self) -> usize {
        self.0.len()
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        self.0.component_mul(x)
    }

    fn is_spd(&self) -> bool {
        self.0.iter().all(|&d| d > 0.0)
    }
}
