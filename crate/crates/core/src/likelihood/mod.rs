//! Per-window negative log likelihood of β̂ and its gradient with respect to
//! the prior variances on the flank.
//!
//! With `s = σ²_N`, `g = √f` on the flank, `b = L β̂` and
//! `B = I + s⁻¹ G W G`:
//!
//! `nll = ½ [s⁻¹ β̂ᵀR†β̂ − s⁻² (g∘b)ᵀ B⁻¹ (g∘b) + rank · log s + log|R|₊ + log|B|]`
//!
//! which equals `½ [β̂ᵀ A† β̂ + log|A|₊]` for
//! `A = R_c₊ F R₊c + s R_cc`, up to a constant that is dropped everywhere.

mod aform;
mod bform;
mod ldsr;
mod window;

pub use aform::{
    a_form_grad_dense, a_form_grad_iterative, a_form_nll_oracle, dense_a_matrix, AOperator,
    AFormRun,
};
pub use bform::BOperator;
pub use ldsr::{ldsr_objective, ldsr_window_objective, squared_r_matvec, window1_limit_nll};
pub use window::{null_nll, window_nll, window_nll_grad, Method, SolverConfig, WindowLoss};
