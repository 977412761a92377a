//! Matrix-free solvers and estimators over [`LinearOperator`]s, with dense
//! oracles for checking them.

mod cg;
mod dense;
mod hutchinson;
mod lanczos;
mod nystrom;
mod operator;

pub use cg::{cg_solve, SolverReport};
pub use dense::{dense_logdet_spd, dense_nll_oracle};
pub use hutchinson::{draw_probe, hutchinson_probe_pairs, ProbeKind, ProbePair};
pub use lanczos::{lanczos, ritz_values, slq_logdet, LanczosRun};
pub use nystrom::{nystrom_preconditioner, NystromPreconditioner};
pub use operator::{DiagonalOperator, LinearOperator, ScaledIdentity};
