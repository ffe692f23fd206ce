//! Sparse containers and the factorizations the samplers lean on.

mod cholesky;
mod elimination;
mod sparse;

pub use cholesky::{NormalEquations, NormalFactor, SolveWork};
pub use elimination::FreeElimination;
pub use sparse::SparseMatrix;

pub(crate) fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
