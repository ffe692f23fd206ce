use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::weights::{weights_with, DenseOracle, WeightKind, Weights};
use crate::error::{Error, Result};
use crate::model::FullDimPolytope;

/// Slacks at or below `MIN_SLACK_REL · (1 + |b̃_i|)` count as on the boundary.
pub const MIN_SLACK_REL: f64 = 1e-12;

/// `b̃ − Ã v`, rejecting points at or numerically on the boundary.
pub fn slack(p: &FullDimPolytope, v: &DVector<f64>) -> Result<DVector<f64>> {
    let s = p.slack(v)?;
    for (i, &si) in s.iter().enumerate() {
        if si <= MIN_SLACK_REL * (1.0 + p.b()[i].abs()) {
            return Err(Error::BoundaryViolation { index: i, slack: si });
        }
    }
    Ok(s)
}

/// `H = Ãᵀ S⁻¹ W S⁻¹ Ã` with its Cholesky factor.
#[derive(Clone, Debug)]
pub struct DenseMetric {
    h: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    log_det: f64,
    weights: Weights,
}

impl DenseMetric {
    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn l(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// `L⁻ᵀ ξ`, a draw from `N(0, H⁻¹)` when `ξ` is standard normal.
    pub fn whiten_inverse(&self, xi: &DVector<f64>) -> DVector<f64> {
        self.chol
            .l_dirty()
            .tr_solve_lower_triangular(xi)
            .expect("Cholesky factor has a positive diagonal")
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(rhs)
    }

    /// `Δᵀ H Δ`
    pub fn quad(&self, delta: &DVector<f64>) -> f64 {
        delta.dot(&(&self.h * delta))
    }

    /// Log density (up to a constant) of `N(0, (r/c)² H⁻¹)` at `Δ`, where
    /// `precision_scale = (c/r)²`.
    pub fn log_density(&self, delta: &DVector<f64>, precision_scale: f64) -> f64 {
        0.5 * self.log_det - 0.5 * precision_scale * self.quad(delta)
    }
}

pub fn hessian_dense(p: &FullDimPolytope, v: &DVector<f64>, weights: Weights) -> Result<DenseMetric> {
    let s = slack(p, v)?;
    if weights.w.len() != s.len() {
        return Err(Error::DimensionMismatch {
            expected: s.len(),
            found: weights.w.len(),
        });
    }
    let mut scaled = p.a().clone();
    for i in 0..s.len() {
        let f = weights.w[i].sqrt() / s[i];
        scaled.row_mut(i).scale_mut(f);
    }
    let h = scaled.tr_mul(&scaled);
    let chol = h
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NearBoundary("Hessian is not positive definite".into()))?;
    let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|x| x.ln()).sum::<f64>();
    if !log_det.is_finite() {
        return Err(Error::NearBoundary("Hessian determinant overflowed".into()));
    }
    Ok(DenseMetric {
        h,
        chol,
        log_det,
        weights,
    })
}

/// `S⁻¹ Ã` at `v`.
pub fn scaled_constraints(p: &FullDimPolytope, v: &DVector<f64>) -> Result<DMatrix<f64>> {
    let s = slack(p, v)?;
    let mut b = p.a().clone();
    for i in 0..s.len() {
        b.row_mut(i).scale_mut(1.0 / s[i]);
    }
    Ok(b)
}

/// Weights of `kind` at `v` followed by the weighted Hessian.
pub fn dense_metric(p: &FullDimPolytope, v: &DVector<f64>, kind: WeightKind) -> Result<DenseMetric> {
    let w = match kind {
        WeightKind::Dikin => super::dikin_weights(p.n_constraints()),
        _ => {
            let b = scaled_constraints(p, v)?;
            weights_with(kind, &mut DenseOracle::new(&b))?
        }
    };
    hessian_dense(p, v, w)
}
