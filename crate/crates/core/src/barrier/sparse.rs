//! Local metric of the constrained form.
//!
//! At `x` the metric is `g = S_x⁻¹ W_x S_x⁻¹`, zero on the leading sign-free
//! coordinates (regularized to `ε`) and `w_i / x_i²` on the trailing ones.
//! The proposal covariance is the pseudo-inverse `M†` of `g` restricted to
//! `null(A)`.
//!
//! The leading coordinates are eliminated once per polytope
//! ([`FreeElimination`]): with `Δ_L = G Δ_T`, `L = [G; I]` and the residual
//! system `C Δ_T = 0`,
//!
//! ```text
//! M†      = L (g⁻¹ − g⁻¹Cᵀ K⁻¹ C g⁻¹) Lᵀ,              K = C g⁻¹ Cᵀ
//! √M†     = L (g^{-1/2} − g⁻¹Cᵀ K⁻¹ C g^{-1/2})
//! log pdet M = Σ log g_T + log det K − log det h − log det(C h⁻¹ Cᵀ),  h = I + GᵀG
//! ```
//!
//! with `g` the trailing block. Without leading coordinates `C = A`, `h = I`
//! and these are the textbook projection formulas with `A g⁻¹ Aᵀ`.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use super::weights::{dikin_weights, weights_with, LeverageOracle, WeightKind, Weights};
use crate::error::{Error, Result};
use crate::linalg::{FreeElimination, NormalEquations, NormalFactor, SolveWork};
use crate::model::ConstrainedPolytope;

/// Trailing coordinates at or below this (relative to `1 + ‖b‖∞`) count as on
/// the boundary.
pub const MIN_COORD_REL: f64 = 1e-12;
/// Default `ε` relative to the largest trailing metric entry.
pub const DEFAULT_EPSILON: f64 = 1e-12;

/// Per-polytope structure shared by every metric evaluation.
#[derive(Debug)]
pub struct SparseBody {
    polytope: ConstrainedPolytope,
    elim: FreeElimination,
    normal: NormalEquations,
    offset: OnceLock<f64>,
    boundary: f64,
}

impl SparseBody {
    pub fn new(p: &ConstrainedPolytope) -> Result<Self> {
        if p.n() >= p.d() {
            return Err(Error::DegeneratePolytope(format!(
                "{} equalities in {} variables",
                p.n(),
                p.d()
            )));
        }
        let elim = FreeElimination::new(p.a(), p.lead())?;
        let normal = NormalEquations::new(elim.reduced());
        let boundary = MIN_COORD_REL * (1.0 + crate::linalg::norm_inf(p.b()));
        Ok(SparseBody {
            polytope: p.clone(),
            elim,
            normal,
            offset: OnceLock::new(),
            boundary,
        })
    }

    pub fn polytope(&self) -> &ConstrainedPolytope {
        &self.polytope
    }

    pub fn elimination(&self) -> &FreeElimination {
        &self.elim
    }

    pub fn normal_equations(&self) -> &NormalEquations {
        &self.normal
    }

    pub fn k(&self) -> usize {
        self.polytope.k()
    }

    pub fn d_eff(&self) -> usize {
        self.polytope.d_eff()
    }

    pub fn work(&self) -> SolveWork {
        self.normal.work()
    }

    /// Trailing block of `x`, checked to be clear of the boundary.
    pub fn interior_tail<'x>(&self, x: &'x [f64]) -> Result<&'x [f64]> {
        if x.len() != self.polytope.d() {
            return Err(Error::DimensionMismatch {
                expected: self.polytope.d(),
                found: x.len(),
            });
        }
        let lead = self.polytope.lead();
        let tail = &x[lead..];
        for (i, &xi) in tail.iter().enumerate() {
            if !(xi > self.boundary) {
                return Err(Error::BoundaryViolation {
                    index: lead + i,
                    slack: xi,
                });
            }
        }
        Ok(tail)
    }

    fn factor(&self, dinv: &[f64], slot: &mut Option<NormalFactor>) -> Result<()> {
        if self.normal.n() == 0 {
            return Ok(());
        }
        match slot {
            Some(f) => self.normal.refactor(f, dinv),
            None => {
                *slot = Some(self.normal.factor(dinv)?);
                Ok(())
            }
        }
    }

    /// `log det h + log det(C h⁻¹ Cᵀ)`, the `g`-independent part of the
    /// pseudo-determinant. Dense when there are leading coordinates, so meant
    /// for diagnostics rather than the sampling loop (which never needs it).
    pub fn log_pdet_offset(&self) -> Result<f64> {
        if let Some(&v) = self.offset.get() {
            return Ok(v);
        }
        let v = if self.normal.n() == 0 {
            if self.elim.lead() == 0 {
                0.0
            } else {
                let g = self.elim.lead_map_dense();
                log_det_spd(&(DMatrix::identity(g.nrows(), g.nrows()) + &g * g.transpose()))?
            }
        } else if self.elim.lead() == 0 {
            self.normal.factor(&vec![1.0; self.k()])?.log_det()
        } else {
            let g = self.elim.lead_map_dense();
            let c = self.elim.reduced().to_dense();
            let inner = DMatrix::identity(g.nrows(), g.nrows()) + &g * g.transpose();
            let inner_chol = inner
                .clone()
                .cholesky()
                .ok_or_else(|| Error::NumericalBreakdown("I + GGᵀ not positive definite".into()))?;
            let gc = &g * c.transpose();
            let k_mat = &c * c.transpose() - gc.transpose() * inner_chol.solve(&gc);
            log_det_spd(&inner)? + log_det_spd(&k_mat)?
        };
        let _ = self.offset.set(v);
        Ok(v)
    }
}

fn log_det_spd(m: &DMatrix<f64>) -> Result<f64> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NumericalBreakdown("matrix not positive definite".into()))?;
    Ok(2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>())
}

/// Leverage scores of `diag(√h) S⁻¹Ã` computed from the constrained form,
/// `σ_i = 1 − c_iᵀ K⁻¹ c_i / g_i` with `g = h / x_T²`, without forming `Ã`.
pub struct SparseOracle<'a> {
    body: &'a SparseBody,
    x_tail: &'a [f64],
    factor: Option<NormalFactor>,
    work: &'a mut SolveWork,
}

impl<'a> SparseOracle<'a> {
    pub fn new(body: &'a SparseBody, x: &'a [f64], work: &'a mut SolveWork) -> Result<Self> {
        let x_tail = body.interior_tail(x)?;
        Ok(SparseOracle {
            body,
            x_tail,
            factor: None,
            work,
        })
    }
}

impl LeverageOracle for SparseOracle<'_> {
    fn n_rows(&self) -> usize {
        self.body.k()
    }

    fn rank(&self) -> usize {
        self.body.d_eff()
    }

    fn evaluate(&mut self, h: &[f64]) -> Result<(Vec<f64>, f64)> {
        let g: Vec<f64> = h.iter().zip(self.x_tail).map(|(hi, xi)| hi / (xi * xi)).collect();
        let ginv: Vec<f64> = g.iter().map(|v| 1.0 / v).collect();
        self.body.factor(&ginv, &mut self.factor)?;
        let mut log_det: f64 = g.iter().map(|v| v.ln()).sum();
        let sigma = match &self.factor {
            None => vec![1.0; g.len()],
            Some(f) => {
                log_det += f.log_det();
                (0..g.len())
                    .map(|i| 1.0 - f.column_quadratic(&self.body.normal, i, self.work) * ginv[i])
                    .collect()
            }
        };
        Ok((sigma, log_det))
    }
}

/// Metric snapshot at one point.
#[derive(Clone, Debug)]
pub struct SparseMetric {
    g_diag: Vec<f64>,
    epsilon: f64,
    lead: usize,
    factor: Option<NormalFactor>,
    weights: Weights,
    log_pdet_unnormalized: f64,
}

/// Builds `g` at `x` for the given weights and factors `C g⁻¹ Cᵀ`.
/// `epsilon_rel` scales `ε` relative to the largest trailing entry of `g`.
pub fn metric_sparse(
    body: &SparseBody,
    x: &[f64],
    weights: Weights,
    epsilon_rel: f64,
) -> Result<SparseMetric> {
    if !(epsilon_rel > 0.0) {
        return Err(Error::invalid(
            "epsilon must be positive: the leading block of g is otherwise singular",
        ));
    }
    let tail = body.interior_tail(x)?;
    if weights.w.len() != tail.len() {
        return Err(Error::DimensionMismatch {
            expected: tail.len(),
            found: weights.w.len(),
        });
    }
    let g_raw: Vec<f64> = weights.w.iter().zip(tail).map(|(w, xi)| w / (xi * xi)).collect();
    let gmax = g_raw.iter().fold(0.0f64, |m, v| m.max(*v));
    let epsilon = (epsilon_rel * gmax).max(1e-300);
    let lead = body.polytope.lead();
    let mut g_diag = vec![epsilon; lead];
    g_diag.extend(g_raw.iter().map(|v| v + epsilon));
    let ginv: Vec<f64> = g_diag[lead..].iter().map(|v| 1.0 / v).collect();
    let mut factor = None;
    body.factor(&ginv, &mut factor)?;
    let mut log_pdet_unnormalized: f64 = g_diag[lead..].iter().map(|v| v.ln()).sum();
    if let Some(f) = &factor {
        log_pdet_unnormalized += f.log_det();
    }
    if !log_pdet_unnormalized.is_finite() {
        return Err(Error::NearBoundary("metric determinant is not finite".into()));
    }
    Ok(SparseMetric {
        g_diag,
        epsilon,
        lead,
        factor,
        weights,
        log_pdet_unnormalized,
    })
}

/// Weights of `kind` at `x` followed by the metric.
pub fn sparse_metric(
    body: &SparseBody,
    x: &[f64],
    kind: WeightKind,
    epsilon_rel: f64,
    work: &mut SolveWork,
) -> Result<SparseMetric> {
    let weights = match kind {
        WeightKind::Dikin => dikin_weights(body.k()),
        _ => weights_with(kind, &mut SparseOracle::new(body, x, work)?)?,
    };
    metric_sparse(body, x, weights, epsilon_rel)
}

impl SparseMetric {
    pub fn g_diag(&self) -> &[f64] {
        &self.g_diag
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    fn g_tail(&self) -> &[f64] {
        &self.g_diag[self.lead..]
    }

    /// `y − g⁻¹ Cᵀ K⁻¹ C y` on trailing vectors (`y` already scaled).
    fn project_tail(&self, body: &SparseBody, y: &mut [f64], scale: impl Fn(usize) -> f64) {
        if let Some(f) = &self.factor {
            let c = body.elim.reduced();
            let s = f.solve(&body.normal, &c.mul_vec(y));
            let cts = c.tr_mul_vec(&s);
            for (i, yi) in y.iter_mut().enumerate() {
                *yi -= scale(i) * cts[i];
            }
        }
    }

    /// `M† u`
    pub fn apply_pseudo_inverse(&self, body: &SparseBody, u: &[f64]) -> Vec<f64> {
        let g = self.g_tail();
        let mut y = body.elim.adjoint(u);
        for (yi, gi) in y.iter_mut().zip(g) {
            *yi /= gi;
        }
        self.project_tail(body, &mut y, |i| 1.0 / g[i]);
        body.elim.extend(&y)
    }

    /// `R ζ` with `R Rᵀ = M†`. Only the trailing `k` entries of a length-`d`
    /// `ζ` are used; a length-`k` `ζ` is also accepted.
    pub fn apply_sqrt_pseudo_inverse(&self, body: &SparseBody, zeta: &[f64]) -> Vec<f64> {
        let k = body.k();
        let zt = if zeta.len() == k { zeta } else { &zeta[zeta.len() - k..] };
        let g = self.g_tail();
        let mut y: Vec<f64> = zt.iter().zip(g).map(|(z, gi)| z / gi.sqrt()).collect();
        self.project_tail(body, &mut y, |i| 1.0 / g[i]);
        body.elim.extend(&y)
    }

    /// `log pdet M` up to the `g`-independent offset; enough for
    /// Metropolis-Hastings ratios.
    pub fn log_pdet_unnormalized(&self) -> f64 {
        self.log_pdet_unnormalized
    }

    pub fn log_pdet(&self, body: &SparseBody) -> Result<f64> {
        Ok(self.log_pdet_unnormalized - body.log_pdet_offset()?)
    }

    /// `Δᵀ M Δ` for `Δ ∈ null(A)`, which reduces to `Σ_T g_i Δ_i²`.
    pub fn quad(&self, delta: &[f64]) -> f64 {
        delta[self.lead..]
            .iter()
            .zip(self.g_tail())
            .map(|(d, g)| g * d * d)
            .sum()
    }

    /// Log density (up to a constant) of `N(0, (r/c)² M†)` at `Δ ∈ null(A)`,
    /// with `precision_scale = (c/r)²`.
    pub fn log_density(&self, delta: &[f64], precision_scale: f64) -> f64 {
        0.5 * self.log_pdet_unnormalized - 0.5 * precision_scale * self.quad(delta)
    }

    /// Dense `C g⁻¹ Cᵀ` (testing aid).
    pub fn normal_matrix_dense(&self, body: &SparseBody) -> DMatrix<f64> {
        let ginv: Vec<f64> = self.g_tail().iter().map(|v| 1.0 / v).collect();
        body.normal.assemble_dense(&ginv)
    }

    /// Solves against the cached factor of `C g⁻¹ Cᵀ`.
    pub fn solve_normal(&self, body: &SparseBody, rhs: &[f64]) -> Option<DVector<f64>> {
        self.factor
            .as_ref()
            .map(|f| DVector::from_vec(f.solve(&body.normal, rhs)))
    }
}
