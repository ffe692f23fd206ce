//! Barrier weights.
//!
//! All weight kinds only need two quantities of the scaled constraint matrix
//! `B = S⁻¹Ã` (k × d_eff): leverage scores of `diag(√h) B` and
//! `log det(Bᵀ diag(h) B)` for a positive row scaling `h`. The
//! [`LeverageOracle`] trait abstracts how these are computed so the dense and
//! the sparse forms share the solvers.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    Dikin,
    Vaidya,
    John,
    LeeSidford,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Weights {
    pub w: Vec<f64>,
    pub kind: WeightKind,
    pub iterations: usize,
    pub residual: f64,
}

pub trait LeverageOracle {
    /// Number of rows `k` of `B`.
    fn n_rows(&self) -> usize;
    /// Column count of `B`, the effective dimension.
    fn rank(&self) -> usize;
    /// Leverage scores of `diag(√h) B` and `log det(Bᵀ diag(h) B)`, the latter
    /// up to an additive constant that does not depend on `h`.
    fn evaluate(&mut self, h: &[f64]) -> Result<(Vec<f64>, f64)>;

    fn leverage(&mut self, h: &[f64]) -> Result<Vec<f64>> {
        Ok(self.evaluate(h)?.0)
    }
}

/// Leverage oracle over an explicit dense `B`.
pub struct DenseOracle<'a> {
    b: &'a DMatrix<f64>,
}

impl<'a> DenseOracle<'a> {
    pub fn new(b: &'a DMatrix<f64>) -> Self {
        DenseOracle { b }
    }
}

impl LeverageOracle for DenseOracle<'_> {
    fn n_rows(&self) -> usize {
        self.b.nrows()
    }

    fn rank(&self) -> usize {
        self.b.ncols()
    }

    fn evaluate(&mut self, h: &[f64]) -> Result<(Vec<f64>, f64)> {
        let mut bh = self.b.clone();
        for (i, &hi) in h.iter().enumerate() {
            bh.row_mut(i).scale_mut(hi.sqrt());
        }
        let chol = bh
            .tr_mul(&bh)
            .cholesky()
            .ok_or_else(|| Error::NumericalBreakdown("scaled matrix lacks full column rank".into()))?;
        let l = chol.l();
        let log_det = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let y = l
            .solve_lower_triangular(&bh.transpose())
            .ok_or_else(|| Error::NumericalBreakdown("singular triangular factor".into()))?;
        let sigma = (0..bh.nrows()).map(|i| y.column(i).norm_squared()).collect();
        Ok((sigma, log_det))
    }
}

/// `diag(B (BᵀB)⁻¹ Bᵀ)`
pub fn leverage_scores(b: &DMatrix<f64>) -> Result<DVector<f64>> {
    let s = DenseOracle::new(b).leverage(&vec![1.0; b.nrows()])?;
    Ok(DVector::from_vec(s))
}

pub fn dikin_weights(k: usize) -> Weights {
    Weights {
        w: vec![1.0; k],
        kind: WeightKind::Dikin,
        iterations: 0,
        residual: 0.0,
    }
}

pub fn vaidya_weights_with<O: LeverageOracle>(oracle: &mut O) -> Result<Weights> {
    let k = oracle.n_rows();
    let extra = oracle.rank() as f64 / k as f64;
    let sigma = oracle.leverage(&vec![1.0; k])?;
    Ok(Weights {
        w: sigma.into_iter().map(|s| s + extra).collect(),
        kind: WeightKind::Vaidya,
        iterations: 0,
        residual: 0.0,
    })
}

/// `(α, β)` of the John objective.
pub fn john_constants(d_eff: usize, k: usize) -> Result<(f64, f64)> {
    if k <= d_eff {
        return Err(Error::invalid(format!(
            "John weights need more constraints ({k}) than dimensions ({d_eff})"
        )));
    }
    let beta = d_eff as f64 / (2.0 * k as f64);
    let alpha = 1.0 - 1.0 / (1.0 / beta).log2();
    Ok((alpha, beta))
}

const JOHN_TOL: f64 = 1e-8;
const JOHN_MAX_ITER: usize = 200;

/// Minimizes `Σw − (1/α) log det(Bᵀ W^α B) − β Σ log w` by iterating its
/// stationarity condition `w = σ(W^{α/2} B) + β`.
pub fn john_weights_with<O: LeverageOracle>(oracle: &mut O) -> Result<Weights> {
    let k = oracle.n_rows();
    let (alpha, beta) = john_constants(oracle.rank(), k)?;
    let mut w = vec![1.0f64; k];
    let mut damping = 1.0;
    let mut prev_step = f64::INFINITY;
    for it in 1..=JOHN_MAX_ITER {
        let h: Vec<f64> = w.iter().map(|wi| wi.powf(alpha)).collect();
        let sigma = oracle.leverage(&h)?;
        let mut step = 0.0f64;
        for (wi, si) in w.iter_mut().zip(&sigma) {
            let target = si + beta;
            let next = *wi + damping * (target - *wi);
            step = step.max((target - *wi).abs());
            *wi = next;
        }
        if step < JOHN_TOL {
            return Ok(Weights {
                w,
                kind: WeightKind::John,
                iterations: it,
                residual: step,
            });
        }
        if step > prev_step {
            damping = 0.5;
        }
        prev_step = step;
    }
    Err(Error::Convergence {
        solver: "john weights",
        iterations: JOHN_MAX_ITER,
        residual: prev_step,
    })
}

/// `p = 1 − 2/q` with `q = 2(1 + ln k)`.
pub fn lee_sidford_exponent(k: usize) -> f64 {
    let q = 2.0 * (1.0 + (k as f64).ln());
    1.0 - 2.0 / q
}

const LS_GRAD_TOL: f64 = 1e-5;
const LS_MAX_ITER: usize = 2000;
const LS_FLOOR: f64 = 1e-10;
const ARMIJO: f64 = 1e-4;

fn ls_objective<O: LeverageOracle>(oracle: &mut O, w: &[f64], p: f64) -> Result<(f64, Vec<f64>)> {
    let h: Vec<f64> = w.iter().map(|wi| wi.powf(p)).collect();
    let (sigma, log_det) = oracle.evaluate(&h)?;
    let f = p * w.iter().sum::<f64>() - log_det;
    let grad = w.iter().zip(&sigma).map(|(wi, si)| p * (1.0 - si / wi)).collect();
    Ok((f, grad))
}

/// Projected gradient descent on `p Σw − log det(Bᵀ W^p B)` over `w ≥ 1e-10`,
/// with the gradient scaled by `w` and Armijo backtracking.
pub fn ls_weights_with<O: LeverageOracle>(oracle: &mut O) -> Result<Weights> {
    let k = oracle.n_rows();
    let p = lee_sidford_exponent(k);
    let mut w = vec![1.0f64; k];
    let (mut f, mut grad) = ls_objective(oracle, &w, p)?;
    let projected = |w: &[f64], g: &[f64]| {
        w.iter()
            .zip(g)
            .map(|(&wi, &gi)| if wi <= LS_FLOOR && gi > 0.0 { 0.0 } else { gi.abs() })
            .fold(0.0, f64::max)
    };
    for it in 0..LS_MAX_ITER {
        let gnorm = projected(&w, &grad);
        if gnorm < LS_GRAD_TOL {
            return Ok(Weights {
                w,
                kind: WeightKind::LeeSidford,
                iterations: it,
                residual: gnorm,
            });
        }
        let dir: Vec<f64> = w.iter().zip(&grad).map(|(wi, gi)| -wi * gi / p).collect();
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = w
                .iter()
                .zip(&dir)
                .map(|(wi, di)| (wi + t * di).max(LS_FLOOR))
                .collect();
            let decrease: f64 = grad.iter().zip(trial.iter().zip(&w)).map(|(g, (a, b))| g * (a - b)).sum();
            let (ft, gt) = ls_objective(oracle, &trial, p)?;
            if ft <= f + ARMIJO * decrease {
                w = trial;
                f = ft;
                grad = gt;
                break;
            }
            t *= 0.5;
            if t < 1e-12 {
                return Err(Error::Convergence {
                    solver: "lee-sidford weights",
                    iterations: it,
                    residual: gnorm,
                });
            }
        }
    }
    Err(Error::Convergence {
        solver: "lee-sidford weights",
        iterations: LS_MAX_ITER,
        residual: projected(&w, &grad),
    })
}

pub fn weights_with<O: LeverageOracle>(kind: WeightKind, oracle: &mut O) -> Result<Weights> {
    match kind {
        WeightKind::Dikin => Ok(dikin_weights(oracle.n_rows())),
        WeightKind::Vaidya => vaidya_weights_with(oracle),
        WeightKind::John => john_weights_with(oracle),
        WeightKind::LeeSidford => ls_weights_with(oracle),
    }
}

pub fn vaidya_weights(bs: &DMatrix<f64>) -> Result<Weights> {
    vaidya_weights_with(&mut DenseOracle::new(bs))
}

pub fn john_weights(bs: &DMatrix<f64>) -> Result<Weights> {
    john_weights_with(&mut DenseOracle::new(bs))
}

pub fn ls_weights(bs: &DMatrix<f64>) -> Result<Weights> {
    ls_weights_with(&mut DenseOracle::new(bs))
}
