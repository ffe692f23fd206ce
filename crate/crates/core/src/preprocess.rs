//! Interior-point initialization and facial reduction.
//!
//! A constrained polytope `{A x = b, x_T ≥ 0}` is strictly feasible iff the
//! max-margin LP has a positive optimum. Otherwise some `y` gives
//! `z = Aᵀy` with `z_L = 0`, `z_T ≥ 0`, `z ≠ 0` and `bᵀy = 0`, which proves
//! `x_i = 0` on the whole polytope for every `i` with `z_i > 0`. Facial
//! reduction drops those coordinates and repeats.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{norm_inf, SparseMatrix};
use crate::lpsolve::{self, Feasibility, LinearProgram, LpStatus, Sense};
use crate::model::{ConstrainedPolytope, FullDimPolytope};

/// Margins at or above this are reported as an unbounded polytope.
pub const DELTA_CAP: f64 = 1e6;
/// Margins at or below this do not count as strict feasibility.
pub const DELTA_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct Initialization {
    pub x0: Vec<f64>,
    pub delta: f64,
    /// The margin hit [`DELTA_CAP`]; `x0` is still a valid interior point.
    pub unbounded: bool,
}

impl Initialization {
    pub fn strictly_feasible(&self) -> bool {
        self.delta > DELTA_TOL
    }
}

/// `max δ` subject to `A x = b`, `x_T ≥ δ`, `0 ≤ δ ≤ DELTA_CAP`.
pub fn initialize(p: &ConstrainedPolytope) -> Result<Initialization> {
    let (d, k, lead) = (p.d(), p.k(), p.lead());
    let mut lp = LinearProgram::new(d + 1, Sense::Maximize);
    lp.objective[d] = 1.0;
    lp.var_lower[..lead].fill(f64::NEG_INFINITY);
    lp.var_upper[d] = DELTA_CAP;
    lp.a_eq = widen(p.a(), d + 1);
    lp.b_eq = p.b().to_vec();
    let rows = (0..k).flat_map(|i| [(i, lead + i, -1.0), (i, d, 1.0)]);
    lp.a_ub = SparseMatrix::from_triplets(k, d + 1, rows)?;
    lp.b_ub = vec![0.0; k];
    let sol = lpsolve::solve(&lp)?;
    match sol.status {
        LpStatus::Infeasible => Err(Error::EmptyPolytope(
            "no point satisfies the constraints".into(),
        )),
        LpStatus::Unbounded => unreachable!("margin is capped"),
        LpStatus::Optimal => {
            let delta = sol.x[d];
            let mut x0 = sol.x;
            x0.truncate(d);
            Ok(Initialization {
                x0,
                delta,
                unbounded: delta >= DELTA_CAP * (1.0 - 1e-9),
            })
        }
    }
}

/// `max δ` subject to `Ã v + δ·1 ≤ b̃`, `δ ≤ DELTA_CAP`.
pub fn initialize_full(p: &FullDimPolytope) -> Result<Initialization> {
    let (m, dim) = (p.n_constraints(), p.dim());
    let mut lp = LinearProgram::new(dim + 1, Sense::Maximize);
    lp.objective[dim] = 1.0;
    lp.var_lower.fill(f64::NEG_INFINITY);
    lp.var_upper[dim] = DELTA_CAP;
    let a = p.a();
    let mut t = Vec::with_capacity(m * (dim + 1));
    for i in 0..m {
        for j in 0..dim {
            if a[(i, j)] != 0.0 {
                t.push((i, j, a[(i, j)]));
            }
        }
        t.push((i, dim, 1.0));
    }
    lp.a_ub = SparseMatrix::from_triplets(m, dim + 1, t)?;
    lp.b_ub = p.b().iter().copied().collect();
    let sol = lpsolve::solve(&lp)?;
    match sol.status {
        LpStatus::Optimal => {
            let delta = sol.x[dim];
            if delta < -DELTA_TOL {
                return Err(Error::EmptyPolytope(format!(
                    "inequalities are inconsistent (best margin {delta:e})"
                )));
            }
            let mut x0 = sol.x;
            x0.truncate(dim);
            Ok(Initialization {
                x0,
                delta,
                unbounded: delta >= DELTA_CAP * (1.0 - 1e-9),
            })
        }
        LpStatus::Infeasible => Err(Error::EmptyPolytope("inequalities are inconsistent".into())),
        LpStatus::Unbounded => unreachable!("margin is capped"),
    }
}

fn widen(a: &SparseMatrix, n_cols: usize) -> SparseMatrix {
    SparseMatrix::from_triplets(a.n_rows(), n_cols, a.triplets()).expect("same entries")
}

/// Threshold above which an entry of `z` marks a coordinate as forced to zero.
pub fn tol_z(a: &SparseMatrix) -> f64 {
    1e-9 * (1.0 + a.norm_inf())
}

#[derive(Clone, Debug, PartialEq)]
pub enum FindZ {
    Certificate { y: Vec<f64>, z: Vec<f64> },
    StrictlyFeasible,
}

/// Searches for `y` with `bᵀy = 0`, `(Aᵀy)_L = 0`, `(Aᵀy)_T ≥ 0`,
/// `Σ (Aᵀy)_T = 1`. The last row rules out `z = 0`.
pub fn find_z(p: &ConstrainedPolytope) -> Result<FindZ> {
    let (n, lead, k) = (p.n(), p.lead(), p.k());
    if k == 0 {
        return Ok(FindZ::StrictlyFeasible);
    }
    let at = p.a().transpose();
    let mut lp = LinearProgram::new(n, Sense::Minimize);
    lp.var_lower.fill(f64::NEG_INFINITY);

    let mut eq = Vec::new();
    for (i, &bi) in p.b().iter().enumerate() {
        if bi != 0.0 {
            eq.push((0, i, bi));
        }
    }
    for (j, i, v) in at.triplets() {
        if j < lead {
            eq.push((1 + j, i, v));
        } else {
            eq.push((1 + lead, i, v));
        }
    }
    lp.a_eq = SparseMatrix::from_triplets(lead + 2, n, eq)?;
    lp.b_eq = vec![0.0; lead + 2];
    lp.b_eq[lead + 1] = 1.0;

    let ub = at
        .triplets()
        .filter(|&(j, _, _)| j >= lead)
        .map(|(j, i, v)| (j - lead, i, -v));
    lp.a_ub = SparseMatrix::from_triplets(k, n, ub)?;
    lp.b_ub = vec![0.0; k];

    match lpsolve::feasibility_certificate(&lp)? {
        Feasibility::Infeasible => Ok(FindZ::StrictlyFeasible),
        Feasibility::Feasible(y) => {
            let z = p.a().tr_mul_vec(&y);
            Ok(FindZ::Certificate { y, z })
        }
    }
}

/// A coordinate proved to vanish on the polytope.
#[derive(Clone, Debug, PartialEq)]
pub struct FixedVariable {
    /// 0-based index in the original variables.
    pub index: usize,
    /// Certificate `y`, indexed like `rows`.
    pub y: Vec<f64>,
    /// Original row indices active when the certificate was found.
    pub rows: Vec<usize>,
    pub round: usize,
}

#[derive(Clone, Debug)]
pub struct FacialReductionResult {
    pub reduced: ConstrainedPolytope,
    /// Original indices of the surviving variables (the columns of `V`).
    pub columns: Vec<usize>,
    /// Original indices of the surviving rows (the selection `P`).
    pub rows: Vec<usize>,
    pub fixed_variables: Vec<FixedVariable>,
    pub rounds: usize,
    original_d: usize,
}

impl FacialReductionResult {
    pub fn original_dim(&self) -> usize {
        self.original_d
    }

    /// `V` as an explicit `d × d'` selection matrix.
    pub fn v_matrix(&self) -> SparseMatrix {
        SparseMatrix::from_triplets(
            self.original_d,
            self.columns.len(),
            self.columns.iter().enumerate().map(|(j, &c)| (c, j, 1.0)),
        )
        .expect("indices in range")
    }

    /// `x = V v`
    pub fn lift(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.columns.len() {
            return Err(Error::DimensionMismatch {
                expected: self.columns.len(),
                found: v.len(),
            });
        }
        let mut x = vec![0.0; self.original_d];
        for (&c, &vi) in self.columns.iter().zip(v) {
            x[c] = vi;
        }
        Ok(x)
    }
}

/// Rows of `a` forming a basis of its row space (ascending order), via
/// column-pivoted QR of `aᵀ`.
pub fn independent_rows(a: &SparseMatrix) -> Vec<usize> {
    let n = a.n_rows();
    if n == 0 || a.n_cols() == 0 {
        return Vec::new();
    }
    let qr = a.to_dense().transpose().col_piv_qr();
    let r = qr.r();
    let diag = r.nrows().min(r.ncols());
    let top = if diag > 0 { r[(0, 0)].abs() } else { 0.0 };
    if top == 0.0 {
        return Vec::new();
    }
    let rank = (0..diag).take_while(|&i| r[(i, i)].abs() > 1e-10 * top).count();
    let mut order = DMatrix::from_fn(1, n, |_, j| j as f64);
    qr.p().permute_columns(&mut order);
    let mut picked: Vec<usize> = (0..rank).map(|j| order[(0, j)] as usize).collect();
    picked.sort_unstable();
    picked
}

pub fn facial_reduction(p: &ConstrainedPolytope) -> Result<FacialReductionResult> {
    let mut feas = LinearProgram::new(p.d(), Sense::Minimize);
    feas.var_lower[..p.lead()].fill(f64::NEG_INFINITY);
    feas.a_eq = p.a().clone();
    feas.b_eq = p.b().to_vec();
    if lpsolve::feasibility_certificate(&feas)? == Feasibility::Infeasible {
        return Err(Error::EmptyPolytope("no point satisfies the constraints".into()));
    }

    let mut columns: Vec<usize> = (0..p.d()).collect();
    let mut rows: Vec<usize> = independent_rows(p.a());
    let mut cur = ConstrainedPolytope::new(
        p.a().select_rows(&rows),
        rows.iter().map(|&i| p.b()[i]).collect(),
        p.k(),
    )?;
    let mut fixed_variables = Vec::new();
    let mut rounds = 0;

    while let FindZ::Certificate { y, z } = find_z(&cur)? {
        rounds += 1;
        if rounds > p.k() {
            return Err(Error::Convergence {
                solver: "facial reduction",
                iterations: rounds,
                residual: norm_inf(&z),
            });
        }
        let tol = tol_z(cur.a());
        let lead = cur.lead();
        let drop: Vec<usize> = (lead..cur.d()).filter(|&i| z[i] > tol).collect();
        if drop.is_empty() {
            return Err(Error::NumericalBreakdown(
                "certificate has no entry above the support tolerance".into(),
            ));
        }
        for &i in &drop {
            fixed_variables.push(FixedVariable {
                index: columns[i],
                y: y.clone(),
                rows: rows.clone(),
                round: rounds,
            });
        }
        let keep: Vec<usize> = (0..cur.d()).filter(|i| !drop.contains(i)).collect();
        let a_keep = cur.a().select_columns(&keep);
        let sel = independent_rows(&a_keep);
        let b_sel: Vec<f64> = sel.iter().map(|&i| cur.b()[i]).collect();
        rows = sel.iter().map(|&i| rows[i]).collect();
        columns = keep.iter().map(|&i| columns[i]).collect();
        cur = ConstrainedPolytope::new(a_keep.select_rows(&sel), b_sel, cur.k() - drop.len())?;
    }

    Ok(FacialReductionResult {
        reduced: cur,
        columns,
        rows,
        fixed_variables,
        rounds,
        original_d: p.d(),
    })
}
