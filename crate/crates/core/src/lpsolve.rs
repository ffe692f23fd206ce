//! Dense two-phase primal simplex with Bland's rule.
//!
//! Problems are brought to standard form `min cᵀy, A y = b, y ≥ 0, b ≥ 0` by
//! shifting or splitting variables and adding slacks. Phase one
//! minimizes the sum of one artificial per row. The tableau is rebuilt from
//! the original data every [`REFACTOR_EVERY`] pivots to bound error growth.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;

const REFACTOR_EVERY: usize = 64;
const PIVOT_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub sense: Sense,
    pub a_eq: SparseMatrix,
    pub b_eq: Vec<f64>,
    pub a_ub: SparseMatrix,
    pub b_ub: Vec<f64>,
    pub var_lower: Vec<f64>,
    pub var_upper: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective_value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Feasibility {
    Feasible(Vec<f64>),
    Infeasible,
}

impl LinearProgram {
    /// `n` nonnegative variables, no constraints, zero objective.
    pub fn new(n: usize, sense: Sense) -> Self {
        LinearProgram {
            objective: vec![0.0; n],
            sense,
            a_eq: SparseMatrix::zeros(0, n),
            b_eq: Vec::new(),
            a_ub: SparseMatrix::zeros(0, n),
            b_ub: Vec::new(),
            var_lower: vec![0.0; n],
            var_upper: vec![f64::INFINITY; n],
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.n_vars();
        let checks = [
            (self.a_eq.n_cols(), n),
            (self.a_ub.n_cols(), n),
            (self.b_eq.len(), self.a_eq.n_rows()),
            (self.b_ub.len(), self.a_ub.n_rows()),
            (self.var_lower.len(), n),
            (self.var_upper.len(), n),
        ];
        for (found, expected) in checks {
            if found != expected {
                return Err(Error::DimensionMismatch { expected, found });
            }
        }
        for j in 0..n {
            let (lo, up) = (self.var_lower[j], self.var_upper[j]);
            if lo.is_nan() || up.is_nan() || lo == f64::INFINITY || up == f64::NEG_INFINITY {
                return Err(Error::invalid(format!("bad bounds [{lo}, {up}] on variable {j}")));
            }
        }
        if self.objective.iter().chain(&self.b_eq).chain(&self.b_ub).any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite objective or right-hand side"));
        }
        Ok(())
    }

    fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (l, r) in self.a_eq.mul_vec(x).iter().zip(&self.b_eq) {
            worst = worst.max((l - r).abs() / (1.0 + r.abs()));
        }
        for (l, r) in self.a_ub.mul_vec(x).iter().zip(&self.b_ub) {
            worst = worst.max((l - r) / (1.0 + r.abs()));
        }
        for j in 0..x.len() {
            worst = worst.max(self.var_lower[j] - x[j]).max(x[j] - self.var_upper[j]);
        }
        worst
    }
}

#[derive(Clone, Copy, Debug)]
enum Recover {
    Shift { col: usize, lo: f64 },
    Split { pos: usize, neg: usize },
}

struct Standard {
    a: DMatrix<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    recover: Vec<Recover>,
}

fn standardize(lp: &LinearProgram) -> Standard {
    let n = lp.n_vars();
    let mut recover = Vec::with_capacity(n);
    let mut n_cols = 0;
    let mut bounded_shifts = Vec::new();
    let mut bounded_splits = Vec::new();
    for j in 0..n {
        let (lo, up) = (lp.var_lower[j], lp.var_upper[j]);
        if lo.is_finite() {
            recover.push(Recover::Shift { col: n_cols, lo });
            if up.is_finite() {
                bounded_shifts.push((n_cols, up - lo));
            }
            n_cols += 1;
        } else {
            // splitting (rather than reflecting about `up`) keeps full
            // precision when the upper bound is a large cap
            recover.push(Recover::Split { pos: n_cols, neg: n_cols + 1 });
            if up.is_finite() {
                bounded_splits.push((n_cols, up));
            }
            n_cols += 2;
        }
    }
    let n_ub = lp.a_ub.n_rows();
    let n_slack = n_ub + bounded_shifts.len() + bounded_splits.len();
    let m = lp.a_eq.n_rows() + n_slack;
    let total = n_cols + n_slack;
    let mut a = DMatrix::zeros(m, total);
    let mut b = vec![0.0; m];
    b[..lp.a_eq.n_rows()].copy_from_slice(&lp.b_eq);
    b[lp.a_eq.n_rows()..lp.a_eq.n_rows() + n_ub].copy_from_slice(&lp.b_ub);

    let place = |a: &mut DMatrix<f64>, b: &mut [f64], row: usize, j: usize, v: f64| match recover[j] {
        Recover::Shift { col, lo } => {
            a[(row, col)] += v;
            b[row] -= v * lo;
        }
        Recover::Split { pos, neg } => {
            a[(row, pos)] += v;
            a[(row, neg)] -= v;
        }
    };
    for (i, j, v) in lp.a_eq.triplets() {
        place(&mut a, &mut b, i, j, v);
    }
    let off = lp.a_eq.n_rows();
    for (i, j, v) in lp.a_ub.triplets() {
        place(&mut a, &mut b, off + i, j, v);
    }
    for i in 0..n_ub {
        a[(off + i, n_cols + i)] = 1.0;
    }
    for (s, &(col, width)) in bounded_shifts.iter().enumerate() {
        let row = off + n_ub + s;
        a[(row, col)] = 1.0;
        a[(row, n_cols + n_ub + s)] = 1.0;
        b[row] = width;
    }
    let off2 = off + n_ub + bounded_shifts.len();
    for (s, &(pos, up)) in bounded_splits.iter().enumerate() {
        let row = off2 + s;
        a[(row, pos)] = 1.0;
        a[(row, pos + 1)] = -1.0;
        a[(row, n_cols + n_ub + bounded_shifts.len() + s)] = 1.0;
        b[row] = up;
    }

    let sign = match lp.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut c = vec![0.0; total];
    for (j, &cj) in lp.objective.iter().enumerate() {
        let v = sign * cj;
        match recover[j] {
            Recover::Shift { col, .. } => c[col] += v,
            Recover::Split { pos, neg } => {
                c[pos] += v;
                c[neg] -= v;
            }
        }
    }
    for i in 0..m {
        if b[i] < 0.0 {
            b[i] = -b[i];
            for j in 0..total {
                a[(i, j)] = -a[(i, j)];
            }
        }
    }
    Standard { a, b, c, recover }
}

/// Tableau over the standard-form columns followed by one artificial per row.
struct Tableau<'a> {
    std: &'a Standard,
    rows: Vec<usize>,
    n_cols: usize,
    width: usize,
    t: Vec<f64>,
    obj: Vec<f64>,
    basis: Vec<usize>,
    cost: Vec<f64>,
    since_refactor: usize,
    pivots: usize,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

impl<'a> Tableau<'a> {
    fn new(std: &'a Standard) -> Self {
        let m = std.b.len();
        let n_cols = std.a.ncols() + m;
        let width = n_cols + 1;
        let mut tab = Tableau {
            std,
            rows: (0..m).collect(),
            n_cols,
            width,
            t: vec![0.0; m * width],
            obj: vec![0.0; width],
            basis: (std.a.ncols()..n_cols).collect(),
            cost: vec![0.0; n_cols],
            since_refactor: 0,
            pivots: 0,
        };
        for i in 0..m {
            for j in 0..std.a.ncols() {
                tab.t[i * width + j] = std.a[(i, j)];
            }
            tab.t[i * width + std.a.ncols() + i] = 1.0;
            tab.t[i * width + n_cols] = std.b[i];
        }
        tab
    }

    fn column(&self, orig_row: usize, j: usize) -> f64 {
        let n = self.std.a.ncols();
        if j < n {
            self.std.a[(orig_row, j)]
        } else if j - n == orig_row {
            1.0
        } else {
            0.0
        }
    }

    /// Rebuild the tableau as `B⁻¹ [A | b]` from the original data.
    fn refactor(&mut self) -> Result<()> {
        let m = self.rows.len();
        if m > 0 {
            let bmat = DMatrix::from_fn(m, m, |i, k| self.column(self.rows[i], self.basis[k]));
            let mut rhs = DMatrix::zeros(m, self.width);
            for i in 0..m {
                let r = self.rows[i];
                for j in 0..self.n_cols {
                    rhs[(i, j)] = self.column(r, j);
                }
                rhs[(i, self.n_cols)] = self.std.b[r];
            }
            let sol = bmat
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::NumericalBreakdown("singular simplex basis".into()))?;
            for i in 0..m {
                for j in 0..self.width {
                    self.t[i * self.width + j] = sol[(i, j)];
                }
                for k in 0..m {
                    self.t[i * self.width + self.basis[k]] = if k == i { 1.0 } else { 0.0 };
                }
            }
        }
        self.recompute_objective();
        self.since_refactor = 0;
        Ok(())
    }

    fn recompute_objective(&mut self) {
        self.obj.iter_mut().for_each(|v| *v = 0.0);
        self.obj[..self.n_cols].copy_from_slice(&self.cost);
        for (i, &bi) in self.basis.iter().enumerate() {
            let cb = self.cost[bi];
            if cb != 0.0 {
                let row = &self.t[i * self.width..(i + 1) * self.width];
                for (o, &v) in self.obj.iter_mut().zip(row) {
                    *o -= cb * v;
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let piv = self.t[r * w + c];
        for v in &mut self.t[r * w..(r + 1) * w] {
            *v /= piv;
        }
        let prow: Vec<f64> = self.t[r * w..(r + 1) * w].to_vec();
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let f = self.t[i * w + c];
            if f != 0.0 {
                for (v, &p) in self.t[i * w..(i + 1) * w].iter_mut().zip(&prow) {
                    *v -= f * p;
                }
                self.t[i * w + c] = 0.0;
            }
        }
        let f = self.obj[c];
        if f != 0.0 {
            for (v, &p) in self.obj.iter_mut().zip(&prow) {
                *v -= f * p;
            }
            self.obj[c] = 0.0;
        }
        self.basis[r] = c;
        self.since_refactor += 1;
        self.pivots += 1;
    }

    fn run(&mut self, allowed: usize) -> Result<PhaseEnd> {
        let m = self.rows.len();
        let w = self.width;
        let limit = 50_000 + 20 * (m + self.n_cols);
        let mut is_basic = vec![false; self.n_cols];
        loop {
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
            if self.pivots > limit {
                return Err(Error::Convergence {
                    solver: "simplex",
                    iterations: self.pivots,
                    residual: f64::NAN,
                });
            }
            is_basic.iter_mut().for_each(|v| *v = false);
            for &bi in &self.basis {
                is_basic[bi] = true;
            }
            // Bland: lowest-index improving column
            let Some(c) = (0..allowed).find(|&j| !is_basic[j] && self.obj[j] < -OPT_TOL) else {
                return Ok(PhaseEnd::Optimal);
            };
            let mut best: Option<(usize, f64)> = None;
            for i in 0..m {
                let a = self.t[i * w + c];
                if a > PIVOT_TOL {
                    let ratio = self.t[i * w + self.n_cols].max(0.0) / a;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            let tie = (ratio - br).abs() <= 1e-12 * (1.0 + br);
                            if (tie && self.basis[i] < self.basis[bi]) || (!tie && ratio < br) {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            match best {
                Some((r, _)) => self.pivot(r, c),
                None => return Ok(PhaseEnd::Unbounded),
            }
        }
    }

    fn value(&self, i: usize) -> f64 {
        self.t[i * self.width + self.n_cols]
    }

    /// Pivot basic artificials out, dropping rows that turn out redundant.
    fn expel_artificials(&mut self) -> Result<()> {
        let n = self.std.a.ncols();
        let w = self.width;
        let mut i = 0;
        while i < self.rows.len() {
            if self.basis[i] < n {
                i += 1;
                continue;
            }
            let row = &self.t[i * w..i * w + n];
            let (jmax, vmax) = row
                .iter()
                .enumerate()
                .fold((usize::MAX, 0.0f64), |acc, (j, v)| if v.abs() > acc.1 { (j, v.abs()) } else { acc });
            if vmax > PIVOT_TOL {
                self.pivot(i, jmax);
                i += 1;
            } else {
                self.t.drain(i * w..(i + 1) * w);
                self.rows.remove(i);
                self.basis.remove(i);
            }
        }
        Ok(())
    }

    fn primal(&self) -> Vec<f64> {
        let mut y = vec![0.0; self.std.a.ncols()];
        for (i, &bi) in self.basis.iter().enumerate() {
            if bi < y.len() {
                y[bi] = self.value(i).max(0.0);
            }
        }
        y
    }
}

fn recover(std: &Standard, y: &[f64]) -> Vec<f64> {
    std.recover
        .iter()
        .map(|r| match *r {
            Recover::Shift { col, lo } => lo + y[col],
            Recover::Split { pos, neg } => y[pos] - y[neg],
        })
        .collect()
}

/// Runs phase one; returns the tableau positioned at a feasible basis with
/// artificials removed, or `None` when infeasible.
fn phase_one(std: &Standard) -> Result<Option<Tableau<'_>>> {
    let mut tab = Tableau::new(std);
    let n = std.a.ncols();
    for j in n..tab.n_cols {
        tab.cost[j] = 1.0;
    }
    tab.recompute_objective();
    tab.run(tab.n_cols)?;
    tab.refactor()?;
    let infeas: f64 = (0..tab.rows.len())
        .filter(|&i| tab.basis[i] >= n)
        .map(|i| tab.value(i).abs())
        .sum();
    let scale = 1.0 + std.b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if infeas > 1e-9 * scale {
        return Ok(None);
    }
    tab.expel_artificials()?;
    Ok(Some(tab))
}

pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    lp.validate()?;
    let std = standardize(lp);
    let n = std.a.ncols();
    let Some(mut tab) = phase_one(&std)? else {
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            x: vec![f64::NAN; lp.n_vars()],
            objective_value: f64::NAN,
        });
    };
    tab.cost = std.c.clone();
    tab.cost.resize(tab.n_cols, 0.0);
    tab.refactor()?;
    let end = tab.run(n)?;
    if let PhaseEnd::Unbounded = end {
        let x = recover(&std, &tab.primal());
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            x,
            objective_value: match lp.sense {
                Sense::Minimize => f64::NEG_INFINITY,
                Sense::Maximize => f64::INFINITY,
            },
        });
    }
    tab.refactor()?;
    let x = recover(&std, &tab.primal());
    let viol = lp.max_violation(&x);
    if viol > FEAS_TOL {
        return Err(Error::NumericalBreakdown(format!(
            "simplex solution violates constraints by {viol:e}"
        )));
    }
    let objective_value = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        objective_value,
    })
}

/// Phase one only: a feasible point or a declaration of infeasibility.
pub fn feasibility_certificate(lp: &LinearProgram) -> Result<Feasibility> {
    lp.validate()?;
    let std = standardize(lp);
    match phase_one(&std)? {
        None => Ok(Feasibility::Infeasible),
        Some(tab) => {
            let x = recover(&std, &tab.primal());
            if lp.max_violation(&x) > FEAS_TOL {
                return Err(Error::NumericalBreakdown(
                    "phase-one point violates constraints".into(),
                ));
            }
            Ok(Feasibility::Feasible(x))
        }
    }
}
