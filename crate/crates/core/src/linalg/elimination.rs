//! Elimination of the leading (sign-free) coordinates from a homogeneous
//! system `A Δ = 0`.
//!
//! Splitting `Δ = (Δ_L, Δ_T)` into `ℓ` leading and `k` trailing coordinates,
//! sparse Gaussian elimination on the leading columns yields
//! `Δ_L = G Δ_T` together with a residual system `C Δ_T = 0` that involves
//! trailing coordinates only. `G` is never formed: it is applied through the
//! recorded pivot rows.

use std::collections::BTreeSet;

use nalgebra::DMatrix;

use super::SparseMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
struct Pivot {
    col: usize,
    /// `Δ_col = Σ coef · Δ_c` over the other entries of the pivot row.
    terms: Vec<(usize, f64)>,
}

#[derive(Clone, Debug)]
pub struct FreeElimination {
    lead: usize,
    n_cols: usize,
    pivots: Vec<Pivot>,
    reduced: SparseMatrix,
    reduced_rows: Vec<usize>,
}

const DROP_TOL: f64 = 1e-14;
const PIVOT_THRESHOLD: f64 = 0.1;

impl FreeElimination {
    /// Eliminates the first `lead` columns of `a`.
    ///
    /// Fails when some leading direction is not pinned down by the trailing
    /// coordinates, i.e. the leading column block is rank deficient.
    pub fn new(a: &SparseMatrix, lead: usize) -> Result<Self> {
        let n_cols = a.n_cols();
        assert!(lead <= n_cols);
        let at = a.transpose();
        let mut rows: Vec<Vec<(usize, f64)>> = (0..a.n_rows())
            .map(|i| {
                let (cols, vals) = at.col(i);
                cols.iter().copied().zip(vals.iter().copied()).collect()
            })
            .collect();
        let mut active = vec![true; rows.len()];
        let mut col_rows: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); lead];
        for (i, row) in rows.iter().enumerate() {
            for &(c, _) in row {
                if c < lead {
                    col_rows[c].insert(i);
                }
            }
        }
        let scale = a.values().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        let mut done = vec![false; lead];
        let mut pivots = Vec::with_capacity(lead);

        for _ in 0..lead {
            let j = (0..lead)
                .filter(|&j| !done[j])
                .min_by_key(|&j| (col_rows[j].len(), j))
                .unwrap();
            let entry = |row: &[(usize, f64)]| -> f64 {
                row.binary_search_by_key(&j, |e| e.0).map(|p| row[p].1).unwrap_or(0.0)
            };
            let col_max = col_rows[j].iter().map(|&i| entry(&rows[i]).abs()).fold(0.0, f64::max);
            if col_max <= 1e-12 * scale {
                return Err(Error::UnboundedPolytope(format!(
                    "free coordinate {j} is not determined by the nonnegative coordinates"
                )));
            }
            let r = *col_rows[j]
                .iter()
                .filter(|&&i| entry(&rows[i]).abs() >= PIVOT_THRESHOLD * col_max)
                .min_by_key(|&&i| (rows[i].len(), i))
                .unwrap();
            let prow = std::mem::take(&mut rows[r]);
            active[r] = false;
            let arj = entry(&prow);
            for &(c, _) in &prow {
                if c < lead {
                    col_rows[c].remove(&r);
                }
            }
            let others: Vec<usize> = col_rows[j].iter().copied().collect();
            for i in others {
                let f = entry(&rows[i]) / arj;
                let merged = axpy_rows(&rows[i], &prow, -f, j);
                for &(c, _) in &rows[i] {
                    if c < lead {
                        col_rows[c].remove(&i);
                    }
                }
                for &(c, _) in &merged {
                    if c < lead {
                        col_rows[c].insert(i);
                    }
                }
                rows[i] = merged;
            }
            done[j] = true;
            let terms = prow
                .iter()
                .filter(|&&(c, _)| c != j)
                .map(|&(c, v)| (c, -v / arj))
                .collect();
            pivots.push(Pivot { col: j, terms });
        }

        let mut trip = Vec::new();
        let mut reduced_rows = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            if !active[i] || row.is_empty() {
                continue;
            }
            let ri = reduced_rows.len();
            reduced_rows.push(i);
            for &(c, v) in row {
                debug_assert!(c >= lead);
                trip.push((ri, c - lead, v));
            }
        }
        let reduced = SparseMatrix::from_triplets(reduced_rows.len(), n_cols - lead, trip)?;
        Ok(FreeElimination {
            lead,
            n_cols,
            pivots,
            reduced,
            reduced_rows,
        })
    }

    pub fn lead(&self) -> usize {
        self.lead
    }

    pub fn tail(&self) -> usize {
        self.n_cols - self.lead
    }

    /// The trailing-only residual system `C`.
    pub fn reduced(&self) -> &SparseMatrix {
        &self.reduced
    }

    /// Original row indices of the rows of `C`.
    pub fn reduced_rows(&self) -> &[usize] {
        &self.reduced_rows
    }

    /// `L t = (G t, t)`, a full-length vector.
    pub fn extend(&self, tail: &[f64]) -> Vec<f64> {
        assert_eq!(tail.len(), self.tail());
        let mut x = vec![0.0; self.n_cols];
        x[self.lead..].copy_from_slice(tail);
        for p in self.pivots.iter().rev() {
            x[p.col] = p.terms.iter().map(|&(c, v)| v * x[c]).sum();
        }
        x
    }

    /// `Lᵀ u = u_T + Gᵀ u_L`.
    pub fn adjoint(&self, full: &[f64]) -> Vec<f64> {
        assert_eq!(full.len(), self.n_cols);
        let mut acc = full.to_vec();
        for p in &self.pivots {
            let a = acc[p.col];
            if a == 0.0 {
                continue;
            }
            for &(c, v) in &p.terms {
                acc[c] += v * a;
            }
        }
        acc.split_off(self.lead)
    }

    /// Dense `G` (ℓ × k); intended for small problems.
    pub fn lead_map_dense(&self) -> DMatrix<f64> {
        let k = self.tail();
        let mut g = DMatrix::zeros(self.lead, k);
        let mut e = vec![0.0; k];
        for t in 0..k {
            e[t] = 1.0;
            let x = self.extend(&e);
            for l in 0..self.lead {
                g[(l, t)] = x[l];
            }
            e[t] = 0.0;
        }
        g
    }
}

/// `row + f·other`, with column `cancel` removed exactly.
fn axpy_rows(row: &[(usize, f64)], other: &[(usize, f64)], f: f64, cancel: usize) -> Vec<(usize, f64)> {
    let mut out = Vec::with_capacity(row.len() + other.len());
    let (mut a, mut b) = (0, 0);
    let scale = row.iter().chain(other).fold(0.0f64, |m, e| m.max(e.1.abs()));
    let mut push = |c: usize, v: f64| {
        if c != cancel && v.abs() > DROP_TOL * scale {
            out.push((c, v));
        }
    };
    while a < row.len() || b < other.len() {
        match (row.get(a), other.get(b)) {
            (Some(&(ca, va)), Some(&(cb, vb))) if ca == cb => {
                push(ca, va + f * vb);
                a += 1;
                b += 1;
            }
            (Some(&(ca, va)), Some(&(cb, _))) if ca < cb => {
                push(ca, va);
                a += 1;
            }
            (Some(&(ca, va)), None) => {
                push(ca, va);
                a += 1;
            }
            (_, Some(&(cb, vb))) => {
                push(cb, f * vb);
                b += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    out
}
