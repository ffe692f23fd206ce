//! Repeated Cholesky factorization of `C D Cᵀ` for a fixed sparse `C` and a
//! varying positive diagonal `D`.
//!
//! The sparsity pattern of `C Cᵀ` never changes while a chain runs, so the
//! ordering, symbolic analysis and the scatter map from columns of `C` into
//! the factor's value array are computed once. Each numeric factorization is
//! then a scatter-add plus a left-looking numeric Cholesky.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use nalgebra::DMatrix;
use nalgebra_sparse::factorization::{CscCholesky, CscSymbolicCholesky};
use nalgebra_sparse::pattern::SparsityPattern;
use nalgebra_sparse::CscMatrix;

use super::SparseMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct NormalEquations {
    n: usize,
    /// `perm[new] = old`
    perm: Vec<usize>,
    /// `inv_perm[old] = new`
    inv_perm: Vec<usize>,
    nnz: usize,
    symbolic: CscSymbolicCholesky,
    contrib_ptr: Vec<usize>,
    contrib_pos: Vec<usize>,
    contrib_coef: Vec<f64>,
    /// Columns of `C` with rows already permuted.
    cols: Vec<Vec<(usize, f64)>>,
}

/// Numeric factor `P C D Cᵀ Pᵀ = L Lᵀ`.
#[derive(Clone, Debug)]
pub struct NormalFactor {
    chol: CscCholesky<f64>,
    values: Vec<f64>,
}

/// Scratch space for sparse triangular solves.
#[derive(Clone, Debug, Default)]
pub struct SolveWork {
    x: Vec<f64>,
    mark: Vec<bool>,
    order: Vec<usize>,
    stack: Vec<(usize, usize)>,
}

impl NormalEquations {
    pub fn new(c: &SparseMatrix) -> Self {
        let n = c.n_rows();
        let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for j in 0..c.n_cols() {
            let (rows, _) = c.col(j);
            for &a in rows {
                for &b in rows {
                    if a != b {
                        adj[a].insert(b);
                    }
                }
            }
        }
        let perm = minimum_degree(&adj);
        let mut inv_perm = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv_perm[old] = new;
        }

        // full symmetric pattern in permuted indexing, column-major
        let mut offsets = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        offsets.push(0);
        for new_c in 0..n {
            let old_c = perm[new_c];
            let mut col: Vec<usize> = adj[old_c].iter().map(|&o| inv_perm[o]).collect();
            col.push(new_c);
            col.sort_unstable();
            indices.extend_from_slice(&col);
            offsets.push(indices.len());
        }
        let nnz = indices.len();
        let pattern = SparsityPattern::try_from_offsets_and_indices(n, n, offsets.clone(), indices.clone())
            .expect("pattern built sorted and in bounds");
        let symbolic = CscSymbolicCholesky::factor(pattern);

        let position = |r: usize, col: usize| -> usize {
            let lane = &indices[offsets[col]..offsets[col + 1]];
            offsets[col] + lane.binary_search(&r).expect("entry present in pattern")
        };

        let mut contrib_ptr = Vec::with_capacity(c.n_cols() + 1);
        let mut contrib_pos = Vec::new();
        let mut contrib_coef = Vec::new();
        let mut cols = Vec::with_capacity(c.n_cols());
        contrib_ptr.push(0);
        for j in 0..c.n_cols() {
            let (rows, vals) = c.col(j);
            let pc: Vec<(usize, f64)> = rows.iter().zip(vals).map(|(&r, &v)| (inv_perm[r], v)).collect();
            for &(ra, va) in &pc {
                for &(rb, vb) in &pc {
                    if ra >= rb {
                        contrib_pos.push(position(ra, rb));
                        contrib_coef.push(va * vb);
                    }
                }
            }
            contrib_ptr.push(contrib_pos.len());
            cols.push(pc);
        }

        NormalEquations {
            n,
            perm,
            inv_perm,
            nnz,
            symbolic,
            contrib_ptr,
            contrib_pos,
            contrib_coef,
            cols,
        }
    }

    /// Number of rows of `C` (order of the factored matrix).
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    fn assemble(&self, d: &[f64], values: &mut Vec<f64>) {
        assert_eq!(d.len(), self.cols.len());
        values.clear();
        values.resize(self.nnz, 0.0);
        for (j, &dj) in d.iter().enumerate() {
            for p in self.contrib_ptr[j]..self.contrib_ptr[j + 1] {
                values[self.contrib_pos[p]] += dj * self.contrib_coef[p];
            }
        }
    }

    /// Factor `C diag(d) Cᵀ`.
    pub fn factor(&self, d: &[f64]) -> Result<NormalFactor> {
        let mut values = Vec::new();
        self.assemble(d, &mut values);
        let chol = CscCholesky::factor_numerical(self.symbolic.clone(), &values)
            .map_err(|_| Error::NearBoundary("C D Cᵀ is not positive definite".into()))?;
        Ok(NormalFactor { chol, values })
    }

    /// Re-factor in place, reusing the storage of `f`.
    pub fn refactor(&self, f: &mut NormalFactor, d: &[f64]) -> Result<()> {
        let mut values = std::mem::take(&mut f.values);
        self.assemble(d, &mut values);
        let res = f.chol.refactor(&values);
        f.values = values;
        res.map_err(|_| Error::NearBoundary("C D Cᵀ is not positive definite".into()))
    }

    /// Dense copy of `C diag(d) Cᵀ` in the original row order (testing aid).
    pub fn assemble_dense(&self, d: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (j, col) in self.cols.iter().enumerate() {
            for &(ra, va) in col {
                for &(rb, vb) in col {
                    m[(self.perm[ra], self.perm[rb])] += d[j] * va * vb;
                }
            }
        }
        m
    }

    pub fn work(&self) -> SolveWork {
        SolveWork {
            x: vec![0.0; self.n],
            mark: vec![false; self.n],
            order: Vec::new(),
            stack: Vec::new(),
        }
    }
}

impl NormalFactor {
    /// Solve `C D Cᵀ y = rhs` (original row order).
    pub fn solve(&self, eq: &NormalEquations, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), eq.n);
        let mut b = DMatrix::from_fn(eq.n, 1, |i, _| rhs[eq.perm[i]]);
        self.chol.solve_mut(&mut b);
        (0..eq.n).map(|old| b[(eq.inv_perm[old], 0)]).collect()
    }

    /// `log det(C D Cᵀ)`.
    pub fn log_det(&self) -> f64 {
        let l = self.chol.l();
        let offsets = l.col_offsets();
        let vals = l.values();
        (0..l.ncols()).map(|k| vals[offsets[k]].ln()).sum::<f64>() * 2.0
    }

    /// `c_jᵀ (C D Cᵀ)⁻¹ c_j` for column `j` of `C`, via a sparse forward solve.
    pub fn column_quadratic(&self, eq: &NormalEquations, j: usize, work: &mut SolveWork) -> f64 {
        sparse_lower_solve_sq_norm(self.chol.l(), &eq.cols[j], work)
    }
}

/// `‖L⁻¹ b‖²` for sparse `b`, touching only the reach of `b` in the graph of `L`.
fn sparse_lower_solve_sq_norm(l: &CscMatrix<f64>, b: &[(usize, f64)], w: &mut SolveWork) -> f64 {
    let offsets = l.col_offsets();
    let rows = l.row_indices();
    let vals = l.values();
    w.order.clear();
    for &(start, _) in b {
        if w.mark[start] {
            continue;
        }
        w.mark[start] = true;
        w.stack.push((start, offsets[start] + 1));
        while let Some(&mut (node, ref mut next)) = w.stack.last_mut() {
            let end = offsets[node + 1];
            let mut pushed = false;
            while *next < end {
                let child = rows[*next];
                *next += 1;
                if !w.mark[child] {
                    w.mark[child] = true;
                    w.stack.push((child, offsets[child] + 1));
                    pushed = true;
                    break;
                }
            }
            if !pushed {
                w.order.push(node);
                w.stack.pop();
            }
        }
    }
    for &(i, v) in b {
        w.x[i] += v;
    }
    let mut sq = 0.0;
    for &k in w.order.iter().rev() {
        let xk = w.x[k] / vals[offsets[k]];
        w.x[k] = 0.0;
        w.mark[k] = false;
        sq += xk * xk;
        for p in offsets[k] + 1..offsets[k + 1] {
            w.x[rows[p]] -= vals[p] * xk;
        }
    }
    sq
}

/// Greedy minimum-degree ordering on an explicit elimination graph.
fn minimum_degree(adj: &[BTreeSet<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut graph: Vec<BTreeSet<usize>> = adj.to_vec();
    let mut done = vec![false; n];
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> =
        (0..n).map(|v| Reverse((graph[v].len(), v))).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse((deg, v))) = heap.pop() {
        if done[v] || deg != graph[v].len() {
            continue;
        }
        done[v] = true;
        order.push(v);
        let nbrs: Vec<usize> = std::mem::take(&mut graph[v]).into_iter().collect();
        for &u in &nbrs {
            graph[u].remove(&v);
            for &w in &nbrs {
                if w != u {
                    graph[u].insert(w);
                }
            }
        }
        for &u in &nbrs {
            heap.push(Reverse((graph[u].len(), u)));
        }
    }
    order
}
