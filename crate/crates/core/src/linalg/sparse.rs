use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Compressed-column sparse matrix built from `(row, col, value)` triplets.
///
/// Construction canonicalizes the input: duplicate coordinates are summed and
/// exact zeros are dropped, so the compressed view and [`triplets`](Self::triplets)
/// always enumerate the same entries, sorted by column then row.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
    symmetric: bool,
}

impl SparseMatrix {
    pub fn from_triplets<I>(n_rows: usize, n_cols: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for (r, c, v) in triplets {
            if r >= n_rows || c >= n_cols {
                return Err(Error::invalid(format!(
                    "entry ({r}, {c}) outside a {n_rows}x{n_cols} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(Error::invalid(format!("non-finite entry at ({r}, {c})")));
            }
            entries.push((r, c, v));
        }
        entries.sort_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)));

        let mut col_ptr = vec![0usize; n_cols + 1];
        let mut row_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut cols = Vec::with_capacity(entries.len());
        for (r, c, v) in entries {
            if let (Some(&last_r), Some(&last_c)) = (row_idx.last(), cols.last()) {
                if last_r == r && last_c == c {
                    *values.last_mut().unwrap() += v;
                    continue;
                }
            }
            row_idx.push(r);
            cols.push(c);
            values.push(v);
        }
        // drop explicit zeros (including cancellations)
        let mut k = 0;
        for i in 0..values.len() {
            if values[i] != 0.0 {
                row_idx[k] = row_idx[i];
                cols[k] = cols[i];
                values[k] = values[i];
                k += 1;
            }
        }
        row_idx.truncate(k);
        cols.truncate(k);
        values.truncate(k);
        for &c in &cols {
            col_ptr[c + 1] += 1;
        }
        for j in 0..n_cols {
            col_ptr[j + 1] += col_ptr[j];
        }
        let mut m = SparseMatrix {
            n_rows,
            n_cols,
            col_ptr,
            row_idx,
            values,
            symmetric: false,
        };
        m.symmetric = m.compute_symmetric();
        Ok(m)
    }

    pub fn from_dense(dense: &DMatrix<f64>) -> Self {
        let mut trip = Vec::new();
        for j in 0..dense.ncols() {
            for i in 0..dense.nrows() {
                let v = dense[(i, j)];
                if v != 0.0 {
                    trip.push((i, j, v));
                }
            }
        }
        Self::from_triplets(dense.nrows(), dense.ncols(), trip).expect("dense entries are finite")
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self::from_triplets(n_rows, n_cols, std::iter::empty()).unwrap()
    }

    fn compute_symmetric(&self) -> bool {
        if self.n_rows != self.n_cols {
            return false;
        }
        let t = self.transpose_raw();
        t.col_ptr == self.col_ptr && t.row_idx == self.row_idx && t.values == self.values
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_indices(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Row indices and values of column `j`.
    pub fn col(&self, j: usize) -> (&[usize], &[f64]) {
        let r = self.col_ptr[j]..self.col_ptr[j + 1];
        (&self.row_idx[r.clone()], &self.values[r])
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_cols).flat_map(move |j| {
            let (rows, vals) = self.col(j);
            rows.iter().zip(vals).map(move |(&i, &v)| (i, j, v))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (rows, vals) = self.col(j);
        match rows.binary_search(&i) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    /// `A x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols);
        let mut y = vec![0.0; self.n_rows];
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            let (rows, vals) = self.col(j);
            for (&i, &v) in rows.iter().zip(vals) {
                y[i] += v * xj;
            }
        }
        y
    }

    /// `Aᵀ y`
    pub fn tr_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.n_rows);
        (0..self.n_cols)
            .map(|j| {
                let (rows, vals) = self.col(j);
                rows.iter().zip(vals).map(|(&i, &v)| v * y[i]).sum()
            })
            .collect()
    }

    fn transpose_raw(&self) -> SparseMatrix {
        let mut count = vec![0usize; self.n_rows + 1];
        for &i in &self.row_idx {
            count[i + 1] += 1;
        }
        for i in 0..self.n_rows {
            count[i + 1] += count[i];
        }
        let col_ptr = count.clone();
        let mut next = count;
        let mut row_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for j in 0..self.n_cols {
            let (rows, vals) = self.col(j);
            for (&i, &v) in rows.iter().zip(vals) {
                let p = next[i];
                row_idx[p] = j;
                values[p] = v;
                next[i] += 1;
            }
        }
        SparseMatrix {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            col_ptr,
            row_idx,
            values,
            symmetric: self.symmetric,
        }
    }

    pub fn transpose(&self) -> SparseMatrix {
        self.transpose_raw()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_rows, self.n_cols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }

    /// Submatrix keeping the listed columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> SparseMatrix {
        let trip = cols.iter().enumerate().flat_map(|(new_j, &j)| {
            let (rows, vals) = self.col(j);
            rows.iter()
                .zip(vals)
                .map(move |(&i, &v)| (i, new_j, v))
                .collect::<Vec<_>>()
        });
        SparseMatrix::from_triplets(self.n_rows, cols.len(), trip).unwrap()
    }

    /// Submatrix keeping the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> SparseMatrix {
        let mut map = vec![usize::MAX; self.n_rows];
        for (new_i, &i) in rows.iter().enumerate() {
            map[i] = new_i;
        }
        let trip = self
            .triplets()
            .filter(|&(i, _, _)| map[i] != usize::MAX)
            .map(|(i, j, v)| (map[i], j, v))
            .collect::<Vec<_>>();
        SparseMatrix::from_triplets(rows.len(), self.n_cols, trip).unwrap()
    }

    /// Appends rows given as triplets with row indices relative to the new block.
    pub fn append_rows(&self, extra_rows: usize, trip: &[(usize, usize, f64)]) -> Result<Self> {
        let all = self
            .triplets()
            .chain(trip.iter().map(|&(i, j, v)| (i + self.n_rows, j, v)))
            .collect::<Vec<_>>();
        SparseMatrix::from_triplets(self.n_rows + extra_rows, self.n_cols, all)
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        let mut sums = vec![0.0f64; self.n_rows];
        for (i, _, v) in self.triplets() {
            sums[i] += v.abs();
        }
        sums.into_iter().fold(0.0, f64::max)
    }
}
