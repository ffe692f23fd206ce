//! Polytope representations, the structured generators, and the QR bridge
//! from the constrained form to the full-dimensional form.
//!
//! Constrained form: `{x ∈ R^d : A x = b, x_{d-k..d} ≥ 0}`, the first `d − k`
//! coordinates unrestricted in sign. Full-dimensional form: `{v : Ã v ≤ b̃}`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{norm_inf, SparseMatrix};

#[derive(Clone, Debug, PartialEq)]
pub struct ConstrainedPolytope {
    a: SparseMatrix,
    b: Vec<f64>,
    k: usize,
}

impl ConstrainedPolytope {
    pub fn new(a: SparseMatrix, b: Vec<f64>, k: usize) -> Result<Self> {
        if b.len() != a.n_rows() {
            return Err(Error::DimensionMismatch {
                expected: a.n_rows(),
                found: b.len(),
            });
        }
        if k > a.n_cols() {
            return Err(Error::invalid(format!(
                "k = {k} exceeds the number of variables {}",
                a.n_cols()
            )));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("right-hand side has non-finite entries"));
        }
        Ok(ConstrainedPolytope { a, b, k })
    }

    pub fn a(&self) -> &SparseMatrix {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// Number of trailing nonnegative coordinates.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.a.n_cols()
    }

    pub fn n(&self) -> usize {
        self.a.n_rows()
    }

    /// Number of leading sign-free coordinates.
    pub fn lead(&self) -> usize {
        self.d() - self.k
    }

    /// Dimension of the polytope, assuming `A` has full row rank.
    pub fn d_eff(&self) -> usize {
        self.d().saturating_sub(self.n())
    }

    pub fn eq_tolerance(&self) -> f64 {
        1e-8 * (1.0 + norm_inf(&self.b))
    }

    /// `‖A x − b‖∞`
    pub fn residual(&self, x: &[f64]) -> f64 {
        let ax = self.a.mul_vec(x);
        ax.iter().zip(&self.b).fold(0.0, |m, (l, r)| m.max((l - r).abs()))
    }

    pub fn membership(&self, x: &[f64], strict: bool) -> bool {
        if x.len() != self.d() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        if self.residual(x) > self.eq_tolerance() {
            return false;
        }
        let tail = &x[self.lead()..];
        if strict {
            tail.iter().all(|&v| v > 0.0)
        } else {
            tail.iter().all(|&v| v >= -1e-12)
        }
    }

    /// Checks `rank(A) = n < d` with a dense factorization.
    pub fn check_rank(&self) -> Result<()> {
        if self.n() >= self.d() {
            return Err(Error::DegeneratePolytope(format!(
                "{} equalities in {} variables leave no interior",
                self.n(),
                self.d()
            )));
        }
        let dependent = dependent_rows(&self.a.to_dense());
        if dependent.is_empty() {
            Ok(())
        } else {
            Err(Error::RankDeficient { rows: dependent })
        }
    }
}

/// Rows of `a` that are (numerically) combinations of earlier rows, found from
/// the diagonal of an unpivoted QR of `aᵀ`.
fn dependent_rows(a: &DMatrix<f64>) -> Vec<usize> {
    let n = a.nrows();
    if n == 0 {
        return Vec::new();
    }
    let r = a.transpose().qr().r();
    let scale = (0..n).map(|j| r[(j, j)].abs()).fold(0.0, f64::max).max(1.0);
    (0..n).filter(|&j| r[(j, j)].abs() <= 1e-10 * scale).collect()
}

/// `x = Q2 v + shift`
#[derive(Clone, Debug, PartialEq)]
pub struct AffineMap {
    q2: DMatrix<f64>,
    shift: DVector<f64>,
}

impl AffineMap {
    pub fn q2(&self) -> &DMatrix<f64> {
        &self.q2
    }

    pub fn shift(&self) -> &DVector<f64> {
        &self.shift
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.q2 * v + &self.shift
    }

    /// Least-squares inverse `Q2ᵀ (x − shift)`; exact for `x` with `A x = b`.
    pub fn pull(&self, x: &DVector<f64>) -> DVector<f64> {
        self.q2.tr_mul(&(x - &self.shift))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FullDimPolytope {
    a: DMatrix<f64>,
    b: DVector<f64>,
    map: Option<AffineMap>,
}

impl FullDimPolytope {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                found: b.len(),
            });
        }
        if a.ncols() == 0 {
            return Err(Error::DegeneratePolytope("zero-dimensional body".into()));
        }
        Ok(FullDimPolytope { a, b, map: None })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn map(&self) -> Option<&AffineMap> {
        self.map.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn n_constraints(&self) -> usize {
        self.a.nrows()
    }

    /// `b̃ − Ã v`, failing unless every entry is strictly positive.
    pub fn slack(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        let s = &self.b - &self.a * v;
        match s.iter().enumerate().find(|(_, &si)| !(si > 0.0)) {
            Some((index, &slack)) => Err(Error::BoundaryViolation { index, slack }),
            None => Ok(s),
        }
    }

    pub fn contains(&self, v: &DVector<f64>, tol: f64) -> bool {
        let s = &self.b - &self.a * v;
        s.iter().all(|&si| si >= -tol)
    }

    /// Requires the rows of `Ã` to span the space, which barrier Hessians need.
    pub fn check_bounded(&self) -> Result<()> {
        if self.a.nrows() < self.a.ncols() {
            return Err(Error::UnboundedPolytope(format!(
                "{} inequalities cannot bound a {}-dimensional body",
                self.a.nrows(),
                self.a.ncols()
            )));
        }
        let sv = self.a.clone().singular_values();
        let max = sv.max();
        if sv.min() <= 1e-10 * max.max(1.0) {
            return Err(Error::UnboundedPolytope(
                "constraint rows do not span the space".into(),
            ));
        }
        Ok(())
    }
}

/// Dense QR of `Aᵀ` gives `Q = [Q1 Q2]`, `R1`; then
/// `Ã = −(last k rows of Q2)` and `b̃ = last k rows of Q1 R1⁻ᵀ b`.
pub fn to_full_dimensional(p: &ConstrainedPolytope) -> Result<FullDimPolytope> {
    let (n, d, k) = (p.n(), p.d(), p.k());
    p.check_rank()?;
    let at = p.a().to_dense().transpose();
    let qr = at.qr();
    let mut qt = DMatrix::identity(d, d);
    qr.q_tr_mul(&mut qt);
    let q = qt.transpose();
    let r1 = qr.r();
    let q1 = q.columns(0, n).into_owned();
    let q2 = q.columns(n, d - n).into_owned();
    let b = DVector::from_column_slice(p.b());
    let y = r1
        .transpose()
        .solve_lower_triangular(&b)
        .ok_or_else(|| Error::RankDeficient { rows: dependent_rows(&p.a().to_dense()) })?;
    let shift = &q1 * y;
    let a_tilde = -q2.rows(d - k, k).into_owned();
    let b_tilde = shift.rows(d - k, k).into_owned();
    Ok(FullDimPolytope {
        a: a_tilde,
        b: b_tilde,
        map: Some(AffineMap { q2, shift }),
    })
}

pub fn make_simplex(d: usize) -> Result<ConstrainedPolytope> {
    if d < 2 {
        return Err(Error::DegeneratePolytope(format!(
            "simplex needs d >= 2, got {d}"
        )));
    }
    let a = SparseMatrix::from_triplets(1, d, (0..d).map(|j| (0, j, 1.0)))?;
    ConstrainedPolytope::new(a, vec![1.0], d)
}

/// `[-1, 1]^m` as `x_i + s_i = 1`, `−x_i + t_i = 1`, `s, t ≥ 0`; variables
/// ordered `(x, s, t)`.
pub fn make_hypercube(m: usize) -> Result<ConstrainedPolytope> {
    if m == 0 {
        return Err(Error::EmptyPolytope("hypercube of dimension 0".into()));
    }
    let mut t = Vec::with_capacity(4 * m);
    for i in 0..m {
        t.push((i, i, 1.0));
        t.push((i, m + i, 1.0));
        t.push((m + i, i, -1.0));
        t.push((m + i, 2 * m + i, 1.0));
    }
    let a = SparseMatrix::from_triplets(2 * m, 3 * m, t)?;
    ConstrainedPolytope::new(a, vec![1.0; 2 * m], 2 * m)
}

/// Doubly stochastic `m × m` matrices, `x_ij` at index `i·m + j`. Rows are the
/// `m` row sums followed by the first `m − 1` column sums.
pub fn make_birkhoff(m: usize) -> Result<ConstrainedPolytope> {
    if m < 2 {
        return Err(Error::invalid(format!("Birkhoff polytope needs m >= 2, got {m}")));
    }
    let mut t = Vec::with_capacity(2 * m * m);
    for i in 0..m {
        for j in 0..m {
            t.push((i, i * m + j, 1.0));
            if j + 1 < m {
                t.push((m + j, i * m + j, 1.0));
            }
        }
    }
    let a = SparseMatrix::from_triplets(2 * m - 1, m * m, t)?;
    ConstrainedPolytope::new(a, vec![1.0; 2 * m - 1], m * m)
}

/// Generator spec of the form `name:size`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Generator {
    Simplex(usize),
    Hypercube(usize),
    Birkhoff(usize),
}

impl Generator {
    pub fn build(&self) -> Result<ConstrainedPolytope> {
        match *self {
            Generator::Simplex(d) => make_simplex(d),
            Generator::Hypercube(m) => make_hypercube(m),
            Generator::Birkhoff(m) => make_birkhoff(m),
        }
    }

    /// The max-margin point of the family, which is also its symmetry center.
    pub fn center(&self) -> Vec<f64> {
        match *self {
            Generator::Simplex(d) => vec![1.0 / d as f64; d],
            Generator::Hypercube(m) => {
                let mut x = vec![1.0; 3 * m];
                x[..m].fill(0.0);
                x
            }
            Generator::Birkhoff(m) => vec![1.0 / m as f64; m * m],
        }
    }

    /// Slack of the center, `min` over trailing coordinates.
    pub fn center_margin(&self) -> f64 {
        match *self {
            Generator::Simplex(d) => 1.0 / d as f64,
            Generator::Hypercube(_) => 1.0,
            Generator::Birkhoff(m) => 1.0 / m as f64,
        }
    }

    pub fn d_eff(&self) -> usize {
        match *self {
            Generator::Simplex(d) => d - 1,
            Generator::Hypercube(m) => m,
            Generator::Birkhoff(m) => (m - 1) * (m - 1),
        }
    }
}

impl FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, size) = s
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("expected name:size, got {s:?}")))?;
        let size: usize = size
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("bad size in {s:?}")))?;
        match name.trim() {
            "simplex" => Ok(Generator::Simplex(size)),
            "hypercube" => Ok(Generator::Hypercube(size)),
            "birkhoff" => Ok(Generator::Birkhoff(size)),
            other => Err(Error::invalid(format!("unknown generator {other:?}"))),
        }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Generator::Simplex(d) => write!(f, "simplex:{d}"),
            Generator::Hypercube(m) => write!(f, "hypercube:{m}"),
            Generator::Birkhoff(m) => write!(f, "birkhoff:{m}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_layout() {
        let p = make_simplex(3).unwrap();
        assert_eq!(p.a().to_dense(), DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]));
        assert_eq!(p.b(), &[1.0]);
        assert_eq!(p.k(), 3);
        assert!(matches!(make_simplex(1), Err(Error::DegeneratePolytope(_))));
    }

    #[test]
    fn simplex_membership() {
        let p = make_simplex(3).unwrap();
        let third = 1.0 / 3.0;
        assert!(p.membership(&[third, third, third], true));
        assert!(!p.membership(&[1.0, 0.0, 0.0], true));
        assert!(p.membership(&[1.0, 0.0, 0.0], false));
        assert!(make_simplex(2).unwrap().membership(&[0.5, 0.5], true));
    }

    #[test]
    fn hypercube_layout() {
        let p = make_hypercube(1).unwrap();
        assert_eq!(
            p.a().to_dense(),
            DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 0.0, -1.0, 0.0, 1.0])
        );
        assert_eq!(p.b(), &[1.0, 1.0]);
        assert_eq!(p.k(), 2);
        assert!(p.membership(&[0.0, 1.0, 1.0], true));
        // equalities hold but a slack is negative
        assert_eq!(p.residual(&[2.0, -1.0, 3.0]), 0.0);
        assert!(!p.membership(&[2.0, -1.0, 3.0], false));
        assert!(matches!(make_hypercube(0), Err(Error::EmptyPolytope(_))));
    }

    #[test]
    fn hypercube_projection_is_unit_interval() {
        // vertices of {x+s=1, -x+t=1, s,t>=0}: choose which of s,t is zero
        let p = make_hypercube(1).unwrap();
        let vertices = [[1.0, 0.0, 2.0], [-1.0, 2.0, 0.0]];
        for v in &vertices {
            assert!(p.membership(v, false));
        }
        let xs: Vec<f64> = vertices.iter().map(|v| v[0]).collect();
        assert_eq!(xs, vec![1.0, -1.0]);
    }

    #[test]
    fn generator_dimensions() {
        for g in [
            Generator::Simplex(5),
            Generator::Hypercube(4),
            Generator::Birkhoff(2),
            Generator::Birkhoff(3),
        ] {
            let p = g.build().unwrap();
            p.check_rank().unwrap();
            assert_eq!(p.d() - p.n(), g.d_eff(), "{g}");
            assert!(p.membership(&g.center(), true), "{g}");
        }
    }

    #[test]
    fn birkhoff_rank_before_dropping_row() {
        // 6x9 full system has rank 5
        let m = 3;
        let mut full = DMatrix::zeros(2 * m, m * m);
        for i in 0..m {
            for j in 0..m {
                full[(i, i * m + j)] = 1.0;
                full[(m + j, i * m + j)] = 1.0;
            }
        }
        assert_eq!(full.rank(1e-10), 5);
        assert_eq!(dependent_rows(&full), vec![5]);
        assert_eq!(make_birkhoff(3).unwrap().d_eff(), 9 - 5);
    }

    #[test]
    fn rank_deficiency_names_rows() {
        let a = SparseMatrix::from_triplets(
            3,
            4,
            vec![(0, 0, 1.0), (0, 1, 1.0), (1, 2, 1.0), (2, 0, 2.0), (2, 1, 2.0)],
        )
        .unwrap();
        let p = ConstrainedPolytope::new(a, vec![1.0, 1.0, 2.0], 4).unwrap();
        match to_full_dimensional(&p) {
            Err(Error::RankDeficient { rows }) => assert_eq!(rows, vec![2]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn simplex_bridge_segment() {
        let p = make_simplex(2).unwrap();
        let f = to_full_dimensional(&p).unwrap();
        assert_eq!(f.dim(), 1);
        assert_eq!(f.n_constraints(), 2);
        // endpoints of the segment: the v where one inequality is tight
        let map = f.map().unwrap();
        let mut ends = Vec::new();
        for i in 0..2 {
            let v = DVector::from_element(1, f.b()[i] / f.a()[(i, 0)]);
            let x = map.apply(&v);
            ends.push((x[0], x[1]));
        }
        ends.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((ends[0].0 - 0.0).abs() < 1e-12 && (ends[0].1 - 1.0).abs() < 1e-12);
        assert!((ends[1].0 - 1.0).abs() < 1e-12 && (ends[1].1 - 0.0).abs() < 1e-12);
    }

    #[test]
    fn hypercube_bridge_is_interval() {
        let f = to_full_dimensional(&make_hypercube(1).unwrap()).unwrap();
        // Ã = ±(a, a)ᵀ pairs; the body is an interval of length 2 in x
        let map = f.map().unwrap();
        let lo = (0..2)
            .filter(|&i| f.a()[(i, 0)] < 0.0)
            .map(|i| f.b()[i] / f.a()[(i, 0)])
            .fold(f64::NEG_INFINITY, f64::max);
        let hi = (0..2)
            .filter(|&i| f.a()[(i, 0)] > 0.0)
            .map(|i| f.b()[i] / f.a()[(i, 0)])
            .fold(f64::INFINITY, f64::min);
        let xl = map.apply(&DVector::from_element(1, lo))[0];
        let xh = map.apply(&DVector::from_element(1, hi))[0];
        assert!(((xl - xh).abs() - 2.0).abs() < 1e-12);
        assert!((xl.min(xh) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn generator_parse_roundtrip() {
        let g: Generator = "birkhoff:8".parse().unwrap();
        assert_eq!(g, Generator::Birkhoff(8));
        assert_eq!(g.to_string(), "birkhoff:8");
        assert!("cube:3".parse::<Generator>().is_err());
        assert!("simplex".parse::<Generator>().is_err());
    }
}
