#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use polysample::rng::ChainRng;
use polysample::{ConstrainedPolytope, SparseMatrix};

/// Random `A x = b` with a known strictly interior point.
///
/// `lead ≤ n` sign-free columns are dense so the lead block has full column
/// rank; the remaining entries are nonzero with probability `density`.
pub struct Fixture {
    pub polytope: ConstrainedPolytope,
    pub x0: Vec<f64>,
}

pub fn random_fixture(rng: &mut ChainRng, d: usize, n: usize, lead: usize, density: f64) -> Fixture {
    assert!(lead <= n && n < d);
    loop {
        let mut a = DMatrix::zeros(n, d);
        for i in 0..n {
            for j in 0..d {
                if j < lead || rng.uniform() < density {
                    a[(i, j)] = rng.gaussian();
                }
            }
            // keep every row touching the orthant
            let j = lead + (rng.next_u64() as usize) % (d - lead);
            if a[(i, j)] == 0.0 {
                a[(i, j)] = rng.gaussian();
            }
        }
        if a.rank(1e-8) < n || (lead > 0 && a.columns(0, lead).rank(1e-8) < lead) {
            continue;
        }
        let x0: Vec<f64> = (0..d)
            .map(|j| if j < lead { rng.gaussian() } else { 0.2 + 1.8 * rng.uniform() })
            .collect();
        let b = (&a * DVector::from_column_slice(&x0)).as_slice().to_vec();
        let polytope = ConstrainedPolytope::new(SparseMatrix::from_dense(&a), b, d - lead).unwrap();
        return Fixture { polytope, x0 };
    }
}

/// Orthonormal basis of `null(A)` from the eigenvectors of `AᵀA` with zero
/// eigenvalue.
pub fn null_basis(a: &DMatrix<f64>) -> DMatrix<f64> {
    let d = a.ncols();
    let eig = SymmetricEigen::new(a.transpose() * a);
    let scale = eig.eigenvalues.amax().max(1.0);
    let cols: Vec<DVector<f64>> = (0..d)
        .filter(|&j| eig.eigenvalues[j].abs() < 1e-10 * scale)
        .map(|j| eig.eigenvectors.column(j).into_owned())
        .collect();
    DMatrix::from_columns(&cols)
}

/// `Q2 (Q2ᵀ G Q2)⁻¹ Q2ᵀ` and `log det(Q2ᵀ G Q2)`.
pub fn reference_pseudo_inverse(a: &DMatrix<f64>, g: &[f64]) -> (DMatrix<f64>, f64) {
    let q2 = null_basis(a);
    let h = q2.transpose() * DMatrix::from_diagonal(&DVector::from_column_slice(g)) * &q2;
    let chol = h.clone().cholesky().expect("reduced metric is positive definite");
    let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    (&q2 * chol.inverse() * q2.transpose(), log_det)
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / norm.max(1e-300)
}

/// All `r`-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, r: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, r, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, r, &mut Vec::new(), &mut out);
    out
}

/// Vertices of `{x : E x = f, G x ≤ h}` by brute force over active sets.
pub fn vertices(e: &DMatrix<f64>, f: &[f64], g: &DMatrix<f64>, h: &[f64]) -> Vec<Vec<f64>> {
    let d = e.ncols().max(g.ncols());
    let free = d - e.nrows();
    let mut out: Vec<Vec<f64>> = Vec::new();
    for active in subsets(g.nrows(), free) {
        let mut m = DMatrix::zeros(d, d);
        let mut rhs = DVector::zeros(d);
        for i in 0..e.nrows() {
            m.set_row(i, &e.row(i));
            rhs[i] = f[i];
        }
        for (r, &i) in active.iter().enumerate() {
            m.set_row(e.nrows() + r, &g.row(i));
            rhs[e.nrows() + r] = h[i];
        }
        let Some(x) = m.clone().lu().solve(&rhs) else { continue };
        if (&m * &x - &rhs).amax() > 1e-9 || m.rank(1e-10) < d {
            continue;
        }
        let feasible = (0..g.nrows()).all(|i| g.row(i).dot(&x.transpose()) <= h[i] + 1e-9);
        if feasible && !out.iter().any(|v| close(v, x.as_slice(), 1e-8)) {
            out.push(x.as_slice().to_vec());
        }
    }
    out
}

/// Vertices of `{A x = b, x_T ≥ 0}`.
pub fn vertices_constrained(p: &ConstrainedPolytope) -> Vec<Vec<f64>> {
    let (d, lead) = (p.d(), p.lead());
    let mut g = DMatrix::zeros(p.k(), d);
    for j in 0..p.k() {
        g[(j, lead + j)] = -1.0;
    }
    vertices(&p.a().to_dense(), p.b(), &g, &vec![0.0; p.k()])
}

pub fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

pub fn same_point_set(a: &[Vec<f64>], b: &[Vec<f64>], tol: f64) -> bool {
    a.len() == b.len() && a.iter().all(|u| b.iter().any(|v| close(u, v, tol)))
}

/// Small MPS models exercising each row type and bound kind.
pub const MPS_FIXTURES: &[(&str, &str)] = &[
    (
        "triangle",
        "NAME TRI\nROWS\n N obj\n L c1\nCOLUMNS\n x obj 1 c1 1\n y obj 1 c1 1\nRHS\n rhs c1 1\nENDATA\n",
    ),
    (
        "pentagon",
        "NAME PENT\nROWS\n N obj\n L up1\n L up2\n G floor\nCOLUMNS\n x up1 -1 up2 1\n y up1 1 up2 1\n y floor 1\n\
         RHS\n rhs up1 1 up2 1\n rhs floor -1\nBOUNDS\n LO bnd x -1\n UP bnd x 1\n FR bnd y\nENDATA\n",
    ),
    (
        "fixed",
        "NAME FIX\nROWS\n N obj\n L cap\nCOLUMNS\n x cap 1\n y cap 1\n z cap 1\nRHS\n rhs cap 3\n\
         BOUNDS\n FX bnd z 2\nENDATA\n",
    ),
    (
        "minus_infinity",
        "NAME MI\nROWS\n N obj\n G low\n L diag\nCOLUMNS\n x low 1 diag -1\n y diag 1\nRHS\n rhs low -1 diag 1\n\
         BOUNDS\n MI bnd x\n UP bnd x 0\n PL bnd y\nENDATA\n",
    ),
    (
        "equality",
        "NAME EQ\nROWS\n N obj\n E sum\nCOLUMNS\n x obj 1 sum 1\n y sum 1\n z sum 1\nRHS\n rhs sum 1\n\
         BOUNDS\n UP bnd z 0.5\nENDATA\n",
    ),
];

/// Vertices of an MPS model read directly as `E x = f, G x ≤ h` in its own
/// variables.
pub fn mps_vertices(m: &polysample::io::MpsModel) -> Vec<Vec<f64>> {
    use polysample::io::{BoundKind, RowKind};
    let nv = m.columns.len();
    let mut lower = vec![0.0; nv];
    let mut upper = vec![f64::INFINITY; nv];
    for b in &m.bounds {
        match b.kind {
            BoundKind::Lo => lower[b.column] = b.value,
            BoundKind::Up => upper[b.column] = b.value,
            BoundKind::Fx => {
                lower[b.column] = b.value;
                upper[b.column] = b.value;
            }
            BoundKind::Fr => {
                lower[b.column] = f64::NEG_INFINITY;
                upper[b.column] = f64::INFINITY;
            }
            BoundKind::Mi => lower[b.column] = f64::NEG_INFINITY,
            BoundKind::Pl => upper[b.column] = f64::INFINITY,
        }
    }
    let mut rhs = vec![0.0; m.rows.len()];
    for &(r, v) in &m.rhs {
        rhs[r] = v;
    }
    let mut coef = DMatrix::zeros(m.rows.len(), nv);
    for &(r, c, v) in &m.entries {
        coef[(r, c)] = v;
    }
    let (mut eq, mut f, mut le, mut h) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (r, row) in m.rows.iter().enumerate() {
        let a: Vec<f64> = coef.row(r).iter().copied().collect();
        match row.kind {
            RowKind::N => {}
            RowKind::E => {
                eq.push(a);
                f.push(rhs[r]);
            }
            RowKind::L => {
                le.push(a);
                h.push(rhs[r]);
            }
            RowKind::G => {
                le.push(a.iter().map(|v| -v).collect());
                h.push(-rhs[r]);
            }
        }
    }
    for j in 0..nv {
        let mut e = vec![0.0; nv];
        if lower[j] == upper[j] {
            e[j] = 1.0;
            eq.push(e);
            f.push(lower[j]);
            continue;
        }
        if lower[j].is_finite() {
            e[j] = -1.0;
            le.push(e.clone());
            h.push(-lower[j]);
        }
        if upper[j].is_finite() {
            e[j] = 1.0;
            le.push(e);
            h.push(upper[j]);
        }
    }
    let to_matrix = |rows: &[Vec<f64>]| DMatrix::from_fn(rows.len(), nv, |i, j| rows[i][j]);
    vertices(&to_matrix(&eq), &f, &to_matrix(&le), &h)
}
