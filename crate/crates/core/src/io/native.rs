//! Plain-text polytope files.
//!
//! ```text
//! #form K2
//! #dims 3 1 3
//! #A
//! 0 0 1
//! 0 1 1
//! 0 2 1
//! #b
//! 1
//! ```
//!
//! `#dims` is `d n k`: variables, equality rows and nonnegative (trailing)
//! variables for `K2`; dimension, `0` and inequality rows for `K1`. Matrix
//! entries are 0-indexed `row col value` triplets. Values are written with
//! Rust's shortest round-trip formatting, so reading back is exact. Blank
//! lines and lines starting with `%` are ignored.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;
use crate::model::{ConstrainedPolytope, FullDimPolytope};

#[derive(Clone, Debug, PartialEq)]
pub enum PolytopeFile {
    /// `Ã v ≤ b̃`
    Full(FullDimPolytope),
    /// `A x = b`, trailing `k` coordinates nonnegative
    Constrained(ConstrainedPolytope),
}

pub fn write_constrained(p: &ConstrainedPolytope) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "#form K2\n#dims {} {} {}\n#A", p.d(), p.n(), p.k());
    let mut trip: Vec<_> = p.a().triplets().collect();
    trip.sort_by_key(|&(i, j, _)| (i, j));
    for (i, j, v) in trip {
        let _ = writeln!(out, "{i} {j} {v}");
    }
    out.push_str("#b\n");
    for v in p.b() {
        let _ = writeln!(out, "{v}");
    }
    out
}

pub fn write_full(p: &FullDimPolytope) -> String {
    let a = p.a();
    let mut out = String::new();
    let _ = writeln!(out, "#form K1\n#dims {} 0 {}\n#A", a.ncols(), a.nrows());
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let v = a[(i, j)];
            if v != 0.0 {
                let _ = writeln!(out, "{i} {j} {v}");
            }
        }
    }
    out.push_str("#b\n");
    for v in p.b().iter() {
        let _ = writeln!(out, "{v}");
    }
    out
}

pub fn write_polytope(p: &PolytopeFile) -> String {
    match p {
        PolytopeFile::Full(f) => write_full(f),
        PolytopeFile::Constrained(c) => write_constrained(c),
    }
}

#[derive(PartialEq)]
enum Section {
    Start,
    A,
    B,
}

pub fn read_polytope(text: &str) -> Result<PolytopeFile> {
    let mut form: Option<String> = None;
    let mut dims: Option<(usize, usize, usize)> = None;
    let mut trip = Vec::new();
    let mut b = Vec::new();
    let mut section = Section::Start;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let mut words = rest.split_whitespace();
            match words.next() {
                Some("form") => {
                    let f = words.next().ok_or_else(|| Error::parse(line_no, "missing form tag"))?;
                    if f != "K1" && f != "K2" {
                        return Err(Error::parse(line_no, format!("unknown form {f:?}")));
                    }
                    form = Some(f.to_string());
                }
                Some("dims") => {
                    let v: Vec<usize> = words
                        .map(|w| w.parse().map_err(|_| Error::parse(line_no, format!("bad size {w:?}"))))
                        .collect::<Result<_>>()?;
                    if v.len() != 3 {
                        return Err(Error::parse(line_no, "expected #dims d n k"));
                    }
                    dims = Some((v[0], v[1], v[2]));
                }
                Some("A") => section = Section::A,
                Some("b") => section = Section::B,
                other => {
                    return Err(Error::parse(line_no, format!("unknown section {other:?}")));
                }
            }
            continue;
        }
        match section {
            Section::Start => return Err(Error::parse(line_no, "data before #A or #b")),
            Section::A => {
                let w: Vec<&str> = line.split_whitespace().collect();
                if w.len() != 3 {
                    return Err(Error::parse(line_no, "expected `row col value`"));
                }
                let i: usize = w[0].parse().map_err(|_| Error::parse(line_no, "bad row index"))?;
                let j: usize = w[1].parse().map_err(|_| Error::parse(line_no, "bad column index"))?;
                let v: f64 = w[2].parse().map_err(|_| Error::parse(line_no, "bad value"))?;
                trip.push((i, j, v, line_no));
            }
            Section::B => {
                let v: f64 = line.parse().map_err(|_| Error::parse(line_no, "bad value"))?;
                b.push(v);
            }
        }
    }
    let form = form.ok_or_else(|| Error::parse(0, "missing #form"))?;
    let (d, n, k) = dims.ok_or_else(|| Error::parse(0, "missing #dims"))?;
    let rows = if form == "K1" { k } else { n };
    for &(i, j, _, line_no) in &trip {
        if i >= rows || j >= d {
            return Err(Error::parse(line_no, format!("entry ({i}, {j}) outside {rows}x{d}")));
        }
    }
    if b.len() != rows {
        return Err(Error::parse(0, format!("expected {rows} values in #b, found {}", b.len())));
    }
    if form == "K1" {
        if n != 0 {
            return Err(Error::parse(0, "K1 files have n = 0"));
        }
        let mut a = DMatrix::zeros(k, d);
        for (i, j, v, line_no) in trip {
            if a[(i, j)] != 0.0 {
                return Err(Error::parse(line_no, format!("duplicate entry ({i}, {j})")));
            }
            a[(i, j)] = v;
        }
        Ok(PolytopeFile::Full(FullDimPolytope::new(a, DVector::from_vec(b))?))
    } else {
        let mut seen = std::collections::HashSet::new();
        for &(i, j, _, line_no) in &trip {
            if !seen.insert((i, j)) {
                return Err(Error::parse(line_no, format!("duplicate entry ({i}, {j})")));
            }
        }
        let a = SparseMatrix::from_triplets(n, d, trip.into_iter().map(|(i, j, v, _)| (i, j, v)))?;
        Ok(PolytopeFile::Constrained(ConstrainedPolytope::new(a, b, k)?))
    }
}

pub fn load_polytope(path: &Path) -> Result<PolytopeFile> {
    read_polytope(&std::fs::read_to_string(path)?)
}

pub fn save_polytope(p: &PolytopeFile, path: &Path) -> Result<()> {
    std::fs::write(path, write_polytope(p))?;
    Ok(())
}
