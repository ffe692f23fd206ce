//! Free-format MPS subset: NAME, ROWS, COLUMNS, RHS, BOUNDS, ENDATA.
//!
//! RANGES sections and integrality markers are rejected. Bounds LO, UP, FX,
//! FR, MI and PL are understood; MI only removes the lower bound.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;
use crate::model::ConstrainedPolytope;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    N,
    E,
    L,
    G,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundKind {
    Lo,
    Up,
    Fx,
    Fr,
    Mi,
    Pl,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MpsRow {
    pub name: String,
    pub kind: RowKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MpsBound {
    pub kind: BoundKind,
    pub column: usize,
    pub value: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MpsModel {
    pub name: String,
    pub rows: Vec<MpsRow>,
    pub columns: Vec<String>,
    /// `(row, column, value)`
    pub entries: Vec<(usize, usize, f64)>,
    /// `(row, value)`
    pub rhs: Vec<(usize, f64)>,
    pub bounds: Vec<MpsBound>,
}

impl MpsModel {
    pub fn objective(&self) -> usize {
        self.rows
            .iter()
            .position(|r| r.kind == RowKind::N)
            .expect("parser guarantees an objective row")
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Rows,
    Columns,
    Rhs,
    Bounds,
    End,
}

fn number(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::parse(line, format!("bad number {tok:?}")))
}

pub fn parse_mps(text: &str) -> Result<MpsModel> {
    let mut m = MpsModel::default();
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut col_index: HashMap<String, usize> = HashMap::new();
    let mut seen_entries = std::collections::HashSet::new();
    let mut seen_rhs = std::collections::HashSet::new();
    let mut section = Section::None;
    let mut seen_sections = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        if !raw.starts_with(char::is_whitespace) {
            section = match tokens[0] {
                "NAME" => {
                    m.name = tokens.get(1).copied().unwrap_or("").to_string();
                    Section::None
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => Section::End,
                "RANGES" => return Err(Error::parse(line_no, "RANGES sections are not supported")),
                other => return Err(Error::parse(line_no, format!("unknown section {other:?}"))),
            };
            if section != Section::None {
                if seen_sections.contains(&tokens[0]) {
                    return Err(Error::parse(line_no, format!("repeated section {}", tokens[0])));
                }
                seen_sections.push(tokens[0]);
            }
            if section == Section::End {
                break;
            }
            continue;
        }
        match section {
            Section::None | Section::End => {
                return Err(Error::parse(line_no, "data outside a section"));
            }
            Section::Rows => {
                if tokens.len() != 2 {
                    return Err(Error::parse(line_no, "expected `type name`"));
                }
                let kind = match tokens[0] {
                    "N" => RowKind::N,
                    "E" => RowKind::E,
                    "L" => RowKind::L,
                    "G" => RowKind::G,
                    t => return Err(Error::parse(line_no, format!("unknown row type {t:?}"))),
                };
                if kind == RowKind::N && m.rows.iter().any(|r| r.kind == RowKind::N) {
                    return Err(Error::parse(line_no, "more than one objective row"));
                }
                let name = tokens[1].to_string();
                if row_index.insert(name.clone(), m.rows.len()).is_some() {
                    return Err(Error::parse(line_no, format!("duplicate row {name:?}")));
                }
                m.rows.push(MpsRow { name, kind });
            }
            Section::Columns => {
                if tokens.iter().any(|t| t.contains("MARKER")) {
                    return Err(Error::parse(line_no, "integrality markers are not supported"));
                }
                if tokens.len() != 3 && tokens.len() != 5 {
                    return Err(Error::parse(line_no, "expected `column row value [row value]`"));
                }
                let col = match col_index.get(tokens[0]) {
                    Some(&c) => c,
                    None => {
                        col_index.insert(tokens[0].to_string(), m.columns.len());
                        m.columns.push(tokens[0].to_string());
                        m.columns.len() - 1
                    }
                };
                for pair in tokens[1..].chunks(2) {
                    let row = *row_index
                        .get(pair[0])
                        .ok_or_else(|| Error::parse(line_no, format!("unknown row {:?}", pair[0])))?;
                    if !seen_entries.insert((row, col)) {
                        return Err(Error::parse(
                            line_no,
                            format!("duplicate entry for column {:?} in row {:?}", tokens[0], pair[0]),
                        ));
                    }
                    m.entries.push((row, col, number(pair[1], line_no)?));
                }
            }
            Section::Rhs => {
                // The RHS set name is optional: pairs come after it.
                let pairs = if tokens.len() % 2 == 1 { &tokens[1..] } else { &tokens[..] };
                if pairs.is_empty() || pairs.len() > 4 {
                    return Err(Error::parse(line_no, "expected `[set] row value [row value]`"));
                }
                for pair in pairs.chunks(2) {
                    let row = *row_index
                        .get(pair[0])
                        .ok_or_else(|| Error::parse(line_no, format!("unknown row {:?}", pair[0])))?;
                    if !seen_rhs.insert(row) {
                        return Err(Error::parse(line_no, format!("duplicate rhs for row {:?}", pair[0])));
                    }
                    m.rhs.push((row, number(pair[1], line_no)?));
                }
            }
            Section::Bounds => {
                let kind = match tokens[0] {
                    "LO" => BoundKind::Lo,
                    "UP" => BoundKind::Up,
                    "FX" => BoundKind::Fx,
                    "FR" => BoundKind::Fr,
                    "MI" => BoundKind::Mi,
                    "PL" => BoundKind::Pl,
                    t => return Err(Error::parse(line_no, format!("unsupported bound type {t:?}"))),
                };
                let valued = matches!(kind, BoundKind::Lo | BoundKind::Up | BoundKind::Fx);
                let rest = &tokens[1..];
                let expected = if valued { 2 } else { 1 };
                let rest = match rest.len() {
                    n if n == expected + 1 => &rest[1..],
                    n if n == expected => rest,
                    _ => return Err(Error::parse(line_no, "malformed bound")),
                };
                let column = *col_index
                    .get(rest[0])
                    .ok_or_else(|| Error::parse(line_no, format!("unknown column {:?}", rest[0])))?;
                let value = if valued { number(rest[1], line_no)? } else { 0.0 };
                m.bounds.push(MpsBound { kind, column, value });
            }
        }
    }
    for required in ["ROWS", "COLUMNS", "RHS"] {
        if !seen_sections.contains(&required) {
            return Err(Error::parse(0, format!("missing {required} section")));
        }
    }
    if !m.rows.iter().any(|r| r.kind == RowKind::N) {
        return Err(Error::parse(0, "no objective row"));
    }
    Ok(m)
}

pub fn load_mps(path: &Path) -> Result<MpsModel> {
    parse_mps(&std::fs::read_to_string(path)?)
}

/// How an original variable is recovered from the constrained form:
/// `value = offset + sign · x[index]`.
#[derive(Clone, Debug, PartialEq)]
pub struct VariableMap {
    pub name: String,
    pub index: usize,
    pub offset: f64,
    pub sign: f64,
}

#[derive(Clone, Debug)]
pub struct MpsConversion {
    pub polytope: ConstrainedPolytope,
    pub variables: Vec<VariableMap>,
}

impl MpsConversion {
    /// Original variable values at a point of the constrained form.
    pub fn recover(&self, x: &[f64]) -> Vec<f64> {
        self.variables
            .iter()
            .map(|v| v.offset + v.sign * x[v.index])
            .collect()
    }
}

enum Placement {
    /// Sign-free, copied as is.
    Free,
    /// `x = l + y`, `y ≥ 0`, optionally with `y + w = u − l`.
    Lower { l: f64, up: Option<f64> },
    /// `x = u − y`, `y ≥ 0`.
    Upper { u: f64 },
}

/// Converts to `A x = b` with sign-free variables first and nonnegative ones
/// last. Inequality rows get slacks, finite upper bounds get a bound row and
/// a slack, fixed variables stay sign-free with an equality row.
pub fn mps_to_constrained(m: &MpsModel) -> Result<MpsConversion> {
    let nv = m.columns.len();
    let mut lo = vec![0.0f64; nv];
    let mut up = vec![f64::INFINITY; nv];
    let mut fixed = vec![None; nv];
    for b in &m.bounds {
        let j = b.column;
        match b.kind {
            BoundKind::Lo => lo[j] = b.value,
            BoundKind::Up => up[j] = b.value,
            BoundKind::Fx => fixed[j] = Some(b.value),
            BoundKind::Fr => {
                lo[j] = f64::NEG_INFINITY;
                up[j] = f64::INFINITY;
            }
            BoundKind::Mi => lo[j] = f64::NEG_INFINITY,
            BoundKind::Pl => up[j] = f64::INFINITY,
        }
    }
    let placements: Vec<Placement> = (0..nv)
        .map(|j| {
            if fixed[j].is_some() {
                return Ok(Placement::Free);
            }
            if lo[j] > up[j] {
                return Err(Error::EmptyPolytope(format!(
                    "variable {:?} has bounds [{}, {}]",
                    m.columns[j], lo[j], up[j]
                )));
            }
            Ok(match (lo[j].is_finite(), up[j].is_finite()) {
                (false, false) => Placement::Free,
                (true, false) => Placement::Lower { l: lo[j], up: None },
                (true, true) => Placement::Lower { l: lo[j], up: Some(up[j]) },
                (false, true) => Placement::Upper { u: up[j] },
            })
        })
        .collect::<Result<_>>()?;

    let objective = m.objective();
    let rows: Vec<usize> = (0..m.rows.len()).filter(|&r| r != objective).collect();
    let mut row_pos = vec![usize::MAX; m.rows.len()];
    for (i, &r) in rows.iter().enumerate() {
        row_pos[r] = i;
    }
    let inequality_rows: Vec<usize> = rows
        .iter()
        .copied()
        .filter(|&r| m.rows[r].kind != RowKind::E)
        .collect();
    let bounded: Vec<usize> = (0..nv)
        .filter(|&j| matches!(placements[j], Placement::Lower { up: Some(_), .. }))
        .collect();
    let fixed_vars: Vec<usize> = (0..nv).filter(|&j| fixed[j].is_some()).collect();

    // Column layout: free, shifted originals, bound slacks, row slacks.
    let free: Vec<usize> = (0..nv).filter(|&j| matches!(placements[j], Placement::Free)).collect();
    let signed: Vec<usize> = (0..nv).filter(|&j| !matches!(placements[j], Placement::Free)).collect();
    let mut col_of = vec![0usize; nv];
    for (pos, &j) in free.iter().chain(&signed).enumerate() {
        col_of[j] = pos;
    }
    let bound_slack0 = nv;
    let row_slack0 = bound_slack0 + bounded.len();
    let d = row_slack0 + inequality_rows.len();
    let n_rows = rows.len() + bounded.len() + fixed_vars.len();

    let mut b = vec![0.0; n_rows];
    for &(r, v) in &m.rhs {
        if r != objective {
            b[row_pos[r]] = v;
        }
    }
    let mut trip = Vec::new();
    for &(r, j, v) in &m.entries {
        if r == objective {
            continue;
        }
        let i = row_pos[r];
        match placements[j] {
            Placement::Free => trip.push((i, col_of[j], v)),
            Placement::Lower { l, .. } => {
                trip.push((i, col_of[j], v));
                b[i] -= v * l;
            }
            Placement::Upper { u } => {
                trip.push((i, col_of[j], -v));
                b[i] -= v * u;
            }
        }
    }
    for (s, &r) in inequality_rows.iter().enumerate() {
        let sign = if m.rows[r].kind == RowKind::L { 1.0 } else { -1.0 };
        trip.push((row_pos[r], row_slack0 + s, sign));
    }
    for (s, &j) in bounded.iter().enumerate() {
        let i = rows.len() + s;
        if let Placement::Lower { l, up: Some(u) } = placements[j] {
            trip.push((i, col_of[j], 1.0));
            trip.push((i, bound_slack0 + s, 1.0));
            b[i] = u - l;
        }
    }
    for (s, &j) in fixed_vars.iter().enumerate() {
        let i = rows.len() + bounded.len() + s;
        trip.push((i, col_of[j], 1.0));
        b[i] = fixed[j].expect("fixed");
    }
    let a = SparseMatrix::from_triplets(n_rows, d, trip)?;
    let polytope = ConstrainedPolytope::new(a, b, d - free.len())?;
    let variables = (0..nv)
        .map(|j| {
            let (offset, sign) = match placements[j] {
                Placement::Free => (0.0, 1.0),
                Placement::Lower { l, .. } => (l, 1.0),
                Placement::Upper { u } => (u, -1.0),
            };
            VariableMap {
                name: m.columns[j].clone(),
                index: col_of[j],
                offset,
                sign,
            }
        })
        .collect();
    Ok(MpsConversion { polytope, variables })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_BY_THREE: &str = "\
NAME          TINY
ROWS
 N  COST
 E  R1
 L  R2
COLUMNS
    X1        COST         1.0   R1           1.0
    X1        R2           2.0
    X2        R1           1.0   R2          -1.0
    X3        R1           1.0
RHS
    RHS       R1           4.0   R2           3.0
BOUNDS
 UP BND       X3           2.5
ENDATA
";

    #[test]
    fn single_record_fixture() {
        let m = parse_mps("ROWS\n N obj\nCOLUMNS\n x obj 1\nRHS\nENDATA\n").unwrap();
        assert_eq!(m.rows.len(), 1);
        assert_eq!(m.entries, vec![(0, 0, 1.0)]);
        assert_eq!(m.columns, vec!["x".to_string()]);
    }

    #[test]
    fn hand_parsed_table() {
        let m = parse_mps(TWO_BY_THREE).unwrap();
        assert_eq!(m.name, "TINY");
        let kinds: Vec<_> = m.rows.iter().map(|r| r.kind).collect();
        assert_eq!(kinds, vec![RowKind::N, RowKind::E, RowKind::L]);
        assert_eq!(m.columns, vec!["X1", "X2", "X3"]);
        assert_eq!(
            m.entries,
            vec![(0, 0, 1.0), (1, 0, 1.0), (2, 0, 2.0), (1, 1, 1.0), (2, 1, -1.0), (1, 2, 1.0)]
        );
        assert_eq!(m.rhs, vec![(1, 4.0), (2, 3.0)]);
        assert_eq!(m.bounds, vec![MpsBound { kind: BoundKind::Up, column: 2, value: 2.5 }]);
    }

    #[test]
    fn rejected_inputs() {
        let cases = [
            ("ROWS\n N c\nRANGES\n", "RANGES"),
            ("ROWS\n N c\nOBJSENSE\n", "unknown section"),
            ("ROWS\n N c\nCOLUMNS\n x r 1\nRHS\nENDATA\n", "unknown row"),
            ("ROWS\n N c\n E r\nCOLUMNS\n x r 1\n x r 2\nRHS\nENDATA\n", "duplicate entry"),
            ("ROWS\n N c\n E r\n E r\nCOLUMNS\nRHS\nENDATA\n", "duplicate row"),
            ("ROWS\n N c\nCOLUMNS\n M 'MARKER' 'INTORG'\nRHS\nENDATA\n", "marker"),
            ("ROWS\n N c\nCOLUMNS\n x c 1\nENDATA\n", "missing RHS"),
            ("ROWS\n E r\nCOLUMNS\nRHS\nENDATA\n", "objective"),
            ("ROWS\n N c\nCOLUMNS\n x c 1\nRHS\nBOUNDS\n UP B y 1\nENDATA\n", "unknown column"),
        ];
        for (text, needle) in cases {
            match parse_mps(text) {
                Err(Error::Parse { message, .. }) => assert!(message.contains(needle), "{message}"),
                other => panic!("{text:?} gave {other:?}"),
            }
        }
    }

    #[test]
    fn equality_model_keeps_its_matrix() {
        let text = "ROWS\n N c\n E r1\n E r2\nCOLUMNS\n a r1 1 r2 2\n b r1 1\n c r2 1\nRHS\n rhs r1 1 r2 2\nENDATA\n";
        let conv = mps_to_constrained(&parse_mps(text).unwrap()).unwrap();
        let p = &conv.polytope;
        assert_eq!((p.d(), p.k(), p.n()), (3, 3, 2));
        assert_eq!(p.a().to_dense(), nalgebra::DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 0.0, 2.0, 0.0, 1.0]));
        assert_eq!(p.b(), &[1.0, 2.0]);
    }

    #[test]
    fn less_equal_row_gets_a_slack() {
        let text = "ROWS\n N c\n L r\nCOLUMNS\n x r 1\nRHS\n r 1\nENDATA\n";
        let conv = mps_to_constrained(&parse_mps(text).unwrap()).unwrap();
        let p = &conv.polytope;
        assert_eq!((p.d(), p.k(), p.n()), (2, 2, 1));
        assert_eq!(p.a().to_dense(), nalgebra::DMatrix::from_row_slice(1, 2, &[1.0, 1.0]));
    }

    #[test]
    fn bound_kinds_map_back() {
        // x1 free, x2 ≤ 3 only, x3 ∈ [1, 2], x4 = 5, x5 ≥ −1
        let text = "\
ROWS
 N c
 G r
COLUMNS
 x1 r 1
 x2 r 1
 x3 r 1
 x4 r 1
 x5 r 1
RHS
 r 0
BOUNDS
 FR B x1
 MI B x2
 UP B x2 3
 LO B x3 1
 UP B x3 2
 FX B x4 5
 LO B x5 -1
ENDATA
";
        let conv = mps_to_constrained(&parse_mps(text).unwrap()).unwrap();
        let p = &conv.polytope;
        // free: x1, x4; signed: x2, x3, x5; bound slack for x3; row slack
        assert_eq!(p.d(), 7);
        assert_eq!(p.lead(), 2);
        assert_eq!(p.n(), 3);
        let original = [0.5, 2.0, 1.5, 5.0, 0.0];
        // build the matching constrained point
        let mut x = vec![0.0; 7];
        for (v, val) in conv.variables.iter().zip(original) {
            x[v.index] = (val - v.offset) / v.sign;
        }
        x[5] = 2.0 - 1.5; // bound slack of x3
        x[6] = original.iter().sum::<f64>(); // surplus of the G row
        assert!(p.residual(&x) < 1e-12, "{}", p.residual(&x));
        assert!(p.membership(&x, false));
        assert_eq!(conv.recover(&x), original.to_vec());
    }

    #[test]
    fn crossed_bounds_are_empty() {
        let text = "ROWS\n N c\n E r\nCOLUMNS\n x r 1\nRHS\nBOUNDS\n UP B x -1\nENDATA\n";
        assert!(matches!(
            mps_to_constrained(&parse_mps(text).unwrap()),
            Err(Error::EmptyPolytope(_))
        ));
    }
}
