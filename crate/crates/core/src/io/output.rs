use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::invalid(format!("csv: {other:?}")),
    }
}

/// Samples as CSV, one row per sample, header `x0,x1,…`. Values carry 17
/// significant digits.
pub fn write_samples_csv<W: std::io::Write>(samples: &DMatrix<f64>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<String> = (0..samples.ncols()).map(|j| format!("x{j}")).collect();
    w.write_record(&header).map_err(csv_error)?;
    for row in samples.row_iter() {
        w.write_record(row.iter().map(|v| format!("{v:.16e}")))
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_samples_csv(samples: &DMatrix<f64>, path: &Path) -> Result<()> {
    write_samples_csv(samples, std::fs::File::create(path)?)
}

pub fn read_samples_csv<R: std::io::Read>(input: R) -> Result<DMatrix<f64>> {
    let mut r = csv::Reader::from_reader(input);
    let cols = r.headers().map_err(csv_error)?.len();
    let mut data = Vec::new();
    let mut rows = 0;
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_error)?;
        if rec.len() != cols {
            return Err(Error::parse(i + 2, format!("expected {cols} fields, found {}", rec.len())));
        }
        for field in rec.iter() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::parse(i + 2, format!("bad number {field:?}")))?;
            data.push(v);
        }
        rows += 1;
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

pub fn load_samples_csv(path: &Path) -> Result<DMatrix<f64>> {
    read_samples_csv(std::fs::File::open(path)?)
}

pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::ChainRng;

    #[test]
    fn empty_matrix_writes_header_only() {
        let mut buf = Vec::new();
        write_samples_csv(&DMatrix::zeros(0, 3), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "x0,x1,x2\n");
    }

    #[test]
    fn samples_round_trip_exactly() {
        let mut rng = ChainRng::new(1, 0);
        let m = DMatrix::from_fn(40, 4, |_, _| rng.gaussian() * 1e3f64.powf(rng.uniform() * 4.0 - 2.0));
        let mut buf = Vec::new();
        write_samples_csv(&m, &mut buf).unwrap();
        assert_eq!(read_samples_csv(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn report_json_has_fields() {
        let rep = crate::diagnostics::DiagnosticsReport {
            n_samples: 10,
            ess_per_coordinate: vec![5.0],
            ess_min: 5.0,
            degenerate_coordinates: vec![],
            ks_statistic: 0.1,
            ks_pvalue: 0.5,
            acceptance_rate: 0.3,
        };
        let dir = std::env::temp_dir().join(format!("polysample-json-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("report.json");
        save_json(&rep, &path).unwrap();
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        for key in ["ess_min", "ks_statistic", "ks_pvalue", "acceptance_rate", "ess_per_coordinate"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        std::fs::remove_dir_all(dir).unwrap();
    }
}
