use super::{parse_f64, DataError, Dataset, FeatureSchema};
use ndarray::Array2;
use std::path::Path;

const N_FEATURES: usize = 30;

pub(crate) fn open_csv(path: &Path) -> Result<csv::Reader<std::fs::File>, DataError> {
    let file = std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file))
}

/// Load the Wisconsin Diagnostic Breast Cancer table.
///
/// Expected layout is `id, diagnosis, <30 numeric features>` with a header
/// row; feature names and order are taken from the header. Diagnosis `M`
/// maps to label 1.
pub fn load_breast_cancer(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let csv_err = |source| DataError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut rdr = open_csv(path)?;
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.len() != N_FEATURES + 2 {
        return Err(DataError::ColumnCount {
            path: path.to_path_buf(),
            line: 1,
            expected: N_FEATURES + 2,
            found: header.len(),
        });
    }
    let names: Vec<String> = header.iter().skip(2).map(|s| s.trim().to_string()).collect();

    let mut values = Vec::new();
    let mut y = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != N_FEATURES + 2 {
            return Err(DataError::ColumnCount {
                path: path.to_path_buf(),
                line,
                expected: N_FEATURES + 2,
                found: rec.len(),
            });
        }
        let label = match rec[1].trim() {
            "M" => 1,
            "B" => 0,
            other => {
                return Err(DataError::BadCell {
                    path: path.to_path_buf(),
                    line,
                    column: header[1].to_string(),
                    value: other.to_string(),
                })
            }
        };
        for (j, raw) in rec.iter().enumerate().skip(2) {
            let v = parse_f64(raw).ok_or_else(|| DataError::BadCell {
                path: path.to_path_buf(),
                line,
                column: header[j].to_string(),
                value: raw.to_string(),
            })?;
            values.push(v);
        }
        y.push(label);
    }
    let n = y.len();
    let x = Array2::from_shape_vec((n, N_FEATURES), values)
        .map_err(|e| DataError::Invalid(e.to_string()))?;
    Dataset::new("breast_cancer", x, y, FeatureSchema::numeric(names)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn header() -> String {
        let mut h = String::from("id,diagnosis");
        for j in 0..N_FEATURES {
            h.push_str(&format!(",f{j}"));
        }
        h
    }

    fn row(id: usize, diag: &str) -> String {
        let mut r = format!("{id},{diag}");
        for j in 0..N_FEATURES {
            r.push_str(&format!(",{}", j as f64 + id as f64 * 0.5));
        }
        r
    }

    fn write(lines: &[String]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "{}", lines.join("\n")).unwrap();
        f
    }

    #[test]
    fn parses_small_file() {
        let f = write(&[header(), row(1, "M"), row(2, "B"), row(3, "B")]);
        let ds = load_breast_cancer(f.path()).unwrap();
        assert_eq!(ds.n_rows(), 3);
        assert_eq!(ds.n_features(), 30);
        assert_eq!(ds.y, vec![1, 0, 0]);
        assert_eq!(ds.schema.names[0], "f0");
        assert_eq!(ds.x[[1, 2]], 3.0);
    }

    #[test]
    fn non_numeric_cell_is_reported() {
        let bad = row(2, "B").replacen(",1,", ",abc,", 1);
        let f = write(&[header(), row(1, "M"), bad]);
        match load_breast_cancer(f.path()) {
            Err(DataError::BadCell { line, column, value, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(column, "f0");
                assert_eq!(value, "abc");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_column_count() {
        let short = "5,M,1.0,2.0".to_string();
        let f = write(&[header(), row(1, "M"), short]);
        assert!(matches!(
            load_breast_cancer(f.path()),
            Err(DataError::ColumnCount { line: 3, found: 4, .. })
        ));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            load_breast_cancer("/nonexistent/wdbc.csv"),
            Err(DataError::Io { .. })
        ));
    }
}
