use super::wdbc::open_csv;
use super::{parse_f64, DataError, Dataset, FeatureKind, FeatureSchema};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};
use std::path::Path;

/// Which covariate set to extract from the ProPublica file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompasCovariates {
    /// sex, age, race, juvenile felony/misdemeanor/other counts,
    /// priors count, charge degree.
    #[default]
    Core,
    /// `Core` plus the banded `age_cat` column.
    CoreWithAgeCategory,
}

#[derive(Clone, Copy)]
enum Col {
    Num(&'static str),
    Cat(&'static str),
}

impl CompasCovariates {
    fn columns(self) -> Vec<Col> {
        use Col::*;
        let mut cols = vec![Cat("sex"), Num("age")];
        if self == CompasCovariates::CoreWithAgeCategory {
            cols.push(Cat("age_cat"));
        }
        cols.extend([
            Cat("race"),
            Num("juv_fel_count"),
            Num("juv_misd_count"),
            Num("juv_other_count"),
            Num("priors_count"),
            Cat("c_charge_degree"),
        ]);
        cols
    }
}

const FILTER_COLUMNS: [&str; 4] = [
    "days_b_screening_arrest",
    "is_recid",
    "c_charge_degree",
    "score_text",
];
const TARGET: &str = "two_year_recid";
const SCREENING_WINDOW: f64 = 30.0;

pub fn load_compas(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    load_compas_with(path, CompasCovariates::default())
}

/// Load the ProPublica two-year COMPAS file with the standard filters:
/// screening window of ±30 days, `is_recid != -1`, charge degree not `O`,
/// and a present score text. Categorical covariates are one-hot encoded
/// over the levels that survive filtering, in sorted order.
pub fn load_compas_with(
    path: impl AsRef<Path>,
    covariates: CompasCovariates,
) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let csv_err = |source| DataError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut rdr = open_csv(path)?;
    let header = rdr.headers().map_err(csv_err)?.clone();

    // the ProPublica file repeats some column names; the first one wins
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, h) in header.iter().enumerate() {
        index.entry(h.trim()).or_insert(i);
    }
    let columns = covariates.columns();
    let wanted = FILTER_COLUMNS
        .iter()
        .copied()
        .chain([TARGET])
        .chain(columns.iter().map(|c| match c {
            Col::Num(n) | Col::Cat(n) => *n,
        }));
    let mut missing: Vec<String> = Vec::new();
    for w in wanted {
        if !index.contains_key(w) && !missing.iter().any(|m| m == w) {
            missing.push(w.to_string());
        }
    }
    if !missing.is_empty() {
        return Err(DataError::MissingColumns {
            path: path.to_path_buf(),
            missing,
        });
    }
    let idx = |name: &str| index[name];

    let bad = |line: u64, column: &str, value: &str| DataError::BadCell {
        path: path.to_path_buf(),
        line,
        column: column.to_string(),
        value: value.to_string(),
    };

    // raw retained rows: per covariate either a number or a category level
    let mut rows: Vec<Vec<Result<f64, String>>> = Vec::new();
    let mut y = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        let get = |name: &str| rec.get(idx(name)).map(str::trim).unwrap_or("");

        let days = get("days_b_screening_arrest");
        let in_window = if days.is_empty() {
            false
        } else {
            let d = parse_f64(days).ok_or_else(|| bad(line, "days_b_screening_arrest", days))?;
            (-SCREENING_WINDOW..=SCREENING_WINDOW).contains(&d)
        };
        let is_recid = get("is_recid");
        let recid_known = !is_recid.is_empty() && is_recid != "-1";
        let degree = get("c_charge_degree");
        let degree_ok = !degree.is_empty() && degree != "O";
        let score = get("score_text");
        let score_ok = !score.is_empty() && score != "N/A";
        if !(in_window && recid_known && degree_ok && score_ok) {
            continue;
        }

        let target = match get(TARGET) {
            "0" => 0,
            "1" => 1,
            other => return Err(bad(line, TARGET, other)),
        };
        let mut row = Vec::with_capacity(columns.len());
        for c in &columns {
            match *c {
                Col::Num(name) => {
                    let raw = get(name);
                    row.push(Ok(parse_f64(raw).ok_or_else(|| bad(line, name, raw))?));
                }
                Col::Cat(name) => {
                    let raw = get(name);
                    if raw.is_empty() {
                        return Err(bad(line, name, raw));
                    }
                    row.push(Err(raw.to_string()));
                }
            }
        }
        rows.push(row);
        y.push(target);
    }
    if rows.is_empty() {
        return Err(DataError::Empty("compas".into()));
    }

    // levels observed among retained rows only
    let levels: Vec<Vec<String>> = columns
        .iter()
        .enumerate()
        .map(|(j, c)| match c {
            Col::Num(_) => Vec::new(),
            Col::Cat(_) => rows
                .iter()
                .filter_map(|r| r[j].as_ref().err().cloned())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect(),
        })
        .collect();

    let mut names = Vec::new();
    let mut kinds = Vec::new();
    for (c, lv) in columns.iter().zip(&levels) {
        match *c {
            Col::Num(name) => {
                names.push(name.to_string());
                kinds.push(FeatureKind::Numeric);
            }
            Col::Cat(name) => {
                for l in lv {
                    names.push(format!("{name}={l}"));
                    kinds.push(FeatureKind::OneHot {
                        source_column: name.to_string(),
                        level: l.clone(),
                    });
                }
            }
        }
    }

    let d = names.len();
    let mut x = Array2::zeros((rows.len(), d));
    for (i, row) in rows.iter().enumerate() {
        let mut j = 0;
        for (cell, lv) in row.iter().zip(&levels) {
            match cell {
                Ok(v) => {
                    x[[i, j]] = *v;
                    j += 1;
                }
                Err(level) => {
                    let pos = lv.binary_search(level).expect("level collected above");
                    x[[i, j + pos]] = 1.0;
                    j += lv.len();
                }
            }
        }
    }
    Dataset::new("compas", x, y, FeatureSchema::new(names, kinds)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    const HEADER: &str = "id,sex,age,age_cat,race,juv_fel_count,decile_score,juv_misd_count,juv_other_count,priors_count,days_b_screening_arrest,c_charge_degree,is_recid,score_text,priors_count,two_year_recid";

    fn row(sex: &str, age: u32, race: &str, days: &str, degree: &str, recid: &str, y: u8) -> String {
        format!("1,{sex},{age},25 - 45,{race},0,3,1,0,2,{days},{degree},{recid},Low,99,{y}")
    }

    fn write(lines: &[String]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "{HEADER}").unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    #[test]
    fn filters_charge_degree_and_encodes_survivors() {
        let f = write(&[
            row("Male", 30, "Caucasian", "0", "F", "1", 1),
            row("Female", 40, "Hispanic", "-2", "M", "0", 0),
            row("Male", 50, "Asian", "1", "O", "0", 0),
        ]);
        let ds = load_compas(f.path()).unwrap();
        assert_eq!(ds.n_rows(), 2);
        assert!(ds.schema.names.contains(&"c_charge_degree=F".to_string()));
        assert!(ds.schema.names.contains(&"c_charge_degree=M".to_string()));
        assert!(!ds.schema.names.iter().any(|n| n == "c_charge_degree=O"));
        assert!(!ds.schema.names.iter().any(|n| n == "race=Asian"));
        // first priors_count column wins over the duplicate
        let p = ds.schema.names.iter().position(|n| n == "priors_count").unwrap();
        assert_eq!(ds.x[[0, p]], 2.0);
        assert_eq!(ds.y, vec![1, 0]);
    }

    #[test]
    fn all_rows_outside_window_is_empty() {
        let rows: Vec<String> = (0..5)
            .map(|i| row("Male", 30, "Other", &format!("{}", 31 + i), "F", "1", 1))
            .collect();
        let f = write(&rows);
        assert!(matches!(load_compas(f.path()), Err(DataError::Empty(_))));
    }

    #[test]
    fn missing_window_and_unknown_recid_are_dropped() {
        let f = write(&[
            row("Male", 30, "Other", "", "F", "1", 1),
            row("Male", 31, "Other", "3", "F", "-1", 1),
            row("Male", 32, "Other", "3", "F", "0", 0),
        ]);
        let ds = load_compas(f.path()).unwrap();
        assert_eq!(ds.n_rows(), 1);
    }

    #[test]
    fn missing_columns_are_listed() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "id,sex,age\n1,Male,30").unwrap();
        match load_compas(f.path()) {
            Err(DataError::MissingColumns { missing, .. }) => {
                assert!(missing.contains(&"race".to_string()));
                assert!(missing.contains(&"two_year_recid".to_string()));
                assert!(!missing.contains(&"age".to_string()));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn age_category_variant_adds_columns() {
        let f = write(&[
            row("Male", 30, "Caucasian", "0", "F", "1", 1),
            row("Female", 40, "Hispanic", "-2", "M", "0", 0),
        ]);
        let a = load_compas_with(f.path(), CompasCovariates::Core).unwrap();
        let b = load_compas_with(f.path(), CompasCovariates::CoreWithAgeCategory).unwrap();
        assert_eq!(b.n_features(), a.n_features() + 1);
        assert!(b.schema.names.contains(&"age_cat=25 - 45".to_string()));
    }
}
