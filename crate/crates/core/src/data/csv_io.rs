//! CSV ingestion and export: UTF-8, comma-separated, first row header,
//! decimal point notation.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::error::DataError;
use crate::numeric::{Matrix, RngStream};
use crate::scalar::{lit, Scalar};

use super::dataset::{ColumnInfo, ColumnKind, Dataset, Split};

/// Ingestion configuration.
#[derive(Debug, Clone)]
pub struct IngestOptions {
    /// Row cap applied after missing-value filtering.
    pub max_rows: Option<usize>,
    /// Fraction of rows tagged Context (the rest are Test).
    pub context_fraction: f64,
    /// Seed of the permutation assigning rows to splits.
    pub split_seed: u64,
    /// Optional column holding explicit split tags ("context" / "test").
    pub split_column: Option<String>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            max_rows: None,
            context_fraction: 0.5,
            split_seed: 0,
            split_column: None,
        }
    }
}

fn is_missing(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty() || t == "?" || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan")
}

/// Ingest a CSV file: numeric columns z-scored, categorical columns one-hot
/// encoded, labels mapped onto {−1,+1} via the positive-label token. Rows
/// with missing cells are dropped and counted.
pub fn ingest_csv<T: Scalar>(
    path: &Path,
    label_column: &str,
    positive_label: &str,
    options: &IngestOptions,
) -> Result<Dataset<T>, DataError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.is_empty() {
        return Err(DataError::EmptyInput(path.display().to_string()));
    }
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| DataError::MissingLabelColumn(label_column.to_string()))?;
    let split_idx = match &options.split_column {
        Some(name) => Some(
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| DataError::MissingLabelColumn(name.clone()))?,
        ),
        None => None,
    };

    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut dropped = 0usize;
    for record in reader.records() {
        let record = record?;
        let cells: Vec<String> = record.iter().map(|c| c.trim().to_string()).collect();
        if cells.len() != headers.len() || cells.iter().any(|c| is_missing(c)) {
            dropped += 1;
            continue;
        }
        rows.push(cells);
        if let Some(cap) = options.max_rows {
            if rows.len() >= cap {
                break;
            }
        }
    }
    if rows.is_empty() {
        return Err(DataError::EmptyInput(format!(
            "{}: no complete rows",
            path.display()
        )));
    }

    let n = rows.len();
    let feature_idx: Vec<usize> = (0..headers.len())
        .filter(|&j| j != label_idx && Some(j) != split_idx)
        .collect();

    // Column typing: numeric iff every cell parses as f64.
    let mut numeric_col: Vec<bool> = Vec::new();
    for &j in &feature_idx {
        numeric_col.push(rows.iter().all(|r| r[j].parse::<f64>().is_ok()));
    }

    // Distinct values per categorical column, sorted for determinism.
    let mut categories: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for (k, &j) in feature_idx.iter().enumerate() {
        if !numeric_col[k] {
            let mut vals: Vec<String> = rows.iter().map(|r| r[j].clone()).collect();
            vals.sort();
            vals.dedup();
            categories.insert(j, vals);
        }
    }

    let mut columns: Vec<ColumnInfo> = Vec::new();
    for (k, &j) in feature_idx.iter().enumerate() {
        if numeric_col[k] {
            columns.push(ColumnInfo {
                name: headers[j].clone(),
                kind: ColumnKind::Numeric,
                zero_variance: false,
            });
        } else {
            for value in &categories[&j] {
                columns.push(ColumnInfo {
                    name: format!("{}={}", headers[j], value),
                    kind: ColumnKind::OneHot {
                        source: headers[j].clone(),
                        value: value.clone(),
                    },
                    zero_variance: false,
                });
            }
        }
    }

    let width = columns.len();
    let mut raw = Matrix::<T>::zeros(n, width);
    for (i, row) in rows.iter().enumerate() {
        let mut out_j = 0usize;
        for (k, &j) in feature_idx.iter().enumerate() {
            if numeric_col[k] {
                let v: f64 = row[j].parse().expect("validated numeric");
                raw[(i, out_j)] = lit(v);
                out_j += 1;
            } else {
                for value in &categories[&j] {
                    raw[(i, out_j)] = if &row[j] == value { T::one() } else { T::zero() };
                    out_j += 1;
                }
            }
        }
    }

    // Label mapping: binary column required.
    let mut distinct_labels: Vec<String> = rows.iter().map(|r| r[label_idx].clone()).collect();
    distinct_labels.sort();
    distinct_labels.dedup();
    if distinct_labels.len() > 2 || !distinct_labels.iter().any(|l| l == positive_label) {
        return Err(DataError::NonBinaryLabels {
            count: distinct_labels.len(),
        });
    }
    let labels: Vec<i8> = rows
        .iter()
        .map(|r| if r[label_idx] == positive_label { 1 } else { -1 })
        .collect();

    let splits: Vec<Split> = match split_idx {
        Some(j) => rows
            .iter()
            .map(|r| {
                if r[j].eq_ignore_ascii_case("test") {
                    Split::Test
                } else {
                    Split::Context
                }
            })
            .collect(),
        None => {
            let mut tags = vec![Split::Test; n];
            let n_ctx = ((options.context_fraction * n as f64).round() as usize).min(n);
            let perm = RngStream::new(options.split_seed).permutation(n);
            for &i in perm.iter().take(n_ctx) {
                tags[i] = Split::Context;
            }
            tags
        }
    };

    Dataset::from_raw(raw, labels, columns, splits, dropped)
}

fn format_cell<T: Scalar>(v: T) -> String {
    // full round-trip precision
    format!("{:.17e}", v.to_f64().unwrap())
}

/// Export a dataset (post-normalization features) with `label` and `split`
/// columns. Optional per-row `manipulated` flags add a 0/1 column.
pub fn export_csv<T: Scalar>(
    ds: &Dataset<T>,
    path: &Path,
    manipulated: Option<&[bool]>,
    features_override: Option<&Matrix<T>>,
) -> Result<(), DataError> {
    if let Some(flags) = manipulated {
        debug_assert_eq!(flags.len(), ds.n());
    }
    let features = features_override.unwrap_or_else(|| ds.features());
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    let mut header: Vec<String> = ds.columns().iter().map(|c| c.name.clone()).collect();
    header.push("label".into());
    header.push("split".into());
    if manipulated.is_some() {
        header.push("manipulated".into());
    }
    writeln!(file, "{}", header.join(","))?;
    for i in 0..ds.n() {
        let mut cells: Vec<String> = (0..ds.dim()).map(|j| format_cell(features[(i, j)])).collect();
        cells.push(format!("{}", ds.labels()[i]));
        cells.push(
            match ds.splits()[i] {
                Split::Context => "context",
                Split::Test => "test",
            }
            .into(),
        );
        if let Some(flags) = manipulated {
            cells.push(if flags[i] { "1" } else { "0" }.into());
        }
        writeln!(file, "{}", cells.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_temp(content: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir();
        let path = dir.join(format!("spn_csv_test_{}.csv", rand::random::<u64>()));
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        path
    }

    #[test]
    fn label_mapping_three_rows() {
        let path = write_temp("x,outcome\n1.0,yes\n2.0,no\n3.0,yes\n");
        let ds: Dataset<f64> = ingest_csv(&path, "outcome", "yes", &IngestOptions::default()).unwrap();
        assert_eq!(ds.labels(), &[1, -1, 1]);
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn constant_column_flagged_and_unscaled() {
        let path = write_temp("x,c,outcome\n1.0,7.5,yes\n2.0,7.5,no\n3.0,7.5,yes\n");
        let ds: Dataset<f64> = ingest_csv(&path, "outcome", "yes", &IngestOptions::default()).unwrap();
        let c = ds.columns().iter().position(|c| c.name == "c").unwrap();
        assert!(ds.columns()[c].zero_variance);
        assert_eq!(ds.features()[(0, c)], 7.5);
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn missing_cell_drops_row() {
        let path = write_temp("x,outcome\n1.0,yes\n,no\n3.0,yes\n");
        let ds: Dataset<f64> = ingest_csv(&path, "outcome", "yes", &IngestOptions::default()).unwrap();
        assert_eq!(ds.dropped_rows, 1);
        assert_eq!(ds.n(), 2);
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn categorical_becomes_one_hot() {
        let path = write_temp("x,color,outcome\n1.0,red,yes\n2.0,blue,no\n3.0,red,yes\n");
        let ds: Dataset<f64> = ingest_csv(&path, "outcome", "yes", &IngestOptions::default()).unwrap();
        let names: Vec<&str> = ds.columns().iter().map(|c| c.name.as_str()).collect();
        assert!(names.contains(&"color=red") && names.contains(&"color=blue"));
        // one-hot columns are not manipulable by default
        let j = names.iter().position(|&n| n == "color=red").unwrap();
        assert!(!ds.manipulable_mask()[j]);
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn missing_label_column_errors() {
        let path = write_temp("x,outcome\n1.0,yes\n");
        let err = ingest_csv::<f64>(&path, "nope", "yes", &IngestOptions::default());
        assert!(matches!(err, Err(DataError::MissingLabelColumn(_))));
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn non_binary_labels_error() {
        let path = write_temp("x,outcome\n1.0,a\n2.0,b\n3.0,c\n");
        let err = ingest_csv::<f64>(&path, "outcome", "a", &IngestOptions::default());
        assert!(matches!(err, Err(DataError::NonBinaryLabels { .. })));
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn roundtrip_preserves_features_and_labels() {
        let path = write_temp(
            "a,b,outcome\n1.0,0.5,yes\n2.0,1.5,no\n3.0,2.5,yes\n4.0,0.25,no\n",
        );
        let ds: Dataset<f64> = ingest_csv(&path, "outcome", "yes", &IngestOptions::default()).unwrap();
        let out = std::env::temp_dir().join(format!("spn_rt_{}.csv", rand::random::<u64>()));
        export_csv(&ds, &out, None, None).unwrap();
        let opts = IngestOptions {
            split_column: Some("split".into()),
            ..IngestOptions::default()
        };
        let back: Dataset<f64> = ingest_csv(&out, "label", "1", &opts).unwrap();
        assert_eq!(back.labels(), ds.labels());
        assert_eq!(back.splits(), ds.splits());
        for i in 0..ds.n() {
            for j in 0..ds.dim() {
                assert!(
                    (back.features()[(i, j)] - ds.features()[(i, j)]).abs() < 1e-9,
                    "feature drift at ({i},{j})"
                );
            }
        }
        std::fs::remove_file(path).ok();
        std::fs::remove_file(out).ok();
    }

    #[test]
    fn row_cap_enforced() {
        let path = write_temp("x,outcome\n1.0,yes\n2.0,no\n3.0,yes\n4.0,no\n");
        let opts = IngestOptions {
            max_rows: Some(2),
            ..IngestOptions::default()
        };
        let ds: Dataset<f64> = ingest_csv(&path, "outcome", "yes", &opts).unwrap();
        assert_eq!(ds.n(), 2);
        std::fs::remove_file(path).ok();
    }
}
