//! Labeled tabular datasets: z-scored features, {−1,+1} labels, split tags.

use crate::error::DataError;
use crate::numeric::{Matrix, Vector};
use crate::scalar::{lit, Scalar};

/// Row split tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Context,
    Test,
}

/// Where a feature column came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnKind {
    Numeric,
    /// One-hot indicator derived from a categorical source column.
    OneHot { source: String, value: String },
}

#[derive(Debug, Clone)]
pub struct ColumnInfo {
    pub name: String,
    pub kind: ColumnKind,
    /// Set when the column had (near-)zero sample variance and was left unscaled.
    pub zero_variance: bool,
}

/// Immutable labeled dataset. Features are z-scored per column at
/// construction (constant columns exempted and flagged); labels are
/// strictly in {−1,+1}.
#[derive(Debug, Clone)]
pub struct Dataset<T: Scalar> {
    features: Matrix<T>,
    labels: Vec<i8>,
    columns: Vec<ColumnInfo>,
    splits: Vec<Split>,
    /// Per-column mask of features agents may modify. Defaults to the
    /// numeric non-constant columns; the choice is configuration.
    manipulable: Vec<bool>,
    /// Rows dropped at ingestion because of missing cells.
    pub dropped_rows: usize,
    pub warnings: Vec<String>,
}

impl<T: Scalar> Dataset<T> {
    /// Build a dataset from raw (un-normalized) features. Columns are
    /// z-scored in place with the sample (n−1) standard deviation.
    pub fn from_raw(
        raw: Matrix<T>,
        labels: Vec<i8>,
        columns: Vec<ColumnInfo>,
        splits: Vec<Split>,
        dropped_rows: usize,
    ) -> Result<Self, DataError> {
        let n = raw.rows();
        if n == 0 {
            return Err(DataError::EmptyInput("no rows".into()));
        }
        if labels.len() != n || splits.len() != n {
            return Err(DataError::InvalidSpec(format!(
                "rows {n}, labels {}, splits {}",
                labels.len(),
                splits.len()
            )));
        }
        if labels.iter().any(|&l| l != 1 && l != -1) {
            return Err(DataError::NonBinaryLabels { count: 1 });
        }
        let mut columns = columns;
        let mut features = raw;
        let d = features.cols();
        debug_assert_eq!(columns.len(), d);
        for j in 0..d {
            let col = features.column(j);
            let mean = col.0.iter().copied().sum::<T>() / lit(n as f64);
            let var = if n > 1 {
                col.0
                    .iter()
                    .map(|&x| (x - mean) * (x - mean))
                    .sum::<T>()
                    / lit((n - 1) as f64)
            } else {
                T::zero()
            };
            let std = var.sqrt();
            if std <= lit(1e-12) {
                columns[j].zero_variance = true;
                continue;
            }
            for i in 0..n {
                features[(i, j)] = (features[(i, j)] - mean) / std;
            }
        }
        let manipulable = columns
            .iter()
            .map(|c| matches!(c.kind, ColumnKind::Numeric) && !c.zero_variance)
            .collect();
        Ok(Dataset {
            features,
            labels,
            columns,
            splits,
            manipulable,
            dropped_rows,
            warnings: Vec::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.features.rows()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Matrix<T> {
        &self.features
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn label_value(&self, i: usize) -> T {
        lit(self.labels[i] as f64)
    }

    pub fn columns(&self) -> &[ColumnInfo] {
        &self.columns
    }

    pub fn splits(&self) -> &[Split] {
        &self.splits
    }

    pub fn manipulable_mask(&self) -> &[bool] {
        &self.manipulable
    }

    pub fn set_manipulable_mask(&mut self, mask: Vec<bool>) -> Result<(), DataError> {
        if mask.len() != self.dim() {
            return Err(DataError::InvalidSpec(format!(
                "mask length {} != dim {}",
                mask.len(),
                self.dim()
            )));
        }
        self.manipulable = mask;
        Ok(())
    }

    pub fn feature_row(&self, i: usize) -> Vector<T> {
        self.features.row_vector(i)
    }

    pub fn indices_of(&self, split: Split) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.splits[i] == split).collect()
    }

    /// New dataset holding only the given rows (normalization is not redone).
    pub fn select_rows(&self, idx: &[usize]) -> Dataset<T> {
        let features = Matrix::from_fn(idx.len(), self.dim(), |i, j| self.features[(idx[i], j)]);
        Dataset {
            features,
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            columns: self.columns.clone(),
            splits: idx.iter().map(|&i| self.splits[i]).collect(),
            manipulable: self.manipulable.clone(),
            dropped_rows: 0,
            warnings: Vec::new(),
        }
    }

    pub fn context_view(&self) -> Dataset<T> {
        self.select_rows(&self.indices_of(Split::Context))
    }

    pub fn test_view(&self) -> Dataset<T> {
        self.select_rows(&self.indices_of(Split::Test))
    }
}
