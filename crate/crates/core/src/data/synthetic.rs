//! Two-class Gaussian-mixture task generation.

use crate::error::DataError;
use crate::numeric::{shrink_spd, Cholesky, Matrix, RngStream, Vector};
use crate::scalar::{lit, Scalar};

use super::dataset::{ColumnInfo, ColumnKind, Dataset, Split};

/// Score-rule family a synthetic task is meant to be deployed with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreFamily {
    Linear,
    SigmoidLinear,
}

/// Parameters of a synthetic two-class Gaussian mixture task.
#[derive(Debug, Clone)]
pub struct SyntheticTaskSpec {
    pub dim: usize,
    /// Euclidean distance between the class-conditional means.
    pub separation: f64,
    /// Seed fixing the task geometry (shared covariance and mean direction),
    /// independent of the sampling stream.
    pub covariance_seed: u64,
    pub context_per_class: usize,
    pub test_per_class: usize,
    pub family: ScoreFamily,
}

impl SyntheticTaskSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.dim < 1 {
            return Err(DataError::InvalidSpec("dim must be >= 1".into()));
        }
        if self.context_per_class < 2 || self.test_per_class < 2 {
            return Err(DataError::InvalidSpec(
                "need at least 2 samples per class per split".into(),
            ));
        }
        if self.separation < 0.0 {
            return Err(DataError::InvalidSpec("separation must be >= 0".into()));
        }
        Ok(())
    }
}

/// Task geometry derived from the covariance seed: a shared SPD covariance
/// and a unit mean-separation direction.
fn task_geometry<T: Scalar>(spec: &SyntheticTaskSpec) -> (Matrix<T>, Vector<T>) {
    let d = spec.dim;
    let mut geom_rng = RngStream::new(spec.covariance_seed).child(0x47454f4d); // "GEOM"
    let a = Matrix::from_fn(d, d, |_, _| geom_rng.standard_normal::<T>());
    let gram = a.matmul(&a.transpose()).scale(lit::<T>(1.0 / d as f64));
    // blend toward identity so conditioning stays mild
    let half = lit::<T>(0.5);
    let mut cov = gram.scale(half);
    for i in 0..d {
        cov[(i, i)] += half;
    }
    let cov = shrink_spd(&cov, lit(1e-9)).expect("constructed covariance symmetric");

    let mut u = Vector::from_vec((0..d).map(|_| geom_rng.standard_normal::<T>()).collect());
    let norm = u.norm();
    if norm > T::zero() {
        u = u.scale(T::one() / norm);
    } else {
        u[0] = T::one();
    }
    (cov, u)
}

/// Generate a z-scored, split-tagged two-class Gaussian mixture dataset.
/// Deterministic given the spec and the stream.
pub fn generate_synthetic<T: Scalar>(
    spec: &SyntheticTaskSpec,
    rng: &mut RngStream,
) -> Result<Dataset<T>, DataError> {
    spec.validate()?;
    let d = spec.dim;
    let (cov, direction) = task_geometry::<T>(spec);
    let chol = Cholesky::new(&cov).expect("task covariance SPD");
    let half_sep = lit::<T>(spec.separation / 2.0);

    let mut rows: Vec<Vec<T>> = Vec::new();
    let mut labels: Vec<i8> = Vec::new();
    let mut splits: Vec<Split> = Vec::new();

    let sample_split = |rng: &mut RngStream,
                            split: Split,
                            per_class: usize,
                            rows: &mut Vec<Vec<T>>,
                            labels: &mut Vec<i8>,
                            splits: &mut Vec<Split>| {
        let start = rows.len();
        for &label in &[1i8, -1i8] {
            let sign = lit::<T>(label as f64);
            for _ in 0..per_class {
                let z = Vector::from_vec((0..d).map(|_| rng.standard_normal::<T>()).collect());
                let noise = chol.lower().matvec(&z);
                let mean = direction.scale(sign * half_sep);
                rows.push(mean.add(&noise).0);
                labels.push(label);
                splits.push(split);
            }
        }
        // shuffle within the split so class blocks are interleaved
        let count = rows.len() - start;
        let perm = rng.permutation(count);
        let row_block: Vec<Vec<T>> = perm.iter().map(|&k| rows[start + k].clone()).collect();
        let label_block: Vec<i8> = perm.iter().map(|&k| labels[start + k]).collect();
        for (k, (r, l)) in row_block.into_iter().zip(label_block).enumerate() {
            rows[start + k] = r;
            labels[start + k] = l;
        }
    };

    sample_split(
        rng,
        Split::Context,
        spec.context_per_class,
        &mut rows,
        &mut labels,
        &mut splits,
    );
    sample_split(
        rng,
        Split::Test,
        spec.test_per_class,
        &mut rows,
        &mut labels,
        &mut splits,
    );

    let columns = (0..d)
        .map(|j| ColumnInfo {
            name: format!("x{j}"),
            kind: ColumnKind::Numeric,
            zero_variance: false,
        })
        .collect();
    let raw = Matrix::from_rows(&rows);
    let mut ds = Dataset::from_raw(raw, labels, columns, splits, 0)?;
    if spec.separation == 0.0 {
        ds.warnings
            .push("zero class-mean separation: task is unlearnable by design".into());
    }
    Ok(ds)
}
