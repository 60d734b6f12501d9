//! Strategic test sets: replacing a seeded subset of test rows by their
//! best-response counterparts. Labels are never touched.

use crate::error::DataError;
use crate::numeric::{Matrix, RngStream};
use crate::response::{respond_with_model, ManipulationModel, ScoreFunction};
use crate::scalar::Scalar;

use super::dataset::Dataset;

/// A test split with a proportion of rows replaced by manipulated features.
#[derive(Debug, Clone)]
pub struct StrategicTestSet<T: Scalar> {
    pub base: Dataset<T>,
    pub features: Matrix<T>,
    pub manipulated: Vec<bool>,
    pub proportion: f64,
}

impl<T: Scalar> StrategicTestSet<T> {
    pub fn n(&self) -> usize {
        self.base.n()
    }

    pub fn manipulated_count(&self) -> usize {
        self.manipulated.iter().filter(|&&m| m).count()
    }
}

const PERMUTATION_LABEL: u64 = 0x5045524d; // "PERM"
const AGENT_LABEL: u64 = 0x4147; // "AG"

/// Replace a uniformly random round(p·n) subset of rows by b_f(x).
///
/// The subset is the prefix of one fixed seeded permutation, so for p' > p
/// under the same stream the manipulated set at p is nested in the set at
/// p'. Per-row responses use per-agent child streams keyed by row index,
/// making them identical across proportions as well.
pub fn apply_manipulation<T: Scalar>(
    test: &Dataset<T>,
    model: &ManipulationModel<T>,
    f: &ScoreFunction<T>,
    p: f64,
    rng: &RngStream,
) -> Result<StrategicTestSet<T>, DataError> {
    if !(0.0..=1.0).contains(&p) || !p.is_finite() {
        return Err(DataError::InvalidProportion(p));
    }
    let n = test.n();
    let count = (p * n as f64).round() as usize;
    let count = count.min(n);

    let mut perm_rng = rng.child(PERMUTATION_LABEL);
    let perm = perm_rng.permutation(n);
    let mut manipulated = vec![false; n];
    for &i in perm.iter().take(count) {
        manipulated[i] = true;
    }

    let agent_root = rng.child(AGENT_LABEL);
    let mask = test.manipulable_mask().to_vec();
    let mut features = test.features().clone();
    for i in 0..n {
        if !manipulated[i] {
            continue;
        }
        let x = test.feature_row(i);
        let mut agent_rng = agent_root.child(i as u64);
        let report = respond_with_model(&x, f, model, &mut agent_rng, Some(&mask))?;
        for j in 0..test.dim() {
            features[(i, j)] = report.x_prime[j];
        }
    }

    Ok(StrategicTestSet {
        base: test.clone(),
        features,
        manipulated,
        proportion: p,
    })
}
