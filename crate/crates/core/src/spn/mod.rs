//! Strategic context construction and the SPN predictor: the backbone
//! forward pass conditioned on paired (original, manipulated) examples.

use std::io::Write;
use std::path::Path;

use crate::data::{Dataset, StrategicTestSet};
use crate::error::SpnError;
use crate::icl::{implicit_descent, surrogate_predict_batch, FeaturePair, SurrogateConfig};
use crate::numeric::{Matrix, RngStream, Vector};
use crate::response::{respond_with_model, ManipulationModel, ScoreFunction};
use crate::scalar::{lit, Scalar};

/// Default cap on the flattened context length.
pub const DEFAULT_CONTEXT_CAPACITY: usize = 2048;

/// One strategic context pair. The single label field makes label
/// preservation structural: nothing in this module can write a pair's
/// label slots independently.
#[derive(Debug, Clone)]
pub struct ContextPair<T: Scalar> {
    pub original: Vector<T>,
    pub manipulated: Vector<T>,
    pub label: i8,
}

/// Where a strategic context came from.
#[derive(Debug, Clone)]
pub struct Provenance {
    pub regime: String,
    pub misspec: String,
    pub score_family: String,
    /// Hash of the deployed score function's weights.
    pub score_id: u64,
}

/// Ordered list of strategic context pairs.
#[derive(Debug, Clone)]
pub struct StrategicContext<T: Scalar> {
    pairs: Vec<ContextPair<T>>,
    pub provenance: Provenance,
}

/// Global ordering of the flattened pair tokens. Pair-internal order is
/// always original first, manipulated second.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlattenOrder {
    /// orig₁, manip₁, orig₂, manip₂, …
    Interleaved,
    /// orig₁ … orig_K, manip₁ … manip_K
    Blocked,
}

impl<T: Scalar> StrategicContext<T> {
    pub fn pairs(&self) -> &[ContextPair<T>] {
        &self.pairs
    }

    pub fn k(&self) -> usize {
        self.pairs.len()
    }

    pub fn flattened_len(&self) -> usize {
        2 * self.pairs.len()
    }

    /// Feature-level pairs for the attention-update analysis.
    pub fn feature_pairs(&self) -> Vec<FeaturePair<T>> {
        self.pairs
            .iter()
            .map(|p| FeaturePair {
                original: p.original.clone(),
                manipulated: p.manipulated.clone(),
            })
            .collect()
    }

    /// Flatten to (features, labels) in the requested order.
    pub fn flatten(&self, order: FlattenOrder) -> (Matrix<T>, Vector<T>) {
        let k = self.pairs.len();
        let d = self.pairs.first().map_or(0, |p| p.original.len());
        let mut features = Matrix::zeros(2 * k, d);
        let mut labels = Vector::zeros(2 * k);
        let mut put = |row: usize, x: &Vector<T>, label: i8| {
            for j in 0..d {
                features[(row, j)] = x[j];
            }
            labels[row] = lit(label as f64);
        };
        match order {
            FlattenOrder::Interleaved => {
                for (i, p) in self.pairs.iter().enumerate() {
                    put(2 * i, &p.original, p.label);
                    put(2 * i + 1, &p.manipulated, p.label);
                }
            }
            FlattenOrder::Blocked => {
                for (i, p) in self.pairs.iter().enumerate() {
                    put(i, &p.original, p.label);
                }
                for (i, p) in self.pairs.iter().enumerate() {
                    put(k + i, &p.manipulated, p.label);
                }
            }
        }
        (features, labels)
    }
}

fn score_id<T: Scalar>(f: &ScoreFunction<T>) -> u64 {
    // FNV-1a over the weight bits
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bits: u64| {
        for byte in bits.to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    match f {
        ScoreFunction::Linear { w, b }
        | ScoreFunction::SigmoidLinear { w, b }
        | ScoreFunction::SurrogateReadout { w, b } => {
            for v in w.as_slice() {
                eat(v.to_f64().unwrap_or(f64::NAN).to_bits());
            }
            eat(b.to_f64().unwrap_or(f64::NAN).to_bits());
        }
    }
    h
}

const SELECT_LABEL: u64 = 0x53454c; // "SEL"
const AGENT_LABEL: u64 = 0x4147; // "AG"

/// Select K context rows (uniform by default, class-stratified behind the
/// flag), compute each row's best response under the model, and form
/// ordered pairs. Selected rows keep their dataset order, so K = n
/// reproduces the context verbatim. Per-row responses use child streams
/// keyed by the row index.
pub fn build_strategic_context<T: Scalar>(
    ctx: &Dataset<T>,
    model: &ManipulationModel<T>,
    f: &ScoreFunction<T>,
    k: usize,
    rng: &RngStream,
    stratified: bool,
) -> Result<StrategicContext<T>, SpnError> {
    let n = ctx.n();
    if k == 0 || n == 0 {
        return Err(SpnError::EmptyContext);
    }
    if k > n {
        return Err(SpnError::ContextTooLarge { k, available: n });
    }
    if 2 * k > DEFAULT_CONTEXT_CAPACITY {
        return Err(SpnError::CapacityExceeded {
            got: 2 * k,
            cap: DEFAULT_CONTEXT_CAPACITY,
        });
    }

    let mut select_rng = rng.child(SELECT_LABEL);
    let mut selected: Vec<usize> = if stratified {
        let pos: Vec<usize> = (0..n).filter(|&i| ctx.labels()[i] == 1).collect();
        let neg: Vec<usize> = (0..n).filter(|&i| ctx.labels()[i] == -1).collect();
        let want_pos = k.div_ceil(2);
        let want_pos = want_pos.min(pos.len());
        let want_neg = (k - want_pos).min(neg.len());
        let want_pos = k - want_neg; // backfill if one class is short
        if want_pos > pos.len() {
            return Err(SpnError::ContextTooLarge { k, available: n });
        }
        let perm_pos = select_rng.permutation(pos.len());
        let perm_neg = select_rng.permutation(neg.len());
        perm_pos
            .iter()
            .take(want_pos)
            .map(|&i| pos[i])
            .chain(perm_neg.iter().take(want_neg).map(|&i| neg[i]))
            .collect()
    } else {
        let perm = select_rng.permutation(n);
        perm[..k].to_vec()
    };
    selected.sort_unstable();

    let agent_root = rng.child(AGENT_LABEL);
    let mask = ctx.manipulable_mask().to_vec();
    let mut pairs = Vec::with_capacity(k);
    for &row in &selected {
        let x = ctx.feature_row(row);
        let mut agent_rng = agent_root.child(row as u64);
        let report = respond_with_model(&x, f, model, &mut agent_rng, Some(&mask))
            .map_err(|source| SpnError::ResponseFailed { index: row, source })?;
        pairs.push(ContextPair {
            original: x,
            manipulated: report.x_prime,
            label: ctx.labels()[row],
        });
    }

    Ok(StrategicContext {
        pairs,
        provenance: Provenance {
            regime: model.regime.name().into(),
            misspec: model.misspec.name().into(),
            score_family: f.family().into(),
            score_id: score_id(f),
        },
    })
}

/// Prediction backbone: the stacked-layer surrogate plus the modeling
/// choice of appending a constant bias column before tokenization.
#[derive(Debug, Clone)]
pub struct Backbone<T: Scalar> {
    pub surrogate: SurrogateConfig<T>,
    pub add_bias: bool,
}

impl<T: Scalar> Backbone<T> {
    pub fn new(layers: usize, eta: T) -> Self {
        Backbone {
            surrogate: SurrogateConfig::new(layers, eta),
            add_bias: true,
        }
    }

    fn prepare(&self, features: &Matrix<T>) -> Matrix<T> {
        if !self.add_bias {
            return features.clone();
        }
        Matrix::from_fn(features.rows(), features.cols() + 1, |i, j| {
            if j < features.cols() {
                features[(i, j)]
            } else {
                T::one()
            }
        })
    }

    /// Forward pass scores for a batch of queries.
    pub fn predict_batch(
        &self,
        ctx_features: &Matrix<T>,
        ctx_labels: &Vector<T>,
        queries: &Matrix<T>,
    ) -> Result<Vec<T>, SpnError> {
        let ctx = self.prepare(ctx_features);
        let q = self.prepare(queries);
        Ok(surrogate_predict_batch(&ctx, ctx_labels, &q, &self.surrogate)?)
    }

    /// Deployed score rule induced by this backbone on a plain context:
    /// the linear readout of the implicit descent view, split into weights
    /// over the raw features plus the bias coefficient.
    pub fn score_function(
        &self,
        ctx_features: &Matrix<T>,
        ctx_labels: &Vector<T>,
    ) -> Result<ScoreFunction<T>, SpnError> {
        let ctx = self.prepare(ctx_features);
        let state = implicit_descent(&ctx, ctx_labels, &self.surrogate)?;
        let w_full = state.final_weights();
        let d = ctx_features.cols();
        let w = Vector::from_vec(w_full.as_slice()[..d].to_vec());
        let b = if self.add_bias { w_full[d] } else { T::zero() };
        Ok(ScoreFunction::SurrogateReadout { w, b })
    }
}

/// SPN predictor: backbone + strategic context + flattening order.
#[derive(Debug, Clone)]
pub struct SpnPredictor<T: Scalar> {
    pub backbone: Backbone<T>,
    pub context: StrategicContext<T>,
    pub order: FlattenOrder,
}

impl<T: Scalar> SpnPredictor<T> {
    pub fn new(backbone: Backbone<T>, context: StrategicContext<T>) -> Self {
        SpnPredictor {
            backbone,
            context,
            order: FlattenOrder::Interleaved,
        }
    }
}

/// Classification rule: sign of the score with the tie at 0 going to +1.
pub fn classify<T: Scalar>(score: T) -> i8 {
    if score >= T::zero() {
        1
    } else {
        -1
    }
}

/// Forward pass on the flattened strategic context for a single query.
pub fn spn_predict<T: Scalar>(
    predictor: &SpnPredictor<T>,
    x: &Vector<T>,
) -> Result<(T, i8), SpnError> {
    let queries = Matrix::from_fn(1, x.len(), |_, j| x[j]);
    let scores = spn_predict_queries(predictor, &queries)?;
    Ok((scores[0], classify(scores[0])))
}

fn spn_predict_queries<T: Scalar>(
    predictor: &SpnPredictor<T>,
    queries: &Matrix<T>,
) -> Result<Vec<T>, SpnError> {
    if predictor.context.k() == 0 {
        return Err(SpnError::EmptyContext);
    }
    let (features, labels) = predictor.context.flatten(predictor.order);
    predictor.backbone.predict_batch(&features, &labels, queries)
}

/// Batch predictions with aggregate accuracy.
#[derive(Debug, Clone)]
pub struct SpnPredictions<T: Scalar> {
    pub scores: Vec<T>,
    pub classes: Vec<i8>,
    pub labels: Vec<i8>,
    pub manipulated: Vec<bool>,
    pub accuracy: f64,
}

/// Per-row predictions over a strategic test set.
pub fn spn_batch_predict<T: Scalar>(
    predictor: &SpnPredictor<T>,
    test: &StrategicTestSet<T>,
) -> Result<SpnPredictions<T>, SpnError> {
    if test.n() == 0 {
        return Err(SpnError::EmptyTestSet);
    }
    let scores = spn_predict_queries(predictor, &test.features)?;
    let classes: Vec<i8> = scores.iter().map(|&s| classify(s)).collect();
    let labels = test.base.labels().to_vec();
    let hits = classes
        .iter()
        .zip(labels.iter())
        .filter(|(c, l)| c == l)
        .count();
    Ok(SpnPredictions {
        accuracy: hits as f64 / labels.len() as f64,
        scores,
        classes,
        labels,
        manipulated: test.manipulated.clone(),
    })
}

/// Prediction output CSV: row_id, manipulated_flag, score, class, label.
pub fn write_predictions_csv<T: Scalar>(
    predictions: &SpnPredictions<T>,
    path: &Path,
) -> Result<(), std::io::Error> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(file, "row_id,manipulated_flag,score,class,label")?;
    for i in 0..predictions.scores.len() {
        writeln!(
            file,
            "{},{},{:.9e},{},{}",
            i,
            if predictions.manipulated[i] { 1 } else { 0 },
            predictions.scores[i].to_f64().unwrap(),
            predictions.classes[i],
            predictions.labels[i],
        )?;
    }
    Ok(())
}
