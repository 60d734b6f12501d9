//! Finetune baselines trained on the augmented set of original plus
//! manipulated samples: an ℓ2-regularized logistic regression (default)
//! and a small two-layer perceptron.

use crate::numeric::{Matrix, RngStream, Vector};
use crate::response::ScoreFunction;

/// Model family of the finetune baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineFamily {
    Logistic,
    TwoLayerPerceptron,
}

/// Training budget: fixed epochs with an early-exit gradient tolerance.
#[derive(Debug, Clone)]
pub struct BaselineConfig {
    pub family: BaselineFamily,
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub tolerance: f64,
    pub hidden: usize,
    pub init_seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            family: BaselineFamily::Logistic,
            epochs: 100,
            learning_rate: 0.5,
            l2: 1e-3,
            tolerance: 1e-6,
            hidden: 8,
            init_seed: 0,
        }
    }
}

/// A trained baseline classifier.
#[derive(Debug, Clone)]
pub enum FinetuneBaseline {
    Logistic {
        w: Vector<f64>,
        b: f64,
    },
    Perceptron {
        w1: Matrix<f64>,
        b1: Vector<f64>,
        w2: Vector<f64>,
        b2: f64,
    },
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl FinetuneBaseline {
    /// Full-batch gradient descent on the logistic loss over {−1,+1}
    /// labels; deterministic given the config.
    pub fn fit(features: &Matrix<f64>, labels: &[i8], config: &BaselineConfig) -> Self {
        match config.family {
            BaselineFamily::Logistic => Self::fit_logistic(features, labels, config),
            BaselineFamily::TwoLayerPerceptron => Self::fit_perceptron(features, labels, config),
        }
    }

    #[allow(clippy::needless_range_loop)]
    fn fit_logistic(features: &Matrix<f64>, labels: &[i8], config: &BaselineConfig) -> Self {
        let n = features.rows();
        let d = features.cols();
        let mut w = Vector::zeros(d);
        let mut b = 0.0f64;
        for _ in 0..config.epochs {
            let mut grad_w = w.scale(config.l2);
            let mut grad_b = 0.0;
            for i in 0..n {
                let x = features.row_vector(i);
                let y = labels[i] as f64;
                let margin = y * (w.dot(&x) + b);
                let coeff = -y * sigmoid(-margin) / n as f64;
                grad_w.axpy_inplace(coeff, &x);
                grad_b += coeff;
            }
            let gnorm = (grad_w.dot(&grad_w) + grad_b * grad_b).sqrt();
            w.axpy_inplace(-config.learning_rate, &grad_w);
            b -= config.learning_rate * grad_b;
            if gnorm < config.tolerance {
                break;
            }
        }
        FinetuneBaseline::Logistic { w, b }
    }

    #[allow(clippy::needless_range_loop)]
    fn fit_perceptron(features: &Matrix<f64>, labels: &[i8], config: &BaselineConfig) -> Self {
        let n = features.rows();
        let d = features.cols();
        let h = config.hidden;
        let mut rng = RngStream::new(config.init_seed).child(0x4d4c50); // "MLP"
        let scale = (1.0 / d as f64).sqrt();
        let mut w1 = Matrix::from_fn(h, d, |_, _| rng.standard_normal::<f64>() * scale);
        let mut b1 = Vector::zeros(h);
        let mut w2 =
            Vector::from_vec((0..h).map(|_| rng.standard_normal::<f64>() * scale).collect());
        let mut b2 = 0.0f64;

        for _ in 0..config.epochs {
            let mut g_w1 = Matrix::<f64>::zeros(h, d);
            let mut g_b1 = Vector::<f64>::zeros(h);
            let mut g_w2 = Vector::<f64>::zeros(h);
            let mut g_b2 = 0.0;
            for i in 0..n {
                let x = features.row_vector(i);
                let y = labels[i] as f64;
                let pre = w1.matvec(&x).add(&b1);
                let hid = Vector::from_vec(pre.as_slice().iter().map(|z| z.tanh()).collect());
                let out = w2.dot(&hid) + b2;
                let coeff = -y * sigmoid(-y * out) / n as f64;
                g_b2 += coeff;
                g_w2.axpy_inplace(coeff, &hid);
                for k in 0..h {
                    let back = coeff * w2[k] * (1.0 - hid[k] * hid[k]);
                    g_b1[k] += back;
                    for j in 0..d {
                        g_w1[(k, j)] += back * x[j];
                    }
                }
            }
            for k in 0..h {
                for j in 0..d {
                    w1[(k, j)] -= config.learning_rate * (g_w1[(k, j)] + config.l2 * w1[(k, j)]);
                }
                b1[k] -= config.learning_rate * g_b1[k];
                w2[k] -= config.learning_rate * (g_w2[k] + config.l2 * w2[k]);
            }
            b2 -= config.learning_rate * g_b2;
        }
        FinetuneBaseline::Perceptron { w1, b1, w2, b2 }
    }

    pub fn score(&self, x: &Vector<f64>) -> f64 {
        match self {
            FinetuneBaseline::Logistic { w, b } => w.dot(x) + b,
            FinetuneBaseline::Perceptron { w1, b1, w2, b2 } => {
                let pre = w1.matvec(x).add(b1);
                let hid = Vector::from_vec(pre.as_slice().iter().map(|z| z.tanh()).collect());
                w2.dot(&hid) + b2
            }
        }
    }

    pub fn predict(&self, x: &Vector<f64>) -> i8 {
        if self.score(x) >= 0.0 {
            1
        } else {
            -1
        }
    }

    /// Deployed rule for the manipulation environment. The perceptron is
    /// exposed through its input-space gradient at x via a local linear
    /// model; the logistic case is exactly linear.
    pub fn score_function(&self) -> Option<ScoreFunction<f64>> {
        match self {
            FinetuneBaseline::Logistic { w, b } => Some(ScoreFunction::Linear {
                w: w.clone(),
                b: *b,
            }),
            FinetuneBaseline::Perceptron { .. } => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, ScoreFamily, SyntheticTaskSpec};

    fn accuracy(model: &FinetuneBaseline, features: &Matrix<f64>, labels: &[i8]) -> f64 {
        let hits = (0..features.rows())
            .filter(|&i| model.predict(&features.row_vector(i)) == labels[i])
            .count();
        hits as f64 / labels.len() as f64
    }

    #[test]
    fn logistic_learns_separable_task() {
        let spec = SyntheticTaskSpec {
            dim: 3,
            separation: 4.0,
            covariance_seed: 2,
            context_per_class: 80,
            test_per_class: 40,
            family: ScoreFamily::Linear,
        };
        let mut rng = RngStream::new(4);
        let ds = generate_synthetic::<f64>(&spec, &mut rng).unwrap();
        let ctx = ds.context_view();
        let test = ds.test_view();
        let model =
            FinetuneBaseline::fit(ctx.features(), ctx.labels(), &BaselineConfig::default());
        assert!(accuracy(&model, test.features(), test.labels()) > 0.9);
    }

    #[test]
    fn perceptron_learns_separable_task() {
        let spec = SyntheticTaskSpec {
            dim: 2,
            separation: 4.0,
            covariance_seed: 2,
            context_per_class: 60,
            test_per_class: 40,
            family: ScoreFamily::Linear,
        };
        let mut rng = RngStream::new(4);
        let ds = generate_synthetic::<f64>(&spec, &mut rng).unwrap();
        let ctx = ds.context_view();
        let test = ds.test_view();
        let config = BaselineConfig {
            family: BaselineFamily::TwoLayerPerceptron,
            epochs: 300,
            learning_rate: 1.0,
            ..BaselineConfig::default()
        };
        let model = FinetuneBaseline::fit(ctx.features(), ctx.labels(), &config);
        assert!(accuracy(&model, test.features(), test.labels()) > 0.85);
    }

    #[test]
    fn fit_is_deterministic() {
        let features = Matrix::from_rows(&[vec![1.0, 0.0], vec![-1.0, 0.5], vec![0.3, -0.2]]);
        let labels = [1i8, -1, 1];
        let a = FinetuneBaseline::fit(&features, &labels, &BaselineConfig::default());
        let b = FinetuneBaseline::fit(&features, &labels, &BaselineConfig::default());
        let x = Vector::from_vec(vec![0.2, 0.7]);
        assert_eq!(a.score(&x).to_bits(), b.score(&x).to_bits());
    }
}
