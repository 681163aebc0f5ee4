use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checksum;
use crate::corpus::{EmotionLabel, NUM_LABELS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadConfig {
    pub hidden: usize,
    pub dropout: f64,
}

impl Default for HeadConfig {
    fn default() -> Self {
        HeadConfig {
            hidden: 128,
            dropout: 0.5,
        }
    }
}

impl HeadConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 {
            return Err(Error::Config("classifier head needs at least one hidden unit".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

/// `dense(hidden) → relu → dropout → dense(8) → softmax`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub dropout: f64,
}

/// Whether dropout is applied. Training mode carries the mask generator.
pub enum Mode<'a> {
    Inference,
    Training(&'a mut ChaCha8Rng),
}

/// Intermediate values of one forward pass, kept for backprop.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    features: Array2<f64>,
    pre_activation: Array2<f64>,
    dropped: Array2<f64>,
    /// Inverted-dropout multipliers, absent at inference.
    keep: Option<Array2<f64>>,
    pub probs: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadGrad {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub features: Array2<f64>,
}

pub(crate) fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

impl ClassifierHead {
    /// Glorot-uniform weights, zero biases.
    pub fn new(input_dim: usize, config: HeadConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        if input_dim == 0 {
            return Err(Error::Config("classifier input dimension is zero".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut glorot = |fan_in: usize, fan_out: usize| {
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            Array2::from_shape_simple_fn((fan_in, fan_out), || rng.random_range(-a..a))
        };
        Ok(ClassifierHead {
            w1: glorot(input_dim, config.hidden),
            b1: Array1::zeros(config.hidden),
            w2: glorot(config.hidden, NUM_LABELS),
            b2: Array1::zeros(NUM_LABELS),
            dropout: config.dropout,
        })
    }

    pub fn zeros(input_dim: usize, config: HeadConfig) -> Self {
        ClassifierHead {
            w1: Array2::zeros((input_dim, config.hidden)),
            b1: Array1::zeros(config.hidden),
            w2: Array2::zeros((config.hidden, NUM_LABELS)),
            b2: Array1::zeros(NUM_LABELS),
            dropout: config.dropout,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.nrows()
    }

    pub fn hidden(&self) -> usize {
        self.w1.ncols()
    }

    pub fn config(&self) -> HeadConfig {
        HeadConfig {
            hidden: self.hidden(),
            dropout: self.dropout,
        }
    }

    pub fn forward(&self, features: &Array2<f64>, mode: Mode<'_>) -> Result<ForwardCache> {
        if features.ncols() != self.input_dim() {
            return Err(Error::Shape {
                expected: format!("{} feature columns", self.input_dim()),
                actual: format!("{}", features.ncols()),
            });
        }
        let pre_activation = features.dot(&self.w1) + &self.b1;
        let hidden = pre_activation.mapv(|v| v.max(0.0));
        let (dropped, keep) = match mode {
            Mode::Training(rng) if self.dropout > 0.0 => {
                let scale = 1.0 / (1.0 - self.dropout);
                let p = self.dropout;
                let keep = Array2::from_shape_simple_fn(hidden.raw_dim(), || {
                    if rng.random::<f64>() < p {
                        0.0
                    } else {
                        scale
                    }
                });
                (&hidden * &keep, Some(keep))
            }
            _ => (hidden, None),
        };
        let logits = dropped.dot(&self.w2) + &self.b2;
        Ok(ForwardCache {
            features: features.clone(),
            pre_activation,
            dropped,
            keep,
            probs: softmax_rows(&logits),
        })
    }

    /// Probability rows, one per feature row.
    pub fn classify(&self, features: &Array2<f64>, mode: Mode<'_>) -> Result<Array2<f64>> {
        Ok(self.forward(features, mode)?.probs)
    }

    /// Gradients given dLoss/dlogits.
    pub fn backward(&self, cache: &ForwardCache, grad_logits: &Array2<f64>) -> HeadGrad {
        let w2 = cache.dropped.t().dot(grad_logits);
        let b2 = grad_logits.sum_axis(Axis(0));
        let mut grad_hidden = grad_logits.dot(&self.w2.t());
        if let Some(keep) = &cache.keep {
            grad_hidden *= keep;
        }
        grad_hidden.zip_mut_with(&cache.pre_activation, |g, &z| {
            if z <= 0.0 {
                *g = 0.0
            }
        });
        HeadGrad {
            w1: cache.features.t().dot(&grad_hidden),
            b1: grad_hidden.sum_axis(Axis(0)),
            features: grad_hidden.dot(&self.w1.t()),
            w2,
            b2,
        }
    }

    pub(crate) fn tensors_mut(&mut self) -> [(&'static str, &mut [f64]); 4] {
        [
            ("head.w1", self.w1.as_slice_mut().expect("standard layout")),
            ("head.b1", self.b1.as_slice_mut().expect("standard layout")),
            ("head.w2", self.w2.as_slice_mut().expect("standard layout")),
            ("head.b2", self.b2.as_slice_mut().expect("standard layout")),
        ]
    }

    pub fn tensors(&self) -> [(&'static str, Vec<usize>, &[f64]); 4] {
        [
            ("head.w1", self.w1.shape().to_vec(), self.w1.as_slice().expect("standard layout")),
            ("head.b1", self.b1.shape().to_vec(), self.b1.as_slice().expect("standard layout")),
            ("head.w2", self.w2.shape().to_vec(), self.w2.as_slice().expect("standard layout")),
            ("head.b2", self.b2.shape().to_vec(), self.b2.as_slice().expect("standard layout")),
        ]
    }

    pub fn checksum(&self) -> String {
        checksum(
            self.w1
                .iter()
                .chain(self.b1.iter())
                .chain(self.w2.iter())
                .chain(self.b2.iter())
                .copied(),
        )
    }
}

/// Per-row argmax, ties toward the lower label index. Rows must sum to 1
/// within 1e-6.
pub fn predict_label(probs: &Array2<f64>) -> Result<Vec<EmotionLabel>> {
    if probs.ncols() != NUM_LABELS {
        return Err(Error::Shape {
            expected: format!("{NUM_LABELS} probability columns"),
            actual: probs.ncols().to_string(),
        });
    }
    probs
        .rows()
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            let sum = row.sum();
            if !sum.is_finite() || (sum - 1.0).abs() > 1e-6 || row.iter().any(|&p| p < 0.0) {
                return Err(Error::Validation(format!(
                    "row {i} is not a probability distribution (sum {sum})"
                )));
            }
            let best = row
                .iter()
                .enumerate()
                .fold(0, |best, (j, &p)| if p > row[best] { j } else { best });
            Ok(EmotionLabel::ALL[best])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_head_is_uniform() {
        let head = ClassifierHead::zeros(4, HeadConfig::default());
        let p = head.classify(&Array2::ones((3, 4)), Mode::Inference).unwrap();
        assert!(p.iter().all(|&v| (v - 0.125).abs() < 1e-15));
    }

    #[test]
    fn inference_is_deterministic() {
        let head = ClassifierHead::new(6, HeadConfig::default(), 1).unwrap();
        let x = Array2::from_shape_fn((4, 6), |(i, j)| (i * 7 + j) as f64 * 0.1 - 1.0);
        let a = head.classify(&x, Mode::Inference).unwrap();
        let b = head.classify(&x, Mode::Inference).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn training_mode_applies_dropout() {
        let head = ClassifierHead::new(6, HeadConfig::default(), 1).unwrap();
        let x = Array2::from_shape_fn((4, 6), |(i, j)| (i + j) as f64 * 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let train = head.classify(&x, Mode::Training(&mut rng)).unwrap();
        assert_ne!(train, head.classify(&x, Mode::Inference).unwrap());
        for row in train.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_mismatch() {
        let head = ClassifierHead::new(6, HeadConfig::default(), 1).unwrap();
        assert!(matches!(
            head.classify(&Array2::zeros((2, 5)), Mode::Inference),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn bad_config() {
        assert!(ClassifierHead::new(4, HeadConfig { hidden: 0, dropout: 0.5 }, 0).is_err());
        assert!(ClassifierHead::new(4, HeadConfig { hidden: 8, dropout: 1.0 }, 0).is_err());
    }

    #[test]
    fn argmax_rules() {
        let p = array![
            [0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
            [0.4, 0.4, 0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
            [0.125, 0.125, 0.125, 0.125, 0.125, 0.125, 0.125, 0.125],
        ];
        assert_eq!(
            predict_label(&p).unwrap(),
            vec![EmotionLabel::Joy, EmotionLabel::Neutral, EmotionLabel::Neutral]
        );
        let bad = array![[0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]];
        assert!(matches!(predict_label(&bad), Err(Error::Validation(_))));
    }
}
