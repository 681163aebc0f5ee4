use std::collections::BTreeSet;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::head::softmax_rows;
use crate::corpus::{EmotionLabel, NUM_LABELS};
use crate::error::{Error, Result};

/// Feature-based classifiers compared against the fully-connected head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BaselineKind {
    LogisticRegression,
    NearestNeighbors { k: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureBaseline {
    Logistic {
        weights: Array2<f64>,
        bias: Array1<f64>,
    },
    Knn {
        k: usize,
        features: Array2<f64>,
        labels: Vec<EmotionLabel>,
    },
}

const LR_STEPS: usize = 2000;
const LR_RATE: f64 = 0.5;
const LR_L2: f64 = 1e-4;

pub fn fit_baseline(
    kind: BaselineKind,
    features: &Array2<f64>,
    labels: &[EmotionLabel],
    _seed: u64,
) -> Result<FeatureBaseline> {
    if features.nrows() != labels.len() {
        return Err(Error::Input(format!(
            "{} feature rows for {} labels",
            features.nrows(),
            labels.len()
        )));
    }
    let distinct: BTreeSet<_> = labels.iter().collect();
    if distinct.len() < 2 {
        return Err(Error::DegenerateFit(format!(
            "training data has {} distinct label(s), need at least 2",
            distinct.len()
        )));
    }
    match kind {
        BaselineKind::LogisticRegression => Ok(fit_logistic(features, labels)),
        BaselineKind::NearestNeighbors { k } => {
            if k == 0 {
                return Err(Error::Config("k-NN needs k >= 1".into()));
            }
            Ok(FeatureBaseline::Knn {
                k,
                features: features.clone(),
                labels: labels.to_vec(),
            })
        }
    }
}

/// Multinomial logistic regression by full-batch gradient descent from a
/// zero start, so the fit is deterministic without a seed.
fn fit_logistic(features: &Array2<f64>, labels: &[EmotionLabel]) -> FeatureBaseline {
    let (n, d) = features.dim();
    let mut weights = Array2::<f64>::zeros((d, NUM_LABELS));
    let mut bias = Array1::<f64>::zeros(NUM_LABELS);
    let mut onehot = Array2::<f64>::zeros((n, NUM_LABELS));
    for (i, l) in labels.iter().enumerate() {
        onehot[(i, l.index())] = 1.0;
    }
    for _ in 0..LR_STEPS {
        let probs = softmax_rows(&(features.dot(&weights) + &bias));
        let err = (probs - &onehot) / n as f64;
        let grad_w = features.t().dot(&err) + &weights * LR_L2;
        weights.scaled_add(-LR_RATE, &grad_w);
        bias.scaled_add(-LR_RATE, &err.sum_axis(Axis(0)));
    }
    FeatureBaseline::Logistic { weights, bias }
}

impl FeatureBaseline {
    pub fn predict(&self, features: &Array2<f64>) -> Result<Vec<EmotionLabel>> {
        match self {
            FeatureBaseline::Logistic { weights, bias } => {
                if features.ncols() != weights.nrows() {
                    return Err(Error::Shape {
                        expected: format!("{} feature columns", weights.nrows()),
                        actual: features.ncols().to_string(),
                    });
                }
                let scores = features.dot(weights) + bias;
                Ok(scores
                    .rows()
                    .into_iter()
                    .map(|r| EmotionLabel::ALL[argmax(r.iter().copied())])
                    .collect())
            }
            FeatureBaseline::Knn {
                k,
                features: train,
                labels,
            } => {
                if features.ncols() != train.ncols() {
                    return Err(Error::Shape {
                        expected: format!("{} feature columns", train.ncols()),
                        actual: features.ncols().to_string(),
                    });
                }
                Ok(features
                    .rows()
                    .into_iter()
                    .map(|q| {
                        let mut dist: Vec<(f64, usize)> = train
                            .rows()
                            .into_iter()
                            .enumerate()
                            .map(|(i, r)| ((&r - &q).mapv(|v| v * v).sum(), i))
                            .collect();
                        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                        let mut votes = [0usize; NUM_LABELS];
                        for &(_, i) in dist.iter().take(*k) {
                            votes[labels[i].index()] += 1;
                        }
                        EmotionLabel::ALL[argmax(votes.iter().map(|&v| v as f64))]
                    })
                    .collect())
            }
        }
    }
}

/// First maximal index.
fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

pub fn predict_baseline(model: &FeatureBaseline, features: &Array2<f64>) -> Result<Vec<EmotionLabel>> {
    model.predict(features)
}

#[cfg(test)]
mod tests {
    use super::*;
    use EmotionLabel::*;

    fn separable() -> (Array2<f64>, Vec<EmotionLabel>) {
        let x = Array2::from_shape_vec(
            (6, 2),
            vec![1.0, 0.2, 0.9, -0.1, 1.3, 0.4, -1.0, 0.1, -0.8, -0.3, -1.2, 0.5],
        )
        .unwrap();
        (x, vec![Joy, Joy, Joy, Anger, Anger, Anger])
    }

    #[test]
    fn logistic_separates() {
        let (x, y) = separable();
        let m = fit_baseline(BaselineKind::LogisticRegression, &x, &y, 0).unwrap();
        assert_eq!(m.predict(&x).unwrap(), y);
    }

    #[test]
    fn knn_memorizes() {
        let (x, y) = separable();
        let m = fit_baseline(BaselineKind::NearestNeighbors { k: 1 }, &x, &y, 0).unwrap();
        assert_eq!(predict_baseline(&m, &x).unwrap(), y);
    }

    #[test]
    fn single_class_is_degenerate() {
        let x = Array2::zeros((3, 2));
        assert!(matches!(
            fit_baseline(BaselineKind::LogisticRegression, &x, &[Fear; 3], 0),
            Err(Error::DegenerateFit(_))
        ));
    }

    #[test]
    fn deterministic_fit() {
        let (x, y) = separable();
        let a = fit_baseline(BaselineKind::LogisticRegression, &x, &y, 1).unwrap();
        let b = fit_baseline(BaselineKind::LogisticRegression, &x, &y, 1).unwrap();
        assert_eq!(a, b);
    }
}
