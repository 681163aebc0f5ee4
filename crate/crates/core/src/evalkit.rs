//! Classification metrics over the 8-label space and the evaluation report.
//!
//! Every metric is derived from one raw confusion-count pass. Undefined
//! precision or recall (0/0) is reported as 0 and flagged.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::{EmotionLabel, NUM_LABELS};
use crate::error::{Error, Result};

pub type Matrix = [[f64; NUM_LABELS]; NUM_LABELS];
pub type CountMatrix = [[usize; NUM_LABELS]; NUM_LABELS];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: EmotionLabel,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    /// True when precision or recall hit a zero denominator.
    pub zero_division: bool,
}

fn check(preds: &[EmotionLabel], golds: &[EmotionLabel]) -> Result<()> {
    if preds.len() != golds.len() {
        return Err(Error::Input(format!(
            "{} predictions for {} gold labels",
            preds.len(),
            golds.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::Input("no predictions to evaluate".into()));
    }
    Ok(())
}

/// Entry (i, j) counts gold `i` predicted as `j`.
fn count_matrix(preds: &[EmotionLabel], golds: &[EmotionLabel]) -> CountMatrix {
    let mut m = [[0usize; NUM_LABELS]; NUM_LABELS];
    for (p, g) in preds.iter().zip(golds) {
        m[g.index()][p.index()] += 1;
    }
    m
}

fn prf_from_counts(m: &CountMatrix) -> [ClassMetrics; NUM_LABELS] {
    std::array::from_fn(|c| {
        let tp = m[c][c];
        let support: usize = m[c].iter().sum();
        let predicted: usize = (0..NUM_LABELS).map(|r| m[r][c]).sum();
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        ClassMetrics {
            label: EmotionLabel::ALL[c],
            precision,
            recall,
            f1,
            support,
            zero_division: predicted == 0 || support == 0,
        }
    })
}

fn macro_from(per_class: &[ClassMetrics; NUM_LABELS]) -> f64 {
    per_class.iter().map(|c| c.f1).sum::<f64>() / NUM_LABELS as f64
}

fn weighted_from(per_class: &[ClassMetrics; NUM_LABELS]) -> f64 {
    let total: usize = per_class.iter().map(|c| c.support).sum();
    per_class
        .iter()
        .map(|c| c.f1 * c.support as f64)
        .sum::<f64>()
        / total as f64
}

fn normalize(m: &CountMatrix) -> Matrix {
    std::array::from_fn(|r| {
        let support: usize = m[r].iter().sum();
        std::array::from_fn(|c| {
            if support == 0 {
                0.0
            } else {
                m[r][c] as f64 / support as f64
            }
        })
    })
}

pub fn per_class_prf(preds: &[EmotionLabel], golds: &[EmotionLabel]) -> Result<[ClassMetrics; NUM_LABELS]> {
    check(preds, golds)?;
    Ok(prf_from_counts(&count_matrix(preds, golds)))
}

/// Unweighted mean of all 8 per-class F1 scores, absent classes included.
pub fn macro_f1(preds: &[EmotionLabel], golds: &[EmotionLabel]) -> Result<f64> {
    Ok(macro_from(&per_class_prf(preds, golds)?))
}

pub fn weighted_f1(preds: &[EmotionLabel], golds: &[EmotionLabel]) -> Result<f64> {
    Ok(weighted_from(&per_class_prf(preds, golds)?))
}

pub fn confusion_matrix(preds: &[EmotionLabel], golds: &[EmotionLabel], normalized: bool) -> Result<Matrix> {
    check(preds, golds)?;
    let m = count_matrix(preds, golds);
    Ok(if normalized {
        normalize(&m)
    } else {
        std::array::from_fn(|r| std::array::from_fn(|c| m[r][c] as f64))
    })
}

/// Per-class recall, i.e. the diagonal of the row-normalized confusion matrix.
pub fn per_emotion_accuracy(preds: &[EmotionLabel], golds: &[EmotionLabel]) -> Result<[f64; NUM_LABELS]> {
    let per_class = per_class_prf(preds, golds)?;
    Ok(std::array::from_fn(|c| per_class[c].recall))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub samples: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub micro_f1: f64,
    pub per_class: Vec<ClassMetrics>,
    pub per_emotion_accuracy: Vec<f64>,
    pub confusion: Matrix,
    pub counts: CountMatrix,
    /// Labels whose precision or recall was undefined.
    pub zero_division: Vec<EmotionLabel>,
}

pub fn build_report(preds: &[EmotionLabel], golds: &[EmotionLabel]) -> Result<EvaluationReport> {
    check(preds, golds)?;
    let counts = count_matrix(preds, golds);
    let per_class = prf_from_counts(&counts);
    let correct: usize = (0..NUM_LABELS).map(|c| counts[c][c]).sum();
    let accuracy = correct as f64 / preds.len() as f64;
    // micro-averaged precision and recall both equal accuracy for
    // single-label data, so micro F1 is computed from global TP/FP/FN
    let fp: usize = preds.len() - correct;
    let micro_f1 = 2.0 * correct as f64 / (2 * correct + 2 * fp) as f64;
    Ok(EvaluationReport {
        samples: preds.len(),
        accuracy,
        macro_f1: macro_from(&per_class),
        weighted_f1: weighted_from(&per_class),
        micro_f1,
        per_emotion_accuracy: per_class.iter().map(|c| c.recall).collect(),
        zero_division: per_class
            .iter()
            .filter(|c| c.zero_division)
            .map(|c| c.label)
            .collect(),
        per_class: per_class.to_vec(),
        confusion: normalize(&counts),
        counts,
    })
}

impl EvaluationReport {
    /// Per-class table: `label,precision,recall,f1,support`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["label", "precision", "recall", "f1", "support"])?;
        for c in &self.per_class {
            out.write_record([
                c.label.to_string(),
                c.precision.to_string(),
                c.recall.to_string(),
                c.f1.to_string(),
                c.support.to_string(),
            ])?;
        }
        out.flush().map_err(|e| Error::Serialize(e.to_string()))?;
        Ok(())
    }
}
