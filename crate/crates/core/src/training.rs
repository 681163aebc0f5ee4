//! Two-stage fine-tuning: first the classifier head alone with a linear
//! warmup, then the head together with the encoder's final block at a
//! smaller constant rate.

use std::io::Write;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{EmotionLabel, NUM_LABELS};
use crate::error::{Error, Result};
use crate::evalkit::{build_report, macro_f1, EvaluationReport};
use crate::model::{extract_features, predict_label, ClassifierHead, EncoderAdapter, Mode};
use crate::textprep::EncodedBatch;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// Class-rebalancing by resampling. Only `none` is implemented.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resampling {
    #[default]
    None,
    Oversample,
    Undersample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StagedSchedule {
    pub frozen_epochs: usize,
    pub finetune_epochs: usize,
    pub lr_stage1: f64,
    pub lr_stage2: f64,
    pub warmup_steps: u64,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: OptimizerConfig,
    /// Restore the epoch with the best validation macro-F1 instead of
    /// keeping the last one.
    pub select_best_validation: bool,
    pub resampling: Resampling,
}

impl Default for StagedSchedule {
    fn default() -> Self {
        StagedSchedule {
            frozen_epochs: 4,
            finetune_epochs: 3,
            lr_stage1: 5e-5,
            lr_stage2: 2e-5,
            warmup_steps: 10_000,
            batch_size: 64,
            seed: 0,
            optimizer: OptimizerConfig::default(),
            select_best_validation: false,
            resampling: Resampling::None,
        }
    }
}

impl StagedSchedule {
    pub fn validate(&self) -> Result<()> {
        let rate_ok = |r: f64| r.is_finite() && r > 0.0;
        if !rate_ok(self.lr_stage1) || !rate_ok(self.lr_stage2) {
            return Err(Error::Config(format!(
                "learning rates must be positive (got {} / {})",
                self.lr_stage1, self.lr_stage2
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        let o = &self.optimizer;
        if !(0.0..1.0).contains(&o.beta1) || !(0.0..1.0).contains(&o.beta2) || o.eps <= 0.0 || o.weight_decay < 0.0 {
            return Err(Error::Config(format!("invalid optimizer settings {o:?}")));
        }
        if self.resampling != Resampling::None {
            return Err(Error::Config(format!(
                "resampling '{:?}' is not implemented; use class weights",
                self.resampling
            )));
        }
        Ok(())
    }
}

/// Linear warmup from 0 to `base_lr` over `warmup_steps`, constant after.
pub fn lr_at_step(step: u64, base_lr: f64, warmup_steps: u64) -> f64 {
    if warmup_steps == 0 || step >= warmup_steps {
        base_lr
    } else {
        base_lr * step as f64 / warmup_steps as f64
    }
}

pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossValue {
    pub loss: f64,
    /// Items whose gold probability was clamped to [`PROB_FLOOR`].
    pub clamped: usize,
}

/// Mean over the batch of `weight[gold] * -ln p[gold]`.
pub fn weighted_cross_entropy(
    probs: &Array2<f64>,
    gold: &[EmotionLabel],
    weights: &[f64; NUM_LABELS],
) -> Result<LossValue> {
    if probs.nrows() != gold.len() || probs.ncols() != NUM_LABELS {
        return Err(Error::Shape {
            expected: format!("{} x {NUM_LABELS}", gold.len()),
            actual: format!("{} x {}", probs.nrows(), probs.ncols()),
        });
    }
    if gold.is_empty() {
        return Err(Error::Input("empty batch".into()));
    }
    if weights.iter().any(|&w| w.is_nan() || w <= 0.0) {
        return Err(Error::Config(format!("class weights must be positive: {weights:?}")));
    }
    let mut clamped = 0;
    let mut total = 0.0;
    for (row, g) in probs.rows().into_iter().zip(gold) {
        let p = row[g.index()];
        let p = if p < PROB_FLOOR {
            clamped += 1;
            PROB_FLOOR
        } else {
            p
        };
        total += weights[g.index()] * -p.ln();
    }
    if clamped > 0 {
        log::warn!("{clamped} gold probabilities clamped to {PROB_FLOOR}");
    }
    Ok(LossValue {
        loss: total / gold.len() as f64,
        clamped,
    })
}

/// dLoss/dlogits for softmax + weighted cross-entropy.
fn grad_logits(probs: &Array2<f64>, gold: &[EmotionLabel], weights: &[f64; NUM_LABELS]) -> Array2<f64> {
    let n = gold.len() as f64;
    let mut g = probs.clone();
    for (mut row, y) in g.rows_mut().into_iter().zip(gold) {
        row[y.index()] -= 1.0;
        row *= weights[y.index()] / n;
    }
    g
}

/// Adam with decoupled weight decay; moment buffers keyed by tensor name.
#[derive(Debug, Clone)]
pub struct AdamW {
    config: OptimizerConfig,
    step: u64,
    moments: Vec<(String, Vec<f64>, Vec<f64>)>,
}

impl AdamW {
    pub fn new(config: OptimizerConfig) -> Self {
        AdamW {
            config,
            step: 0,
            moments: Vec::new(),
        }
    }

    /// Advances the shared step counter; call once per optimizer step.
    pub fn tick(&mut self) {
        self.step += 1;
    }

    pub fn update(&mut self, name: &str, params: &mut [f64], grads: &[f64], lr: f64) {
        debug_assert_eq!(params.len(), grads.len());
        let pos = match self.moments.iter().position(|m| m.0 == name) {
            Some(p) => p,
            None => {
                self.moments
                    .push((name.to_string(), vec![0.0; params.len()], vec![0.0; params.len()]));
                self.moments.len() - 1
            }
        };
        let OptimizerConfig {
            beta1,
            beta2,
            eps,
            weight_decay,
        } = self.config;
        let t = self.step.max(1) as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        let (_, m, v) = &mut self.moments[pos];
        for i in 0..params.len() {
            let g = grads[i];
            m[i] = beta1 * m[i] + (1.0 - beta1) * g;
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
            params[i] -= lr * weight_decay * params[i];
            params[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
        }
    }
}

/// Encoded texts with gold labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBatch {
    pub batch: EncodedBatch,
    pub labels: Vec<EmotionLabel>,
}

impl LabeledBatch {
    pub fn new(batch: EncodedBatch, labels: Vec<EmotionLabel>) -> Result<Self> {
        if batch.len() != labels.len() {
            return Err(Error::Input(format!(
                "{} encoded rows for {} labels",
                batch.len(),
                labels.len()
            )));
        }
        Ok(LabeledBatch { batch, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn select(&self, idx: &[usize]) -> LabeledBatch {
        LabeledBatch {
            batch: self.batch.select(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingData {
    pub train: LabeledBatch,
    pub validation: Option<LabeledBatch>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub stage: u8,
    pub epoch: usize,
    pub loss: f64,
    pub train_f1: f64,
    pub val_f1: Option<f64>,
    pub lr: f64,
    /// Encoder groups followed by `head`.
    pub checksums: Vec<(String, String)>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub initial_checksums: Vec<(String, String)>,
    pub records: Vec<EpochRecord>,
    /// Total gold probabilities clamped while computing the loss.
    pub clamped: usize,
}

impl TrainHistory {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["stage", "epoch", "loss", "train_f1", "val_f1", "lr"])?;
        for r in &self.records {
            out.write_record([
                r.stage.to_string(),
                r.epoch.to_string(),
                r.loss.to_string(),
                r.train_f1.to_string(),
                r.val_f1.map(|v| v.to_string()).unwrap_or_default(),
                r.lr.to_string(),
            ])?;
        }
        out.flush().map_err(|e| Error::Serialize(e.to_string()))?;
        Ok(())
    }
}

fn all_checksums(encoder: &dyn EncoderAdapter, head: &ClassifierHead) -> Vec<(String, String)> {
    let mut c = encoder.parameter_checksums();
    c.push(("head".to_string(), head.checksum()));
    c
}

/// Labels predicted with dropout off.
pub fn predict(encoder: &dyn EncoderAdapter, head: &ClassifierHead, batch: &EncodedBatch) -> Result<Vec<EmotionLabel>> {
    if batch.is_empty() {
        return Ok(Vec::new());
    }
    let features = extract_features(batch, encoder, None)?;
    predict_label(&head.classify(&features, Mode::Inference)?)
}

pub fn evaluate(encoder: &dyn EncoderAdapter, head: &ClassifierHead, data: &LabeledBatch) -> Result<EvaluationReport> {
    build_report(&predict(encoder, head, &data.batch)?, &data.labels)
}

fn score(encoder: &dyn EncoderAdapter, head: &ClassifierHead, data: &LabeledBatch) -> Result<f64> {
    macro_f1(&predict(encoder, head, &data.batch)?, &data.labels)
}

struct Snapshot {
    head: ClassifierHead,
    final_block: Vec<(String, Vec<f64>)>,
}

/// Runs both stages in place on `encoder` and `head`.
pub fn train_staged(
    encoder: &mut dyn EncoderAdapter,
    head: &mut ClassifierHead,
    data: &TrainingData,
    schedule: &StagedSchedule,
    weights: &[f64; NUM_LABELS],
) -> Result<TrainHistory> {
    schedule.validate()?;
    if data.train.is_empty() {
        return Err(Error::Config("training data is empty".into()));
    }
    if head.input_dim() != encoder.hidden_dim() {
        return Err(Error::Shape {
            expected: format!("head input {}", encoder.hidden_dim()),
            actual: head.input_dim().to_string(),
        });
    }
    let mut history = TrainHistory {
        initial_checksums: all_checksums(encoder, head),
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    let mut best: Option<(f64, Snapshot)> = None;
    let n = data.train.len();
    let last_layer = encoder.num_layers();

    for layer in 0..=last_layer {
        encoder.set_trainable(layer, false);
    }

    // stage 1: frozen encoder, so CLS features are computed once
    let features = extract_features(&data.train.batch, encoder, None)?;
    let mut optimizer = AdamW::new(schedule.optimizer);
    let mut step: u64 = 0;
    for epoch in 0..schedule.frozen_epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let (mut loss_sum, mut lr) = (0.0, 0.0);
        for (b, chunk) in order.chunks(schedule.batch_size).enumerate() {
            step += 1;
            lr = lr_at_step(step, schedule.lr_stage1, schedule.warmup_steps);
            let x = features.select(ndarray::Axis(0), chunk);
            let y: Vec<_> = chunk.iter().map(|&i| data.train.labels[i]).collect();
            let cache = head.forward(&x, Mode::Training(&mut rng))?;
            let loss = weighted_cross_entropy(&cache.probs, &y, weights)?;
            if !loss.loss.is_finite() {
                return Err(Error::Divergence { stage: 1, epoch, step: b });
            }
            history.clamped += loss.clamped;
            loss_sum += loss.loss * chunk.len() as f64;
            let grads = head.backward(&cache, &grad_logits(&cache.probs, &y, weights));
            optimizer.tick();
            apply_head(&mut optimizer, head, &grads, lr);
        }
        finish_epoch(encoder, head, data, &mut history, &mut best, schedule, 1, epoch, loss_sum / n as f64, lr)?;
    }

    // stage 2: final block unfrozen
    if schedule.finetune_epochs > 0 {
        encoder.set_trainable(last_layer, true);
    }
    let mut optimizer = AdamW::new(schedule.optimizer);
    for epoch in 0..schedule.finetune_epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let lr = schedule.lr_stage2;
        let mut loss_sum = 0.0;
        for (b, chunk) in order.chunks(schedule.batch_size).enumerate() {
            let part = data.train.select(chunk);
            let pen = encoder.penultimate(&part.batch);
            let x = encoder.final_cls(pen.view(), &part.batch.mask);
            let cache = head.forward(&x, Mode::Training(&mut rng))?;
            let loss = weighted_cross_entropy(&cache.probs, &part.labels, weights)?;
            if !loss.loss.is_finite() {
                return Err(Error::Divergence { stage: 2, epoch, step: b });
            }
            history.clamped += loss.clamped;
            loss_sum += loss.loss * chunk.len() as f64;
            let grads = head.backward(&cache, &grad_logits(&cache.probs, &part.labels, weights));
            let enc_grads = encoder.final_backward(pen.view(), &part.batch.mask, &grads.features);
            optimizer.tick();
            apply_head(&mut optimizer, head, &grads, lr);
            if encoder.trainable()[last_layer] {
                for ((name, params), (_, g)) in encoder.final_params_mut().into_iter().zip(&enc_grads.tensors) {
                    optimizer.update(&format!("encoder.final.{name}"), params, g, lr);
                }
            }
        }
        finish_epoch(encoder, head, data, &mut history, &mut best, schedule, 2, epoch, loss_sum / n as f64, lr)?;
    }

    if let Some((_, snap)) = best {
        *head = snap.head;
        for ((_, params), (_, saved)) in encoder.final_params_mut().into_iter().zip(snap.final_block) {
            params.copy_from_slice(&saved);
        }
    }
    encoder.set_trainable(last_layer, false);
    Ok(history)
}

fn apply_head(optimizer: &mut AdamW, head: &mut ClassifierHead, grads: &crate::model::HeadGrad, lr: f64) {
    let grad_slices = [
        grads.w1.as_slice().expect("standard layout"),
        grads.b1.as_slice().expect("standard layout"),
        grads.w2.as_slice().expect("standard layout"),
        grads.b2.as_slice().expect("standard layout"),
    ];
    for ((name, params), g) in head.tensors_mut().into_iter().zip(grad_slices) {
        optimizer.update(name, params, g, lr);
    }
}

#[allow(clippy::too_many_arguments)]
fn finish_epoch(
    encoder: &dyn EncoderAdapter,
    head: &ClassifierHead,
    data: &TrainingData,
    history: &mut TrainHistory,
    best: &mut Option<(f64, Snapshot)>,
    schedule: &StagedSchedule,
    stage: u8,
    epoch: usize,
    loss: f64,
    lr: f64,
) -> Result<()> {
    let train_f1 = score(encoder, head, &data.train)?;
    let val_f1 = match &data.validation {
        Some(v) if !v.is_empty() => Some(score(encoder, head, v)?),
        _ => None,
    };
    if schedule.select_best_validation {
        if let Some(v) = val_f1 {
            if best.as_ref().is_none_or(|(b, _)| v > *b) {
                *best = Some((
                    v,
                    Snapshot {
                        head: head.clone(),
                        final_block: encoder.final_params(),
                    },
                ));
            }
        }
    }
    history.records.push(EpochRecord {
        stage,
        epoch,
        loss,
        train_f1,
        val_f1,
        lr,
        checksums: all_checksums(encoder, head),
    });
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochSweepRow {
    pub frozen_epochs: usize,
    pub finetune_epochs: usize,
    pub train_f1: Option<f64>,
    pub val_f1: Option<f64>,
    pub test_f1: Option<f64>,
    pub error: Option<String>,
    #[serde(skip)]
    pub history: Option<TrainHistory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochSweep {
    pub rows: Vec<EpochSweepRow>,
    /// Index into `rows` of the cell with the best validation F1.
    pub best: Option<usize>,
}

impl EpochSweep {
    /// Columns follow the epoch-grid table: frozen, fine-tuning, then scores.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["frozen", "finetune", "train_f1", "val_f1", "test_f1", "best", "error"])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for (i, r) in self.rows.iter().enumerate() {
            out.write_record([
                r.frozen_epochs.to_string(),
                r.finetune_epochs.to_string(),
                opt(r.train_f1),
                opt(r.val_f1),
                opt(r.test_f1),
                (self.best == Some(i)).to_string(),
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        out.flush().map_err(|e| Error::Serialize(e.to_string()))?;
        Ok(())
    }
}

/// A freshly initialized encoder and head; every sweep cell starts from one.
pub trait ModelFactory: Sync {
    fn build(&self) -> Result<(Box<dyn EncoderAdapter>, ClassifierHead)>;
}

impl<F> ModelFactory for F
where
    F: Fn() -> Result<(Box<dyn EncoderAdapter>, ClassifierHead)> + Sync,
{
    fn build(&self) -> Result<(Box<dyn EncoderAdapter>, ClassifierHead)> {
        self()
    }
}

fn run_cell(
    factory: &dyn ModelFactory,
    schedule: &StagedSchedule,
    data: &TrainingData,
    test: Option<&LabeledBatch>,
    weights: &[f64; NUM_LABELS],
) -> Result<(f64, Option<f64>, Option<f64>, TrainHistory)> {
    let (mut encoder, mut head) = factory.build()?;
    let history = train_staged(encoder.as_mut(), &mut head, data, schedule, weights)?;
    let train = score(encoder.as_ref(), &head, &data.train)?;
    let val = match &data.validation {
        Some(v) if !v.is_empty() => Some(score(encoder.as_ref(), &head, v)?),
        _ => None,
    };
    let test = match test {
        Some(t) if !t.is_empty() => Some(score(encoder.as_ref(), &head, t)?),
        _ => None,
    };
    Ok((train, val, test, history))
}

/// Trains one model per `(frozen, finetune)` cell from identical
/// initialization. Cells run on up to `workers` threads; row order follows
/// the grid. Failed cells are recorded and the sweep continues.
pub fn epoch_sweep(
    grid: &[(usize, usize)],
    base: &StagedSchedule,
    factory: &dyn ModelFactory,
    data: &TrainingData,
    test: Option<&LabeledBatch>,
    weights: &[f64; NUM_LABELS],
    workers: usize,
) -> Result<EpochSweep> {
    if grid.is_empty() {
        return Err(Error::Config("epoch grid is empty".into()));
    }
    let workers = workers.clamp(1, grid.len());
    let mut rows: Vec<Option<EpochSweepRow>> = vec![None; grid.len()];
    let next = std::sync::atomic::AtomicUsize::new(0);
    let results = std::sync::Mutex::new(&mut rows);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                let Some(&(k1, k2)) = grid.get(i) else { break };
                let schedule = StagedSchedule {
                    frozen_epochs: k1,
                    finetune_epochs: k2,
                    ..*base
                };
                let row = match run_cell(factory, &schedule, data, test, weights) {
                    Ok((train, val, test, history)) => EpochSweepRow {
                        frozen_epochs: k1,
                        finetune_epochs: k2,
                        train_f1: Some(train),
                        val_f1: val,
                        test_f1: test,
                        error: None,
                        history: Some(history),
                    },
                    Err(e) => EpochSweepRow {
                        frozen_epochs: k1,
                        finetune_epochs: k2,
                        train_f1: None,
                        val_f1: None,
                        test_f1: None,
                        error: Some(e.to_string()),
                        history: None,
                    },
                };
                results.lock().expect("sweep results lock")[i] = Some(row);
            });
        }
    });
    let rows: Vec<EpochSweepRow> = rows.into_iter().map(|r| r.expect("every cell ran")).collect();
    let best = rows
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.val_f1.map(|v| (i, v, r.frozen_epochs + r.finetune_epochs)))
        .fold(None::<(usize, f64, usize)>, |acc, cand| match acc {
            Some(b) if b.1 > cand.1 || (b.1 == cand.1 && b.2 <= cand.2) => Some(b),
            _ => Some(cand),
        })
        .map(|b| b.0);
    Ok(EpochSweep { rows, best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use EmotionLabel::*;

    #[test]
    fn warmup_points() {
        assert_eq!(lr_at_step(0, 5e-5, 10_000), 0.0);
        assert_relative_eq!(lr_at_step(5_000, 5e-5, 10_000), 2.5e-5, max_relative = 1e-15);
        assert_eq!(lr_at_step(10_000, 5e-5, 10_000), 5e-5);
        assert_eq!(lr_at_step(25_000, 5e-5, 10_000), 5e-5);
        assert_eq!(lr_at_step(0, 5e-5, 0), 5e-5);
    }

    #[test]
    fn loss_fixtures() {
        let uniform = Array2::from_elem((3, 8), 0.125);
        let gold = [Joy, Fear, Neutral];
        let l = weighted_cross_entropy(&uniform, &gold, &[1.0; 8]).unwrap();
        assert!((l.loss - 8f64.ln()).abs() < 1e-12);
        let mut w = [1.0; 8];
        for g in gold {
            w[g.index()] = 2.0;
        }
        let l2 = weighted_cross_entropy(&uniform, &gold, &w).unwrap();
        assert!((l2.loss - 2.0 * 8f64.ln()).abs() < 1e-12);
        let mut onehot = Array2::zeros((1, 8));
        onehot[(0, Sadness.index())] = 1.0;
        assert_eq!(weighted_cross_entropy(&onehot, &[Sadness], &[1.0; 8]).unwrap().loss, 0.0);
    }

    #[test]
    fn zero_gold_probability_is_clamped() {
        let mut p = Array2::zeros((1, 8));
        p[(0, 0)] = 1.0;
        let l = weighted_cross_entropy(&p, &[Joy], &[1.0; 8]).unwrap();
        assert_eq!(l.clamped, 1);
        assert!((l.loss + PROB_FLOOR.ln()).abs() < 1e-9);
    }

    #[test]
    fn schedule_validation() {
        assert!(StagedSchedule::default().validate().is_ok());
        let bad = StagedSchedule {
            lr_stage1: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let resample = StagedSchedule {
            resampling: Resampling::Oversample,
            ..Default::default()
        };
        assert!(matches!(resample.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn adamw_first_step_moves_by_lr() {
        let mut opt = AdamW::new(OptimizerConfig {
            weight_decay: 0.0,
            ..Default::default()
        });
        let mut p = [1.0, -1.0];
        opt.tick();
        opt.update("p", &mut p, &[0.3, -2.0], 0.1);
        // bias-corrected first step is lr * sign(g) up to eps
        assert!((p[0] - 0.9).abs() < 1e-6);
        assert!((p[1] + 0.9).abs() < 1e-6);
    }
}
