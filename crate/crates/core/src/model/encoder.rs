use ndarray::{s, Array1, Array2, Array3, ArrayView3, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::checksum;
use crate::error::{Error, Result};
use crate::textprep::EncodedBatch;

/// Hidden states of every layer; index 0 is the embedding output, index
/// `num_layers` the final layer. Each entry is (batch, seq, hidden).
pub type HiddenStates = Vec<Array3<f64>>;

/// Gradient of the final encoder layer, flattened per tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct FinalLayerGrad {
    pub tensors: Vec<(String, Vec<f64>)>,
}

/// A pretrained encoder consumed as an opaque asset.
///
/// Stage-2 fine-tuning only touches the final block, so the trait exposes the
/// penultimate states and a backward pass for the final block instead of a
/// general autodiff graph.
pub trait EncoderAdapter: Send + Sync {
    fn identifier(&self) -> String;
    fn hidden_dim(&self) -> usize;
    fn num_layers(&self) -> usize;

    fn forward(&self, batch: &EncodedBatch) -> HiddenStates;

    /// States entering the final block, i.e. layer `num_layers - 1`.
    fn penultimate(&self, batch: &EncodedBatch) -> Array3<f64>;

    /// Position-0 output of the final block given its input states.
    fn final_cls(&self, penultimate: ArrayView3<'_, f64>, mask: &Array2<u8>) -> Array2<f64>;

    /// Gradient of the final block's parameters given dLoss/dCLS.
    fn final_backward(
        &self,
        penultimate: ArrayView3<'_, f64>,
        mask: &Array2<u8>,
        grad_cls: &Array2<f64>,
    ) -> FinalLayerGrad;

    /// Mutable flattened tensors of the final block, in the same order as
    /// [`FinalLayerGrad::tensors`].
    fn final_params_mut(&mut self) -> Vec<(String, &mut [f64])>;

    /// Flattened tensors of the final block.
    fn final_params(&self) -> Vec<(String, Vec<f64>)>;

    /// SHA-256 of each parameter group: `embeddings`, then `layer.{i}`.
    fn parameter_checksums(&self) -> Vec<(String, String)>;

    /// Per-layer trainability, index 0 = embeddings.
    fn trainable(&self) -> Vec<bool>;
    fn set_trainable(&mut self, layer: usize, trainable: bool);
}

#[derive(Debug, Clone, PartialEq)]
struct MixLayer {
    weight: Array2<f64>,
    bias: Array1<f64>,
}

/// Deterministic stand-in for a pretrained encoder.
///
/// Embeddings are a seeded random table indexed by token id. Each layer maps
/// `h'[t] = (h[t] + mean(h)) / 2 + W h[t] + b`, where the mean runs over
/// unmasked positions; `W` and `b` start at zero so the stack is a pure
/// averaging pass until fine-tuned.
#[derive(Debug, Clone, PartialEq)]
pub struct MockEncoder {
    embeddings: Array2<f64>,
    layers: Vec<MixLayer>,
    trainable: Vec<bool>,
    seed: u64,
}

impl MockEncoder {
    pub fn new(vocab_size: usize, hidden_dim: usize, num_layers: usize, seed: u64) -> Result<Self> {
        if hidden_dim == 0 || num_layers == 0 || vocab_size == 0 {
            return Err(Error::Config(format!(
                "mock encoder needs positive sizes (vocab {vocab_size}, hidden {hidden_dim}, layers {num_layers})"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 3f64.sqrt();
        let embeddings = Array2::from_shape_simple_fn((vocab_size, hidden_dim), || {
            rng.random_range(-scale..scale)
        });
        let layers = (0..num_layers)
            .map(|_| MixLayer {
                weight: Array2::zeros((hidden_dim, hidden_dim)),
                bias: Array1::zeros(hidden_dim),
            })
            .collect();
        Ok(MockEncoder {
            embeddings,
            layers,
            trainable: vec![false; num_layers + 1],
            seed,
        })
    }

    fn embed(&self, batch: &EncodedBatch) -> Array3<f64> {
        let (b, t) = batch.ids.dim();
        let h = self.hidden_dim();
        let vocab = self.embeddings.nrows();
        let mut out = Array3::zeros((b, t, h));
        for ((i, j), &id) in batch.ids.indexed_iter() {
            let row = (id as usize).min(vocab - 1);
            out.slice_mut(s![i, j, ..]).assign(&self.embeddings.row(row));
        }
        out
    }

    fn masked_mean(states: ArrayView3<'_, f64>, mask: &Array2<u8>) -> Array2<f64> {
        let (b, t, h) = states.dim();
        let mut mean = Array2::zeros((b, h));
        for i in 0..b {
            let mut n = 0usize;
            for j in 0..t {
                if mask[(i, j)] != 0 {
                    let mut row = mean.row_mut(i);
                    row += &states.slice(s![i, j, ..]);
                    n += 1;
                }
            }
            if n > 0 {
                mean.row_mut(i).mapv_inplace(|v| v / n as f64);
            }
        }
        mean
    }

    fn apply_layer(layer: &MixLayer, states: ArrayView3<'_, f64>, mask: &Array2<u8>) -> Array3<f64> {
        let (b, t, h) = states.dim();
        let mean = Self::masked_mean(states, mask);
        let flat = states.to_shape((b * t, h)).expect("contiguous states");
        let transformed = flat.dot(&layer.weight.t()) + &layer.bias;
        let mut out = transformed
            .into_shape_with_order((b, t, h))
            .expect("shape preserved");
        for i in 0..b {
            for j in 0..t {
                let mut cell = out.slice_mut(s![i, j, ..]);
                cell += &((&states.slice(s![i, j, ..]) + &mean.row(i)) * 0.5);
            }
        }
        out
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

impl EncoderAdapter for MockEncoder {
    fn identifier(&self) -> String {
        format!(
            "mock(vocab={},hidden={},layers={},seed={})",
            self.embeddings.nrows(),
            self.hidden_dim(),
            self.num_layers(),
            self.seed
        )
    }

    fn hidden_dim(&self) -> usize {
        self.embeddings.ncols()
    }

    fn num_layers(&self) -> usize {
        self.layers.len()
    }

    fn forward(&self, batch: &EncodedBatch) -> HiddenStates {
        let mut states = vec![self.embed(batch)];
        for layer in &self.layers {
            let next = Self::apply_layer(layer, states.last().unwrap().view(), &batch.mask);
            states.push(next);
        }
        states
    }

    fn penultimate(&self, batch: &EncodedBatch) -> Array3<f64> {
        let mut h = self.embed(batch);
        for layer in &self.layers[..self.layers.len() - 1] {
            h = Self::apply_layer(layer, h.view(), &batch.mask);
        }
        h
    }

    fn final_cls(&self, penultimate: ArrayView3<'_, f64>, mask: &Array2<u8>) -> Array2<f64> {
        let layer = self.layers.last().unwrap();
        let cls = penultimate.index_axis(Axis(1), 0);
        let mean = Self::masked_mean(penultimate, mask);
        (&cls + &mean) * 0.5 + cls.dot(&layer.weight.t()) + &layer.bias
    }

    fn final_backward(
        &self,
        penultimate: ArrayView3<'_, f64>,
        _mask: &Array2<u8>,
        grad_cls: &Array2<f64>,
    ) -> FinalLayerGrad {
        // out = ... + W cls + b, the averaging term has no parameters
        let cls = penultimate.index_axis(Axis(1), 0);
        let grad_w = grad_cls.t().dot(&cls);
        let grad_b = grad_cls.sum_axis(Axis(0));
        FinalLayerGrad {
            tensors: vec![
                ("weight".to_string(), grad_w.iter().copied().collect()),
                ("bias".to_string(), grad_b.to_vec()),
            ],
        }
    }

    fn final_params_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let layer = self.layers.last_mut().unwrap();
        vec![
            (
                "weight".to_string(),
                layer.weight.as_slice_mut().expect("standard layout"),
            ),
            ("bias".to_string(), layer.bias.as_slice_mut().expect("standard layout")),
        ]
    }

    fn final_params(&self) -> Vec<(String, Vec<f64>)> {
        let layer = self.layers.last().unwrap();
        vec![
            ("weight".to_string(), layer.weight.iter().copied().collect()),
            ("bias".to_string(), layer.bias.to_vec()),
        ]
    }

    fn parameter_checksums(&self) -> Vec<(String, String)> {
        let mut out = vec![(
            "embeddings".to_string(),
            checksum(self.embeddings.iter().copied()),
        )];
        for (i, layer) in self.layers.iter().enumerate() {
            out.push((
                format!("layer.{i}"),
                checksum(layer.weight.iter().chain(layer.bias.iter()).copied()),
            ));
        }
        out
    }

    fn trainable(&self) -> Vec<bool> {
        self.trainable.clone()
    }

    fn set_trainable(&mut self, layer: usize, trainable: bool) {
        if let Some(flag) = self.trainable.get_mut(layer) {
            *flag = trainable;
        }
    }
}

/// Position-0 hidden state of `layer` for every item in the batch.
pub fn extract_features(
    batch: &EncodedBatch,
    encoder: &dyn EncoderAdapter,
    layer: Option<usize>,
) -> Result<Array2<f64>> {
    let layer = layer.unwrap_or(encoder.num_layers());
    if layer > encoder.num_layers() {
        return Err(Error::Config(format!(
            "layer {layer} out of range, encoder has {} layers",
            encoder.num_layers()
        )));
    }
    let states = encoder.forward(batch);
    Ok(states[layer].index_axis(Axis(1), 0).to_owned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textprep::{encode_batch, MockTokenizer, TruncationPolicy};

    fn batch(texts: &[&str]) -> EncodedBatch {
        encode_batch(texts, &MockTokenizer::new(64).unwrap(), TruncationPolicy::new(8).unwrap()).unwrap()
    }

    #[test]
    fn forward_shape() {
        let enc = MockEncoder::new(64, 6, 3, 0).unwrap();
        let states = enc.forward(&batch(&["a b", "c"]));
        assert_eq!(states.len(), 4);
        assert!(states.iter().all(|s| s.dim() == (2, 8, 6)));
    }

    #[test]
    fn features_are_position_zero() {
        let enc = MockEncoder::new(64, 6, 2, 0).unwrap();
        let b = batch(&["x y z"]);
        let states = enc.forward(&b);
        for layer in 0..=2 {
            let f = extract_features(&b, &enc, Some(layer)).unwrap();
            assert_eq!(f.dim(), (1, 6));
            assert_eq!(f.row(0), states[layer].slice(s![0, 0, ..]));
        }
        assert!(matches!(extract_features(&b, &enc, Some(3)), Err(Error::Config(_))));
    }

    #[test]
    fn final_cls_matches_forward() {
        let mut enc = MockEncoder::new(64, 5, 2, 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (_, p) in enc.final_params_mut() {
            p.iter_mut().for_each(|v| *v = rng.random_range(-0.5..0.5));
        }
        let b = batch(&["kya baat", "hello there friend"]);
        let pen = enc.penultimate(&b);
        let via_final = enc.final_cls(pen.view(), &b.mask);
        let via_forward = extract_features(&b, &enc, None).unwrap();
        for (a, c) in via_final.iter().zip(via_forward.iter()) {
            assert!((a - c).abs() < 1e-12);
        }
    }

    #[test]
    fn final_backward_matches_finite_differences() {
        let mut enc = MockEncoder::new(64, 4, 2, 3).unwrap();
        let b = batch(&["p q r", "s"]);
        let pen = enc.penultimate(&b);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let probe = Array2::from_shape_simple_fn((2, 4), || rng.random_range(-1.0..1.0));
        // scalar objective: sum(probe * cls)
        let objective = |e: &MockEncoder| (&e.final_cls(pen.view(), &b.mask) * &probe).sum();
        let grad = enc.final_backward(pen.view(), &b.mask, &probe);
        let eps = 1e-6;
        for (t, (_, g)) in grad.tensors.iter().enumerate() {
            for k in 0..g.len() {
                let orig = enc.final_params_mut()[t].1[k];
                enc.final_params_mut()[t].1[k] = orig + eps;
                let up = objective(&enc);
                enc.final_params_mut()[t].1[k] = orig - eps;
                let down = objective(&enc);
                enc.final_params_mut()[t].1[k] = orig;
                let fd = (up - down) / (2.0 * eps);
                assert!((fd - g[k]).abs() < 1e-6, "tensor {t} index {k}: {fd} vs {}", g[k]);
            }
        }
    }

    #[test]
    fn checksums_cover_groups() {
        let enc = MockEncoder::new(64, 4, 3, 0).unwrap();
        let names: Vec<_> = enc.parameter_checksums().into_iter().map(|c| c.0).collect();
        assert_eq!(names, ["embeddings", "layer.0", "layer.1", "layer.2"]);
        assert_eq!(enc.trainable(), vec![false; 4]);
    }
}
