//! Checkpoint directory: `manifest.json` describing the tensors and
//! `params.bin` holding them as little-endian f64, back to back.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::encoder::EncoderAdapter;
use super::head::ClassifierHead;
use crate::corpus::EmotionLabel;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const PARAMS_FILE: &str = "params.bin";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Offset in f64 elements.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format_version: u32,
    pub input_dim: usize,
    pub hidden: usize,
    pub dropout: f64,
    pub labels: Vec<EmotionLabel>,
    pub encoder: String,
    pub layer: usize,
    pub tensors: Vec<TensorEntry>,
}

/// Writes head parameters and the encoder's final block.
pub fn save_checkpoint(
    dir: &Path,
    head: &ClassifierHead,
    encoder: &dyn EncoderAdapter,
) -> Result<CheckpointManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut blob: Vec<u8> = Vec::new();
    let mut tensors = Vec::new();
    let mut push = |name: String, shape: Vec<usize>, data: &[f64]| {
        tensors.push(TensorEntry {
            name,
            shape,
            offset: blob.len() / 8,
        });
        for v in data {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    };
    for (name, shape, data) in head.tensors() {
        push(name.to_string(), shape, data);
    }
    for (name, data) in encoder.final_params() {
        let len = data.len();
        push(format!("encoder.final.{name}"), vec![len], &data);
    }
    let manifest = CheckpointManifest {
        format_version: 1,
        input_dim: head.input_dim(),
        hidden: head.hidden(),
        dropout: head.dropout,
        labels: EmotionLabel::ALL.to_vec(),
        encoder: encoder.identifier(),
        layer: encoder.num_layers(),
        tensors,
    };
    let params = dir.join(PARAMS_FILE);
    fs::write(&params, &blob).map_err(|e| Error::io(&params, e))?;
    let mpath = dir.join(MANIFEST_FILE);
    fs::write(&mpath, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&mpath, e))?;
    Ok(manifest)
}

fn read_tensor(manifest: &CheckpointManifest, blob: &[u8], name: &str) -> Result<(Vec<usize>, Vec<f64>)> {
    let entry = manifest
        .tensors
        .iter()
        .find(|t| t.name == name)
        .ok_or_else(|| Error::Validation(format!("checkpoint has no tensor '{name}'")))?;
    let len: usize = entry.shape.iter().product();
    let start = entry.offset * 8;
    let end = start + len * 8;
    if end > blob.len() {
        return Err(Error::Validation(format!("tensor '{name}' runs past the blob")));
    }
    let data = blob[start..end]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok((entry.shape.clone(), data))
}

pub fn load_head(dir: &Path) -> Result<(ClassifierHead, CheckpointManifest)> {
    let mpath = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let manifest: CheckpointManifest = serde_json::from_str(&text)?;
    if manifest.labels != EmotionLabel::ALL {
        return Err(Error::Validation("checkpoint label order differs from the canonical order".into()));
    }
    let ppath = dir.join(PARAMS_FILE);
    let blob = fs::read(&ppath).map_err(|e| Error::io(&ppath, e))?;
    let matrix = |name: &str| -> Result<Array2<f64>> {
        let (shape, data) = read_tensor(&manifest, &blob, name)?;
        Array2::from_shape_vec((shape[0], shape[1]), data)
            .map_err(|e| Error::Validation(format!("tensor '{name}': {e}")))
    };
    let vector = |name: &str| -> Result<Array1<f64>> {
        Ok(Array1::from(read_tensor(&manifest, &blob, name)?.1))
    };
    let head = ClassifierHead {
        w1: matrix("head.w1")?,
        b1: vector("head.b1")?,
        w2: matrix("head.w2")?,
        b2: vector("head.b2")?,
        dropout: manifest.dropout,
    };
    Ok((head, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{HeadConfig, MockEncoder};

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let enc = MockEncoder::new(32, 4, 2, 0).unwrap();
        let head = ClassifierHead::new(4, HeadConfig { hidden: 5, dropout: 0.5 }, 7).unwrap();
        let m = save_checkpoint(dir.path(), &head, &enc).unwrap();
        assert_eq!(m.tensors.len(), 6);
        let (loaded, m2) = load_head(dir.path()).unwrap();
        assert_eq!(loaded, head);
        assert_eq!(m, m2);
        assert_eq!(m2.layer, 2);
    }
}
