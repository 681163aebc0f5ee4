//! Encoder abstraction, CLS feature extraction, the classifier head and the
//! feature-based baselines.

mod baseline;
mod checkpoint;
mod encoder;
mod head;

use std::io::Write;

use ndarray::Array2;
use sha2::{Digest, Sha256};

pub use baseline::{fit_baseline, predict_baseline, BaselineKind, FeatureBaseline};
pub use checkpoint::{load_head, save_checkpoint, CheckpointManifest, TensorEntry};
pub use encoder::{extract_features, EncoderAdapter, FinalLayerGrad, HiddenStates, MockEncoder};
pub use head::{predict_label, ClassifierHead, ForwardCache, HeadConfig, HeadGrad, Mode};

use crate::corpus::EmotionLabel;
use crate::error::{Error, Result};

/// Hex SHA-256 over the little-endian bytes of a parameter stream.
pub fn checksum(values: impl Iterator<Item = f64>) -> String {
    let mut hasher = Sha256::new();
    for v in values {
        hasher.update(v.to_le_bytes());
    }
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Features as CSV (`f0..fN,label`), for external baseline tooling.
pub fn write_features_csv<W: Write>(
    w: W,
    features: &Array2<f64>,
    labels: Option<&[EmotionLabel]>,
) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<String> = (0..features.ncols()).map(|i| format!("f{i}")).collect();
    if labels.is_some() {
        header.push("label".into());
    }
    out.write_record(&header)?;
    for (i, row) in features.rows().into_iter().enumerate() {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        if let Some(l) = labels {
            rec.push(l[i].to_string());
        }
        out.write_record(&rec)?;
    }
    out.flush().map_err(|e| Error::Serialize(e.to_string()))?;
    Ok(())
}
