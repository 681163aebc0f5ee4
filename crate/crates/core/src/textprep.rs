//! Tokenization adapter, utterance-length analytics and the fixed-length
//! truncation/padding policy that feeds the encoder.

use std::collections::BTreeMap;
use std::io::Write;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecialTokens {
    pub cls: u32,
    pub sep: u32,
    pub pad: u32,
    pub unk: u32,
}

impl SpecialTokens {
    pub fn distinct(&self) -> bool {
        let ids = [self.cls, self.sep, self.pad, self.unk];
        (0..4).all(|i| (i + 1..4).all(|j| ids[i] != ids[j]))
    }
}

/// Text to token ids. Implementations must be deterministic and safe for
/// concurrent read-only use.
pub trait TokenizerAdapter: Send + Sync {
    fn vocab_size(&self) -> usize;
    fn special(&self) -> SpecialTokens;
    /// Content token ids, without special tokens.
    fn tokenize(&self, text: &str) -> Vec<u32>;

    /// `[cls] content [sep]`.
    fn encode(&self, text: &str) -> Vec<u32> {
        let sp = self.special();
        let mut ids = Vec::with_capacity(text.len() / 4 + 2);
        ids.push(sp.cls);
        ids.extend(self.tokenize(text));
        ids.push(sp.sep);
        ids
    }
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Whitespace splitter that hashes each word into the vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MockTokenizer {
    vocab_size: usize,
}

impl MockTokenizer {
    pub const SPECIAL: SpecialTokens = SpecialTokens {
        pad: 0,
        cls: 1,
        sep: 2,
        unk: 3,
    };

    pub fn new(vocab_size: usize) -> Result<Self> {
        if vocab_size <= 4 {
            return Err(Error::Config(format!(
                "mock vocabulary of {vocab_size} leaves no room for content tokens"
            )));
        }
        Ok(MockTokenizer { vocab_size })
    }
}

impl Default for MockTokenizer {
    fn default() -> Self {
        MockTokenizer { vocab_size: 8192 }
    }
}

impl TokenizerAdapter for MockTokenizer {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn special(&self) -> SpecialTokens {
        Self::SPECIAL
    }

    fn tokenize(&self, text: &str) -> Vec<u32> {
        let content = (self.vocab_size - 4) as u64;
        text.split_whitespace()
            .map(|w| 4 + (fnv1a(w.as_bytes()) % content) as u32)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    /// Maximum row length, special tokens included.
    pub max_len: usize,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy { max_len: 55 }
    }
}

impl TruncationPolicy {
    pub fn new(max_len: usize) -> Result<Self> {
        let p = TruncationPolicy { max_len };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_len < 3 {
            return Err(Error::Config(format!("max_len {} is below 3", self.max_len)));
        }
        Ok(())
    }
}

/// Fixed-width token ids plus attention mask (1 = real token, 0 = padding).
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedBatch {
    pub ids: Array2<u32>,
    pub mask: Array2<u8>,
}

impl EncodedBatch {
    pub fn len(&self) -> usize {
        self.ids.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.nrows() == 0
    }

    pub fn seq_len(&self) -> usize {
        self.ids.ncols()
    }

    /// Rows `idx` as a new batch.
    pub fn select(&self, idx: &[usize]) -> EncodedBatch {
        EncodedBatch {
            ids: self.ids.select(ndarray::Axis(0), idx),
            mask: self.mask.select(ndarray::Axis(0), idx),
        }
    }
}

/// Encodes, truncates from the end and right-pads every text to `max_len`.
pub fn encode_batch<T: AsRef<str>>(
    texts: &[T],
    tokenizer: &dyn TokenizerAdapter,
    policy: TruncationPolicy,
) -> Result<EncodedBatch> {
    policy.validate()?;
    let pad = tokenizer.special().pad;
    let mut ids = Array2::from_elem((texts.len(), policy.max_len), pad);
    let mut mask = Array2::zeros((texts.len(), policy.max_len));
    for (row, text) in texts.iter().enumerate() {
        let encoded = tokenizer.encode(text.as_ref());
        for (col, &id) in encoded.iter().take(policy.max_len).enumerate() {
            ids[(row, col)] = id;
            mask[(row, col)] = 1;
        }
    }
    Ok(EncodedBatch { ids, mask })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LengthHistogram {
    pub bins: BTreeMap<usize, usize>,
    pub total: usize,
}

impl LengthHistogram {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["length", "count"])?;
        for (len, count) in &self.bins {
            out.write_record([len.to_string(), count.to_string()])?;
        }
        out.flush().map_err(|e| Error::Serialize(e.to_string()))?;
        Ok(())
    }

    /// Share of utterances strictly longer than `len`.
    pub fn fraction_above(&self, len: usize) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let above: usize = self.bins.range(len + 1..).map(|(_, c)| c).sum();
        above as f64 / self.total as f64
    }
}

/// Untruncated encoded lengths, special tokens included.
pub fn token_length_histogram<T: AsRef<str>>(
    utterances: &[T],
    tokenizer: &dyn TokenizerAdapter,
) -> LengthHistogram {
    let mut hist = LengthHistogram::default();
    for u in utterances {
        *hist.bins.entry(tokenizer.encode(u.as_ref()).len()).or_insert(0) += 1;
        hist.total += 1;
    }
    hist
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthSweepRow {
    pub max_len: usize,
    pub score: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthSweep {
    pub rows: Vec<LengthSweepRow>,
    pub best: Option<usize>,
}

impl LengthSweep {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["max_len", "score", "best", "error"])?;
        for r in &self.rows {
            out.write_record([
                r.max_len.to_string(),
                r.score.map(|s| s.to_string()).unwrap_or_default(),
                (Some(r.max_len) == self.best).to_string(),
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        out.flush().map_err(|e| Error::Serialize(e.to_string()))?;
        Ok(())
    }
}

/// Scores every candidate length; failures are recorded and skipped. The
/// best length maximizes the score, ties going to the smaller length.
pub fn sweep_max_length<F>(candidates: &[usize], mut evaluate: F) -> Result<LengthSweep>
where
    F: FnMut(usize) -> Result<f64>,
{
    if candidates.is_empty() {
        return Err(Error::Config("length sweep needs at least one candidate".into()));
    }
    if let Some(&bad) = candidates.iter().find(|&&c| c < 3) {
        return Err(Error::Config(format!("candidate max_len {bad} is below 3")));
    }
    let rows: Vec<LengthSweepRow> = candidates
        .iter()
        .map(|&max_len| match evaluate(max_len) {
            Ok(score) if score.is_finite() => LengthSweepRow {
                max_len,
                score: Some(score),
                error: None,
            },
            Ok(score) => LengthSweepRow {
                max_len,
                score: None,
                error: Some(format!("non-finite score {score}")),
            },
            Err(e) => LengthSweepRow {
                max_len,
                score: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let best = rows
        .iter()
        .filter_map(|r| r.score.map(|s| (r.max_len, s)))
        .fold(None::<(usize, f64)>, |acc, (len, s)| match acc {
            Some((bl, bs)) if bs > s || (bs == s && bl <= len) => Some((bl, bs)),
            _ => Some((len, s)),
        })
        .map(|(len, _)| len);
    Ok(LengthSweep { rows, best })
}
