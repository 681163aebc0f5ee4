use std::fmt;
use std::ops::{Index, IndexMut};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

pub const NUM_LABELS: usize = 8;

/// The closed emotion label space, in canonical index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EmotionLabel {
    Neutral,
    Anger,
    Surprise,
    Fear,
    Joy,
    Sadness,
    Disgust,
    Contempt,
}

impl EmotionLabel {
    pub const ALL: [EmotionLabel; NUM_LABELS] = [
        EmotionLabel::Neutral,
        EmotionLabel::Anger,
        EmotionLabel::Surprise,
        EmotionLabel::Fear,
        EmotionLabel::Joy,
        EmotionLabel::Sadness,
        EmotionLabel::Disgust,
        EmotionLabel::Contempt,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EmotionLabel::Neutral => "neutral",
            EmotionLabel::Anger => "anger",
            EmotionLabel::Surprise => "surprise",
            EmotionLabel::Fear => "fear",
            EmotionLabel::Joy => "joy",
            EmotionLabel::Sadness => "sadness",
            EmotionLabel::Disgust => "disgust",
            EmotionLabel::Contempt => "contempt",
        }
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EmotionLabel {
    type Err = Error;

    /// Case-insensitive; surrounding whitespace is ignored. Anything else is
    /// rejected rather than coerced.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let needle = s.trim();
        Self::ALL
            .iter()
            .copied()
            .find(|l| l.as_str().eq_ignore_ascii_case(needle))
            .ok_or_else(|| Error::Label(s.to_string()))
    }
}

impl Serialize for EmotionLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for EmotionLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Per-label counts indexed by [`EmotionLabel`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmotionCounts(pub [usize; NUM_LABELS]);

impl EmotionCounts {
    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    /// Labels sorted by descending count, ties by index.
    pub fn ranked(&self) -> Vec<(EmotionLabel, usize)> {
        let mut v: Vec<_> = EmotionLabel::ALL.iter().map(|&l| (l, self[l])).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        v
    }
}

impl Index<EmotionLabel> for EmotionCounts {
    type Output = usize;
    fn index(&self, label: EmotionLabel) -> &usize {
        &self.0[label.index()]
    }
}

impl IndexMut<EmotionLabel> for EmotionCounts {
    fn index_mut(&mut self, label: EmotionLabel) -> &mut usize {
        &mut self.0[label.index()]
    }
}
