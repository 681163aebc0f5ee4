//! Dialogue datasets: the label space, loading and validation, splitting,
//! and the descriptive statistics (label distribution, emotion flips, class
//! weights).

mod analysis;
mod dataset;
mod label;
mod split;
pub mod synthetic;

pub use analysis::{
    class_weights, emotion_distribution, extract_flips, extract_flips_with, flip_counts,
    EmotionFlip, FlipScope,
};
pub use dataset::{
    dataset_size, dataset_to_json, load_dataset, parse_dataset, save_dataset, DatasetSize,
    Dialogue, Utterance,
};
pub use label::{EmotionCounts, EmotionLabel, NUM_LABELS};
pub use split::{split_dataset, DatasetSplit, SplitFractions};
