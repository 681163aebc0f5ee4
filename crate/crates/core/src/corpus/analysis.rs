use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::dataset::Dialogue;
use super::label::{EmotionCounts, EmotionLabel, NUM_LABELS};
use crate::error::{Error, Result};

pub fn emotion_distribution(dialogues: &[Dialogue]) -> Result<EmotionCounts> {
    let mut counts = EmotionCounts::default();
    for d in dialogues {
        for label in d.labels()? {
            counts[label] += 1;
        }
    }
    Ok(counts)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmotionFlip {
    pub dialogue_id: String,
    pub speaker: String,
    pub from_emotion: EmotionLabel,
    pub to_emotion: EmotionLabel,
    pub at_index: usize,
}

/// Which pairs of utterances are compared when looking for a flip.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlipScope {
    /// A speaker's consecutive own utterances.
    #[default]
    SameSpeaker,
    /// Adjacent utterances regardless of speaker.
    Adjacent,
}

pub fn extract_flips(dialogue: &Dialogue) -> Result<Vec<EmotionFlip>> {
    extract_flips_with(dialogue, FlipScope::SameSpeaker)
}

pub fn extract_flips_with(dialogue: &Dialogue, scope: FlipScope) -> Result<Vec<EmotionFlip>> {
    let labels = dialogue.labels()?;
    let mut last: HashMap<&str, EmotionLabel> = HashMap::new();
    let mut prev: Option<EmotionLabel> = None;
    let mut flips = Vec::new();
    for (u, &emotion) in dialogue.utterances.iter().zip(&labels) {
        let before = match scope {
            FlipScope::SameSpeaker => last.insert(u.speaker.as_str(), emotion),
            FlipScope::Adjacent => prev.replace(emotion),
        };
        if let Some(from) = before.filter(|&f| f != emotion) {
            flips.push(EmotionFlip {
                dialogue_id: dialogue.id.clone(),
                speaker: u.speaker.clone(),
                from_emotion: from,
                to_emotion: emotion,
                at_index: u.index,
            });
        }
    }
    Ok(flips)
}

/// from→to flip counts over many dialogues, keyed in label order.
pub fn flip_counts(
    dialogues: &[Dialogue],
    scope: FlipScope,
) -> Result<BTreeMap<(EmotionLabel, EmotionLabel), usize>> {
    let mut counts = BTreeMap::new();
    for d in dialogues {
        for f in extract_flips_with(d, scope)? {
            *counts.entry((f.from_emotion, f.to_emotion)).or_insert(0) += 1;
        }
    }
    Ok(counts)
}

/// Inverse-frequency class weights, `total / (8 * max(count, 1))`.
pub fn class_weights(counts: &EmotionCounts) -> Result<[f64; NUM_LABELS]> {
    let total = counts.total();
    if total == 0 {
        return Err(Error::Config("class weights need at least one labeled sample".into()));
    }
    let mut w = [0.0; NUM_LABELS];
    for (wi, &c) in w.iter_mut().zip(counts.0.iter()) {
        *wi = total as f64 / (NUM_LABELS as f64 * c.max(1) as f64);
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use EmotionLabel::*;

    fn dialogue(turns: &[(&str, EmotionLabel)]) -> Dialogue {
        Dialogue::from_parts(
            "d",
            turns.iter().map(|t| t.0.to_string()).collect(),
            turns.iter().map(|_| "x".to_string()).collect(),
            Some(turns.iter().map(|t| t.1).collect()),
            None,
        )
        .unwrap()
    }

    #[test]
    fn one_speaker_single_flip() {
        let d = dialogue(&[("A", Neutral), ("B", Anger), ("A", Neutral), ("A", Joy)]);
        let flips = extract_flips(&d).unwrap();
        assert_eq!(flips.len(), 1);
        assert_eq!((flips[0].from_emotion, flips[0].to_emotion), (Neutral, Joy));
        assert_eq!(flips[0].at_index, 3);
        assert_eq!(flips[0].speaker, "A");
    }

    #[test]
    fn interleaved_speakers_compare_own_turns() {
        // A: neutral, neutral ; B: joy, anger
        let d = dialogue(&[("A", Neutral), ("B", Joy), ("A", Neutral), ("B", Anger)]);
        let flips = extract_flips(&d).unwrap();
        assert_eq!(flips.len(), 1);
        assert_eq!((flips[0].from_emotion, flips[0].to_emotion, flips[0].at_index), (Joy, Anger, 3));
        // adjacent scope sees every change
        assert_eq!(extract_flips_with(&d, FlipScope::Adjacent).unwrap().len(), 3);
    }

    #[test]
    fn all_neutral_no_flips() {
        let d = dialogue(&[("A", Neutral), ("B", Neutral), ("A", Neutral)]);
        assert!(extract_flips(&d).unwrap().is_empty());
    }

    #[test]
    fn distribution_counts() {
        let d = dialogue(&[("A", Fear)]);
        let c = emotion_distribution(&[d]).unwrap();
        assert_eq!(c.0, [0, 0, 0, 1, 0, 0, 0, 0]);
        let ds = vec![dialogue(&[("A", Joy), ("B", Joy)]); 3];
        assert_eq!(emotion_distribution(&ds).unwrap().total(), 6);
    }

    #[test]
    fn distribution_requires_labels() {
        let d = Dialogue::from_parts("u", vec!["A".into()], vec!["x".into()], None, None).unwrap();
        assert!(matches!(emotion_distribution(&[d]), Err(Error::MissingLabel { .. })));
    }

    #[test]
    fn weights_by_hand() {
        assert_eq!(class_weights(&EmotionCounts([5; 8])).unwrap(), [1.0; 8]);
        let w = class_weights(&EmotionCounts([6, 2, 0, 0, 0, 0, 0, 0])).unwrap();
        // 8 / (8 * 6), 8 / (8 * 2), then 8 / (8 * 1) for every empty class
        assert!((w[0] - 8.0 / 48.0).abs() < 1e-15);
        assert!((w[1] - 0.5).abs() < 1e-15);
        assert!(w[2..].iter().all(|&x| x == 1.0));
        let doubled = class_weights(&EmotionCounts([12, 4, 0, 0, 0, 0, 0, 0])).unwrap();
        assert_eq!(&doubled[..2], &w[..2]);
        assert!(matches!(class_weights(&EmotionCounts::default()), Err(Error::Config(_))));
    }
}
