//! Seeded synthetic dialogues for offline runs and tests.
//!
//! Each emotion owns a small keyword vocabulary; an utterance mixes keywords
//! of its gold emotion with shared filler words, so the task is learnable by
//! a bag-of-tokens encoder.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dataset::Dialogue;
use super::label::{EmotionLabel, NUM_LABELS};

const FILLER: &[&str] = &[
    "yaar", "the", "kya", "is", "bhai", "and", "to", "hai", "so", "ok", "na", "just",
];

fn keyword(label: EmotionLabel, k: usize) -> String {
    format!("{}{}", &label.as_str()[..3], k)
}

/// Builds one utterance carrying `signal` keywords for `label` among
/// `noise` filler words.
pub fn utterance_text(rng: &mut impl Rng, label: EmotionLabel, signal: usize, noise: usize) -> String {
    let mut words: Vec<String> = (0..signal)
        .map(|_| keyword(label, rng.random_range(0..6)))
        .collect();
    for _ in 0..noise {
        words.push(FILLER[rng.random_range(0..FILLER.len())].to_string());
    }
    // Fisher-Yates keeps the word order seeded
    for i in (1..words.len()).rev() {
        let j = rng.random_range(0..=i);
        words.swap(i, j);
    }
    words.join(" ")
}

/// `per_class` single-utterance dialogues per emotion, in label order.
pub fn balanced(per_class: usize, seed: u64) -> Vec<Dialogue> {
    with_counts(&[per_class; NUM_LABELS], 3, 2, seed)
}

/// Single-utterance dialogues with the given count per label.
pub fn with_counts(counts: &[usize; NUM_LABELS], signal: usize, noise: usize, seed: u64) -> Vec<Dialogue> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for label in EmotionLabel::ALL {
        for k in 0..counts[label.index()] {
            let text = utterance_text(&mut rng, label, signal, noise);
            out.push(
                Dialogue::from_parts(
                    format!("{}-{k}", label.as_str()),
                    vec!["S".to_string()],
                    vec![text],
                    Some(vec![label]),
                    None,
                )
                .expect("synthetic dialogue is well-formed"),
            );
        }
    }
    out
}

/// A multi-speaker dialogue with random labels, for flip and split tests.
pub fn random_dialogue(rng: &mut impl Rng, id: &str, max_len: usize, speakers: usize) -> Dialogue {
    let n = rng.random_range(0..=max_len);
    let spk: Vec<String> = (0..n)
        .map(|_| format!("S{}", rng.random_range(0..speakers.max(1))))
        .collect();
    let labels: Vec<EmotionLabel> = (0..n)
        .map(|_| {
            // skew toward neutral so runs of equal labels occur
            if rng.random_bool(0.4) {
                EmotionLabel::Neutral
            } else {
                EmotionLabel::ALL[rng.random_range(0..NUM_LABELS)]
            }
        })
        .collect();
    let texts = labels.iter().map(|&l| utterance_text(rng, l, 2, 2)).collect();
    Dialogue::from_parts(id, spk, texts, Some(labels), None).expect("random dialogue is well-formed")
}

/// A multi-turn labeled corpus with realistic skew toward neutral.
pub fn corpus(dialogues: usize, seed: u64) -> Vec<Dialogue> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dialogues)
        .map(|i| random_dialogue(&mut rng, &format!("syn{i:04}"), 8, 3))
        .filter(|d| !d.is_empty())
        .collect()
}
