use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::Dialogue;
use crate::error::{Error, Result};

/// Train / validation / test fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions {
            train: 0.7,
            validation: 0.1,
            test: 0.2,
        }
    }
}

impl SplitFractions {
    pub fn new(train: f64, validation: f64, test: f64) -> Self {
        SplitFractions {
            train,
            validation,
            test,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(Error::Config(format!("split fractions must be non-negative: {parts:?}")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split fractions sum to {sum}, expected 1")));
        }
        Ok(())
    }

    /// Part sizes for `n` items: validation and test are floored, train takes
    /// the remainder.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        // the epsilon keeps products like 0.1 * 100 from flooring to 9
        let cut = |f: f64| ((n as f64) * f + 1e-9).floor() as usize;
        let validation = cut(self.validation).min(n);
        let test = cut(self.test).min(n - validation);
        (n - validation - test, validation, test)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<Dialogue>,
    pub validation: Vec<Dialogue>,
    pub test: Vec<Dialogue>,
    pub seed: u64,
    pub fractions: SplitFractions,
}

/// Shuffles whole dialogues with a seeded generator and cuts them into
/// train, validation and test in that order.
pub fn split_dataset(
    dialogues: &[Dialogue],
    fractions: SplitFractions,
    seed: u64,
) -> Result<DatasetSplit> {
    fractions.validate()?;
    if dialogues.is_empty() {
        return Err(Error::Config("cannot split an empty dataset".into()));
    }
    let mut order: Vec<usize> = (0..dialogues.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (n_train, n_val, _) = fractions.sizes(dialogues.len());
    let pick = |idx: &[usize]| idx.iter().map(|&i| dialogues[i].clone()).collect::<Vec<_>>();
    Ok(DatasetSplit {
        train: pick(&order[..n_train]),
        validation: pick(&order[n_train..n_train + n_val]),
        test: pick(&order[n_train + n_val..]),
        seed,
        fractions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dialogues(n: usize) -> Vec<Dialogue> {
        (0..n)
            .map(|i| {
                Dialogue::from_parts(format!("d{i}"), vec!["A".into()], vec!["x".into()], None, None)
                    .unwrap()
            })
            .collect()
    }

    #[test]
    fn seventy_ten_twenty_on_hundred() {
        let s = split_dataset(&dialogues(100), SplitFractions::default(), 3).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (70, 10, 20));
    }

    #[test]
    fn floor_then_remainder_on_ten() {
        // validation = floor(10 * 0.1) = 1, test = floor(10 * 0.2) = 2, train = 10 - 3 = 7
        assert_eq!(SplitFractions::default().sizes(10), (7, 1, 2));
        // 7 items: floor(0.7) = 0, floor(1.4) = 1, train = 6
        assert_eq!(SplitFractions::default().sizes(7), (6, 0, 1));
    }

    #[test]
    fn deterministic_for_seed() {
        let d = dialogues(37);
        let a = split_dataset(&d, SplitFractions::default(), 11).unwrap();
        let b = split_dataset(&d, SplitFractions::default(), 11).unwrap();
        assert_eq!(a, b);
        let c = split_dataset(&d, SplitFractions::default(), 12).unwrap();
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn bad_fractions() {
        let d = dialogues(3);
        assert!(matches!(
            split_dataset(&d, SplitFractions::new(0.7, 0.1, 0.1), 0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            split_dataset(&d, SplitFractions::new(1.2, -0.1, -0.1), 0),
            Err(Error::Config(_))
        ));
        assert!(split_dataset(&[], SplitFractions::default(), 0).is_err());
    }
}
