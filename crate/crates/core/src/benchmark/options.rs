use std::collections::BTreeSet;

use thiserror::Error;

use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("distractor pool too small: need {needed}, have {available} distinct candidates")]
pub struct PoolTooSmall {
    pub needed: usize,
    pub available: usize,
}

/// `k` distinct distractors drawn from `pool`, never equal to `correct`.
/// Candidates are deduplicated and sorted before sampling, so the result
/// depends only on the candidate set and the seed.
pub fn sample_distractors<S: AsRef<str>>(
    correct: &str,
    pool: &[S],
    k: usize,
    seed: u64,
) -> Result<Vec<String>, PoolTooSmall> {
    let candidates: Vec<&str> = pool
        .iter()
        .map(AsRef::as_ref)
        .filter(|c| *c != correct && !c.trim().is_empty())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if candidates.len() < k {
        return Err(PoolTooSmall { needed: k, available: candidates.len() });
    }
    let mut rng = SplitMix64::new(seed);
    Ok(rng
        .sample_indices(candidates.len(), k)
        .into_iter()
        .map(|i| candidates[i].to_string())
        .collect())
}

/// Shuffle options in place and return the new index of `correct_index`.
pub fn shuffle_options(options: &mut [String], correct_index: usize, seed: u64) -> usize {
    let correct = options[correct_index].clone();
    SplitMix64::new(seed).shuffle(options);
    options.iter().position(|o| *o == correct).expect("correct option kept")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exhaustive_and_forced() {
        let mut got = sample_distractors("x", &["a", "b", "c"], 3, 1).unwrap();
        got.sort();
        assert_eq!(got, ["a", "b", "c"]);
        for seed in 0..50 {
            let d = sample_distractors("b", &["a", "b", "c", "d"], 3, seed).unwrap();
            assert!(!d.contains(&"b".to_string()));
        }
        assert_eq!(
            sample_distractors("a", &["a", "b"], 3, 0),
            Err(PoolTooSmall { needed: 3, available: 1 })
        );
    }
}
