//! Zero-one loss, empirical risk and majority voting.

use crate::error::{Error, Result};
use crate::types::LabelVector;

/// Mismatch indicator: 1 when the prediction differs from the label.
#[inline]
pub fn zero_one_loss(predicted: bool, actual: bool) -> f64 {
    if predicted != actual {
        1.0
    } else {
        0.0
    }
}

/// Mean zero-one loss of `predictions` against `labels`.
pub fn empirical_risk(predictions: &LabelVector, labels: &LabelVector) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: labels.len(),
            actual: predictions.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::InvalidArgument("empirical risk of an empty vector".into()));
    }
    let mismatches = predictions
        .iter()
        .zip(labels.iter())
        .filter(|(p, y)| p != y)
        .count();
    Ok(mismatches as f64 / labels.len() as f64)
}

/// Majority value of a set of votes. Ties go to `true`.
pub fn majority<I>(votes: I) -> Result<bool>
where
    I: IntoIterator<Item = bool>,
{
    let (mut ones, mut total) = (0usize, 0usize);
    for v in votes {
        ones += v as usize;
        total += 1;
    }
    if total == 0 {
        return Err(Error::InvalidArgument("majority of an empty set".into()));
    }
    Ok(majority_of_counts(ones, total))
}

/// Majority from a count of ones among `total` votes, ties to `true`.
#[inline]
pub fn majority_of_counts(ones: usize, total: usize) -> bool {
    2 * ones >= total
}

/// Elementwise majority across equal-length vectors.
pub fn elementwise_majority(vectors: &[LabelVector]) -> Result<LabelVector> {
    let first = vectors
        .first()
        .ok_or_else(|| Error::InvalidArgument("majority of an empty set of vectors".into()))?;
    let n = first.len();
    let mut ones = vec![0usize; n];
    for v in vectors {
        if v.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: v.len(),
            });
        }
        for (count, bit) in ones.iter_mut().zip(v.iter()) {
            *count += bit as usize;
        }
    }
    Ok(ones
        .into_iter()
        .map(|c| majority_of_counts(c, vectors.len()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lv(bits: &[u8]) -> LabelVector {
        bits.iter().map(|&b| b == 1).collect()
    }

    #[test]
    fn loss_cases() {
        assert_eq!(zero_one_loss(true, true), 0.0);
        assert_eq!(zero_one_loss(false, true), 1.0);
        assert_eq!(zero_one_loss(true, false), 1.0);
    }

    #[test]
    fn risk_cases() {
        let r = empirical_risk(&lv(&[1, 0, 1]), &lv(&[1, 1, 1])).unwrap();
        assert!((r - 1.0 / 3.0).abs() < 1e-15);
        let v = lv(&[0, 1, 1, 0]);
        assert_eq!(empirical_risk(&v, &v).unwrap(), 0.0);
        assert_eq!(empirical_risk(&lv(&[0, 0]), &lv(&[1, 1])).unwrap(), 1.0);
    }

    #[test]
    fn risk_length_mismatch() {
        assert!(matches!(
            empirical_risk(&lv(&[0]), &lv(&[1, 1])),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(empirical_risk(&lv(&[]), &lv(&[])).is_err());
    }

    #[test]
    fn majority_cases() {
        assert!(majority([true, true, false]).unwrap());
        assert!(!majority([false, false, false, true]).unwrap());
        assert!(majority([true, false]).unwrap());
        assert!(majority(std::iter::empty()).is_err());
    }

    #[test]
    fn elementwise() {
        let j = vec![lv(&[1, 0]), lv(&[1, 1]), lv(&[1, 0])];
        assert_eq!(elementwise_majority(&j).unwrap(), lv(&[1, 0]));
        assert_eq!(elementwise_majority(&[lv(&[0, 1, 1])]).unwrap(), lv(&[0, 1, 1]));
        assert!(elementwise_majority(&[]).is_err());
    }

    proptest! {
        #[test]
        fn complement_sums_to_one(pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 1..64)) {
            let v: LabelVector = pairs.iter().map(|p| p.0).collect();
            let y: LabelVector = pairs.iter().map(|p| p.1).collect();
            let sum = empirical_risk(&v, &y).unwrap() + empirical_risk(&v.complement(), &y).unwrap();
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }

        #[test]
        fn permutation_invariant(
            pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 1..64),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            let mut shuffled = pairs.clone();
            shuffled.shuffle(&mut crate::rng::RngStream::new(seed, 0).rng());
            let split = |ps: &[(bool, bool)]| -> (LabelVector, LabelVector) {
                (ps.iter().map(|p| p.0).collect(), ps.iter().map(|p| p.1).collect())
            };
            let (v, y) = split(&pairs);
            let (vs, ys) = split(&shuffled);
            prop_assert_eq!(empirical_risk(&v, &y).unwrap(), empirical_risk(&vs, &ys).unwrap());
        }
    }
}
