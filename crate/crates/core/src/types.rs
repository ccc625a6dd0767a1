//! Domain types shared by every module.

use std::ops::Index;

use crate::error::{Error, Result};

/// A binary label vector indexed chronologically.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct LabelVector(Vec<bool>);

impl LabelVector {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        Self(bits.iter().map(|&b| b != 0).collect())
    }

    pub fn constant(n: usize, value: bool) -> Self {
        Self(vec![value; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = bool> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [bool] {
        &mut self.0
    }

    pub fn complement(&self) -> Self {
        Self(self.0.iter().map(|b| !b).collect())
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn into_inner(self) -> Vec<bool> {
        self.0
    }
}

impl Index<usize> for LabelVector {
    type Output = bool;
    fn index(&self, i: usize) -> &bool {
        &self.0[i]
    }
}

impl FromIterator<bool> for LabelVector {
    fn from_iter<T: IntoIterator<Item = bool>>(iter: T) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl From<Vec<bool>> for LabelVector {
    fn from(v: Vec<bool>) -> Self {
        Self(v)
    }
}

/// One timestamped (user, item, label) observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Interaction {
    pub user: Vec<f64>,
    pub item: Vec<f64>,
    /// Recommendation order, starting at 1.
    pub time: u64,
    pub label: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidArgument(format!("unknown split tag {other:?}"))),
        }
    }
}

/// Chronologically ordered interactions, each tagged train or test.
#[derive(Debug, Clone, PartialEq)]
pub struct SequentialDataset {
    interactions: Vec<Interaction>,
    splits: Vec<Split>,
}

impl SequentialDataset {
    pub fn new(interactions: Vec<Interaction>, splits: Vec<Split>) -> Result<Self> {
        if interactions.len() != splits.len() {
            return Err(Error::LengthMismatch {
                expected: interactions.len(),
                actual: splits.len(),
            });
        }
        if let Some(first) = interactions.first() {
            let (du, di) = (first.user.len(), first.item.len());
            let mut prev = 0u64;
            for x in &interactions {
                if x.time == 0 || x.time <= prev {
                    return Err(Error::InvalidArgument(format!(
                        "times must be positive and strictly increasing (saw {} after {})",
                        x.time, prev
                    )));
                }
                if x.user.len() != du || x.item.len() != di {
                    return Err(Error::InvalidArgument(format!(
                        "inconsistent vector dimensions at time {}",
                        x.time
                    )));
                }
                prev = x.time;
            }
        }
        Ok(Self {
            interactions,
            splits,
        })
    }

    /// All interactions tagged as test.
    pub fn all_test(interactions: Vec<Interaction>) -> Result<Self> {
        let splits = vec![Split::Test; interactions.len()];
        Self::new(interactions, splits)
    }

    pub fn len(&self) -> usize {
        self.interactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interactions.is_empty()
    }

    pub fn interactions(&self) -> &[Interaction] {
        &self.interactions
    }

    pub fn splits(&self) -> &[Split] {
        &self.splits
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Interaction, Split)> {
        self.interactions.iter().zip(self.splits.iter().copied())
    }

    pub fn user_dim(&self) -> usize {
        self.interactions.first().map_or(0, |x| x.user.len())
    }

    pub fn item_dim(&self) -> usize {
        self.interactions.first().map_or(0, |x| x.item.len())
    }

    pub fn test(&self) -> impl Iterator<Item = &Interaction> {
        self.iter()
            .filter(|(_, s)| *s == Split::Test)
            .map(|(x, _)| x)
    }

    pub fn n_test(&self) -> usize {
        self.splits.iter().filter(|&&s| s == Split::Test).count()
    }

    pub fn test_labels(&self) -> LabelVector {
        self.test().map(|x| x.label).collect()
    }

    /// Test features in chronological order, without labels.
    pub fn test_features(&self) -> TestFeatures {
        let mut f = TestFeatures::default();
        for x in self.test() {
            f.users.push(x.user.clone());
            f.items.push(x.item.clone());
            f.times.push(x.time);
        }
        f
    }

    /// True when the test labels are split exactly in half.
    pub fn is_balanced(&self) -> bool {
        let labels = self.test_labels();
        !labels.is_empty() && 2 * labels.count_ones() == labels.len()
    }

    pub(crate) fn into_parts(self) -> (Vec<Interaction>, Vec<Split>) {
        (self.interactions, self.splits)
    }
}

/// What an attacker may see of the test set: features and order only.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TestFeatures {
    pub users: Vec<Vec<f64>>,
    pub items: Vec<Vec<f64>>,
    pub times: Vec<u64>,
}

impl TestFeatures {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(time: u64, label: bool) -> Interaction {
        Interaction {
            user: vec![0.0, 1.0],
            item: vec![0.5],
            time,
            label,
        }
    }

    #[test]
    fn rejects_unsorted_or_duplicate_times() {
        assert!(SequentialDataset::all_test(vec![x(2, true), x(1, false)]).is_err());
        assert!(SequentialDataset::all_test(vec![x(1, true), x(1, false)]).is_err());
        assert!(SequentialDataset::all_test(vec![x(0, true)]).is_err());
    }

    #[test]
    fn rejects_dimension_change() {
        let mut b = x(2, true);
        b.item.push(1.0);
        assert!(SequentialDataset::all_test(vec![x(1, true), b]).is_err());
    }

    #[test]
    fn test_view_and_balance() {
        let ds = SequentialDataset::new(
            vec![x(1, true), x(2, true), x(5, false)],
            vec![Split::Test, Split::Train, Split::Test],
        )
        .unwrap();
        assert_eq!(ds.n_test(), 2);
        assert_eq!(ds.test_labels(), LabelVector::from_bits(&[1, 0]));
        assert_eq!(ds.test_features().times, vec![1, 5]);
        assert!(ds.is_balanced());
    }
}
