//! Soft label-leaveout splitting.
//!
//! Classes are grouped contiguously in label order; each of train/val/test
//! "owns" one group and receives `major_share` of its samples plus an equal
//! minority share of every other group. The label marginal therefore differs
//! across splits while each node's (x, a, y) law is untouched.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitMasks {
    pub train: Vec<bool>,
    pub val: Vec<bool>,
    pub test: Vec<bool>,
}

impl SplitMasks {
    pub fn len(&self) -> usize {
        self.train.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train.is_empty()
    }

    /// Node indices selected by one mask.
    pub fn indices(mask: &[bool]) -> Vec<usize> {
        mask.iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }
}

const NUM_SPLITS: usize = 3;

/// Contiguous class groups, as even as possible, larger groups first.
fn class_groups(num_classes: usize, num_groups: usize) -> Vec<usize> {
    let mut group_of = vec![0; num_classes];
    let base = num_classes / num_groups;
    let extra = num_classes % num_groups;
    let mut class = 0;
    for g in 0..num_groups {
        let size = base + usize::from(g < extra);
        for _ in 0..size {
            group_of[class] = g;
            class += 1;
        }
    }
    group_of
}

/// Assign every node to train/val/test so that split s gets `major_share` of
/// the classes in group s and `(1 − major_share) / (numGroups − 1)` of the
/// rest. Within a class the assignment is a seeded shuffle; rounding is by
/// floor with the remainder going to the majority split.
pub fn soft_label_leaveout(
    labels: &[usize],
    num_groups: usize,
    major_share: f64,
    seed: u64,
) -> Result<SplitMasks> {
    if num_groups != NUM_SPLITS {
        return Err(Error::invalid(format!(
            "soft label-leaveout targets the three train/val/test splits; got {num_groups} groups"
        )));
    }
    if !(1.0 / num_groups as f64) .lt(&major_share) || major_share >= 1.0 {
        return Err(Error::invalid(format!(
            "major share must lie in (1/{num_groups}, 1); got {major_share}"
        )));
    }
    if labels.is_empty() {
        return Err(Error::invalid("empty label sequence"));
    }
    let num_classes = labels.iter().max().unwrap() + 1;
    if num_classes < num_groups {
        return Err(Error::invalid(format!(
            "{num_classes} classes cannot form {num_groups} groups"
        )));
    }
    let group_of = class_groups(num_classes, num_groups);
    let minor_share = (1.0 - major_share) / (num_groups - 1) as f64;

    let n = labels.len();
    let mut masks = SplitMasks {
        train: vec![false; n],
        val: vec![false; n],
        test: vec![false; n],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for class in 0..num_classes {
        let mut members: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
        if members.len() < num_groups {
            return Err(Error::invalid(format!(
                "class {class} has {} samples, fewer than the {num_groups} splits",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        let owner = group_of[class];
        let total = members.len();
        // A hair of slack so that shares like 0.1 stored as 0.0999…98 still
        // floor to the intended count.
        let major = (major_share * total as f64 + 1e-9).floor() as usize;
        let minor = (minor_share * total as f64 + 1e-9).floor() as usize;
        let remainder = total - major - (num_groups - 1) * minor;
        let mut cursor = 0;
        for split in 0..NUM_SPLITS {
            let take = if split == owner { major + remainder } else { minor };
            let mask = match split {
                0 => &mut masks.train,
                1 => &mut masks.val,
                _ => &mut masks.test,
            };
            for &i in &members[cursor..cursor + take] {
                mask[i] = true;
            }
            cursor += take;
        }
        debug_assert_eq!(cursor, total);
    }
    Ok(masks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn balanced_labels(num_classes: usize, per_class: usize) -> Vec<usize> {
        (0..num_classes * per_class).map(|i| i % num_classes).collect()
    }

    fn count(mask: &[bool], labels: &[usize], class: usize) -> usize {
        mask.iter()
            .zip(labels)
            .filter(|&(&m, &l)| m && l == class)
            .count()
    }

    #[test]
    fn six_classes_follow_80_10_10_pattern() {
        let labels = balanced_labels(6, 100);
        let masks = soft_label_leaveout(&labels, 3, 0.8, 7).unwrap();
        // Groups {0,1}, {2,3}, {4,5}; train owns the first group.
        for class in 0..6 {
            let expected_train = if class < 2 { 80 } else { 10 };
            let expected_val = if (2..4).contains(&class) { 80 } else { 10 };
            let expected_test = if class >= 4 { 80 } else { 10 };
            assert_eq!(count(&masks.train, &labels, class), expected_train);
            assert_eq!(count(&masks.val, &labels, class), expected_val);
            assert_eq!(count(&masks.test, &labels, class), expected_test);
        }
    }

    #[test]
    fn uneven_class_count_groups_contiguously() {
        // 4 classes over 3 groups: {0,1}, {2}, {3}.
        let labels = balanced_labels(4, 50);
        let masks = soft_label_leaveout(&labels, 3, 0.8, 1).unwrap();
        assert_eq!(count(&masks.train, &labels, 0), 40);
        assert_eq!(count(&masks.train, &labels, 1), 40);
        assert_eq!(count(&masks.val, &labels, 2), 40);
        assert_eq!(count(&masks.test, &labels, 3), 40);
        assert_eq!(count(&masks.val, &labels, 0), 5);
        assert_eq!(count(&masks.test, &labels, 0), 5);
    }

    #[test]
    fn remainder_goes_to_majority_split() {
        // 7 samples at share 0.8: major floor 5, minor floor 0 each, so the
        // remainder of 2 lands on the owner split: 7/0/0.
        let labels = vec![0usize; 7]
            .into_iter()
            .chain(vec![1usize; 7])
            .chain(vec![2usize; 7])
            .collect::<Vec<_>>();
        let masks = soft_label_leaveout(&labels, 3, 0.8, 3).unwrap();
        assert_eq!(count(&masks.train, &labels, 0), 7);
        assert_eq!(count(&masks.val, &labels, 1), 7);
        assert_eq!(count(&masks.test, &labels, 2), 7);
    }

    #[test]
    fn masks_partition_all_nodes() {
        let labels = balanced_labels(5, 37);
        let masks = soft_label_leaveout(&labels, 3, 0.6, 11).unwrap();
        for i in 0..labels.len() {
            let hits = usize::from(masks.train[i]) + usize::from(masks.val[i]) + usize::from(masks.test[i]);
            assert_eq!(hits, 1, "node {i}");
        }
    }

    #[test]
    fn same_seed_same_masks_different_seed_differs() {
        let labels = balanced_labels(3, 40);
        let a = soft_label_leaveout(&labels, 3, 0.8, 5).unwrap();
        let b = soft_label_leaveout(&labels, 3, 0.8, 5).unwrap();
        assert_eq!(a, b);
        let c = soft_label_leaveout(&labels, 3, 0.8, 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn split_label_marginals_differ() {
        let labels = balanced_labels(3, 60);
        let masks = soft_label_leaveout(&labels, 3, 0.8, 2).unwrap();
        // Chi-square of train's class histogram against val's must be
        // strictly positive: the splits see different label laws.
        let hist = |mask: &[bool]| -> Vec<f64> {
            (0..3).map(|c| count(mask, &labels, c) as f64).collect()
        };
        let (ht, hv) = (hist(&masks.train), hist(&masks.val));
        let chi2: f64 = ht
            .iter()
            .zip(&hv)
            .map(|(a, b)| {
                let e = 0.5 * (a + b);
                (a - e) * (a - e) / e
            })
            .sum();
        assert!(chi2 > 0.0);
    }

    #[test]
    fn tiny_class_rejected() {
        let labels = vec![0, 0, 0, 1, 1, 1, 2, 2]; // class 2 has 2 < 3 samples
        assert!(soft_label_leaveout(&labels, 3, 0.8, 0).is_err());
    }

    #[test]
    fn bad_share_rejected() {
        let labels = balanced_labels(3, 10);
        assert!(soft_label_leaveout(&labels, 3, 0.2, 0).is_err());
        assert!(soft_label_leaveout(&labels, 3, 1.0, 0).is_err());
        assert!(soft_label_leaveout(&labels, 3, 1.0 / 3.0, 0).is_err());
    }

    proptest! {
        #[test]
        fn partition_property(
            per_class in 3usize..30,
            num_classes in 3usize..8,
            seed in 0u64..1000,
            share_pct in 40u32..95,
        ) {
            let share = share_pct as f64 / 100.0;
            let labels = balanced_labels(num_classes, per_class);
            let masks = soft_label_leaveout(&labels, 3, share, seed).unwrap();
            for i in 0..labels.len() {
                let hits = usize::from(masks.train[i])
                    + usize::from(masks.val[i])
                    + usize::from(masks.test[i]);
                prop_assert_eq!(hits, 1);
            }
        }
    }
}
