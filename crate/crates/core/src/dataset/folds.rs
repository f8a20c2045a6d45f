use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

/// One cross-validation split. Both index lists are sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Stratified `k`-fold split of `ds`.
pub fn stratified_folds(ds: &Dataset, k: usize, seed: u64) -> Result<Vec<Fold>> {
    stratified_folds_for_labels(&ds.labels(), ds.class_count(), k, seed)
}

/// Stratified `k`-fold split of an arbitrary label vector.
///
/// Each class is shuffled and dealt round-robin over the folds. The dealing
/// position carries over from one class to the next so fold sizes differ by
/// at most one overall, and each class is within one sample of its global
/// share in every fold.
pub fn stratified_folds_for_labels(
    labels: &[usize],
    class_count: usize,
    k: usize,
    seed: u64,
) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::param(format!("k must be at least 2, got {k}")));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); class_count];
    for (i, &l) in labels.iter().enumerate() {
        by_class
            .get_mut(l)
            .ok_or_else(|| Error::param(format!("label {l} out of range for {class_count} classes")))?
            .push(i);
    }
    for (c, members) in by_class.iter().enumerate() {
        if members.len() < k {
            return Err(Error::param(format!(
                "class {c} has {} samples, fewer than k = {k}",
                members.len()
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0usize; labels.len()];
    let mut cursor = 0usize;
    for members in &mut by_class {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            assignment[i] = cursor % k;
            cursor += 1;
        }
    }

    Ok((0..k)
        .map(|f| {
            let (validation, train): (Vec<usize>, Vec<usize>) =
                (0..labels.len()).partition(|&i| assignment[i] == f);
            Fold { train, validation }
        })
        .collect())
}

/// Stratified hold-out split: `round(fraction · n_c)` samples of every class
/// go to `validation`, at least one per class and at least one left for
/// training.
pub fn stratified_holdout(labels: &[usize], class_count: usize, fraction: f64, seed: u64) -> Result<Fold> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::param(format!("hold-out fraction must be in (0, 1), got {fraction}")));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); class_count];
    for (i, &l) in labels.iter().enumerate() {
        by_class
            .get_mut(l)
            .ok_or_else(|| Error::param(format!("label {l} out of range for {class_count} classes")))?
            .push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut held = vec![false; labels.len()];
    for (c, members) in by_class.iter_mut().enumerate() {
        if members.len() < 2 {
            return Err(Error::param(format!("class {c} has {} samples, need at least 2", members.len())));
        }
        members.shuffle(&mut rng);
        let take = ((fraction * members.len() as f64).round() as usize).clamp(1, members.len() - 1);
        for &i in &members[..take] {
            held[i] = true;
        }
    }
    let (validation, train): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| held[i]);
    Ok(Fold { train, validation })
}
