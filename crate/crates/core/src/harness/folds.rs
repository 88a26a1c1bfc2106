use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fold membership of every index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub k: usize,
    pub seed: u64,
    /// `assignment[i]` is the fold holding index `i`.
    pub assignment: Vec<usize>,
}

impl FoldSplit {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] != fold).collect()
    }

    pub fn folds(&self) -> Vec<Vec<usize>> {
        (0..self.k).map(|f| self.test_indices(f)).collect()
    }
}

/// Stratified k-fold split: each class is shuffled with a seeded generator and
/// dealt round-robin, continuing where the previous class stopped, so fold
/// sizes and per-class counts each differ by at most one.
pub fn stratified_kfold<L: Ord + Clone>(labels: &[L], k: usize, seed: u64) -> Result<FoldSplit> {
    if k < 2 {
        return Err(Error::Param(format!("k = {k}; at least 2 folds are needed")));
    }
    let mut by_class: BTreeMap<L, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_class.entry(l.clone()).or_default().push(i);
    }
    if let Some((pos, members)) = by_class.values().enumerate().find(|(_, m)| m.len() < k) {
        return Err(Error::Param(format!(
            "class #{pos} has {} members, fewer than k = {k}",
            members.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; labels.len()];
    let mut offset = 0;
    for members in by_class.values_mut() {
        members.shuffle(&mut rng);
        for (p, &i) in members.iter().enumerate() {
            assignment[i] = (offset + p) % k;
        }
        offset = (offset + members.len()) % k;
    }
    Ok(FoldSplit { k, seed, assignment })
}
