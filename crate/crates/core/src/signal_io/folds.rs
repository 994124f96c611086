use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Subject-to-fold assignment. Every subject belongs to exactly one fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    #[serde(rename = "k")]
    pub fold_count: usize,
    pub assignments: BTreeMap<String, usize>,
}

impl FoldPlan {
    /// Subjects held out in `fold`, sorted.
    pub fn test_subjects(&self, fold: usize) -> Vec<String> {
        self.assignments
            .iter()
            .filter(|(_, &f)| f == fold)
            .map(|(s, _)| s.clone())
            .collect()
    }

    /// Subjects used for training when `fold` is held out, sorted.
    pub fn train_subjects(&self, fold: usize) -> Vec<String> {
        self.assignments
            .iter()
            .filter(|(_, &f)| f != fold)
            .map(|(s, _)| s.clone())
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.fold_count];
        for &f in self.assignments.values() {
            sizes[f] += 1;
        }
        sizes
    }

    /// Checks that the plan is a partition of its subjects into `fold_count` non-empty folds.
    pub fn validate(&self) -> Result<()> {
        if self.fold_count < 2 {
            return Err(Error::Validation(format!("fold plan needs k >= 2, has {}", self.fold_count)));
        }
        if let Some((s, f)) = self.assignments.iter().find(|(_, &f)| f >= self.fold_count) {
            return Err(Error::Validation(format!("subject {s} assigned to fold {f} of {}", self.fold_count)));
        }
        if let Some(empty) = self.fold_sizes().iter().position(|&n| n == 0) {
            return Err(Error::Validation(format!("fold {empty} is empty")));
        }
        Ok(())
    }
}

/// Seeded shuffle followed by round-robin assignment, so fold sizes differ by at most one.
///
/// The input order does not matter: ids are sorted before shuffling.
pub fn make_folds(subject_ids: &[String], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Argument(format!("k must be at least 2, got {k}")));
    }
    let unique: BTreeSet<&String> = subject_ids.iter().collect();
    if unique.len() != subject_ids.len() {
        return Err(Error::Argument("duplicate subject ids".into()));
    }
    if k > subject_ids.len() {
        return Err(Error::Argument(format!(
            "k = {k} exceeds the number of subjects ({})",
            subject_ids.len()
        )));
    }
    let mut ids: Vec<&String> = unique.into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let assignments = ids
        .into_iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i % k))
        .collect();
    Ok(FoldPlan {
        fold_count: k,
        assignments,
    })
}
