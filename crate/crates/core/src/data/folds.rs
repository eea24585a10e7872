//! Subject-level, phase-stratified k-fold assignment.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::dataset::{ImageSample, Phase};
use crate::error::{ensure, Result};

pub const DEFAULT_FOLDS: usize = 5;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldAssignment {
    pub n_folds: usize,
    /// Fold index of every sample, in input order.
    pub fold_of: Vec<usize>,
}

impl FoldAssignment {
    pub fn held_out(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] == fold)
            .collect()
    }

    pub fn training(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] != fold)
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.n_folds];
        self.fold_of.iter().for_each(|&f| s[f] += 1);
        s
    }
}

/// Assigns samples, given as `(subject, phase)` keys, to `n_folds` folds.
///
/// Subjects are grouped by their phase signature, shuffled by `seed` inside
/// each group, and dealt round-robin to the currently smallest fold. All
/// samples of a subject share a fold. When every subject contributes the
/// same number of samples, fold sizes differ by at most one subject.
pub fn make_folds(keys: &[(&str, Phase)], n_folds: usize, seed: u64) -> Result<FoldAssignment> {
    ensure!(n_folds >= 2, "need at least 2 folds, got {n_folds}");
    let mut subjects: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, (subject, _)) in keys.iter().enumerate() {
        subjects.entry(subject).or_default().push(i);
    }
    ensure!(
        subjects.len() >= n_folds,
        "{} subjects cannot fill {n_folds} folds",
        subjects.len()
    );

    let mut strata: BTreeMap<Vec<Phase>, Vec<&str>> = BTreeMap::new();
    for (subject, members) in &subjects {
        let mut signature: Vec<Phase> = members.iter().map(|&i| keys[i].1).collect();
        signature.sort();
        strata.entry(signature).or_default().push(subject);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0; keys.len()];
    let mut sizes = vec![0usize; n_folds];
    let mut next = 0;
    for group in strata.values_mut() {
        group.shuffle(&mut rng);
        for subject in group.iter() {
            let members = &subjects[subject];
            let fold = (0..n_folds)
                .map(|k| (next + k) % n_folds)
                .min_by_key(|&f| sizes[f])
                .expect("at least one fold");
            members.iter().for_each(|&i| fold_of[i] = fold);
            sizes[fold] += members.len();
            next = (fold + 1) % n_folds;
        }
    }
    Ok(FoldAssignment { n_folds, fold_of })
}

pub fn make_sample_folds(samples: &[ImageSample], n_folds: usize, seed: u64) -> Result<FoldAssignment> {
    let keys: Vec<(&str, Phase)> = samples
        .iter()
        .map(|s| (s.subject.as_str(), s.phase))
        .collect();
    make_folds(&keys, n_folds, seed)
}
