use std::collections::HashSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::table::Label;
use crate::error::{Error, Result};

/// Splits `0..labels.len()` into `k` folds with per-class counts differing by
/// at most one. Each class is shuffled and dealt round-robin; the dealer
/// position carries over between classes so total fold sizes also stay
/// within one. Indices inside a fold are ascending.
pub fn stratified_kfold(labels: &[Label], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!(
            "k-fold needs k >= 2, got {k}"
        )));
    }
    if k > labels.len() {
        return Err(Error::InvalidParameter(format!(
            "{k} folds for {} samples",
            labels.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for class in [Label::Neg, Label::Pos] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(folds)
}

/// `(train, test)` indices for fold `i`.
pub fn fold_partition(folds: &[Vec<usize>], i: usize) -> (Vec<usize>, Vec<usize>) {
    let mut train: Vec<usize> = folds
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .flat_map(|(_, f)| f.iter().copied())
        .collect();
    train.sort_unstable();
    (train, folds[i].clone())
}

/// Draws disjoint train/test index sets of the requested sizes, balanced
/// per class where the class sizes allow it.
pub fn sample_train_test(
    labels: &[Label],
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if n_train + n_test > labels.len() {
        return Err(Error::Data(format!(
            "cannot draw {n_train}+{n_test} points from {}",
            labels.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos: Vec<usize> = (0..labels.len())
        .filter(|&i| labels[i] == Label::Pos)
        .collect();
    let mut neg: Vec<usize> = (0..labels.len())
        .filter(|&i| labels[i] == Label::Neg)
        .collect();
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    // Interleave the shuffled classes so any prefix is as balanced as possible.
    let mut order = Vec::with_capacity(labels.len());
    let (mut a, mut b) = (pos.into_iter(), neg.into_iter());
    loop {
        match (a.next(), b.next()) {
            (None, None) => break,
            (x, y) => order.extend(x.into_iter().chain(y)),
        }
    }
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..n_train + n_test].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Named id subsets used by the different stages of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seed: u64,
    pub unet_train: Vec<String>,
    pub unet_test: Vec<String>,
    pub one_to_n: Vec<String>,
    pub n_to_n: Vec<String>,
}

impl SplitSpec {
    /// `unet_train` must be disjoint from `unet_test`; both quantum subsets
    /// must lie inside `unet_test`. No set may repeat an id.
    pub fn validate(&self) -> Result<()> {
        let set = |name: &str, ids: &[String]| -> Result<HashSet<String>> {
            let s: HashSet<String> = ids.iter().cloned().collect();
            if s.len() != ids.len() {
                return Err(Error::Data(format!("split `{name}` repeats an id")));
            }
            Ok(s)
        };
        let train = set("unet_train", &self.unet_train)?;
        let test = set("unet_test", &self.unet_test)?;
        if let Some(id) = train.intersection(&test).next() {
            return Err(Error::Data(format!(
                "id {id:?} is in both unet_train and unet_test"
            )));
        }
        for (name, ids) in [("one_to_n", &self.one_to_n), ("n_to_n", &self.n_to_n)] {
            let s = set(name, ids)?;
            if let Some(id) = s.difference(&test).next() {
                return Err(Error::Data(format!(
                    "id {id:?} in `{name}` is not in unet_test"
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn balanced(n: usize) -> Vec<Label> {
        (0..n)
            .map(|i| if i % 2 == 0 { Label::Pos } else { Label::Neg })
            .collect()
    }

    #[test]
    fn kfold_sizes() {
        let labels = balanced(2000);
        let folds = stratified_kfold(&labels, 10, 3).unwrap();
        for f in &folds {
            assert_eq!(f.len(), 200);
            assert_eq!(f.iter().filter(|&&i| labels[i] == Label::Pos).count(), 100);
        }
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..2000).collect::<Vec<_>>());
        assert_eq!(stratified_kfold(&labels, 10, 3).unwrap(), folds);
        assert_ne!(stratified_kfold(&labels, 10, 4).unwrap(), folds);

        let small = stratified_kfold(&balanced(10), 5, 0).unwrap();
        assert!(small.iter().all(|f| f.len() == 2 && f[0] % 2 != f[1] % 2));
    }

    #[test]
    fn kfold_unbalanced_within_one() {
        let labels: Vec<Label> = (0..23)
            .map(|i| if i < 7 { Label::Pos } else { Label::Neg })
            .collect();
        let folds = stratified_kfold(&labels, 4, 9).unwrap();
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        let pos: Vec<usize> = folds
            .iter()
            .map(|f| f.iter().filter(|&&i| labels[i] == Label::Pos).count())
            .collect();
        assert!(pos.iter().max().unwrap() - pos.iter().min().unwrap() <= 1);
        assert!(stratified_kfold(&labels, 1, 0).is_err());
        assert!(stratified_kfold(&labels, 24, 0).is_err());
    }

    #[test]
    fn train_test_sampling() {
        let labels = balanced(1000);
        let (tr, te) = sample_train_test(&labels, 500, 200, 5).unwrap();
        assert_eq!((tr.len(), te.len()), (500, 200));
        assert!(tr.iter().all(|i| !te.contains(i)));
        assert_eq!(tr.iter().filter(|&&i| labels[i] == Label::Pos).count(), 250);
        assert!(sample_train_test(&labels, 900, 200, 5).is_err());
    }

    #[test]
    fn split_spec_validation() {
        let ids = |r: std::ops::Range<usize>| r.map(|i| format!("t{i}")).collect::<Vec<_>>();
        let ok = SplitSpec {
            seed: 1,
            unet_train: ids(0..10),
            unet_test: ids(10..30),
            one_to_n: ids(10..20),
            n_to_n: ids(20..30),
        };
        assert!(SplitSpec::from_json(&ok.to_json().unwrap()).is_ok());
        let mut leak = ok.clone();
        leak.unet_test.push("t3".into());
        assert!(leak.validate().is_err());
        let mut outside = ok.clone();
        outside.one_to_n.push("t0".into());
        assert!(outside.validate().is_err());
        let mut dup = ok;
        dup.n_to_n.push("t20".into());
        assert!(dup.validate().is_err());
    }
}
