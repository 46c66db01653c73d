use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Dataset, SplitSpec};
use crate::error::{Error, Result};

type Group = (String, Vec<u32>);

/// Splits whole (object, view pair) groups so no view contributes records
/// to both sides. Objects with several groups are split individually;
/// objects seen from a single view pair are pooled and split together.
pub fn split_by_view(dataset: &Dataset, test_fraction: f64, seed: u64) -> Result<SplitSpec> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument("test_fraction must be in (0, 1)".into()));
    }
    let mut by_object: BTreeMap<&str, BTreeSet<&[u32]>> = BTreeMap::new();
    for r in dataset.records() {
        by_object.entry(&r.object).or_default().insert(&r.view_ids);
    }
    let total: usize = by_object.values().map(|g| g.len()).sum();
    if total < 2 {
        return Err(Error::TooFewGroups(total));
    }
    let mut test_groups: BTreeSet<Group> = BTreeSet::new();
    let mut pooled: Vec<Group> = Vec::new();
    for (k, (object, groups)) in by_object.iter().enumerate() {
        let mut groups: Vec<Group> = groups.iter().map(|v| (object.to_string(), v.to_vec())).collect();
        if groups.len() < 2 {
            pooled.extend(groups);
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64 + 1);
        let n = test_count(test_fraction, groups.len());
        groups.shuffle(&mut rng);
        test_groups.extend(groups.into_iter().take(n));
    }
    if pooled.len() >= 2 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = test_count(test_fraction, pooled.len());
        pooled.shuffle(&mut rng);
        test_groups.extend(pooled.into_iter().take(n));
    }
    partition(dataset, |obj, views| {
        test_groups.contains(&(obj.to_string(), views.to_vec()))
    })
}

fn test_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64).round() as usize).clamp(1, n.saturating_sub(1).max(1))
}

/// Test side holds every record of `object`.
pub fn leave_one_object_out(dataset: &Dataset, object: &str) -> Result<SplitSpec> {
    partition(dataset, |obj, _| obj == object)
}

fn partition(dataset: &Dataset, is_test: impl Fn(&str, &[u32]) -> bool) -> Result<SplitSpec> {
    let mut split = SplitSpec::default();
    for (i, r) in dataset.records().iter().enumerate() {
        if is_test(&r.object, &r.view_ids) {
            split.test.push(i);
        } else {
            split.train.push(i);
        }
    }
    if split.train.is_empty() || split.test.is_empty() {
        return Err(Error::EmptySplit(format!(
            "{} train and {} test records",
            split.train.len(),
            split.test.len()
        )));
    }
    Ok(split)
}
