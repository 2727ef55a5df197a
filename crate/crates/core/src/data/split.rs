use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DataError, DatasetRecord, Subset};
use crate::objectives::DatasetSizes;

/// Training material drawn from a selection of dataset tags.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinedDataset {
    pub selection: BTreeSet<String>,
    /// Records from the `train` subsets of the selected tags, in input order.
    pub train: Vec<DatasetRecord>,
    /// Predefined `val` records of the selected tags.
    pub val: Vec<DatasetRecord>,
    /// Training-set size per tag, `N_d`.
    pub sizes: DatasetSizes,
}

impl CombinedDataset {
    pub fn total(&self) -> usize {
        self.train.len()
    }
}

/// Concatenates the train (and predefined val) subsets of the selected tags.
pub fn combine_datasets(all: &[DatasetRecord], selection: &BTreeSet<String>) -> Result<CombinedDataset, DataError> {
    if selection.is_empty() {
        return Err(DataError::EmptySelection);
    }
    let known: BTreeSet<&str> = all.iter().map(|r| r.dataset.as_str()).collect();
    if let Some(tag) = selection.iter().find(|t| !known.contains(t.as_str())) {
        return Err(DataError::UnknownTag(tag.clone()));
    }
    let pick = |subset: Subset| -> Vec<DatasetRecord> {
        all.iter()
            .filter(|r| r.subset == subset && selection.contains(&r.dataset))
            .cloned()
            .collect()
    };
    let train = pick(Subset::Train);
    let val = pick(Subset::Val);
    let mut counts: BTreeMap<String, usize> = selection.iter().map(|t| (t.clone(), 0)).collect();
    for r in &train {
        *counts.get_mut(&r.dataset).expect("selected") += 1;
    }
    let sizes = DatasetSizes::new(counts).map_err(|_| DataError::EmptyDataset)?;
    Ok(CombinedDataset { selection: selection.clone(), train, val, sizes })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Vec<DatasetRecord>,
    pub val: Vec<DatasetRecord>,
}

/// Carves a validation partition out of every tag that lacks a predefined one.
///
/// Stratified per tag: `round(n * fraction)` records of each such tag move to
/// validation, chosen by a shuffle seeded from `seed` and the tag name, so a
/// tag's split does not depend on which other tags are selected. Tags with
/// predefined validation records pass through untouched. Relative order is
/// preserved in both outputs.
pub fn split_validation(ds: &CombinedDataset, fraction: f64, seed: u64) -> Result<Split, DataError> {
    let has_val: BTreeSet<&str> = ds.val.iter().map(|r| r.dataset.as_str()).collect();
    let mut by_tag: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in ds.train.iter().enumerate() {
        if !has_val.contains(r.dataset.as_str()) {
            by_tag.entry(r.dataset.as_str()).or_default().push(i);
        }
    }
    let mut to_val = vec![false; ds.train.len()];
    for (tag, indices) in &by_tag {
        if indices.len() < 10 {
            return Err(DataError::TooFewRecords { tag: tag.to_string(), count: indices.len() });
        }
        let k = (indices.len() as f64 * fraction).round() as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(crc32fast::hash(tag.as_bytes()) as u64);
        let mut shuffled = indices.clone();
        shuffled.shuffle(&mut rng);
        for &i in &shuffled[..k] {
            to_val[i] = true;
        }
    }
    let mut split = Split { train: Vec::new(), val: ds.val.clone() };
    for (r, &v) in ds.train.iter().zip(&to_val) {
        if v {
            split.val.push(r.clone());
        } else {
            split.train.push(r.clone());
        }
    }
    Ok(split)
}

/// Shuffled mini-batches of indices `0..n` for one epoch.
///
/// The order is a deterministic function of `(seed, epoch)`; the last batch may
/// be short.
pub fn make_batches(n: usize, batch: usize, seed: u64, epoch: u64) -> Result<Vec<Vec<usize>>, DataError> {
    if batch == 0 {
        return Err(DataError::InvalidBatchSize);
    }
    if n == 0 {
        return Err(DataError::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    Ok(order.chunks(batch).map(<[usize]>::to_vec).collect())
}
