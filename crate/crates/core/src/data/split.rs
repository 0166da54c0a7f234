//! Deterministic stratified train/test splitting, for both processed
//! datasets and raw datasets (the pipeline splits raw rows first so that all
//! statistics are fitted on the training side only).

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

use super::raw::{RawCell, RawDataset};
use super::Dataset;
use crate::{Error, Result};

/// Train/test split parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitConfig {
    /// Fraction of rows held out for testing, in (0,1).
    pub test_fraction: f64,
    /// Seed of the deterministic shuffle.
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            test_fraction: 0.2,
            seed: 0,
        }
    }
}

/// Partitions `0..keys.len()` into (rest, held-out) index sets, stratified
/// by key: within every key class, `fraction` of the indices (rounded) are
/// held out after a seeded shuffle. Both outputs are sorted ascending and
/// together they are disjoint and exhaustive.
pub fn stratified_partition<K: Ord>(
    keys: &[K],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!(
            "split fraction must be in (0,1), got {fraction}"
        )));
    }
    let mut by_class: BTreeMap<&K, Vec<usize>> = BTreeMap::new();
    for (i, k) in keys.iter().enumerate() {
        by_class.entry(k).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rest = Vec::new();
    let mut held = Vec::new();
    for indices in by_class.values() {
        let mut shuffled = indices.clone();
        shuffled.shuffle(&mut rng);
        let n_held = (shuffled.len() as f64 * fraction).round() as usize;
        held.extend_from_slice(&shuffled[..n_held]);
        rest.extend_from_slice(&shuffled[n_held..]);
    }
    rest.sort_unstable();
    held.sort_unstable();
    if rest.is_empty() || held.is_empty() {
        return Err(Error::Config(format!(
            "fraction {fraction} yields an empty {} side for {} rows",
            if rest.is_empty() { "train" } else { "test" },
            keys.len()
        )));
    }
    Ok((rest, held))
}

/// Splits a processed dataset into stratified train/test parts.
pub fn train_test_split(ds: &Dataset, cfg: &SplitConfig) -> Result<(Dataset, Dataset)> {
    ds.validate()?;
    if ds.n() < 2 {
        return Err(Error::Data("cannot split fewer than 2 rows".into()));
    }
    if !ds.y.contains(&0) || !ds.y.contains(&1) {
        return Err(Error::Data("both classes must be present to split".into()));
    }
    let (train_idx, test_idx) = stratified_partition(&ds.y, cfg.test_fraction, cfg.seed)?;
    Ok((ds.select_rows(&train_idx), ds.select_rows(&test_idx)))
}

/// Splits a raw dataset into stratified train/test parts.
///
/// Rows with missing cells are dropped first (they would be dropped by
/// preprocessing anyway, and stratification needs the label value), then the
/// surviving rows are partitioned by raw label value.
pub fn split_raw(raw: &RawDataset, cfg: &SplitConfig) -> Result<(RawDataset, RawDataset)> {
    let keep = raw.complete_row_indices();
    if keep.len() < 2 {
        return Err(Error::Data(format!(
            "`{}` has {} complete rows, need at least 2 to split",
            raw.name,
            keep.len()
        )));
    }
    let label_col = raw.label_index();
    let keys: Vec<&str> = keep
        .iter()
        .map(|&i| match &raw.row(i)[label_col] {
            RawCell::Text(t) => t.as_str(),
            _ => "",
        })
        .collect();
    let (train_pos, test_pos) = stratified_partition(&keys, cfg.test_fraction, cfg.seed)?;
    let train_idx: Vec<usize> = train_pos.iter().map(|&p| keep[p]).collect();
    let test_idx: Vec<usize> = test_pos.iter().map(|&p| keep[p]).collect();
    Ok((raw.select_rows(&train_idx), raw.select_rows(&test_idx)))
}
