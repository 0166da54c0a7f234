//! SMOTE rebalancing: synthesize minority-class samples as convex
//! combinations of existing minority samples and their nearest minority
//! neighbors until both classes have equal counts.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Dataset;
use crate::linalg::Matrix;
use crate::{Error, Result};

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

/// Balances class counts by appending synthetic minority samples.
///
/// Every synthetic sample is `x + lambda * (x' - x)` where `x` is a minority
/// row chosen uniformly at random, `x'` is one of its `k_neighbors` nearest
/// minority neighbors (Euclidean distance, ties broken by lower row index),
/// and `lambda` is uniform in [0,1). Original rows are kept verbatim and in
/// order; synthetic rows are appended after them. Deterministic per seed.
///
/// An already balanced dataset is returned unchanged. Errors: single-class
/// input; minority class not larger than `k_neighbors`.
pub fn smote_rebalance(train: &Dataset, k_neighbors: usize, seed: u64) -> Result<Dataset> {
    train.validate()?;
    let n1 = train.y.iter().filter(|&&v| v == 1).count();
    let n0 = train.n() - n1;
    if n0 == 0 || n1 == 0 {
        return Err(Error::Data(
            "cannot rebalance a single-class dataset".into(),
        ));
    }
    if n0 == n1 {
        return Ok(train.clone());
    }
    let minority_label: u8 = if n1 < n0 { 1 } else { 0 };
    let minority: Vec<usize> = (0..train.n())
        .filter(|&i| train.y[i] == minority_label)
        .collect();
    let need = n0.abs_diff(n1);
    if minority.len() <= k_neighbors {
        return Err(Error::Data(format!(
            "minority class has {} samples, need more than k_neighbors = {}",
            minority.len(),
            k_neighbors
        )));
    }

    // k nearest minority neighbors of each minority row (excluding itself).
    let neighbors: Vec<Vec<usize>> = minority
        .iter()
        .map(|&i| {
            let mut others: Vec<(f64, usize)> = minority
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| (squared_distance(train.x.row(i), train.x.row(j)), j))
                .collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            others.into_iter().take(k_neighbors).map(|(_, j)| j).collect()
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = train.m();
    let mut data = train.x.as_slice().to_vec();
    let mut y = train.y.clone();
    let mut protected = train.protected.clone();
    for _ in 0..need {
        let pick = rng.gen_range(0..minority.len());
        let base = minority[pick];
        let nb = neighbors[pick][rng.gen_range(0..k_neighbors)];
        let lambda: f64 = rng.gen();
        let (bx, nx) = (train.x.row(base), train.x.row(nb));
        for j in 0..m {
            data.push(bx[j] + lambda * (nx[j] - bx[j]));
        }
        y.push(minority_label);
        if let Some(p) = &mut protected {
            let g = train.protected.as_ref().unwrap()[base];
            p.push(g);
        }
    }

    Ok(Dataset {
        name: train.name.clone(),
        x: Matrix::from_vec(train.n() + need, m, data)?,
        y,
        feature_names: train.feature_names.clone(),
        feature_origin: train.feature_origin.clone(),
        protected,
        norm_stats: train.norm_stats.clone(),
    })
}
