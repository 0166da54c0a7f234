//! Lloyd's k-means with k-means++ seeding, used to build background sets;
//! optionally stratified by protected group so that each group contributes
//! the same number of background rows.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BackgroundProvenance, BackgroundSet};
use crate::data::{Dataset, Group};
use crate::linalg::Matrix;
use crate::{Error, Result};

const MAX_ITERATIONS: usize = 300;

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding: the first centroid is a uniformly random row, each
/// further centroid is drawn with probability proportional to the squared
/// distance to the nearest centroid chosen so far.
fn seed_centroids(x: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = x.rows();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.gen_range(0..n));
    let mut d2: Vec<f64> = (0..n)
        .map(|i| squared_distance(x.row(i), x.row(chosen[0])))
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let u = rng.gen::<f64>() * total;
            let mut cum = 0.0;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                cum += d;
                if u < cum {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            // All remaining mass is zero (duplicate points): fall back to a
            // uniform draw.
            rng.gen_range(0..n)
        };
        chosen.push(next);
        for (i, nearest) in d2.iter_mut().enumerate() {
            let d = squared_distance(x.row(i), x.row(next));
            if d < *nearest {
                *nearest = d;
            }
        }
    }
    chosen
}

/// Lloyd's algorithm on the rows of `x`; returns the `k` centroids.
///
/// Deterministic per seed. Converges when assignments are stable or after
/// 300 iterations. An emptied cluster is re-seeded at the point farthest
/// from its assigned centroid.
pub fn kmeans(x: &Matrix, k: usize, seed: u64) -> Result<Matrix> {
    let n = x.rows();
    let m = x.cols();
    if k == 0 {
        return Err(Error::Config("k must be >= 1".into()));
    }
    if n < k {
        return Err(Error::Data(format!(
            "cannot build {k} clusters from {n} rows"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = x.select_rows(&seed_centroids(x, k, &mut rng));
    let mut assignment: Vec<usize> = vec![usize::MAX; n];

    for _ in 0..MAX_ITERATIONS {
        // Assign each row to the nearest centroid (ties: lowest index wins).
        let mut next: Vec<usize> = Vec::with_capacity(n);
        for i in 0..n {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for c in 0..k {
                let d = squared_distance(x.row(i), centroids.row(c));
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            next.push(best);
        }
        if next == assignment {
            break;
        }
        assignment = next;

        // Recompute centroids as cluster means.
        let mut sums = Matrix::zeros(k, m);
        let mut counts = vec![0usize; k];
        for (i, &c) in assignment.iter().enumerate() {
            counts[c] += 1;
            let row = x.row(i);
            let s = sums.row_mut(c);
            for j in 0..m {
                s[j] += row[j];
            }
        }
        let mut claimed: Vec<usize> = Vec::new();
        for (c, &count) in counts.iter().enumerate() {
            if count > 0 {
                let inv = 1.0 / count as f64;
                for j in 0..m {
                    centroids.set(c, j, sums.get(c, j) * inv);
                }
            } else {
                // Re-seed an empty cluster at the unclaimed point farthest
                // from its assigned centroid.
                let far = (0..n)
                    .filter(|i| !claimed.contains(i))
                    .max_by(|&a, &b| {
                        let da = squared_distance(x.row(a), centroids.row(assignment[a]));
                        let db = squared_distance(x.row(b), centroids.row(assignment[b]));
                        da.total_cmp(&db).then(b.cmp(&a))
                    })
                    .expect("n >= k guarantees a point to claim");
                claimed.push(far);
                for j in 0..m {
                    centroids.set(c, j, x.get(far, j));
                }
            }
        }
    }
    Ok(centroids)
}

/// Background set from plain k-means over the training feature matrix.
pub fn kmeans_backgrounds(train: &Dataset, k: usize, seed: u64) -> Result<BackgroundSet> {
    train.validate()?;
    let centroids = kmeans(&train.x, k, seed)?;
    BackgroundSet::from_matrix(centroids, BackgroundProvenance::Kmeans)
}

/// Background set stratified by protected group: k-means with `k_per_group`
/// clusters is run on each group's rows separately (same seed for both, so
/// identical groups produce identical centroids), and the group-A centroids
/// are concatenated before the group-B centroids.
pub fn stratified_backgrounds(
    train: &Dataset,
    k_per_group: usize,
    seed: u64,
) -> Result<BackgroundSet> {
    train.validate()?;
    let protected = train.protected.as_ref().ok_or_else(|| {
        Error::Data(format!(
            "dataset `{}` has no protected column to stratify on",
            train.name
        ))
    })?;
    let mut rows_a = Vec::new();
    let mut rows_b = Vec::new();
    for (i, g) in protected.iter().enumerate() {
        match g {
            Group::A => rows_a.push(i),
            Group::B => rows_b.push(i),
        }
    }
    for (group, rows) in [("A", &rows_a), ("B", &rows_b)] {
        if rows.len() < k_per_group {
            return Err(Error::Data(format!(
                "protected group {group} has {} rows, need at least {k_per_group}",
                rows.len()
            )));
        }
    }
    let cent_a = kmeans(&train.x.select_rows(&rows_a), k_per_group, seed)?;
    let cent_b = kmeans(&train.x.select_rows(&rows_b), k_per_group, seed)?;
    let mut data = cent_a.as_slice().to_vec();
    data.extend_from_slice(cent_b.as_slice());
    let b = Matrix::from_vec(2 * k_per_group, train.m(), data)?;
    BackgroundSet::from_matrix(b, BackgroundProvenance::StratifiedKmeans)
}
