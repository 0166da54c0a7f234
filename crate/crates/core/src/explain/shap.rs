//! Shapley-value computation: masked evaluation, the coalition game, the
//! exact enumeration oracle, and the sampled kernel-regression estimator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::{BTreeSet, HashMap};

use super::{BackgroundSet, Explanation, ExplanationMatrix, Scorer, ShapConfig, ShapMode};
use crate::data::Dataset;
use crate::linalg::{solve, Matrix};
use crate::{Error, Result};

/// Ridge added to the normal-equation diagonal so that near-singular
/// sampled systems stay solvable and deterministic.
const TIKHONOV_DAMPING: f64 = 1e-10;

/// Model output on the hybrid sample that keeps `x`'s values on the feature
/// subset `s` and takes every other feature from the background row `b`.
pub fn masked_eval<S: Scorer + ?Sized>(
    model: &S,
    x: &[f64],
    s: &[usize],
    b: &[f64],
) -> Result<f64> {
    if x.len() != b.len() {
        return Err(Error::Dimension(format!(
            "sample has {} features, background row has {}",
            x.len(),
            b.len()
        )));
    }
    let mut hybrid = b.to_vec();
    for &j in s {
        if j >= x.len() {
            return Err(Error::Dimension(format!(
                "coalition index {j} out of range for {} features",
                x.len()
            )));
        }
        hybrid[j] = x[j];
    }
    Ok(model.score_row(&hybrid))
}

/// Value of coalition `s`: the mean of [`masked_eval`] over all background
/// rows.
pub fn coalition_value<S: Scorer + ?Sized>(
    model: &S,
    x: &[f64],
    s: &[usize],
    bg: &BackgroundSet,
) -> Result<f64> {
    if bg.k() == 0 {
        return Err(Error::Data("empty background set".into()));
    }
    let mut acc = 0.0;
    for r in 0..bg.k() {
        acc += masked_eval(model, x, s, bg.b.row(r))?;
    }
    Ok(acc / bg.k() as f64)
}

/// Exact binomial coefficient as f64 (exact for the small arguments used
/// here: every intermediate stays below 2^53).
fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut res = 1.0;
    for i in 0..k {
        res = res * (n - i) as f64 / (i + 1) as f64;
    }
    res
}

/// Brute-force Shapley values over all `2^m` coalitions (`m <= 20`).
///
/// Feature `j` receives `sum over S not containing j` of
/// `|S|! (m - |S| - 1)! / m!` times its marginal contribution
/// `v(S + j) - v(S)`, where `v` is the background-averaged masked
/// evaluation. `phi0` is `v(empty)`, the mean model output over the
/// background rows.
pub fn exact_shap<S: Scorer + ?Sized>(
    model: &S,
    x: &[f64],
    bg: &BackgroundSet,
) -> Result<Explanation> {
    let m = x.len();
    if m == 0 {
        return Err(Error::Config("cannot explain zero features".into()));
    }
    if m > 20 {
        return Err(Error::Config(format!(
            "exact enumeration requires m <= 20, got m = {m}"
        )));
    }
    if bg.m() != m {
        return Err(Error::Dimension(format!(
            "sample has {m} features, background set has {}",
            bg.m()
        )));
    }
    let size = 1usize << m;
    let k = bg.k();
    let mut v = vec![0.0; size];
    let mut hybrid = vec![0.0; m];
    for (mask, value) in v.iter_mut().enumerate() {
        let mut acc = 0.0;
        for r in 0..k {
            let b = bg.b.row(r);
            for (j, h) in hybrid.iter_mut().enumerate() {
                *h = if mask >> j & 1 == 1 { x[j] } else { b[j] };
            }
            acc += model.score_row(&hybrid);
        }
        *value = acc / k as f64;
    }

    // Weight of a marginal contribution on top of a coalition of size s:
    // s! (m-s-1)! / m!  ==  1 / (m * C(m-1, s)).
    let weights: Vec<f64> = (0..m)
        .map(|s| 1.0 / (m as f64 * binomial(m - 1, s)))
        .collect();
    let mut phi = vec![0.0; m];
    for (j, phi_j) in phi.iter_mut().enumerate() {
        let bit = 1usize << j;
        let mut acc = 0.0;
        for mask in 0..size {
            if mask & bit != 0 {
                continue;
            }
            let s = mask.count_ones() as usize;
            acc += weights[s] * (v[mask | bit] - v[mask]);
        }
        *phi_j = acc;
    }
    Ok(Explanation {
        phi,
        phi0: v[0],
        fx: model.score_row(x),
    })
}

// --- sampled kernel estimator ---------------------------------------------

fn mask_words(m: usize) -> usize {
    m.div_ceil(64)
}

fn mask_contains(bits: &[u64], j: usize) -> bool {
    bits[j / 64] >> (j % 64) & 1 == 1
}

fn mask_insert(bits: &mut [u64], j: usize) {
    bits[j / 64] |= 1 << (j % 64);
}

/// Coalition value for a bitmask coalition.
fn coalition_value_bits<S: Scorer + ?Sized>(
    model: &S,
    x: &[f64],
    bits: &[u64],
    bg: &BackgroundSet,
) -> f64 {
    let m = x.len();
    let mut acc = 0.0;
    let mut hybrid = vec![0.0; m];
    for r in 0..bg.k() {
        let b = bg.b.row(r);
        for (j, h) in hybrid.iter_mut().enumerate() {
            *h = if mask_contains(bits, j) { x[j] } else { b[j] };
        }
        acc += model.score_row(&hybrid);
    }
    acc / bg.k() as f64
}

/// Shapley kernel weight of one coalition of size `s` out of `m` features.
fn kernel_weight(m: usize, s: usize) -> f64 {
    (m - 1) as f64 / (binomial(m, s) * (s * (m - s)) as f64)
}

/// Collected coalition sample: masks in deterministic order, accumulated
/// regression weights.
struct CoalitionSample {
    masks: Vec<Vec<u64>>,
    weights: Vec<f64>,
}

/// All `2^m - 2` proper non-empty coalitions with exact kernel weights.
fn enumerate_all(m: usize) -> CoalitionSample {
    let per_size: Vec<f64> = (0..m).map(|s| if s == 0 { 0.0 } else { kernel_weight(m, s) }).collect();
    let words = mask_words(m);
    let mut masks = Vec::with_capacity((1usize << m) - 2);
    let mut weights = Vec::with_capacity((1usize << m) - 2);
    for mask in 1..((1usize << m) - 1) {
        let mut bits = vec![0u64; words];
        bits[0] = mask as u64;
        masks.push(bits);
        weights.push(per_size[mask.count_ones() as usize]);
    }
    CoalitionSample { masks, weights }
}

/// All size-1 and size-(m-1) coalitions with exact kernel weights, plus
/// `budget - 2m` coalitions sampled by per-size kernel mass from the
/// intermediate sizes, uniformly within a size. Duplicate draws accumulate
/// weight on the first occurrence, so the regression row order is the
/// deterministic first-seen order.
fn sample_coalitions(m: usize, budget: usize, seed: u64) -> CoalitionSample {
    let words = mask_words(m);
    let mut masks: Vec<Vec<u64>> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();

    let w_edge = kernel_weight(m, 1); // sizes 1 and m-1 share this weight
    for j in 0..m {
        let mut bits = vec![0u64; words];
        mask_insert(&mut bits, j);
        index.insert(bits.clone(), masks.len());
        masks.push(bits);
        weights.push(w_edge);
    }
    for j in 0..m {
        let mut bits = vec![0u64; words];
        for l in 0..m {
            if l != j {
                mask_insert(&mut bits, l);
            }
        }
        index.insert(bits.clone(), masks.len());
        masks.push(bits);
        weights.push(w_edge);
    }

    let n_draws = budget.saturating_sub(2 * m);
    if m < 4 || n_draws == 0 {
        return CoalitionSample { masks, weights };
    }
    // Total kernel mass of each intermediate size s: C(m,s) * pi(s).
    let sizes: Vec<usize> = (2..=m - 2).collect();
    let mass: Vec<f64> = sizes
        .iter()
        .map(|&s| (m - 1) as f64 / (s * (m - s)) as f64)
        .collect();
    let total_mass: f64 = mass.iter().sum();
    let unit = total_mass / n_draws as f64;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n_draws {
        // Pick a size proportional to its kernel mass.
        let u = rng.gen::<f64>() * total_mass;
        let mut cum = 0.0;
        let mut s = sizes[sizes.len() - 1];
        for (i, &mm) in mass.iter().enumerate() {
            cum += mm;
            if u < cum {
                s = sizes[i];
                break;
            }
        }
        // Uniform subset of that size (Floyd's sampling).
        let mut chosen: BTreeSet<usize> = BTreeSet::new();
        for i in (m - s)..m {
            let r = rng.gen_range(0..=i);
            if !chosen.insert(r) {
                chosen.insert(i);
            }
        }
        let mut bits = vec![0u64; words];
        for &j in &chosen {
            mask_insert(&mut bits, j);
        }
        match index.get(&bits) {
            Some(&at) => weights[at] += unit,
            None => {
                index.insert(bits.clone(), masks.len());
                masks.push(bits);
                weights.push(unit);
            }
        }
    }
    CoalitionSample { masks, weights }
}

/// Sampled kernel estimator of the Shapley values.
///
/// When the budget covers all `2^m` coalitions (and `m <= 20`) every proper
/// non-empty coalition enters the regression with its exact kernel weight,
/// which recovers the exact Shapley values up to solver rounding. Otherwise
/// coalitions are sampled as described in [`sample_coalitions`].
///
/// The weighted least-squares fit of `v(S) ~ phi0 + sum of phi_j over S`
/// holds `phi0` fixed at `v(empty)` and enforces
/// `phi0 + sum(phi) = v(full)` by eliminating the last unknown, so every
/// returned explanation satisfies the additivity identity by construction.
/// Deterministic per seed. In `Exact` mode this delegates to [`exact_shap`].
pub fn kernel_shap<S: Scorer + ?Sized>(
    model: &S,
    x: &[f64],
    bg: &BackgroundSet,
    cfg: &ShapConfig,
) -> Result<Explanation> {
    let m = x.len();
    if bg.m() != m {
        return Err(Error::Dimension(format!(
            "sample has {m} features, background set has {}",
            bg.m()
        )));
    }
    cfg.validate_for(m)?;
    if cfg.mode == ShapMode::Exact {
        return exact_shap(model, x, bg);
    }

    let phi0 = coalition_value(model, x, &[], bg)?;
    let all: Vec<usize> = (0..m).collect();
    let v_full = coalition_value(model, x, &all, bg)?;
    let fx = model.score_row(x);
    let delta = v_full - phi0;
    if m == 1 {
        return Ok(Explanation {
            phi: vec![delta],
            phi0,
            fx,
        });
    }

    let budget = cfg.budget_for(m);
    let full = m <= 20 && (1usize << m) <= budget;
    let sample = if full {
        enumerate_all(m)
    } else {
        sample_coalitions(m, budget, cfg.seed)
    };

    let values: Vec<f64> = sample
        .masks
        .iter()
        .map(|bits| coalition_value_bits(model, x, bits, bg))
        .collect();

    // Constrained weighted least squares via elimination of the last
    // feature: with z the coalition indicator, fit
    //   v(S) - phi0 - z_last * delta  =  sum_{j<m-1} (z_j - z_last) psi_j
    // and recover phi_last = delta - sum(psi).
    let q = m - 1;
    let last = m - 1;
    let mut g = Matrix::zeros(q, q);
    let mut rhs = vec![0.0; q];
    let mut a_row = vec![0.0; q];
    let mut active: Vec<usize> = Vec::with_capacity(q);
    for (row_idx, bits) in sample.masks.iter().enumerate() {
        let w = sample.weights[row_idx];
        let z_last = if mask_contains(bits, last) { 1.0 } else { 0.0 };
        active.clear();
        for (j, slot) in a_row.iter_mut().enumerate() {
            let z_j = if mask_contains(bits, j) { 1.0 } else { 0.0 };
            let a = z_j - z_last;
            *slot = a;
            if a != 0.0 {
                active.push(j);
            }
        }
        let c = values[row_idx] - phi0 - z_last * delta;
        for &j in &active {
            let waj = w * a_row[j];
            rhs[j] += waj * c;
            for &l in &active {
                if l >= j {
                    let v = g.get(j, l) + waj * a_row[l];
                    g.set(j, l, v);
                }
            }
        }
    }
    for j in 0..q {
        for l in 0..j {
            g.set(j, l, g.get(l, j));
        }
        let v = g.get(j, j) + TIKHONOV_DAMPING;
        g.set(j, j, v);
    }
    let psi = solve(g, rhs).map_err(|e| {
        Error::Explain(format!(
            "singular regression system (budget {budget}, m {m}): {e}; raising the coalition budget may help"
        ))
    })?;
    let mut phi = vec![0.0; m];
    let mut sum_psi = 0.0;
    for j in 0..q {
        phi[j] = psi[j];
        sum_psi += psi[j];
    }
    phi[last] = delta - sum_psi;

    Ok(Explanation { phi, phi0, fx })
}

/// Explains every row of a dataset. Rows are computed in parallel; row `i`
/// uses seed `cfg.seed + i` (wrapping), so the result is bitwise identical
/// regardless of thread scheduling. `phi0` is shared across rows.
pub fn explain_matrix<S: Scorer>(
    model: &S,
    ds: &Dataset,
    bg: &BackgroundSet,
    cfg: &ShapConfig,
) -> Result<ExplanationMatrix> {
    ds.validate()?;
    if bg.m() != ds.m() {
        return Err(Error::Dimension(format!(
            "dataset has {} features, background set has {}",
            ds.m(),
            bg.m()
        )));
    }
    cfg.validate_for(ds.m())?;
    let rows: Vec<Explanation> = (0..ds.n())
        .into_par_iter()
        .map(|i| {
            let row_cfg = ShapConfig {
                seed: cfg.seed.wrapping_add(i as u64),
                ..*cfg
            };
            kernel_shap(model, ds.x.row(i), bg, &row_cfg)
                .map_err(|e| Error::Explain(format!("row {i}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let phi0 = rows[0].phi0;
    let mut e = Matrix::zeros(ds.n(), ds.m());
    for (i, expl) in rows.iter().enumerate() {
        e.row_mut(i).copy_from_slice(&expl.phi);
    }
    Ok(ExplanationMatrix { e, phi0 })
}
