//! Shared numeric and plumbing helpers: seed derivation, float formatting,
//! descriptive statistics, and content hashing.

use sha2::{Digest, Sha256};
use std::io::Read;
use std::path::Path;

use crate::{Error, Result};

/// Derives a sub-seed from a base seed and a stage label.
///
/// The label is hashed (SHA-256, first 8 bytes, little-endian) and added to
/// the base with wrapping arithmetic, so every named stage of a run gets an
/// independent, platform-stable stream while remaining a pure function of
/// the global seed.
pub fn derive_seed(base: u64, label: &str) -> u64 {
    let digest = Sha256::digest(label.as_bytes());
    let mut first = [0u8; 8];
    first.copy_from_slice(&digest[..8]);
    base.wrapping_add(u64::from_le_bytes(first))
}

/// Formats a float with 17 significant digits in scientific notation.
///
/// 17 significant digits round-trip any finite `f64`, so CSV artifacts are
/// lossless and byte-stable across runs.
pub fn fmt_f64(v: f64) -> String {
    format!("{:.16e}", v)
}

/// Arithmetic mean; 0.0 for an empty slice.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation (the `1/n` convention); 0.0 for an empty
/// slice. The population convention is used consistently for z-scoring and
/// column rescaling so that rescaling an already-standardized column is an
/// identity up to rounding.
pub fn population_std(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mu = mean(xs);
    let var = xs.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / xs.len() as f64;
    var.sqrt()
}

/// Median via sorting; averages the two central values for even lengths.
/// Panics on empty input (callers guard).
pub fn median(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty(), "median of empty slice");
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Linearly interpolated quantile (the "type 7" convention used by most
/// numerical packages): for probability `p`, index `h = p (n-1)` and the
/// result interpolates between the floor and ceil order statistics.
/// Panics on empty input (callers guard).
pub fn quantile(xs: &[f64], p: f64) -> f64 {
    assert!(!xs.is_empty(), "quantile of empty slice");
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let h = p.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        v[lo]
    } else {
        v[lo] + (h - lo as f64) * (v[hi] - v[lo])
    }
}

/// Five-number summary plus mean for reporting score distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Computes a [`Summary`] of the values. Panics on empty input.
pub fn summarize(xs: &[f64]) -> Summary {
    assert!(!xs.is_empty(), "summary of empty slice");
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    Summary {
        mean: mean(xs),
        min: sorted[0],
        q1: quantile(xs, 0.25),
        median: quantile(xs, 0.5),
        q3: quantile(xs, 0.75),
        max: sorted[sorted.len() - 1],
    }
}

/// Hex-encoded SHA-256 of a byte buffer.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{:02x}", b));
    }
    out
}

/// Hex-encoded SHA-256 of a file's contents (streamed).
pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{:02x}", b));
    }
    Ok(out)
}
