//! Shared generators for the integration suites.
//!
//! Every integration test binary compiles its own copy of this module and
//! uses a subset of it, hence the file-wide `dead_code` allowance.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use shapline::data::{Dataset, FeatureOrigin, Schema, SchemaBuilder};
use shapline::explain::ExplanationMatrix;
use shapline::linalg::Matrix;
use shapline::model::MLPModel;
use shapline::util::{mean, population_std};

/// Coefficients of the three label-determining columns in
/// [`three_feature_dataset`].
pub const INFORMATIVE_WEIGHTS: [f64; 3] = [2.0, 1.5, -1.2];

/// An `n x m` dataset of standard-normal features whose label depends on
/// exactly three columns: `y = [2·x0 + 1.5·x1 − 1.2·x2 > 0]`. All other
/// columns are pure noise, which makes the dataset an oracle for
/// compactness claims: a faithful model needs only three features per
/// decision.
pub fn three_feature_dataset(name: &str, n: usize, m: usize, seed: u64) -> Dataset {
    assert!(m >= 3, "need at least the three informative columns");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<f64> = (0..n * m).map(|_| rng.sample(StandardNormal)).collect();
    let x = Matrix::from_vec(n, m, data).unwrap();
    let y: Vec<u8> = (0..n)
        .map(|i| {
            let r = x.row(i);
            let score = INFORMATIVE_WEIGHTS[0] * r[0]
                + INFORMATIVE_WEIGHTS[1] * r[1]
                + INFORMATIVE_WEIGHTS[2] * r[2];
            (score > 0.0) as u8
        })
        .collect();
    Dataset {
        name: name.to_string(),
        x,
        y,
        feature_names: (0..m).map(|j| format!("x{j:02}")).collect(),
        feature_origin: vec![FeatureOrigin::Numerical; m],
        protected: None,
        norm_stats: None,
    }
}

/// Copy of `ds` whose columns are exactly z-scored: zero mean and unit
/// population standard deviation (constant columns are left at zero).
pub fn zscore_columns(ds: &Dataset) -> Dataset {
    let mut x = ds.x.clone();
    for j in 0..ds.m() {
        let col = ds.x.column(j);
        let mu = mean(&col);
        let sd = population_std(&col);
        for i in 0..ds.n() {
            let v = if sd > 0.0 { (ds.x.get(i, j) - mu) / sd } else { 0.0 };
            x.set(i, j, v);
        }
    }
    let mut out = ds.clone();
    out.x = x;
    out
}

/// A random one-hidden-layer model with `m` inputs; every parameter is
/// drawn uniformly from `(-scale, scale)`.
pub fn random_model(m: usize, scale: f64, rng: &mut ChaCha8Rng) -> MLPModel {
    let mut w1 = Matrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            w1.set(i, j, rng.gen_range(-scale..scale));
        }
    }
    let b1: Vec<f64> = (0..m).map(|_| rng.gen_range(-scale..scale)).collect();
    let w2: Vec<f64> = (0..m).map(|_| rng.gen_range(-scale..scale)).collect();
    let b2 = rng.gen_range(-scale..scale);
    MLPModel::new(w1, b1, w2, b2).unwrap()
}

/// A random feature matrix with entries uniform in `(-range, range)`.
pub fn random_matrix(rows: usize, cols: usize, range: f64, rng: &mut ChaCha8Rng) -> Matrix {
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-range..range)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

/// Largest violation of the additivity identity
/// `phi0 + Σ phi = f(x)` over all rows of `ds`.
pub fn max_additivity_error(model: &MLPModel, ds: &Dataset, e: &ExplanationMatrix) -> f64 {
    assert_eq!(e.n(), ds.n());
    assert_eq!(e.m(), ds.m());
    let mut worst = 0.0f64;
    for i in 0..ds.n() {
        let fx = model.predict_row(ds.x.row(i));
        let total: f64 = e.phi0 + e.e.row(i).iter().sum::<f64>();
        worst = worst.max((total - fx).abs());
    }
    worst
}

/// Shape of one reference CSV layout: column-kind counts, whether a
/// protected column is present, per-column category counts of the n-ary
/// columns, and whether missing cells occur.
pub struct RawShape {
    pub label: &'static str,
    pub numerical: usize,
    pub binary: usize,
    pub protected: bool,
    pub nary_categories: &'static [usize],
    pub missing: bool,
    /// Feature-column count after preprocessing: numerical + binary
    /// (+ protected) + Σ categories.
    pub expected_width: usize,
}

/// The four dataset layouts the tool is dimensioned for. Widths after
/// preprocessing: 30, 15, 37 and 43 columns.
pub const REFERENCE_SHAPES: [RawShape; 4] = [
    RawShape {
        label: "panel_a",
        numerical: 30,
        binary: 0,
        protected: false,
        nary_categories: &[],
        missing: false,
        expected_width: 30,
    },
    RawShape {
        label: "panel_b",
        numerical: 9,
        binary: 5,
        protected: true,
        nary_categories: &[],
        missing: true,
        expected_width: 15,
    },
    RawShape {
        label: "panel_c",
        numerical: 11,
        binary: 10,
        protected: false,
        nary_categories: &[5, 5, 6],
        missing: true,
        expected_width: 37,
    },
    RawShape {
        label: "panel_d",
        numerical: 13,
        binary: 12,
        protected: true,
        nary_categories: &[4, 4, 4, 5],
        missing: false,
        expected_width: 43,
    },
];

/// Renders a raw CSV with the given shape plus its schema. Every n-ary
/// category and both values of every binary column appear among the
/// complete rows; when `shape.missing` is set, roughly a quarter of the
/// rows carry a missing marker in one of the numerical cells.
pub fn raw_csv(shape: &RawShape, n_rows: usize, seed: u64) -> (String, Schema) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let num_names: Vec<String> = (0..shape.numerical).map(|j| format!("num{j:02}")).collect();
    let bin_names: Vec<String> = (0..shape.binary).map(|j| format!("bin{j:02}")).collect();
    let nary_names: Vec<String> = (0..shape.nary_categories.len())
        .map(|j| format!("cat{j}"))
        .collect();

    let mut header: Vec<String> = num_names.clone();
    header.extend(bin_names.iter().cloned());
    if shape.protected {
        header.push("grp".into());
    }
    header.extend(nary_names.iter().cloned());
    header.push("outcome".into());

    let mut csv = header.join(",");
    csv.push('\n');
    for i in 0..n_rows {
        let mut cells: Vec<String> = Vec::with_capacity(header.len());
        let mut first_num = 0.0;
        for j in 0..shape.numerical {
            let v: f64 = rng.sample(StandardNormal);
            if j == 0 {
                first_num = v;
            }
            // A missing marker in one numerical cell of every fourth row.
            if shape.missing && i >= 3 * n_rows / 4 && j == i % shape.numerical.max(1) {
                cells.push(if i % 2 == 0 { "?".into() } else { String::new() });
            } else {
                let mut s = String::new();
                write!(s, "{v:.4}").unwrap();
                cells.push(s);
            }
        }
        for j in 0..shape.binary {
            cells.push(if (i + j) % 2 == 0 { "yes".into() } else { "no".into() });
        }
        if shape.protected {
            cells.push(if i % 2 == 0 { "a".into() } else { "b".into() });
        }
        for (j, &n_cat) in shape.nary_categories.iter().enumerate() {
            cells.push(format!("c{}", (i + j) % n_cat));
        }
        cells.push(if first_num > 0.0 { "pos".into() } else { "neg".into() });
        csv.push_str(&cells.join(","));
        csv.push('\n');
    }

    let num_refs: Vec<&str> = num_names.iter().map(String::as_str).collect();
    let bin_refs: Vec<&str> = bin_names.iter().map(String::as_str).collect();
    let nary_refs: Vec<&str> = nary_names.iter().map(String::as_str).collect();
    let mut b = SchemaBuilder::new()
        .numerical(&num_refs)
        .binary(&bin_refs)
        .nary(&nary_refs)
        .label("outcome");
    if shape.protected {
        b = b.protected("grp");
    }
    (csv, b.build().unwrap())
}

/// A small linearly separable raw CSV: `alpha` decides the label, `beta`
/// and `gamma` are noise, and `grp` is a protected attribute independent
/// of everything else. `2 * n_per_class` rows.
pub fn demo_raw_csv(n_per_class: usize) -> String {
    let mut csv = String::from("alpha,beta,gamma,grp,outcome\n");
    for i in 0..n_per_class {
        let jitter = 0.013 * (i % 7) as f64;
        writeln!(
            csv,
            "{:.4},{:.4},{:.4},{},yes",
            0.7 + 0.02 * i as f64,
            -0.3 + jitter,
            0.1 * ((i % 5) as f64 - 2.0),
            if i % 2 == 0 { "a" } else { "b" }
        )
        .unwrap();
        writeln!(
            csv,
            "{:.4},{:.4},{:.4},{},no",
            -0.7 - 0.02 * i as f64,
            0.25 - jitter,
            0.1 * ((i % 3) as f64 - 1.0),
            if i % 2 == 0 { "b" } else { "a" }
        )
        .unwrap();
    }
    csv
}

/// A run config covering every pipeline stage quickly on [`demo_raw_csv`]
/// data: one weighting round, one replacement budget, the selection
/// baseline, and a protected attribute for the fairness metrics.
pub fn demo_config_toml(csv_path: &Path, seed: u64) -> String {
    format!(
        r#"seed = {seed}
epsilon = 0.01

[dataset]
path = "{}"
name = "demo"
label = "outcome"
protected = "grp"
numerical = ["alpha", "beta", "gamma"]

[split]
test_fraction = 0.25

[train]
learning_rate = 0.1
max_epochs = 60
patience = 10

[smote]
enabled = false

[background]
k = 4

[idw]
enabled = true
iterations = 1

[trv]
enabled = true
k = [2]

[baselines]
l1 = false
l2 = false
l12 = false
selectk = true
"#,
        csv_path.display()
    )
}

/// Writes `text` under `dir` and returns the full path.
pub fn write_file(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}
