//! Preprocessing of raw datasets: drop rows with missing values, encode
//! categoricals with {-1,1} one-hot columns, z-score numerical columns, and
//! map the label (and optional protected attribute) to canonical values.
//!
//! Statistics are fitted on the training split and reused, via
//! [`FitStats`], to transform the test split so that no test information
//! leaks into normalization or category vocabularies.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use super::raw::{ColumnKind, RawCell, RawDataset};
use super::{Dataset, FeatureOrigin, Group};
use crate::linalg::Matrix;
use crate::util;
use crate::{Error, Result};

/// Fitted statistics of a single raw column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnStats {
    /// Mean and population standard deviation of a numerical column.
    Numerical { mean: f64, std: f64 },
    /// The two category spellings of a binary column, sorted; the first
    /// maps to -1, the second to +1.
    Binary { categories: Vec<String> },
    /// Sorted category vocabulary of an n-ary column; each category becomes
    /// one output column.
    NAry { categories: Vec<String> },
    /// The two label spellings, sorted; the first maps to 0, the second to 1.
    Label { categories: Vec<String> },
    /// The two protected-group spellings, sorted; the first maps to group A
    /// (feature value -1), the second to group B (feature value +1).
    Protected { categories: Vec<String> },
}

/// Per-column statistics fitted on a training split, in raw column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitStats {
    pub columns: Vec<(String, ColumnStats)>,
}

fn sorted_categories(raw: &RawDataset, keep: &[usize], col: usize) -> Vec<String> {
    let mut set = BTreeSet::new();
    for &i in keep {
        if let RawCell::Text(t) = &raw.row(i)[col] {
            set.insert(t.clone());
        }
    }
    set.into_iter().collect()
}

fn fit_stats(raw: &RawDataset, keep: &[usize]) -> Result<FitStats> {
    let mut columns = Vec::with_capacity(raw.columns().len());
    for (col, (name, kind)) in raw.columns().iter().enumerate() {
        let stats = match kind {
            ColumnKind::Numerical => {
                let values: Vec<f64> = keep
                    .iter()
                    .map(|&i| match &raw.row(i)[col] {
                        RawCell::Number(v) => *v,
                        _ => unreachable!("kept rows have no missing cells"),
                    })
                    .collect();
                let mean = util::mean(&values);
                let std = util::population_std(&values);
                if std == 0.0 {
                    return Err(Error::Data(format!(
                        "zero-variance numerical column `{name}`"
                    )));
                }
                ColumnStats::Numerical { mean, std }
            }
            ColumnKind::Binary | ColumnKind::Label | ColumnKind::Protected => {
                let cats = sorted_categories(raw, keep, col);
                if cats.len() != 2 {
                    return Err(Error::Data(format!(
                        "column `{name}` has {} distinct values, expected exactly 2",
                        cats.len()
                    )));
                }
                match kind {
                    ColumnKind::Binary => ColumnStats::Binary { categories: cats },
                    ColumnKind::Label => ColumnStats::Label { categories: cats },
                    _ => ColumnStats::Protected { categories: cats },
                }
            }
            ColumnKind::NAry => {
                let cats = sorted_categories(raw, keep, col);
                if cats.len() < 2 {
                    return Err(Error::Data(format!(
                        "n-ary column `{name}` has {} distinct values, expected at least 2",
                        cats.len()
                    )));
                }
                ColumnStats::NAry { categories: cats }
            }
        };
        columns.push((name.clone(), stats));
    }
    Ok(FitStats { columns })
}

fn category_position(cats: &[String], value: &str, column: &str) -> Result<usize> {
    cats.iter().position(|c| c == value).ok_or_else(|| {
        Error::Data(format!(
            "unseen category `{value}` in column `{column}` at transform time"
        ))
    })
}

/// Applies the full preprocessing pipeline to a raw dataset.
///
/// Rows containing any missing cell are removed. Numerical columns are
/// z-scored ((v - mean) / population std). Binary columns become one {-1,1}
/// column; n-ary columns become N columns with 1 for the active category and
/// -1 elsewhere; a protected column is encoded like a binary feature and
/// additionally recorded as the per-row group id. The label is mapped to
/// {0,1} by sorted category order.
///
/// With `fit = None`, statistics (means, stds, category vocabularies) are
/// fitted on the surviving rows — the training path. With `fit = Some(..)`
/// — the test path — the given statistics are used verbatim, and categories
/// absent from the fitted vocabularies are an error.
pub fn preprocess(raw: &RawDataset, fit: Option<&FitStats>) -> Result<Dataset> {
    let keep = raw.complete_row_indices();
    if keep.is_empty() {
        return Err(Error::Data(format!(
            "all {} rows of `{}` contain missing values",
            raw.n_rows(),
            raw.name
        )));
    }

    let owned;
    let stats = match fit {
        Some(s) => {
            let declared: Vec<&String> = s.columns.iter().map(|(n, _)| n).collect();
            let actual: Vec<&String> = raw.columns().iter().map(|(n, _)| n).collect();
            if declared != actual {
                return Err(Error::Schema(format!(
                    "fitted statistics cover columns {declared:?}, dataset has {actual:?}"
                )));
            }
            s
        }
        None => {
            owned = fit_stats(raw, &keep)?;
            &owned
        }
    };

    // Output feature layout, in raw column order with n-ary expansion.
    let mut feature_names = Vec::new();
    let mut feature_origin = Vec::new();
    for (name, col_stats) in &stats.columns {
        match col_stats {
            ColumnStats::Numerical { .. } => {
                feature_names.push(name.clone());
                feature_origin.push(FeatureOrigin::Numerical);
            }
            ColumnStats::Binary { .. } | ColumnStats::Protected { .. } => {
                feature_names.push(name.clone());
                feature_origin.push(FeatureOrigin::OneHot);
            }
            ColumnStats::NAry { categories } => {
                for c in categories {
                    feature_names.push(format!("{name}={c}"));
                    feature_origin.push(FeatureOrigin::OneHot);
                }
            }
            ColumnStats::Label { .. } => {}
        }
    }
    let m = feature_names.len();
    if m == 0 {
        return Err(Error::Data(format!("dataset `{}` has no features", raw.name)));
    }

    let has_protected = stats
        .columns
        .iter()
        .any(|(_, s)| matches!(s, ColumnStats::Protected { .. }));
    let mut x = Matrix::zeros(keep.len(), m);
    let mut y = Vec::with_capacity(keep.len());
    let mut protected: Vec<Group> = Vec::new();

    for (out_row, &i) in keep.iter().enumerate() {
        let row = raw.row(i);
        let mut out_col = 0usize;
        for (col, (name, col_stats)) in stats.columns.iter().enumerate() {
            match (col_stats, &row[col]) {
                (ColumnStats::Numerical { mean, std }, RawCell::Number(v)) => {
                    x.set(out_row, out_col, (*v - *mean) / *std);
                    out_col += 1;
                }
                (ColumnStats::Binary { categories }, RawCell::Text(t)) => {
                    let pos = category_position(categories, t, name)?;
                    x.set(out_row, out_col, if pos == 0 { -1.0 } else { 1.0 });
                    out_col += 1;
                }
                (ColumnStats::Protected { categories }, RawCell::Text(t)) => {
                    let pos = category_position(categories, t, name)?;
                    x.set(out_row, out_col, if pos == 0 { -1.0 } else { 1.0 });
                    protected.push(if pos == 0 { Group::A } else { Group::B });
                    out_col += 1;
                }
                (ColumnStats::NAry { categories }, RawCell::Text(t)) => {
                    let pos = category_position(categories, t, name)?;
                    for (c, _) in categories.iter().enumerate() {
                        x.set(out_row, out_col + c, if c == pos { 1.0 } else { -1.0 });
                    }
                    out_col += categories.len();
                }
                (ColumnStats::Label { categories }, RawCell::Text(t)) => {
                    let pos = category_position(categories, t, name)?;
                    y.push(pos as u8);
                }
                (_, cell) => {
                    return Err(Error::Data(format!(
                        "column `{name}` has incompatible cell {cell:?}"
                    )))
                }
            }
        }
    }

    let ds = Dataset {
        name: raw.name.clone(),
        x,
        y,
        feature_names,
        feature_origin,
        protected: if has_protected { Some(protected) } else { None },
        norm_stats: Some(stats.clone()),
    };
    ds.validate()?;
    Ok(ds)
}
