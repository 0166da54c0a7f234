//! Evaluation scores: accuracy, group-fairness parities, explanation
//! compactness (XCP), global importance, and glocal similarity (Sim).

use serde::{Deserialize, Serialize};

use crate::data::Group;
use crate::explain::ExplanationMatrix;
use crate::{Error, Result};

/// Confusion-matrix entries of a binary classifier.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    /// Label 1 predicted 1.
    pub true_pos: usize,
    /// Label 0 predicted 0.
    pub true_neg: usize,
    /// Label 0 predicted 1.
    pub false_pos: usize,
    /// Label 1 predicted 0.
    pub false_neg: usize,
}

fn rate(num: usize, denom: usize) -> Option<f64> {
    if denom == 0 {
        None
    } else {
        Some(num as f64 / denom as f64)
    }
}

impl ConfusionCounts {
    /// Tallies predictions against labels.
    pub fn from_preds(preds: &[u8], labels: &[u8]) -> Result<ConfusionCounts> {
        check_binary_pair(preds, labels)?;
        let mut c = ConfusionCounts::default();
        for (&p, &l) in preds.iter().zip(labels) {
            match (p, l) {
                (1, 1) => c.true_pos += 1,
                (0, 0) => c.true_neg += 1,
                (1, 0) => c.false_pos += 1,
                _ => c.false_neg += 1,
            }
        }
        Ok(c)
    }

    /// Number of samples tallied.
    pub fn total(&self) -> usize {
        self.true_pos + self.true_neg + self.false_pos + self.false_neg
    }

    /// Positive predictive rate `TP / (TP + FP)`; `None` when undefined.
    pub fn ppr(&self) -> Option<f64> {
        rate(self.true_pos, self.true_pos + self.false_pos)
    }

    /// Negative predictive rate `TN / (TN + FN)`; `None` when undefined.
    pub fn npr(&self) -> Option<f64> {
        rate(self.true_neg, self.true_neg + self.false_neg)
    }

    /// False positive rate `FP / (FP + TN)`; `None` when undefined.
    pub fn fpr(&self) -> Option<f64> {
        rate(self.false_pos, self.false_pos + self.true_neg)
    }

    /// Equal-opportunity rate (recall) `TP / (TP + FN)`; `None` when
    /// undefined.
    pub fn eo(&self) -> Option<f64> {
        rate(self.true_pos, self.true_pos + self.false_neg)
    }
}

fn check_binary_pair(preds: &[u8], labels: &[u8]) -> Result<()> {
    if preds.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} predictions against {} labels",
            preds.len(),
            labels.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::Data("cannot score an empty prediction set".into()));
    }
    if let Some(v) = preds.iter().chain(labels).find(|&&v| v > 1) {
        return Err(Error::Data(format!("labels must be 0/1, found {v}")));
    }
    Ok(())
}

/// Fraction of predictions matching the labels.
pub fn accuracy(preds: &[u8], labels: &[u8]) -> Result<f64> {
    check_binary_pair(preds, labels)?;
    let hits = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Group-fairness parities between protected groups A and B. Each `*_d`
/// field is the A-group rate minus the B-group rate; a difference is `None`
/// whenever either group's rate has a zero denominator (undefined is
/// surfaced, never silently zero).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    /// Positive-predictive-parity difference.
    pub ppr_d: Option<f64>,
    /// Negative-predictive-parity difference.
    pub npr_d: Option<f64>,
    /// False-positive-rate difference.
    pub fpr_d: Option<f64>,
    /// Equal-opportunity difference.
    pub eo_d: Option<f64>,
    /// Confusion counts restricted to group A.
    pub group_a: ConfusionCounts,
    /// Confusion counts restricted to group B.
    pub group_b: ConfusionCounts,
    /// Number of group-A samples.
    pub size_a: usize,
    /// Number of group-B samples.
    pub size_b: usize,
}

impl FairnessReport {
    /// The four differences with stable metric names, in reporting order.
    pub fn named_metrics(&self) -> [(&'static str, Option<f64>); 4] {
        [
            ("ppr_d", self.ppr_d),
            ("npr_d", self.npr_d),
            ("fpr_d", self.fpr_d),
            ("eo_d", self.eo_d),
        ]
    }
}

fn diff(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    Some(a? - b?)
}

/// Per-group confusion counts and the four parity differences (A minus B).
pub fn fairness(preds: &[u8], labels: &[u8], groups: &[Group]) -> Result<FairnessReport> {
    check_binary_pair(preds, labels)?;
    if groups.len() != preds.len() {
        return Err(Error::Dimension(format!(
            "{} group tags against {} predictions",
            groups.len(),
            preds.len()
        )));
    }
    let pick = |g: Group| -> (Vec<u8>, Vec<u8>) {
        groups
            .iter()
            .zip(preds.iter().zip(labels))
            .filter(|(&tag, _)| tag == g)
            .map(|(_, (&p, &l))| (p, l))
            .unzip()
    };
    let (pa, la) = pick(Group::A);
    let (pb, lb) = pick(Group::B);
    if pa.is_empty() || pb.is_empty() {
        return Err(Error::Data(
            "fairness metrics need both protected groups present".into(),
        ));
    }
    let group_a = ConfusionCounts::from_preds(&pa, &la)?;
    let group_b = ConfusionCounts::from_preds(&pb, &lb)?;
    Ok(FairnessReport {
        ppr_d: diff(group_a.ppr(), group_b.ppr()),
        npr_d: diff(group_a.npr(), group_b.npr()),
        fpr_d: diff(group_a.fpr(), group_b.fpr()),
        eo_d: diff(group_a.eo(), group_b.eo()),
        group_a,
        group_b,
        size_a: pa.len(),
        size_b: pb.len(),
    })
}

/// Explanation compactness: per sample, the fraction of features whose
/// absolute score is strictly below `epsilon` (a score exactly at the
/// threshold counts as involved). Returns the dataset mean and the
/// per-sample values.
pub fn xcp(e: &ExplanationMatrix, epsilon: f64) -> Result<(f64, Vec<f64>)> {
    if e.n() == 0 || e.m() == 0 {
        return Err(Error::Data("empty explanation matrix".into()));
    }
    let m = e.m() as f64;
    let per_sample: Vec<f64> = (0..e.n())
        .map(|i| {
            let low = e.e.row(i).iter().filter(|v| v.abs() < epsilon).count();
            low as f64 / m
        })
        .collect();
    let mean = per_sample.iter().sum::<f64>() / per_sample.len() as f64;
    Ok((mean, per_sample))
}

/// Columnwise mean absolute score: the model's global feature importance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalImportance {
    /// One non-negative importance per feature.
    pub g: Vec<f64>,
}

/// Mean of `|E[i,j]|` over rows, per feature.
pub fn global_importance(e: &ExplanationMatrix) -> Result<GlobalImportance> {
    if e.n() == 0 || e.m() == 0 {
        return Err(Error::Data("empty explanation matrix".into()));
    }
    let n = e.n() as f64;
    let mut g = vec![0.0; e.m()];
    for i in 0..e.n() {
        for (j, v) in e.e.row(i).iter().enumerate() {
            g[j] += v.abs();
        }
    }
    for v in &mut g {
        *v /= n;
    }
    Ok(GlobalImportance { g })
}

/// Glocal similarity: binarize each sample's absolute scores and the global
/// importance at `epsilon` (strictly greater than the threshold counts as
/// relevant), then score one minus the normalized Hamming distance between
/// the two binary vectors. Returns one similarity in `[0, 1]` per sample.
pub fn glocal_sim(
    e: &ExplanationMatrix,
    g: &GlobalImportance,
    epsilon: f64,
) -> Result<Vec<f64>> {
    if e.n() == 0 || e.m() == 0 {
        return Err(Error::Data("empty explanation matrix".into()));
    }
    if g.g.len() != e.m() {
        return Err(Error::Dimension(format!(
            "global importance has {} entries for {} features",
            g.g.len(),
            e.m()
        )));
    }
    let m = e.m() as f64;
    let g_bin: Vec<bool> = g.g.iter().map(|&v| v > epsilon).collect();
    Ok((0..e.n())
        .map(|i| {
            let disagreements = e
                .e
                .row(i)
                .iter()
                .zip(&g_bin)
                .filter(|(v, &gb)| (v.abs() > epsilon) != gb)
                .count();
            1.0 - disagreements as f64 / m
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use proptest::prelude::*;

    fn em(rows: &[Vec<f64>]) -> ExplanationMatrix {
        ExplanationMatrix {
            e: Matrix::from_rows(rows).unwrap(),
            phi0: 0.0,
        }
    }

    #[test]
    fn accuracy_basics() {
        assert_eq!(accuracy(&[1, 0, 1], &[1, 0, 1]).unwrap(), 1.0);
        assert_eq!(accuracy(&[0, 1, 0], &[1, 0, 1]).unwrap(), 0.0);
        assert_eq!(accuracy(&[1, 0, 1, 1], &[1, 0, 1, 0]).unwrap(), 0.75);
        assert!(accuracy(&[], &[]).is_err());
        assert!(accuracy(&[1], &[1, 0]).is_err());
        assert!(accuracy(&[2], &[1]).is_err());
    }

    #[test]
    fn confusion_counts_tally() {
        let c = ConfusionCounts::from_preds(&[1, 0, 1, 0, 1], &[1, 0, 0, 1, 1]).unwrap();
        assert_eq!(
            c,
            ConfusionCounts {
                true_pos: 2,
                true_neg: 1,
                false_pos: 1,
                false_neg: 1
            }
        );
        assert_eq!(c.total(), 5);
    }

    #[test]
    fn fairness_identical_groups_score_zero() {
        // Same (pred, label) pattern in both groups.
        let preds = [1, 0, 1, 0, 1, 0, 1, 0];
        let labels = [1, 0, 0, 1, 1, 0, 0, 1];
        let groups: Vec<Group> = (0..8)
            .map(|i| if i < 4 { Group::A } else { Group::B })
            .collect();
        let r = fairness(&preds, &labels, &groups).unwrap();
        assert_eq!(r.ppr_d, Some(0.0));
        assert_eq!(r.npr_d, Some(0.0));
        assert_eq!(r.fpr_d, Some(0.0));
        assert_eq!(r.eo_d, Some(0.0));
        assert_eq!(r.size_a, 4);
        assert_eq!(r.size_b, 4);
    }

    #[test]
    fn fairness_perfect_classifier_has_zero_fpr_and_eo_gaps() {
        let labels = [1, 0, 1, 0];
        let preds = labels;
        let groups = [Group::A, Group::A, Group::B, Group::B];
        let r = fairness(&preds, &labels, &groups).unwrap();
        assert_eq!(r.fpr_d, Some(0.0));
        assert_eq!(r.eo_d, Some(0.0));
    }

    #[test]
    fn fairness_hand_computed_ppr_gap() {
        // Group A: TP=3, FP=1 -> PPR 0.75. Group B: TP=1, FP=1 -> PPR 0.5.
        let preds = [1, 1, 1, 1, 1, 1];
        let labels = [1, 1, 1, 0, 1, 0];
        let groups = [
            Group::A,
            Group::A,
            Group::A,
            Group::A,
            Group::B,
            Group::B,
        ];
        let r = fairness(&preds, &labels, &groups).unwrap();
        assert_eq!(r.ppr_d, Some(0.25));
        // Nobody was predicted negative: NPR is undefined in both groups.
        assert_eq!(r.npr_d, None);
        assert_eq!(r.group_a.true_pos, 3);
        assert_eq!(r.group_b.false_pos, 1);
    }

    #[test]
    fn fairness_requires_both_groups() {
        let r = fairness(&[1, 0], &[1, 0], &[Group::A, Group::A]);
        assert!(r.is_err());
    }

    #[test]
    fn xcp_examples() {
        let zeros = em(&[vec![0.0; 4], vec![0.0; 4]]);
        assert_eq!(xcp(&zeros, 0.01).unwrap().0, 1.0);
        let dense = em(&[vec![0.5, -0.2, 0.01, 1.0]]);
        assert_eq!(xcp(&dense, 0.01).unwrap().0, 0.0);
        let mut row = vec![0.0; 10];
        row[0] = 0.5;
        row[1] = -0.02;
        row[2] = 0.01; // exactly at threshold: involved, not counted
        let (mean, per) = xcp(&em(&[row]), 0.01).unwrap();
        assert_eq!(mean, 0.7);
        assert_eq!(per, vec![0.7]);
    }

    #[test]
    fn global_importance_examples() {
        let single = em(&[vec![-0.5, 0.25]]);
        assert_eq!(global_importance(&single).unwrap().g, vec![0.5, 0.25]);
        let e = em(&[vec![0.0, 2.0], vec![2.0, 0.0]]);
        assert_eq!(global_importance(&e).unwrap().g, vec![1.0, 1.0]);
        let neg = em(&[vec![0.0, -2.0], vec![-2.0, 0.0]]);
        assert_eq!(
            global_importance(&neg).unwrap().g,
            global_importance(&e).unwrap().g
        );
    }

    #[test]
    fn glocal_sim_examples() {
        // Row 0 agrees with g's support everywhere; row 1 is complementary.
        let e = em(&[vec![0.5, 0.5, 0.0, 0.0], vec![0.0, 0.0, 0.9, 0.9]]);
        let g = GlobalImportance {
            g: vec![0.3, 0.3, 0.0, 0.0],
        };
        let sim = glocal_sim(&e, &g, 0.01).unwrap();
        assert_eq!(sim, vec![1.0, 0.0]);

        // Ten features, two disagreeing positions -> 0.8.
        let mut row = vec![0.0; 10];
        row[0] = 0.5;
        row[1] = 0.5;
        let mut gv = vec![0.0; 10];
        gv[0] = 0.5;
        gv[2] = 0.5;
        let sim = glocal_sim(&em(&[row]), &GlobalImportance { g: gv }, 0.01).unwrap();
        assert_eq!(sim, vec![0.8]);
    }

    #[test]
    fn glocal_sim_boundary_value_is_not_relevant() {
        // |E| exactly epsilon binarizes to 0; g above epsilon binarizes to 1.
        let e = em(&[vec![0.01]]);
        let g = GlobalImportance { g: vec![0.02] };
        assert_eq!(glocal_sim(&e, &g, 0.01).unwrap(), vec![0.0]);
        // Both exactly at epsilon: agreement (both 0).
        let g_eq = GlobalImportance { g: vec![0.01] };
        assert_eq!(glocal_sim(&e, &g_eq, 0.01).unwrap(), vec![1.0]);
    }

    #[test]
    fn glocal_sim_identical_rows_are_perfect() {
        let rows = vec![vec![0.4, 0.0, -0.4, 0.02]; 5];
        let e = em(&rows);
        let g = global_importance(&e).unwrap();
        let sim = glocal_sim(&e, &g, 0.01).unwrap();
        assert!(sim.iter().all(|&s| s == 1.0), "{sim:?}");
    }

    proptest! {
        #[test]
        fn prop_accuracy_complement(
            labels in prop::collection::vec(0u8..=1, 1..40),
            preds in prop::collection::vec(0u8..=1, 40),
        ) {
            let preds = &preds[..labels.len()];
            let flipped: Vec<u8> = preds.iter().map(|p| 1 - p).collect();
            let a = accuracy(preds, &labels).unwrap();
            let b = accuracy(&flipped, &labels).unwrap();
            prop_assert!((a + b - 1.0).abs() < 1e-12);
        }

        #[test]
        fn prop_group_swap_negates_fairness(
            bits in prop::collection::vec(0u8..=1, 8..40),
        ) {
            let n = bits.len();
            // Derive deterministic preds/labels/groups from one bit vector.
            let preds: Vec<u8> = bits.clone();
            let labels: Vec<u8> = bits.iter().enumerate()
                .map(|(i, b)| if i % 3 == 0 { 1 - b } else { *b }).collect();
            let groups: Vec<Group> = (0..n)
                .map(|i| if i % 2 == 0 { Group::A } else { Group::B })
                .collect();
            let swapped: Vec<Group> = groups.iter()
                .map(|g| match g { Group::A => Group::B, Group::B => Group::A })
                .collect();
            let r1 = fairness(&preds, &labels, &groups).unwrap();
            let r2 = fairness(&preds, &labels, &swapped).unwrap();
            for ((_, a), (_, b)) in r1.named_metrics().iter().zip(r2.named_metrics()) {
                match (a, b) {
                    (Some(x), Some(y)) => prop_assert!((x + y).abs() < 1e-12),
                    (None, None) => {}
                    _ => prop_assert!(false, "defined-ness must match"),
                }
            }
        }

        #[test]
        fn prop_xcp_monotone_in_epsilon_and_sign_invariant(
            rows in prop::collection::vec(
                prop::collection::vec(-1.0f64..1.0, 5),
                1..6,
            ),
            eps1 in 0.001f64..0.5,
            eps2 in 0.001f64..0.5,
        ) {
            let e = em(&rows);
            let (lo, hi) = if eps1 <= eps2 { (eps1, eps2) } else { (eps2, eps1) };
            let (x_lo, _) = xcp(&e, lo).unwrap();
            let (x_hi, _) = xcp(&e, hi).unwrap();
            prop_assert!(x_lo <= x_hi);
            let negated: Vec<Vec<f64>> = rows.iter()
                .map(|r| r.iter().map(|v| -v).collect()).collect();
            let (x_neg, _) = xcp(&em(&negated), lo).unwrap();
            prop_assert_eq!(x_lo, x_neg);
        }
    }
}
