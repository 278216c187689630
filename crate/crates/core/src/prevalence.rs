//! Relative prevalence from group means of the condition score.
//!
//! If the score is proportional to `p(y=1|x)` and `p(y=1|x)` is shared across
//! groups, the ratio of group means of the score equals the ratio of group
//! prevalences: the unknown proportionality constant cancels.

use serde::{Deserialize, Serialize};

use crate::dataset::{GroupId, LabeledDataset};
use crate::error::{PurpleError, Result};
use crate::model::PurpleModel;

/// Denominator means below this are treated as zero.
pub const MIN_DENOMINATOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativePrevalenceEstimate {
    pub group_a: String,
    pub group_b: String,
    pub value: f64,
    pub per_split_values: Vec<f64>,
    pub true_value: Option<f64>,
    pub ratio_to_true: Option<f64>,
}

impl RelativePrevalenceEstimate {
    /// Estimate whose value is the mean of `per_split_values`.
    pub fn from_splits(
        group_a: impl Into<String>,
        group_b: impl Into<String>,
        per_split_values: Vec<f64>,
        true_value: Option<f64>,
    ) -> Result<Self> {
        if per_split_values.is_empty() {
            return Err(PurpleError::InsufficientData("no per-split estimates".into()));
        }
        let value = per_split_values.iter().sum::<f64>() / per_split_values.len() as f64;
        Ok(RelativePrevalenceEstimate {
            group_a: group_a.into(),
            group_b: group_b.into(),
            value,
            per_split_values,
            true_value,
            ratio_to_true: true_value.map(|t| value / t),
        })
    }
}

/// Mean of `scores` over rows where `pick(group)` holds; `None` if no row does.
pub fn mean_where(scores: &[f64], groups: &[GroupId], pick: impl Fn(GroupId) -> bool) -> Option<f64> {
    let (sum, n) = scores
        .iter()
        .zip(groups)
        .filter(|(_, &g)| pick(g))
        .fold((0.0, 0usize), |(s, n), (&v, _)| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Ratio of mean scores, numerator over denominator, with the error
/// conditions shared by every ratio estimator.
pub fn ratio_of_means(numerator: Option<f64>, denominator: Option<f64>, what: &str) -> Result<f64> {
    let num = numerator.ok_or_else(|| PurpleError::InsufficientData(format!("{what}: numerator group has no rows")))?;
    let den = denominator
        .ok_or_else(|| PurpleError::InsufficientData(format!("{what}: denominator group has no rows")))?;
    if den < MIN_DENOMINATOR {
        return Err(PurpleError::Degenerate(format!(
            "{what}: denominator mean {den:e} is below {MIN_DENOMINATOR:e}"
        )));
    }
    Ok(num / den)
}

/// Relative prevalence of `group_a` versus `group_b` from per-row scores.
pub fn relative_prevalence_from_scores(
    scores: &[f64],
    data: &LabeledDataset,
    group_a: GroupId,
    group_b: GroupId,
) -> Result<f64> {
    let g = data.groups();
    ratio_of_means(
        mean_where(scores, g, |x| x == group_a),
        mean_where(scores, g, |x| x == group_b),
        "relative prevalence",
    )
}

fn usable(model: &PurpleModel, data: &LabeledDataset) -> Result<Vec<f64>> {
    if model.degenerate {
        return Err(PurpleError::Degenerate(
            "model was fitted without observed positives".into(),
        ));
    }
    model.check_compatible(data)?;
    Ok(model.condition_scores(data))
}

/// Mean condition score over `group_a` rows divided by the mean over
/// `group_b` rows.
pub fn relative_prevalence(
    model: &PurpleModel,
    data: &LabeledDataset,
    group_a: &str,
    group_b: &str,
) -> Result<f64> {
    let a = data.group_id(group_a)?;
    let b = data.group_id(group_b)?;
    let scores = usable(model, data)?;
    relative_prevalence_from_scores(&scores, data, a, b)
}

/// Mean condition score in `group` divided by the mean over every row
/// outside it.
pub fn relative_prevalence_vs_complement(
    model: &PurpleModel,
    data: &LabeledDataset,
    group: &str,
) -> Result<f64> {
    let a = data.group_id(group)?;
    let scores = usable(model, data)?;
    let g = data.groups();
    ratio_of_means(
        mean_where(&scores, g, |x| x == a),
        mean_where(&scores, g, |x| x != a),
        "relative prevalence vs complement",
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::FeatureMatrix;
    use proptest::prelude::*;

    fn dataset(groups: &[&str], xs: &[f64]) -> LabeledDataset {
        let x = FeatureMatrix::dense(xs.len(), 1, xs.to_vec()).unwrap();
        let g: Vec<String> = groups.iter().map(|s| s.to_string()).collect();
        LabeledDataset::from_named_groups(x, &g, vec![false; xs.len()], None, None).unwrap()
    }

    #[test]
    fn constant_scorer_gives_one() {
        let d = dataset(&["a", "b", "b"], &[1.0, -3.0, 2.0]);
        let mut m = PurpleModel::zeros(1, vec!["a".into(), "b".into()]);
        m.b = (0.3f64 / 0.7).ln();
        assert!((relative_prevalence(&m, &d, "a", "b").unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mean_ratio_arithmetic() {
        let d = dataset(&["a", "a", "b", "b", "b"], &[0.0; 5]);
        let scores = [0.2, 0.4, 0.1, 0.1, 0.1];
        let a = d.group_id("a").unwrap();
        let b = d.group_id("b").unwrap();
        let rp = relative_prevalence_from_scores(&scores, &d, a, b).unwrap();
        assert!((rp - 3.0).abs() < 1e-12);
    }

    #[test]
    fn complement_errors_and_equivalence() {
        let d = dataset(&["a", "a"], &[0.5, 1.0]);
        let m = PurpleModel::zeros(1, vec!["a".into()]);
        assert!(relative_prevalence_vs_complement(&m, &d, "a").is_err());

        let d = dataset(&["a", "b", "a", "b"], &[0.5, 1.0, -2.0, 0.1]);
        let mut m = PurpleModel::zeros(1, vec!["a".into(), "b".into()]);
        m.w[0] = 0.8;
        let pair = relative_prevalence(&m, &d, "a", "b").unwrap();
        let comp = relative_prevalence_vs_complement(&m, &d, "a").unwrap();
        assert!((pair - comp).abs() < 1e-15);
    }

    #[test]
    fn degenerate_models_and_tiny_denominators_error() {
        let d = dataset(&["a", "b"], &[0.0, 0.0]);
        let mut m = PurpleModel::zeros(1, vec!["a".into(), "b".into()]);
        m.degenerate = true;
        assert!(matches!(
            relative_prevalence(&m, &d, "a", "b"),
            Err(PurpleError::Degenerate(_))
        ));
        let a = d.group_id("a").unwrap();
        let b = d.group_id("b").unwrap();
        assert!(relative_prevalence_from_scores(&[0.5, 1e-13], &d, a, b).is_err());
        assert!(relative_prevalence(&PurpleModel::zeros(1, vec!["a".into(), "b".into()]), &d, "a", "c").is_err());
    }

    #[test]
    fn estimate_value_is_mean_of_splits() {
        let e = RelativePrevalenceEstimate::from_splits("a", "b", vec![1.0, 2.0, 3.0], Some(4.0)).unwrap();
        assert_eq!(e.value, 2.0);
        assert_eq!(e.ratio_to_true, Some(0.5));
    }

    proptest! {
        #[test]
        fn scale_invariance_and_reciprocity(
            scores in prop::collection::vec(0.01f64..1.0, 4..40),
            k in 0.01f64..100.0,
        ) {
            let n = scores.len();
            let groups: Vec<&str> = (0..n).map(|i| if i % 2 == 0 { "a" } else { "b" }).collect();
            let d = dataset(&groups, &vec![0.0; n]);
            let a = d.group_id("a").unwrap();
            let b = d.group_id("b").unwrap();
            let rp = relative_prevalence_from_scores(&scores, &d, a, b).unwrap();
            let scaled: Vec<f64> = scores.iter().map(|s| s * k).collect();
            let rp_k = relative_prevalence_from_scores(&scaled, &d, a, b).unwrap();
            prop_assert!((rp - rp_k).abs() <= 1e-12 * rp);
            let back = relative_prevalence_from_scores(&scores, &d, b, a).unwrap();
            prop_assert!((rp * back - 1.0).abs() < 1e-12);
        }
    }
}
