//! Grouped positive-unlabeled datasets: storage, file I/O and deterministic
//! group-stratified splitting.

mod io;
mod matrix;

pub use io::{load_dataset, write_dataset, DataFormat};
pub use matrix::{FeatureMatrix, RowView, SparseBuilder};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{PurpleError, Result};
use crate::rng;

/// Dense small-integer group identifier; names live in the dataset's table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupId(pub u32);

impl GroupId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Features, group membership and labels for each row.
///
/// `y` and `latent_p` are ground truth that only generated data carries.
/// Subsets produced by [`LabeledDataset::select`] share the parent's group
/// table, so a group may have zero rows in a subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    features: FeatureMatrix,
    group_names: Vec<String>,
    group: Vec<GroupId>,
    s: Vec<bool>,
    y: Option<Vec<bool>>,
    latent_p: Option<Vec<f64>>,
}

impl LabeledDataset {
    pub fn new(
        features: FeatureMatrix,
        group_names: Vec<String>,
        group: Vec<GroupId>,
        s: Vec<bool>,
        y: Option<Vec<bool>>,
        latent_p: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = features.n_rows();
        if group.len() != n || s.len() != n {
            return Err(PurpleError::InvalidInput(format!(
                "column lengths disagree: {n} feature rows, {} groups, {} labels",
                group.len(),
                s.len()
            )));
        }
        if let Some(y) = &y {
            if y.len() != n {
                return Err(PurpleError::InvalidInput("y length mismatch".into()));
            }
            if let Some(i) = (0..n).find(|&i| s[i] && !y[i]) {
                return Err(PurpleError::InvalidInput(format!(
                    "row {i}: observed positive with negative true label"
                )));
            }
        }
        if let Some(p) = &latent_p {
            if p.len() != n {
                return Err(PurpleError::InvalidInput("latent_p length mismatch".into()));
            }
            if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(PurpleError::InvalidInput("latent_p outside [0, 1]".into()));
            }
        }
        let mut seen = vec![false; group_names.len()];
        for g in &group {
            match seen.get_mut(g.index()) {
                Some(flag) => *flag = true,
                None => {
                    return Err(PurpleError::InvalidInput(format!(
                        "group id {} has no name",
                        g.0
                    )))
                }
            }
        }
        if let Some(k) = seen.iter().position(|f| !f) {
            return Err(PurpleError::InvalidInput(format!(
                "group `{}` has no rows",
                group_names[k]
            )));
        }
        Ok(LabeledDataset {
            features,
            group_names,
            group,
            s,
            y,
            latent_p,
        })
    }

    /// Builds a dataset from string group labels, assigning ids in order of
    /// first appearance.
    pub fn from_named_groups(
        features: FeatureMatrix,
        groups: &[String],
        s: Vec<bool>,
        y: Option<Vec<bool>>,
        latent_p: Option<Vec<f64>>,
    ) -> Result<Self> {
        let mut names: Vec<String> = Vec::new();
        let ids = groups
            .iter()
            .map(|g| match names.iter().position(|n| n == g) {
                Some(k) => GroupId(k as u32),
                None => {
                    names.push(g.clone());
                    GroupId((names.len() - 1) as u32)
                }
            })
            .collect();
        Self::new(features, names, ids, s, y, latent_p)
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn n_dims(&self) -> usize {
        self.features.n_dims()
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.features
    }

    pub fn group_names(&self) -> &[String] {
        &self.group_names
    }

    pub fn n_groups(&self) -> usize {
        self.group_names.len()
    }

    pub fn groups(&self) -> &[GroupId] {
        &self.group
    }

    pub fn s(&self) -> &[bool] {
        &self.s
    }

    pub fn y(&self) -> Option<&[bool]> {
        self.y.as_deref()
    }

    pub fn latent_p(&self) -> Option<&[f64]> {
        self.latent_p.as_deref()
    }

    pub fn group_name(&self, g: GroupId) -> &str {
        &self.group_names[g.index()]
    }

    pub fn group_id(&self, name: &str) -> Result<GroupId> {
        self.group_names
            .iter()
            .position(|n| n == name)
            .map(|k| GroupId(k as u32))
            .ok_or_else(|| PurpleError::UnknownGroup(name.to_string()))
    }

    pub fn rows_of_group(&self, g: GroupId) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.group[i] == g).collect()
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_groups()];
        for g in &self.group {
            counts[g.index()] += 1;
        }
        counts
    }

    /// Rows at the given indices, in that order, sharing this group table.
    pub fn select(&self, rows: &[usize]) -> LabeledDataset {
        LabeledDataset {
            features: self.features.select_rows(rows),
            group_names: self.group_names.clone(),
            group: rows.iter().map(|&i| self.group[i]).collect(),
            s: rows.iter().map(|&i| self.s[i]).collect(),
            y: self.y.as_ref().map(|y| rows.iter().map(|&i| y[i]).collect()),
            latent_p: self
                .latent_p
                .as_ref()
                .map(|p| rows.iter().map(|&i| p[i]).collect()),
        }
    }

    pub fn select_group(&self, g: GroupId) -> LabeledDataset {
        self.select(&self.rows_of_group(g))
    }

    /// Replaces the feature matrix, keeping every label column.
    pub fn with_features(&self, features: FeatureMatrix) -> Result<LabeledDataset> {
        if features.n_rows() != self.len() {
            return Err(PurpleError::InvalidInput("row count mismatch".into()));
        }
        Ok(LabeledDataset {
            features,
            ..self.clone()
        })
    }

    /// Same rows with the observed label replaced.
    pub fn with_observed(&self, s: Vec<bool>) -> Result<LabeledDataset> {
        Self::new(
            self.features.clone(),
            self.group_names.clone(),
            self.group.clone(),
            s,
            self.y.clone(),
            self.latent_p.clone(),
        )
    }

    pub(crate) fn into_parts(
        self,
    ) -> (
        FeatureMatrix,
        Vec<String>,
        Vec<GroupId>,
        Vec<bool>,
        Option<Vec<bool>>,
        Option<Vec<f64>>,
    ) {
        (
            self.features,
            self.group_names,
            self.group,
            self.s,
            self.y,
            self.latent_p,
        )
    }
}

/// Train/validation/test fractions plus the seed that drives shuffling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub fractions: (f64, f64, f64),
    pub seed: u64,
    pub n_repeats: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            fractions: (0.6, 0.2, 0.2),
            seed: 0,
            n_repeats: 5,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let (a, b, c) = self.fractions;
        if [a, b, c].iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
            return Err(PurpleError::InvalidInput(format!(
                "split fractions must lie in (0, 1): {:?}",
                self.fractions
            )));
        }
        if ((a + b + c) - 1.0).abs() > 1e-9 {
            return Err(PurpleError::InvalidInput(format!(
                "split fractions must sum to 1: {:?}",
                self.fractions
            )));
        }
        Ok(())
    }
}

/// Row indices of a train/validation/test partition, each ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Partition sizes for a group of `n` rows. Validation and test get the
/// floor of their share (at least one row each); train takes the rest.
fn stratum_sizes(n: usize, fractions: (f64, f64, f64)) -> (usize, usize, usize) {
    let val = ((n as f64 * fractions.1).floor() as usize).max(1);
    let test = ((n as f64 * fractions.2).floor() as usize).max(1);
    (n - val - test, val, test)
}

pub fn split_indices(data: &LabeledDataset, spec: &SplitSpec, repeat_index: usize) -> Result<SplitIndices> {
    spec.validate()?;
    if repeat_index >= spec.n_repeats {
        return Err(PurpleError::InvalidInput(format!(
            "repeat index {repeat_index} >= n_repeats {}",
            spec.n_repeats
        )));
    }
    let mut rng = rng::stream(
        rng::derive_seed(spec.seed, &[repeat_index as u64]),
        rng::streams::SPLIT,
    );
    let mut out = SplitIndices {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for k in 0..data.n_groups() {
        let mut rows = data.rows_of_group(GroupId(k as u32));
        if rows.is_empty() {
            continue;
        }
        if rows.len() < 3 {
            return Err(PurpleError::InsufficientData(format!(
                "group `{}` has {} rows; stratified split needs at least 3",
                data.group_names[k],
                rows.len()
            )));
        }
        rows.shuffle(&mut rng);
        let (n_train, n_val, _) = stratum_sizes(rows.len(), spec.fractions);
        out.train.extend_from_slice(&rows[..n_train]);
        out.val.extend_from_slice(&rows[n_train..n_train + n_val]);
        out.test.extend_from_slice(&rows[n_train + n_val..]);
    }
    out.train.sort_unstable();
    out.val.sort_unstable();
    out.test.sort_unstable();
    Ok(out)
}

/// Group-stratified train/validation/test split. The shuffle depends only on
/// `(spec.seed, repeat_index)`.
pub fn split(
    data: &LabeledDataset,
    spec: &SplitSpec,
    repeat_index: usize,
) -> Result<(LabeledDataset, LabeledDataset, LabeledDataset)> {
    let idx = split_indices(data, spec, repeat_index)?;
    Ok((data.select(&idx.train), data.select(&idx.val), data.select(&idx.test)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group: String,
    pub n: usize,
    pub positives: usize,
    pub observed_rate: f64,
}

/// Row count, observed-positive count and observed rate for every group that
/// has at least one row, in group-id order.
pub fn group_summary(data: &LabeledDataset) -> Vec<GroupSummary> {
    let mut n = vec![0usize; data.n_groups()];
    let mut pos = vec![0usize; data.n_groups()];
    for (g, &s) in data.group.iter().zip(&data.s) {
        n[g.index()] += 1;
        pos[g.index()] += s as usize;
    }
    (0..data.n_groups())
        .filter(|&k| n[k] > 0)
        .map(|k| GroupSummary {
            group: data.group_names[k].clone(),
            n: n[k],
            positives: pos[k],
            observed_rate: pos[k] as f64 / n[k] as f64,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(groups: &[&str], s: &[u8]) -> LabeledDataset {
        let n = groups.len();
        let x = FeatureMatrix::dense(n, 1, (0..n).map(|i| i as f64).collect()).unwrap();
        LabeledDataset::from_named_groups(
            x,
            &groups.iter().map(|g| g.to_string()).collect::<Vec<_>>(),
            s.iter().map(|&v| v == 1).collect(),
            None,
            None,
        )
        .unwrap()
    }

    #[test]
    fn summary_counts_observed_positives() {
        let d = toy(&["a", "a", "a", "a"], &[1, 0, 0, 1]);
        let s = group_summary(&d);
        assert_eq!(s.len(), 1);
        assert_eq!((s[0].n, s[0].positives, s[0].observed_rate), (4, 2, 0.5));
    }

    #[test]
    fn summary_of_empty_dataset_is_empty() {
        let d = toy(&["a"], &[0]).select(&[]);
        assert!(group_summary(&d).is_empty());
    }

    #[test]
    fn ten_rows_split_six_two_two() {
        let d = toy(&["a"; 10], &[0; 10]);
        let (tr, va, te) = split(&d, &SplitSpec::default(), 0).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (6, 2, 2));
    }

    #[test]
    fn split_is_deterministic_and_a_partition() {
        let groups: Vec<&str> = (0..100).map(|i| if i % 3 == 0 { "a" } else { "b" }).collect();
        let d = toy(&groups, &[0; 100]);
        let spec = SplitSpec { seed: 11, ..Default::default() };
        let first = split_indices(&d, &spec, 0).unwrap();
        assert_eq!(first, split_indices(&d, &spec, 0).unwrap());
        let mut all: Vec<usize> = first
            .train
            .iter()
            .chain(&first.val)
            .chain(&first.test)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        let second = split_indices(&d, &spec, 1).unwrap();
        assert_ne!(first.test, second.test);
    }

    #[test]
    fn split_rejects_tiny_groups_and_bad_repeat() {
        let d = toy(&["a", "a", "a", "b", "b"], &[0; 5]);
        assert!(matches!(
            split(&d, &SplitSpec::default(), 0),
            Err(PurpleError::InsufficientData(_))
        ));
        let d = toy(&["a"; 5], &[0; 5]);
        assert!(split(&d, &SplitSpec::default(), 5).is_err());
    }

    #[test]
    fn no_false_positive_invariant_is_enforced() {
        let x = FeatureMatrix::dense(1, 1, vec![0.0]).unwrap();
        let r = LabeledDataset::from_named_groups(
            x,
            &["a".to_string()],
            vec![true],
            Some(vec![false]),
            None,
        );
        assert!(r.is_err());
    }
}
