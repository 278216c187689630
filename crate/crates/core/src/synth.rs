//! Two-group Gaussian synthetic data with a logistic labeling rule.
//!
//! Group `a` rows are drawn from `N(mean_a, variance·I)` and group `b` rows
//! from `N(mean_b, variance·I)`. The true-label probability is
//! `σ(h·x / ‖h‖)` for the hyperplane normal `h`, optionally shifted by
//! `+delta/2` in group `a` and `-delta/2` in group `b` (clamped to [0, 1]) to
//! break the shared-`p(y|x)` assumption. Observed labels are
//! `s ~ Bernoulli(c_g · y)`.
//!
//! Features, true labels and observed labels come from separate random
//! streams of the same seed.

use std::collections::BTreeMap;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureMatrix, GroupId, LabeledDataset};
use crate::error::{PurpleError, Result};
use crate::model::sigmoid;
use crate::rng::{self, streams};

pub const GROUP_A: &str = "a";
pub const GROUP_B: &str = "b";

/// Share of rows nearest the decision boundary dropped by [`make_separable`].
pub const SEPARABLE_DROP_FRACTION: f64 = 0.4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussSynthConfig {
    pub n_dims: usize,
    pub mean_a: Vec<f64>,
    pub mean_b: Vec<f64>,
    pub variance: f64,
    pub n_a: usize,
    pub n_b: usize,
    pub hyperplane: Vec<f64>,
    /// Labeling frequency per group name.
    pub c: BTreeMap<String, f64>,
    pub separable: bool,
    pub violation_delta: f64,
}

pub fn default_labeling_frequencies() -> BTreeMap<String, f64> {
    BTreeMap::from([(GROUP_A.to_string(), 0.5), (GROUP_B.to_string(), 0.25)])
}

impl Default for GaussSynthConfig {
    fn default() -> Self {
        GaussSynthConfig {
            n_dims: 5,
            mean_a: vec![-1.0; 5],
            mean_b: vec![1.0; 5],
            variance: 16.0,
            n_a: 10_000,
            n_b: 20_000,
            hyperplane: vec![1.0; 5],
            c: default_labeling_frequencies(),
            separable: false,
            violation_delta: 0.0,
        }
    }
}

impl GaussSynthConfig {
    pub fn with_c(mut self, c_a: f64, c_b: f64) -> Self {
        self.c = BTreeMap::from([(GROUP_A.to_string(), c_a), (GROUP_B.to_string(), c_b)]);
        self
    }

    fn validate_shape(&self) -> Result<()> {
        let d = self.n_dims;
        if d == 0 || self.mean_a.len() != d || self.mean_b.len() != d || self.hyperplane.len() != d {
            return Err(PurpleError::InvalidInput(format!(
                "means and hyperplane must all have length n_dims = {d}"
            )));
        }
        if !(self.variance > 0.0) {
            return Err(PurpleError::InvalidInput("variance must be positive".into()));
        }
        if self.hyperplane.iter().all(|&h| h == 0.0) {
            return Err(PurpleError::InvalidInput("hyperplane must be nonzero".into()));
        }
        for g in [GROUP_A, GROUP_B] {
            match self.c.get(g) {
                Some(c) if (0.0..=1.0).contains(c) => {}
                Some(c) => {
                    return Err(PurpleError::InvalidInput(format!(
                        "labeling frequency for `{g}` is {c}, outside [0, 1]"
                    )))
                }
                None => {
                    return Err(PurpleError::InvalidInput(format!(
                        "missing labeling frequency for group `{g}`"
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_shape()?;
        if !(self.violation_delta.abs() < 1.0) {
            return Err(PurpleError::InvalidInput(format!(
                "violation_delta must satisfy |delta| < 1, got {}",
                self.violation_delta
            )));
        }
        Ok(())
    }
}

/// Generates a dataset from `config`; applies [`make_separable`] when
/// `config.separable` is set.
pub fn generate_gauss(config: &GaussSynthConfig, seed: u64) -> Result<LabeledDataset> {
    config.validate()?;
    let data = generate(config, config.violation_delta, seed)?;
    if config.separable {
        make_separable(&data, &config.c, seed)
    } else {
        Ok(data)
    }
}

/// Generates data in which group `a`'s true-label probability is raised by
/// `delta/2` and group `b`'s lowered by `delta/2`, clamped to [0, 1].
pub fn generate_violation(config: &GaussSynthConfig, delta: f64, seed: u64) -> Result<LabeledDataset> {
    config.validate_shape()?;
    if !(delta >= 0.0) {
        return Err(PurpleError::InvalidInput(format!("delta must be non-negative, got {delta}")));
    }
    let data = generate(config, delta, seed)?;
    if config.separable {
        make_separable(&data, &config.c, seed)
    } else {
        Ok(data)
    }
}

fn generate(config: &GaussSynthConfig, delta: f64, seed: u64) -> Result<LabeledDataset> {
    let d = config.n_dims;
    let n = config.n_a + config.n_b;
    let sd = config.variance.sqrt();
    let norm = config.hyperplane.iter().map(|h| h * h).sum::<f64>().sqrt();

    let mut x_rng = rng::stream(seed, streams::FEATURES);
    let mut values = Vec::with_capacity(n * d);
    let mut groups = Vec::with_capacity(n);
    let mut latent = Vec::with_capacity(n);
    for i in 0..n {
        let (g, mean, offset) = if i < config.n_a {
            (GroupId(0), &config.mean_a, delta / 2.0)
        } else {
            (GroupId(1), &config.mean_b, -delta / 2.0)
        };
        let mut proj = 0.0;
        for j in 0..d {
            let z: f64 = StandardNormal.sample(&mut x_rng);
            let v = mean[j] + sd * z;
            proj += config.hyperplane[j] * v;
            values.push(v);
        }
        groups.push(g);
        latent.push((sigmoid(proj / norm) + offset).clamp(0.0, 1.0));
    }

    let mut y_rng = rng::stream(seed, streams::TRUE_LABELS);
    let y: Vec<bool> = latent.iter().map(|&p| y_rng.random::<f64>() < p).collect();
    let c = [config.c[GROUP_A], config.c[GROUP_B]];
    let s = draw_observed(&y, &groups, &c, seed);

    LabeledDataset::new(
        FeatureMatrix::dense(n, d, values)?,
        vec![GROUP_A.to_string(), GROUP_B.to_string()],
        groups,
        s,
        Some(y),
        Some(latent),
    )
}

/// `s_i ~ Bernoulli(c_{g_i} · y_i)`, one uniform draw per row from the
/// observed-label stream of `seed`.
pub(crate) fn draw_observed(y: &[bool], groups: &[GroupId], c: &[f64], seed: u64) -> Vec<bool> {
    let mut s_rng = rng::stream(seed, streams::OBSERVED_LABELS);
    y.iter()
        .zip(groups)
        .map(|(&y, g)| {
            let u: f64 = s_rng.random();
            y && u < c[g.index()]
        })
        .collect()
}

/// Thresholds the true-label probability to {0, 1} and drops the 40% of rows
/// closest to the decision boundary (smallest `|p − 0.5|`, ties by row
/// index). Surviving rows keep their order; `y` becomes the thresholded
/// probability and `s` is redrawn from the observed-label stream of `seed`,
/// using the same per-row draws as the original generation.
pub fn make_separable(
    data: &LabeledDataset,
    c: &BTreeMap<String, f64>,
    seed: u64,
) -> Result<LabeledDataset> {
    let p = data
        .latent_p()
        .ok_or_else(|| PurpleError::InvalidInput("make_separable needs latent_p".into()))?;
    let n = data.len();
    let mut by_margin: Vec<usize> = (0..n).collect();
    by_margin.sort_by(|&i, &j| {
        (p[i] - 0.5)
            .abs()
            .total_cmp(&(p[j] - 0.5).abs())
            .then(i.cmp(&j))
    });
    let n_drop = (n as f64 * SEPARABLE_DROP_FRACTION).round() as usize;
    let mut keep = vec![true; n];
    for &i in &by_margin[..n_drop] {
        keep[i] = false;
    }

    let c_by_id: Vec<f64> = data
        .group_names()
        .iter()
        .map(|g| {
            c.get(g).copied().ok_or_else(|| {
                PurpleError::InvalidInput(format!("missing labeling frequency for group `{g}`"))
            })
        })
        .collect::<Result<_>>()?;
    let hard: Vec<bool> = p.iter().map(|&v| v > 0.5).collect();
    let s_all = draw_observed(&hard, data.groups(), &c_by_id, seed);

    let rows: Vec<usize> = (0..n).filter(|&i| keep[i]).collect();
    let subset = data.select(&rows);
    let (features, names, groups, _, _, _) = subset.into_parts();
    let y: Vec<bool> = rows.iter().map(|&i| hard[i]).collect();
    let latent = y.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect();
    let s = rows.iter().map(|&i| s_all[i]).collect();
    LabeledDataset::new(features, names, groups, s, Some(y), Some(latent))
}

/// Default configuration with group `b`'s mean moved to `v · 1`.
pub fn shift_sweep_config(v: f64) -> GaussSynthConfig {
    let base = GaussSynthConfig::default();
    GaussSynthConfig {
        mean_b: vec![v; base.n_dims],
        ..base
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> GaussSynthConfig {
        GaussSynthConfig {
            n_a: 500,
            n_b: 800,
            ..Default::default()
        }
    }

    #[test]
    fn zero_labeling_frequency_gives_no_positives() {
        let d = generate_gauss(&small().with_c(0.0, 0.0), 3).unwrap();
        assert!(d.s().iter().all(|&s| !s));
    }

    #[test]
    fn full_labeling_reveals_every_positive() {
        let d = generate_gauss(&small().with_c(1.0, 1.0), 3).unwrap();
        assert_eq!(d.s(), d.y().unwrap());
    }

    #[test]
    fn changing_c_does_not_move_features_or_y() {
        let a = generate_gauss(&small().with_c(0.5, 0.25), 9).unwrap();
        let b = generate_gauss(&small().with_c(0.9, 0.1), 9).unwrap();
        assert_eq!(a.features(), b.features());
        assert_eq!(a.y(), b.y());
        assert_eq!(a.latent_p(), b.latent_p());
    }

    #[test]
    fn zero_delta_violation_matches_plain_generation() {
        let cfg = small();
        assert_eq!(generate_violation(&cfg, 0.0, 4).unwrap(), generate_gauss(&cfg, 4).unwrap());
    }

    #[test]
    fn large_delta_saturates() {
        let d = generate_violation(&small(), 2.0, 4).unwrap();
        for (p, g) in d.latent_p().unwrap().iter().zip(d.groups()) {
            assert_eq!(*p, if g.0 == 0 { 1.0 } else { 0.0 });
        }
        assert!(generate_violation(&small(), -0.1, 4).is_err());
    }

    #[test]
    fn separable_drops_forty_percent_and_thresholds() {
        let x = FeatureMatrix::dense(10, 1, (0..10).map(|i| i as f64).collect()).unwrap();
        let latent: Vec<f64> = (0..10).map(|i| 0.02 + 0.1 * i as f64).collect();
        let y = latent.iter().map(|&p| p > 0.5).collect();
        let groups = vec!["a".to_string(); 10];
        let d = LabeledDataset::from_named_groups(x, &groups, vec![false; 10], Some(y), Some(latent))
            .unwrap();
        let c = BTreeMap::from([("a".to_string(), 1.0)]);
        let sep = make_separable(&d, &c, 0).unwrap();
        assert_eq!(sep.len(), 6);
        assert!(sep.latent_p().unwrap().iter().all(|&p| p == 0.0 || p == 1.0));
        // rows 3..=6 (p = 0.32, 0.42, 0.52, 0.62) are nearest to 0.5
        let kept: Vec<f64> = sep.features().rows().map(|r| r.dot(&[1.0])).collect();
        assert_eq!(kept, vec![0.0, 1.0, 2.0, 7.0, 8.0, 9.0]);
        assert_eq!(sep.s(), sep.y().unwrap());
    }

    #[test]
    fn separable_needs_latent_p() {
        let x = FeatureMatrix::dense(1, 1, vec![0.0]).unwrap();
        let d = LabeledDataset::from_named_groups(x, &["a".to_string()], vec![false], None, None).unwrap();
        assert!(make_separable(&d, &default_labeling_frequencies(), 0).is_err());
    }

    #[test]
    fn shift_sweep_endpoints() {
        let same = shift_sweep_config(-1.0);
        assert_eq!(same.mean_a, same.mean_b);
        assert_eq!(shift_sweep_config(1.0), GaussSynthConfig::default());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = small();
        cfg.variance = 0.0;
        assert!(generate_gauss(&cfg, 0).is_err());
        assert!(generate_gauss(&small().with_c(1.5, 0.2), 0).is_err());
        let cfg = GaussSynthConfig {
            violation_delta: 1.0,
            ..small()
        };
        assert!(generate_gauss(&cfg, 0).is_err());
    }
}
