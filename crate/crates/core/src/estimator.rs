//! A common contract for every prevalence estimator, so the benchmark
//! harness can treat PURPLE, the baselines and plug-ins uniformly.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::baselines::{self, EmConfig, LogisticScorer};
use crate::dataset::{GroupId, LabeledDataset};
use crate::error::{PurpleError, Result};
use crate::prevalence::{ratio_of_means, RelativePrevalenceEstimate};
use crate::train::{self, TrainConfig};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Negative,
    Supervised,
    Em,
    Purple,
    /// A registered plug-in, by name.
    External(String),
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorKind::Negative => f.write_str("negative"),
            EstimatorKind::Supervised => f.write_str("supervised"),
            EstimatorKind::Em => f.write_str("em"),
            EstimatorKind::Purple => f.write_str("purple"),
            EstimatorKind::External(name) => write!(f, "external:{name}"),
        }
    }
}

impl FromStr for EstimatorKind {
    type Err = PurpleError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "negative" => Ok(EstimatorKind::Negative),
            "supervised" => Ok(EstimatorKind::Supervised),
            "em" => Ok(EstimatorKind::Em),
            "purple" => Ok(EstimatorKind::Purple),
            other => match other.strip_prefix("external:") {
                Some(name) if !name.is_empty() => Ok(EstimatorKind::External(name.to_string())),
                _ => Err(PurpleError::InvalidInput(format!("unknown method `{other}`"))),
            },
        }
    }
}

/// Estimated prevalence of one group. For PURPLE this is the mean condition
/// score, which is proportional to the prevalence rather than equal to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPrevalenceEstimate {
    pub group: String,
    pub alpha_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorOutput {
    pub estimates: Vec<GroupPrevalenceEstimate>,
    /// False when an iterative fit stopped at its iteration limit.
    pub converged: bool,
    pub notes: Vec<String>,
}

impl EstimatorOutput {
    pub fn alpha(&self, group: &str) -> Result<f64> {
        self.estimates
            .iter()
            .find(|e| e.group == group)
            .map(|e| e.alpha_hat)
            .ok_or_else(|| PurpleError::UnknownGroup(group.to_string()))
    }
}

/// Fits on `train`/`val` and reports a prevalence for every group with rows
/// in `eval`.
pub trait PrevalenceEstimator: Send + Sync {
    fn kind(&self) -> EstimatorKind;

    fn estimate(
        &self,
        train: &LabeledDataset,
        val: &LabeledDataset,
        eval: &LabeledDataset,
        seed: u64,
    ) -> Result<EstimatorOutput>;
}

fn present_groups(data: &LabeledDataset) -> Vec<GroupId> {
    data.group_sizes()
        .iter()
        .enumerate()
        .filter(|(_, &n)| n > 0)
        .map(|(k, _)| GroupId(k as u32))
        .collect()
}

fn subset_by_name(data: &LabeledDataset, name: &str) -> LabeledDataset {
    match data.group_id(name) {
        Ok(g) => data.select_group(g),
        Err(_) => data.select(&[]),
    }
}

/// Joint PURPLE fit over all groups; per-group output is the mean score.
#[derive(Debug, Clone)]
pub struct PurpleEstimator {
    pub config: TrainConfig,
}

impl PrevalenceEstimator for PurpleEstimator {
    fn kind(&self) -> EstimatorKind {
        EstimatorKind::Purple
    }

    fn estimate(
        &self,
        train: &LabeledDataset,
        val: &LabeledDataset,
        eval: &LabeledDataset,
        seed: u64,
    ) -> Result<EstimatorOutput> {
        let fit = train::fit(train, val, &self.config, seed)?;
        if fit.model.degenerate {
            return Err(PurpleError::Degenerate(
                "no observed positives in training data".into(),
            ));
        }
        fit.model.check_compatible(eval)?;
        let scores = fit.model.condition_scores(eval);
        let estimates = present_groups(eval)
            .into_iter()
            .map(|g| {
                let rows = eval.rows_of_group(g);
                let mean = rows.iter().map(|&i| scores[i]).sum::<f64>() / rows.len() as f64;
                GroupPrevalenceEstimate {
                    group: eval.group_name(g).to_string(),
                    alpha_hat: mean,
                }
            })
            .collect();
        let mut notes = fit.warnings.clone();
        notes.push(format!("selected lambda {}", fit.selected_lambda));
        Ok(EstimatorOutput {
            estimates,
            converged: true,
            notes,
        })
    }
}

/// Which per-group baseline to run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Baseline {
    Negative,
    Supervised,
    Em(EmConfig),
}

/// Applies a baseline separately to each group's rows.
#[derive(Debug, Clone)]
pub struct PerGroupEstimator {
    pub baseline: Baseline,
    pub config: TrainConfig,
}

/// One fitted per-group baseline model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupScorer {
    pub group: String,
    pub scorer: LogisticScorer,
    pub c_hat: Option<f64>,
    pub converged: bool,
}

impl PerGroupEstimator {
    /// Fits one scorer per group present in `train`.
    pub fn fit_groups(
        &self,
        train: &LabeledDataset,
        val: &LabeledDataset,
        seed: u64,
    ) -> Result<Vec<GroupScorer>> {
        present_groups(train)
            .into_iter()
            .map(|g| {
                let name = train.group_name(g).to_string();
                let tr = train.select_group(g);
                let va = subset_by_name(val, &name);
                self.fit_one(&tr, &va, seed)
                    .map(|(scorer, c_hat, converged)| GroupScorer {
                        group: name.clone(),
                        scorer,
                        c_hat,
                        converged,
                    })
                    .map_err(|e| PurpleError::GroupFit {
                        group: name.clone(),
                        source: Box::new(e),
                    })
            })
            .collect()
    }

    fn fit_one(
        &self,
        train: &LabeledDataset,
        val: &LabeledDataset,
        seed: u64,
    ) -> Result<(LogisticScorer, Option<f64>, bool)> {
        if val.is_empty() {
            return Err(PurpleError::InsufficientData("no validation rows".into()));
        }
        match self.baseline {
            Baseline::Negative => Ok((baselines::fit_negative(train, val, &self.config, seed)?, None, true)),
            Baseline::Supervised => Ok((baselines::fit_supervised(train, val, &self.config, seed)?, None, true)),
            Baseline::Em(em) => {
                let fit = baselines::fit_em(train, val, &em, &self.config, seed)?;
                Ok((fit.scorer, Some(fit.c_hat), fit.converged))
            }
        }
    }
}

impl PrevalenceEstimator for PerGroupEstimator {
    fn kind(&self) -> EstimatorKind {
        match self.baseline {
            Baseline::Negative => EstimatorKind::Negative,
            Baseline::Supervised => EstimatorKind::Supervised,
            Baseline::Em(_) => EstimatorKind::Em,
        }
    }

    fn estimate(
        &self,
        train: &LabeledDataset,
        val: &LabeledDataset,
        eval: &LabeledDataset,
        seed: u64,
    ) -> Result<EstimatorOutput> {
        let scorers = self.fit_groups(train, val, seed)?;
        let mut estimates = Vec::new();
        let mut notes = Vec::new();
        let mut converged = true;
        for g in present_groups(eval) {
            let name = eval.group_name(g);
            let fitted = scorers
                .iter()
                .find(|s| s.group == name)
                .ok_or_else(|| PurpleError::GroupFit {
                    group: name.to_string(),
                    source: Box::new(PurpleError::InsufficientData("no training rows".into())),
                })?;
            converged &= fitted.converged;
            if let Some(c) = fitted.c_hat {
                notes.push(format!("group {name}: c_hat {c:.6}"));
            }
            estimates.push(GroupPrevalenceEstimate {
                group: name.to_string(),
                alpha_hat: fitted.scorer.mean_prediction(&eval.select_group(g))?,
            });
        }
        Ok(EstimatorOutput {
            estimates,
            converged,
            notes,
        })
    }
}

/// Plug-in estimators addressable as `external:<name>`.
#[derive(Clone, Default)]
pub struct EstimatorRegistry {
    external: BTreeMap<String, Arc<dyn PrevalenceEstimator>>,
}

impl fmt::Debug for EstimatorRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EstimatorRegistry")
            .field("external", &self.external.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl EstimatorRegistry {
    pub fn register(&mut self, name: impl Into<String>, estimator: Arc<dyn PrevalenceEstimator>) {
        self.external.insert(name.into(), estimator);
    }

    /// Builds the estimator for `kind`. `purple_config` drives PURPLE;
    /// `baseline_config` drives the logistic fits of the baselines.
    pub fn resolve(
        &self,
        kind: &EstimatorKind,
        purple_config: &TrainConfig,
        baseline_config: &TrainConfig,
        em: &EmConfig,
    ) -> Result<Arc<dyn PrevalenceEstimator>> {
        let per_group = |baseline| -> Arc<dyn PrevalenceEstimator> {
            Arc::new(PerGroupEstimator {
                baseline,
                config: baseline_config.clone(),
            })
        };
        Ok(match kind {
            EstimatorKind::Purple => Arc::new(PurpleEstimator {
                config: purple_config.clone(),
            }),
            EstimatorKind::Negative => per_group(Baseline::Negative),
            EstimatorKind::Supervised => per_group(Baseline::Supervised),
            EstimatorKind::Em => per_group(Baseline::Em(*em)),
            EstimatorKind::External(name) => self.external.get(name).cloned().ok_or_else(|| {
                PurpleError::InvalidInput(format!("no external estimator registered as `{name}`"))
            })?,
        })
    }
}

/// Outcome of one baseline relative-prevalence estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineEstimate {
    pub estimate: RelativePrevalenceEstimate,
    pub converged: bool,
    pub per_group: Vec<GroupPrevalenceEstimate>,
}

/// Runs `estimator` and divides group `a`'s prevalence by group `b`'s.
pub fn estimator_relative_prevalence(
    estimator: &dyn PrevalenceEstimator,
    train: &LabeledDataset,
    val: &LabeledDataset,
    eval: &LabeledDataset,
    group_a: &str,
    group_b: &str,
    seed: u64,
) -> Result<BaselineEstimate> {
    for d in [train, val, eval] {
        let g = d.group_id(group_a)?;
        let h = d.group_id(group_b)?;
        let sizes = d.group_sizes();
        if sizes[g.index()] == 0 || sizes[h.index()] == 0 {
            return Err(PurpleError::InsufficientData(format!(
                "groups `{group_a}` and `{group_b}` must both have rows in every partition"
            )));
        }
    }
    let out = estimator.estimate(train, val, eval, seed)?;
    let value = ratio_of_means(
        Some(out.alpha(group_a)?),
        Some(out.alpha(group_b)?),
        &format!("{} relative prevalence", estimator.kind()),
    )?;
    Ok(BaselineEstimate {
        estimate: RelativePrevalenceEstimate::from_splits(group_a, group_b, vec![value], None)?,
        converged: out.converged,
        per_group: out.estimates,
    })
}

/// Per-group baseline of the given kind, fitted on each group separately.
pub fn baseline_relative_prevalence(
    kind: &EstimatorKind,
    train: &LabeledDataset,
    val: &LabeledDataset,
    eval: &LabeledDataset,
    group_a: &str,
    group_b: &str,
    seed: u64,
) -> Result<BaselineEstimate> {
    let cfg = TrainConfig::unregularized();
    let est = EstimatorRegistry::default().resolve(kind, &cfg, &cfg, &EmConfig::default())?;
    estimator_relative_prevalence(est.as_ref(), train, val, eval, group_a, group_b, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_round_trip_through_strings() {
        for k in ["negative", "supervised", "em", "purple", "external:km2"] {
            assert_eq!(k.parse::<EstimatorKind>().unwrap().to_string(), k);
        }
        assert!("km2".parse::<EstimatorKind>().is_err());
    }

    #[test]
    fn unregistered_external_is_an_error() {
        let cfg = TrainConfig::unregularized();
        let r = EstimatorRegistry::default().resolve(
            &EstimatorKind::External("km2".into()),
            &cfg,
            &cfg,
            &EmConfig::default(),
        );
        assert!(r.is_err());
    }
}
