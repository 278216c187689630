//! Diagnostics for the shared-`p(y|x)` assumption: per-group calibration of
//! the fitted diagnosis probability, and a comparison of the constrained fit
//! against one unconstrained logistic scorer per group.

use serde::{Deserialize, Serialize};

use crate::baselines::{self, LogisticScorer};
use crate::dataset::{GroupId, LabeledDataset};
use crate::error::{PurpleError, Result};
use crate::metrics::{self, CalibrationBin};
use crate::model::PurpleModel;
use crate::train::{self, TrainConfig};

/// Smallest training group an unconstrained scorer is fitted on.
pub const MIN_GROUP_ROWS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCalibration {
    pub group: String,
    pub count: usize,
    pub bins: Vec<CalibrationBin>,
    pub ece: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub n_bins: usize,
    pub groups: Vec<GroupCalibration>,
}

impl CalibrationReport {
    pub fn max_ece(&self) -> f64 {
        self.groups.iter().map(|g| g.ece).fold(0.0, f64::max)
    }
}

/// Calibration of `p(s=1|x,g)` against `s`, separately for every group with
/// rows in `data`.
pub fn calibration_report(model: &PurpleModel, data: &LabeledDataset, n_bins: usize) -> Result<CalibrationReport> {
    let probs = model.diagnosis_probabilities(data)?;
    let mut groups = Vec::new();
    for (k, &n) in data.group_sizes().iter().enumerate() {
        if n == 0 {
            continue;
        }
        let g = GroupId(k as u32);
        let rows = data.rows_of_group(g);
        let p: Vec<f64> = rows.iter().map(|&i| probs[i]).collect();
        let s: Vec<bool> = rows.iter().map(|&i| data.s()[i]).collect();
        let curve = metrics::calibration(&p, &s, n_bins)?;
        groups.push(GroupCalibration {
            group: data.group_name(g).to_string(),
            count: n,
            bins: curve.bins,
            ece: curve.ece,
        });
    }
    Ok(CalibrationReport { n_bins, groups })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelFitComparison {
    pub constrained_auc: f64,
    pub unconstrained_auc: f64,
    pub constrained_auprc: f64,
    pub unconstrained_auprc: f64,
    /// Unconstrained minus constrained.
    pub delta_auc: f64,
    pub delta_auprc: f64,
}

/// Fits one logistic scorer on `s` per training group.
pub fn fit_unconstrained(
    train: &LabeledDataset,
    val: &LabeledDataset,
    config: &TrainConfig,
    seed: u64,
) -> Result<Vec<(String, LogisticScorer)>> {
    let sizes = train.group_sizes();
    if sizes.iter().filter(|&&n| n > 0).count() < 2 {
        return Err(PurpleError::InsufficientData(
            "model-fit comparison needs at least two groups".into(),
        ));
    }
    let mut out = Vec::new();
    for (k, &n) in sizes.iter().enumerate() {
        if n == 0 {
            continue;
        }
        let g = GroupId(k as u32);
        let name = train.group_name(g).to_string();
        let wrap = |e| PurpleError::GroupFit {
            group: name.clone(),
            source: Box::new(e),
        };
        if n < MIN_GROUP_ROWS {
            return Err(wrap(PurpleError::InsufficientData(format!(
                "{n} training rows, need at least {MIN_GROUP_ROWS}"
            ))));
        }
        let va = match val.group_id(&name) {
            Ok(h) if val.group_sizes()[h.index()] > 0 => val.select_group(h),
            _ => return Err(wrap(PurpleError::InsufficientData("no validation rows".into()))),
        };
        let scorer = baselines::fit_negative(&train.select_group(g), &va, config, seed).map_err(wrap)?;
        out.push((name, scorer));
    }
    Ok(out)
}

/// Scores `test` with a fitted constrained model and per-group scorers,
/// pooling every group for AUC and AUPRC against `s`.
pub fn compare_on(
    model: &PurpleModel,
    unconstrained: &[(String, LogisticScorer)],
    test: &LabeledDataset,
) -> Result<ModelFitComparison> {
    let constrained = model.diagnosis_probabilities(test)?;
    let scorers: Vec<&LogisticScorer> = test
        .group_names()
        .iter()
        .map(|g| {
            unconstrained
                .iter()
                .find(|(name, _)| name == g)
                .map(|(_, s)| s)
                .ok_or_else(|| PurpleError::UnknownGroup(g.clone()))
        })
        .collect::<Result<_>>()?;
    let free: Vec<f64> = test
        .features()
        .rows()
        .zip(test.groups())
        .map(|(x, g)| scorers[g.index()].predict(x))
        .collect();
    let s = test.s();
    let constrained_auc = metrics::auc(&constrained, s)?;
    let unconstrained_auc = metrics::auc(&free, s)?;
    let constrained_auprc = metrics::auprc(&constrained, s)?;
    let unconstrained_auprc = metrics::auprc(&free, s)?;
    Ok(ModelFitComparison {
        constrained_auc,
        unconstrained_auc,
        constrained_auprc,
        unconstrained_auprc,
        delta_auc: unconstrained_auc - constrained_auc,
        delta_auprc: unconstrained_auprc - constrained_auprc,
    })
}

/// Fits the constrained model and the per-group scorers on `train`/`val` and
/// compares them on `test`.
pub fn compare_constrained_unconstrained(
    train: &LabeledDataset,
    val: &LabeledDataset,
    test: &LabeledDataset,
    config: &TrainConfig,
    seed: u64,
) -> Result<ModelFitComparison> {
    let free = fit_unconstrained(train, val, config, seed)?;
    let fit = train::fit(train, val, config, seed)?;
    compare_on(&fit.model, &free, test)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckThresholds {
    /// Warn when any group's ECE exceeds this.
    pub ece_warn: f64,
    /// Warn when the unconstrained AUC exceeds the constrained one by more.
    pub delta_auc_warn: f64,
}

impl Default for CheckThresholds {
    fn default() -> Self {
        CheckThresholds {
            ece_warn: 0.05,
            delta_auc_warn: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Warn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheckReport {
    pub thresholds: CheckThresholds,
    pub calibration: CalibrationReport,
    pub calibration_verdict: Verdict,
    pub model_fit: ModelFitComparison,
    pub model_fit_verdict: Verdict,
}

/// Bundles both checks with verdicts against `thresholds`.
pub fn assumption_check_report(
    calibration: CalibrationReport,
    model_fit: ModelFitComparison,
    thresholds: CheckThresholds,
) -> AssumptionCheckReport {
    let verdict = |warn: bool| if warn { Verdict::Warn } else { Verdict::Pass };
    AssumptionCheckReport {
        thresholds,
        calibration_verdict: verdict(calibration.max_ece() > thresholds.ece_warn),
        calibration,
        model_fit_verdict: verdict(model_fit.delta_auc > thresholds.delta_auc_warn),
        model_fit,
    }
}

/// Runs both checks for a fitted model: calibration on `test`, and the
/// comparison against per-group scorers fitted on `train`/`val`.
pub fn check_model(
    model: &PurpleModel,
    train: &LabeledDataset,
    val: &LabeledDataset,
    test: &LabeledDataset,
    n_bins: usize,
    config: &TrainConfig,
    thresholds: CheckThresholds,
    seed: u64,
) -> Result<AssumptionCheckReport> {
    let calibration = calibration_report(model, test, n_bins)?;
    let free = fit_unconstrained(train, val, config, seed)?;
    let model_fit = compare_on(model, &free, test)?;
    Ok(assumption_check_report(calibration, model_fit, thresholds))
}
