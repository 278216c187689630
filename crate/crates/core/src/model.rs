//! The factorized diagnosis model `p(s=1|x,g) = σ(w·x + b) · σ(θ_g)`.
//!
//! `σ(w·x + b)` is the condition score, an estimate of `p(y=1|x)` that is only
//! meaningful up to a constant factor; `σ(θ_g)` is the labeling frequency of
//! group `g`. Loss and gradients are computed in log space.

use serde::{Deserialize, Serialize};

use crate::dataset::{GroupId, LabeledDataset, RowView};
use crate::error::{PurpleError, Result};

/// Probabilities are clamped to `[PROB_FLOOR, 1 - PROB_FLOOR]` inside the loss.
pub const PROB_FLOOR: f64 = 1e-12;

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
#[inline]
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[inline]
fn log_sigmoid(z: f64) -> f64 {
    -softplus(-z)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PurpleModel {
    pub w: Vec<f64>,
    pub b: f64,
    /// Labeling-frequency logits, indexed by group id.
    pub theta: Vec<f64>,
    pub group_names: Vec<String>,
    /// Set when the model was fitted without any observed positive.
    #[serde(default)]
    pub degenerate: bool,
}

/// Parameter gradients, laid out like [`PurpleModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w: Vec<f64>,
    pub b: f64,
    pub theta: Vec<f64>,
}

impl PurpleModel {
    /// All-zero parameters: score 0.5 and labeling frequency 0.5 everywhere.
    pub fn zeros(n_dims: usize, group_names: Vec<String>) -> Self {
        PurpleModel {
            w: vec![0.0; n_dims],
            b: 0.0,
            theta: vec![0.0; group_names.len()],
            group_names,
            degenerate: false,
        }
    }

    pub fn n_dims(&self) -> usize {
        self.w.len()
    }

    #[inline]
    pub fn logit(&self, x: RowView<'_>) -> f64 {
        x.dot(&self.w) + self.b
    }

    /// `σ(w·x + b)`, proportional to `p(y=1|x)`.
    #[inline]
    pub fn condition_score(&self, x: RowView<'_>) -> f64 {
        sigmoid(self.logit(x))
    }

    pub fn labeling_frequency(&self, g: GroupId) -> Result<f64> {
        self.theta
            .get(g.index())
            .map(|&t| sigmoid(t))
            .ok_or_else(|| PurpleError::UnknownGroup(format!("#{}", g.0)))
    }

    pub fn labeling_frequency_of(&self, name: &str) -> Result<f64> {
        let k = self
            .group_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| PurpleError::UnknownGroup(name.to_string()))?;
        Ok(sigmoid(self.theta[k]))
    }

    /// `σ(w·x + b) · σ(θ_g)`, the modelled `p(s=1|x,g)`.
    pub fn diagnosis_probability(&self, x: RowView<'_>, g: GroupId) -> Result<f64> {
        Ok(self.condition_score(x) * self.labeling_frequency(g)?)
    }

    pub fn condition_scores(&self, data: &LabeledDataset) -> Vec<f64> {
        data.features().rows().map(|x| self.condition_score(x)).collect()
    }

    pub fn diagnosis_probabilities(&self, data: &LabeledDataset) -> Result<Vec<f64>> {
        data.features()
            .rows()
            .zip(data.groups())
            .map(|(x, &g)| self.diagnosis_probability(x, g))
            .collect()
    }

    /// Checks that `data` uses this model's dimensionality and that every
    /// group with rows in `data` has a labeling-frequency parameter.
    pub fn check_compatible(&self, data: &LabeledDataset) -> Result<()> {
        if data.n_dims() != self.n_dims() {
            return Err(PurpleError::InvalidInput(format!(
                "data has {} dims, model has {}",
                data.n_dims(),
                self.n_dims()
            )));
        }
        for (k, &n) in data.group_sizes().iter().enumerate() {
            if n > 0 && !self.group_names.iter().any(|g| g == &data.group_names()[k]) {
                return Err(PurpleError::UnknownGroup(data.group_names()[k].clone()));
            }
        }
        Ok(())
    }

    pub fn l1_norm(&self) -> f64 {
        self.w.iter().map(|v| v.abs()).sum()
    }
}

/// Per-row terms: clamped cross-entropy plus its derivatives in the score
/// logit and the group logit. Derivatives are zero where the clamp is active.
#[inline]
pub(crate) fn row_terms(z: f64, theta: f64, target: f64) -> (f64, f64, f64) {
    let log_f = log_sigmoid(z);
    let log_c = log_sigmoid(theta);
    let raw = log_f + log_c;
    let lo = PROB_FLOOR.ln();
    let hi = (-PROB_FLOOR).ln_1p();
    let clamped = raw < lo || raw > hi;
    let log_p = raw.clamp(lo, hi);
    let log_q = (-log_p.exp_m1()).ln();
    let ce = -(target * log_p + (1.0 - target) * log_q);
    if clamped {
        return (ce, 0.0, 0.0);
    }
    let f = sigmoid(z);
    let c = sigmoid(theta);
    // p / (1 - p)
    let odds = (log_p - log_q).exp();
    let neg = (1.0 - target) * odds;
    let dz = -(target * (1.0 - f) - neg * (1.0 - f));
    let dtheta = -(target * (1.0 - c) - neg * (1.0 - c));
    (ce, dz, dtheta)
}

/// Resolves each dataset group to the model's parameter slot by name.
pub(crate) fn group_slots(model: &PurpleModel, data: &LabeledDataset) -> Result<Vec<usize>> {
    data.group_names()
        .iter()
        .enumerate()
        .map(|(k, name)| match model.group_names.iter().position(|n| n == name) {
            Some(slot) => Ok(slot),
            None if data.group_sizes()[k] == 0 => Ok(usize::MAX),
            None => Err(PurpleError::UnknownGroup(name.clone())),
        })
        .collect()
}

fn mean_ce(model: &PurpleModel, data: &LabeledDataset, targets: &[f64]) -> Result<f64> {
    if data.is_empty() {
        return Err(PurpleError::InsufficientData("loss of an empty batch".into()));
    }
    let slots = group_slots(model, data)?;
    let total: f64 = data
        .features()
        .rows()
        .zip(data.groups())
        .zip(targets)
        .map(|((x, g), &t)| row_terms(model.logit(x), model.theta[slots[g.index()]], t).0)
        .sum();
    Ok(total / data.len() as f64)
}

pub(crate) fn observed_targets(data: &LabeledDataset) -> Vec<f64> {
    data.s().iter().map(|&s| s as u8 as f64).collect()
}

/// Mean binary cross-entropy of the diagnosis probability against `s`, plus
/// `lambda · ‖w‖₁`.
pub fn loss(model: &PurpleModel, batch: &LabeledDataset, lambda: f64) -> Result<f64> {
    Ok(mean_ce(model, batch, &observed_targets(batch))? + lambda * model.l1_norm())
}

/// Same as [`loss`] with arbitrary targets in `[0, 1]` in place of `s`.
pub fn loss_with_targets(
    model: &PurpleModel,
    batch: &LabeledDataset,
    targets: &[f64],
    lambda: f64,
) -> Result<f64> {
    Ok(mean_ce(model, batch, targets)? + lambda * model.l1_norm())
}

/// Exact gradient of [`loss`]. The L1 term contributes `lambda · sign(w)`
/// with `sign(0) = 0`.
pub fn gradients(model: &PurpleModel, batch: &LabeledDataset, lambda: f64) -> Result<Gradients> {
    let rows: Vec<usize> = (0..batch.len()).collect();
    gradients_on_rows(model, batch, &observed_targets(batch), &rows, lambda)
}

/// Gradient of the loss restricted to `rows` of `data`, with explicit targets.
pub(crate) fn gradients_on_rows(
    model: &PurpleModel,
    data: &LabeledDataset,
    targets: &[f64],
    rows: &[usize],
    lambda: f64,
) -> Result<Gradients> {
    if rows.is_empty() {
        return Err(PurpleError::InsufficientData("gradient of an empty batch".into()));
    }
    let slots = group_slots(model, data)?;
    let mut grad = Gradients {
        w: vec![0.0; model.n_dims()],
        b: 0.0,
        theta: vec![0.0; model.theta.len()],
    };
    accumulate(model, data, targets, rows, &slots, &mut grad);
    let inv = 1.0 / rows.len() as f64;
    for v in grad.w.iter_mut() {
        *v *= inv;
    }
    grad.b *= inv;
    for v in grad.theta.iter_mut() {
        *v *= inv;
    }
    if lambda != 0.0 {
        for (gw, &w) in grad.w.iter_mut().zip(&model.w) {
            if w > 0.0 {
                *gw += lambda;
            } else if w < 0.0 {
                *gw -= lambda;
            }
        }
    }
    Ok(grad)
}

/// Adds unnormalized per-row gradient contributions; returns the summed CE.
pub(crate) fn accumulate(
    model: &PurpleModel,
    data: &LabeledDataset,
    targets: &[f64],
    rows: &[usize],
    slots: &[usize],
    grad: &mut Gradients,
) -> f64 {
    let mut total = 0.0;
    for &i in rows {
        let x = data.features().row(i);
        let slot = slots[data.groups()[i].index()];
        let (ce, dz, dtheta) = row_terms(model.logit(x), model.theta[slot], targets[i]);
        total += ce;
        if dz != 0.0 {
            x.axpy(dz, &mut grad.w);
            grad.b += dz;
        }
        grad.theta[slot] += dtheta;
    }
    total
}
