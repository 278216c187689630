//! Reference prevalence estimators: Negative, Supervised and a PU
//! expectation-maximization baseline. Each is applied to one group's rows at
//! a time and reports that group's absolute prevalence as the mean predicted
//! probability of a linear-logistic scorer.

use serde::{Deserialize, Serialize};

use crate::dataset::{LabeledDataset, RowView};
use crate::error::{PurpleError, Result};
use crate::model::{sigmoid, PurpleModel};
use crate::train::{self, Objective, TrainConfig};

/// Linear-logistic scorer `σ(w·x + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticScorer {
    pub w: Vec<f64>,
    pub b: f64,
}

impl LogisticScorer {
    pub fn predict(&self, x: RowView<'_>) -> f64 {
        sigmoid(x.dot(&self.w) + self.b)
    }

    pub fn predict_all(&self, data: &LabeledDataset) -> Vec<f64> {
        data.features().rows().map(|x| self.predict(x)).collect()
    }

    pub fn mean_prediction(&self, data: &LabeledDataset) -> Result<f64> {
        if data.is_empty() {
            return Err(PurpleError::InsufficientData("mean prediction over no rows".into()));
        }
        Ok(self.predict_all(data).iter().sum::<f64>() / data.len() as f64)
    }

    fn into_model(self, data: &LabeledDataset) -> PurpleModel {
        PurpleModel {
            w: self.w,
            b: self.b,
            theta: vec![f64::INFINITY; data.n_groups()],
            group_names: data.group_names().to_vec(),
            degenerate: false,
        }
    }

    fn from_model(m: PurpleModel) -> Self {
        LogisticScorer { w: m.w, b: m.b }
    }
}

fn zero_scorer(data: &LabeledDataset) -> LogisticScorer {
    LogisticScorer {
        w: vec![0.0; data.n_dims()],
        b: 0.0,
    }
}

/// Unregularized logistic regression by the shared Adam loop, with the
/// labeling frequency pinned at 1 so the model reduces to `σ(w·x + b)`.
fn fit_logistic(
    init: LogisticScorer,
    train: &LabeledDataset,
    train_targets: &[f64],
    val: &LabeledDataset,
    val_targets: &[f64],
    config: &TrainConfig,
    seed: u64,
) -> Result<LogisticScorer> {
    let obj = Objective {
        train,
        train_targets,
        val,
        val_targets,
        fit_theta: false,
    };
    let model = init.into_model(train);
    let out = train::run_adam(model, &obj, 0.0, config, seed)?;
    Ok(LogisticScorer::from_model(out.model))
}

fn require_both_classes(labels: &[bool], what: &str) -> Result<()> {
    let pos = labels.iter().filter(|&&l| l).count();
    if pos == 0 || pos == labels.len() {
        return Err(PurpleError::Degenerate(format!(
            "{what} has a single class ({pos} of {} positive)",
            labels.len()
        )));
    }
    Ok(())
}

fn as_targets(labels: &[bool]) -> Vec<f64> {
    labels.iter().map(|&l| l as u8 as f64).collect()
}

/// Treats every unlabeled row as negative: logistic regression on `s`.
pub fn fit_negative(
    train: &LabeledDataset,
    val: &LabeledDataset,
    config: &TrainConfig,
    seed: u64,
) -> Result<LogisticScorer> {
    require_both_classes(train.s(), "observed label s in training data")?;
    fit_logistic(
        zero_scorer(train),
        train,
        &as_targets(train.s()),
        val,
        &as_targets(val.s()),
        config,
        seed,
    )
}

/// Logistic regression on the true label `y`; only possible on generated data.
pub fn fit_supervised(
    train: &LabeledDataset,
    val: &LabeledDataset,
    config: &TrainConfig,
    seed: u64,
) -> Result<LogisticScorer> {
    let missing = || PurpleError::InvalidInput("supervised baseline needs true labels y".into());
    let y_train = train.y().ok_or_else(missing)?;
    let y_val = val.y().ok_or_else(missing)?;
    require_both_classes(y_train, "true label y in training data")?;
    fit_logistic(
        zero_scorer(train),
        train,
        &as_targets(y_train),
        val,
        &as_targets(y_val),
        config,
        seed,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            max_iters: 100,
            tol: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmFit {
    pub scorer: LogisticScorer,
    pub c_hat: f64,
    pub initial_c: f64,
    pub iterations: usize,
    pub converged: bool,
    pub c_trace: Vec<f64>,
}

/// Lower clamp for the labeling-frequency estimate.
const C_FLOOR: f64 = 1e-6;

/// Starting labeling frequency: twice the observed positive rate, clamped
/// into (0, 1).
pub fn em_initial_c(s: &[bool]) -> f64 {
    let rate = s.iter().filter(|&&v| v).count() as f64 / s.len().max(1) as f64;
    (2.0 * rate).clamp(0.01, 0.99)
}

/// Posterior probability that each row is positive given its score `f` and
/// labeling frequency `c`: 1 for labeled rows, `f(1−c)/(1−c·f)` otherwise.
pub fn em_soft_labels(scores: &[f64], s: &[bool], c: f64) -> Vec<f64> {
    scores
        .iter()
        .zip(s)
        .map(|(&f, &s)| {
            if s {
                1.0
            } else {
                let den = 1.0 - c * f;
                if den <= 0.0 {
                    1.0
                } else {
                    (f * (1.0 - c) / den).clamp(0.0, 1.0)
                }
            }
        })
        .collect()
}

/// Labeling-frequency update `Σ s / Σ f`, clamped into (0, 1].
pub fn em_update_c(scores: &[f64], s: &[bool]) -> f64 {
    let labeled = s.iter().filter(|&&v| v).count() as f64;
    let mass: f64 = scores.iter().sum();
    if mass <= 0.0 {
        return 1.0;
    }
    (labeled / mass).clamp(C_FLOOR, 1.0)
}

/// First E-step scores: the Negative fit estimates `c·p(y=1|x)`, so it is
/// divided by the starting `c` to match what the E-step expects.
fn initial_scores(negative: &LogisticScorer, data: &LabeledDataset, c: f64) -> Vec<f64> {
    negative.predict_all(data).into_iter().map(|f| (f / c).min(1.0)).collect()
}

/// PU expectation-maximization under a single labeling frequency. The scorer
/// starts from the Negative fit rescaled by `1/ĉ₀`. Each iteration computes
/// soft labels (E), refits the scorer on them from zero and updates
/// `ĉ = Σ s / Σ f` (M). Refitting from zero matters: a warm start sits at the
/// previous optimum, where minibatch noise keeps early stopping from
/// accepting any step. Stops when `|Δĉ| < tol` or after `max_iters`, in
/// which case the result is flagged as not converged.
pub fn fit_em(
    train: &LabeledDataset,
    val: &LabeledDataset,
    em: &EmConfig,
    config: &TrainConfig,
    seed: u64,
) -> Result<EmFit> {
    if !train.s().iter().any(|&s| s) {
        return Err(PurpleError::Degenerate(
            "EM needs at least one observed positive".into(),
        ));
    }
    let initial_c = em_initial_c(train.s());
    let mut scorer = if train.s().iter().all(|&s| s) {
        zero_scorer(train)
    } else {
        fit_negative(train, val, config, seed)?
    };
    let mut c = initial_c;
    let mut c_trace = vec![c];
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=em.max_iters {
        iterations = it;
        let (f_train, f_val) = if it == 1 {
            (initial_scores(&scorer, train, c), initial_scores(&scorer, val, c))
        } else {
            (scorer.predict_all(train), scorer.predict_all(val))
        };
        let q_train = em_soft_labels(&f_train, train.s(), c);
        let q_val = em_soft_labels(&f_val, val.s(), c);
        scorer = fit_logistic(zero_scorer(train), train, &q_train, val, &q_val, config, seed)?;
        let c_new = em_update_c(&scorer.predict_all(train), train.s());
        c_trace.push(c_new);
        let step = (c_new - c).abs();
        c = c_new;
        if step < em.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("EM did not converge after {iterations} iterations (c = {c:.5})");
    }
    Ok(EmFit {
        scorer,
        c_hat: c,
        initial_c,
        iterations,
        converged,
        c_trace,
    })
}
