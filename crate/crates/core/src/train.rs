//! Gradient-descent fitting with Adam, per-epoch validation early stopping
//! and L1 strength selection by validation AUC.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{PurpleError, Result};
use crate::metrics;
use crate::model::{self, Gradients, PurpleModel};
use crate::optim::{Adam, AdamConfig};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub adam_eps: f64,
    pub weight_decay: f64,
    pub lambda_grid: Vec<f64>,
    pub max_epochs: usize,
    pub patience: usize,
    /// `None` means full-batch gradient descent.
    pub batch_size: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            adam_eps: 1e-8,
            weight_decay: 0.0,
            lambda_grid: vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 0.0],
            max_epochs: 500,
            patience: 10,
            batch_size: Some(64),
        }
    }
}

impl TrainConfig {
    /// Default settings with L1 regularization disabled.
    pub fn unregularized() -> Self {
        TrainConfig {
            lambda_grid: vec![0.0],
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(PurpleError::InvalidInput("learning_rate must be positive".into()));
        }
        if self.lambda_grid.is_empty() || self.lambda_grid.iter().any(|l| !(*l >= 0.0)) {
            return Err(PurpleError::InvalidInput(
                "lambda_grid must be non-empty with non-negative values".into(),
            ));
        }
        if self.max_epochs == 0 {
            return Err(PurpleError::InvalidInput("max_epochs must be positive".into()));
        }
        if self.batch_size == Some(0) {
            return Err(PurpleError::InvalidInput("batch_size must be positive".into()));
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            eps: self.adam_eps,
            weight_decay: self.weight_decay,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Validation outcome of one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaCandidate {
    pub lambda: f64,
    pub val_auc: Option<f64>,
    pub val_cross_entropy: f64,
    pub epochs_run: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: PurpleModel,
    pub selected_lambda: f64,
    /// `None` when the validation set has a single observed class.
    pub val_auc: Option<f64>,
    pub val_cross_entropy: f64,
    pub epochs_run: usize,
    pub loss_trace: Vec<TraceEntry>,
    pub candidates: Vec<LambdaCandidate>,
    pub warnings: Vec<String>,
}

/// What the trainer optimizes: the model's parameters against fixed targets
/// on the training rows, early-stopped on the validation rows.
pub(crate) struct Objective<'a> {
    pub train: &'a LabeledDataset,
    pub train_targets: &'a [f64],
    pub val: &'a LabeledDataset,
    pub val_targets: &'a [f64],
    /// When false the group logits stay at their initial values.
    pub fit_theta: bool,
}

pub(crate) struct TrainOutcome {
    pub model: PurpleModel,
    pub best_val_loss: f64,
    pub epochs_run: usize,
    pub trace: Vec<TraceEntry>,
}

/// Runs Adam from `init` for one L1 strength and returns the parameters with
/// the lowest validation cross-entropy.
pub(crate) fn run_adam(
    init: PurpleModel,
    obj: &Objective<'_>,
    lambda: f64,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<TrainOutcome> {
    let n = obj.train.len();
    if n == 0 || obj.val.is_empty() {
        return Err(PurpleError::InsufficientData(
            "training and validation sets must be non-empty".into(),
        ));
    }
    let slots = model::group_slots(&init, obj.train)?;
    model::group_slots(&init, obj.val)?;

    let d = init.n_dims();
    let n_theta = init.theta.len();
    let mut model = init;
    let mut adam = Adam::new(d + 1 + n_theta, cfg.adam());
    let mut grad = Gradients {
        w: vec![0.0; d],
        b: 0.0,
        theta: vec![0.0; n_theta],
    };
    let batch = cfg.batch_size.unwrap_or(n).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut shuffler = rng::stream(seed, rng::streams::SHUFFLE);

    let mut best = model.clone();
    let mut best_val = model::loss_with_targets(&model, obj.val, obj.val_targets, 0.0)?;
    let mut since_best = 0;
    let mut trace = Vec::new();
    let mut epochs_run = 0;

    for epoch in 1..=cfg.max_epochs {
        if batch < n {
            order.shuffle(&mut shuffler);
        }
        let mut epoch_ce = 0.0;
        for rows in order.chunks(batch) {
            grad.w.iter_mut().for_each(|v| *v = 0.0);
            grad.b = 0.0;
            grad.theta.iter_mut().for_each(|v| *v = 0.0);
            epoch_ce += model::accumulate(&model, obj.train, obj.train_targets, rows, &slots, &mut grad);
            let inv = 1.0 / rows.len() as f64;
            for (gw, &w) in grad.w.iter_mut().zip(&model.w) {
                *gw *= inv;
                if lambda != 0.0 && w != 0.0 {
                    *gw += lambda * w.signum();
                }
            }
            adam.begin_step();
            adam.update(0, &mut model.w, &grad.w);
            adam.update_scalar(d, &mut model.b, grad.b * inv);
            if obj.fit_theta {
                for t in grad.theta.iter_mut() {
                    *t *= inv;
                }
                adam.update(d + 1, &mut model.theta, &grad.theta);
            }
        }
        epochs_run = epoch;
        let val_loss = model::loss_with_targets(&model, obj.val, obj.val_targets, 0.0)?;
        trace.push(TraceEntry {
            epoch,
            train_loss: epoch_ce / n as f64 + lambda * model.l1_norm(),
            val_loss,
        });
        if !val_loss.is_finite() {
            return Err(PurpleError::Degenerate(format!(
                "validation loss became non-finite at epoch {epoch}"
            )));
        }
        if val_loss < best_val {
            best_val = val_loss;
            best.clone_from(&model);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    Ok(TrainOutcome {
        model: best,
        best_val_loss: best_val,
        epochs_run,
        trace,
    })
}

fn check_fit_inputs(train: &LabeledDataset, val: &LabeledDataset) -> Result<()> {
    if train.n_dims() != val.n_dims() {
        return Err(PurpleError::InvalidInput(format!(
            "train has {} dims, validation has {}",
            train.n_dims(),
            val.n_dims()
        )));
    }
    let train_sizes = train.group_sizes();
    for (k, &n) in val.group_sizes().iter().enumerate() {
        if n == 0 {
            continue;
        }
        let name = &val.group_names()[k];
        let in_train = train
            .group_names()
            .iter()
            .position(|g| g == name)
            .is_some_and(|j| train_sizes[j] > 0);
        if !in_train {
            return Err(PurpleError::InvalidInput(format!(
                "group `{name}` appears in validation but not in training"
            )));
        }
    }
    Ok(())
}

/// Fits the factorized model on `train` for every L1 strength in the grid,
/// early-stopping each run on validation cross-entropy, and keeps the run
/// with the highest validation AUC against `s` (first in grid order on ties).
pub fn fit(
    train: &LabeledDataset,
    val: &LabeledDataset,
    config: &TrainConfig,
    seed: u64,
) -> Result<FitResult> {
    config.validate()?;
    check_fit_inputs(train, val)?;
    let mut warnings = Vec::new();
    let degenerate = !train.s().iter().any(|&s| s);
    if degenerate {
        let msg = "training data has no observed positives; the fitted scores carry no signal";
        log::warn!("{msg}");
        warnings.push(msg.to_string());
    }
    let train_targets = model::observed_targets(train);
    let val_targets = model::observed_targets(val);
    let obj = Objective {
        train,
        train_targets: &train_targets,
        val,
        val_targets: &val_targets,
        fit_theta: true,
    };
    let val_has_both = val.s().iter().any(|&s| s) && val.s().iter().any(|&s| !s);
    if !val_has_both && config.lambda_grid.len() > 1 {
        warnings.push(
            "validation set has a single observed class; lambda selected by validation cross-entropy"
                .to_string(),
        );
    }

    let mut candidates = Vec::with_capacity(config.lambda_grid.len());
    let mut best: Option<(usize, TrainOutcome, Option<f64>)> = None;
    for (k, &lambda) in config.lambda_grid.iter().enumerate() {
        let init = PurpleModel::zeros(train.n_dims(), train.group_names().to_vec());
        let outcome = run_adam(init, &obj, lambda, config, seed)?;
        let val_auc = if val_has_both {
            let probs = outcome.model.diagnosis_probabilities(val)?;
            Some(metrics::auc(&probs, val.s())?)
        } else {
            None
        };
        candidates.push(LambdaCandidate {
            lambda,
            val_auc,
            val_cross_entropy: outcome.best_val_loss,
            epochs_run: outcome.epochs_run,
        });
        let better = match &best {
            None => true,
            Some((_, prev, prev_auc)) => match (val_auc, prev_auc) {
                (Some(a), Some(p)) => a > *p,
                _ => outcome.best_val_loss < prev.best_val_loss,
            },
        };
        if better {
            best = Some((k, outcome, val_auc));
        }
    }
    let (k, outcome, val_auc) = best.expect("lambda grid is non-empty");
    let best_ce = candidates
        .iter()
        .map(|c| c.val_cross_entropy)
        .fold(f64::INFINITY, f64::min);
    if outcome.best_val_loss > best_ce {
        log::info!(
            "selected lambda {} by AUC; its validation cross-entropy {:.6} exceeds the grid minimum {:.6}",
            config.lambda_grid[k],
            outcome.best_val_loss,
            best_ce
        );
    }
    let mut model = outcome.model;
    model.degenerate = degenerate;
    Ok(FitResult {
        model,
        selected_lambda: config.lambda_grid[k],
        val_auc,
        val_cross_entropy: outcome.best_val_loss,
        epochs_run: outcome.epochs_run,
        loss_trace: outcome.trace,
        candidates,
        warnings,
    })
}
