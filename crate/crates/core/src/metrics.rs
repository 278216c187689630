//! Ranking and calibration metrics for binary labels.

use serde::{Deserialize, Serialize};

use crate::error::{PurpleError, Result};

fn check_lengths(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(PurpleError::InvalidInput(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(PurpleError::InvalidInput("NaN score".into()));
    }
    Ok(())
}

/// Area under the ROC curve in Mann–Whitney form: the probability that a
/// random positive outscores a random negative, ties counting one half.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(PurpleError::Degenerate(
            "AUC needs at least one positive and one negative".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Twice the rank sum of positives, with tied blocks sharing their mean
    // rank; kept in integers so the result is exact.
    let mut twice_rank_sum: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // ranks start+1 ..= end; twice their mean is start + 1 + end
        let pos_in_block = order[start..end].iter().filter(|&&i| labels[i]).count() as u128;
        twice_rank_sum += pos_in_block * (start as u128 + 1 + end as u128);
        start = end;
    }
    let np = n_pos as u128;
    let twice_u = twice_rank_sum - np * (np + 1);
    Ok((twice_u as f64 / 2.0) / (n_pos as f64 * n_neg as f64))
}

/// Average precision: the mean, over positives taken in descending score
/// order, of the precision at each positive's rank. Ties keep input order.
pub fn auprc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos == 0 {
        return Err(PurpleError::Degenerate("AUPRC needs at least one positive".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut hits = 0usize;
    let mut total = 0.0;
    for (k, &i) in order.iter().enumerate() {
        if labels[i] {
            hits += 1;
            total += hits as f64 / (k + 1) as f64;
        }
    }
    Ok(total / n_pos as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub lower: f64,
    pub upper: f64,
    /// `None` for empty bins.
    pub mean_predicted: Option<f64>,
    pub empirical_rate: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCurve {
    pub bins: Vec<CalibrationBin>,
    pub ece: f64,
}

/// Equal-width reliability bins on `[0, 1]` and the expected calibration
/// error `Σ (count/n) · |mean prediction − empirical rate|` over non-empty bins.
pub fn calibration(preds: &[f64], labels: &[bool], n_bins: usize) -> Result<CalibrationCurve> {
    check_lengths(preds, labels)?;
    if n_bins == 0 {
        return Err(PurpleError::InvalidInput("n_bins must be positive".into()));
    }
    if let Some(p) = preds.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(PurpleError::InvalidInput(format!("prediction {p} outside [0, 1]")));
    }
    let mut sum_pred = vec![0.0; n_bins];
    let mut sum_pos = vec![0usize; n_bins];
    let mut count = vec![0usize; n_bins];
    for (&p, &l) in preds.iter().zip(labels) {
        let k = ((p * n_bins as f64) as usize).min(n_bins - 1);
        sum_pred[k] += p;
        sum_pos[k] += l as usize;
        count[k] += 1;
    }
    let n = preds.len() as f64;
    let mut ece = 0.0;
    let bins = (0..n_bins)
        .map(|k| {
            let (mean_predicted, empirical_rate) = if count[k] > 0 {
                let c = count[k] as f64;
                let mp = sum_pred[k] / c;
                let er = sum_pos[k] as f64 / c;
                ece += (c / n) * (mp - er).abs();
                (Some(mp), Some(er))
            } else {
                (None, None)
            };
            CalibrationBin {
                lower: k as f64 / n_bins as f64,
                upper: (k + 1) as f64 / n_bins as f64,
                mean_predicted,
                empirical_rate,
                count: count[k],
            }
        })
        .collect();
    Ok(CalibrationCurve { bins, ece })
}
