//! Semi-synthetic labels on one-hot visit matrices.
//!
//! A set of "suspicious" features `v` drives the true-label probability
//! `σ(k / √|v|)`, where `k` counts the suspicious features active in a row.
//! Observed labels follow `s ~ Bernoulli(c_g · y)`. The probability depends
//! only on the row's features, so the shared-`p(y|x)` assumption holds by
//! construction. Symptom sets come from a file or from one of three
//! selection rules; [`generate_corpus`] provides a stand-in visit matrix with
//! Zipf-like feature frequencies, group-dependent rates and latent clusters
//! of co-occurring features.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureMatrix, GroupId, LabeledDataset, SparseBuilder};
use crate::error::{PurpleError, Result};
use crate::model::sigmoid;
use crate::rng::{self, streams};
use crate::synth::{draw_observed, GROUP_A, GROUP_B};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymptomSet {
    pub name: String,
    /// Sorted, distinct feature indices.
    pub indices: Vec<usize>,
}

impl SymptomSet {
    pub fn new(name: impl Into<String>, mut indices: Vec<usize>, n_dims: usize) -> Result<Self> {
        let name = name.into();
        indices.sort_unstable();
        indices.dedup();
        if indices.is_empty() {
            return Err(PurpleError::InvalidInput(format!("symptom set `{name}` is empty")));
        }
        if let Some(&bad) = indices.iter().find(|&&j| j >= n_dims) {
            return Err(PurpleError::InvalidInput(format!(
                "symptom set `{name}` has index {bad}, but the matrix has {n_dims} features"
            )));
        }
        Ok(SymptomSet { name, indices })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.indices.binary_search(&j).is_ok()
    }
}

/// Reads newline-separated feature indices; blank lines and `#` comments are
/// ignored.
pub fn load_symptom_file(path: &Path, n_dims: usize) -> Result<SymptomSet> {
    let text = std::fs::read_to_string(path).map_err(|e| PurpleError::io(path, e))?;
    let mut indices = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let t = line.split('#').next().unwrap_or("").trim();
        if t.is_empty() {
            continue;
        }
        let j = t
            .parse::<usize>()
            .map_err(|_| PurpleError::parse(k + 1, format!("expected a feature index, got `{t}`")))?;
        indices.push(j);
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "file".into());
    SymptomSet::new(name, indices, n_dims)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemiSynthConfig {
    /// Labeling frequency per group name.
    pub c: BTreeMap<String, f64>,
    pub seed: u64,
}

impl SemiSynthConfig {
    pub fn validate(&self) -> Result<()> {
        for (g, c) in &self.c {
            if !(0.0..=1.0).contains(c) {
                return Err(PurpleError::InvalidInput(format!(
                    "labeling frequency for `{g}` is {c}, outside [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// Number of suspicious features active in each row.
pub fn symptom_counts(visits: &FeatureMatrix, v_sym: &SymptomSet) -> Vec<usize> {
    visits
        .rows()
        .map(|x| {
            let mut k = 0;
            x.for_each_nonzero(|j, _| {
                if v_sym.contains(j) {
                    k += 1;
                }
            });
            k
        })
        .collect()
}

/// Draws `y` and `s` for every visit from the suspicious-symptom set.
/// `groups` indexes into `group_names`; every group needs a labeling
/// frequency in `cfg.c`.
pub fn simulate_labels(
    visits: &FeatureMatrix,
    group_names: &[String],
    groups: &[GroupId],
    v_sym: &SymptomSet,
    cfg: &SemiSynthConfig,
) -> Result<LabeledDataset> {
    cfg.validate()?;
    if !visits.is_binary() {
        return Err(PurpleError::InvalidInput(
            "visit matrix must be binary (0/1 entries only)".into(),
        ));
    }
    if let Some(&last) = v_sym.indices.last() {
        if last >= visits.n_dims() {
            return Err(PurpleError::InvalidInput(format!(
                "symptom index {last} out of range for {} features",
                visits.n_dims()
            )));
        }
    }
    let c_by_id: Vec<f64> = group_names
        .iter()
        .map(|g| {
            cfg.c.get(g).copied().ok_or_else(|| {
                PurpleError::InvalidInput(format!("missing labeling frequency for group `{g}`"))
            })
        })
        .collect::<Result<_>>()?;

    let norm = (v_sym.len() as f64).sqrt();
    let latent: Vec<f64> = symptom_counts(visits, v_sym)
        .into_iter()
        .map(|k| sigmoid(k as f64 / norm))
        .collect();
    let mut y_rng = rng::stream(cfg.seed, streams::TRUE_LABELS);
    let y: Vec<bool> = latent.iter().map(|&p| y_rng.random::<f64>() < p).collect();
    let s = draw_observed(&y, groups, &c_by_id, cfg.seed);
    LabeledDataset::new(
        visits.clone(),
        group_names.to_vec(),
        groups.to_vec(),
        s,
        Some(y),
        Some(latent),
    )
}

/// Features ordered by occurrence count, most frequent first, ties by index.
fn by_frequency(visits: &FeatureMatrix) -> Vec<(usize, usize)> {
    let mut ranked: Vec<(usize, usize)> = visits.column_counts().into_iter().enumerate().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked
}

/// Samples `pick` features uniformly from the `pool` most frequent ones.
pub fn select_common_symptoms(visits: &FeatureMatrix, pool: usize, pick: usize, seed: u64) -> Result<SymptomSet> {
    if pick == 0 || pick > pool || pool > visits.n_dims() {
        return Err(PurpleError::InvalidInput(format!(
            "need 0 < pick ≤ pool ≤ n_dims, got pick {pick}, pool {pool}, n_dims {}",
            visits.n_dims()
        )));
    }
    let ranked = by_frequency(visits);
    let nonzero = ranked.iter().filter(|(_, n)| *n > 0).count();
    if nonzero < pool {
        return Err(PurpleError::InsufficientData(format!(
            "only {nonzero} features occur, fewer than the pool of {pool}"
        )));
    }
    let mut candidates: Vec<usize> = ranked[..pool].iter().map(|(j, _)| *j).collect();
    let mut r = rng::stream(seed, streams::SELECTION);
    candidates.shuffle(&mut r);
    candidates.truncate(pick);
    SymptomSet::new("common", candidates, visits.n_dims())
}

/// The `top` features with the largest rate in `group_num` relative to
/// `group_den`, among features seen at least `min_count` times in each.
pub fn select_high_rp_symptoms(
    visits: &FeatureMatrix,
    groups: &[GroupId],
    group_num: GroupId,
    group_den: GroupId,
    min_count: usize,
    top: usize,
) -> Result<SymptomSet> {
    let n_num = groups.iter().filter(|&&g| g == group_num).count();
    let n_den = groups.iter().filter(|&&g| g == group_den).count();
    if n_num == 0 || n_den == 0 {
        return Err(PurpleError::InsufficientData(
            "both groups need rows to rank by relative prevalence".into(),
        ));
    }
    let d = visits.n_dims();
    let mut num = vec![0usize; d];
    let mut den = vec![0usize; d];
    for (x, &g) in visits.rows().zip(groups) {
        let counts = if g == group_num {
            &mut num
        } else if g == group_den {
            &mut den
        } else {
            continue;
        };
        x.for_each_nonzero(|j, _| counts[j] += 1);
    }
    let mut ranked: Vec<(usize, f64)> = (0..d)
        .filter(|&j| num[j] >= min_count.max(1) && den[j] >= min_count.max(1))
        .map(|j| (j, (num[j] as f64 / n_num as f64) / (den[j] as f64 / n_den as f64)))
        .collect();
    if ranked.is_empty() {
        return Err(PurpleError::InsufficientData(format!(
            "no feature occurs at least {min_count} times in both groups"
        )));
    }
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let picked = ranked.into_iter().take(top.max(1)).map(|(j, _)| j).collect();
    SymptomSet::new("high-rp", picked, d)
}

/// The `top` non-anchor features most over-represented among rows that carry
/// any anchor feature. Callers should zero the anchor columns in the
/// features used for fitting; see [`build_semisynth`].
pub fn select_correlated_symptoms(visits: &FeatureMatrix, anchor: &SymptomSet, top: usize) -> Result<SymptomSet> {
    let d = visits.n_dims();
    let mut all = vec![0usize; d];
    let mut hit = vec![0usize; d];
    let mut n_hit = 0usize;
    for x in visits.rows() {
        let mut is_hit = false;
        x.for_each_nonzero(|j, _| {
            all[j] += 1;
            is_hit |= anchor.contains(j);
        });
        if is_hit {
            n_hit += 1;
            x.for_each_nonzero(|j, _| hit[j] += 1);
        }
    }
    if n_hit == 0 {
        return Err(PurpleError::InsufficientData(
            "no row carries an anchor feature".into(),
        ));
    }
    let n = visits.n_rows() as f64;
    let mut ranked: Vec<(usize, f64)> = (0..d)
        .filter(|&j| all[j] > 0 && !anchor.contains(j))
        .map(|j| (j, (hit[j] as f64 / n_hit as f64) / (all[j] as f64 / n)))
        .collect();
    if ranked.is_empty() {
        return Err(PurpleError::InsufficientData("no non-anchor feature occurs".into()));
    }
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let picked = ranked.into_iter().take(top.max(1)).map(|(j, _)| j).collect();
    SymptomSet::new("correlated", picked, d)
}

/// How the suspicious-symptom set is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum SymptomMode {
    /// An explicit list of feature indices.
    Recognized { indices: Vec<usize> },
    Common { pool: usize, pick: usize },
    HighRp { min_count: usize, top: usize },
    /// Anchor columns are zeroed in the returned feature matrix.
    Correlated { anchors: Vec<usize>, top: usize },
}

impl SymptomMode {
    pub fn name(&self) -> &'static str {
        match self {
            SymptomMode::Recognized { .. } => "recognized",
            SymptomMode::Common { .. } => "common",
            SymptomMode::HighRp { .. } => "high-rp",
            SymptomMode::Correlated { .. } => "correlated",
        }
    }
}

/// Selects symptoms by `mode` and simulates labels. High-RP ranks group `a`
/// against group `b`. In correlated mode the anchor columns are zeroed in the
/// returned features after labels are drawn; the returned symptom set
/// keeps the original column numbering.
pub fn build_semisynth(
    visits: &FeatureMatrix,
    group_names: &[String],
    groups: &[GroupId],
    mode: &SymptomMode,
    cfg: &SemiSynthConfig,
) -> Result<(LabeledDataset, SymptomSet)> {
    let d = visits.n_dims();
    let group_id = |name: &str| {
        group_names
            .iter()
            .position(|g| g == name)
            .map(|k| GroupId(k as u32))
            .ok_or_else(|| PurpleError::UnknownGroup(name.to_string()))
    };
    let v_sym = match mode {
        SymptomMode::Recognized { indices } => SymptomSet::new("recognized", indices.clone(), d)?,
        SymptomMode::Common { pool, pick } => select_common_symptoms(visits, *pool, *pick, cfg.seed)?,
        SymptomMode::HighRp { min_count, top } => {
            select_high_rp_symptoms(visits, groups, group_id(GROUP_A)?, group_id(GROUP_B)?, *min_count, *top)?
        }
        SymptomMode::Correlated { anchors, top } => {
            let anchor = SymptomSet::new("anchors", anchors.clone(), d)?;
            select_correlated_symptoms(visits, &anchor, *top)?
        }
    };
    let data = simulate_labels(visits, group_names, groups, &v_sym, cfg)?;
    let data = match mode {
        SymptomMode::Correlated { anchors, .. } => data.with_features(visits.without_columns(anchors))?,
        _ => data,
    };
    Ok((data, v_sym))
}

/// Shape of the stand-in visit corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub n_rows: usize,
    pub n_dims: usize,
    /// Probability that a row belongs to group `a`.
    pub share_a: f64,
    /// Feature `r`-th in frequency order has base rate proportional to
    /// `(r + 1)^-zipf_exponent`.
    pub zipf_exponent: f64,
    /// Expected active features per row before clustering and capping.
    pub mean_active: f64,
    pub max_rate: f64,
    /// Standard deviation of each feature's log rate ratio between groups.
    pub group_log_spread: f64,
    pub n_clusters: usize,
    pub cluster_size: usize,
    /// Probability that a row belongs to some cluster.
    pub cluster_rate: f64,
    /// Extra activation probability of a cluster's features in its member
    /// rows, on top of their base rate.
    pub cluster_activation: f64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            n_rows: 20_000,
            n_dims: 1_000,
            share_a: 0.5,
            zipf_exponent: 1.0,
            mean_active: 10.0,
            max_rate: 0.3,
            group_log_spread: 0.5,
            n_clusters: 10,
            cluster_size: 25,
            cluster_rate: 0.3,
            cluster_activation: 0.2,
        }
    }
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(PurpleError::InvalidInput(m.to_string()));
        if self.n_rows == 0 || self.n_dims == 0 {
            return bad("corpus needs rows and features");
        }
        if !(self.share_a > 0.0 && self.share_a < 1.0) {
            return bad("share_a must lie in (0, 1)");
        }
        if !(self.max_rate > 0.0 && self.max_rate < 1.0) || !(self.mean_active > 0.0) {
            return bad("max_rate must lie in (0, 1) and mean_active must be positive");
        }
        if !(0.0..=1.0).contains(&self.cluster_rate) || !(0.0..=1.0).contains(&self.cluster_activation) {
            return bad("cluster_rate and cluster_activation must lie in [0, 1]");
        }
        if self.n_clusters * self.cluster_size > self.n_dims {
            return bad("clusters need more features than the corpus has");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub visits: FeatureMatrix,
    pub group_names: Vec<String>,
    pub groups: Vec<GroupId>,
    /// Member features of each latent cluster, sorted.
    pub clusters: Vec<Vec<usize>>,
}

/// Generates a sparse binary visit matrix. Feature frequencies follow a
/// capped Zipf law over a random permutation of the columns; each feature's
/// rate is scaled by `exp(±m_j/2)` in groups `a`/`b`; cluster membership
/// probabilities also differ by group, and in a cluster's member rows each of
/// its features gets an extra chance `cluster_activation` to be active.
pub fn generate_corpus(cfg: &CorpusConfig, seed: u64) -> Result<SyntheticCorpus> {
    cfg.validate()?;
    let d = cfg.n_dims;
    let mut r = rng::stream(seed, streams::CORPUS);

    let mut order: Vec<usize> = (0..d).collect();
    order.shuffle(&mut r);
    let weights: Vec<f64> = (0..d).map(|k| ((k + 1) as f64).powf(-cfg.zipf_exponent)).collect();
    let total: f64 = weights.iter().sum();
    let mut base = vec![0.0; d];
    for (k, &j) in order.iter().enumerate() {
        base[j] = (cfg.mean_active * weights[k] / total).min(cfg.max_rate);
    }
    let normal = rand_distr::Normal::new(0.0, cfg.group_log_spread.max(0.0))
        .map_err(|e| PurpleError::InvalidInput(e.to_string()))?;
    let shift: Vec<f64> = (0..d).map(|_| r.sample(normal)).collect();
    let rate_a: Vec<f64> = (0..d).map(|j| base[j] * (shift[j] / 2.0).exp()).collect();
    let rate_b: Vec<f64> = (0..d).map(|j| base[j] * (-shift[j] / 2.0).exp()).collect();

    // Clusters draw from moderately frequent features, skipping the head.
    let head = (d / 50).min(d - cfg.n_clusters * cfg.cluster_size);
    let mut pool: Vec<usize> = order[head..].to_vec();
    pool.truncate((cfg.n_clusters * cfg.cluster_size * 4).max(cfg.n_clusters * cfg.cluster_size));
    pool.shuffle(&mut r);
    let clusters: Vec<Vec<usize>> = (0..cfg.n_clusters)
        .map(|k| {
            let mut c = pool[k * cfg.cluster_size..(k + 1) * cfg.cluster_size].to_vec();
            c.sort_unstable();
            c
        })
        .collect();
    let mut cluster_of = vec![usize::MAX; d];
    for (k, c) in clusters.iter().enumerate() {
        for &j in c {
            cluster_of[j] = k;
        }
    }
    let cluster_tilt: Vec<f64> = (0..cfg.n_clusters).map(|_| r.sample(normal)).collect();
    let cumulative = |sign: f64| -> Vec<f64> {
        let w: Vec<f64> = cluster_tilt.iter().map(|t| (sign * t / 2.0).exp()).collect();
        let total: f64 = w.iter().sum();
        w.iter()
            .scan(0.0, |acc, v| {
                *acc += v / total;
                Some(*acc)
            })
            .collect()
    };
    let cum_a = cumulative(1.0);
    let cum_b = cumulative(-1.0);

    let mut builder = SparseBuilder::new(d);
    let mut groups = Vec::with_capacity(cfg.n_rows);
    let mut entries = Vec::new();
    for _ in 0..cfg.n_rows {
        let in_a = r.random::<f64>() < cfg.share_a;
        let (rates, cum) = if in_a { (&rate_a, &cum_a) } else { (&rate_b, &cum_b) };
        let cluster = if cfg.n_clusters > 0 && r.random::<f64>() < cfg.cluster_rate {
            let u: f64 = r.random();
            cum.iter().position(|&c| u < c).unwrap_or(cfg.n_clusters - 1)
        } else {
            usize::MAX
        };
        entries.clear();
        for j in 0..d {
            let mut p = rates[j].min(cfg.max_rate);
            if cluster != usize::MAX && cluster_of[j] == cluster {
                p = 1.0 - (1.0 - p) * (1.0 - cfg.cluster_activation);
            }
            if r.random::<f64>() < p {
                entries.push((j, 1.0));
            }
        }
        builder.push_row(&entries)?;
        groups.push(GroupId(if in_a { 0 } else { 1 }));
    }
    Ok(SyntheticCorpus {
        visits: builder.finish(),
        group_names: vec![GROUP_A.to_string(), GROUP_B.to_string()],
        groups,
        clusters,
    })
}
