//! Benchmark suites: generate data for each sweep point, fit every method on
//! every split, and compare relative-prevalence estimates with the
//! generator's ground truth.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::EmConfig;
use crate::dataset::{split, GroupId, LabeledDataset, SplitSpec};
use crate::error::{PurpleError, Result};
use crate::estimator::{estimator_relative_prevalence, EstimatorKind, EstimatorRegistry};
use crate::prevalence::{mean_where, ratio_of_means, RelativePrevalenceEstimate};
use crate::rng::derive_seed;
use crate::semisynth::{build_semisynth, generate_corpus, CorpusConfig, SemiSynthConfig, SymptomMode};
use crate::stats::{paired_t_test, TTest};
use crate::synth::{generate_gauss, generate_violation, GaussSynthConfig, GROUP_A, GROUP_B};
use crate::train::TrainConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Sweep coordinate reserved for the shared semi-synthetic corpus.
const CORPUS_COORD: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuiteName {
    Separability,
    LabelFrequency,
    CovariateShift,
    Violation,
    Semisynth,
}

impl SuiteName {
    pub const ALL: [SuiteName; 5] = [
        SuiteName::Separability,
        SuiteName::LabelFrequency,
        SuiteName::CovariateShift,
        SuiteName::Violation,
        SuiteName::Semisynth,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SuiteName::Separability => "separability",
            SuiteName::LabelFrequency => "label-frequency",
            SuiteName::CovariateShift => "covariate-shift",
            SuiteName::Violation => "violation",
            SuiteName::Semisynth => "semisynth",
        }
    }
}

impl fmt::Display for SuiteName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SuiteName {
    type Err = PurpleError;

    fn from_str(s: &str) -> Result<Self> {
        SuiteName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| PurpleError::InvalidInput(format!("unknown suite `{s}`")))
    }
}

/// Symptom-selection settings of the semisynth suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemisynthSettings {
    pub corpus: CorpusConfig,
    /// Size of the stand-in "recognized" symptom list.
    pub recognized_count: usize,
    pub pool: usize,
    pub pick: usize,
    pub min_count: usize,
    pub high_rp_top: usize,
    pub n_anchors: usize,
    pub correlated_top: usize,
}

impl Default for SemisynthSettings {
    fn default() -> Self {
        SemisynthSettings {
            corpus: CorpusConfig::default(),
            recognized_count: 100,
            pool: 50,
            pick: 25,
            min_count: 50,
            high_rp_top: 10,
            n_anchors: 10,
            correlated_top: 25,
        }
    }
}

/// One point of a sweep: `setting` names the variant and `value` is the
/// swept quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub setting: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSuite {
    pub name: SuiteName,
    pub methods: Vec<EstimatorKind>,
    pub sweep: Vec<SweepPoint>,
    pub n_splits: usize,
    pub seed: u64,
    pub split_fractions: (f64, f64, f64),
    /// Base Gauss-Synth configuration; each sweep point modifies a copy.
    pub gauss: GaussSynthConfig,
    pub semisynth: SemisynthSettings,
    /// Labeling frequency of group `a` in sweeps over group `b`'s.
    pub c_a: f64,
    pub purple: TrainConfig,
    pub baseline: TrainConfig,
    pub em: EmConfig,
}

const C_B_SWEEP: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];
const SEMISYNTH_MODES: [&str; 4] = ["recognized", "common", "high-rp", "correlated"];

impl ExperimentSuite {
    /// The default sweep and generator settings for `name`.
    pub fn standard(name: SuiteName, methods: Vec<EstimatorKind>, n_splits: usize, seed: u64) -> Self {
        let point = |setting: &str, value: f64| SweepPoint {
            setting: setting.to_string(),
            value,
        };
        let sweep = match name {
            SuiteName::Separability => vec![point("nonseparable", 0.0), point("separable", 1.0)],
            SuiteName::LabelFrequency => C_B_SWEEP.iter().map(|&c| point("c_b", c)).collect(),
            SuiteName::CovariateShift => [-1.0, 0.0, 0.5, 0.75, 1.0].iter().map(|&v| point("mean_b", v)).collect(),
            SuiteName::Violation => [0.0, 0.1, 0.2, 0.3, 0.4].iter().map(|&d| point("delta", d)).collect(),
            SuiteName::Semisynth => SEMISYNTH_MODES
                .iter()
                .flat_map(|m| C_B_SWEEP.iter().map(move |&c| point(m, c)))
                .collect(),
        };
        let gauss = match name {
            // group a is the higher-prevalence group under the violation
            SuiteName::Violation => GaussSynthConfig {
                mean_a: vec![1.0; 5],
                mean_b: vec![-1.0; 5],
                ..Default::default()
            },
            _ => GaussSynthConfig::default(),
        };
        ExperimentSuite {
            name,
            methods,
            sweep,
            n_splits,
            seed,
            split_fractions: SplitSpec::default().fractions,
            gauss,
            semisynth: SemisynthSettings::default(),
            c_a: 0.5,
            purple: TrainConfig::default(),
            baseline: TrainConfig::unregularized(),
            em: EmConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(PurpleError::InvalidInput("no methods selected".into()));
        }
        if self.n_splits < 2 {
            return Err(PurpleError::InvalidInput(
                "n_splits must be at least 2 for paired t-tests".into(),
            ));
        }
        self.split_spec().validate()?;
        self.purple.validate()?;
        self.gauss.validate()?;
        if self.name == SuiteName::Semisynth {
            self.semisynth.corpus.validate()?;
        }
        Ok(())
    }

    fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            fractions: self.split_fractions,
            seed: self.seed,
            n_repeats: self.n_splits,
        }
    }

    /// SHA-256 of the canonical JSON form of the suite.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("suite configuration serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    fn point_data(&self, k: usize, corpus: Option<&crate::semisynth::SyntheticCorpus>) -> Result<LabeledDataset> {
        let p = &self.sweep[k];
        let seed = derive_seed(self.seed, &[k as u64]);
        match self.name {
            SuiteName::Separability => {
                let cfg = GaussSynthConfig {
                    separable: p.value != 0.0,
                    ..self.gauss.clone()
                };
                generate_gauss(&cfg, seed)
            }
            SuiteName::LabelFrequency => generate_gauss(&self.gauss.clone().with_c(self.c_a, p.value), seed),
            SuiteName::CovariateShift => {
                let cfg = GaussSynthConfig {
                    mean_b: vec![p.value; self.gauss.n_dims],
                    ..self.gauss.clone()
                };
                generate_gauss(&cfg, seed)
            }
            SuiteName::Violation => generate_violation(&self.gauss, p.value, seed),
            SuiteName::Semisynth => {
                let corpus = corpus.expect("corpus is generated for the semisynth suite");
                let mode = self.symptom_mode(&p.setting, corpus)?;
                let cfg = SemiSynthConfig {
                    c: BTreeMap::from([(GROUP_A.to_string(), self.c_a), (GROUP_B.to_string(), p.value)]),
                    seed,
                };
                build_semisynth(&corpus.visits, &corpus.group_names, &corpus.groups, &mode, &cfg).map(|(d, _)| d)
            }
        }
    }

    fn symptom_mode(&self, setting: &str, corpus: &crate::semisynth::SyntheticCorpus) -> Result<SymptomMode> {
        let s = &self.semisynth;
        Ok(match setting {
            "recognized" => SymptomMode::Recognized {
                indices: stand_in_recognized(corpus, s.recognized_count, s.pool),
            },
            "common" => SymptomMode::Common {
                pool: s.pool,
                pick: s.pick,
            },
            "high-rp" => SymptomMode::HighRp {
                min_count: s.min_count,
                top: s.high_rp_top,
            },
            "correlated" => SymptomMode::Correlated {
                anchors: corpus
                    .clusters
                    .first()
                    .map(|c| c.iter().copied().take(s.n_anchors).collect())
                    .unwrap_or_default(),
                top: s.correlated_top,
            },
            other => return Err(PurpleError::InvalidInput(format!("unknown symptom mode `{other}`"))),
        })
    }
}

/// A fixed list standing in for externally curated symptom codes: every
/// other feature in frequency order after the `skip` most frequent.
fn stand_in_recognized(corpus: &crate::semisynth::SyntheticCorpus, count: usize, skip: usize) -> Vec<usize> {
    let mut ranked: Vec<(usize, usize)> = corpus.visits.column_counts().into_iter().enumerate().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.iter().skip(skip).step_by(2).take(count).map(|(j, _)| *j).collect()
}

/// Mean `latent_p` in group `a` over mean `latent_p` in group `b`.
pub fn true_relative_prevalence(data: &LabeledDataset, group_a: &str, group_b: &str) -> Result<f64> {
    let p = data
        .latent_p()
        .ok_or_else(|| PurpleError::InvalidInput("true relative prevalence needs latent_p".into()))?;
    group_ratio(p, data, group_a, group_b)
}

/// The same ratio computed from the sampled labels `y`.
pub fn sampled_relative_prevalence(data: &LabeledDataset, group_a: &str, group_b: &str) -> Result<f64> {
    let y: Vec<f64> = data
        .y()
        .ok_or_else(|| PurpleError::InvalidInput("sampled relative prevalence needs y".into()))?
        .iter()
        .map(|&v| v as u8 as f64)
        .collect();
    group_ratio(&y, data, group_a, group_b)
}

fn group_ratio(values: &[f64], data: &LabeledDataset, group_a: &str, group_b: &str) -> Result<f64> {
    let a = data.group_id(group_a)?;
    let b = data.group_id(group_b)?;
    let g: &[GroupId] = data.groups();
    ratio_of_means(
        mean_where(values, g, |x| x == a),
        mean_where(values, g, |x| x == b),
        "true relative prevalence",
    )
}

/// Outcome of one (method, sweep point, split) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub method: String,
    pub setting: String,
    pub sweep_value: f64,
    pub split: usize,
    pub rp_true: f64,
    pub rp_true_sampled: Option<f64>,
    pub rp_estimate: Option<f64>,
    pub ratio_to_true: Option<f64>,
    pub converged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub setting: String,
    pub sweep_value: f64,
    /// Over the splits that succeeded; `None` if every split failed.
    pub estimate: Option<RelativePrevalenceEstimate>,
    pub ratios_to_true: Vec<f64>,
    pub mean_ratio_to_true: Option<f64>,
    /// `|ratio_to_true − 1|` per successful split.
    pub accuracy: Vec<f64>,
    pub n_failed: usize,
    pub all_converged: bool,
    /// Paired test of this method's accuracy against PURPLE's, over splits
    /// where both succeeded.
    pub t_test_vs_purple: Option<TTest>,
    pub t_test_note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub suite: SuiteName,
    pub seed: u64,
    pub config_hash: String,
    pub config: ExperimentSuite,
    pub notes: BTreeMap<String, String>,
    pub summaries: Vec<MethodSummary>,
    pub cells: Vec<CellResult>,
    pub n_failed_cells: usize,
}

impl RunReport {
    pub fn summary(&self, method: &str, setting: &str, value: f64) -> Option<&MethodSummary> {
        self.summaries
            .iter()
            .find(|s| s.method == method && s.setting == setting && s.sweep_value == value)
    }
}

fn method_coord(kind: &EstimatorKind) -> u64 {
    let digest = Sha256::digest(kind.to_string().as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Runs every (method, sweep point, split) cell, on `jobs` threads when
/// given. Results do not depend on the thread count.
pub fn run_suite(suite: &ExperimentSuite, registry: &EstimatorRegistry, jobs: Option<usize>) -> Result<RunReport> {
    suite.validate()?;
    let estimators = suite
        .methods
        .iter()
        .map(|m| registry.resolve(m, &suite.purple, &suite.baseline, &suite.em))
        .collect::<Result<Vec<_>>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| PurpleError::InvalidInput(format!("thread pool: {e}")))?;

    pool.install(|| -> Result<RunReport> {
        let corpus = match suite.name {
            SuiteName::Semisynth => Some(generate_corpus(
                &suite.semisynth.corpus,
                derive_seed(suite.seed, &[CORPUS_COORD]),
            )?),
            _ => None,
        };
        let data: Vec<LabeledDataset> = (0..suite.sweep.len())
            .into_par_iter()
            .map(|k| suite.point_data(k, corpus.as_ref()))
            .collect::<Result<_>>()?;
        let spec = suite.split_spec();
        let parts: Vec<Vec<(LabeledDataset, LabeledDataset, LabeledDataset)>> = data
            .par_iter()
            .map(|d| (0..suite.n_splits).map(|r| split(d, &spec, r)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;

        let coords: Vec<(usize, usize, usize)> = (0..suite.sweep.len())
            .flat_map(|k| (0..suite.n_splits).flat_map(move |r| (0..suite.methods.len()).map(move |m| (k, r, m))))
            .collect();
        let cells: Vec<CellResult> = coords
            .par_iter()
            .map(|&(k, r, m)| {
                let (train, val, test) = &parts[k][r];
                let point = &suite.sweep[k];
                let kind = &suite.methods[m];
                let rp_true = true_relative_prevalence(test, GROUP_A, GROUP_B)?;
                let rp_true_sampled = sampled_relative_prevalence(test, GROUP_A, GROUP_B).ok();
                let seed = derive_seed(suite.seed, &[k as u64, r as u64, method_coord(kind)]);
                let outcome =
                    estimator_relative_prevalence(estimators[m].as_ref(), train, val, test, GROUP_A, GROUP_B, seed);
                let mut cell = CellResult {
                    method: kind.to_string(),
                    setting: point.setting.clone(),
                    sweep_value: point.value,
                    split: r,
                    rp_true,
                    rp_true_sampled,
                    rp_estimate: None,
                    ratio_to_true: None,
                    converged: false,
                    error: None,
                };
                match outcome {
                    Ok(est) => {
                        cell.rp_estimate = Some(est.estimate.value);
                        cell.ratio_to_true = Some(est.estimate.value / rp_true);
                        cell.converged = est.converged;
                    }
                    Err(e) => {
                        log::warn!("{} at {}={} split {r} failed: {e}", cell.method, point.setting, point.value);
                        cell.error = Some(e.to_string());
                    }
                }
                Ok(cell)
            })
            .collect::<Result<_>>()?;
        Ok(assemble(suite, cells))
    })
}

fn assemble(suite: &ExperimentSuite, cells: Vec<CellResult>) -> RunReport {
    let mut summaries = Vec::new();
    for point in &suite.sweep {
        let at_point: Vec<&CellResult> = cells
            .iter()
            .filter(|c| c.setting == point.setting && c.sweep_value == point.value)
            .collect();
        let per_split = |method: &str| -> Vec<Option<f64>> {
            (0..suite.n_splits)
                .map(|r| {
                    at_point
                        .iter()
                        .find(|c| c.method == method && c.split == r)
                        .and_then(|c| c.ratio_to_true)
                })
                .collect()
        };
        let purple_ratios = per_split("purple");
        for kind in &suite.methods {
            let method = kind.to_string();
            let mine: Vec<&&CellResult> = at_point.iter().filter(|c| c.method == method).collect();
            let ok: Vec<&&CellResult> = mine.iter().copied().filter(|c| c.error.is_none()).collect();
            let values: Vec<f64> = ok.iter().filter_map(|c| c.rp_estimate).collect();
            let ratios: Vec<f64> = ok.iter().filter_map(|c| c.ratio_to_true).collect();
            let estimate = if values.is_empty() {
                None
            } else {
                let true_mean = ok.iter().map(|c| c.rp_true).sum::<f64>() / ok.len() as f64;
                RelativePrevalenceEstimate::from_splits(GROUP_A, GROUP_B, values, Some(true_mean)).ok()
            };
            let (t_test, note) = if method == "purple" || !suite.methods.contains(&EstimatorKind::Purple) {
                (None, None)
            } else {
                let pairs: Vec<(f64, f64)> = per_split(&method)
                    .into_iter()
                    .zip(&purple_ratios)
                    .filter_map(|(a, b)| Some(((a? - 1.0).abs(), (b.as_ref()? - 1.0).abs())))
                    .collect();
                let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
                match paired_t_test(&a, &b) {
                    Ok(t) => (Some(t), None),
                    Err(e) => (None, Some(e.to_string())),
                }
            };
            summaries.push(MethodSummary {
                method,
                setting: point.setting.clone(),
                sweep_value: point.value,
                estimate,
                mean_ratio_to_true: (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64),
                accuracy: ratios.iter().map(|r| (r - 1.0).abs()).collect(),
                ratios_to_true: ratios,
                n_failed: mine.len() - ok.len(),
                all_converged: ok.iter().all(|c| c.converged),
                t_test_vs_purple: t_test,
                t_test_note: note,
            });
        }
    }
    let n_failed_cells = cells.iter().filter(|c| c.error.is_some()).count();
    let notes = BTreeMap::from([
        (
            "accuracy".to_string(),
            "|ratio_to_true - 1| per split; t-tests are paired over splits where both methods succeeded".to_string(),
        ),
        (
            "rp_true".to_string(),
            "mean latent probability ratio on the test partition; rp_true_sampled uses the drawn labels y".to_string(),
        ),
        (
            "em_initial_c".to_string(),
            "twice the observed positive rate, clamped to [0.01, 0.99]; the first E-step uses the Negative fit".to_string(),
        ),
        (
            "defaults".to_string(),
            "labeling frequencies and sweep grids are harness defaults"
                .to_string(),
        ),
    ]);
    RunReport {
        version: VERSION.to_string(),
        suite: suite.name,
        seed: suite.seed,
        config_hash: suite.config_hash(),
        config: suite.clone(),
        notes,
        summaries,
        cells,
        n_failed_cells,
    }
}

fn csv_float(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes `report.json` and `results.csv` (one row per successful cell) into
/// `out_dir`, creating it if needed.
pub fn emit_report(report: &RunReport, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| PurpleError::io(out_dir, e))?;
    let json_path = out_dir.join("report.json");
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    fs::write(&json_path, json).map_err(|e| PurpleError::io(&json_path, e))?;

    let mut csv = String::from(
        "suite,method,setting,sweep_value,split,rp_estimate,rp_true,ratio_to_true,rp_true_sampled,converged\n",
    );
    for c in report.cells.iter().filter(|c| c.error.is_none()) {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            report.suite,
            c.method,
            c.setting,
            c.sweep_value,
            c.split,
            csv_float(c.rp_estimate),
            c.rp_true,
            csv_float(c.ratio_to_true),
            csv_float(c.rp_true_sampled),
            c.converged
        ));
    }
    let csv_path = out_dir.join("results.csv");
    fs::write(&csv_path, csv).map_err(|e| PurpleError::io(&csv_path, e))
}
