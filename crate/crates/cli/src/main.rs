//! Command-line front end: data simulation, fitting, estimation, assumption
//! checks and the benchmark harness.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use purple::baselines::EmConfig;
use purple::checks::{self, AssumptionCheckReport, CheckThresholds, Verdict};
use purple::dataset::{self, load_dataset, write_dataset, DataFormat, GroupId, LabeledDataset, SplitSpec};
use purple::estimator::{Baseline, EstimatorKind, EstimatorRegistry, GroupScorer, PerGroupEstimator};
use purple::harness::{self, ExperimentSuite, SuiteName};
use purple::prevalence::{mean_where, ratio_of_means, RelativePrevalenceEstimate};
use purple::semisynth::{self, CorpusConfig, SemiSynthConfig, SymptomMode};
use purple::synth::{self, GaussSynthConfig};
use purple::train::{self, TrainConfig};
use purple::PurpleModel;

#[derive(Parser)]
#[command(name = "purple", version, about = "Relative prevalence estimation from positive-unlabeled data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset.
    #[command(subcommand)]
    Simulate(Simulate),
    /// Fit a model on every train/validation split of a dataset.
    Fit(FitArgs),
    /// Relative prevalence estimates from a fitted model.
    Estimate(EstimateArgs),
    /// Calibration and model-fit checks of the shared-classifier assumption.
    Check(CheckArgs),
    /// Run an experiment suite.
    Benchmark(BenchmarkArgs),
}

#[derive(Subcommand)]
enum Simulate {
    /// Two Gaussian groups labeled by a logistic hyperplane.
    Gauss(GaussArgs),
    /// Labels simulated from suspicious symptoms of a visit matrix.
    Semisynth(SemisynthArgs),
    /// A stand-in visit matrix with two groups and no labels.
    Corpus(CorpusArgs),
}

#[derive(Args)]
struct GaussArgs {
    #[arg(long, default_value_t = 10_000)]
    n_a: usize,
    #[arg(long, default_value_t = 20_000)]
    n_b: usize,
    #[arg(long, default_value_t = 5)]
    dims: usize,
    /// Every coordinate of group b's mean; group a's mean is −1.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    mean_b_scale: f64,
    #[arg(long, default_value_t = 16.0)]
    variance: f64,
    /// Labeling frequencies, e.g. `a=0.5,b=0.25`.
    #[arg(long, default_value = "a=0.5,b=0.25")]
    c: String,
    #[arg(long)]
    separable: bool,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    violation_delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `.csv` writes dense-csv, anything else sparse-pu.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SemisynthArgs {
    /// Dataset whose features and groups are used; its labels are ignored.
    #[arg(long)]
    visits: PathBuf,
    /// A symptom file, or one of `common`, `high-rp`, `correlated`.
    #[arg(long)]
    symptoms: String,
    #[arg(long, default_value = "a=0.5,b=0.25")]
    c: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    pool: usize,
    #[arg(long, default_value_t = 25)]
    pick: usize,
    #[arg(long, default_value_t = 50)]
    min_count: usize,
    /// Features kept in `high-rp` and `correlated` modes.
    #[arg(long)]
    top: Option<usize>,
    /// Anchor symptom file for `correlated` mode.
    #[arg(long)]
    anchors: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CorpusArgs {
    #[arg(long, default_value_t = 20_000)]
    rows: usize,
    #[arg(long, default_value_t = 1_000)]
    dims: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "purple")]
    method: String,
    /// L1 strengths to select from by validation AUC.
    #[arg(long, value_delimiter = ',')]
    lambda_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    splits: usize,
    #[arg(long, default_value_t = 100)]
    em_max_iters: usize,
    #[arg(long, default_value_t = 1e-5)]
    em_tol: f64,
    #[arg(long, default_value = "model.json")]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Group pairs `a:b`, comma separated.
    #[arg(long, value_delimiter = ',')]
    pairs: Vec<String>,
    /// Also compare this group against all other rows.
    #[arg(long)]
    vs_complement: Option<String>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 10)]
    bins: usize,
    #[arg(long, default_value = "checks.json")]
    out: PathBuf,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[arg(long)]
    suite: String,
    #[arg(long, value_delimiter = ',', default_value = "purple,negative,em,supervised")]
    methods: Vec<String>,
    #[arg(long, default_value_t = 5)]
    splits: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    jobs: Option<usize>,
}

/// A fitted model for every split, as written by `fit`.
#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    version: String,
    method: EstimatorKind,
    seed: u64,
    split: SplitSpec,
    train_config: TrainConfig,
    em: Option<EmConfig>,
    fits: Vec<SplitFit>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum SplitFit {
    Purple {
        split: usize,
        selected_lambda: f64,
        val_auc: Option<f64>,
        epochs_run: usize,
        warnings: Vec<String>,
        model: PurpleModel,
    },
    PerGroup {
        split: usize,
        groups: Vec<GroupScorer>,
    },
}

impl SplitFit {
    /// Per-row condition scores on `data`.
    fn scores(&self, data: &LabeledDataset) -> Result<Vec<f64>> {
        match self {
            SplitFit::Purple { model, .. } => {
                if model.degenerate {
                    bail!("model was fitted without observed positives");
                }
                model.check_compatible(data)?;
                Ok(model.condition_scores(data))
            }
            SplitFit::PerGroup { groups, .. } => {
                let scorers: Vec<&GroupScorer> = data
                    .group_names()
                    .iter()
                    .map(|g| {
                        groups
                            .iter()
                            .find(|s| &s.group == g)
                            .ok_or_else(|| anyhow!("model has no scorer for group `{g}`"))
                    })
                    .collect::<Result<_>>()?;
                if let Some(s) = scorers.first() {
                    if s.scorer.w.len() != data.n_dims() {
                        bail!("model has {} features, data has {}", s.scorer.w.len(), data.n_dims());
                    }
                }
                Ok(data
                    .features()
                    .rows()
                    .zip(data.groups())
                    .map(|(x, g)| scorers[g.index()].scorer.predict(x))
                    .collect())
            }
        }
    }
}

fn parse_c(spec: &str) -> Result<BTreeMap<String, f64>> {
    spec.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (g, v) = p.split_once('=').ok_or_else(|| anyhow!("expected group=value, got `{p}`"))?;
            let v: f64 = v.trim().parse().with_context(|| format!("bad labeling frequency in `{p}`"))?;
            Ok((g.trim().to_string(), v))
        })
        .collect()
}

fn load(path: &Path) -> Result<LabeledDataset> {
    load_dataset(path, DataFormat::from_path(path)).with_context(|| format!("loading {}", path.display()))
}

fn save(data: &LabeledDataset, path: &Path) -> Result<()> {
    write_dataset(data, path, DataFormat::from_path(path)).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn simulate_gauss(a: GaussArgs) -> Result<()> {
    let cfg = GaussSynthConfig {
        n_dims: a.dims,
        mean_a: vec![-1.0; a.dims],
        mean_b: vec![a.mean_b_scale; a.dims],
        variance: a.variance,
        n_a: a.n_a,
        n_b: a.n_b,
        hyperplane: vec![1.0; a.dims],
        c: parse_c(&a.c)?,
        separable: a.separable,
        violation_delta: a.violation_delta,
    };
    save(&synth::generate_gauss(&cfg, a.seed)?, &a.out)
}

fn simulate_semisynth(a: SemisynthArgs) -> Result<()> {
    let visits = load(&a.visits)?;
    let d = visits.n_dims();
    let mode = match a.symptoms.as_str() {
        s if Path::new(s).is_file() => SymptomMode::Recognized {
            indices: semisynth::load_symptom_file(Path::new(s), d)?.indices,
        },
        "common" => SymptomMode::Common { pool: a.pool, pick: a.pick },
        "high-rp" => SymptomMode::HighRp {
            min_count: a.min_count,
            top: a.top.unwrap_or(10),
        },
        "correlated" => {
            let path = a.anchors.as_deref().ok_or_else(|| anyhow!("correlated mode needs --anchors"))?;
            SymptomMode::Correlated {
                anchors: semisynth::load_symptom_file(path, d)?.indices,
                top: a.top.unwrap_or(25),
            }
        }
        other => bail!("`{other}` is neither a symptom file nor one of common, high-rp, correlated"),
    };
    let cfg = SemiSynthConfig {
        c: parse_c(&a.c)?,
        seed: a.seed,
    };
    let (data, v_sym) =
        semisynth::build_semisynth(visits.features(), visits.group_names(), visits.groups(), &mode, &cfg)?;
    log::info!("{} suspicious symptoms: {:?}", v_sym.len(), v_sym.indices);
    save(&data, &a.out)
}

fn simulate_corpus(a: CorpusArgs) -> Result<()> {
    let cfg = CorpusConfig {
        n_rows: a.rows,
        n_dims: a.dims,
        ..Default::default()
    };
    let corpus = semisynth::generate_corpus(&cfg, a.seed)?;
    let n = corpus.visits.n_rows();
    let data = LabeledDataset::new(corpus.visits, corpus.group_names, corpus.groups, vec![false; n], None, None)?;
    save(&data, &a.out)
}

fn fit(a: FitArgs) -> Result<()> {
    let method: EstimatorKind = a.method.parse()?;
    let data = load(&a.data)?;
    let split = SplitSpec {
        seed: a.seed,
        n_repeats: a.splits,
        ..Default::default()
    };
    split.validate()?;
    if a.splits == 0 {
        bail!("--splits must be positive");
    }
    let mut train_config = match method {
        EstimatorKind::Purple => TrainConfig::default(),
        _ => TrainConfig::unregularized(),
    };
    if let Some(grid) = a.lambda_grid {
        train_config.lambda_grid = grid;
    }
    train_config.validate()?;
    let em = EmConfig {
        max_iters: a.em_max_iters,
        tol: a.em_tol,
    };
    let baseline = match &method {
        EstimatorKind::Purple => None,
        EstimatorKind::Negative => Some(Baseline::Negative),
        EstimatorKind::Supervised => Some(Baseline::Supervised),
        EstimatorKind::Em => Some(Baseline::Em(em)),
        EstimatorKind::External(name) => bail!("external estimator `{name}` cannot be fitted from the command line"),
    };
    let mut fits = Vec::with_capacity(a.splits);
    for r in 0..a.splits {
        let (tr, va, _) = dataset::split(&data, &split, r)?;
        let seed = purple::rng::derive_seed(a.seed, &[r as u64]);
        let fit = match baseline {
            None => {
                let f = train::fit(&tr, &va, &train_config, seed)?;
                for w in &f.warnings {
                    log::warn!("split {r}: {w}");
                }
                SplitFit::Purple {
                    split: r,
                    selected_lambda: f.selected_lambda,
                    val_auc: f.val_auc,
                    epochs_run: f.epochs_run,
                    warnings: f.warnings,
                    model: f.model,
                }
            }
            Some(baseline) => {
                let est = PerGroupEstimator {
                    baseline,
                    config: train_config.clone(),
                };
                SplitFit::PerGroup {
                    split: r,
                    groups: est.fit_groups(&tr, &va, seed)?,
                }
            }
        };
        log::info!("fitted split {r}");
        fits.push(fit);
    }
    let file = ModelFile {
        version: harness::VERSION.to_string(),
        em: matches!(method, EstimatorKind::Em).then_some(em),
        method,
        seed: a.seed,
        split,
        train_config,
        fits,
    };
    write_json(&file, &a.out)
}

fn load_model(path: &Path) -> Result<ModelFile> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

#[derive(Serialize)]
struct EstimateReport {
    method: EstimatorKind,
    n_splits: usize,
    /// Where `true_value` comes from when present.
    true_value_source: Option<&'static str>,
    estimates: Vec<RelativePrevalenceEstimate>,
}

/// Mean of `y` over the picked rows, when `y` is known.
fn y_ratio(data: &LabeledDataset, num: impl Fn(GroupId) -> bool, den: impl Fn(GroupId) -> bool) -> Result<Option<f64>> {
    let Some(y) = data.y() else { return Ok(None) };
    let y: Vec<f64> = y.iter().map(|&v| v as u8 as f64).collect();
    let g = data.groups();
    Ok(Some(ratio_of_means(mean_where(&y, g, num), mean_where(&y, g, den), "sampled relative prevalence")?))
}

fn estimate(a: EstimateArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let data = load(&a.data)?;
    if a.pairs.is_empty() && a.vs_complement.is_none() {
        bail!("give --pairs, --vs-complement, or both");
    }
    let scores: Vec<Vec<f64>> = model.fits.iter().map(|f| f.scores(&data)).collect::<Result<_>>()?;
    let g = data.groups();
    let mut estimates = Vec::new();
    let mut push = |name_a: &str, name_b: &str, num: &dyn Fn(GroupId) -> bool, den: &dyn Fn(GroupId) -> bool| -> Result<()> {
        let per_split = scores
            .iter()
            .map(|s| ratio_of_means(mean_where(s, g, num), mean_where(s, g, den), "relative prevalence"))
            .collect::<purple::Result<Vec<f64>>>()?;
        let truth = y_ratio(&data, num, den)?;
        estimates.push(RelativePrevalenceEstimate::from_splits(name_a, name_b, per_split, truth)?);
        Ok(())
    };
    for pair in &a.pairs {
        let (ga, gb) = pair.split_once(':').ok_or_else(|| anyhow!("expected a:b, got `{pair}`"))?;
        let (ia, ib) = (data.group_id(ga)?, data.group_id(gb)?);
        push(ga, gb, &|x| x == ia, &|x| x == ib)?;
    }
    if let Some(ga) = &a.vs_complement {
        let ia = data.group_id(ga)?;
        push(ga, "complement", &|x| x == ia, &|x| x != ia)?;
    }
    let report = EstimateReport {
        method: model.method,
        n_splits: model.fits.len(),
        true_value_source: data.y().map(|_| "sampled-y"),
        estimates,
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

#[derive(Serialize)]
struct CheckFile {
    n_bins: usize,
    thresholds: CheckThresholds,
    calibration_verdict: Verdict,
    model_fit_verdict: Verdict,
    mean_delta_auc: f64,
    max_ece: f64,
    splits: Vec<AssumptionCheckReport>,
}

fn check(a: CheckArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let data = load(&a.data)?;
    if a.bins == 0 {
        bail!("--bins must be positive");
    }
    let thresholds = CheckThresholds::default();
    let mut splits = Vec::new();
    for fit in &model.fits {
        let SplitFit::Purple { split: r, model: m, .. } = fit else {
            bail!("checks need a purple model, got {}", model.method);
        };
        let (tr, va, te) = dataset::split(&data, &model.split, *r)?;
        let seed = purple::rng::derive_seed(model.seed, &[*r as u64]);
        splits.push(checks::check_model(m, &tr, &va, &te, a.bins, &model.train_config, thresholds, seed)?);
    }
    let n = splits.len() as f64;
    let max_ece = splits.iter().map(|s| s.calibration.max_ece()).fold(0.0, f64::max);
    let mean_delta_auc = splits.iter().map(|s| s.model_fit.delta_auc).sum::<f64>() / n;
    let any_warn = |f: fn(&AssumptionCheckReport) -> Verdict| {
        if splits.iter().any(|s| f(s) == Verdict::Warn) {
            Verdict::Warn
        } else {
            Verdict::Pass
        }
    };
    let file = CheckFile {
        n_bins: a.bins,
        thresholds,
        calibration_verdict: any_warn(|s| s.calibration_verdict),
        model_fit_verdict: any_warn(|s| s.model_fit_verdict),
        mean_delta_auc,
        max_ece,
        splits,
    };
    write_json(&file, &a.out)
}

/// Returns whether every cell succeeded.
fn benchmark(a: BenchmarkArgs) -> Result<bool> {
    let name: SuiteName = a.suite.parse()?;
    let methods = a
        .methods
        .iter()
        .map(|m| m.parse::<EstimatorKind>())
        .collect::<purple::Result<Vec<_>>>()?;
    if a.jobs == Some(0) {
        bail!("--jobs must be positive");
    }
    let suite = ExperimentSuite::standard(name, methods, a.splits, a.seed);
    suite.validate()?;
    let report = harness::run_suite(&suite, &EstimatorRegistry::default(), a.jobs)?;
    harness::emit_report(&report, &a.out)?;
    if report.n_failed_cells > 0 {
        log::warn!("{} cells failed", report.n_failed_cells);
    }
    Ok(report.n_failed_cells == 0)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate(Simulate::Gauss(a)) => simulate_gauss(a)?,
        Command::Simulate(Simulate::Semisynth(a)) => simulate_semisynth(a)?,
        Command::Simulate(Simulate::Corpus(a)) => simulate_corpus(a)?,
        Command::Fit(a) => fit(a)?,
        Command::Estimate(a) => estimate(a)?,
        Command::Check(a) => check(a)?,
        Command::Benchmark(a) => return benchmark(a),
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
