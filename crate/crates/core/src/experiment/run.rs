use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ClassConfig, ExperimentConfig, MethodKind, ProcessConfig};
use crate::datagen::{
    load_feature_csv, make_gaussian_mixture_spec, make_lecam_spec, sample_process, write_oracle_csv, CsvDataset,
    DiscreteSpec, LeCamSpec, LinearBoundary, ProcessSpec, ThresholdInstance,
};
use crate::error::{Error, Result};
use crate::eval::{
    aggregate_sweep, average_precision, coverage_curve_from_scores, disagreement_mass, informative_conditional_risk,
    margin_bound_check, mean_sd, sample_complexity_sweep, selective_risk_from_scores, write_sweep_csv, CoverageCurve,
    Oracle, SweepPlan, SweepRow, SweepSummary, TheoryCheckResult,
};
use crate::losses::{selector_risk_from_decisions, Normalization};
use crate::models::{enumerate_feature_thresholds, ScoreModel};
use crate::training::{
    alternate_minimize, correctness, erm_classifier, erm_selector, isa_train, selection, train_predictor,
    ConfidenceSelector, Learner, TrainTrace,
};
use crate::types::{observed, LabeledSample, OracleSample, Role, RngSeed, ScoredHypothesis};

pub const SCHEMA_VERSION: u32 = 1;

// RNG streams derived from each run seed
const TRAIN_STREAM: u64 = 0;
const EVAL_STREAM: u64 = 1;
const PREDICTOR_STREAM: u64 = 2;
const SELECTOR_STREAM: u64 = 3;
const PROCESS_STREAM: u64 = 4;

/// Per-seed evaluation, one row of `metrics.csv`. Optional columns are empty
/// when the data carries no oracle for them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub seed: u64,
    pub n_train: usize,
    pub n_eval: usize,
    pub train_error: f64,
    pub eval_error: f64,
    /// Fraction of evaluation points with `g > 1/2`.
    pub coverage: f64,
    /// Mean-normalized 0-1 selector risk on the evaluation sample.
    pub selector_risk: f64,
    pub sr_full: f64,
    pub sr_at_alpha: Option<f64>,
    pub ap: Option<f64>,
    pub disagreement: Option<f64>,
    /// Exact informative-conditional risk of the returned predictor.
    pub f_cond_risk: Option<f64>,
    /// Same for the plain ERM predictor the alternation started from.
    pub f_hat_cond_risk: Option<f64>,
}

impl SeedMetrics {
    pub fn numeric_fields(&self) -> Vec<(&'static str, Option<f64>)> {
        vec![
            ("train_error", Some(self.train_error)),
            ("eval_error", Some(self.eval_error)),
            ("coverage", Some(self.coverage)),
            ("selector_risk", Some(self.selector_risk)),
            ("sr_full", Some(self.sr_full)),
            ("sr_at_alpha", self.sr_at_alpha),
            ("ap", self.ap),
            ("disagreement", self.disagreement),
            ("f_cond_risk", self.f_cond_risk),
            ("f_hat_cond_risk", self.f_hat_cond_risk),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single seed.
    pub sd: f64,
    pub count: usize,
}

/// Mean and sd of every metric over the seeds that report it.
pub fn aggregate_metrics(rows: &[SeedMetrics]) -> BTreeMap<String, Aggregate> {
    let mut cols: BTreeMap<&'static str, Vec<f64>> = BTreeMap::new();
    for r in rows {
        for (name, v) in r.numeric_fields() {
            let col = cols.entry(name).or_default();
            if let Some(v) = v {
                col.push(v);
            }
        }
    }
    cols.into_iter()
        .filter(|(_, v)| !v.is_empty())
        .map(|(k, v)| {
            let (mean, sd) = mean_sd(&v);
            (k.to_string(), Aggregate { mean, sd, count: v.len() })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub seeds: Vec<SeedMetrics>,
    pub aggregates: BTreeMap<String, Aggregate>,
    pub theory_checks: Vec<TheoryCheckResult>,
    /// Why a theory check was skipped, if it was.
    pub notes: Vec<String>,
    pub failures: Vec<SeedFailure>,
    /// False when any seed failed; the outputs of the other seeds are kept.
    pub complete: bool,
    pub wall_clock_secs: f64,
    pub artifacts: Vec<PathBuf>,
}

/// Where the data of one seed comes from.
#[derive(Debug, Clone)]
pub(crate) enum Source {
    Discrete(DiscreteSpec),
    Process(ProcessSpec),
    Csv(CsvDataset),
}

impl Source {
    fn discrete(&self) -> Option<&DiscreteSpec> {
        match self {
            Source::Discrete(s) => Some(s),
            _ => None,
        }
    }
}

pub(crate) fn build_source(cfg: &ExperimentConfig, seed: u64) -> Result<Source> {
    let lb = cfg.lambda_bar()?;
    let alpha = cfg.noise.alpha;
    Ok(match &cfg.process {
        ProcessConfig::Threshold(t) => Source::Discrete(
            ThresholdInstance {
                atoms: t.atoms,
                alpha,
                lambda_bar: lb,
                lambda_informative: None,
                lambda_uninformative: None,
                f_boundary: t.f_boundary,
                informative_side: t.informative_side,
            }
            .build()?,
        ),
        ProcessConfig::Discrete(d) => {
            Source::Discrete(DiscreteSpec::random(d.atoms, lb, &mut RngSeed(d.spec_seed).rng())?)
        }
        ProcessConfig::GaussianMixture(g) => Source::Process(make_gaussian_mixture_spec(
            g.centers_informative.clone(),
            g.centers_uninformative.clone(),
            g.stddev,
            alpha,
            lb,
            LinearBoundary::new(g.boundary_w.clone(), g.boundary_b),
        )?),
        ProcessConfig::Lecam(l) => Source::Process(make_lecam_spec(
            &LeCamSpec {
                d: l.d,
                alpha,
                lambda_bar: lb,
                epsilon: l.epsilon,
                sigma: None,
            },
            RngSeed(seed).derive(PROCESS_STREAM),
        )?),
        ProcessConfig::Csv(c) => Source::Csv(load_feature_csv(&c.path).map_err(|e| match e {
            Error::Io(io) => Error::Config(format!("process.path: {}: {io}", c.path.display())),
            other => other,
        })?),
    })
}

/// Observed samples plus the oracle view when one exists.
#[derive(Debug, Clone)]
pub(crate) struct Split {
    pub obs: Vec<LabeledSample>,
    pub oracle: Option<Vec<OracleSample>>,
}

impl Split {
    fn from_oracle(data: Vec<OracleSample>) -> Self {
        Split {
            obs: observed(&data),
            oracle: Some(data),
        }
    }
}

fn process_of(source: &Source) -> Result<Option<ProcessSpec>> {
    Ok(match source {
        Source::Discrete(s) => Some(s.to_process()?),
        Source::Process(p) => Some(p.clone()),
        Source::Csv(_) => None,
    })
}

pub(crate) fn draw(source: &Source, n: usize, seed: RngSeed) -> Result<Split> {
    match (process_of(source)?, source) {
        (Some(p), _) => Ok(Split::from_oracle(sample_process(&p, n, seed)?)),
        (None, Source::Csv(ds)) => Ok(match ds.regions {
            Some(_) => Split::from_oracle(ds.to_oracle()?),
            None => Split {
                obs: ds.samples.clone(),
                oracle: None,
            },
        }),
        (None, _) => unreachable!("only csv sources lack a process"),
    }
}

fn learner(c: &ClassConfig, dim: usize, seed: u64) -> Result<Learner> {
    Ok(match c {
        ClassConfig::Thresholds {
            feature,
            lo,
            hi,
            steps,
            orientation,
        } => {
            if *feature >= dim {
                return Err(Error::Config(format!(
                    "threshold feature {feature} out of range for {dim}-dimensional data"
                )));
            }
            Learner::Finite(enumerate_feature_thresholds(*feature, *lo, *hi, *steps, *orientation)?)
        }
        ClassConfig::Linear { loss, train } => {
            let mut cfg = train.clone();
            cfg.seed = RngSeed(train.seed).derive(seed).0;
            Learner::Linear { loss: *loss, cfg }
        }
    })
}

pub(crate) struct Fit {
    pub f: ScoredHypothesis,
    pub g: ScoredHypothesis,
    pub f_hat: Option<ScoredHypothesis>,
    pub trace: TrainTrace,
}

pub(crate) fn fit_method(cfg: &ExperimentConfig, train: &Split, seed: u64) -> Result<Fit> {
    let data = &train.obs;
    let dim = data.first().ok_or(Error::EmptyData)?.x.dim();
    let m = &cfg.method;
    match m.kind {
        MethodKind::Erm => {
            let f = erm_classifier(data, &learner(&m.predictor_class, dim, seed)?)?;
            let g = erm_selector(data, &f.hypothesis, &learner(&m.selector_class, dim, seed)?, m.beta)?;
            Ok(Fit {
                f: f.hypothesis,
                g: g.hypothesis,
                f_hat: None,
                trace: TrainTrace::default(),
            })
        }
        MethodKind::Alternating => {
            let class_f = learner(&m.predictor_class, dim, seed)?;
            let class_g = learner(&m.selector_class, dim, seed)?;
            let alt = alternate_minimize(data, &class_f, &class_g, m.beta, m.rounds)?;
            Ok(Fit {
                f: alt.f_tilde.hypothesis,
                g: alt.g_hat.hypothesis,
                f_hat: Some(alt.f_erm.hypothesis),
                trace: alt.trace,
            })
        }
        MethodKind::Isa => {
            let mut isa = m.isa.clone();
            isa.beta = m.beta;
            isa.predictor_cfg.seed = RngSeed(isa.predictor_cfg.seed).derive(seed).0;
            isa.selector_cfg.seed = RngSeed(isa.selector_cfg.seed).derive(seed).0;
            let p = ScoreModel::build(dim, &m.hidden, RngSeed(seed).derive(PREDICTOR_STREAM))?;
            let s = ScoreModel::build(dim, &m.hidden, RngSeed(seed).derive(SELECTOR_STREAM))?;
            let regions: Option<Vec<_>> = train.oracle.as_ref().map(|o| o.iter().map(|s| s.region).collect());
            let out = isa_train(data, p, s, &isa, regions.as_deref())?;
            Ok(Fit {
                f: ScoredHypothesis::new(Role::Predictor, Arc::new(out.predictor)),
                g: ScoredHypothesis::new(Role::Selector, Arc::new(out.selector)),
                f_hat: None,
                trace: out.trace,
            })
        }
        MethodKind::ConfidenceBaseline => {
            let mut pcfg = m.isa.predictor_cfg.clone();
            pcfg.epochs = m.isa.total_epochs;
            pcfg.seed = RngSeed(pcfg.seed).derive(seed).0;
            let p = ScoreModel::build(dim, &m.hidden, RngSeed(seed).derive(PREDICTOR_STREAM))?;
            let (p, trace) = train_predictor(data, p, &pcfg)?;
            Ok(Fit {
                f: ScoredHypothesis::new(Role::Predictor, Arc::new(p.clone())),
                g: ScoredHypothesis::new(Role::Selector, Arc::new(ConfidenceSelector(p))),
                f_hat: None,
                trace,
            })
        }
    }
}

fn error_rate(f: &ScoredHypothesis, data: &[LabeledSample]) -> Result<f64> {
    let c = correctness(f, data)?;
    Ok(c.iter().filter(|&&ok| !ok).count() as f64 / c.len() as f64)
}

pub(crate) struct Evaluation {
    pub metrics: SeedMetrics,
    pub curve: CoverageCurve,
}

pub(crate) fn evaluate(
    cfg: &ExperimentConfig,
    source: &Source,
    fit: &Fit,
    train: &Split,
    eval: &Split,
    seed: u64,
) -> Result<Evaluation> {
    let data = &eval.obs;
    let correct = correctness(&fit.f, data)?;
    let wrong: Vec<bool> = correct.iter().map(|c| !c).collect();
    let g_scores: Vec<f64> = data.iter().map(|s| fit.g.score(&s.x)).collect();
    let select = selection(&fit.g, data)?;
    let n = data.len() as f64;
    let spec = source.discrete();

    let alpha = match (source, &eval.oracle) {
        (Source::Discrete(s), _) => Some(s.informative_mass()),
        (Source::Process(p), _) => Some(p.alpha()),
        (Source::Csv(_), Some(o)) => {
            let k = o.iter().filter(|s| s.region.is_informative()).count();
            (k > 0).then(|| k as f64 / o.len() as f64)
        }
        (Source::Csv(_), None) => None,
    };
    let ap = match &eval.oracle {
        Some(o) if o.iter().any(|s| s.region.is_informative()) => {
            let rel: Vec<bool> = o.iter().map(|s| s.region.is_informative()).collect();
            Some(average_precision(&g_scores, &rel)?)
        }
        _ => None,
    };
    let disagreement = match (spec, &eval.oracle) {
        (Some(s), _) => Some(disagreement_mass(&fit.g, Oracle::Spec(s))?),
        (None, Some(o)) => Some(disagreement_mass(&fit.g, Oracle::Samples(o))?),
        (None, None) => None,
    };
    let f_cond_risk = spec.map(|s| informative_conditional_risk(&fit.f, s)).transpose()?;
    let f_hat_cond_risk = match (spec, &fit.f_hat) {
        (Some(s), Some(f)) => Some(informative_conditional_risk(f, s)?),
        _ => None,
    };
    let metrics = SeedMetrics {
        seed,
        n_train: train.obs.len(),
        n_eval: data.len(),
        train_error: error_rate(&fit.f, &train.obs)?,
        eval_error: wrong.iter().filter(|&&w| w).count() as f64 / n,
        coverage: select.iter().filter(|&&s| s).count() as f64 / n,
        selector_risk: selector_risk_from_decisions(&correct, &select, cfg.method.beta, Normalization::Mean)?,
        sr_full: selective_risk_from_scores(&g_scores, &wrong, 1.0)?.risk,
        sr_at_alpha: alpha
            .map(|a| selective_risk_from_scores(&g_scores, &wrong, a).map(|s| s.risk))
            .transpose()?,
        ap,
        disagreement,
        f_cond_risk,
        f_hat_cond_risk,
    };
    let curve = coverage_curve_from_scores(&g_scores, &wrong, &cfg.eval.coverage_grid)?;
    Ok(Evaluation { metrics, curve })
}

fn check_finite(what: &str, values: impl IntoIterator<Item = f64>) -> Result<()> {
    for v in values {
        if !v.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite value {v} in {what}")));
        }
    }
    Ok(())
}

fn write_csv_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_metrics_csv(path: &Path, rows: &[SeedMetrics]) -> Result<()> {
    for r in rows {
        check_finite("metrics", r.numeric_fields().into_iter().filter_map(|(_, v)| v))?;
    }
    write_csv_rows(path, rows)
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<SeedMetrics>> {
    let mut rdr = csv::Reader::from_path(path)?;
    Ok(rdr.deserialize().collect::<std::result::Result<Vec<SeedMetrics>, _>>()?)
}

pub fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed_{seed}"))
}

struct SeedOutcome {
    metrics: SeedMetrics,
    check: Option<std::result::Result<TheoryCheckResult, String>>,
    artifacts: Vec<PathBuf>,
}

fn run_seed(cfg: &ExperimentConfig, out: &Path, seed: u64) -> Result<SeedOutcome> {
    let source = build_source(cfg, seed)?;
    let train = draw(&source, cfg.eval.n, RngSeed(seed).derive(TRAIN_STREAM))?;
    let eval = if cfg.eval.test_n > 0 && !matches!(source, Source::Csv(_)) {
        draw(&source, cfg.eval.test_n, RngSeed(seed).derive(EVAL_STREAM))?
    } else {
        train.clone()
    };
    let fit = fit_method(cfg, &train, seed)?;
    let ev = evaluate(cfg, &source, &fit, &train, &eval, seed)?;

    let check = source.discrete().map(|spec| {
        let g: Vec<_> = spec
            .atoms()
            .iter()
            .map(|a| fit.g.decide(&a.x))
            .collect::<Result<_>>()?;
        Ok::<_, Error>(
            margin_bound_check(spec, &g, cfg.method.beta, format!("seed {seed}: margin of the fitted selector"))
                .map_err(|e| format!("seed {seed}: margin check skipped: {e}")),
        )
    });
    let check = check.transpose()?;

    for r in &fit.trace.records {
        check_finite(
            "trace",
            [r.predictor_loss, r.selector_loss, r.selector_risk, r.coverage]
                .into_iter()
                .chain(r.ap),
        )?;
    }
    for p in &ev.curve.points {
        check_finite("coverage curve", [p.coverage, p.selective_risk, p.threshold, p.achieved])?;
    }
    let dir = seed_dir(out, seed);
    fs::create_dir_all(&dir)?;
    let trace_path = dir.join("trace.csv");
    fit.trace.write_csv(BufWriter::new(File::create(&trace_path)?))?;
    let cov_path = dir.join("coverage.csv");
    write_csv_rows(&cov_path, &ev.curve.points)?;
    let metrics_path = dir.join("metrics.csv");
    write_metrics_csv(&metrics_path, std::slice::from_ref(&ev.metrics))?;
    Ok(SeedOutcome {
        metrics: ev.metrics,
        check,
        artifacts: vec![trace_path, cov_path, metrics_path],
    })
}

pub(crate) fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
}

/// Runs every seed on a pool of `jobs` workers and writes the report and CSVs
/// under `out`. Seed failures are recorded in the report rather than returned.
pub fn run(cfg: &ExperimentConfig, out: &Path, jobs: usize) -> Result<RunReport> {
    let start = Instant::now();
    cfg.validate()?;
    let cfg = cfg.resolved()?;
    fs::create_dir_all(out)?;
    let outcomes: Vec<(u64, Result<SeedOutcome>)> =
        pool(jobs)?.install(|| cfg.eval.seeds.par_iter().map(|&s| (s, run_seed(&cfg, out, s))).collect());

    let mut seeds = Vec::new();
    let mut checks = Vec::new();
    let mut notes = Vec::new();
    let mut failures = Vec::new();
    let mut artifacts = Vec::new();
    for (seed, o) in outcomes {
        match o {
            Ok(o) => {
                seeds.push(o.metrics);
                match o.check {
                    Some(Ok(c)) => checks.push(c),
                    Some(Err(note)) => notes.push(note),
                    None => {}
                }
                artifacts.extend(o.artifacts);
            }
            Err(e) => failures.push(SeedFailure {
                seed,
                error: e.to_string(),
            }),
        }
    }
    let metrics_path = out.join("metrics.csv");
    write_metrics_csv(&metrics_path, &seeds)?;
    artifacts.push(metrics_path);

    if !cfg.eval.n_grid.is_empty() && cfg.method.kind == MethodKind::Alternating {
        match sweep_files(&cfg, out, jobs) {
            Ok((_, _, paths)) => artifacts.extend(paths),
            Err(Error::Config(msg)) => notes.push(format!("sweep skipped: {msg}")),
            Err(e) => return Err(e),
        }
    }
    let config_path = out.join("config.resolved.toml");
    fs::write(&config_path, cfg.to_toml_string()?)?;
    artifacts.push(config_path);
    let report_path = out.join("report.json");
    artifacts.push(report_path.clone());

    let report = RunReport {
        schema_version: SCHEMA_VERSION,
        aggregates: aggregate_metrics(&seeds),
        complete: failures.is_empty(),
        config: cfg,
        seeds,
        theory_checks: checks,
        notes,
        failures,
        wall_clock_secs: start.elapsed().as_secs_f64(),
        artifacts,
    };
    fs::write(&report_path, serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}

/// Writes `data_seed_<k>.csv` for every seed: the training draw with its
/// `region` and `z` oracle columns.
pub fn gen(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    if matches!(cfg.process, ProcessConfig::Csv(_)) {
        return Err(Error::Config("process.kind: gen needs a synthetic process, not csv".into()));
    }
    fs::create_dir_all(out)?;
    let mut paths = Vec::new();
    for &seed in &cfg.eval.seeds {
        let source = build_source(cfg, seed)?;
        let split = draw(&source, cfg.eval.n, RngSeed(seed).derive(TRAIN_STREAM))?;
        let path = out.join(format!("data_seed_{seed}.csv"));
        write_oracle_csv(BufWriter::new(File::create(&path)?), split.oracle.as_deref().unwrap_or(&[]))?;
        paths.push(path);
    }
    Ok(paths)
}

pub const DEFAULT_N_GRID: [usize; 6] = [125, 250, 500, 1000, 2000, 4000];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub rows: Vec<SweepRow>,
    pub summary: Vec<SweepSummary>,
}

/// Discrete spec per noise gap in `eval.lambda_grid` (or the configured gap).
pub(crate) fn sweep_specs(cfg: &ExperimentConfig) -> Result<Vec<DiscreteSpec>> {
    let grid = if cfg.eval.lambda_grid.is_empty() {
        vec![cfg.lambda_bar()?]
    } else {
        cfg.eval.lambda_grid.clone()
    };
    grid.into_iter()
        .map(|lb| {
            let mut c = cfg.clone();
            c.noise.lambda_bar = Some(lb);
            c.noise.tau_informative = None;
            c.noise.tau_uninformative = None;
            match build_source(&c, 0)? {
                Source::Discrete(s) => Ok(s),
                _ => Err(Error::Config(
                    "process.kind: sweeps need an exact oracle (threshold or discrete)".into(),
                )),
            }
        })
        .collect()
}

fn sweep_files(cfg: &ExperimentConfig, out: &Path, jobs: usize) -> Result<(Vec<SweepRow>, Vec<SweepSummary>, Vec<PathBuf>)> {
    let specs = sweep_specs(cfg)?;
    let class_f = learner(&cfg.method.predictor_class, 1, 0)?;
    let class_g = learner(&cfg.method.selector_class, 1, 0)?;
    let n_grid: Vec<usize> = if cfg.eval.n_grid.is_empty() {
        DEFAULT_N_GRID.to_vec()
    } else {
        cfg.eval.n_grid.clone()
    };
    let plan = SweepPlan {
        specs: &specs,
        class_f: &class_f,
        class_g: &class_g,
        beta: cfg.method.beta,
        rounds: cfg.method.rounds,
        n_grid: &n_grid,
        seeds: &cfg.eval.seeds,
    };
    let rows = pool(jobs)?.install(|| sample_complexity_sweep(&plan))?;
    let summary = aggregate_sweep(&rows);
    fs::create_dir_all(out)?;
    let rows_path = out.join("sweep.csv");
    write_sweep_csv(&rows, BufWriter::new(File::create(&rows_path)?))?;
    let summary_path = out.join("sweep_summary.csv");
    write_csv_rows(&summary_path, &summary)?;
    Ok((rows, summary, vec![rows_path, summary_path]))
}

/// Sample-complexity grid over `eval.n_grid` x `eval.lambda_grid` x seeds with
/// the alternating estimator. Writes `sweep.csv`, `sweep_summary.csv` and
/// `sweep.json`.
pub fn sweep(cfg: &ExperimentConfig, out: &Path, jobs: usize) -> Result<SweepReport> {
    cfg.validate()?;
    let (rows, summary, _) = sweep_files(cfg, out, jobs)?;
    let report = SweepReport {
        schema_version: SCHEMA_VERSION,
        rows,
        summary,
    };
    fs::write(out.join("sweep.json"), serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub schema_version: u32,
    pub seeds: Vec<u64>,
    pub aggregates: BTreeMap<String, Aggregate>,
}

/// Re-aggregates every `seed_<k>/metrics.csv` under `out`, in seed order, and
/// rewrites `metrics.csv` and `aggregates.json`.
pub fn report(out: &Path) -> Result<AggregateReport> {
    let mut found: Vec<(u64, PathBuf)> = Vec::new();
    for entry in fs::read_dir(out)? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        let Some(k) = name.strip_prefix("seed_").and_then(|k| k.parse::<u64>().ok()) else {
            continue;
        };
        let path = entry.path().join("metrics.csv");
        if path.is_file() {
            found.push((k, path));
        }
    }
    if found.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no seed_<k>/metrics.csv under {}",
            out.display()
        )));
    }
    found.sort();
    let mut rows = Vec::new();
    for (_, p) in &found {
        rows.extend(read_metrics_csv(p)?);
    }
    write_metrics_csv(&out.join("metrics.csv"), &rows)?;
    let agg = AggregateReport {
        schema_version: SCHEMA_VERSION,
        seeds: rows.iter().map(|r| r.seed).collect(),
        aggregates: aggregate_metrics(&rows),
    };
    fs::write(out.join("aggregates.json"), serde_json::to_string_pretty(&agg)?)?;
    Ok(agg)
}
