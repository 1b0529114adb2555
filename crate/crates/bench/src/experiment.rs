//! Experiment orchestration: per-seed data generation and training, metric
//! logging, CSV emission, manifests and the epsilon sweep.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use valab_core::analysis::{adv_error, advantage_of, format_float, q_error, sample_advantage_norm, write_metric_csv, Metric, MetricRecord};
use valab_core::exact::{greedy_actions, performance_of_actions, solve_q_pi, DEFAULT_TOL};
use valab_core::learners::{
    centered, grad_step_qlearning, q_update, td_update, va_update, grad_step_va, LearnMode, LearnSpec, LrSchedule, Parameterization, QModel,
    UpdateStyle, VaLearnerState,
};
use valab_core::mdp::{generate_random_mdp, mixed_policy, random_deterministic_policy};
use valab_core::sampler::{collect_trajectories, nstep_windows, BehaviorEstimate, Trajectory, Transition};
use valab_core::{AdvTable, PolicyTable, QTable, Rng, TabularMdp};

use crate::config::{Algorithm, ConfigError, ExperimentConfig, Mode};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] valab_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Artifact { path: PathBuf, source: valab_core::Error },
}

pub type Result<T> = std::result::Result<T, BenchError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io { path: path.to_path_buf(), source }
}

/// Everything drawn for one seed before training.
#[derive(Debug, Clone)]
pub struct SeedSetup {
    pub seed: u64,
    pub mdp: TabularMdp,
    pub pi_det: PolicyTable,
    pub mu: PolicyTable,
    /// Evaluation target `π`; `None` in control mode.
    pub target: Option<PolicyTable>,
    pub trajectories: Vec<Trajectory>,
    pub mu_hat: PolicyTable,
    /// `Q^π` in evaluation mode.
    pub q_ref: Option<QTable>,
}

impl SeedSetup {
    pub fn transitions(&self) -> impl Iterator<Item = &Transition> {
        self.trajectories.iter().flat_map(|t| t.transitions.iter())
    }
}

/// Draws, in order from `Rng::new(seed)`: the MDP, `π_det`, then the trajectories.
pub fn prepare_seed(config: &ExperimentConfig, epsilon: f64, seed: u64) -> Result<SeedSetup> {
    let mut rng = Rng::new(seed);
    let (s, a) = (config.num_states, config.num_actions);
    let mdp = generate_random_mdp(s, a, config.gamma, config.dirichlet_alpha, config.reward, &mut rng)?;
    let pi_det = random_deterministic_policy(s, a, &mut rng)?;
    let mu = mixed_policy(epsilon, &pi_det, a)?;
    let target = match config.mode {
        Mode::Evaluation => Some(mixed_policy(config.target_mix, &pi_det, a)?),
        Mode::Control => None,
    };
    let trajectories = collect_trajectories(&mdp, &mu, config.n_traj, config.effective_horizon(), config.start_state, &mut rng)?;
    let counts = BehaviorEstimate::from_transitions(s, a, config.behavior_smoothing, trajectories.iter().flat_map(|t| t.transitions.iter()))?;
    let mu_hat = counts.estimated_policy();
    let q_ref = match &target {
        Some(pi) => Some(solve_q_pi(&mdp, pi, DEFAULT_TOL)?),
        None => None,
    };
    Ok(SeedSetup { seed, mdp, pi_det, mu, target, trajectories, mu_hat, q_ref })
}

pub fn learn_spec(config: &ExperimentConfig, target: Option<&PolicyTable>) -> LearnSpec {
    let mode = match target {
        Some(pi) => LearnMode::Evaluation(pi.clone()),
        None => LearnMode::Control,
    };
    LearnSpec {
        mode,
        gamma: config.gamma,
        lr: config.lr,
        lr_schedule: LrSchedule::Constant,
        target_period: config.target_period,
        n_step: config.n_step,
        loss: config.loss,
        online_value_baseline: config.online_value_baseline,
        update_style: config.update_style,
    }
}

enum Learner {
    Q(QModel),
    Va(VaLearnerState),
}

impl Learner {
    fn new(alg: Algorithm, setup: &SeedSetup) -> Result<Self> {
        let (s, a) = (setup.mdp.num_states(), setup.mdp.num_actions());
        Ok(match alg {
            Algorithm::QLearning | Algorithm::TdLearning => Learner::Q(QModel::new(Parameterization::Plain, s, a)?),
            Algorithm::VaLearning => Learner::Va(VaLearnerState::new(s, a)),
            Algorithm::DuelingUniform => Learner::Q(QModel::new(Parameterization::UniformDueling, s, a)?),
            Algorithm::DuelingBehavior => Learner::Q(QModel::new(Parameterization::BehaviorDueling(setup.mu_hat.clone()), s, a)?),
        })
    }

    fn step(&mut self, windows: &[&[Transition]], mu_hat: &PolicyTable, spec: &LearnSpec) -> Result<()> {
        match (self, spec.update_style) {
            (Learner::Q(model), UpdateStyle::BatchGradient) => grad_step_qlearning(model, windows, spec)?,
            (Learner::Va(state), UpdateStyle::BatchGradient) => grad_step_va(state, windows, mu_hat, spec)?,
            (Learner::Q(QModel::Plain(state)), UpdateStyle::Incremental) => {
                for w in windows {
                    match &spec.mode {
                        LearnMode::Evaluation(pi) => td_update(state, w, pi, spec)?,
                        LearnMode::Control => q_update(state, w, spec)?,
                    }
                }
            }
            (Learner::Q(model), UpdateStyle::Incremental) => {
                for w in windows {
                    grad_step_qlearning(model, std::slice::from_ref(w), spec)?;
                }
            }
            (Learner::Va(state), UpdateStyle::Incremental) => {
                for w in windows {
                    va_update(state, w, mu_hat, spec)?;
                }
            }
            (_, UpdateStyle::SynchronousSa) => {
                return Err(ConfigError::Invalid("synchronous_sa is not a data-driven update style".into()).into())
            }
        }
        Ok(())
    }

    fn implied_q(&self) -> QTable {
        match self {
            Learner::Q(m) => m.implied_q(),
            Learner::Va(s) => s.implied_q(),
        }
    }
}

struct MetricContext<'a> {
    setup: &'a SeedSetup,
    a_ref: Option<AdvTable>,
    perf_cache: HashMap<Vec<usize>, f64>,
}

impl MetricContext<'_> {
    fn value(&mut self, learner: &Learner, metric: Metric) -> Result<f64> {
        let setup = self.setup;
        let missing = || BenchError::Config(ConfigError::Invalid(format!("{metric} needs evaluation mode")));
        Ok(match metric {
            Metric::Performance => {
                let actions = greedy_actions(&learner.implied_q());
                if let Some(&v) = self.perf_cache.get(&actions) {
                    v
                } else {
                    let v = performance_of_actions(&setup.mdp, &actions, DEFAULT_TOL)?;
                    self.perf_cache.insert(actions, v);
                    v
                }
            }
            Metric::QError => q_error(&learner.implied_q(), setup.q_ref.as_ref().ok_or_else(missing)?)?,
            Metric::AdvError => {
                let pi = setup.target.as_ref().ok_or_else(missing)?;
                let a_hat = match learner {
                    Learner::Va(s) => s.adv.clone(),
                    Learner::Q(m) => advantage_of(&m.implied_q(), pi),
                };
                adv_error(&a_hat, self.a_ref.as_ref().ok_or_else(missing)?)?
            }
            Metric::AdvNormNu | Metric::AdvNormMu => {
                let Learner::Q(QModel::Dueling(st)) = learner else {
                    return Err(ConfigError::Invalid(format!("{metric} applies to dueling learners only")).into());
                };
                let adv = if metric == Metric::AdvNormNu { st.advantage() } else { centered(&st.f, &setup.mu_hat) };
                sample_advantage_norm(&adv, setup.transitions())
            }
        })
    }
}

/// Trains every configured algorithm on one seed's data and returns metric
/// records ordered by (algorithm, iteration, metric).
pub fn run_seed(config: &ExperimentConfig, epsilon: f64, seed: u64, run_id: &str) -> Result<Vec<MetricRecord>> {
    let setup = prepare_seed(config, epsilon, seed)?;
    train_on(config, &setup, run_id)
}

pub fn train_on(config: &ExperimentConfig, setup: &SeedSetup, run_id: &str) -> Result<Vec<MetricRecord>> {
    let spec = learn_spec(config, setup.target.as_ref());
    spec.validate()?;
    let windows = nstep_windows(&setup.trajectories, config.n_step);
    let metrics = config.effective_metrics();
    let a_ref = match (&setup.q_ref, &setup.target) {
        (Some(q), Some(pi)) => Some(advantage_of(q, pi)),
        _ => None,
    };
    let mut ctx = MetricContext { setup, a_ref, perf_cache: HashMap::new() };
    let mut records = Vec::new();
    for &alg in &config.algorithms {
        let mut learner = Learner::new(alg, setup)?;
        let mut log = |learner: &Learner, iteration: u64, records: &mut Vec<MetricRecord>| -> Result<()> {
            for &metric in metrics.iter().filter(|m| alg.emits(**m)) {
                records.push(MetricRecord {
                    run_id: run_id.to_string(),
                    seed: setup.seed,
                    algorithm: alg.name().to_string(),
                    iteration,
                    metric,
                    value: ctx.value(learner, metric)?,
                });
            }
            Ok(())
        };
        log(&learner, 0, &mut records)?;
        for it in 1..=config.iterations {
            learner.step(&windows, &setup.mu_hat, &spec)?;
            if it % config.eval_every == 0 || it == config.iterations {
                log(&learner, it, &mut records)?;
            }
        }
    }
    Ok(records)
}

pub fn run_id(mode: Mode, epsilon: f64) -> String {
    format!("{}-eps{}", mode.name(), epsilon)
}

/// Thread pool honoring `VALAB_THREADS`.
pub fn thread_pool() -> rayon::ThreadPool {
    let threads = std::env::var("VALAB_THREADS").ok().and_then(|v| v.parse::<usize>().ok()).unwrap_or(0);
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool")
}

/// Runs every seed in parallel; records are returned in (seed order of the
/// config, algorithm, iteration) order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<MetricRecord>> {
    config.validate()?;
    let eps = config.effective_epsilon();
    let id = run_id(config.mode, eps);
    let per_seed: Vec<Vec<MetricRecord>> =
        thread_pool().install(|| config.seeds.par_iter().map(|&seed| run_seed(config, eps, seed, &id)).collect::<Result<_>>())?;
    Ok(per_seed.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub artifacts: Vec<String>,
    pub config: ExperimentConfig,
}

impl RunManifest {
    pub fn new(command: &str, config: &ExperimentConfig, artifacts: Vec<String>) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_hash: config.hash(),
            seeds: config.seeds.clone(),
            artifacts,
            config: config.clone(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self).map_err(valab_core::Error::from)?;
        std::fs::write(&path, text + "\n").map_err(io_err(&path))?;
        Ok(path)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

/// Writes `metrics_<name>.csv` per configured metric plus the manifest.
pub fn write_run(config: &ExperimentConfig, records: &[MetricRecord], dir: &Path) -> Result<RunManifest> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut artifacts = Vec::new();
    for metric in config.effective_metrics() {
        let name = format!("metrics_{}.csv", metric.name());
        let path = dir.join(&name);
        let rows: Vec<MetricRecord> = records.iter().filter(|r| r.metric == metric).cloned().collect();
        write_metric_csv(&rows, create(&path)?).map_err(|source| BenchError::Artifact { path: path.clone(), source })?;
        artifacts.push(name);
    }
    let manifest = RunManifest::new("run", config, artifacts);
    manifest.write(dir)?;
    Ok(manifest)
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Relative spread of the logged values over the last tenth of training.
pub fn plateaued(history: &[(u64, f64)], iterations: u64) -> bool {
    let Some(&(_, last)) = history.last() else { return false };
    let start = iterations - iterations / 10;
    let (lo, hi) = history
        .iter()
        .filter(|(it, _)| *it >= start)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, v)| (lo.min(*v), hi.max(*v)));
    (hi - lo) <= 1e-6 * last.abs().max(f64::MIN_POSITIVE)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub epsilon: f64,
    pub algorithm: String,
    pub metric: Metric,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
    /// Runs whose metric plateaued over the last tenth of training.
    pub plateaued: usize,
}

/// Logged `(iteration, value)` pairs of one run.
type History = Vec<(u64, f64)>;

/// `(seed, final value, plateaued)` per run.
pub type FinalRuns = Vec<(u64, f64, bool)>;

/// Final-iteration values of `metric` per algorithm, in first-seen order,
/// with per-run plateau flags.
pub fn final_values(records: &[MetricRecord], metric: Metric, iterations: u64) -> Vec<(String, FinalRuns)> {
    let mut out: Vec<(String, FinalRuns)> = Vec::new();
    let mut histories: Vec<((String, u64), History)> = Vec::new();
    for r in records.iter().filter(|r| r.metric == metric) {
        let key = (r.algorithm.clone(), r.seed);
        match histories.iter_mut().find(|(k, _)| *k == key) {
            Some((_, h)) => h.push((r.iteration, r.value)),
            None => histories.push((key, vec![(r.iteration, r.value)])),
        }
    }
    for ((alg, seed), h) in histories {
        let last = h.last().expect("nonempty history").1;
        let flag = plateaued(&h, iterations);
        match out.iter_mut().find(|(a, _)| *a == alg) {
            Some((_, v)) => v.push((seed, last, flag)),
            None => out.push((alg, vec![(seed, last, flag)])),
        }
    }
    out
}

pub fn summarize(records: &[MetricRecord], metric: Metric, epsilon: f64, iterations: u64) -> Vec<SummaryRow> {
    final_values(records, metric, iterations)
        .into_iter()
        .map(|(algorithm, runs)| {
            let vals: Vec<f64> = runs.iter().map(|r| r.1).collect();
            let (mean, std) = mean_std(&vals);
            SummaryRow { epsilon, algorithm, metric, mean, std, n: vals.len(), plateaued: runs.iter().filter(|r| r.2).count() }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub summary: Vec<SummaryRow>,
    /// Final-iteration records, one per (epsilon, seed, algorithm).
    pub raw: Vec<MetricRecord>,
}

/// Runs the experiment at every grid epsilon and summarizes the final value
/// of `sweep_metric`.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepOutput> {
    config.validate()?;
    if config.epsilon_grid.is_empty() {
        return Err(ConfigError::Invalid("epsilon_grid must be nonempty".into()).into());
    }
    let metric = config.sweep_metric;
    let cfg = ExperimentConfig { metrics: Some(vec![metric]), ..config.clone() };
    let tasks: Vec<(f64, u64)> = cfg.epsilon_grid.iter().flat_map(|&e| cfg.seeds.iter().map(move |&s| (e, s))).collect();
    let per_task: Vec<Vec<MetricRecord>> = thread_pool().install(|| {
        tasks.par_iter().map(|&(eps, seed)| run_seed(&cfg, eps, seed, &run_id(cfg.mode, eps))).collect::<Result<_>>()
    })?;
    let mut summary = Vec::new();
    let mut raw = Vec::new();
    for (i, &eps) in cfg.epsilon_grid.iter().enumerate() {
        let n = cfg.seeds.len();
        let records: Vec<MetricRecord> = per_task[i * n..(i + 1) * n].iter().flatten().cloned().collect();
        summary.extend(summarize(&records, metric, eps, cfg.iterations));
        for seed_records in &per_task[i * n..(i + 1) * n] {
            for alg in &cfg.algorithms {
                if let Some(last) = seed_records.iter().rev().find(|r| r.algorithm == alg.name()) {
                    raw.push(last.clone());
                }
            }
        }
    }
    Ok(SweepOutput { summary, raw })
}

pub const SUMMARY_HEADER: [&str; 7] = ["epsilon", "algorithm", "metric", "mean", "std", "n", "plateaued"];

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], out: W) -> valab_core::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.write_record([
            r.epsilon.to_string(),
            r.algorithm.clone(),
            r.metric.name().to_string(),
            format_float(r.mean),
            format_float(r.std),
            r.n.to_string(),
            r.plateaued.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep(config: &ExperimentConfig, output: &SweepOutput, dir: &Path) -> Result<RunManifest> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let summary_path = dir.join("sweep_summary.csv");
    write_summary_csv(&output.summary, create(&summary_path)?).map_err(|source| BenchError::Artifact { path: summary_path, source })?;
    let raw_path = dir.join("sweep_raw.csv");
    write_metric_csv(&output.raw, create(&raw_path)?).map_err(|source| BenchError::Artifact { path: raw_path, source })?;
    let manifest = RunManifest::new("sweep", config, vec!["sweep_summary.csv".into(), "sweep_raw.csv".into()]);
    manifest.write(dir)?;
    Ok(manifest)
}
