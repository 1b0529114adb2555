//! Experiment configuration: a single JSON document with the tabular protocol
//! defaults, overridable field by field from the command line.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use valab_core::analysis::Metric;
use valab_core::learners::{Loss, UpdateStyle};
use valab_core::mdp::RewardSpec;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Evaluation,
    #[default]
    Control,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Evaluation => "evaluation",
            Mode::Control => "control",
        }
    }

    /// Accepts `eval`, `evaluation` and `control`.
    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        match s {
            "eval" | "evaluation" => Ok(Mode::Evaluation),
            "control" => Ok(Mode::Control),
            other => Err(ConfigError::Invalid(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Plain Q-table; bootstraps with the target policy in evaluation mode.
    QLearning,
    /// Plain Q-table in evaluation mode only.
    TdLearning,
    VaLearning,
    DuelingUniform,
    DuelingBehavior,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] =
        [Algorithm::QLearning, Algorithm::TdLearning, Algorithm::VaLearning, Algorithm::DuelingUniform, Algorithm::DuelingBehavior];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::QLearning => "q_learning",
            Algorithm::TdLearning => "td_learning",
            Algorithm::VaLearning => "va_learning",
            Algorithm::DuelingUniform => "dueling_uniform",
            Algorithm::DuelingBehavior => "dueling_behavior",
        }
    }

    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| ConfigError::Invalid(format!("unknown algorithm {s:?}")))
    }

    pub fn is_dueling(self) -> bool {
        matches!(self, Algorithm::DuelingUniform | Algorithm::DuelingBehavior)
    }

    /// Whether the learner produces `metric`. Advantage norms exist only for
    /// dueling heads.
    pub fn emits(self, metric: Metric) -> bool {
        match metric {
            Metric::AdvNormNu | Metric::AdvNormMu => self.is_dueling(),
            _ => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub num_states: usize,
    pub num_actions: usize,
    pub gamma: f64,
    pub dirichlet_alpha: f64,
    pub reward: RewardSpec,
    pub mode: Mode,
    /// Behavior mixing `μ = ε u + (1 − ε) π_det`. Defaults to 0.8 in control
    /// mode and 1.0 (uniform) in evaluation mode.
    pub epsilon: Option<f64>,
    /// Grid for `sweep`.
    pub epsilon_grid: Vec<f64>,
    /// Evaluation target `π = mix u + (1 − mix) π_det`.
    pub target_mix: f64,
    pub algorithms: Vec<Algorithm>,
    pub lr: f64,
    pub target_period: u64,
    pub n_step: usize,
    pub loss: Loss,
    pub update_style: UpdateStyle,
    pub online_value_baseline: bool,
    pub n_traj: usize,
    /// Trajectory length; `round(2 / (1 − γ))` when absent.
    pub horizon: Option<usize>,
    pub start_state: usize,
    /// Additive smoothing of the behavior-policy counts.
    pub behavior_smoothing: f64,
    /// Number of updates. A batch-gradient update is one step over all data;
    /// an incremental update is one pass over the transition stream.
    pub iterations: u64,
    pub eval_every: u64,
    pub seeds: Vec<u64>,
    /// Defaults to every metric that applies in the chosen mode.
    pub metrics: Option<Vec<Metric>>,
    /// Metric summarized by `sweep`.
    pub sweep_metric: Metric,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            num_states: 20,
            num_actions: 5,
            gamma: 0.99,
            dirichlet_alpha: 0.5,
            reward: RewardSpec::default(),
            mode: Mode::Control,
            epsilon: None,
            epsilon_grid: vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
            target_mix: 0.5,
            algorithms: vec![Algorithm::QLearning, Algorithm::VaLearning, Algorithm::DuelingUniform, Algorithm::DuelingBehavior],
            lr: 0.1,
            target_period: 10,
            n_step: 1,
            loss: Loss::Square,
            update_style: UpdateStyle::BatchGradient,
            online_value_baseline: false,
            n_traj: 20,
            horizon: None,
            start_state: 0,
            behavior_smoothing: 0.0,
            iterations: 2000,
            eval_every: 10,
            seeds: (0..20).collect(),
            metrics: None,
            sweep_metric: Metric::Performance,
            out: PathBuf::from("results"),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        serde_json::from_str(&text).map_err(|source| ConfigError::Parse { path: path.to_path_buf(), source })
    }

    pub fn effective_epsilon(&self) -> f64 {
        self.epsilon.unwrap_or(match self.mode {
            Mode::Control => 0.8,
            Mode::Evaluation => 1.0,
        })
    }

    pub fn effective_horizon(&self) -> usize {
        self.horizon.unwrap_or_else(|| valab_core::sampler::default_horizon(self.gamma))
    }

    pub fn effective_metrics(&self) -> Vec<Metric> {
        match &self.metrics {
            Some(m) => m.clone(),
            None => match self.mode {
                Mode::Control => vec![Metric::Performance, Metric::AdvNormNu, Metric::AdvNormMu],
                Mode::Evaluation => vec![Metric::AdvError, Metric::QError, Metric::AdvNormNu, Metric::AdvNormMu],
            },
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        if self.num_states < 2 || self.num_actions < 1 {
            return bad(format!("need num_states >= 2 and num_actions >= 1, got {}x{}", self.num_states, self.num_actions));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if !(self.dirichlet_alpha > 0.0 && self.dirichlet_alpha.is_finite()) {
            return bad(format!("dirichlet_alpha must be > 0, got {}", self.dirichlet_alpha));
        }
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        if !in_unit(self.effective_epsilon()) {
            return bad(format!("epsilon must lie in [0, 1], got {}", self.effective_epsilon()));
        }
        if let Some(e) = self.epsilon_grid.iter().find(|e| !in_unit(**e)) {
            return bad(format!("epsilon_grid entry {e} outside [0, 1]"));
        }
        if !in_unit(self.target_mix) {
            return bad(format!("target_mix must lie in [0, 1], got {}", self.target_mix));
        }
        if self.algorithms.is_empty() {
            return bad("algorithms must be nonempty".into());
        }
        for (i, a) in self.algorithms.iter().enumerate() {
            if self.algorithms[..i].contains(a) {
                return bad(format!("algorithm {} listed twice", a.name()));
            }
        }
        if self.mode == Mode::Control && self.algorithms.contains(&Algorithm::TdLearning) {
            return bad("td_learning requires evaluation mode".into());
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be finite and >= 0, got {}", self.lr));
        }
        if self.target_period == 0 || self.n_step == 0 {
            return bad("target_period and n_step must be >= 1".into());
        }
        if let Loss::Huber { tau } = self.loss {
            if !(tau > 0.0 && tau.is_finite()) {
                return bad(format!("huber tau must be > 0, got {tau}"));
            }
        }
        if self.update_style == UpdateStyle::SynchronousSa {
            return bad("synchronous_sa needs a generative model and is only used by verify".into());
        }
        if self.n_traj == 0 || self.effective_horizon() == 0 {
            return bad("n_traj and horizon must be >= 1".into());
        }
        if self.start_state >= self.num_states {
            return bad(format!("start_state {} out of range", self.start_state));
        }
        if !(self.behavior_smoothing >= 0.0 && self.behavior_smoothing.is_finite()) {
            return bad(format!("behavior_smoothing must be >= 0, got {}", self.behavior_smoothing));
        }
        if self.eval_every == 0 {
            return bad("eval_every must be >= 1".into());
        }
        if self.seeds.is_empty() {
            return bad("seeds must be nonempty".into());
        }
        for (i, s) in self.seeds.iter().enumerate() {
            if self.seeds[..i].contains(s) {
                return bad(format!("seed {s} listed twice"));
            }
        }
        let metrics = self.effective_metrics();
        if metrics.is_empty() {
            return bad("metrics must be nonempty".into());
        }
        if self.mode == Mode::Control {
            if let Some(m) = metrics.iter().chain([&self.sweep_metric]).find(|m| matches!(m, Metric::AdvError | Metric::QError)) {
                return bad(format!("{m} is defined against the evaluation target and needs evaluation mode"));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical))
    }
}
