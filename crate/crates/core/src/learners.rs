//! Tabular learners: TD-learning, Q-learning, VA-learning and Q-learning with
//! uniform or behavior dueling.
//!
//! Every learner keeps online tables plus lagged target tables. Bootstrap
//! targets are always read from the target tables, which are hard-copied from
//! the online tables every `target_period` updates (with `target_period = 1`
//! the targets equal the pre-update online tables, i.e. the plain tabular
//! algorithms).
//!
//! Updates consume *windows*: a slice of consecutive transitions whose first
//! element is the pair being updated. A window of length `n` gives the n-step
//! target `Σ_{k<n} γ^k r_k + γ^n · bootstrap(x_n)`; windows are cut short at the
//! end of a trajectory.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::BackupMode;
use crate::mdp::TabularMdp;
use crate::rng::Rng;
use crate::sampler::Transition;
use crate::tables::{AdvTable, PolicyTable, QTable, ValueTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnMode {
    /// Evaluate a fixed target policy.
    Evaluation(PolicyTable),
    Control,
}

impl LearnMode {
    pub fn backup(&self) -> BackupMode<'_> {
        match self {
            LearnMode::Evaluation(pi) => BackupMode::Evaluation(pi),
            LearnMode::Control => BackupMode::Control,
        }
    }

    pub fn is_control(&self) -> bool {
        matches!(self, LearnMode::Control)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    #[default]
    Constant,
    /// `c / (t + t0)^exponent`, exponent in `(0.5, 1]`.
    RobbinsMonro { c: f64, t0: f64, exponent: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// `½ u²`.
    #[default]
    Square,
    /// `½ huber(u)` with `huber(u) = u²` for `|u| ≤ tau` and `|u|` beyond.
    Huber { tau: f64 },
}

impl Loss {
    pub fn value(&self, u: f64) -> f64 {
        match *self {
            Loss::Square => 0.5 * u * u,
            Loss::Huber { tau } if u.abs() <= tau => 0.5 * u * u,
            Loss::Huber { .. } => 0.5 * u.abs(),
        }
    }

    /// Derivative with respect to the prediction, where `u = prediction − target`.
    #[inline]
    pub fn derivative(&self, u: f64) -> f64 {
        match *self {
            Loss::Square => u,
            Loss::Huber { tau } if u.abs() <= tau => u,
            Loss::Huber { .. } => 0.5 * u.signum(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateStyle {
    /// One stochastic update per transition.
    Incremental,
    /// One full-batch gradient step per iteration over all collected data.
    #[default]
    BatchGradient,
    /// Simultaneous sampled update at every state from a generative model.
    SynchronousSa,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnSpec {
    pub mode: LearnMode,
    pub gamma: f64,
    pub lr: f64,
    pub lr_schedule: LrSchedule,
    pub target_period: u64,
    pub n_step: usize,
    pub loss: Loss,
    /// Subtract the online `V(x_t)` instead of the target one in the advantage target.
    pub online_value_baseline: bool,
    pub update_style: UpdateStyle,
}

impl LearnSpec {
    /// Defaults of the tabular protocol: lr 0.1 constant, target period 10,
    /// one-step square loss, batch gradient.
    pub fn new(mode: LearnMode, gamma: f64) -> Self {
        Self {
            mode,
            gamma,
            lr: 0.1,
            lr_schedule: LrSchedule::Constant,
            target_period: 10,
            n_step: 1,
            loss: Loss::Square,
            online_value_baseline: false,
            update_style: UpdateStyle::BatchGradient,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::param(format!("gamma must lie in [0, 1), got {}", self.gamma)));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::param(format!("lr must be finite and >= 0, got {}", self.lr)));
        }
        if let LrSchedule::RobbinsMonro { c, t0, exponent } = self.lr_schedule {
            if !(exponent > 0.5 && exponent <= 1.0) {
                return Err(Error::param(format!("robbins-monro exponent must lie in (0.5, 1], got {exponent}")));
            }
            if !(c > 0.0 && t0 > 0.0 && c.is_finite() && t0.is_finite()) {
                return Err(Error::param("robbins-monro c and t0 must be > 0"));
            }
        }
        if self.target_period == 0 {
            return Err(Error::param("target_period must be >= 1"));
        }
        if self.n_step == 0 {
            return Err(Error::param("n_step must be >= 1"));
        }
        if let Loss::Huber { tau } = self.loss {
            if !(tau > 0.0 && tau.is_finite()) {
                return Err(Error::param(format!("huber tau must be > 0, got {tau}")));
            }
        }
        Ok(())
    }
}

/// Learning rate at update count `t`.
pub fn lr_at(spec: &LearnSpec, t: u64) -> Result<f64> {
    match spec.lr_schedule {
        LrSchedule::Constant => Ok(spec.lr),
        LrSchedule::RobbinsMonro { c, t0, exponent } => {
            if !(exponent > 0.5 && exponent <= 1.0) {
                return Err(Error::param(format!("robbins-monro exponent must lie in (0.5, 1], got {exponent}")));
            }
            Ok(c / (t as f64 + t0).powf(exponent))
        }
    }
}

/// Discounted reward sum of a window, the bootstrap discount `γ^len`, and the
/// bootstrap state.
#[inline]
pub fn nstep_return(window: &[Transition], gamma: f64) -> (f64, f64, usize) {
    assert!(!window.is_empty(), "empty transition window");
    let mut g = 0.0;
    let mut disc = 1.0;
    for t in window {
        g += disc * t.r;
        disc *= gamma;
    }
    (g, disc, window[window.len() - 1].x_next)
}

/// Online and target Q tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QLearnerState {
    pub q: QTable,
    pub q_target: QTable,
    pub step_count: u64,
}

impl QLearnerState {
    pub fn new(num_states: usize, num_actions: usize) -> Self {
        Self::from_q(QTable::zeros(num_states, num_actions))
    }

    pub fn from_q(q: QTable) -> Self {
        Self { q_target: q.clone(), q, step_count: 0 }
    }

    pub fn sync_targets(&mut self) {
        self.q_target = self.q.clone();
    }

    fn tick(&mut self, period: u64) {
        self.step_count += 1;
        if self.step_count.is_multiple_of(period) {
            self.sync_targets();
        }
    }
}

/// Online and target `(V, A)` tables of VA-learning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaLearnerState {
    pub v: ValueTable,
    pub adv: AdvTable,
    pub v_target: ValueTable,
    pub adv_target: AdvTable,
    pub step_count: u64,
}

impl VaLearnerState {
    pub fn new(num_states: usize, num_actions: usize) -> Self {
        Self::from_tables(ValueTable::zeros(num_states), AdvTable::zeros(num_states, num_actions))
    }

    pub fn from_tables(v: ValueTable, adv: AdvTable) -> Self {
        Self { v_target: v.clone(), adv_target: adv.clone(), v, adv, step_count: 0 }
    }

    /// `Q = V + A`.
    pub fn implied_q(&self) -> QTable {
        QTable::from_value_advantage(&self.v, &self.adv)
    }

    pub fn sync_targets(&mut self) {
        self.v_target = self.v.clone();
        self.adv_target = self.adv.clone();
    }

    fn tick(&mut self, period: u64) {
        self.step_count += 1;
        if self.step_count.is_multiple_of(period) {
            self.sync_targets();
        }
    }
}

/// Q-learning with a dueling head: `Q(x,a) = V(x) + f(x,a) − Σ_b ν(b|x) f(x,b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuelingLearnerState {
    pub v: ValueTable,
    /// Unconstrained advantage function.
    pub f: QTable,
    pub v_target: ValueTable,
    pub f_target: QTable,
    /// Centering distribution `ν`: uniform, or the estimated behavior policy.
    pub dueling_weights: PolicyTable,
    pub step_count: u64,
}

impl DuelingLearnerState {
    pub fn new(dueling_weights: PolicyTable) -> Self {
        let (s, a) = dueling_weights.shape();
        Self::from_tables(ValueTable::zeros(s), QTable::zeros(s, a), dueling_weights)
    }

    pub fn from_tables(v: ValueTable, f: QTable, dueling_weights: PolicyTable) -> Self {
        Self { v_target: v.clone(), f_target: f.clone(), v, f, dueling_weights, step_count: 0 }
    }

    /// `A(x,a) = f(x,a) − f(x,ν)`.
    pub fn advantage(&self) -> AdvTable {
        centered(&self.f, &self.dueling_weights)
    }

    pub fn implied_q(&self) -> QTable {
        QTable::from_value_advantage(&self.v, &self.advantage())
    }

    pub fn target_q(&self) -> QTable {
        QTable::from_value_advantage(&self.v_target, &centered(&self.f_target, &self.dueling_weights))
    }

    pub fn sync_targets(&mut self) {
        self.v_target = self.v.clone();
        self.f_target = self.f.clone();
    }

    pub fn targets_equal_online(&self) -> bool {
        self.v == self.v_target && self.f == self.f_target
    }

    fn tick(&mut self, period: u64) {
        self.step_count += 1;
        if self.step_count.is_multiple_of(period) {
            self.sync_targets();
        }
    }
}

/// `f(x,a) − Σ_b ν(b|x) f(x,b)`.
pub fn centered(f: &QTable, nu: &PolicyTable) -> AdvTable {
    AdvTable::from_fn(f.num_states(), f.num_actions(), |x, a| f.get(x, a) - nu.expect(x, f.row(x)))
}

/// How a Q-learning family learner parameterizes its Q-function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameterization {
    Plain,
    UniformDueling,
    BehaviorDueling(PolicyTable),
}

/// A Q-learning family learner: plain tables or a dueling head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QModel {
    Plain(QLearnerState),
    Dueling(DuelingLearnerState),
}

impl QModel {
    pub fn new(parameterization: Parameterization, num_states: usize, num_actions: usize) -> Result<Self> {
        Ok(match parameterization {
            Parameterization::Plain => QModel::Plain(QLearnerState::new(num_states, num_actions)),
            Parameterization::UniformDueling => {
                QModel::Dueling(DuelingLearnerState::new(PolicyTable::uniform(num_states, num_actions)))
            }
            Parameterization::BehaviorDueling(mu_hat) => {
                mu_hat.check_shape(num_states, num_actions)?;
                QModel::Dueling(DuelingLearnerState::new(mu_hat))
            }
        })
    }

    pub fn implied_q(&self) -> QTable {
        match self {
            QModel::Plain(s) => s.q.clone(),
            QModel::Dueling(s) => s.implied_q(),
        }
    }

    pub fn target_q(&self) -> QTable {
        match self {
            QModel::Plain(s) => s.q_target.clone(),
            QModel::Dueling(s) => s.target_q(),
        }
    }

    pub fn step_count(&self) -> u64 {
        match self {
            QModel::Plain(s) => s.step_count,
            QModel::Dueling(s) => s.step_count,
        }
    }
}

fn check_window(window: &[Transition], num_states: usize, num_actions: usize) -> Result<()> {
    if window.is_empty() {
        return Err(Error::param("empty transition window"));
    }
    for t in window {
        if t.x >= num_states || t.x_next >= num_states || t.a >= num_actions {
            return Err(Error::param(format!("transition {t:?} out of bounds")));
        }
    }
    Ok(())
}

fn q_backup_target(q_target: &QTable, window: &[Transition], mode: BackupMode<'_>, gamma: f64) -> f64 {
    let (g, disc, x_n) = nstep_return(window, gamma);
    g + disc * mode.bootstrap(x_n, q_target.row(x_n))
}

fn q_incremental(state: &mut QLearnerState, window: &[Transition], mode: BackupMode<'_>, spec: &LearnSpec) -> Result<()> {
    check_window(window, state.q.num_states(), state.q.num_actions())?;
    let alpha = lr_at(spec, state.step_count)?;
    let target = q_backup_target(&state.q_target, window, mode, spec.gamma);
    let t = window[0];
    let old = state.q.get(t.x, t.a);
    state.q.set(t.x, t.a, old + alpha * (target - old));
    state.tick(spec.target_period);
    Ok(())
}

/// TD-learning: `Q(x_t,a_t) ←α Σγ^k r_k + γ^n Q_target(x_n, π)`.
pub fn td_update(state: &mut QLearnerState, window: &[Transition], pi: &PolicyTable, spec: &LearnSpec) -> Result<()> {
    if spec.mode.is_control() {
        return Err(Error::Misuse("td_update requires evaluation mode".into()));
    }
    pi.check_shape(state.q.num_states(), state.q.num_actions())?;
    q_incremental(state, window, BackupMode::Evaluation(pi), spec)
}

/// Q-learning: `Q(x_t,a_t) ←α Σγ^k r_k + γ^n max_a Q_target(x_n, a)`.
pub fn q_update(state: &mut QLearnerState, window: &[Transition], spec: &LearnSpec) -> Result<()> {
    if !spec.mode.is_control() {
        return Err(Error::Misuse("q_update requires control mode".into()));
    }
    q_incremental(state, window, BackupMode::Control, spec)
}

/// Shared VA-learning target `𝒯̂Q(x_t,a_t) − γ^n A_target(x_n, μ̂)`, where the
/// bootstrap reads the target implied Q-function `V_target + A_target`.
pub fn va_backup_target(
    state: &VaLearnerState,
    window: &[Transition],
    mu_hat: &PolicyTable,
    mode: BackupMode<'_>,
    gamma: f64,
) -> f64 {
    let (g, disc, x_n) = nstep_return(window, gamma);
    let adv_row = state.adv_target.row(x_n);
    // bootstrap(V + A) = V + bootstrap(A) since π rows sum to one and max commutes with shifts
    let boot = state.v_target.get(x_n) + mode.bootstrap(x_n, adv_row);
    g + disc * (boot - mu_hat.expect(x_n, adv_row))
}

/// Tabular VA-learning step: `V(x_t) ←α y`, `A(x_t,a_t) ←α y − V(x_t)` with the
/// shared target `y`. The subtracted value is the target table's unless
/// `online_value_baseline` is set, in which case it is the pre-update online value.
pub fn va_update(state: &mut VaLearnerState, window: &[Transition], mu_hat: &PolicyTable, spec: &LearnSpec) -> Result<()> {
    let (s, a) = state.adv.shape();
    check_window(window, s, a)?;
    mu_hat.check_shape(s, a)?;
    let alpha = lr_at(spec, state.step_count)?;
    let y = va_backup_target(state, window, mu_hat, spec.mode.backup(), spec.gamma);
    let t = window[0];
    let baseline = if spec.online_value_baseline { state.v.get(t.x) } else { state.v_target.get(t.x) };
    let v_old = state.v.get(t.x);
    let a_old = state.adv.get(t.x, t.a);
    state.v.set(t.x, v_old + alpha * (y - v_old));
    state.adv.set(t.x, t.a, a_old + alpha * (y - baseline - a_old));
    state.tick(spec.target_period);
    Ok(())
}

/// One full-batch gradient step on the averaged `L_QL` for a Q-learning family
/// learner. Uses `spec.mode` for the bootstrap.
pub fn grad_step_qlearning(model: &mut QModel, batch: &[&[Transition]], spec: &LearnSpec) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::param("empty batch"));
    }
    let mode = spec.mode.backup();
    let target_q = model.target_q();
    let online_q = model.implied_q();
    let (s, a) = online_q.shape();
    for w in batch {
        check_window(w, s, a)?;
    }
    let lr = lr_at(spec, model.step_count())?;
    let scale = lr / batch.len() as f64;
    match model {
        QModel::Plain(state) => {
            let mut grad = QTable::zeros(s, a);
            for w in batch {
                let t = w[0];
                let y = q_backup_target(&target_q, w, mode, spec.gamma);
                grad.add(t.x, t.a, spec.loss.derivative(online_q.get(t.x, t.a) - y));
            }
            for (q, g) in state.q.as_mut_slice().iter_mut().zip(grad.as_slice()) {
                *q -= scale * g;
            }
            state.tick(spec.target_period);
        }
        QModel::Dueling(state) => {
            let mut grad_v = vec![0.0; s];
            // per-state sum of δ and per-pair sum of δ; the f-gradient is
            // Σ_i δ_i (1[b = a_i] − ν(b|x_i)) = pair_sum(x,b) − ν(b|x)·state_sum(x)
            let mut pair_sum = QTable::zeros(s, a);
            for w in batch {
                let t = w[0];
                let y = q_backup_target(&target_q, w, mode, spec.gamma);
                let delta = spec.loss.derivative(online_q.get(t.x, t.a) - y);
                grad_v[t.x] += delta;
                pair_sum.add(t.x, t.a, delta);
            }
            for (x, &gv) in grad_v.iter().enumerate() {
                state.v.add(x, -scale * gv);
                for b in 0..a {
                    let g = pair_sum.get(x, b) - state.dueling_weights.prob(x, b) * gv;
                    state.f.add(x, b, -scale * g);
                }
            }
            state.tick(spec.target_period);
        }
    }
    Ok(())
}

/// Batch gradients `(∂/∂V, ∂/∂f)` of the averaged `L_QL` for a dueling learner,
/// without applying them.
pub fn dueling_gradients(state: &DuelingLearnerState, batch: &[&[Transition]], spec: &LearnSpec) -> (ValueTable, QTable) {
    let mode = spec.mode.backup();
    let target_q = state.target_q();
    let online_q = state.implied_q();
    let (s, a) = online_q.shape();
    let mut grad_v = ValueTable::zeros(s);
    let mut grad_f = QTable::zeros(s, a);
    let n = batch.len() as f64;
    for w in batch {
        let t = w[0];
        let y = q_backup_target(&target_q, w, mode, spec.gamma);
        let delta = spec.loss.derivative(online_q.get(t.x, t.a) - y) / n;
        grad_v.add(t.x, delta);
        for b in 0..a {
            let indicator = if b == t.a { 1.0 } else { 0.0 };
            grad_f.add(t.x, b, delta * (indicator - state.dueling_weights.prob(t.x, b)));
        }
    }
    (grad_v, grad_f)
}

/// One full-batch gradient step on the averaged `L_VA`.
pub fn grad_step_va(state: &mut VaLearnerState, batch: &[&[Transition]], mu_hat: &PolicyTable, spec: &LearnSpec) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::param("empty batch"));
    }
    let (s, a) = state.adv.shape();
    mu_hat.check_shape(s, a)?;
    for w in batch {
        check_window(w, s, a)?;
    }
    let mode = spec.mode.backup();
    let lr = lr_at(spec, state.step_count)?;
    let scale = lr / batch.len() as f64;
    let mut grad_v = vec![0.0; s];
    let mut grad_a = AdvTable::zeros(s, a);
    for w in batch {
        let t = w[0];
        let y = va_backup_target(state, w, mu_hat, mode, spec.gamma);
        let baseline = if spec.online_value_baseline { state.v.get(t.x) } else { state.v_target.get(t.x) };
        grad_v[t.x] += spec.loss.derivative(state.v.get(t.x) - y);
        grad_a.add(t.x, t.a, spec.loss.derivative(state.adv.get(t.x, t.a) - (y - baseline)));
    }
    for (x, g) in grad_v.into_iter().enumerate() {
        state.v.add(x, -scale * g);
    }
    for (adv, g) in state.adv.as_mut_slice().iter_mut().zip(grad_a.as_slice()) {
        *adv -= scale * g;
    }
    state.tick(spec.target_period);
    Ok(())
}

/// Synchronous stochastic VA-learning: at every state draw `a ~ μ(·|x)` and
/// `(r, x')` from the model, then apply the VA update at all states at once
/// with rate `α_t` from the schedule.
pub fn synchronous_sa_step(
    state: &mut VaLearnerState,
    mdp: &TabularMdp,
    mu: &PolicyTable,
    spec: &LearnSpec,
    rng: &mut Rng,
) -> Result<Vec<Transition>> {
    if spec.update_style != UpdateStyle::SynchronousSa {
        return Err(Error::Misuse("synchronous_sa_step requires update_style = synchronous_sa".into()));
    }
    if !matches!(spec.lr_schedule, LrSchedule::RobbinsMonro { .. }) {
        return Err(Error::Misuse("synchronous_sa_step requires a robbins-monro schedule".into()));
    }
    let (s, a) = (mdp.num_states(), mdp.num_actions());
    if state.adv.shape() != (s, a) {
        return Err(Error::dims(format!("learner {s}x{a}"), format!("learner {}x{}", state.adv.num_states(), state.adv.num_actions())));
    }
    mu.check_shape(s, a)?;
    let alpha = lr_at(spec, state.step_count)?;
    let mode = spec.mode.backup();
    let samples: Vec<Transition> = (0..s)
        .map(|x| {
            let act = rng.categorical(mu.row(x));
            let (r, x_next) = mdp.sample_step(x, act, rng);
            Transition { x, a: act, r, x_next }
        })
        .collect();
    let updates: Vec<(f64, f64)> = samples
        .iter()
        .map(|t| {
            let y = va_backup_target(state, std::slice::from_ref(t), mu, mode, spec.gamma);
            let baseline = if spec.online_value_baseline { state.v.get(t.x) } else { state.v_target.get(t.x) };
            (y, y - baseline)
        })
        .collect();
    for (t, (v_target, a_target)) in samples.iter().zip(updates) {
        let v_old = state.v.get(t.x);
        let a_old = state.adv.get(t.x, t.a);
        state.v.set(t.x, v_old + alpha * (v_target - v_old));
        state.adv.set(t.x, t.a, a_old + alpha * (a_target - a_old));
    }
    state.tick(spec.target_period);
    Ok(samples)
}
