//! Certification suite: geometric rates of the VA recursion, the transformed-Q
//! identity, the expected-update reduction, the dueling value-gradient and centering properties,
//! synchronous stochastic convergence, and a corrupted-operator negative control.

use std::fmt;
use std::slice::from_ref;

use valab_core::analysis::{advantage_norm_objective, value_gradient_check, rate_certificate, weighted_variance};
use valab_core::exact::{bellman, mu_targets, va_recursion_step, BackupMode, VaPair};
use valab_core::learners::{
    synchronous_sa_step, va_update, DuelingLearnerState, LearnMode, LearnSpec, LrSchedule, UpdateStyle, VaLearnerState,
};
use valab_core::mdp::{generate_random_mdp, mixed_policy, random_deterministic_policy, RewardSpec};
use valab_core::sampler::Transition;
use valab_core::{AdvTable, PolicyTable, QTable, Rng, TabularMdp, ValueTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Fast,
    Full,
}

impl Level {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "fast" => Some(Level::Fast),
            "full" => Some(Level::Full),
            _ => None,
        }
    }

    pub fn plan(self) -> Plan {
        match self {
            Level::Fast => Plan {
                rate_mdps: 5,
                rate_steps: 200,
                qtilde_mdps: 3,
                qtilde_steps: 200,
                reduction_draws: 20,
                value_gradient_draws: 30,
                centering_f_draws: 10,
                centering_nu_draws: 50,
                sa_mdps: 5,
                sa_runs_per_mdp: 2,
                sa_steps: 100_000,
            },
            Level::Full => Plan {
                rate_mdps: 20,
                rate_steps: 500,
                qtilde_mdps: 10,
                qtilde_steps: 200,
                reduction_draws: 50,
                value_gradient_draws: 100,
                centering_f_draws: 20,
                centering_nu_draws: 50,
                sa_mdps: 5,
                sa_runs_per_mdp: 2,
                sa_steps: 100_000,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Plan {
    pub rate_mdps: usize,
    pub rate_steps: usize,
    pub qtilde_mdps: usize,
    pub qtilde_steps: usize,
    pub reduction_draws: usize,
    pub value_gradient_draws: usize,
    pub centering_f_draws: usize,
    pub centering_nu_draws: usize,
    pub sa_mdps: usize,
    pub sa_runs_per_mdp: usize,
    pub sa_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    /// Signed slack against the threshold; negative when the check fails.
    pub margin: f64,
    pub detail: String,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {:<22} margin {:>11.3e}  {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.margin, self.detail)
    }
}

fn random_policy(rng: &mut Rng, s: usize, a: usize) -> PolicyTable {
    PolicyTable::from_rows(&(0..s).map(|_| rng.dirichlet(1.0, a).expect("alpha > 0")).collect::<Vec<_>>()).expect("dirichlet rows")
}

/// `ε u + (1 − ε) π_det` for a fresh random `π_det`; full coverage whenever `ε > 0`.
fn random_mixture(rng: &mut Rng, s: usize, a: usize, epsilon: f64) -> PolicyTable {
    let det = random_deterministic_policy(s, a, rng).expect("nonempty");
    mixed_policy(epsilon, &det, a).expect("epsilon in range")
}

fn benchmark_mdp(rng: &mut Rng) -> TabularMdp {
    generate_random_mdp(20, 5, 0.99, 0.5, RewardSpec::default(), rng).expect("valid generator arguments")
}

fn random_pair(rng: &mut Rng, s: usize, a: usize, scale: f64) -> VaPair {
    VaPair { v: ValueTable::from_fn(s, |_| rng.uniform_range(-scale, scale)), a: AdvTable::from_fn(s, a, |_, _| rng.uniform_range(-scale, scale)) }
}

fn outcome(name: &'static str, margin: f64, detail: String) -> CheckOutcome {
    CheckOutcome { name, passed: margin >= 0.0, margin, detail }
}

/// `‖V_t − V_μ‖ ≤ γ^t C` and `‖A_t − A_μ‖ ≤ γ^{t−1}(1+γ) C` along the exact
/// recursion, in evaluation and control mode.
pub fn check_recursion_rates(n_mdps: usize, steps: usize, seed: u64) -> CheckOutcome {
    let mut rng = Rng::new(seed);
    let mut margin = f64::INFINITY;
    let mut worst_fit: f64 = 0.0;
    for _ in 0..n_mdps {
        let mdp = benchmark_mdp(&mut rng);
        let gamma = mdp.gamma();
        let mu = random_mixture(&mut rng, 20, 5, 0.5);
        let pi = random_mixture(&mut rng, 20, 5, 0.5);
        let init = random_pair(&mut rng, 20, 5, 10.0);
        for mode in [BackupMode::Evaluation(&pi), BackupMode::Control] {
            let targets = mu_targets(&mdp, &mu, mode, 1e-12).expect("full coverage");
            let (v_ref, a_ref, q_ref) = targets.for_mode(mode.is_control());
            let c = init.v.sup_dist(v_ref) + init.a.sup_dist(a_ref);
            let mut pair = init.clone();
            let (mut ev, mut ea, mut eq) = (Vec::new(), Vec::new(), Vec::new());
            for t in 0..=steps {
                if t > 0 {
                    pair = va_recursion_step(&pair, &mdp, &mu, mode).expect("shapes match");
                }
                ev.push(pair.v.sup_dist(v_ref));
                ea.push(pair.a.sup_dist(a_ref));
                eq.push(pair.implied_q().sup_dist(q_ref));
            }
            let v_cert = rate_certificate(&ev, gamma, Some(c)).expect("valid series");
            let a_cert = rate_certificate(&ea, gamma, Some(c * (1.0 + gamma) / gamma)).expect("valid series");
            let q_cert = rate_certificate(&eq, gamma, None).expect("valid series");
            margin = margin.min(v_cert.margin).min(a_cert.margin);
            worst_fit = worst_fit.max(q_cert.fitted_constant);
        }
    }
    outcome("recursion_rates", margin, format!("{n_mdps} MDPs 20x5, t<={steps}, both modes; implied-Q fitted constant <= {worst_fit:.3}"))
}

/// `Q̃_t = Q_t − μA_t` of the recursion equals plain Bellman iteration from `Q̃_0`.
pub fn check_q_tilde(n_mdps: usize, steps: usize, seed: u64) -> CheckOutcome {
    let mut rng = Rng::new(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n_mdps {
        let mdp = benchmark_mdp(&mut rng);
        let mu = random_mixture(&mut rng, 20, 5, 0.5);
        let pi = random_mixture(&mut rng, 20, 5, 0.5);
        for mode in [BackupMode::Evaluation(&pi), BackupMode::Control] {
            let mut pair = random_pair(&mut rng, 20, 5, 10.0);
            let mut q = pair.transformed_q(&mu);
            for _ in 0..steps {
                pair = va_recursion_step(&pair, &mdp, &mu, mode).expect("shapes match");
                q = bellman(&q, &mdp, mode).expect("shapes match");
                worst = worst.max(pair.transformed_q(&mu).sup_dist(&q));
            }
        }
    }
    outcome("q_tilde_identity", 1e-10 - worst, format!("max gap {worst:.3e} over {n_mdps} MDPs, t<={steps}"))
}

/// Unit-rate `va_update` averaged over all `(a, x')` with weights `μ(a|x) P(x'|x,a)`.
pub fn averaged_va_update(state: &VaLearnerState, mdp: &TabularMdp, mu: &PolicyTable, spec: &LearnSpec) -> VaPair {
    let (s, na) = (mdp.num_states(), mdp.num_actions());
    let mut v = ValueTable::zeros(s);
    let mut adv = AdvTable::zeros(s, na);
    for x in 0..s {
        for a in 0..na {
            for (x_next, &p) in mdp.next_state_probs(x, a).iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let mut copy = state.clone();
                let t = Transition { x, a, r: mdp.reward(x, a), x_next };
                va_update(&mut copy, from_ref(&t), mu, spec).expect("valid transition");
                v.add(x, mu.prob(x, a) * p * copy.v.get(x));
                adv.add(x, a, p * copy.adv.get(x, a));
            }
        }
    }
    VaPair { v, a: adv }
}

pub fn check_reduction(draws: usize, seed: u64) -> CheckOutcome {
    let mut rng = Rng::new(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..draws {
        let s = 2 + rng.index(3);
        let na = 1 + rng.index(3);
        let mdp = generate_random_mdp(s, na, 0.9, 0.5, RewardSpec::default(), &mut rng).expect("valid generator arguments");
        let mu = random_policy(&mut rng, s, na);
        let pi = random_policy(&mut rng, s, na);
        let pair = random_pair(&mut rng, s, na, 1.0);
        let state = VaLearnerState::from_tables(pair.v.clone(), pair.a.clone());
        for mode in [LearnMode::Evaluation(pi.clone()), LearnMode::Control] {
            let spec = LearnSpec { lr: 1.0, target_period: 1, ..LearnSpec::new(mode.clone(), mdp.gamma()) };
            let avg = averaged_va_update(&state, &mdp, &mu, &spec);
            let exact = va_recursion_step(&pair, &mdp, &mu, mode.backup()).expect("full coverage");
            worst = worst.max(avg.v.sup_dist(&exact.v)).max(avg.a.sup_dist(&exact.a));
        }
    }
    outcome("expected_update_reduction", 1e-12 - worst, format!("max gap {worst:.3e} over {draws} MDPs with <=4 states, <=3 actions"))
}

pub fn check_value_gradient(draws: usize, seed: u64) -> CheckOutcome {
    let mut rng = Rng::new(seed);
    let (mut worst, mut control_min) = (0.0f64, f64::INFINITY);
    for _ in 0..draws {
        let mdp = generate_random_mdp(3, 3, 0.9, 0.5, RewardSpec::default(), &mut rng).expect("valid generator arguments");
        let mu = random_policy(&mut rng, 3, 3);
        let pi = random_policy(&mut rng, 3, 3);
        let v = ValueTable::from_fn(3, |_| rng.uniform_range(-5.0, 5.0));
        let f = QTable::from_fn(3, 3, |_, _| rng.uniform_range(-5.0, 5.0));
        let behavior = DuelingLearnerState::from_tables(v.clone(), f.clone(), mu.clone());
        let uniform = DuelingLearnerState::from_tables(v, f, PolicyTable::uniform(3, 3));
        for mode in [BackupMode::Evaluation(&pi), BackupMode::Control] {
            let mut uniform_gap: f64 = 0.0;
            for x in 0..3 {
                worst = worst.max(value_gradient_check(&mdp, &behavior, &mu, mode, x).expect("targets synced"));
                uniform_gap = uniform_gap.max(value_gradient_check(&mdp, &uniform, &mu, mode, x).expect("targets synced"));
            }
            control_min = control_min.min(uniform_gap);
        }
    }
    outcome(
        "dueling_value_gradient",
        1e-10 - worst,
        format!("max discrepancy {worst:.3e} over {draws} draws; uniform centering gap >= {control_min:.3e}"),
    )
}

pub fn check_centering_minimizer(f_draws: usize, nu_draws: usize, seed: u64) -> CheckOutcome {
    let mut rng = Rng::new(seed);
    let (s, a) = (5, 4);
    let mut margin = f64::INFINITY;
    let mut var_gap: f64 = 0.0;
    for _ in 0..f_draws {
        let f = QTable::from_fn(s, a, |_, _| rng.standard_normal() * 3.0);
        let mu = random_policy(&mut rng, s, a);
        for x in 0..s {
            let at_mu = advantage_norm_objective(&f, &mu, &mu, x);
            let row = f.row(x);
            let mean: f64 = row.iter().zip(mu.row(x)).map(|(v, p)| v * p).sum();
            let var: f64 = row.iter().zip(mu.row(x)).map(|(v, p)| p * (v - mean) * (v - mean)).sum();
            var_gap = var_gap.max((weighted_variance(&f, &mu, x) - var).abs());
            for _ in 0..nu_draws {
                let nu = random_policy(&mut rng, s, a);
                margin = margin.min(advantage_norm_objective(&f, &nu, &mu, x) + 1e-12 - at_mu);
            }
        }
    }
    let margin = margin.min(1e-12 - var_gap);
    outcome("behavior_centering_minimizer", margin, format!("{f_draws} (f, mu) draws x {nu_draws} nu per state; variance identity gap {var_gap:.1e}"))
}

/// Schedule used for synchronous stochastic VA-learning.
pub const SA_SCHEDULE: LrSchedule = LrSchedule::RobbinsMonro { c: 1.0, t0: 1.0, exponent: 0.7 };
pub const SA_GAMMA: f64 = 0.9;
pub const SA_TOL: f64 = 0.05;

/// Final sup-norm errors of `(V, A)` after `steps` synchronous updates.
pub fn synchronous_sa_run(mdp: &TabularMdp, mu: &PolicyTable, mode: &LearnMode, steps: usize, seed: u64) -> (f64, f64) {
    let targets = mu_targets(mdp, mu, mode.backup(), 1e-12).expect("full coverage");
    let (v_ref, a_ref, _) = targets.for_mode(mode.is_control());
    let spec = LearnSpec {
        update_style: UpdateStyle::SynchronousSa,
        lr_schedule: SA_SCHEDULE,
        target_period: 1,
        ..LearnSpec::new(mode.clone(), mdp.gamma())
    };
    let mut state = VaLearnerState::new(mdp.num_states(), mdp.num_actions());
    let mut rng = Rng::new(seed);
    for _ in 0..steps {
        synchronous_sa_step(&mut state, mdp, mu, &spec, &mut rng).expect("valid synchronous setup");
    }
    (state.v.sup_dist(v_ref), state.adv.sup_dist(a_ref))
}

pub fn check_synchronous_sa(n_mdps: usize, runs_per_mdp: usize, steps: usize, seed: u64) -> CheckOutcome {
    let mut rng = Rng::new(seed);
    let total = n_mdps * runs_per_mdp;
    let need = (9 * total).div_ceil(10);
    let mut min_successes = usize::MAX;
    let mut worst: f64 = 0.0;
    let mut per_mode = Vec::new();
    let setups: Vec<_> = (0..n_mdps)
        .map(|_| {
            let mdp = generate_random_mdp(5, 3, SA_GAMMA, 0.5, RewardSpec::default(), &mut rng).expect("valid generator arguments");
            let mu = random_mixture(&mut rng, 5, 3, 0.5);
            let pi = random_mixture(&mut rng, 5, 3, 0.5);
            (mdp, mu, pi)
        })
        .collect();
    for control in [false, true] {
        let mut successes = 0;
        for (m, (mdp, mu, pi)) in setups.iter().enumerate() {
            let mode = if control { LearnMode::Control } else { LearnMode::Evaluation(pi.clone()) };
            for r in 0..runs_per_mdp {
                let run_seed = seed.wrapping_mul(1_000_003).wrapping_add((m * runs_per_mdp + r) as u64);
                let (ev, ea) = synchronous_sa_run(mdp, mu, &mode, steps, run_seed);
                worst = worst.max(ev.max(ea));
                if ev < SA_TOL && ea < SA_TOL {
                    successes += 1;
                }
            }
        }
        per_mode.push(successes);
        min_successes = min_successes.min(successes);
    }
    let margin = min_successes as f64 - need as f64;
    outcome(
        "synchronous_sa_convergence",
        margin,
        format!(
            "{}/{total} (evaluation), {}/{total} (control) runs within {SA_TOL} after {steps} steps; worst error {worst:.4}",
            per_mode[0], per_mode[1]
        ),
    )
}

/// Largest `‖Tq1 − Tq2‖∞ / ‖q1 − q2‖∞` over random pairs, including constant shifts.
/// With `corrupt` the operator is `r + (1.01/γ)(Tq − r)`, i.e. discount 1.01.
pub fn contraction_ratio(mdp: &TabularMdp, pairs: usize, corrupt: bool, rng: &mut Rng) -> f64 {
    let (s, a) = (mdp.num_states(), mdp.num_actions());
    let rewards = QTable::from_vec(s, a, mdp.reward_table().to_vec()).expect("reward shape");
    let op = |q: &QTable| {
        let t = bellman(q, mdp, BackupMode::Control).expect("shapes match");
        if corrupt {
            t.zip_with(&rewards, |tq, r| r + (1.01 / mdp.gamma()) * (tq - r))
        } else {
            t
        }
    };
    let mut worst: f64 = 0.0;
    for i in 0..pairs {
        let q1 = QTable::from_fn(s, a, |_, _| rng.uniform_range(-5.0, 5.0));
        let q2 = if i % 2 == 0 { q1.map(|v| v + 1.0) } else { QTable::from_fn(s, a, |_, _| rng.uniform_range(-5.0, 5.0)) };
        worst = worst.max(op(&q1).sup_dist(&op(&q2)) / q1.sup_dist(&q2));
    }
    worst
}

pub fn check_contraction(seed: u64) -> CheckOutcome {
    let mut rng = Rng::new(seed);
    let mdp = benchmark_mdp(&mut rng);
    let ratio = contraction_ratio(&mdp, 20, false, &mut rng);
    outcome("bellman_contraction", mdp.gamma() + 1e-12 - ratio, format!("max ratio {ratio:.6} vs gamma {}", mdp.gamma()))
}

/// Passes when the contraction check rejects the corrupted operator.
pub fn check_negative_control(seed: u64) -> CheckOutcome {
    let mut rng = Rng::new(seed);
    let mdp = benchmark_mdp(&mut rng);
    let ratio = contraction_ratio(&mdp, 20, true, &mut rng);
    outcome("negative_control", ratio - (mdp.gamma() + 1e-12), format!("corrupted operator ratio {ratio:.6} must exceed gamma {}", mdp.gamma()))
}

pub fn run_verify(level: Level, seed: u64) -> Vec<CheckOutcome> {
    let p = level.plan();
    vec![
        check_recursion_rates(p.rate_mdps, p.rate_steps, seed),
        check_q_tilde(p.qtilde_mdps, p.qtilde_steps, seed.wrapping_add(1)),
        check_reduction(p.reduction_draws, seed.wrapping_add(2)),
        check_value_gradient(p.value_gradient_draws, seed.wrapping_add(3)),
        check_centering_minimizer(p.centering_f_draws, p.centering_nu_draws, seed.wrapping_add(4)),
        check_synchronous_sa(p.sa_mdps, p.sa_runs_per_mdp, p.sa_steps, seed.wrapping_add(5)),
        check_contraction(seed.wrapping_add(6)),
        check_negative_control(seed.wrapping_add(7)),
    ]
}
