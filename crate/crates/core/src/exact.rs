//! Exact dynamic programming: Bellman operators, fixed-point solvers, the
//! expected VA recursion, and the behavior-adapted targets `V_μ`, `A_μ`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mdp::TabularMdp;
use crate::tables::{AdvTable, PolicyTable, QTable, ValueTable};

/// Default sup-norm tolerance for the solvers.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Largest `|X||A|` solved with a dense LU factorization; above it
/// [`solve_q_pi`] falls back to value iteration.
pub const DENSE_SOLVE_LIMIT: usize = 4096;

/// Which Bellman operator a backup uses.
#[derive(Debug, Clone, Copy)]
pub enum BackupMode<'a> {
    /// `𝒯^π`: bootstrap with the `π`-average of the next row.
    Evaluation(&'a PolicyTable),
    /// `𝒯^⋆`: bootstrap with the max of the next row.
    Control,
}

impl BackupMode<'_> {
    /// Bootstrap value of `row = Q(x, ·)`.
    #[inline]
    pub fn bootstrap(&self, x: usize, row: &[f64]) -> f64 {
        match self {
            BackupMode::Evaluation(pi) => pi.expect(x, row),
            BackupMode::Control => row.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn is_control(&self) -> bool {
        matches!(self, BackupMode::Control)
    }

    fn check(&self, mdp: &TabularMdp) -> Result<()> {
        match self {
            BackupMode::Evaluation(pi) => pi.check_shape(mdp.num_states(), mdp.num_actions()),
            BackupMode::Control => Ok(()),
        }
    }
}

fn check_q(q: &QTable, mdp: &TabularMdp) -> Result<()> {
    if q.shape() != (mdp.num_states(), mdp.num_actions()) {
        return Err(Error::dims(
            format!("table {}x{}", mdp.num_states(), mdp.num_actions()),
            format!("table {}x{}", q.num_states(), q.num_actions()),
        ));
    }
    Ok(())
}

/// Applies `𝒯` for the given mode: `r̄(x,a) + γ Σ_x' P(x'|x,a) boot(Q(x',·))`.
pub fn bellman(q: &QTable, mdp: &TabularMdp, mode: BackupMode<'_>) -> Result<QTable> {
    check_q(q, mdp)?;
    mode.check(mdp)?;
    let next_values: Vec<f64> = (0..mdp.num_states()).map(|x| mode.bootstrap(x, q.row(x))).collect();
    Ok(backup_with_next_values(mdp, &next_values))
}

/// `r̄ + γ P v` for a state-value vector `v`.
pub(crate) fn backup_with_next_values(mdp: &TabularMdp, next_values: &[f64]) -> QTable {
    let gamma = mdp.gamma();
    QTable::from_fn(mdp.num_states(), mdp.num_actions(), |x, a| {
        let expected: f64 = mdp
            .next_state_probs(x, a)
            .iter()
            .zip(next_values)
            .map(|(p, v)| p * v)
            .sum();
        mdp.reward(x, a) + gamma * expected
    })
}

/// Bellman evaluation operator `𝒯^π`.
pub fn bellman_eval(q: &QTable, pi: &PolicyTable, mdp: &TabularMdp) -> Result<QTable> {
    bellman(q, mdp, BackupMode::Evaluation(pi))
}

/// Bellman control operator `𝒯^⋆`.
pub fn bellman_control(q: &QTable, mdp: &TabularMdp) -> Result<QTable> {
    bellman(q, mdp, BackupMode::Control)
}

/// `Q^π`, by a dense linear solve of `(I − γ P Π) Q = r̄` when the system is
/// small enough, value iteration otherwise.
pub fn solve_q_pi(mdp: &TabularMdp, pi: &PolicyTable, tol: f64) -> Result<QTable> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::param(format!("tol must be > 0, got {tol}")));
    }
    pi.check_shape(mdp.num_states(), mdp.num_actions())?;
    let (s, a) = (mdp.num_states(), mdp.num_actions());
    if s * a > DENSE_SOLVE_LIMIT {
        return value_iteration(mdp, BackupMode::Evaluation(pi), QTable::zeros(s, a), tol).map(|(q, _)| q);
    }
    let n = s * a;
    let gamma = mdp.gamma();
    let mut m = DMatrix::<f64>::identity(n, n);
    for x in 0..s {
        for act in 0..a {
            let i = x * a + act;
            for (y, &p) in mdp.next_state_probs(x, act).iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                for b in 0..a {
                    m[(i, y * a + b)] -= gamma * p * pi.prob(y, b);
                }
            }
        }
    }
    let rhs = DVector::from_column_slice(mdp.reward_table());
    let sol = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Internal("singular policy-evaluation system".into()))?;
    let q = QTable::from_vec(s, a, sol.iter().copied().collect())?;
    // One Bellman sweep from the direct solution keeps the residual honest.
    let residual = bellman_eval(&q, pi, mdp)?.sup_dist(&q);
    if residual > tol {
        return value_iteration(mdp, BackupMode::Evaluation(pi), q, tol).map(|(q, _)| q);
    }
    Ok(q)
}

/// Iterates `Q ← 𝒯 Q` from `init` until `‖𝒯Q − Q‖_∞ ≤ tol`. Returns the
/// final table and the number of operator applications.
pub fn value_iteration(mdp: &TabularMdp, mode: BackupMode<'_>, init: QTable, tol: f64) -> Result<(QTable, usize)> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::param(format!("tol must be > 0, got {tol}")));
    }
    let mut q = init;
    let mut iterations = 0;
    loop {
        let next = bellman(&q, mdp, mode)?;
        iterations += 1;
        let delta = next.sup_dist(&q);
        q = next;
        // residual of the new iterate is at most γ·delta
        if mdp.gamma() * delta <= tol {
            return Ok((q, iterations));
        }
    }
}

/// `Q^⋆` by value iteration from zero, polished with one exact evaluation of
/// the greedy policy when that lowers the residual.
pub fn solve_q_star(mdp: &TabularMdp, tol: f64) -> Result<QTable> {
    let (q, _) = value_iteration(mdp, BackupMode::Control, QTable::zeros(mdp.num_states(), mdp.num_actions()), tol)?;
    let vi_residual = bellman_control(&q, mdp)?.sup_dist(&q);
    if mdp.num_states() * mdp.num_actions() <= DENSE_SOLVE_LIMIT {
        let polished = solve_q_pi(mdp, &greedy(&q), tol)?;
        if bellman_control(&polished, mdp)?.sup_dist(&polished) <= vi_residual {
            return Ok(polished);
        }
    }
    Ok(q)
}

/// One-hot policy on `argmax_a q(x, a)`, ties to the lowest index.
pub fn greedy(q: &QTable) -> PolicyTable {
    PolicyTable::deterministic(q.num_actions(), &greedy_actions(q)).expect("greedy actions are in range")
}

pub fn greedy_actions(q: &QTable) -> Vec<usize> {
    (0..q.num_states())
        .map(|x| {
            let row = q.row(x);
            let mut best = 0;
            for (a, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = a;
                }
            }
            best
        })
        .collect()
}

/// Mean over states of `V^{π_t}(x)` where `π_t = greedy(q)`.
pub fn policy_performance(mdp: &TabularMdp, q: &QTable, tol: f64) -> Result<f64> {
    check_q(q, mdp)?;
    let actions = greedy_actions(q);
    performance_of_actions(mdp, &actions, tol)
}

/// Mean state value of the deterministic policy `actions`.
pub fn performance_of_actions(mdp: &TabularMdp, actions: &[usize], tol: f64) -> Result<f64> {
    let pi = PolicyTable::deterministic(mdp.num_actions(), actions)?;
    let q_pi = solve_q_pi(mdp, &pi, tol)?;
    let total: f64 = actions.iter().enumerate().map(|(x, &a)| q_pi.get(x, a)).sum();
    Ok(total / actions.len() as f64)
}

/// Evaluation target `Q^π` or the optimal `Q^⋆`, together with their
/// behavior-adapted value/advantage decompositions.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactTargets {
    /// `Q^π`; in control mode the target policy is greedy-optimal, so this is `Q^⋆`.
    pub q_pi: QTable,
    pub q_star: QTable,
    pub v_mu_pi: ValueTable,
    pub a_mu_pi: AdvTable,
    pub v_mu_star: ValueTable,
    pub a_mu_star: AdvTable,
}

impl ExactTargets {
    /// The `(V_μ, A_μ, Q)` triple the VA recursion converges to in `mode`.
    pub fn for_mode(&self, control: bool) -> (&ValueTable, &AdvTable, &QTable) {
        if control {
            (&self.v_mu_star, &self.a_mu_star, &self.q_star)
        } else {
            (&self.v_mu_pi, &self.a_mu_pi, &self.q_pi)
        }
    }
}

/// `V_μ(x) = Σ_a μ(a|x) Q(x,a)` and `A_μ = Q − V_μ`.
pub fn mu_decompose(q: &QTable, mu: &PolicyTable) -> (ValueTable, AdvTable) {
    let v = mu.average_q(q);
    let adv = AdvTable::from_fn(q.num_states(), q.num_actions(), |x, a| q.get(x, a) - v.get(x));
    (v, adv)
}

pub fn mu_targets(mdp: &TabularMdp, mu: &PolicyTable, mode: BackupMode<'_>, tol: f64) -> Result<ExactTargets> {
    mu.check_shape(mdp.num_states(), mdp.num_actions())?;
    if !mu.full_coverage() {
        return Err(Error::Precondition("behavior policy must have full coverage".into()));
    }
    let q_star = solve_q_star(mdp, tol)?;
    let q_pi = match mode {
        BackupMode::Evaluation(pi) => solve_q_pi(mdp, pi, tol)?,
        BackupMode::Control => q_star.clone(),
    };
    let (v_mu_pi, a_mu_pi) = mu_decompose(&q_pi, mu);
    let (v_mu_star, a_mu_star) = mu_decompose(&q_star, mu);
    Ok(ExactTargets { q_pi, q_star, v_mu_pi, a_mu_pi, v_mu_star, a_mu_star })
}

/// Iterates `(V_t, A_t)` of the VA recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct VaPair {
    pub v: ValueTable,
    pub a: AdvTable,
}

impl VaPair {
    pub fn zeros(num_states: usize, num_actions: usize) -> Self {
        Self { v: ValueTable::zeros(num_states), a: AdvTable::zeros(num_states, num_actions) }
    }

    /// Implied `Q_t = V_t + A_t`.
    pub fn implied_q(&self) -> QTable {
        QTable::from_value_advantage(&self.v, &self.a)
    }

    /// `Q̃_t = Q_t − μA_t`.
    pub fn transformed_q(&self, mu: &PolicyTable) -> QTable {
        let mu_a = mu.average_adv(&self.a);
        QTable::from_fn(self.a.num_states(), self.a.num_actions(), |x, a| self.v.get(x) + self.a.get(x, a) - mu_a.get(x))
    }
}

/// One step of the expected VA recursion:
/// `V_{t+1} = μ𝒯(Q_t − μA_t)`, `A_{t+1} = 𝒯(Q_t − μA_t) − V_t`.
pub fn va_recursion_step(pair: &VaPair, mdp: &TabularMdp, mu: &PolicyTable, mode: BackupMode<'_>) -> Result<VaPair> {
    let (s, a) = (mdp.num_states(), mdp.num_actions());
    if pair.v.len() != s || pair.a.shape() != (s, a) {
        return Err(Error::dims(format!("pair {s}x{a}"), format!("pair {}x{}", pair.v.len(), pair.a.num_actions())));
    }
    mu.check_shape(s, a)?;
    if !mu.full_coverage() {
        return Err(Error::Precondition("behavior policy must have full coverage".into()));
    }
    let backed_up = bellman(&pair.transformed_q(mu), mdp, mode)?;
    let v = mu.average_q(&backed_up);
    let adv = AdvTable::from_fn(s, a, |x, act| backed_up.get(x, act) - pair.v.get(x));
    Ok(VaPair { v, a: adv })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{demo_two_state_mdp, generate_random_mdp, mixed_policy, random_deterministic_policy, RewardSpec, DEMO_A, DEMO_B, DEMO_X, DEMO_Y};
    use crate::rng::Rng;

    fn random_mdp(seed: u64, s: usize, a: usize, gamma: f64) -> TabularMdp {
        generate_random_mdp(s, a, gamma, 0.5, RewardSpec::default(), &mut Rng::new(seed)).unwrap()
    }

    fn random_q(rng: &mut Rng, s: usize, a: usize, scale: f64) -> QTable {
        QTable::from_fn(s, a, |_, _| rng.uniform_range(-scale, scale))
    }

    #[test]
    fn zero_discount_returns_rewards() {
        let mdp = random_mdp(1, 4, 3, 0.0);
        let mut rng = Rng::new(2);
        let q = random_q(&mut rng, 4, 3, 5.0);
        let pi = PolicyTable::uniform(4, 3);
        let expected = QTable::from_vec(4, 3, mdp.reward_table().to_vec()).unwrap();
        assert_eq!(bellman_eval(&q, &pi, &mdp).unwrap(), expected);
        assert_eq!(bellman_control(&q, &mdp).unwrap(), expected);
        assert!(solve_q_pi(&mdp, &pi, DEFAULT_TOL).unwrap().sup_dist(&expected) < 1e-12);
        assert!(solve_q_star(&mdp, DEFAULT_TOL).unwrap().sup_dist(&expected) < 1e-12);
    }

    #[test]
    fn eval_fixed_point() {
        let mdp = random_mdp(3, 20, 5, 0.99);
        let pi = mixed_policy(0.5, &random_deterministic_policy(20, 5, &mut Rng::new(4)).unwrap(), 5).unwrap();
        let q = solve_q_pi(&mdp, &pi, DEFAULT_TOL).unwrap();
        let residual = bellman_eval(&q, &pi, &mdp).unwrap().sup_dist(&q);
        assert!(residual < 1e-10, "residual {residual}");
    }

    #[test]
    fn absorbing_state_geometric_series() {
        let mdp = TabularMdp::new(1, 1, vec![1.0], vec![1.0], 0.99).unwrap();
        let q = solve_q_pi(&mdp, &PolicyTable::uniform(1, 1), DEFAULT_TOL).unwrap();
        assert!((q.get(0, 0) - 100.0).abs() < 1e-9);
    }

    #[test]
    fn demo_eval_from_zero() {
        let mdp = demo_two_state_mdp();
        let out = bellman_eval(&QTable::zeros(2, 2), &PolicyTable::uniform(2, 2), &mdp).unwrap();
        assert_eq!(out.get(DEMO_Y, DEMO_A), 1.0);
        assert_eq!(out.get(DEMO_Y, DEMO_B), 0.0);
        assert_eq!(out.row(DEMO_X), &[0.0, 0.0]);
    }

    #[test]
    fn demo_q_pi_matches_geometric_series() {
        // Under uniform π, V(y) = Σ_t γ^t · 0.5 = 0.5 / (1 − γ).
        let mdp = demo_two_state_mdp();
        let gamma: f64 = 0.99;
        let v_y = 0.5 / (1.0 - gamma);
        let q = solve_q_pi(&mdp, &PolicyTable::uniform(2, 2), DEFAULT_TOL).unwrap();
        assert!((q.get(DEMO_Y, DEMO_A) - (1.0 + gamma * v_y)).abs() < 1e-9);
        assert!((q.get(DEMO_Y, DEMO_B) - gamma * v_y).abs() < 1e-9);
        assert!((q.get(DEMO_X, DEMO_A) - gamma * v_y).abs() < 1e-9);
        assert!((q.get(DEMO_X, DEMO_B) - gamma * v_y).abs() < 1e-9);
    }

    #[test]
    fn control_fixed_point_and_greedy_crosscheck() {
        let mdp = random_mdp(5, 20, 5, 0.99);
        let q_star = solve_q_star(&mdp, DEFAULT_TOL).unwrap();
        assert!(bellman_control(&q_star, &mdp).unwrap().sup_dist(&q_star) <= DEFAULT_TOL);
        let q_greedy = solve_q_pi(&mdp, &greedy(&q_star), DEFAULT_TOL).unwrap();
        assert!(q_greedy.sup_dist(&q_star) <= 10.0 * DEFAULT_TOL);
    }

    #[test]
    fn action_independent_rewards_make_every_policy_optimal() {
        // Transitions and rewards independent of the action.
        let mut rng = Rng::new(8);
        let (s, a) = (4, 3);
        let mut transition = Vec::new();
        let mut reward = Vec::new();
        for _ in 0..s {
            let row = rng.dirichlet(1.0, s).unwrap();
            let r = rng.uniform();
            for _ in 0..a {
                transition.extend(&row);
                reward.push(r);
            }
        }
        let mdp = TabularMdp::new(s, a, transition, reward, 0.9).unwrap();
        let q_star = solve_q_star(&mdp, DEFAULT_TOL).unwrap();
        let pi = random_deterministic_policy(s, a, &mut rng).unwrap();
        assert!(solve_q_pi(&mdp, &pi, DEFAULT_TOL).unwrap().sup_dist(&q_star) < 1e-9);
    }

    #[test]
    fn value_iteration_count_within_bound() {
        let mdp = random_mdp(6, 10, 3, 0.9);
        let q_star = solve_q_star(&mdp, 1e-12).unwrap();
        let tol = 1e-8;
        let (_, iters) = value_iteration(&mdp, BackupMode::Control, QTable::zeros(10, 3), tol).unwrap();
        let init_err = q_star.sup_norm();
        let bound = ((tol * (1.0 - 0.9) / init_err).ln() / 0.9f64.ln()).ceil() as usize + 1;
        assert!(iters <= bound, "{iters} > {bound}");
    }

    #[test]
    fn greedy_ties_and_oracle() {
        let q = QTable::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 2.0, ]]).unwrap();
        assert_eq!(greedy_actions(&q), vec![0, 0, 1]);
        let mut rng = Rng::new(12);
        for _ in 0..50 {
            let q = random_q(&mut rng, 7, 4, 1.0);
            for (x, a) in greedy_actions(&q).into_iter().enumerate() {
                let row = q.row(x);
                let oracle = (0..row.len()).fold(0, |best, b| if row[b] > row[best] { b } else { best });
                assert_eq!(a, oracle);
            }
        }
    }

    #[test]
    fn performance_matches_optimum_and_dominates() {
        let mdp = random_mdp(13, 20, 5, 0.99);
        let q_star = solve_q_star(&mdp, DEFAULT_TOL).unwrap();
        let best = policy_performance(&mdp, &q_star, DEFAULT_TOL).unwrap();
        let v_star_mean = (0..20).map(|x| q_star.row_max(x)).sum::<f64>() / 20.0;
        assert!((best - v_star_mean).abs() < 1e-8);
        let mut rng = Rng::new(14);
        for _ in 0..20 {
            let q = random_q(&mut rng, 20, 5, 1.0);
            assert!(policy_performance(&mdp, &q, DEFAULT_TOL).unwrap() <= best + 1e-9);
        }
    }

    #[test]
    fn performance_with_zero_discount() {
        let mdp = random_mdp(15, 5, 3, 0.0);
        let mut rng = Rng::new(16);
        let q = random_q(&mut rng, 5, 3, 1.0);
        let expected = greedy_actions(&q).iter().enumerate().map(|(x, &a)| mdp.reward(x, a)).sum::<f64>() / 5.0;
        assert!((policy_performance(&mdp, &q, DEFAULT_TOL).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn mu_targets_properties() {
        let mdp = random_mdp(17, 20, 5, 0.99);
        let mu = mixed_policy(0.8, &random_deterministic_policy(20, 5, &mut Rng::new(18)).unwrap(), 5).unwrap();
        let pi = PolicyTable::uniform(20, 5);
        let t = mu_targets(&mdp, &mu, BackupMode::Evaluation(&pi), DEFAULT_TOL).unwrap();
        for x in 0..20 {
            assert!(mu.expect(x, t.a_mu_pi.row(x)).abs() < 1e-10);
            assert!(mu.expect(x, t.a_mu_star.row(x)).abs() < 1e-10);
            for a in 0..5 {
                assert!((t.v_mu_pi.get(x) + t.a_mu_pi.get(x, a) - t.q_pi.get(x, a)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mu_targets_zero_discount_uniform() {
        let mdp = random_mdp(19, 4, 3, 0.0);
        let mu = PolicyTable::uniform(4, 3);
        let t = mu_targets(&mdp, &mu, BackupMode::Evaluation(&mu), DEFAULT_TOL).unwrap();
        for x in 0..4 {
            let mean_r = (0..3).map(|a| mdp.reward(x, a)).sum::<f64>() / 3.0;
            assert!((t.v_mu_pi.get(x) - mean_r).abs() < 1e-12);
        }
    }

    #[test]
    fn mu_targets_require_coverage() {
        let mdp = random_mdp(20, 3, 2, 0.5);
        let det = PolicyTable::deterministic(2, &[0, 1, 0]).unwrap();
        assert!(matches!(mu_targets(&mdp, &det, BackupMode::Control, DEFAULT_TOL), Err(Error::Precondition(_))));
    }

    #[test]
    fn va_recursion_fixed_point() {
        let mdp = random_mdp(21, 8, 3, 0.95);
        let mu = PolicyTable::uniform(8, 3);
        let pi = mixed_policy(0.3, &random_deterministic_policy(8, 3, &mut Rng::new(22)).unwrap(), 3).unwrap();
        for mode in [BackupMode::Evaluation(&pi), BackupMode::Control] {
            let t = mu_targets(&mdp, &mu, mode, 1e-12).unwrap();
            let (v, a, _) = t.for_mode(mode.is_control());
            let pair = VaPair { v: v.clone(), a: a.clone() };
            let next = va_recursion_step(&pair, &mdp, &mu, mode).unwrap();
            assert!(next.v.sup_dist(&pair.v) < 1e-9);
            assert!(next.a.sup_dist(&pair.a) < 1e-9);
        }
    }

    #[test]
    fn transformed_q_follows_bellman() {
        let mdp = random_mdp(23, 6, 3, 0.9);
        let mu = mixed_policy(0.6, &random_deterministic_policy(6, 3, &mut Rng::new(24)).unwrap(), 3).unwrap();
        let mut rng = Rng::new(25);
        let pair = VaPair {
            v: ValueTable::from_fn(6, |_| rng.uniform_range(-3.0, 3.0)),
            a: AdvTable::from_fn(6, 3, |_, _| rng.uniform_range(-3.0, 3.0)),
        };
        for mode in [BackupMode::Evaluation(&mu), BackupMode::Control] {
            let next = va_recursion_step(&pair, &mdp, &mu, mode).unwrap();
            let expected = bellman(&pair.transformed_q(&mu), &mdp, mode).unwrap();
            assert!(next.transformed_q(&mu).sup_dist(&expected) < 1e-12);
        }
    }

    #[test]
    fn demo_va_step_matches_hand_expectation() {
        // Zero init: Q̃ = 0, so 𝒯Q̃ = r̄, V' = μ r̄, A' = r̄ − 0.
        let mdp = demo_two_state_mdp();
        let mu = PolicyTable::uniform(2, 2);
        let next = va_recursion_step(&VaPair::zeros(2, 2), &mdp, &mu, BackupMode::Evaluation(&mu)).unwrap();
        assert_eq!(next.v.as_slice(), &[0.0, 0.5]);
        assert_eq!(next.a.to_rows(), vec![vec![0.0, 0.0], vec![1.0, 0.0]]);
        // Second step by hand: Q̃_1(y,·) = (0.5 + 1 − 0.5, 0.5 + 0 − 0.5) = (1, 0);
        // 𝒯Q̃_1(y,a) = 1 + γ·0.5, 𝒯Q̃_1(y,b) = γ·0.5, 𝒯Q̃_1(x,·) = γ·0.5.
        let g = 0.99;
        let second = va_recursion_step(&next, &mdp, &mu, BackupMode::Evaluation(&mu)).unwrap();
        assert!((second.v.get(DEMO_Y) - 0.5 * (1.0 + g * 0.5 + g * 0.5)).abs() < 1e-15);
        assert!((second.v.get(DEMO_X) - g * 0.5).abs() < 1e-15);
        assert!((second.a.get(DEMO_Y, DEMO_A) - (1.0 + g * 0.5 - 0.5)).abs() < 1e-15);
        assert!((second.a.get(DEMO_Y, DEMO_B) - (g * 0.5 - 0.5)).abs() < 1e-15);
        assert!((second.a.get(DEMO_X, DEMO_A) - g * 0.5).abs() < 1e-15);
    }

    #[test]
    fn dimension_errors() {
        let mdp = random_mdp(26, 3, 2, 0.5);
        assert!(bellman_control(&QTable::zeros(3, 3), &mdp).is_err());
        assert!(bellman_eval(&QTable::zeros(3, 2), &PolicyTable::uniform(2, 2), &mdp).is_err());
        assert!(solve_q_pi(&mdp, &PolicyTable::uniform(3, 2), 0.0).is_err());
    }
}
