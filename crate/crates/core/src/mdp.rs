//! Finite MDPs with point-mass rewards, plus the random MDP and policy
//! generators used by the tabular experiments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tables::{PolicyTable, PROB_TOL};

/// A finite MDP: transition tensor, mean rewards and discount.
///
/// Rewards are deterministic (`reward_mean`), optionally perturbed by additive
/// Gaussian noise with standard deviation `reward_noise_std` when sampled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MdpDocument", into = "MdpDocument")]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    gamma: f64,
    /// `[x][a][x']`, flattened row-major.
    transition: Vec<f64>,
    /// `[x][a]`, flattened row-major.
    reward_mean: Vec<f64>,
    reward_noise_std: f64,
    generator_seed: Option<u64>,
}

/// On-disk JSON layout of an MDP.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MdpDocument {
    num_states: usize,
    num_actions: usize,
    gamma: f64,
    transition: Vec<Vec<Vec<f64>>>,
    reward_mean: Vec<Vec<f64>>,
    generator_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "is_zero")]
    reward_noise_std: f64,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

impl TabularMdp {
    /// Builds an MDP from row-major tables and checks every invariant.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        transition: Vec<f64>,
        reward_mean: Vec<f64>,
        gamma: f64,
    ) -> Result<Self> {
        let mdp = Self {
            num_states,
            num_actions,
            gamma,
            transition,
            reward_mean,
            reward_noise_std: 0.0,
            generator_seed: None,
        };
        mdp.validate()?;
        Ok(mdp)
    }

    pub fn validate(&self) -> Result<()> {
        let (s, a) = (self.num_states, self.num_actions);
        if s == 0 || a == 0 {
            return Err(Error::param("an MDP needs at least one state and one action"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::param(format!("gamma must lie in [0, 1), got {}", self.gamma)));
        }
        if self.transition.len() != s * a * s {
            return Err(Error::dims(format!("{} transition entries", s * a * s), self.transition.len()));
        }
        if self.reward_mean.len() != s * a {
            return Err(Error::dims(format!("{} reward entries", s * a), self.reward_mean.len()));
        }
        for x in 0..s {
            for act in 0..a {
                let row = self.next_state_probs(x, act);
                if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                    return Err(Error::param(format!("transition row ({x},{act}) has a negative entry")));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > PROB_TOL {
                    return Err(Error::param(format!("transition row ({x},{act}) sums to {sum}")));
                }
            }
        }
        if self.reward_mean.iter().any(|r| !r.is_finite()) {
            return Err(Error::param("reward_mean contains a non-finite entry"));
        }
        if !(self.reward_noise_std >= 0.0 && self.reward_noise_std.is_finite()) {
            return Err(Error::param("reward_noise_std must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn with_reward_noise(mut self, std: f64) -> Result<Self> {
        self.reward_noise_std = std;
        self.validate()?;
        Ok(self)
    }

    pub fn with_generator_seed(mut self, seed: Option<u64>) -> Self {
        self.generator_seed = seed;
        self
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn reward_noise_std(&self) -> f64 {
        self.reward_noise_std
    }

    pub fn generator_seed(&self) -> Option<u64> {
        self.generator_seed
    }

    /// `P(· | x, a)`.
    #[inline]
    pub fn next_state_probs(&self, x: usize, a: usize) -> &[f64] {
        let start = (x * self.num_actions + a) * self.num_states;
        &self.transition[start..start + self.num_states]
    }

    #[inline]
    pub fn reward(&self, x: usize, a: usize) -> f64 {
        self.reward_mean[x * self.num_actions + a]
    }

    pub fn reward_table(&self) -> &[f64] {
        &self.reward_mean
    }

    pub fn transition_table(&self) -> &[f64] {
        &self.transition
    }

    /// Draws `(r, x')` for the pair `(x, a)`.
    pub fn sample_step(&self, x: usize, a: usize, rng: &mut Rng) -> (f64, usize) {
        let next = rng.categorical(self.next_state_probs(x, a));
        let mut r = self.reward(x, a);
        if self.reward_noise_std > 0.0 {
            r += self.reward_noise_std * rng.standard_normal();
        }
        (r, next)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

impl From<TabularMdp> for MdpDocument {
    fn from(m: TabularMdp) -> Self {
        let (s, a) = (m.num_states, m.num_actions);
        let transition = (0..s)
            .map(|x| (0..a).map(|act| m.next_state_probs(x, act).to_vec()).collect())
            .collect();
        let reward_mean = m.reward_mean.chunks(a).map(<[f64]>::to_vec).collect();
        MdpDocument {
            num_states: s,
            num_actions: a,
            gamma: m.gamma,
            transition,
            reward_mean,
            generator_seed: m.generator_seed,
            reward_noise_std: m.reward_noise_std,
        }
    }
}

impl TryFrom<MdpDocument> for TabularMdp {
    type Error = Error;

    fn try_from(doc: MdpDocument) -> Result<Self> {
        let (s, a) = (doc.num_states, doc.num_actions);
        if doc.transition.len() != s || doc.transition.iter().any(|r| r.len() != a || r.iter().any(|p| p.len() != s)) {
            return Err(Error::dims(format!("transition {s}x{a}x{s}"), "ragged or mis-sized transition"));
        }
        if doc.reward_mean.len() != s || doc.reward_mean.iter().any(|r| r.len() != a) {
            return Err(Error::dims(format!("reward_mean {s}x{a}"), "ragged or mis-sized reward_mean"));
        }
        let transition = doc.transition.into_iter().flatten().flatten().collect();
        let reward_mean = doc.reward_mean.into_iter().flatten().collect();
        let mdp = TabularMdp::new(s, a, transition, reward_mean, doc.gamma)?
            .with_reward_noise(doc.reward_noise_std)?
            .with_generator_seed(doc.generator_seed);
        Ok(mdp)
    }
}

/// How mean rewards are filled in by [`generate_random_mdp`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardSpec {
    /// i.i.d. `Uniform[low, high)` per state-action pair.
    Uniform { low: f64, high: f64 },
    Constant(f64),
}

impl Default for RewardSpec {
    fn default() -> Self {
        RewardSpec::Uniform { low: 0.0, high: 1.0 }
    }
}

/// Random MDP whose transition rows are i.i.d. symmetric Dirichlet draws.
///
/// Draw order is fixed: all transition rows in `(x, a)` order, then all rewards.
pub fn generate_random_mdp(
    num_states: usize,
    num_actions: usize,
    gamma: f64,
    dirichlet_alpha: f64,
    reward_spec: RewardSpec,
    rng: &mut Rng,
) -> Result<TabularMdp> {
    if num_states < 2 {
        return Err(Error::param(format!("need at least 2 states, got {num_states}")));
    }
    if num_actions < 1 {
        return Err(Error::param("need at least 1 action"));
    }
    if !(dirichlet_alpha > 0.0 && dirichlet_alpha.is_finite()) {
        return Err(Error::param(format!("dirichlet_alpha must be > 0, got {dirichlet_alpha}")));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::param(format!("gamma must lie in [0, 1), got {gamma}")));
    }
    let mut transition = Vec::with_capacity(num_states * num_actions * num_states);
    for _ in 0..num_states * num_actions {
        transition.extend(rng.dirichlet(dirichlet_alpha, num_states)?);
    }
    let reward_mean = match reward_spec {
        RewardSpec::Uniform { low, high } => {
            if !(low.is_finite() && high.is_finite() && low <= high) {
                return Err(Error::param(format!("bad reward range [{low}, {high})")));
            }
            (0..num_states * num_actions).map(|_| rng.uniform_range(low, high)).collect()
        }
        RewardSpec::Constant(c) => vec![c; num_states * num_actions],
    };
    Ok(TabularMdp::new(num_states, num_actions, transition, reward_mean, gamma)?.with_generator_seed(Some(rng.seed())))
}

/// `ε · uniform + (1 − ε) · π_det`.
pub fn mixed_policy(epsilon: f64, pi_det: &PolicyTable, num_actions: usize) -> Result<PolicyTable> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::param(format!("epsilon must lie in [0, 1], got {epsilon}")));
    }
    if pi_det.num_actions() != num_actions {
        return Err(Error::dims(format!("{num_actions} actions"), format!("{} actions", pi_det.num_actions())));
    }
    if pi_det.deterministic_actions().is_none() {
        return Err(Error::param("pi_det must have one-hot rows"));
    }
    let u = 1.0 / num_actions as f64;
    let probs = pi_det.as_slice().iter().map(|&p| epsilon * u + (1.0 - epsilon) * p).collect();
    PolicyTable::new(pi_det.num_states(), num_actions, probs)
}

/// One-hot policy on a uniformly sampled action per state.
pub fn random_deterministic_policy(num_states: usize, num_actions: usize, rng: &mut Rng) -> Result<PolicyTable> {
    if num_states == 0 || num_actions == 0 {
        return Err(Error::param("need at least one state and one action"));
    }
    let actions: Vec<usize> = (0..num_states).map(|_| rng.index(num_actions)).collect();
    PolicyTable::deterministic(num_actions, &actions)
}

/// State indices of the two-state demo MDP.
pub const DEMO_X: usize = 0;
pub const DEMO_Y: usize = 1;
/// Action indices of the two-state demo MDP.
pub const DEMO_A: usize = 0;
pub const DEMO_B: usize = 1;

/// The two-state walkthrough MDP: both actions move `x` to `y`, `y` is
/// absorbing, and only `(y, a)` pays reward 1. Discount 0.99.
pub fn demo_two_state_mdp() -> TabularMdp {
    #[rustfmt::skip]
    let transition = vec![
        0.0, 1.0,   0.0, 1.0,  // x: a -> y, b -> y
        0.0, 1.0,   0.0, 1.0,  // y: absorbing
    ];
    let reward_mean = vec![0.0, 0.0, 1.0, 0.0];
    TabularMdp::new(2, 2, transition, reward_mean, 0.99).expect("demo MDP is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn benchmark_sized_mdp_is_valid() {
        let mut rng = Rng::new(3);
        let mdp = generate_random_mdp(20, 5, 0.99, 0.5, RewardSpec::default(), &mut rng).unwrap();
        assert_eq!((mdp.num_states(), mdp.num_actions()), (20, 5));
        mdp.validate().unwrap();
        assert!(mdp.reward_table().iter().all(|r| (0.0..1.0).contains(r)));
        assert_eq!(mdp.generator_seed(), Some(3));
    }

    #[test]
    fn generator_is_deterministic() {
        let a = generate_random_mdp(6, 3, 0.9, 0.5, RewardSpec::default(), &mut Rng::new(42)).unwrap();
        let b = generate_random_mdp(6, 3, 0.9, 0.5, RewardSpec::default(), &mut Rng::new(42)).unwrap();
        assert_eq!(a, b);
        let bits = |m: &TabularMdp| m.transition_table().iter().map(|p| p.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn generator_rejects_bad_parameters() {
        let mut rng = Rng::new(0);
        let spec = RewardSpec::default();
        assert!(generate_random_mdp(1, 2, 0.9, 0.5, spec, &mut rng).is_err());
        assert!(generate_random_mdp(3, 0, 0.9, 0.5, spec, &mut rng).is_err());
        assert!(generate_random_mdp(3, 2, 1.0, 0.5, spec, &mut rng).is_err());
        assert!(generate_random_mdp(3, 2, -0.1, 0.5, spec, &mut rng).is_err());
        assert!(generate_random_mdp(3, 2, 0.9, 0.0, spec, &mut rng).is_err());
    }

    #[test]
    fn constructor_checks_invariants() {
        assert!(TabularMdp::new(1, 1, vec![1.0], vec![0.0], 1.0).is_err());
        assert!(TabularMdp::new(1, 1, vec![0.9], vec![0.0], 0.5).is_err());
        assert!(TabularMdp::new(1, 1, vec![1.0], vec![f64::NAN], 0.5).is_err());
        assert!(TabularMdp::new(2, 1, vec![1.5, -0.5, 0.0, 1.0], vec![0.0, 0.0], 0.5).is_err());
        assert!(TabularMdp::new(1, 1, vec![1.0], vec![1.0], 0.5).is_ok());
    }

    #[test]
    fn mixed_policy_endpoints_and_interior() {
        let pi_det = PolicyTable::deterministic(5, &[2, 0]).unwrap();
        let uniform = mixed_policy(1.0, &pi_det, 5).unwrap();
        assert!(uniform.as_slice().iter().all(|&p| (p - 0.2).abs() < 1e-15));
        assert!(uniform.full_coverage());
        let same = mixed_policy(0.0, &pi_det, 5).unwrap();
        assert_eq!(same, pi_det);
        assert!(!same.full_coverage());
        let mixed = mixed_policy(0.8, &pi_det, 5).unwrap();
        let expected = [0.16, 0.16, 0.36, 0.16, 0.16];
        for (p, e) in mixed.row(0).iter().zip(expected) {
            assert!((p - e).abs() < 1e-15, "{p} vs {e}");
        }
    }

    #[test]
    fn mixed_policy_rejects_stochastic_base() {
        let u = PolicyTable::uniform(2, 3);
        assert!(mixed_policy(0.5, &u, 3).is_err());
        let pi_det = PolicyTable::deterministic(3, &[0, 1]).unwrap();
        assert!(mixed_policy(1.5, &pi_det, 3).is_err());
        assert!(mixed_policy(0.5, &pi_det, 4).is_err());
    }

    #[test]
    fn single_state_single_action_policy() {
        let p = random_deterministic_policy(1, 1, &mut Rng::new(9)).unwrap();
        assert_eq!(p.as_slice(), &[1.0]);
    }

    #[test]
    fn random_policy_is_reproducible() {
        let a = random_deterministic_policy(20, 5, &mut Rng::new(11)).unwrap();
        let b = random_deterministic_policy(20, 5, &mut Rng::new(11)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn random_policy_action_frequencies_are_uniform() {
        // Frequency oracle: 10^4 independent policies, each state's chosen action
        // should be uniform over 5 actions.
        let (s, a, n) = (20, 5, 10_000);
        let mut counts = vec![0usize; s * a];
        let mut rng = Rng::new(2024);
        for _ in 0..n {
            let p = random_deterministic_policy(s, a, &mut rng).unwrap();
            for (x, act) in p.deterministic_actions().unwrap().into_iter().enumerate() {
                counts[x * a + act] += 1;
            }
        }
        for c in counts {
            let freq = c as f64 / n as f64;
            assert!((freq - 0.2).abs() < 0.02, "frequency {freq}");
        }
    }

    #[test]
    fn demo_mdp_structure() {
        let mdp = demo_two_state_mdp();
        mdp.validate().unwrap();
        assert_eq!(mdp.next_state_probs(DEMO_X, DEMO_A)[DEMO_Y], 1.0);
        assert_eq!(mdp.next_state_probs(DEMO_Y, DEMO_B)[DEMO_Y], 1.0);
        assert_eq!(mdp.reward(DEMO_Y, DEMO_A), 1.0);
        assert_eq!(mdp.reward(DEMO_Y, DEMO_B), 0.0);
        assert_eq!(mdp.reward(DEMO_X, DEMO_A), 0.0);
    }

    #[test]
    fn json_round_trip_is_value_exact() {
        let mdp = generate_random_mdp(4, 3, 0.95, 0.3, RewardSpec::default(), &mut Rng::new(5)).unwrap();
        let text = mdp.to_json().unwrap();
        let back = TabularMdp::from_json(&text).unwrap();
        assert_eq!(back, mdp);
        let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        for key in ["num_states", "num_actions", "gamma", "transition", "reward_mean", "generator_seed"] {
            assert!(doc.get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn json_rejects_invalid_documents() {
        let text = r#"{"num_states":1,"num_actions":1,"gamma":0.5,"transition":[[[0.5]]],"reward_mean":[[0.0]],"generator_seed":null}"#;
        assert!(TabularMdp::from_json(text).is_err());
        let unknown = r#"{"num_states":1,"num_actions":1,"gamma":0.5,"transition":[[[1.0]]],"reward_mean":[[0.0]],"generator_seed":null,"extra":1}"#;
        assert!(TabularMdp::from_json(unknown).is_err());
    }
}
