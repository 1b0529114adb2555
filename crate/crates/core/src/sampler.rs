//! Trajectory collection under a fixed behavior policy, transition streams,
//! and the count-based estimate of the behavior policy.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::TabularMdp;
use crate::rng::Rng;
use crate::tables::PolicyTable;

/// One sampled step `(x, a, r, x')`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub x: usize,
    pub a: usize,
    pub r: f64,
    pub x_next: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub start_state: usize,
    pub truncation_length: usize,
    pub transitions: Vec<Transition>,
}

impl Trajectory {
    /// Consecutive transitions chain and the length respects truncation.
    pub fn is_chained(&self) -> bool {
        let starts_right = self.transitions.first().is_none_or(|t| t.x == self.start_state);
        starts_right
            && self.transitions.len() <= self.truncation_length
            && self.transitions.windows(2).all(|w| w[0].x_next == w[1].x)
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Up to `n` transitions starting at `step`, cut at the trajectory end.
    pub fn window(&self, step: usize, n: usize) -> &[Transition] {
        let end = (step + n).min(self.transitions.len());
        &self.transitions[step..end]
    }
}

/// Truncation length `round(2 / (1 − γ))`.
pub fn default_horizon(gamma: f64) -> usize {
    (2.0 / (1.0 - gamma)).round().max(1.0) as usize
}

/// Collects `n_traj` trajectories of exactly `horizon` steps from `start_state`.
///
/// Draw order per step: action, next state, then reward noise if enabled.
pub fn collect_trajectories(
    mdp: &TabularMdp,
    mu: &PolicyTable,
    n_traj: usize,
    horizon: usize,
    start_state: usize,
    rng: &mut Rng,
) -> Result<Vec<Trajectory>> {
    if start_state >= mdp.num_states() {
        return Err(Error::param(format!("start_state {start_state} out of range")));
    }
    if n_traj == 0 || horizon == 0 {
        return Err(Error::param("n_traj and horizon must be >= 1"));
    }
    mu.check_shape(mdp.num_states(), mdp.num_actions())?;
    let trajectories = (0..n_traj)
        .map(|_| {
            let mut x = start_state;
            let transitions = (0..horizon)
                .map(|_| {
                    let a = rng.categorical(mu.row(x));
                    let (r, x_next) = mdp.sample_step(x, a, rng);
                    let t = Transition { x, a, r, x_next };
                    x = x_next;
                    t
                })
                .collect();
            Trajectory { start_state, truncation_length: horizon, transitions }
        })
        .collect();
    Ok(trajectories)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamOrder {
    #[default]
    Sequential,
    Shuffled,
}

/// One epoch over every transition. `Shuffled` draws a permutation from `rng`.
pub fn transition_stream(
    trajectories: &[Trajectory],
    order: StreamOrder,
    rng: &mut Rng,
) -> std::vec::IntoIter<Transition> {
    let mut all: Vec<Transition> = trajectories.iter().flat_map(|t| t.transitions.iter().copied()).collect();
    if order == StreamOrder::Shuffled {
        rng.shuffle(&mut all);
    }
    all.into_iter()
}

/// n-step windows for every transition of every trajectory, in sequential order.
/// Windows near a trajectory end are shorter than `n`.
pub fn nstep_windows(trajectories: &[Trajectory], n: usize) -> Vec<&[Transition]> {
    trajectories
        .iter()
        .flat_map(|traj| (0..traj.len()).map(move |step| traj.window(step, n.max(1))))
        .collect()
}

/// Writes trajectories as CSV: `traj_id,step,x,a,r,x_next`.
pub fn write_trajectories_csv<W: Write>(trajectories: &[Trajectory], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["traj_id", "step", "x", "a", "r", "x_next"])?;
    for (id, traj) in trajectories.iter().enumerate() {
        for (step, t) in traj.transitions.iter().enumerate() {
            w.write_record([
                id.to_string(),
                step.to_string(),
                t.x.to_string(),
                t.a.to_string(),
                format!("{:.16e}", t.r),
                t.x_next.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Visit counts of `(x, a)` pairs; the maximum-likelihood tabular behavior policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorEstimate {
    num_states: usize,
    num_actions: usize,
    counts: Vec<u64>,
    smoothing: f64,
}

impl BehaviorEstimate {
    pub fn new(num_states: usize, num_actions: usize, smoothing: f64) -> Result<Self> {
        if !(smoothing >= 0.0 && smoothing.is_finite()) {
            return Err(Error::param(format!("smoothing must be >= 0, got {smoothing}")));
        }
        if num_states == 0 || num_actions == 0 {
            return Err(Error::param("need at least one state and one action"));
        }
        Ok(Self { num_states, num_actions, counts: vec![0; num_states * num_actions], smoothing })
    }

    pub fn from_transitions<'a>(
        num_states: usize,
        num_actions: usize,
        smoothing: f64,
        transitions: impl IntoIterator<Item = &'a Transition>,
    ) -> Result<Self> {
        let mut est = Self::new(num_states, num_actions, smoothing)?;
        for t in transitions {
            est.update(t);
        }
        Ok(est)
    }

    /// Records one observed `(x, a)`. Panics on out-of-range indices.
    pub fn update(&mut self, t: &Transition) {
        assert!(t.x < self.num_states && t.a < self.num_actions, "transition out of bounds");
        self.counts[t.x * self.num_actions + t.a] += 1;
    }

    pub fn count(&self, x: usize, a: usize) -> u64 {
        self.counts[x * self.num_actions + a]
    }

    pub fn state_count(&self, x: usize) -> u64 {
        self.counts[x * self.num_actions..(x + 1) * self.num_actions].iter().sum()
    }

    /// `(counts + smoothing) / (row sum + |A|·smoothing)`; uniform for unvisited states.
    pub fn estimated_policy(&self) -> PolicyTable {
        let a = self.num_actions;
        let mut probs = Vec::with_capacity(self.counts.len());
        for x in 0..self.num_states {
            let row = &self.counts[x * a..(x + 1) * a];
            let denom = row.iter().sum::<u64>() as f64 + a as f64 * self.smoothing;
            if denom == 0.0 {
                probs.extend(std::iter::repeat_n(1.0 / a as f64, a));
            } else {
                let mut r: Vec<f64> = row.iter().map(|&c| (c as f64 + self.smoothing) / denom).collect();
                // renormalize so the row sum is as close to 1 as rounding allows
                let s: f64 = r.iter().sum();
                r.iter_mut().for_each(|p| *p /= s);
                probs.extend(r);
            }
        }
        PolicyTable::new(self.num_states, a, probs).expect("count ratios form distributions")
    }
}
