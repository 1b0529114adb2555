//! Two-state walkthrough: only action `a` has been taken at `y`, yet the
//! VA-learning estimate of `Q(y,b)` moves through the shared value `V(y)`,
//! and the preceding state `x` bootstraps from it.

use std::fmt::Write as _;
use std::slice::from_ref;

use valab_core::learners::{td_update, va_update, LearnMode, LearnSpec, QLearnerState, VaLearnerState};
use valab_core::mdp::{demo_two_state_mdp, DEMO_A, DEMO_B, DEMO_X, DEMO_Y};
use valab_core::sampler::Transition;
use valab_core::{PolicyTable, Rng};

pub const DEMO_LR: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct DemoRow {
    pub step: usize,
    pub transition: Transition,
    /// `[Q(x,a), Q(x,b), Q(y,a), Q(y,b)]` of TD-learning.
    pub td_q: [f64; 4],
    /// The same entries of the VA-learning implied `Q = V + A`.
    pub va_q: [f64; 4],
}

/// Data-collection policy: uniform at `x`, only `a` at `y` so far.
pub fn demo_data_policy() -> PolicyTable {
    PolicyTable::from_rows(&[vec![0.5, 0.5], vec![1.0, 0.0]]).expect("valid demo policy")
}

/// Runs `episodes` two-step episodes `x → y → y` under the data policy and
/// records both learners after every update.
pub fn run_demo(episodes: usize, seed: u64) -> Vec<DemoRow> {
    let mdp = demo_two_state_mdp();
    // Both the evaluated policy and the behavior fed to VA-learning are uniform.
    let pi = PolicyTable::uniform(2, 2);
    let data = demo_data_policy();
    let spec = LearnSpec { lr: DEMO_LR, target_period: 1, ..LearnSpec::new(LearnMode::Evaluation(pi.clone()), mdp.gamma()) };
    let mut rng = Rng::new(seed);
    let mut td = QLearnerState::new(2, 2);
    let mut va = VaLearnerState::new(2, 2);
    let mut rows = Vec::new();
    for _ in 0..episodes {
        let mut x = DEMO_X;
        for _ in 0..2 {
            let a = rng.categorical(data.row(x));
            let (r, x_next) = mdp.sample_step(x, a, &mut rng);
            let t = Transition { x, a, r, x_next };
            td_update(&mut td, from_ref(&t), &pi, &spec).expect("demo update");
            va_update(&mut va, from_ref(&t), &pi, &spec).expect("demo update");
            let q = va.implied_q();
            let pick = |get: &dyn Fn(usize, usize) -> f64| {
                [get(DEMO_X, DEMO_A), get(DEMO_X, DEMO_B), get(DEMO_Y, DEMO_A), get(DEMO_Y, DEMO_B)]
            };
            rows.push(DemoRow { step: rows.len() + 1, transition: t, td_q: pick(&|s, a| td.q.get(s, a)), va_q: pick(&|s, a| q.get(s, a)) });
            x = x_next;
        }
    }
    rows
}

fn state_name(x: usize) -> &'static str {
    if x == DEMO_X {
        "x"
    } else {
        "y"
    }
}

fn action_name(a: usize) -> &'static str {
    if a == DEMO_A {
        "a"
    } else {
        "b"
    }
}

pub fn render_demo(rows: &[DemoRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "two-state walkthrough: gamma 0.99, lr {DEMO_LR}, uniform target and behavior, only a sampled at y");
    let _ = writeln!(
        out,
        "{:>4}  {:<14} | {:>8} {:>8} {:>8} {:>8} | {:>8} {:>8} {:>8} {:>8}",
        "step", "transition", "TD x,a", "TD x,b", "TD y,a", "TD y,b", "VA x,a", "VA x,b", "VA y,a", "VA y,b"
    );
    for r in rows {
        let t = r.transition;
        let label = format!("({},{},{},{})", state_name(t.x), action_name(t.a), t.r, state_name(t.x_next));
        let _ = write!(out, "{:>4}  {:<14} |", r.step, label);
        for v in r.td_q {
            let _ = write!(out, " {v:>8.4}");
        }
        let _ = write!(out, " |");
        for v in r.va_q {
            let _ = write!(out, " {v:>8.4}");
        }
        out.push('\n');
    }
    out
}
