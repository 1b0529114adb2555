//! Tabular reinforcement-learning laboratory for VA-learning.
//!
//! The crate is organized bottom-up:
//!
//! - [`mdp`]: finite MDPs, stochastic policies and the random generators used by
//!   the experiments.
//! - [`exact`]: Bellman operators, fixed-point solvers, the expected VA recursion
//!   and the behavior-adapted value/advantage targets. These are the oracles.
//! - [`sampler`]: trajectory collection, transition streams and the count-based
//!   behavior-policy estimate.
//! - [`learners`]: TD-learning, Q-learning, VA-learning and the dueling
//!   parameterizations, in incremental, batch-gradient and synchronous forms.
//! - [`analysis`]: error norms, convergence-rate certificates, gradient and
//!   advantage-norm checks, and metric records.

pub mod analysis;
pub mod error;
pub mod exact;
pub mod learners;
pub mod mdp;
pub mod rng;
pub mod sampler;
pub mod tables;

pub use error::{Error, Result};
pub use mdp::TabularMdp;
pub use rng::Rng;
pub use tables::{AdvTable, PolicyTable, QTable, ValueTable};
