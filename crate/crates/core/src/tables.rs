//! Dense value tables and stochastic policies.
//!
//! State-action tables are stored row-major (`x * num_actions + a`). In JSON they
//! appear as `{"num_states", "num_actions", "values": [[..], ..]}` with one inner
//! array per state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on every probability row sum.
pub const PROB_TOL: f64 = 1e-12;

#[derive(Serialize, Deserialize)]
struct NestedTable {
    num_states: usize,
    num_actions: usize,
    values: Vec<Vec<f64>>,
}

fn flatten(nested: NestedTable) -> Result<(usize, usize, Vec<f64>)> {
    if nested.values.len() != nested.num_states {
        return Err(Error::dims(
            format!("{} rows", nested.num_states),
            format!("{} rows", nested.values.len()),
        ));
    }
    let mut flat = Vec::with_capacity(nested.num_states * nested.num_actions);
    for row in nested.values {
        if row.len() != nested.num_actions {
            return Err(Error::dims(
                format!("{} columns", nested.num_actions),
                format!("{} columns", row.len()),
            ));
        }
        flat.extend(row);
    }
    Ok((nested.num_states, nested.num_actions, flat))
}

fn nest(num_states: usize, num_actions: usize, values: &[f64]) -> NestedTable {
    NestedTable {
        num_states,
        num_actions,
        values: values.chunks(num_actions.max(1)).map(<[f64]>::to_vec).collect(),
    }
}

macro_rules! state_action_table {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(into = "NestedTable", try_from = "NestedTable")]
        pub struct $name {
            num_states: usize,
            num_actions: usize,
            values: Vec<f64>,
        }

        impl $name {
            pub fn zeros(num_states: usize, num_actions: usize) -> Self {
                Self::filled(num_states, num_actions, 0.0)
            }

            pub fn filled(num_states: usize, num_actions: usize, value: f64) -> Self {
                Self { num_states, num_actions, values: vec![value; num_states * num_actions] }
            }

            pub fn from_fn(num_states: usize, num_actions: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
                let mut values = Vec::with_capacity(num_states * num_actions);
                for x in 0..num_states {
                    for a in 0..num_actions {
                        values.push(f(x, a));
                    }
                }
                Self { num_states, num_actions, values }
            }

            /// Builds a table from row-major values.
            pub fn from_vec(num_states: usize, num_actions: usize, values: Vec<f64>) -> Result<Self> {
                if values.len() != num_states * num_actions {
                    return Err(Error::dims(num_states * num_actions, values.len()));
                }
                if let Some(v) = values.iter().find(|v| !v.is_finite()) {
                    return Err(Error::param(format!("non-finite table entry {v}")));
                }
                Ok(Self { num_states, num_actions, values })
            }

            pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
                let num_actions = rows.first().map_or(0, Vec::len);
                flatten(NestedTable { num_states: rows.len(), num_actions, values: rows.to_vec() })
                    .and_then(|(s, a, v)| Self::from_vec(s, a, v))
            }

            pub fn num_states(&self) -> usize {
                self.num_states
            }

            pub fn num_actions(&self) -> usize {
                self.num_actions
            }

            pub fn shape(&self) -> (usize, usize) {
                (self.num_states, self.num_actions)
            }

            #[inline]
            pub fn get(&self, x: usize, a: usize) -> f64 {
                self.values[x * self.num_actions + a]
            }

            #[inline]
            pub fn set(&mut self, x: usize, a: usize, value: f64) {
                self.values[x * self.num_actions + a] = value;
            }

            #[inline]
            pub fn add(&mut self, x: usize, a: usize, delta: f64) {
                self.values[x * self.num_actions + a] += delta;
            }

            #[inline]
            pub fn row(&self, x: usize) -> &[f64] {
                &self.values[x * self.num_actions..(x + 1) * self.num_actions]
            }

            #[inline]
            pub fn row_mut(&mut self, x: usize) -> &mut [f64] {
                &mut self.values[x * self.num_actions..(x + 1) * self.num_actions]
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.values
            }

            pub fn as_mut_slice(&mut self) -> &mut [f64] {
                &mut self.values
            }

            /// Largest absolute entrywise difference. Panics on shape mismatch.
            pub fn sup_dist(&self, other: &Self) -> f64 {
                assert_eq!(self.shape(), other.shape(), "table shapes differ");
                self.values
                    .iter()
                    .zip(&other.values)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            }

            pub fn sup_norm(&self) -> f64 {
                self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
            }

            /// Max over actions in state `x`.
            pub fn row_max(&self, x: usize) -> f64 {
                self.row(x).iter().copied().fold(f64::NEG_INFINITY, f64::max)
            }

            /// Entrywise combination of two tables of equal shape.
            pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
                assert_eq!(self.shape(), other.shape(), "table shapes differ");
                Self {
                    num_states: self.num_states,
                    num_actions: self.num_actions,
                    values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
                }
            }

            pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
                Self {
                    num_states: self.num_states,
                    num_actions: self.num_actions,
                    values: self.values.iter().map(|&v| f(v)).collect(),
                }
            }

            pub fn to_rows(&self) -> Vec<Vec<f64>> {
                nest(self.num_states, self.num_actions, &self.values).values
            }
        }

        impl From<$name> for NestedTable {
            fn from(t: $name) -> Self {
                nest(t.num_states, t.num_actions, &t.values)
            }
        }

        impl TryFrom<NestedTable> for $name {
            type Error = Error;

            fn try_from(n: NestedTable) -> Result<Self> {
                let (s, a, v) = flatten(n)?;
                Self::from_vec(s, a, v)
            }
        }
    };
}

state_action_table!(
    /// Action-value table `Q(x, a)`. Also holds the unconstrained dueling function `f`.
    QTable
);

state_action_table!(
    /// Advantage table `A(x, a)`.
    AdvTable
);

impl AdvTable {
    pub fn into_q(self) -> QTable {
        QTable { num_states: self.num_states, num_actions: self.num_actions, values: self.values }
    }
}

impl QTable {
    pub fn into_adv(self) -> AdvTable {
        AdvTable { num_states: self.num_states, num_actions: self.num_actions, values: self.values }
    }

    /// `Q(x, a) = V(x) + A(x, a)`.
    pub fn from_value_advantage(v: &ValueTable, adv: &AdvTable) -> Self {
        assert_eq!(v.len(), adv.num_states(), "value/advantage state counts differ");
        QTable::from_fn(adv.num_states(), adv.num_actions(), |x, a| v.get(x) + adv.get(x, a))
    }
}

/// State-value table `V(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValueTable {
    values: Vec<f64>,
}

impl ValueTable {
    pub fn zeros(num_states: usize) -> Self {
        Self { values: vec![0.0; num_states] }
    }

    pub fn from_vec(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::param(format!("non-finite value entry {v}")));
        }
        Ok(Self { values })
    }

    pub fn from_fn(num_states: usize, f: impl FnMut(usize) -> f64) -> Self {
        Self { values: (0..num_states).map(f).collect() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize) -> f64 {
        self.values[x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, value: f64) {
        self.values[x] = value;
    }

    #[inline]
    pub fn add(&mut self, x: usize, delta: f64) {
        self.values[x] += delta;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn sup_dist(&self, other: &Self) -> f64 {
        assert_eq!(self.len(), other.len(), "value table lengths differ");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Stochastic tabular policy; every row is a distribution over actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "NestedTable", try_from = "NestedTable")]
pub struct PolicyTable {
    num_states: usize,
    num_actions: usize,
    probs: Vec<f64>,
}

impl PolicyTable {
    /// Validates that every row is a probability distribution.
    pub fn new(num_states: usize, num_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::param("policy needs at least one state and one action"));
        }
        if probs.len() != num_states * num_actions {
            return Err(Error::dims(num_states * num_actions, probs.len()));
        }
        for (x, row) in probs.chunks(num_actions).enumerate() {
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(Error::param(format!("policy row {x} has a negative or non-finite entry")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > PROB_TOL {
                return Err(Error::param(format!("policy row {x} sums to {sum}")));
            }
        }
        Ok(Self { num_states, num_actions, probs })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let num_actions = rows.first().map_or(0, Vec::len);
        let (s, a, p) = flatten(NestedTable { num_states: rows.len(), num_actions, values: rows.to_vec() })?;
        Self::new(s, a, p)
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_states,
            num_actions,
            probs: vec![1.0 / num_actions as f64; num_states * num_actions],
        }
    }

    /// One-hot policy choosing `actions[x]` in state `x`.
    pub fn deterministic(num_actions: usize, actions: &[usize]) -> Result<Self> {
        if num_actions == 0 || actions.is_empty() {
            return Err(Error::param("deterministic policy needs at least one state and one action"));
        }
        let mut probs = vec![0.0; actions.len() * num_actions];
        for (x, &a) in actions.iter().enumerate() {
            if a >= num_actions {
                return Err(Error::param(format!("action {a} out of range in state {x}")));
            }
            probs[x * num_actions + a] = 1.0;
        }
        Ok(Self { num_states: actions.len(), num_actions, probs })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.num_states, self.num_actions)
    }

    #[inline]
    pub fn prob(&self, x: usize, a: usize) -> f64 {
        self.probs[x * self.num_actions + a]
    }

    #[inline]
    pub fn row(&self, x: usize) -> &[f64] {
        &self.probs[x * self.num_actions..(x + 1) * self.num_actions]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// True when every entry is strictly positive.
    pub fn full_coverage(&self) -> bool {
        self.probs.iter().all(|&p| p > 0.0)
    }

    /// The chosen action per state if every row is one-hot.
    pub fn deterministic_actions(&self) -> Option<Vec<usize>> {
        (0..self.num_states)
            .map(|x| {
                let row = self.row(x);
                let ones = row.iter().filter(|&&p| p == 1.0).count();
                let zeros = row.iter().filter(|&&p| p == 0.0).count();
                (ones == 1 && ones + zeros == row.len()).then(|| row.iter().position(|&p| p == 1.0).unwrap())
            })
            .collect()
    }

    /// `Σ_a π(a|x) row[a]`.
    #[inline]
    pub fn expect(&self, x: usize, row: &[f64]) -> f64 {
        self.row(x).iter().zip(row).map(|(p, v)| p * v).sum()
    }

    /// The state table `x ↦ Σ_a π(a|x) table(x, a)`.
    pub fn average_q(&self, q: &QTable) -> ValueTable {
        ValueTable::from_fn(q.num_states(), |x| self.expect(x, q.row(x)))
    }

    pub fn average_adv(&self, adv: &AdvTable) -> ValueTable {
        ValueTable::from_fn(adv.num_states(), |x| self.expect(x, adv.row(x)))
    }

    pub fn check_shape(&self, num_states: usize, num_actions: usize) -> Result<()> {
        if self.shape() != (num_states, num_actions) {
            return Err(Error::dims(
                format!("policy {num_states}x{num_actions}"),
                format!("policy {}x{}", self.num_states, self.num_actions),
            ));
        }
        Ok(())
    }
}

impl From<PolicyTable> for NestedTable {
    fn from(p: PolicyTable) -> Self {
        nest(p.num_states, p.num_actions, &p.probs)
    }
}

impl TryFrom<NestedTable> for PolicyTable {
    type Error = Error;

    fn try_from(n: NestedTable) -> Result<Self> {
        let (s, a, p) = flatten(n)?;
        Self::new(s, a, p)
    }
}
