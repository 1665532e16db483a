//! Finite Markov processes that drive the query arrivals and the channel
//! erasure probability.
//!
//! A [`MarkovProcess`] is a row-stochastic transition matrix plus one label per
//! state. Error chains label each state with an erasure probability, query
//! chains mark the subset of states in which a query arrives. States are
//! zero-based throughout the crate.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Maximum allowed deviation of a row sum from one.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("a chain needs at least one state")]
    Empty,
    #[error("transition row {row} has {len} entries, expected {expected}")]
    NotSquare { row: usize, len: usize, expected: usize },
    #[error("transition entry ({row}, {col}) = {value} is not a probability")]
    BadEntry { row: usize, col: usize, value: f64 },
    #[error("transition row {row} sums to {sum}")]
    NotStochastic { row: usize, sum: f64 },
    #[error("{labels} labels supplied for {states} states")]
    LabelCount { labels: usize, states: usize },
    #[error("erasure probability {value} of state {state} is outside [0, 1]")]
    BadErasure { state: usize, value: f64 },
    #[error("query chain has no query state")]
    NoQueryState,
    #[error("invalid chain parameter: {0}")]
    InvalidParameter(String),
    #[error("state {state} is out of range for a {states}-state chain")]
    StateOutOfRange { state: usize, states: usize },
}

/// Per-state attribute of a chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateLabels {
    /// Packet erasure probability in each state.
    Erasure(Vec<f64>),
    /// Whether a query arrives when the chain is in each state.
    Query(Vec<bool>),
}

impl StateLabels {
    fn len(&self) -> usize {
        match self {
            StateLabels::Erasure(v) => v.len(),
            StateLabels::Query(v) => v.len(),
        }
    }
}

/// Plain matrix-plus-labels form used for (de)serialization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainData {
    pub transition: Vec<Vec<f64>>,
    pub labels: StateLabels,
}

/// Immutable, validated finite Markov chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChainData", into = "ChainData")]
pub struct MarkovProcess {
    n_states: usize,
    transition: Vec<f64>,
    rows: Vec<Vec<(usize, f64)>>,
    labels: StateLabels,
}

impl TryFrom<ChainData> for MarkovProcess {
    type Error = ChainError;

    fn try_from(data: ChainData) -> Result<Self, Self::Error> {
        MarkovProcess::new(data.transition, data.labels)
    }
}

impl From<MarkovProcess> for ChainData {
    fn from(chain: MarkovProcess) -> Self {
        let n = chain.n_states;
        ChainData {
            transition: chain.transition.chunks(n).map(<[f64]>::to_vec).collect(),
            labels: chain.labels,
        }
    }
}

impl MarkovProcess {
    /// Validates and wraps an explicit transition matrix.
    pub fn new(transition: Vec<Vec<f64>>, labels: StateLabels) -> Result<Self, ChainError> {
        let n = transition.len();
        if n == 0 {
            return Err(ChainError::Empty);
        }
        if labels.len() != n {
            return Err(ChainError::LabelCount { labels: labels.len(), states: n });
        }
        let mut dense = Vec::with_capacity(n * n);
        let mut rows = Vec::with_capacity(n);
        for (row, entries) in transition.iter().enumerate() {
            if entries.len() != n {
                return Err(ChainError::NotSquare { row, len: entries.len(), expected: n });
            }
            let mut sparse = Vec::new();
            for (col, &value) in entries.iter().enumerate() {
                if !(0.0..=1.0).contains(&value) {
                    return Err(ChainError::BadEntry { row, col, value });
                }
                if value > 0.0 {
                    sparse.push((col, value));
                }
            }
            let sum: f64 = entries.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(ChainError::NotStochastic { row, sum });
            }
            dense.extend_from_slice(entries);
            rows.push(sparse);
        }
        match &labels {
            StateLabels::Erasure(eps) => {
                if let Some((state, &value)) =
                    eps.iter().enumerate().find(|(_, e)| !(0.0..=1.0).contains(*e))
                {
                    return Err(ChainError::BadErasure { state, value });
                }
            }
            StateLabels::Query(marks) => {
                if !marks.iter().any(|&q| q) {
                    return Err(ChainError::NoQueryState);
                }
            }
        }
        Ok(MarkovProcess { n_states: n, transition: dense, rows, labels })
    }

    /// Deterministic cycle `0 -> 1 -> ... -> period-1 -> 0` with the query
    /// arriving in the last state of the cycle.
    pub fn periodic_query(period: usize) -> Result<Self, ChainError> {
        if period == 0 {
            return Err(ChainError::InvalidParameter("query period must be at least 1".into()));
        }
        let mut marks = vec![false; period];
        marks[period - 1] = true;
        Self::new(cycle_matrix(period), StateLabels::Query(marks))
    }

    /// Query chain whose inter-query gap is uniform on `min_gap..=max_gap`.
    ///
    /// State `s` (zero-based) means `s + 1` slots have elapsed since the last
    /// query. The chain increments deterministically while the gap cannot end
    /// yet, then resets to state 0 with hazard `1 / (max_gap - gap + 1)`.
    /// State 0 is the query state.
    pub fn uniform_query(min_gap: usize, max_gap: usize) -> Result<Self, ChainError> {
        if min_gap == 0 || min_gap > max_gap {
            return Err(ChainError::InvalidParameter(format!(
                "uniform query gaps need 1 <= min_gap <= max_gap, got {min_gap}..={max_gap}"
            )));
        }
        let n = max_gap;
        let mut matrix = vec![vec![0.0; n]; n];
        for (s, row) in matrix.iter_mut().enumerate() {
            let gap = s + 1;
            if gap < min_gap {
                row[s + 1] = 1.0;
            } else if gap == max_gap {
                row[0] = 1.0;
            } else {
                let hazard = 1.0 / (max_gap - gap + 1) as f64;
                row[0] = hazard;
                row[s + 1] = 1.0 - hazard;
            }
        }
        let mut marks = vec![false; n];
        marks[0] = true;
        Self::new(matrix, StateLabels::Query(marks))
    }

    /// Memoryless query process: a query arrives in every slot with
    /// probability `q`, independently of the past. State 1 is the query state.
    pub fn bernoulli_query(q: f64) -> Result<Self, ChainError> {
        if !(0.0..=1.0).contains(&q) {
            return Err(ChainError::InvalidParameter(format!("query probability {q} is not in [0, 1]")));
        }
        let row = vec![1.0 - q, q];
        Self::new(vec![row.clone(), row], StateLabels::Query(vec![false, true]))
    }

    /// Single-state channel with a constant erasure probability.
    pub fn constant_error(epsilon: f64) -> Result<Self, ChainError> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(ChainError::InvalidParameter(format!("erasure probability {epsilon} is not in [0, 1]")));
        }
        Self::new(vec![vec![1.0]], StateLabels::Erasure(vec![epsilon]))
    }

    /// Periodic satellite pass: a deterministic `period`-cycle whose first
    /// `window` states have erasure probability `epsilon0` and whose remaining
    /// states block every transmission.
    pub fn satellite_error(period: usize, epsilon0: f64, window: usize) -> Result<Self, ChainError> {
        if period == 0 || window == 0 || window > period {
            return Err(ChainError::InvalidParameter(format!(
                "satellite pass needs 1 <= window <= period, got window {window}, period {period}"
            )));
        }
        if !(0.0..=1.0).contains(&epsilon0) {
            return Err(ChainError::InvalidParameter(format!("erasure probability {epsilon0} is not in [0, 1]")));
        }
        let eps = (0..period).map(|s| if s < window { epsilon0 } else { 1.0 }).collect();
        Self::new(cycle_matrix(period), StateLabels::Erasure(eps))
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn prob(&self, from: usize, to: usize) -> f64 {
        self.transition[from * self.n_states + to]
    }

    /// Nonzero entries of row `state` as `(successor, probability)`.
    pub fn row(&self, state: usize) -> &[(usize, f64)] {
        &self.rows[state]
    }

    pub fn labels(&self) -> &StateLabels {
        &self.labels
    }

    /// Erasure probability of `state`, or `None` for a query chain.
    pub fn erasure(&self, state: usize) -> Option<f64> {
        match &self.labels {
            StateLabels::Erasure(eps) => eps.get(state).copied(),
            StateLabels::Query(_) => None,
        }
    }

    /// Whether `state` is a query state, or `None` for an error chain.
    pub fn is_query(&self, state: usize) -> Option<bool> {
        match &self.labels {
            StateLabels::Query(marks) => marks.get(state).copied(),
            StateLabels::Erasure(_) => None,
        }
    }

    pub fn is_query_chain(&self) -> bool {
        matches!(self.labels, StateLabels::Query(_))
    }

    pub fn is_error_chain(&self) -> bool {
        matches!(self.labels, StateLabels::Erasure(_))
    }

    /// Lowest-index query state, if this is a query chain.
    pub fn first_query_state(&self) -> Option<usize> {
        match &self.labels {
            StateLabels::Query(marks) => marks.iter().position(|&q| q),
            StateLabels::Erasure(_) => None,
        }
    }

    pub fn is_deterministic(&self) -> bool {
        self.rows.iter().all(|r| r.len() == 1)
    }

    /// Draws the successor of `state`. Deterministic rows never touch `rng`.
    pub fn sample_next<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> Result<usize, ChainError> {
        let row = self
            .rows
            .get(state)
            .ok_or(ChainError::StateOutOfRange { state, states: self.n_states })?;
        Ok(sample_row(row, rng))
    }

    /// One step of the chain applied to a distribution over states.
    pub fn propagate(&self, dist: &[f64]) -> Vec<f64> {
        let mut next = vec![0.0; self.n_states];
        for (from, &mass) in dist.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            for &(to, p) in &self.rows[from] {
                next[to] += mass * p;
            }
        }
        next
    }
}

#[inline]
pub(crate) fn sample_row<R: Rng + ?Sized>(row: &[(usize, f64)], rng: &mut R) -> usize {
    if let [(only, _)] = row {
        return *only;
    }
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for &(to, p) in row {
        acc += p;
        if u < acc {
            return to;
        }
    }
    // rounding left a sliver above the last cumulative sum
    row[row.len() - 1].0
}

fn cycle_matrix(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|s| {
            let mut row = vec![0.0; n];
            row[(s + 1) % n] = 1.0;
            row
        })
        .collect()
}
