//! Truncated product state space, transition kernel and per-slot costs of the
//! scheduling MDP.
//!
//! A state is `(age, tokens, err_state, query_state)`. Ages run from 1 to
//! `delta_max`, tokens from 0 to the bucket size. The canonical state index is
//! the lexicographic rank of that tuple; policy files and the solver rely on
//! it.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::chain::{MarkovProcess, StateLabels};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("cannot transmit with an empty token bucket in state {0}")]
    InvalidAction(SystemState),
    #[error("state {0} lies outside the truncated state space")]
    StateOutOfRange(SystemState),
}

/// Which slots are charged their age.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CostKind {
    /// Permanent query: the age is paid in every slot.
    #[serde(rename = "PQ")]
    PermanentQuery,
    /// Query-aware: the age is paid only in slots where a query arrives.
    #[serde(rename = "QAPA")]
    QueryAware,
}

impl CostKind {
    pub fn label(self) -> &'static str {
        match self {
            CostKind::PermanentQuery => "PQ",
            CostKind::QueryAware => "QAPA",
        }
    }
}

impl fmt::Display for CostKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for CostKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "PQ" => Ok(CostKind::PermanentQuery),
            "QAPA" => Ok(CostKind::QueryAware),
            other => Err(format!("unknown cost kind `{other}` (expected PQ or QAPA)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SystemState {
    pub age: u32,
    pub tokens: u32,
    pub err_state: usize,
    pub query_state: usize,
}

impl SystemState {
    pub fn new(age: u32, tokens: u32, err_state: usize, query_state: usize) -> Self {
        SystemState { age, tokens, err_state, query_state }
    }
}

impl fmt::Display for SystemState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(age {}, tokens {}, err {}, query {})",
            self.age, self.tokens, self.err_state, self.query_state
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[repr(u8)]
pub enum Action {
    #[default]
    Silent = 0,
    Transmit = 1,
}

impl Action {
    pub const ALL: [Action; 2] = [Action::Silent, Action::Transmit];

    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn from_u8(v: u8) -> Option<Action> {
        match v {
            0 => Some(Action::Silent),
            1 => Some(Action::Transmit),
            _ => None,
        }
    }
}

/// All scenario parameters of one MDP instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub delta_max: u32,
    pub bucket_size: u32,
    /// Per-slot token generation probability.
    pub token_rate: f64,
    pub discount: f64,
    pub cost_kind: CostKind,
    pub error_chain: MarkovProcess,
    pub query_chain: MarkovProcess,
}

impl ModelConfig {
    pub const DEFAULT_DISCOUNT: f64 = 0.75;

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidConfig(msg));
        if self.delta_max < 1 {
            return bad("delta_max must be at least 1".into());
        }
        if self.bucket_size < 1 {
            return bad("bucket size must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.token_rate) {
            return bad(format!("token rate {} is not a probability", self.token_rate));
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return bad(format!("discount {} must lie in (0, 1)", self.discount));
        }
        if !self.error_chain.is_error_chain() {
            return bad("error chain must carry erasure probabilities".into());
        }
        if !self.query_chain.is_query_chain() {
            return bad("query chain must carry query marks".into());
        }
        Ok(())
    }

    /// Number of states of the truncated product space.
    pub fn n_states(&self) -> usize {
        self.delta_max as usize
            * (self.bucket_size as usize + 1)
            * self.error_chain.n_states()
            * self.query_chain.n_states()
    }

    /// Short stable fingerprint of every field, used to tie policy files to
    /// the configuration that produced them.
    pub fn config_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"qaoi-model-v1");
        h.update(self.delta_max.to_le_bytes());
        h.update(self.bucket_size.to_le_bytes());
        h.update(self.token_rate.to_bits().to_le_bytes());
        h.update(self.discount.to_bits().to_le_bytes());
        h.update(self.cost_kind.label().as_bytes());
        for chain in [&self.error_chain, &self.query_chain] {
            let n = chain.n_states();
            h.update((n as u64).to_le_bytes());
            for i in 0..n {
                for j in 0..n {
                    h.update(chain.prob(i, j).to_bits().to_le_bytes());
                }
            }
            match chain.labels() {
                StateLabels::Erasure(eps) => {
                    h.update(b"E");
                    eps.iter().for_each(|e| h.update(e.to_bits().to_le_bytes()));
                }
                StateLabels::Query(marks) => {
                    h.update(b"Q");
                    marks.iter().for_each(|&m| h.update([m as u8]));
                }
            }
        }
        h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionEntry {
    pub next: SystemState,
    pub prob: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, Copy)]
struct JointStep {
    next: usize,
    prob: f64,
    query: bool,
}

/// Validated model with the joint chain kernel precomputed.
#[derive(Debug, Clone)]
pub struct MdpModel {
    config: ModelConfig,
    n_tokens: usize,
    n_query: usize,
    n_joint: usize,
    n_states: usize,
    erasure: Vec<f64>,
    query_marks: Vec<bool>,
    /// Successors of every joint (err, query) state.
    joint: Vec<Vec<JointStep>>,
}

impl MdpModel {
    pub fn new(config: ModelConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let n_err = config.error_chain.n_states();
        let n_query = config.query_chain.n_states();
        let n_joint = n_err * n_query;
        let erasure: Vec<f64> = (0..n_err).map(|s| config.error_chain.erasure(s).unwrap()).collect();
        let query_marks: Vec<bool> = (0..n_query).map(|s| config.query_chain.is_query(s).unwrap()).collect();
        let mut joint = Vec::with_capacity(n_joint);
        for e in 0..n_err {
            for q in 0..n_query {
                let mut steps = Vec::new();
                for &(e2, pe) in config.error_chain.row(e) {
                    for &(q2, pq) in config.query_chain.row(q) {
                        steps.push(JointStep { next: e2 * n_query + q2, prob: pe * pq, query: query_marks[q2] });
                    }
                }
                joint.push(steps);
            }
        }
        let n_tokens = config.bucket_size as usize + 1;
        let n_states = config.delta_max as usize * n_tokens * n_joint;
        Ok(MdpModel { config, n_tokens, n_query, n_joint, n_states, erasure, query_marks, joint })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn delta_max(&self) -> u32 {
        self.config.delta_max
    }

    pub fn bucket_size(&self) -> u32 {
        self.config.bucket_size
    }

    pub fn discount(&self) -> f64 {
        self.config.discount
    }

    pub fn cost_kind(&self) -> CostKind {
        self.config.cost_kind
    }

    pub fn erasure(&self, err_state: usize) -> f64 {
        self.erasure[err_state]
    }

    pub fn is_query_state(&self, query_state: usize) -> bool {
        self.query_marks[query_state]
    }

    pub fn index_of(&self, s: &SystemState) -> Option<usize> {
        let in_range = s.age >= 1
            && s.age <= self.config.delta_max
            && s.tokens <= self.config.bucket_size
            && s.err_state < self.erasure.len()
            && s.query_state < self.n_query;
        in_range.then(|| self.encode(s.age, s.tokens, s.err_state * self.n_query + s.query_state))
    }

    pub fn state_at(&self, index: usize) -> SystemState {
        let (age, tokens, joint) = self.decode(index);
        SystemState { age, tokens, err_state: joint / self.n_query, query_state: joint % self.n_query }
    }

    /// Every state in canonical index order.
    pub fn enumerate_states(&self) -> Vec<SystemState> {
        (0..self.n_states).map(|i| self.state_at(i)).collect()
    }

    #[inline]
    fn encode(&self, age: u32, tokens: u32, joint: usize) -> usize {
        ((age as usize - 1) * self.n_tokens + tokens as usize) * self.n_joint + joint
    }

    #[inline]
    fn decode(&self, index: usize) -> (u32, u32, usize) {
        let joint = index % self.n_joint;
        let rest = index / self.n_joint;
        ((rest / self.n_tokens) as u32 + 1, (rest % self.n_tokens) as u32, joint)
    }

    #[inline]
    pub fn tokens_at(&self, index: usize) -> u32 {
        ((index / self.n_joint) % self.n_tokens) as u32
    }

    #[inline]
    pub fn is_admissible(&self, index: usize, action: Action) -> bool {
        action == Action::Silent || self.tokens_at(index) > 0
    }

    /// Calls `f(next_index, probability, cost)` for every outcome of taking
    /// `action` in state `index`. Outcomes that land on the same state (token
    /// bucket already full) are reported separately. The action must be
    /// admissible.
    #[inline]
    pub fn for_each_successor<F: FnMut(usize, f64, f64)>(&self, index: usize, action: Action, mut f: F) {
        let (age, tokens, joint) = self.decode(index);
        let transmit = action == Action::Transmit;
        debug_assert!(!transmit || tokens > 0);
        let delta_max = self.config.delta_max;
        let bucket = self.config.bucket_size;
        let mu = self.config.token_rate;
        let success = if transmit { 1.0 - self.erasure[joint / self.n_query] } else { 0.0 };
        let grown = (age + 1).min(delta_max);
        let base = tokens - transmit as u32;
        let ages = [(1, success), (grown, 1.0 - success)];
        let toks = [((base + 1).min(bucket), mu), (base, 1.0 - mu)];
        let query_aware = self.config.cost_kind == CostKind::QueryAware;
        let steps = &self.joint[joint];
        for &(next_age, pa) in &ages {
            if pa <= 0.0 {
                continue;
            }
            let age_cost = next_age as f64;
            for &(next_tokens, pt) in &toks {
                if pt <= 0.0 {
                    continue;
                }
                let block = self.encode(next_age, next_tokens, 0);
                let p = pa * pt;
                for step in steps {
                    let cost = if query_aware && !step.query { 0.0 } else { age_cost };
                    f(block + step.next, p * step.prob, cost);
                }
            }
        }
    }

    /// Expected one-step cost plus discounted continuation, `Q(s, a)` against
    /// the value vector `values`.
    #[inline]
    pub fn action_value(&self, index: usize, action: Action, values: &[f64]) -> f64 {
        let lambda = self.config.discount;
        let mut acc = 0.0;
        self.for_each_successor(index, action, |next, p, c| acc += p * (c + lambda * values[next]));
        acc
    }

    /// Successor distribution of `(state, action)` with duplicate outcomes
    /// merged, ordered by canonical index.
    pub fn successors(&self, state: &SystemState, action: Action) -> Result<Vec<TransitionEntry>, ModelError> {
        let index = self.checked_index(state, action)?;
        Ok(self.successors_at(index, action))
    }

    pub(crate) fn successors_at(&self, index: usize, action: Action) -> Vec<TransitionEntry> {
        let mut raw: Vec<(usize, f64, f64)> = Vec::with_capacity(8);
        self.for_each_successor(index, action, |n, p, c| raw.push((n, p, c)));
        raw.sort_by_key(|r| r.0);
        let mut merged: Vec<(usize, f64, f64)> = Vec::with_capacity(raw.len());
        for (n, p, c) in raw {
            match merged.last_mut() {
                // same successor implies same cost
                Some(last) if last.0 == n => last.1 += p,
                _ => merged.push((n, p, c)),
            }
        }
        merged
            .into_iter()
            .map(|(n, prob, cost)| TransitionEntry { next: self.state_at(n), prob, cost })
            .collect()
    }

    /// `E[c(s, a, s')]` over the successor distribution.
    pub fn expected_cost(&self, state: &SystemState, action: Action) -> Result<f64, ModelError> {
        let index = self.checked_index(state, action)?;
        let mut acc = 0.0;
        self.for_each_successor(index, action, |_, p, c| acc += p * c);
        Ok(acc)
    }

    fn checked_index(&self, state: &SystemState, action: Action) -> Result<usize, ModelError> {
        let index = self.index_of(state).ok_or(ModelError::StateOutOfRange(*state))?;
        if !self.is_admissible(index, action) {
            return Err(ModelError::InvalidAction(*state));
        }
        Ok(index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(delta_max: u32, bucket: u32, mu: f64, eps: MarkovProcess, query: MarkovProcess, cost: CostKind) -> ModelConfig {
        ModelConfig {
            delta_max,
            bucket_size: bucket,
            token_rate: mu,
            discount: 0.75,
            cost_kind: cost,
            error_chain: eps,
            query_chain: query,
        }
    }

    fn constant(eps: f64) -> MarkovProcess {
        MarkovProcess::constant_error(eps).unwrap()
    }

    fn periodic(t: usize) -> MarkovProcess {
        MarkovProcess::periodic_query(t).unwrap()
    }

    #[test]
    fn enumeration_order_is_lexicographic() {
        let m = MdpModel::new(config(2, 1, 0.1, constant(0.0), periodic(1), CostKind::PermanentQuery)).unwrap();
        let states: Vec<(u32, u32)> = m.enumerate_states().iter().map(|s| (s.age, s.tokens)).collect();
        assert_eq!(states, vec![(1, 0), (1, 1), (2, 0), (2, 1)]);
        for (i, s) in m.enumerate_states().iter().enumerate() {
            assert_eq!(m.index_of(s), Some(i));
        }
    }

    #[test]
    fn state_counts_at_full_scale() {
        let desk = config(400, 10, 0.1, constant(0.2), periodic(40), CostKind::QueryAware);
        assert_eq!(desk.n_states(), 176_000);
        let full = config(4000, 10, 0.1, constant(0.2), periodic(40), CostKind::QueryAware);
        assert_eq!(full.n_states(), 1_760_000);
    }

    #[test]
    fn certain_delivery_single_successor() {
        let m = MdpModel::new(config(10, 3, 0.0, constant(0.0), periodic(1), CostKind::PermanentQuery)).unwrap();
        let s = SystemState::new(5, 1, 0, 0);
        let succ = m.successors(&s, Action::Transmit).unwrap();
        assert_eq!(succ.len(), 1);
        assert_eq!(succ[0].next, SystemState::new(1, 0, 0, 0));
        assert_eq!(succ[0].prob, 1.0);
        assert_eq!(succ[0].cost, 1.0);
    }

    #[test]
    fn four_way_product_of_delivery_and_token_gain() {
        let m = MdpModel::new(config(10, 3, 0.1, constant(0.2), periodic(1), CostKind::PermanentQuery)).unwrap();
        let s = SystemState::new(5, 1, 0, 0);
        let succ = m.successors(&s, Action::Transmit).unwrap();
        let find = |age, tokens| {
            succ.iter()
                .find(|e| e.next.age == age && e.next.tokens == tokens)
                .map(|e| e.prob)
                .unwrap()
        };
        assert_eq!(succ.len(), 4);
        assert!((find(1, 1) - 0.8 * 0.1).abs() < 1e-15);
        assert!((find(1, 0) - 0.8 * 0.9).abs() < 1e-15);
        assert!((find(6, 1) - 0.2 * 0.1).abs() < 1e-15);
        assert!((find(6, 0) - 0.2 * 0.9).abs() < 1e-15);
    }

    #[test]
    fn age_saturates_at_delta_max() {
        let m = MdpModel::new(config(7, 2, 0.0, constant(0.3), periodic(1), CostKind::PermanentQuery)).unwrap();
        let s = SystemState::new(7, 0, 0, 0);
        let succ = m.successors(&s, Action::Silent).unwrap();
        assert_eq!(succ.len(), 1);
        assert_eq!(succ[0].next, s);
        assert_eq!(succ[0].cost, 7.0);
    }

    #[test]
    fn full_bucket_merges_token_outcomes() {
        let m = MdpModel::new(config(7, 2, 0.4, constant(0.3), periodic(1), CostKind::PermanentQuery)).unwrap();
        let succ = m.successors(&SystemState::new(3, 2, 0, 0), Action::Silent).unwrap();
        assert_eq!(succ.len(), 1);
        assert!((succ[0].prob - 1.0).abs() < 1e-15);
    }

    #[test]
    fn transmit_on_empty_bucket_is_rejected() {
        let m = MdpModel::new(config(7, 2, 0.4, constant(0.3), periodic(2), CostKind::PermanentQuery)).unwrap();
        let s = SystemState::new(3, 0, 0, 1);
        assert_eq!(m.successors(&s, Action::Transmit), Err(ModelError::InvalidAction(s)));
        assert_eq!(m.expected_cost(&s, Action::Transmit), Err(ModelError::InvalidAction(s)));
        let outside = SystemState::new(8, 0, 0, 0);
        assert_eq!(m.successors(&outside, Action::Silent), Err(ModelError::StateOutOfRange(outside)));
    }

    #[test]
    fn expected_cost_examples() {
        let pq = MdpModel::new(config(20, 2, 0.3, constant(0.4), periodic(4), CostKind::PermanentQuery)).unwrap();
        let c = pq.expected_cost(&SystemState::new(5, 0, 0, 0), Action::Silent).unwrap();
        assert!((c - 6.0).abs() < 1e-12, "{c}");

        let qa = MdpModel::new(config(20, 2, 0.1, constant(0.2), periodic(4), CostKind::QueryAware)).unwrap();
        // query state is index 3; from state 0 the next state is 1, no query
        assert!(qa.expected_cost(&SystemState::new(5, 0, 0, 0), Action::Silent).unwrap().abs() < 1e-12);
        // from state 2 the next state is the query state
        let c = qa.expected_cost(&SystemState::new(5, 1, 0, 2), Action::Transmit).unwrap();
        assert!((c - 2.0).abs() < 1e-12, "{c}");
    }

    #[test]
    fn kernel_rows_sum_to_one_and_respect_supports() {
        let cfg = config(
            12,
            3,
            0.35,
            MarkovProcess::satellite_error(4, 0.3, 2).unwrap(),
            MarkovProcess::uniform_query(2, 5).unwrap(),
            CostKind::QueryAware,
        );
        let m = MdpModel::new(cfg).unwrap();
        for i in 0..m.n_states() {
            let s = m.state_at(i);
            for a in Action::ALL {
                if !m.is_admissible(i, a) {
                    continue;
                }
                let succ = m.successors(&s, a).unwrap();
                let total: f64 = succ.iter().map(|e| e.prob).sum();
                assert!((total - 1.0).abs() < 1e-12);
                for e in &succ {
                    assert!(e.next.age == 1 || e.next.age == (s.age + 1).min(12));
                    let dt = e.next.tokens as i64 - s.tokens as i64;
                    assert!((-1..=1).contains(&dt));
                    if a == Action::Transmit {
                        assert!(e.next.tokens <= s.tokens);
                    }
                }
            }
        }
    }

    #[test]
    fn config_validation() {
        let mut c = config(10, 2, 0.1, constant(0.1), periodic(3), CostKind::PermanentQuery);
        c.discount = 1.0;
        assert!(MdpModel::new(c.clone()).is_err());
        c.discount = 0.75;
        c.token_rate = 1.5;
        assert!(MdpModel::new(c.clone()).is_err());
        c.token_rate = 0.1;
        std::mem::swap(&mut c.error_chain, &mut c.query_chain);
        assert!(MdpModel::new(c).is_err());
    }

    #[test]
    fn config_hash_tracks_every_field() {
        let a = config(10, 2, 0.1, constant(0.1), periodic(3), CostKind::PermanentQuery);
        let mut b = a.clone();
        assert_eq!(a.config_hash(), b.config_hash());
        assert_eq!(a.config_hash().len(), 16);
        b.cost_kind = CostKind::QueryAware;
        assert_ne!(a.config_hash(), b.config_hash());
        let mut c = a.clone();
        c.error_chain = constant(0.1000001);
        assert_ne!(a.config_hash(), c.config_hash());
    }
}
