//! Discounted-cost dynamic programming on [`MdpModel`].
//!
//! [`policy_iteration`] is the production solver. [`value_iteration`] and
//! [`brute_force_optimal`] exist as cross-checks; the latter enumerates every
//! deterministic policy and evaluates each with a dense linear solve, so it is
//! limited to tiny models.
//!
//! Evaluation runs in sweeps until the max-norm change drops below `tol`.
//! Gauss–Seidel sweeps update values in place from the highest canonical
//! index down, which visits the aged successor `age + 1` of a state before
//! the state itself. Jacobi sweeps read a frozen snapshot and run in parallel;
//! their result does not depend on thread scheduling.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

use crate::model::{Action, MdpModel, ModelError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("no convergence after {sweeps} sweeps (residual {residual:e})")]
    NonConvergence { sweeps: usize, residual: f64 },
    #[error("policy iteration did not stabilise after {0} rounds")]
    PolicyOscillation(usize),
    #[error("model has {states} states; brute force is limited to {limit}")]
    TooLarge { states: usize, limit: usize },
    #[error("policy has {found} entries, model has {expected} states")]
    PolicyMismatch { expected: usize, found: usize },
    #[error("policy transmits with an empty bucket at state index {0}")]
    Inadmissible(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Stationary deterministic policy indexed by canonical state index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Policy {
    actions: Vec<Action>,
}

impl Policy {
    pub fn silent(n_states: usize) -> Self {
        Policy { actions: vec![Action::Silent; n_states] }
    }

    /// Wraps an action table after checking it against `model`.
    pub fn from_actions(model: &MdpModel, actions: Vec<Action>) -> Result<Self, SolverError> {
        let policy = Policy { actions };
        policy.check(model)?;
        Ok(policy)
    }

    pub fn check(&self, model: &MdpModel) -> Result<(), SolverError> {
        if self.actions.len() != model.n_states() {
            return Err(SolverError::PolicyMismatch { expected: model.n_states(), found: self.actions.len() });
        }
        match self.actions.iter().enumerate().find(|(i, &a)| !model.is_admissible(*i, a)) {
            Some((i, _)) => Err(SolverError::Inadmissible(i)),
            None => Ok(()),
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn action(&self, index: usize) -> Action {
        self.actions[index]
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn transmit_count(&self) -> usize {
        self.actions.iter().filter(|&&a| a == Action::Transmit).count()
    }
}

/// Expected discounted cost per canonical state.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    values: Vec<f64>,
}

impl ValueFunction {
    pub fn new(values: Vec<f64>) -> Self {
        ValueFunction { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, index: usize) -> f64 {
        self.values[index]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs_diff(&self, other: &ValueFunction) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.values
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub policy: Policy,
    pub value: ValueFunction,
    /// Improvement rounds, value-iteration sweeps, or policies enumerated.
    pub iterations: usize,
    pub eval_sweeps: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    GaussSeidel,
    Jacobi,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Max-norm change between sweeps at which evaluation stops.
    pub tol: f64,
    pub max_sweeps: usize,
    pub max_rounds: usize,
    pub sweep: SweepMode,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-9, max_sweeps: 100_000, max_rounds: 1_000, sweep: SweepMode::GaussSeidel }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolverOptions { tol, ..Default::default() }
    }

    pub fn jacobi(mut self) -> Self {
        self.sweep = SweepMode::Jacobi;
        self
    }

    /// Two Q-values closer than this count as a tie.
    pub fn tie_tol(&self) -> f64 {
        5.0 * self.tol
    }
}

/// Largest state count [`brute_force_optimal`] accepts.
pub const BRUTE_FORCE_LIMIT: usize = 20;

/// Solves `v = c_pi + lambda * P_pi v` by sweeps, starting from zero.
pub fn evaluate_policy(model: &MdpModel, policy: &Policy, opts: &SolverOptions) -> Result<ValueFunction, SolverError> {
    policy.check(model)?;
    let mut values = vec![0.0; model.n_states()];
    evaluate_in_place(model, policy, &mut values, opts)?;
    Ok(ValueFunction::new(values))
}

fn evaluate_in_place(
    model: &MdpModel,
    policy: &Policy,
    values: &mut Vec<f64>,
    opts: &SolverOptions,
) -> Result<usize, SolverError> {
    let actions = policy.actions();
    sweep_until(values, opts, |values| match opts.sweep {
        SweepMode::GaussSeidel => {
            let mut residual = 0.0f64;
            for i in (0..values.len()).rev() {
                let v = model.action_value(i, actions[i], values);
                residual = residual.max((v - values[i]).abs());
                values[i] = v;
            }
            residual
        }
        SweepMode::Jacobi => {
            let next: Vec<f64> =
                (0..values.len()).into_par_iter().map(|i| model.action_value(i, actions[i], values)).collect();
            let residual = max_abs_diff(&next, values);
            *values = next;
            residual
        }
    })
}

fn sweep_until<F>(values: &mut Vec<f64>, opts: &SolverOptions, mut sweep: F) -> Result<usize, SolverError>
where
    F: FnMut(&mut Vec<f64>) -> f64,
{
    let mut residual = f64::INFINITY;
    for n in 1..=opts.max_sweeps {
        residual = sweep(values);
        if residual < opts.tol {
            return Ok(n);
        }
    }
    Err(SolverError::NonConvergence { sweeps: opts.max_sweeps, residual })
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.par_iter().zip(b.par_iter()).map(|(x, y)| (x - y).abs()).reduce(|| 0.0, f64::max)
}

/// `Q(s, a)` for both actions. Inadmissible entries are `+inf`.
pub fn q_values(model: &MdpModel, value: &ValueFunction) -> Vec<[f64; 2]> {
    let v = value.values();
    (0..model.n_states())
        .into_par_iter()
        .map(|i| {
            let silent = model.action_value(i, Action::Silent, v);
            let transmit = if model.is_admissible(i, Action::Transmit) {
                model.action_value(i, Action::Transmit, v)
            } else {
                f64::INFINITY
            };
            [silent, transmit]
        })
        .collect()
}

#[inline]
fn greedy(q_silent: f64, q_transmit: f64, tie_tol: f64) -> Action {
    if q_transmit < q_silent - tie_tol {
        Action::Transmit
    } else {
        Action::Silent
    }
}

/// Greedy policy against `value`; ties within `tie_tol` go to silence.
pub fn improve_policy(model: &MdpModel, value: &ValueFunction, tie_tol: f64) -> Policy {
    let v = value.values();
    let actions = (0..model.n_states())
        .into_par_iter()
        .map(|i| {
            if !model.is_admissible(i, Action::Transmit) {
                return Action::Silent;
            }
            greedy(model.action_value(i, Action::Silent, v), model.action_value(i, Action::Transmit, v), tie_tol)
        })
        .collect();
    Policy { actions }
}

/// `max_s |v(s) - min_a Q(s, a)|`.
pub fn bellman_residual(model: &MdpModel, value: &ValueFunction) -> f64 {
    q_values(model, value)
        .par_iter()
        .zip(value.values().par_iter())
        .map(|(q, v)| (q[0].min(q[1]) - v).abs())
        .reduce(|| 0.0, f64::max)
}

pub fn policy_iteration(model: &MdpModel, opts: &SolverOptions) -> Result<SolveReport, SolverError> {
    policy_iteration_observed(model, opts, |_, _| {})
}

/// Bound on the tie-settling rounds after policy iteration has stabilized.
const CANONICAL_ROUNDS: usize = 20;

/// Policy iteration that reports every evaluated `(policy, value)` pair.
///
/// Starts from the all-silent policy and a zero value vector, and warm-starts
/// each evaluation from the previous values. A state only switches action
/// when the alternative is better by more than [`SolverOptions::tie_tol`], so
/// evaluation noise cannot make the loop cycle.
///
/// Keeping the current action on near-ties can leave a transmit action where
/// silence is just as good. Once the loop is stable, near-ties are resolved
/// toward silence by repeating [`improve_policy`] until it is a fixed point.
/// If that does not settle within a few rounds, the loop's policy is returned.
/// The observer does not see these extra evaluations.
pub fn policy_iteration_observed<F>(model: &MdpModel, opts: &SolverOptions, mut observe: F) -> Result<SolveReport, SolverError>
where
    F: FnMut(&Policy, &ValueFunction),
{
    let n = model.n_states();
    let tie = opts.tie_tol();
    let mut policy = Policy::silent(n);
    let mut values = vec![0.0; n];
    let mut eval_sweeps = 0;
    for round in 1..=opts.max_rounds {
        eval_sweeps += evaluate_in_place(model, &policy, &mut values, opts)?;
        let value = ValueFunction::new(values);
        observe(&policy, &value);
        let next = keep_current_step(model, &policy, value.values(), tie, opts.sweep);
        values = value.into_inner();
        if next != policy.actions {
            policy.actions = next;
            continue;
        }

        // Settle near-ties toward silence: repeat the ties-to-silent improvement
        // until it is a fixed point. Falls back to the keep-current policy if
        // that does not happen within a few rounds.
        let value = ValueFunction::new(values);
        let mut canonical = improve_policy(model, &value, tie);
        let mut canonical_values = value.values().to_vec();
        let mut extra_sweeps = 0;
        for _ in 0..CANONICAL_ROUNDS {
            if canonical == policy && extra_sweeps == 0 {
                break;
            }
            extra_sweeps += evaluate_in_place(model, &canonical, &mut canonical_values, opts)?;
            let cv = ValueFunction::new(canonical_values);
            let next = improve_policy(model, &cv, tie);
            canonical_values = cv.into_inner();
            if next == canonical {
                return Ok(SolveReport {
                    policy: canonical,
                    value: ValueFunction::new(canonical_values),
                    iterations: round,
                    eval_sweeps: eval_sweeps + extra_sweeps,
                    converged: true,
                });
            }
            canonical = next;
        }
        return Ok(SolveReport { policy, value, iterations: round, eval_sweeps, converged: true });
    }
    Err(SolverError::PolicyOscillation(opts.max_rounds))
}

/// One improvement step that keeps the current action unless the other one
/// is better by more than `tie`.
fn keep_current_step(model: &MdpModel, policy: &Policy, values: &[f64], tie: f64, mode: SweepMode) -> Vec<Action> {
    let improve = |i: usize, current: Action| -> Action {
        if !model.is_admissible(i, Action::Transmit) {
            return Action::Silent;
        }
        let q0 = model.action_value(i, Action::Silent, values);
        let q1 = model.action_value(i, Action::Transmit, values);
        match current {
            Action::Silent if q1 < q0 - tie => Action::Transmit,
            Action::Transmit if q0 < q1 - tie => Action::Silent,
            keep => keep,
        }
    };
    match mode {
        SweepMode::GaussSeidel => policy.actions.iter().enumerate().map(|(i, &a)| improve(i, a)).collect(),
        SweepMode::Jacobi => policy.actions.par_iter().enumerate().map(|(i, &a)| improve(i, a)).collect(),
    }
}

/// Bellman-optimality sweeps from zero, then the greedy policy.
pub fn value_iteration(model: &MdpModel, opts: &SolverOptions) -> Result<SolveReport, SolverError> {
    let n = model.n_states();
    let mut values = vec![0.0; n];
    let best = |i: usize, v: &[f64]| {
        let q0 = model.action_value(i, Action::Silent, v);
        if model.is_admissible(i, Action::Transmit) {
            q0.min(model.action_value(i, Action::Transmit, v))
        } else {
            q0
        }
    };
    let sweeps = sweep_until(&mut values, opts, |values| match opts.sweep {
        SweepMode::GaussSeidel => {
            let mut residual = 0.0f64;
            for i in (0..values.len()).rev() {
                let v = best(i, values);
                residual = residual.max((v - values[i]).abs());
                values[i] = v;
            }
            residual
        }
        SweepMode::Jacobi => {
            let next: Vec<f64> = (0..values.len()).into_par_iter().map(|i| best(i, values)).collect();
            let residual = max_abs_diff(&next, values);
            *values = next;
            residual
        }
    })?;
    let value = ValueFunction::new(values);
    let policy = improve_policy(model, &value, opts.tie_tol());
    Ok(SolveReport { policy, value, iterations: sweeps, eval_sweeps: sweeps, converged: true })
}

/// Exact policy value by dense linear solve of `(I - lambda P) v = c`.
pub fn solve_policy_exact(model: &MdpModel, policy: &Policy) -> Result<ValueFunction, SolverError> {
    policy.check(model)?;
    let n = model.n_states();
    let lambda = model.discount();
    let mut a = DMatrix::<f64>::identity(n, n);
    let mut c = DVector::<f64>::zeros(n);
    for i in 0..n {
        model.for_each_successor(i, policy.action(i), |next, p, cost| {
            a[(i, next)] -= lambda * p;
            c[i] += p * cost;
        });
    }
    let v = a.lu().solve(&c).expect("I - lambda P is nonsingular for lambda < 1");
    Ok(ValueFunction::new(v.iter().copied().collect()))
}

/// Enumerates every admissible deterministic policy and returns the one with
/// the smallest total value. An optimal policy minimizes every state at once,
/// so the smallest sum identifies it.
pub fn brute_force_optimal(model: &MdpModel) -> Result<SolveReport, SolverError> {
    let n = model.n_states();
    if n > BRUTE_FORCE_LIMIT {
        return Err(SolverError::TooLarge { states: n, limit: BRUTE_FORCE_LIMIT });
    }
    let free: Vec<usize> = (0..n).filter(|&i| model.is_admissible(i, Action::Transmit)).collect();
    let mut best: Option<(f64, Policy, ValueFunction)> = None;
    let count = 1usize << free.len();
    for mask in 0..count {
        let mut actions = vec![Action::Silent; n];
        for (bit, &i) in free.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                actions[i] = Action::Transmit;
            }
        }
        let policy = Policy { actions };
        let value = solve_policy_exact(model, &policy)?;
        let total: f64 = value.values().iter().sum();
        if best.as_ref().is_none_or(|(t, _, _)| total < *t) {
            best = Some((total, policy, value));
        }
    }
    let (_, policy, value) = best.expect("at least the silent policy exists");
    Ok(SolveReport { policy, value, iterations: count, eval_sweeps: 0, converged: true })
}
