#![allow(dead_code)]

use qaoi_core::simulator::TraceRow;
use qaoi_core::solver::{policy_iteration, SolveReport, SolverOptions};
use qaoi_core::{CostKind, MarkovProcess, MdpModel, ModelConfig, SystemState};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

pub const BUCKET: u32 = 10;
pub const DELTA_MAX_FACTOR: u32 = 10;

pub fn config(error_chain: MarkovProcess, query_chain: MarkovProcess, mu: f64, cost: CostKind) -> ModelConfig {
    let delta_max = DELTA_MAX_FACTOR * query_chain.n_states() as u32;
    ModelConfig {
        delta_max,
        bucket_size: BUCKET,
        token_rate: mu,
        discount: ModelConfig::DEFAULT_DISCOUNT,
        cost_kind: cost,
        error_chain,
        query_chain,
    }
}

/// Periodic queries, constant erasure probability, desk-scale truncation.
pub fn periodic_model(t_q: usize, mu: f64, eps: f64, cost: CostKind) -> MdpModel {
    MdpModel::new(config(
        MarkovProcess::constant_error(eps).unwrap(),
        MarkovProcess::periodic_query(t_q).unwrap(),
        mu,
        cost,
    ))
    .unwrap()
}

/// Periodic queries over a satellite channel with a two-slot pass.
pub fn satellite_model(t_q: usize, t_e: usize, mu: f64, eps0: f64, cost: CostKind) -> MdpModel {
    let error = if t_e == 1 {
        MarkovProcess::constant_error(eps0).unwrap()
    } else {
        MarkovProcess::satellite_error(t_e, eps0, 2.min(t_e)).unwrap()
    };
    MdpModel::new(config(error, MarkovProcess::periodic_query(t_q).unwrap(), mu, cost)).unwrap()
}

pub fn solve(model: &MdpModel) -> SolveReport {
    let r = policy_iteration(model, &SolverOptions::default()).unwrap();
    assert!(r.converged);
    r
}

pub fn state_of(row: &TraceRow) -> SystemState {
    SystemState::new(row.age, row.tokens, row.err_state, row.query_state)
}

/// Randomised probability integral transform of every observed transition in
/// `trace` against the kernel, binned into `bins` equal cells. Returns the
/// chi-square statistic and its p-value.
///
/// For an observed successor with cumulative kernel mass `[F-, F+)` (states in
/// canonical order), `U ~ Uniform(F-, F+)` is exactly uniform on `[0, 1)` when
/// the simulator follows the kernel.
pub fn pit_chi_square(model: &MdpModel, trace: &[TraceRow], bins: usize, rng: &mut ChaCha8Rng) -> (f64, f64, usize) {
    let mut counts = vec![0u64; bins];
    for pair in trace.windows(2) {
        let from = state_of(&pair[0]);
        let to = state_of(&pair[1]);
        let succ = model.successors(&from, pair[0].action).unwrap();
        let mut below = 0.0;
        let mut mass = None;
        for e in &succ {
            if e.next == to {
                mass = Some(e.prob);
                break;
            }
            below += e.prob;
        }
        let p = mass.unwrap_or_else(|| panic!("{from} -> {to} is not a kernel successor"));
        let u = below + p * rng.gen::<f64>();
        counts[((u * bins as f64) as usize).min(bins - 1)] += 1;
    }
    let n = (trace.len() - 1) as f64;
    let expected = n / bins as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let p_value = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(stat);
    (stat, p_value, trace.len() - 1)
}

/// Total-variation distance between two PMFs given as `(value, p)` lists.
pub fn total_variation(a: &[(u32, f64)], b: &[(u32, f64)]) -> f64 {
    let max = a.iter().chain(b).map(|x| x.0).max().unwrap_or(0) as usize;
    let mut diff = vec![0.0; max + 1];
    for &(v, p) in a {
        diff[v as usize] += p;
    }
    for &(v, p) in b {
        diff[v as usize] -= p;
    }
    diff.iter().map(|d| d.abs()).sum::<f64>() / 2.0
}
