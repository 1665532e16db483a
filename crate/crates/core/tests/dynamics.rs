mod common;

use common::{periodic_model, pit_chi_square, solve};
use qaoi_core::simulator::{seed_list, simulate_fixed, simulate_policy, simulate_policy_seeds, FixedStrategy, SimConfig};
use qaoi_core::{Action, CostKind, MarkovProcess, MdpModel, ModelConfig, Policy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_policy(model: &MdpModel, seed: u64) -> Policy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let actions = (0..model.n_states())
        .map(|i| if model.tokens_at(i) > 0 && rng.gen_bool(0.5) { Action::Transmit } else { Action::Silent })
        .collect();
    Policy::from_actions(model, actions).unwrap()
}

#[test]
fn stochastic_chains_follow_the_kernel() {
    // every source of randomness is live: erasures, tokens, a uniform query gap
    let m = MdpModel::new(ModelConfig {
        delta_max: 60,
        bucket_size: 3,
        token_rate: 0.3,
        discount: 0.75,
        cost_kind: CostKind::QueryAware,
        error_chain: MarkovProcess::satellite_error(3, 0.4, 2).unwrap(),
        query_chain: MarkovProcess::uniform_query(3, 6).unwrap(),
    })
    .unwrap();
    let policy = random_policy(&m, 5);
    let rep = simulate_policy(&m, &policy, &SimConfig::new(200_000, 0, 11).with_trace()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (stat, p, n) = pit_chi_square(&m, rep.trace.as_ref().unwrap(), 20, &mut rng);
    assert_eq!(n, 199_999);
    assert!(p > 1e-3, "chi-square {stat}, p = {p}");
}

#[test]
fn uniform_query_gaps_in_simulation() {
    let m = MdpModel::new(ModelConfig {
        delta_max: 30,
        bucket_size: 2,
        token_rate: 0.2,
        discount: 0.75,
        cost_kind: CostKind::QueryAware,
        error_chain: MarkovProcess::constant_error(0.3).unwrap(),
        query_chain: MarkovProcess::uniform_query(2, 5).unwrap(),
    })
    .unwrap();
    let rep = simulate_policy(&m, &Policy::silent(m.n_states()), &SimConfig::new(400_000, 0, 4).with_trace()).unwrap();
    let times: Vec<u64> = rep.trace.unwrap().iter().filter(|r| r.is_query).map(|r| r.t).collect();
    let mut counts = [0u64; 6];
    for w in times.windows(2) {
        counts[(w[1] - w[0]) as usize] += 1;
    }
    let n = (times.len() - 1) as f64;
    assert_eq!(counts[0] + counts[1], 0);
    for c in &counts[2..] {
        let f = *c as f64 / n;
        // binomial sigma at p = 1/4 and ~114k gaps is about 0.0013
        assert!((f - 0.25).abs() < 0.006, "{counts:?}");
    }
}

#[test]
fn phase_counts_time_since_query() {
    let m = periodic_model(8, 0.2, 0.3, CostKind::QueryAware);
    let r = solve(&m);
    let rep = simulate_policy(&m, &r.policy, &SimConfig::new(80_000, 80, 1).with_trace()).unwrap();
    for row in rep.trace.as_ref().unwrap() {
        assert_eq!(row.is_query, row.t % 8 == 0);
    }
    for h in &rep.phase {
        assert_eq!(h.total(), 9_990);
    }
    // the query-aware policy refreshes right before queries
    assert!(rep.phase_mean(0) < rep.phase_mean(4));
}

#[test]
fn seed_runs_are_reproducible() {
    let m = periodic_model(10, 0.1, 0.2, CostKind::PermanentQuery);
    let r = solve(&m);
    let sim = SimConfig::new(100_000, 100, 0);
    let a = simulate_policy_seeds(&m, &r.policy, &sim, &seed_list(7, 4)).unwrap();
    let b = simulate_policy_seeds(&m, &r.policy, &sim, &seed_list(7, 4)).unwrap();
    assert_eq!(a, b);
    for (rep, &seed) in a.per_seed.iter().zip(&a.seeds) {
        assert_eq!(rep, &simulate_policy(&m, &r.policy, &sim.with_seed(seed)).unwrap());
    }
}

#[test]
fn common_random_numbers_across_policies() {
    // with every action silent the erasure draws never matter, so two silent
    // policies on different channels see identical token paths
    let a = periodic_model(5, 0.3, 0.1, CostKind::PermanentQuery);
    let b = periodic_model(5, 0.3, 0.8, CostKind::PermanentQuery);
    let sim = SimConfig::new(5_000, 0, 3).with_trace();
    let ra = simulate_policy(&a, &Policy::silent(a.n_states()), &sim).unwrap();
    let rb = simulate_policy(&b, &Policy::silent(b.n_states()), &sim).unwrap();
    let ta: Vec<u32> = ra.trace.unwrap().iter().map(|r| r.tokens).collect();
    let tb: Vec<u32> = rb.trace.unwrap().iter().map(|r| r.tokens).collect();
    assert_eq!(ta, tb);
}

#[test]
fn burst_query_age_is_geometric() {
    let rep = simulate_fixed(FixedStrategy::PreQueryBurst(4), 0.5, 20, 0.2, &SimConfig::new(4_000_000, 200, 8)).unwrap();
    let n = rep.n_queries as f64;
    for (t, p) in [(1, 0.5), (2, 0.25), (3, 0.125), (4, 0.0625)] {
        let sigma = (p * (1.0 - p) / n).sqrt();
        let f = rep.qaoi.probability(t);
        assert!((f - p).abs() < 3.0 * sigma, "t={t}: {f} vs {p}");
    }
    for t in 5..=20 {
        assert_eq!(rep.qaoi.count(t), 0);
    }
}

#[test]
fn age_cap_is_not_reached_in_moderate_channels() {
    let m = periodic_model(40, 0.1, 0.2, CostKind::PermanentQuery);
    let r = solve(&m);
    let agg = simulate_policy_seeds(&m, &r.policy, &SimConfig::new(1_000_000, 400, 0), &seed_list(0, 4)).unwrap();
    assert!(agg.pooled.saturation() < 1e-6, "{}", agg.pooled.saturation());
}
