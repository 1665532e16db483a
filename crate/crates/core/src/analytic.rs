//! Closed-form age laws for two feedback-free schedules on a constant-erasure
//! channel with queries every `T_q` slots and a budget of `L = θ·T_q`
//! attempts per query period.
//!
//! * Equally spaced: one attempt every `T_tx = T_q / L` slots, the last one in
//!   the slot before a query (shifted `offset` slots earlier if desired).
//! * Pre-query burst: `L` attempts in the slots right before every query.
//!
//! These are exactly the schedules of [`crate::simulator::simulate_fixed`],
//! which makes the functions here an oracle for the simulator.
//!
//! The AoI law of the burst schedule is derived by conditioning on the slot's
//! position `r` in the query period (`r = 0` at the query). With
//! `j_r = max(0, r - (T_q - L))` attempts already made in the current period,
//!
//! ```text
//! P(Δ = t) = 1/T_q · Σ_r [ ε^{j_r} · P(A0 = t - r) + 1{1 <= t <= j_r} (1-ε) ε^{t-1} ]
//! ```
//!
//! where `A0` is the age at the query, which is the QAoI of the schedule.
//! [`pmf_qapa_aoi_single_sum`] keeps the older single-sum expression with a
//! `max` in its upper limit; it does not sum to one and is kept only so the
//! discrepancy stays visible and tested.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error("ages start at 1")]
    ZeroAge,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimpleCaseParams {
    pub epsilon: f64,
    pub t_q: u32,
    pub duty_cycle: f64,
    /// Spacing of the equally spaced schedule.
    pub t_tx: u32,
    /// Slots between the last equally spaced attempt and the next query,
    /// minus one. Zero is the aligned case.
    pub offset: u32,
}

impl SimpleCaseParams {
    /// Aligned parameters with `T_tx = T_q / (θ·T_q)`.
    pub fn new(epsilon: f64, t_q: u32, duty_cycle: f64) -> Result<Self, AnalyticError> {
        let burst = burst_size(t_q, duty_cycle)?;
        if !t_q.is_multiple_of(burst) {
            return Err(AnalyticError::InvalidParams(format!("burst {burst} does not divide T_q={t_q}")));
        }
        let p = SimpleCaseParams { epsilon, t_q, duty_cycle, t_tx: t_q / burst, offset: 0 };
        p.validate()?;
        Ok(p)
    }

    pub fn with_offset(mut self, offset: u32) -> Result<Self, AnalyticError> {
        self.offset = offset;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), AnalyticError> {
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(AnalyticError::InvalidParams(format!("epsilon {} outside [0, 1)", self.epsilon)));
        }
        burst_size(self.t_q, self.duty_cycle)?;
        if self.t_tx == 0 {
            return Err(AnalyticError::InvalidParams("T_tx must be positive".into()));
        }
        if self.offset >= self.t_tx {
            return Err(AnalyticError::InvalidParams(format!("offset {} must be below T_tx={}", self.offset, self.t_tx)));
        }
        Ok(())
    }

    /// Attempts per query period, `θ·T_q`.
    pub fn burst(&self) -> u32 {
        burst_size(self.t_q, self.duty_cycle).expect("validated")
    }
}

fn burst_size(t_q: u32, duty_cycle: f64) -> Result<u32, AnalyticError> {
    if t_q == 0 {
        return Err(AnalyticError::InvalidParams("T_q must be positive".into()));
    }
    let l = duty_cycle * t_q as f64;
    let rounded = l.round();
    if (l - rounded).abs() > 1e-9 || rounded < 1.0 || rounded > t_q as f64 {
        return Err(AnalyticError::InvalidParams(format!("θ·T_q = {l} is not a burst size in 1..={t_q}")));
    }
    Ok(rounded as u32)
}

fn check_age(t: u32) -> Result<(), AnalyticError> {
    if t == 0 {
        Err(AnalyticError::ZeroAge)
    } else {
        Ok(())
    }
}

#[inline]
fn pow(eps: f64, k: u64) -> f64 {
    // powi takes i32; exponents here can exceed it only when the result is 0
    if k > i32::MAX as u64 {
        if eps == 1.0 {
            1.0
        } else {
            0.0
        }
    } else {
        eps.powi(k as i32)
    }
}

/// AoI of the equally spaced schedule.
pub fn pmf_pq_aoi(t: u32, p: &SimpleCaseParams) -> Result<f64, AnalyticError> {
    check_age(t)?;
    let k = ((t - 1) / p.t_tx) as u64;
    Ok((1.0 - p.epsilon) * pow(p.epsilon, k) / p.t_tx as f64)
}

/// QAoI of the equally spaced schedule; support `1 + offset + k·T_tx`.
pub fn pmf_pq_qaoi(t: u32, p: &SimpleCaseParams) -> Result<f64, AnalyticError> {
    check_age(t)?;
    let shifted = t - 1;
    if shifted < p.offset || !(shifted - p.offset).is_multiple_of(p.t_tx) {
        return Ok(0.0);
    }
    let k = ((shifted - p.offset) / p.t_tx) as u64;
    Ok((1.0 - p.epsilon) * pow(p.epsilon, k))
}

/// QAoI of the burst schedule: with `t - 1 = k·T_q + (n - 1)`, the age is `t`
/// when the last `k` bursts failed entirely and the `n`-th attempt from the
/// end of the next one succeeded.
pub fn pmf_qapa_qaoi(t: u32, p: &SimpleCaseParams) -> Result<f64, AnalyticError> {
    check_age(t)?;
    let l = p.burst() as u64;
    let k = ((t - 1) / p.t_q) as u64;
    let n1 = ((t - 1) % p.t_q) as u64;
    if n1 >= l {
        return Ok(0.0);
    }
    Ok((1.0 - p.epsilon) * pow(p.epsilon, k * l + n1))
}

/// AoI of the burst schedule, averaged over the position in the query period.
pub fn pmf_qapa_aoi(t: u32, p: &SimpleCaseParams) -> Result<f64, AnalyticError> {
    check_age(t)?;
    let (eps, t_q, l) = (p.epsilon, p.t_q, p.burst());
    let mut acc = 0.0;
    for r in 0..t_q {
        let j = r.saturating_sub(t_q - l);
        if t > r {
            acc += pow(eps, j as u64) * pmf_qapa_qaoi(t - r, p)?;
        }
        if t <= j {
            acc += (1.0 - eps) * pow(eps, (t - 1) as u64);
        }
    }
    Ok(acc / t_q as f64)
}

/// The single-sum expression `Σ_{n=1}^{max(t mod T_q, θT_q)} (1-ε) ε^{⌊t/T_q⌋θT_q + n - 1} / T_q`.
/// Its total mass is not one; see the module docs.
pub fn pmf_qapa_aoi_single_sum(t: u32, p: &SimpleCaseParams) -> Result<f64, AnalyticError> {
    check_age(t)?;
    let l = p.burst();
    let k = (t / p.t_q) as u64;
    let upper = (t % p.t_q).max(l);
    let sum: f64 = (1..=upper as u64).map(|n| (1.0 - p.epsilon) * pow(p.epsilon, k * l as u64 + n - 1)).sum();
    Ok(sum / p.t_q as f64)
}

/// `P(Δ > m·T_tx) = ε^m` for the equally spaced schedule.
pub fn pq_aoi_tail(m: u32, p: &SimpleCaseParams) -> f64 {
    pow(p.epsilon, m as u64)
}

/// `P(τ > k·T_q) = ε^{kL}` for the burst schedule.
pub fn qapa_qaoi_tail(k: u32, p: &SimpleCaseParams) -> f64 {
    pow(p.epsilon, k as u64 * p.burst() as u64)
}

/// Upper bound `P(Δ > (k+1)·T_q) <= ε^{kL}` for the burst schedule: an age
/// that large needs the age at the last query to exceed `k·T_q`.
pub fn qapa_aoi_tail_bound(k: u32, p: &SimpleCaseParams) -> f64 {
    qapa_qaoi_tail(k, p)
}

/// The four laws, for callers that iterate over them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AnalyticPmf {
    PqAoi,
    PqQaoi,
    QapaAoi,
    QapaQaoi,
}

impl AnalyticPmf {
    pub const ALL: [AnalyticPmf; 4] = [AnalyticPmf::PqAoi, AnalyticPmf::PqQaoi, AnalyticPmf::QapaAoi, AnalyticPmf::QapaQaoi];

    pub fn name(self) -> &'static str {
        match self {
            AnalyticPmf::PqAoi => "pq_aoi",
            AnalyticPmf::PqQaoi => "pq_qaoi",
            AnalyticPmf::QapaAoi => "qapa_aoi",
            AnalyticPmf::QapaQaoi => "qapa_qaoi",
        }
    }

    pub fn pmf(self, t: u32, p: &SimpleCaseParams) -> Result<f64, AnalyticError> {
        match self {
            AnalyticPmf::PqAoi => pmf_pq_aoi(t, p),
            AnalyticPmf::PqQaoi => pmf_pq_qaoi(t, p),
            AnalyticPmf::QapaAoi => pmf_qapa_aoi(t, p),
            AnalyticPmf::QapaQaoi => pmf_qapa_qaoi(t, p),
        }
    }

    /// Exact `P(X > t)`.
    pub fn ccdf(self, t: u32, p: &SimpleCaseParams) -> f64 {
        let eps = p.epsilon;
        match self {
            AnalyticPmf::PqAoi => {
                let m = t / p.t_tx;
                let rem = t % p.t_tx;
                let em = pow(eps, m as u64);
                em - rem as f64 * (1.0 - eps) * em / p.t_tx as f64
            }
            AnalyticPmf::PqQaoi => {
                let reached = if t > p.offset { (t - 1 - p.offset) / p.t_tx + 1 } else { 0 };
                pow(eps, reached as u64)
            }
            AnalyticPmf::QapaQaoi => {
                let (k, m) = (t / p.t_q, t % p.t_q);
                pow(eps, k as u64 * p.burst() as u64 + m.min(p.burst()) as u64)
            }
            AnalyticPmf::QapaAoi => {
                let (t_q, l) = (p.t_q, p.burst());
                let mut acc = 0.0;
                for r in 0..t_q {
                    let j = r.saturating_sub(t_q - l);
                    let old = if t >= r { AnalyticPmf::QapaQaoi.ccdf(t - r, p) } else { 1.0 };
                    acc += pow(eps, j as u64) * old;
                    if t < j {
                        acc += pow(eps, t as u64) - pow(eps, j as u64);
                    }
                }
                acc / t_q as f64
            }
        }
    }

    /// `(t, pmf(t))` for `t = 1..` until the remaining mass drops below
    /// `tail`.
    pub fn table(self, p: &SimpleCaseParams, tail: f64) -> Vec<(u32, f64)> {
        let mut out = Vec::new();
        let mut t = 1;
        loop {
            out.push((t, self.pmf(t, p).expect("t >= 1")));
            if self.ccdf(t, p) < tail {
                return out;
            }
            t += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_case(eps: f64) -> SimpleCaseParams {
        SimpleCaseParams::new(eps, 20, 0.2).unwrap()
    }

    fn total(f: impl Fn(u32) -> f64, n: u32) -> f64 {
        (1..=n).map(f).sum()
    }

    #[test]
    fn parameter_checks() {
        let p = reference_case(0.5);
        assert_eq!((p.t_tx, p.burst()), (5, 4));
        assert!(SimpleCaseParams::new(0.5, 20, 0.21).is_err());
        assert!(SimpleCaseParams::new(1.0, 20, 0.2).is_err());
        assert!(SimpleCaseParams::new(0.5, 20, 0.15).is_err()); // burst 3 does not divide 20
        assert!(p.with_offset(5).is_err());
        assert_eq!(pmf_pq_aoi(0, &p), Err(AnalyticError::ZeroAge));
        for law in AnalyticPmf::ALL {
            assert_eq!(law.pmf(0, &p), Err(AnalyticError::ZeroAge));
        }
    }

    #[test]
    fn worked_values() {
        let p = reference_case(0.5);
        assert!((pmf_pq_aoi(1, &p).unwrap() - 0.1).abs() < 1e-15);
        assert!((pmf_pq_qaoi(1, &p).unwrap() - 0.5).abs() < 1e-15);
        assert!((pmf_pq_qaoi(6, &p).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(pmf_pq_qaoi(2, &p).unwrap(), 0.0);
        for (t, v) in [(1, 0.5), (2, 0.25), (3, 0.125), (4, 0.0625), (5, 0.0), (21, 0.03125)] {
            assert!((pmf_qapa_qaoi(t, &p).unwrap() - v).abs() < 1e-15, "t={t}");
        }
        // 17 positions see the query-time age 1 w.p. 1/2; the three late burst
        // positions see age 1 whenever the previous attempt worked
        assert!((pmf_qapa_aoi(1, &p).unwrap() - 0.1).abs() < 1e-15);
        assert!((pmf_qapa_aoi_single_sum(1, &p).unwrap() - 0.046875).abs() < 1e-15);
    }

    #[test]
    fn error_free_laws() {
        let p = reference_case(0.0);
        for t in 1..=40 {
            let pq = pmf_pq_aoi(t, &p).unwrap();
            assert_eq!(pq, if t <= 5 { 0.2 } else { 0.0 });
            assert_eq!(pmf_pq_qaoi(t, &p).unwrap(), (t == 1) as u32 as f64);
            assert_eq!(pmf_qapa_qaoi(t, &p).unwrap(), (t == 1) as u32 as f64);
            // ages 2..=17 are seen once per period; age 1 at the query and
            // after each of the three earlier burst attempts
            let expected = match t {
                1 => 0.2,
                2..=17 => 0.05,
                _ => 0.0,
            };
            assert!((pmf_qapa_aoi(t, &p).unwrap() - expected).abs() < 1e-15, "t={t}");
        }
    }

    #[test]
    fn all_laws_normalise() {
        for eps in [0.0, 0.1, 0.5, 0.8] {
            for (t_q, theta) in [(20, 0.2), (12, 0.25), (10, 1.0), (7, 1.0 / 7.0)] {
                let p = SimpleCaseParams::new(eps, t_q, theta).unwrap();
                for law in AnalyticPmf::ALL {
                    let n = 400 * t_q;
                    let mass = total(|t| law.pmf(t, &p).unwrap(), n);
                    assert!((mass - 1.0).abs() < 1e-9, "{} eps={eps} T_q={t_q}: {mass}", law.name());
                    // the exact tail closes the gap to rounding
                    assert!((mass + law.ccdf(n, &p) - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn ccdf_matches_partial_sums() {
        let p = reference_case(0.5).with_offset(2).unwrap();
        for law in AnalyticPmf::ALL {
            let mut mass = 0.0;
            for t in 1..=120 {
                mass += law.pmf(t, &p).unwrap();
                assert!((1.0 - mass - law.ccdf(t, &p)).abs() < 1e-12, "{} t={t}", law.name());
            }
            assert_eq!(law.ccdf(0, &p), 1.0);
        }
    }

    #[test]
    fn tail_formulas() {
        let p = reference_case(0.6);
        for m in 0..10 {
            assert!((AnalyticPmf::PqAoi.ccdf(m * p.t_tx, &p) - pq_aoi_tail(m, &p)).abs() < 1e-15);
            assert!((AnalyticPmf::QapaQaoi.ccdf(m * p.t_q, &p) - qapa_qaoi_tail(m, &p)).abs() < 1e-15);
            assert!(AnalyticPmf::QapaAoi.ccdf((m + 1) * p.t_q, &p) <= qapa_aoi_tail_bound(m, &p) + 1e-15);
        }
    }

    #[test]
    fn offset_shifts_query_age() {
        let p = reference_case(0.5).with_offset(3).unwrap();
        assert_eq!(pmf_pq_qaoi(1, &p).unwrap(), 0.0);
        assert!((pmf_pq_qaoi(4, &p).unwrap() - 0.5).abs() < 1e-15);
        assert!((pmf_pq_qaoi(9, &p).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn single_sum_variant_does_not_normalise() {
        // error free: 1/T_q for t = 1..T_q-1 and nothing else
        let p = reference_case(0.0);
        let mass = total(|t| pmf_qapa_aoi_single_sum(t, &p).unwrap(), 2_000);
        assert!((mass - 19.0 / 20.0).abs() < 1e-12);
        let p = reference_case(0.5);
        let mass = total(|t| pmf_qapa_aoi_single_sum(t, &p).unwrap(), 2_000);
        // close to one here, but short by about 2e-4, far beyond rounding
        assert!((mass - 1.0).abs() > 1e-4, "{mass}");
        let rederived = total(|t| pmf_qapa_aoi(t, &p).unwrap(), 2_000);
        assert!((rederived - 1.0).abs() < 1e-12);
    }

    #[test]
    fn burst_query_age_dominates_equally_spaced() {
        for eps in [0.1, 0.5, 0.9] {
            let p = reference_case(eps);
            for t in 0..200 {
                assert!(AnalyticPmf::QapaQaoi.ccdf(t, &p) <= AnalyticPmf::PqQaoi.ccdf(t, &p) + 1e-15, "eps={eps} t={t}");
            }
        }
    }

    #[test]
    fn table_stops_at_tail() {
        let p = reference_case(0.5);
        let tab = AnalyticPmf::PqAoi.table(&p, 1e-6);
        let last = tab.last().unwrap().0;
        assert!(AnalyticPmf::PqAoi.ccdf(last, &p) < 1e-6);
        assert!(AnalyticPmf::PqAoi.ccdf(last - 1, &p) >= 1e-6);
    }
}
