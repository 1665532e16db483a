//! Solve, simulate and export one scenario; compare two runs; dump the
//! closed-form laws.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use qaoi_core::analytic::{AnalyticPmf, SimpleCaseParams};
use qaoi_core::policy_io::{read_policy, write_policy};
use qaoi_core::simulator::{simulate_fixed_seeds, simulate_policy, simulate_policy_seeds, seed_list};
use qaoi_core::solver::policy_iteration;
use qaoi_core::{
    CostKind, FixedStrategy, MdpModel, MetricsReport, Policy, SeedAggregate, SimConfig, SolverOptions,
};
use rayon::prelude::*;

use crate::config::{AnalyticSpec, ScenarioSpec, SweepPoint};
use crate::files::{read_csv, write_csv, CcdfRow, CompareRow, CsvKind, MetricsRow, PmfRow, TraceCsvRow};
use crate::manifest::{Manifest, PointRecord, Versions, MANIFEST_FORMAT};
use crate::CliError;

pub const METRICS_FILE: &str = "metrics.csv";

/// What [`run_scenario`] does with each model.
#[derive(Debug, Clone, PartialEq)]
pub enum Stage {
    /// Solve and write policy files.
    Solve { values: bool },
    /// Read policy files from a directory and simulate them.
    Simulate { policy_dir: PathBuf },
    /// Solve, write policy files, simulate.
    Run { values: bool },
}

impl Stage {
    fn command(&self) -> &'static str {
        match self {
            Stage::Solve { .. } => "solve",
            Stage::Simulate { .. } => "simulate",
            Stage::Run { .. } => "run",
        }
    }
}

fn stem(point: SweepPoint, cost: CostKind) -> String {
    format!("{}_{}", cost.label().to_lowercase(), point.label())
}

pub fn policy_file_name(point: SweepPoint, cost: CostKind) -> String {
    format!("policy_{}.txt", stem(point, cost))
}

/// PMF rows: the unconditional age, the age at queries, then every phase.
pub fn pmf_rows(report: &MetricsReport) -> Vec<PmfRow> {
    let mut rows = Vec::new();
    let mut push = |phase: String, pmf: Vec<(u32, f64)>| {
        rows.extend(pmf.into_iter().filter(|&(_, p)| p > 0.0).map(|(age, probability)| PmfRow {
            phase: phase.clone(),
            age,
            probability,
        }));
    };
    push("all".into(), report.aoi_pmf());
    push("query".into(), report.qaoi_pmf());
    for k in 0..report.phase.len() {
        if report.phase[k].total() > 0 {
            push(k.to_string(), report.phase_pmf(k));
        }
    }
    rows
}

pub fn ccdf_rows(report: &MetricsReport) -> Vec<CcdfRow> {
    let tag = |metric: &str, ccdf: Vec<(u32, f64)>| {
        ccdf.into_iter().map(|(age, ccdf)| CcdfRow { metric: metric.to_string(), age, ccdf }).collect::<Vec<_>>()
    };
    let mut rows = tag("aoi", report.aoi_ccdf());
    rows.extend(tag("qaoi", report.qaoi_ccdf()));
    rows
}

fn metrics_row(spec: &ScenarioSpec, label: &str, epsilon: Option<f64>, agg: &SeedAggregate) -> MetricsRow {
    let tokens = agg.pooled.token_summary();
    MetricsRow {
        scenario: spec.name.clone(),
        policy: label.to_string(),
        epsilon,
        seeds: agg.seeds.len(),
        avg_aoi: agg.avg_aoi,
        avg_aoi_se: agg.avg_aoi_se,
        avg_qaoi: agg.avg_qaoi,
        avg_qaoi_se: agg.avg_qaoi_se,
        n_queries: agg.pooled.n_queries,
        token_mean: tokens.map_or(0.0, |t| t.mean),
        token_p10: tokens.map_or(0, |t| t.p10),
        token_p50: tokens.map_or(0, |t| t.p50),
        token_p90: tokens.map_or(0, |t| t.p90),
        delta_max_occupancy: agg.pooled.saturation(),
    }
}

struct JobOutput {
    record: PointRecord,
    metrics: Option<MetricsRow>,
}

fn run_job(
    spec: &ScenarioSpec,
    point: SweepPoint,
    cost: CostKind,
    stage: &Stage,
    run_dir: &Path,
    solver: &SolverOptions,
) -> Result<JobOutput, CliError> {
    let model = MdpModel::new(spec.model_config(point, cost)?)?;
    let policy_name = policy_file_name(point, cost);
    let mut files = Vec::new();

    let policy: Policy = match stage {
        Stage::Solve { values } | Stage::Run { values } => {
            let report = policy_iteration(&model, solver)?;
            let path = run_dir.join(&policy_name);
            let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
            write_policy(BufWriter::new(file), &model, &report.policy, values.then_some(&report.value))
                .map_err(|source| CliError::PolicyFile { path: path.clone(), source })?;
            files.push(policy_name);
            report.policy
        }
        Stage::Simulate { policy_dir } => {
            let path = policy_dir.join(&policy_name);
            let file = File::open(&path).map_err(|e| CliError::io(&path, e))?;
            read_policy(BufReader::new(file), &model).map_err(|source| CliError::PolicyFile { path, source })?.0
        }
    };

    let mut metrics = None;
    if !matches!(stage, Stage::Solve { .. }) {
        let sim = spec.sim_config();
        let seeds = spec.seeds();
        let agg = simulate_policy_seeds(&model, &policy, &sim, &seeds)?;
        let s = stem(point, cost);
        let pmf = format!("pmf_{s}.csv");
        write_csv(&run_dir.join(&pmf), CsvKind::Pmf, &pmf_rows(&agg.pooled))?;
        let ccdf = format!("ccdf_{s}.csv");
        write_csv(&run_dir.join(&ccdf), CsvKind::Ccdf, &ccdf_rows(&agg.pooled))?;
        files.extend([pmf, ccdf]);

        let slots = spec.simulation.trace_slots.min(sim.horizon - sim.burn_in);
        if slots > 0 {
            // a shorter run of the first seed replays the same first slots
            let short = SimConfig::new(sim.burn_in + slots, sim.burn_in, seeds[0]).with_trace();
            let rep = simulate_policy(&model, &policy, &short)?;
            let rows: Vec<TraceCsvRow> = rep
                .trace
                .expect("trace requested")
                .iter()
                .map(|r| TraceCsvRow {
                    t: r.t,
                    age: r.age,
                    tokens: r.tokens,
                    err_state: r.err_state,
                    query_state: r.query_state,
                    action: r.action.as_u8(),
                    delivered: r.delivered as u8,
                    is_query: r.is_query as u8,
                })
                .collect();
            let trace = format!("trace_{s}.csv");
            write_csv(&run_dir.join(&trace), CsvKind::Trace, &rows)?;
            files.push(trace);
        }
        metrics = Some(metrics_row(spec, cost.label(), point.0, &agg));
    }

    Ok(JobOutput {
        record: PointRecord {
            policy: cost,
            epsilon: point.0,
            config_hash: model.config().config_hash(),
            states: model.n_states(),
            transmit_states: policy.transmit_count(),
            files,
        },
        metrics,
    })
}

/// Runs every (sweep point, cost) job of `spec` into `run_dir` and writes
/// the metrics table and the manifest. Jobs run on the current rayon pool;
/// each job writes only its own files.
pub fn run_scenario(
    spec: &ScenarioSpec,
    run_dir: &Path,
    stage: &Stage,
    solver: &SolverOptions,
) -> Result<Manifest, CliError> {
    spec.validate()?;
    std::fs::create_dir_all(run_dir).map_err(|e| CliError::io(run_dir, e))?;
    let jobs: Vec<(SweepPoint, CostKind)> =
        spec.points().into_iter().flat_map(|p| spec.costs.iter().map(move |&c| (p, c))).collect();
    let outputs: Vec<JobOutput> = jobs
        .par_iter()
        .map(|&(point, cost)| run_job(spec, point, cost, stage, run_dir, solver))
        .collect::<Result<_, _>>()?;

    let metrics: Vec<MetricsRow> = outputs.iter().filter_map(|o| o.metrics.clone()).collect();
    if !metrics.is_empty() {
        write_csv(&run_dir.join(METRICS_FILE), CsvKind::Metrics, &metrics)?;
    }
    let manifest = Manifest {
        format: MANIFEST_FORMAT.to_string(),
        command: stage.command().to_string(),
        seeds: spec.seeds(),
        versions: Versions::current(),
        scenario: spec.resolved(),
        points: outputs.into_iter().map(|o| o.record).collect(),
    };
    manifest.save(run_dir)?;
    Ok(manifest)
}

/// Per-point averages of `policy_a` in run `a` against `policy_b` in run
/// `b`, ordered by the swept value.
pub fn compare_runs(a: &Path, b: &Path, policy_a: CostKind, policy_b: CostKind) -> Result<Vec<CompareRow>, CliError> {
    let (ma, mb) = (Manifest::load(a)?, Manifest::load(b)?);
    ma.check_compatible(&mb)?;
    let rows_a: Vec<MetricsRow> = read_csv(&a.join(METRICS_FILE), CsvKind::Metrics)?;
    let rows_b: Vec<MetricsRow> = read_csv(&b.join(METRICS_FILE), CsvKind::Metrics)?;
    let find = |rows: &[MetricsRow], policy: CostKind, eps: Option<f64>, dir: &Path| {
        rows.iter().find(|r| r.policy == policy.label() && r.epsilon == eps).cloned().ok_or_else(|| {
            CliError::ManifestMismatch(format!("{} has no {policy} row at epsilon {eps:?}", dir.display()))
        })
    };
    ma.axis()
        .into_iter()
        .map(|eps| {
            let ra = find(&rows_a, policy_a, eps, a)?;
            let rb = find(&rows_b, policy_b, eps, b)?;
            Ok(CompareRow {
                epsilon: eps,
                aoi_a: ra.avg_aoi,
                aoi_b: rb.avg_aoi,
                aoi_delta: ra.avg_aoi - rb.avg_aoi,
                qaoi_a: ra.avg_qaoi,
                qaoi_b: rb.avg_qaoi,
                qaoi_delta: ra.avg_qaoi - rb.avg_qaoi,
            })
        })
        .collect()
}

fn law_rows(phase: &str, law: AnalyticPmf, p: &SimpleCaseParams, tail: f64) -> Vec<PmfRow> {
    law.table(p, tail)
        .into_iter()
        .filter(|&(_, prob)| prob > 0.0)
        .map(|(age, probability)| PmfRow { phase: phase.to_string(), age, probability })
        .collect()
}

fn law_ccdf(metric: &str, law: AnalyticPmf, p: &SimpleCaseParams, tail: f64) -> Vec<CcdfRow> {
    let last = law.table(p, tail).last().map_or(0, |&(t, _)| t);
    (0..=last).map(|age| CcdfRow { metric: metric.to_string(), age, ccdf: law.ccdf(age, p) }).collect()
}

/// Writes the closed-form laws of both feedback-free schedules and, when the
/// spec has a simulation section, the simulated counterparts in the same
/// schema. Returns the written paths.
pub fn run_analytic(spec: &AnalyticSpec, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let params = SimpleCaseParams::new(spec.epsilon, spec.t_q, spec.duty_cycle)?.with_offset(spec.offset)?;
    let dir = out_dir.join(&spec.name);
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let mut written = Vec::new();
    let schedules = [
        ("pq", AnalyticPmf::PqAoi, AnalyticPmf::PqQaoi),
        ("qapa", AnalyticPmf::QapaAoi, AnalyticPmf::QapaQaoi),
    ];
    for (name, aoi, qaoi) in schedules {
        let mut pmf = law_rows("all", aoi, &params, spec.tail);
        pmf.extend(law_rows("query", qaoi, &params, spec.tail));
        let path = dir.join(format!("analytic_{name}_pmf.csv"));
        write_csv(&path, CsvKind::Pmf, &pmf)?;
        written.push(path);
        let mut ccdf = law_ccdf("aoi", aoi, &params, spec.tail);
        ccdf.extend(law_ccdf("qaoi", qaoi, &params, spec.tail));
        let path = dir.join(format!("analytic_{name}_ccdf.csv"));
        write_csv(&path, CsvKind::Ccdf, &ccdf)?;
        written.push(path);
    }

    let Some(sim) = &spec.simulation else { return Ok(written) };
    if spec.offset != 0 {
        return Err(CliError::Config("the simulated schedules are aligned; set offset = 0 to simulate".into()));
    }
    let cfg = SimConfig::new(sim.horizon, spec.burn_in(), sim.base_seed);
    let seeds = seed_list(sim.base_seed, sim.seeds);
    let strategies =
        [("pq", FixedStrategy::EquallySpaced(params.t_tx)), ("qapa", FixedStrategy::PreQueryBurst(params.burst()))];
    for (name, strategy) in strategies {
        let agg = simulate_fixed_seeds(strategy, spec.epsilon, spec.t_q, spec.duty_cycle, &cfg, &seeds)?;
        // the per-phase rows have no closed-form counterpart
        let pmf: Vec<PmfRow> = pmf_rows(&agg.pooled).into_iter().filter(|r| r.phase == "all" || r.phase == "query").collect();
        let path = dir.join(format!("fixed_{name}_pmf.csv"));
        write_csv(&path, CsvKind::Pmf, &pmf)?;
        written.push(path);
        let path = dir.join(format!("fixed_{name}_ccdf.csv"));
        write_csv(&path, CsvKind::Ccdf, &ccdf_rows(&agg.pooled))?;
        written.push(path);
    }
    Ok(written)
}
