//! Scenario and analytic configuration files (TOML).

use std::path::Path;

use qaoi_core::chain::StateLabels;
use qaoi_core::{CostKind, MarkovProcess, ModelConfig, SimConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

fn default_delta_max_factor() -> u32 {
    100
}

fn default_discount() -> f64 {
    ModelConfig::DEFAULT_DISCOUNT
}

fn default_costs() -> Vec<CostKind> {
    vec![CostKind::PermanentQuery, CostKind::QueryAware]
}

/// One scenario: the chains, the energy budget and the sweep over the
/// channel quality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    /// Token generation probability per slot.
    pub mu_b: f64,
    /// Token bucket size B.
    pub bucket: u32,
    /// Age cap as a multiple of the query time scale.
    #[serde(default = "default_delta_max_factor")]
    pub delta_max_factor: u32,
    #[serde(default = "default_discount")]
    pub discount: f64,
    #[serde(default = "default_costs")]
    pub costs: Vec<CostKind>,
    pub query: QuerySpec,
    pub error: ErrorSpec,
    #[serde(default)]
    pub simulation: SimulationSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum QuerySpec {
    /// A query every `period` slots.
    Periodic { period: usize },
    /// Inter-query gaps uniform on `min..=max`.
    Uniform { min: usize, max: usize },
    Explicit { transition: Vec<Vec<f64>>, query: Vec<bool> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ErrorSpec {
    Constant {
        epsilon: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sweep: Option<Vec<f64>>,
    },
    /// Pass of `window` slots with erasure `epsilon0` every `period` slots;
    /// no transmission gets through outside the pass.
    Satellite {
        period: usize,
        epsilon0: f64,
        window: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sweep: Option<Vec<f64>>,
    },
    Explicit { transition: Vec<Vec<f64>>, erasure: Vec<f64> },
}

impl ErrorSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ErrorSpec::Constant { .. } => "constant",
            ErrorSpec::Satellite { .. } => "satellite",
            ErrorSpec::Explicit { .. } => "explicit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSpec {
    pub horizon: u64,
    /// Slots discarded at the start of every run; defaults to ten query
    /// time scales.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<u64>,
    pub seeds: usize,
    pub base_seed: u64,
    /// Slots of the first seed written to the trace file; 0 disables it.
    pub trace_slots: u64,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        SimulationSpec { horizon: 1_000_000, burn_in: None, seeds: 10, base_seed: 1, trace_slots: 0 }
    }
}

/// One point of the sweep: the swept erasure probability, if any.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint(pub Option<f64>);

impl SweepPoint {
    /// File-name fragment for this point.
    pub fn label(&self) -> String {
        match self.0 {
            Some(eps) => format!("eps{eps}"),
            None => "explicit".to_string(),
        }
    }
}

impl ScenarioSpec {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let spec: ScenarioSpec =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(format!("scenario `{}`: {msg}", self.name)));
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return bad("name must be non-empty and free of path separators".into());
        }
        if self.costs.is_empty() {
            return bad("at least one cost is required".into());
        }
        if self.delta_max_factor == 0 {
            return bad("delta_max_factor must be positive".into());
        }
        let sweep = match &self.error {
            ErrorSpec::Constant { sweep, .. } | ErrorSpec::Satellite { sweep, .. } => sweep.as_deref(),
            ErrorSpec::Explicit { .. } => None,
        };
        if sweep.is_some_and(|s| s.is_empty()) {
            return bad("sweep must not be empty".into());
        }
        let sim = &self.simulation;
        if sim.seeds == 0 {
            return bad("simulation.seeds must be positive".into());
        }
        if self.burn_in() >= sim.horizon {
            return bad(format!("burn-in {} must be below the horizon {}", self.burn_in(), sim.horizon));
        }
        // building every model checks the chain and model preconditions
        self.query_chain()?;
        for point in self.points() {
            for &cost in &self.costs {
                self.model_config(point, cost)?.validate()?;
            }
        }
        Ok(())
    }

    /// Characteristic query spacing: the period, the longest gap, or the
    /// chain size.
    pub fn query_scale(&self) -> u32 {
        match &self.query {
            QuerySpec::Periodic { period } => *period as u32,
            QuerySpec::Uniform { max, .. } => *max as u32,
            QuerySpec::Explicit { query, .. } => query.len() as u32,
        }
    }

    pub fn delta_max(&self) -> u32 {
        self.delta_max_factor * self.query_scale()
    }

    pub fn burn_in(&self) -> u64 {
        self.simulation.burn_in.unwrap_or(10 * self.query_scale() as u64)
    }

    /// The scenario with every defaulted simulation field written out.
    pub fn resolved(&self) -> ScenarioSpec {
        let mut spec = self.clone();
        spec.simulation.burn_in = Some(self.burn_in());
        spec
    }

    pub fn seeds(&self) -> Vec<u64> {
        qaoi_core::simulator::seed_list(self.simulation.base_seed, self.simulation.seeds)
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig::new(self.simulation.horizon, self.burn_in(), self.simulation.base_seed)
    }

    pub fn points(&self) -> Vec<SweepPoint> {
        match &self.error {
            ErrorSpec::Constant { epsilon: e, sweep } | ErrorSpec::Satellite { epsilon0: e, sweep, .. } => {
                sweep.clone().unwrap_or_else(|| vec![*e]).into_iter().map(|x| SweepPoint(Some(x))).collect()
            }
            ErrorSpec::Explicit { .. } => vec![SweepPoint(None)],
        }
    }

    pub fn query_chain(&self) -> Result<MarkovProcess, CliError> {
        Ok(match &self.query {
            QuerySpec::Periodic { period } => MarkovProcess::periodic_query(*period)?,
            QuerySpec::Uniform { min, max } => MarkovProcess::uniform_query(*min, *max)?,
            QuerySpec::Explicit { transition, query } => {
                MarkovProcess::new(transition.clone(), StateLabels::Query(query.clone()))?
            }
        })
    }

    pub fn error_chain(&self, point: SweepPoint) -> Result<MarkovProcess, CliError> {
        Ok(match (&self.error, point.0) {
            (ErrorSpec::Constant { .. }, Some(eps)) => MarkovProcess::constant_error(eps)?,
            (ErrorSpec::Satellite { period, window, .. }, Some(eps)) => {
                MarkovProcess::satellite_error(*period, eps, *window)?
            }
            (ErrorSpec::Explicit { transition, erasure }, None) => {
                MarkovProcess::new(transition.clone(), StateLabels::Erasure(erasure.clone()))?
            }
            _ => return Err(CliError::Config("sweep point does not match the error chain kind".into())),
        })
    }

    pub fn model_config(&self, point: SweepPoint, cost: CostKind) -> Result<ModelConfig, CliError> {
        Ok(ModelConfig {
            delta_max: self.delta_max(),
            bucket_size: self.bucket,
            token_rate: self.mu_b,
            discount: self.discount,
            cost_kind: cost,
            error_chain: self.error_chain(point)?,
            query_chain: self.query_chain()?,
        })
    }
}

fn default_tail() -> f64 {
    1e-12
}

/// Feedback-free example: closed-form laws, optionally checked against a
/// simulation of the two fixed schedules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyticSpec {
    pub name: String,
    pub epsilon: f64,
    pub t_q: u32,
    pub duty_cycle: f64,
    #[serde(default)]
    pub offset: u32,
    /// Tables stop once the remaining mass is below this.
    #[serde(default = "default_tail")]
    pub tail: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSpec>,
}

impl AnalyticSpec {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let spec: AnalyticSpec =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if !(spec.tail > 0.0 && spec.tail < 1.0) {
            return Err(CliError::Config(format!("tail {} must lie in (0, 1)", spec.tail)));
        }
        if let Some(sim) = &spec.simulation {
            if sim.seeds == 0 {
                return Err(CliError::Config("simulation.seeds must be positive".into()));
            }
        }
        Ok(spec)
    }

    pub fn burn_in(&self) -> u64 {
        self.simulation.as_ref().and_then(|s| s.burn_in).unwrap_or(10 * self.t_q as u64)
    }
}
