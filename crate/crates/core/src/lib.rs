//! Query-aware age-of-information scheduling as a discounted MDP.
//!
//! A sensor with an energy-harvesting token bucket decides every slot whether
//! to send a fresh update over an erasure channel whose error probability
//! follows a Markov chain. Queries arrive according to a second Markov chain.
//! Two costs are supported: the plain age after every slot (PQ), and the age
//! only in slots where a query arrives (QAPA).
//!
//! * [`chain`] builds and validates the error and query chains.
//! * [`model`] holds the state space and the transition kernel.
//! * [`solver`] computes optimal policies.
//! * [`simulator`] runs policies and fixed schedules by Monte Carlo.
//! * [`analytic`] gives closed forms for the feedback-free schedules.
//! * [`policy_io`] reads and writes policy files.

pub mod analytic;
pub mod chain;
pub mod model;
pub mod policy_io;
pub mod simulator;
pub mod solver;

pub use chain::{ChainError, MarkovProcess, StateLabels};
pub use model::{Action, CostKind, MdpModel, ModelConfig, ModelError, SystemState};
pub use simulator::{FixedStrategy, Histogram, MetricsReport, SeedAggregate, SimConfig, SimError, TraceRow};
pub use solver::{Policy, SolveReport, SolverError, SolverOptions, SweepMode, ValueFunction};

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
