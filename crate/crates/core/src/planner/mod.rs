//! Search for deceptive topologies that steer flows towards or away from
//! a switch, and the flow-coverage measure that scores them.

mod coverage;
mod env;
mod flows;
mod oracle;
mod search;

pub use coverage::{flow_coverage, CoverageError, CoverageModel, CoverageReport};
pub use env::{
    action_space, pair_at, realizable, ActionFamily, ActionSpec, Env, EnvState, GoalKind, PlannerGoal, Rejection,
    StepOutcome,
};
pub use flows::random_flows;
pub use oracle::{oracle_coverage, OracleError};
pub use search::{episode_len, search, SearchConfig, SearchReport, TraceRow};

use crate::topo::NodeId;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlannerError {
    #[error("unknown target switch {0}")]
    UnknownTarget(NodeId),
    #[error("similarity threshold {0} is outside [0, 1]")]
    InvalidSimilarity(f64),
    #[error("{requested} flows requested but only {available} host pairs exist")]
    TooManyFlows { requested: usize, available: usize },
    #[error("search budget must be positive")]
    ZeroBudget,
    #[error("fewer than two links to rewire")]
    EmptyActionSpace,
    #[error(transparent)]
    Coverage(#[from] CoverageError),
}
