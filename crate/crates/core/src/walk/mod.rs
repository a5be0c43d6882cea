//! The simple random walk conditioned to stay nonnegative: samplers, exact
//! pmf oracles, the X/S coupling, and the stationary path statistics.

mod coupling;
mod kernel;
mod pmf;
mod statistics;

use thiserror::Error;

pub use coupling::{sample_coupled_pair, straight_up_probability, CoupledPair, Symbol};
pub use kernel::{p_down, p_up, sample_pi_path, sample_srw, step_pi, transition_prob, Direction, WalkPath};
pub use pmf::{
    compensated_sum, doob_weight, enumerate_pmf, equal_weight_check, equal_weight_check_with, exact_pmf,
    for_each_nonnegative_path, DoobWeight, ExactPmf, ENUMERATION_MAX_STEPS, PMF_MAX_STEPS,
};
pub use statistics::{
    corner_density_statistic, domination_check, moment_growth_check, occupation_statistic, DominationReport,
    MomentKind, MomentRow, MomentTable, OrderingCheck,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WalkError {
    #[error("negative height {0}")]
    NegativeHeight(i64),
    #[error("path must start at 0")]
    NotRooted,
    #[error("path is not nearest-neighbour at step {0}")]
    NotNearestNeighbour(usize),
    #[error("n = {n} exceeds the limit {max}")]
    TooLong { n: usize, max: usize },
    #[error("coupled pairs need an even length ≥ 2, got {0}")]
    CouplingLength(usize),
    #[error("path has {steps} steps but the test function needs {need}")]
    PathTooShort { steps: usize, need: usize },
    #[error("no lengths given")]
    EmptyLengths,
    #[error(transparent)]
    Stats(#[from] crate::stats::StatsError),
}
