//! Corner-flip dynamics of a pinned interface above a hard wall.

mod history;
mod sim;
mod state;

pub use history::{EventHistory, IntervalSummary};
pub(crate) use history::HistoryRecorder;
pub use sim::{EventLogging, FlipEvent, Observer, RunCounts, Simulation};
pub use state::{validate_state, FlipOutcome, InterfaceState, StateError};
