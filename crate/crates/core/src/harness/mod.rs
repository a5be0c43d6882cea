//! Experiment plans, the verification suites and their reports.

pub mod export;
pub mod plan;
pub mod report;
pub mod simulate;
mod suites;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::continuum::SheError;
use crate::observables::{ObservableError, WindowViolation};
use crate::stats::StatsError;
use crate::walk::WalkError;
pub use plan::ExperimentPlan;
pub use report::{BracketRow, Check, Comparison, CriterionReport, StatReport, Statistic};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid plan: {0}")]
    Plan(String),
    #[error(transparent)]
    Window(#[from] WindowViolation),
    #[error(transparent)]
    Observable(ObservableError),
    #[error(transparent)]
    Walk(#[from] WalkError),
    #[error(transparent)]
    She(#[from] SheError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl From<ObservableError> for HarnessError {
    // window violations surface as themselves wherever they arise
    fn from(e: ObservableError) -> Self {
        match e {
            ObservableError::Window(w) => HarnessError::Window(w),
            other => HarnessError::Observable(other),
        }
    }
}

impl HarnessError {
    /// Process exit status: 2 for a bad plan, 3 for a window violation,
    /// 1 for anything that went wrong while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Plan(_) => 2,
            HarnessError::Window(_) => 3,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Stationarity,
    Bracket,
    Reflection,
    Walk,
    Norms,
    She,
    All,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Stationarity,
        Suite::Bracket,
        Suite::Reflection,
        Suite::Walk,
        Suite::Norms,
        Suite::She,
        Suite::All,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Stationarity => "stationarity",
            Suite::Bracket => "bracket",
            Suite::Reflection => "reflection",
            Suite::Walk => "walk",
            Suite::Norms => "norms",
            Suite::She => "she",
            Suite::All => "all",
        }
    }

    pub fn criteria(self) -> &'static [u32] {
        match self {
            Suite::Stationarity => &[2],
            Suite::Bracket => &[5, 6, 8],
            Suite::Reflection => &[1, 7],
            Suite::Walk => &[3, 4, 9, 11, 13],
            Suite::Norms => &[10, 14],
            Suite::She => &[12],
            Suite::All => &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14],
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| HarnessError::Plan(format!("unknown suite '{s}'")))
    }
}

/// Run every enabled criterion of `suite`.
pub fn run_plan(plan: &ExperimentPlan, suite: Suite) -> Result<StatReport, HarnessError> {
    plan.validate(suite)?;
    let ids = plan.enabled_criteria(suite);
    let mut report = StatReport::new(&plan.experiment_id, suite.name(), plan.seed, plan.hash());
    let has = |id: u32| ids.contains(&id);

    if has(1) {
        report.push(suites::identity(plan)?);
    }
    if has(2) {
        report.push(suites::stationarity(plan)?);
    }
    if has(3) || has(4) {
        for c in suites::corners_and_transience(plan, &ids)? {
            report.push(c);
        }
    }
    if [5, 6, 7, 8].into_iter().any(has) {
        let runs = suites::bracket_runs(plan)?;
        for c in suites::bracket_criteria(plan, &runs, &ids)? {
            report.push(c);
        }
        report.bracket_table = Some(runs.rows);
    }
    if has(9) {
        report.push(suites::coupling(plan)?);
    }
    if has(10) {
        report.push(suites::fourier(plan)?);
    }
    if has(11) {
        report.push(suites::static_invariance(plan)?);
    }
    if has(12) {
        report.push(suites::she(plan)?);
    }
    if has(13) {
        report.push(suites::moments(plan)?);
    }
    if has(14) {
        report.push(suites::increments(plan)?);
    }
    Ok(report)
}

/// A plan with every replica count scaled down, for smoke runs.
pub fn smoke_plan(replicas: u64) -> ExperimentPlan {
    ExperimentPlan {
        replicas: Some(replicas),
        ..ExperimentPlan::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert_eq!("nope".parse::<Suite>().unwrap_err().exit_code(), 2);
        let mut all: Vec<u32> = Suite::ALL[..6].iter().flat_map(|s| s.criteria().iter().copied()).collect();
        all.sort();
        assert_eq!(all, Suite::All.criteria());
    }

    #[test]
    fn window_violation_maps_to_exit_3() {
        let mut plan = ExperimentPlan::default();
        plan.bracket.lattice_size = 10;
        let err = run_plan(&plan, Suite::Bracket).unwrap_err();
        assert_eq!(err.exit_code(), 3, "{err}");
    }

    #[test]
    fn reports_are_reproducible_and_independent_of_threads() {
        let mut plan = smoke_plan(60);
        plan.criteria = Some(vec![2, 10]);
        plan.stationarity.horizon = 50.0;
        let a = run_plan(&plan, Suite::All).unwrap();
        plan.parallelism = Some(1);
        let b = run_plan(&plan, Suite::All).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a.criteria.len(), 2);
    }
}
