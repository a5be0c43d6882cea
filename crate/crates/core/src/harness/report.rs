//! Machine-readable reports. Bodies carry no timestamps or timings, so the
//! same plan and seed give byte-identical JSON.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::plan::SCHEMA_VERSION;
use crate::stats::RunningStats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "<")]
    Below,
    #[serde(rename = "==")]
    Equal,
}

impl Comparison {
    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Comparison::AtMost => value <= threshold,
            Comparison::AtLeast => value >= threshold,
            Comparison::Below => value < threshold,
            Comparison::Equal => value == threshold,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparison::AtMost => "<=",
            Comparison::AtLeast => ">=",
            Comparison::Below => "<",
            Comparison::Equal => "==",
        }
    }
}

/// One thresholded test statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub comparison: Comparison,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, comparison: Comparison, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            comparison,
            threshold,
            passed: comparison.holds(value, threshold),
        }
    }

    /// A purely qualitative check (e.g. monotonicity), recorded as 1/0 == 1.
    pub fn flag(name: impl Into<String>, holds: bool) -> Self {
        Self::new(name, if holds { 1.0 } else { 0.0 }, Comparison::Equal, 1.0)
    }
}

/// A Monte Carlo estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statistic {
    pub name: String,
    pub mean: f64,
    pub stderr: f64,
    pub replicas: u64,
}

impl Statistic {
    pub fn new(name: impl Into<String>, s: &RunningStats) -> Self {
        Self {
            name: name.into(),
            mean: s.mean,
            stderr: s.stderr(),
            replicas: s.count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: u32,
    pub name: String,
    /// Non-gating criteria never affect the exit status.
    pub gating: bool,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub statistics: Vec<Statistic>,
    pub warnings: Vec<String>,
}

impl CriterionReport {
    pub fn new(id: u32, name: &str, gating: bool, checks: Vec<Check>, statistics: Vec<Statistic>) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        Self {
            id,
            name: name.into(),
            gating,
            passed,
            checks,
            statistics,
            warnings: Vec::new(),
        }
    }

    pub fn with_warnings(mut self, warnings: Vec<String>) -> Self {
        self.warnings = warnings;
        self
    }

    /// `criterion N [name]: PASS|FAIL (check value op threshold; ...)`.
    pub fn summary_line(&self) -> String {
        let verdict = match (self.passed, self.gating) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "WARN",
        };
        let checks: Vec<String> = self
            .checks
            .iter()
            .map(|c| format!("{} = {:.6e} {} {:e}", c.name, c.value, c.comparison.symbol(), c.threshold))
            .collect();
        format!("criterion {} [{}]: {} ({})", self.id, self.name, verdict, checks.join("; "))
    }
}

/// One ε row of the bracket suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BracketRow {
    pub epsilon: f64,
    pub replicas: u64,
    pub bracket_error_mean: f64,
    pub bracket_error_stderr: f64,
    pub a1_mean: f64,
    pub a2_mean: f64,
    pub a2_stderr: f64,
    pub abs_r_mean: f64,
    pub abs_r_stderr: f64,
    pub eta_mass_mean: f64,
    pub max_support_gap: f64,
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatReport {
    pub schema_version: u32,
    pub experiment_id: String,
    pub suite: String,
    pub seed: u64,
    pub plan_hash: String,
    /// All gating criteria passed.
    pub passed: bool,
    pub criteria: Vec<CriterionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bracket_table: Option<Vec<BracketRow>>,
}

impl StatReport {
    pub fn new(experiment_id: &str, suite: &str, seed: u64, plan_hash: String) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment_id: experiment_id.into(),
            suite: suite.into(),
            seed,
            plan_hash,
            passed: true,
            criteria: Vec::new(),
            bracket_table: None,
        }
    }

    pub fn push(&mut self, c: CriterionReport) {
        self.passed &= c.passed || !c.gating;
        self.criteria.push(c);
        self.criteria.sort_by_key(|c| c.id);
    }

    pub fn criterion(&self, id: u32) -> Option<&CriterionReport> {
        self.criteria.iter().find(|c| c.id == id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// CSV `criterion,name,gating,passed,check,value,comparison,threshold,check_passed`.
    pub fn write_checks_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "criterion",
            "name",
            "gating",
            "passed",
            "check",
            "value",
            "comparison",
            "threshold",
            "check_passed",
        ])?;
        for c in &self.criteria {
            for k in &c.checks {
                w.write_record([
                    c.id.to_string(),
                    c.name.clone(),
                    c.gating.to_string(),
                    c.passed.to_string(),
                    k.name.clone(),
                    k.value.to_string(),
                    k.comparison.symbol().to_string(),
                    k.threshold.to_string(),
                    k.passed.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_bracket_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in self.bracket_table.iter().flatten() {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}
