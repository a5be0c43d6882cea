//! Experiment plans: every size, horizon and pass threshold of the
//! acceptance suites, with defaults at the calibrated desk-scale values.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{HarnessError, Suite};
use crate::dynamics::EventLogging;
use crate::observables::check_window;
use crate::stats::KS_MIN_SAMPLES;
use crate::testfn::{TestFunction, TestFunctionSpec};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormParams {
    pub rho: f64,
    pub s0: f64,
    pub s1: f64,
    pub r: f64,
    pub b: f64,
}

impl Default for NormParams {
    fn default() -> Self {
        Self {
            rho: 1.0,
            s0: 1.0,
            s1: 0.25,
            r: 4.0,
            b: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialCondition {
    /// A sample of the invariant measure.
    #[default]
    Pi,
    Staircase,
    Zigzag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub epsilon: f64,
    pub lattice_size: usize,
    /// Scaled horizon.
    pub horizon: f64,
    pub replicas: u64,
    pub initial: InitialCondition,
    pub logging: EventLogging,
    /// Scaled times at which observables are tabulated (the horizon is always added).
    pub checkpoints: Vec<f64>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.2,
            lattice_size: 50,
            horizon: 1.0,
            replicas: 1,
            initial: InitialCondition::Pi,
            logging: EventLogging::Transitions,
            checkpoints: vec![0.25, 0.5, 0.75],
        }
    }
}

/// Criterion 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentityConfig {
    pub epsilons: Vec<f64>,
    pub lattice_size: usize,
    pub horizon: f64,
    /// Runs in total, split evenly over `epsilons`.
    pub runs: u64,
    pub checkpoints: usize,
    pub max_relative_residual: f64,
}

impl Default for IdentityConfig {
    fn default() -> Self {
        Self {
            epsilons: vec![0.2, 0.1],
            lattice_size: 200,
            horizon: 1.0,
            runs: 1000,
            checkpoints: 8,
            max_relative_residual: 1e-8,
        }
    }
}

/// Criterion 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StationarityConfig {
    pub lattice_size: usize,
    /// Unscaled horizon.
    pub horizon: f64,
    pub replicas: u64,
    pub sites: Vec<usize>,
    pub max_ks: f64,
}

impl Default for StationarityConfig {
    fn default() -> Self {
        Self {
            lattice_size: 200,
            horizon: 1e4,
            replicas: 2000,
            sites: vec![10, 50, 100],
            max_ks: 0.04,
        }
    }
}

/// Criteria 3 and 4.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CornerConfig {
    pub scale: usize,
    pub paths: u64,
    pub density_rel_tol: f64,
    pub level: u32,
    pub small_scale: usize,
    pub transience_rel_tol: f64,
}

impl Default for CornerConfig {
    fn default() -> Self {
        Self {
            scale: 10_000,
            paths: 100,
            density_rel_tol: 0.02,
            level: 1,
            small_scale: 100,
            transience_rel_tol: 0.01,
        }
    }
}

/// Criterion 9.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingConfig {
    pub pairs: u64,
    pub length: usize,
    /// Short pairs for the two-step marginal checks.
    pub marginal_pairs: u64,
    pub marginal_rel_tol: f64,
    /// p-value floor of the length-`length` marginal KS checks.
    pub marginal_min_p: f64,
}

impl Default for CouplingConfig {
    fn default() -> Self {
        Self {
            pairs: 1000,
            length: 10_000,
            marginal_pairs: 100_000,
            marginal_rel_tol: 0.01,
            marginal_min_p: 0.001,
        }
    }
}

/// Criterion 11.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StaticInvarianceConfig {
    pub epsilon: f64,
    pub x: f64,
    pub samples: u64,
    pub max_ks: f64,
}

impl Default for StaticInvarianceConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            x: 1.0,
            samples: 5000,
            max_ks: 0.03,
        }
    }
}

/// Criterion 13.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MomentConfig {
    pub orders: Vec<u32>,
    pub lengths: Vec<usize>,
    pub replicas: u64,
    pub slope_margin: f64,
}

impl Default for MomentConfig {
    fn default() -> Self {
        Self {
            orders: vec![1, 2],
            lengths: vec![100, 1000, 10_000],
            replicas: 10_000,
            slope_margin: 0.05,
        }
    }
}

/// Criteria 5–8 (and the runs criterion 7 inspects).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BracketConfig {
    pub epsilons: Vec<f64>,
    pub lattice_size: usize,
    pub horizon: f64,
    pub replicas: u64,
    pub bracket_rel_tol: f64,
    pub returns_rel_tol: f64,
    pub support_rel_tol: f64,
    pub error_min_slope: f64,
    /// η time bins in scaled units; `None` is `ε²`.
    pub bin_width: Option<f64>,
}

impl Default for BracketConfig {
    fn default() -> Self {
        Self {
            epsilons: vec![0.2, 0.1, 0.05],
            lattice_size: 200,
            horizon: 1.0,
            replicas: 500,
            bracket_rel_tol: 0.05,
            returns_rel_tol: 0.05,
            support_rel_tol: 1e-10,
            error_min_slope: 0.8,
            bin_width: None,
        }
    }
}

/// Criterion 10.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FourierConfig {
    pub epsilon: f64,
    pub functions: u64,
    pub points: usize,
    pub frequencies: usize,
    pub tolerance: f64,
    pub c_grid_points: usize,
}

impl Default for FourierConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            functions: 100,
            points: 50,
            frequencies: 64,
            tolerance: 1e-6,
            c_grid_points: 100_001,
        }
    }
}

/// Criterion 14 (diagnostic).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IncrementConfig {
    pub epsilon: f64,
    pub lattice_size: usize,
    pub replicas: u64,
    /// Scaled lags `t − s` with `s = 0`.
    pub lags: Vec<f64>,
    pub warn_below_slope: f64,
    pub control_replicas: u64,
    /// Time interpolation gap over `[0, horizon]` (scaled) at these ε.
    pub gap_epsilons: Vec<f64>,
    pub gap_horizon: f64,
    pub gap_replicas: u64,
}

impl Default for IncrementConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            lattice_size: 200,
            replicas: 200,
            lags: vec![0.005, 0.01, 0.02, 0.05],
            warn_below_slope: 0.30,
            control_replicas: 10_000,
            gap_epsilons: vec![0.2, 0.1, 0.05],
            gap_horizon: 1.0,
            gap_replicas: 100,
        }
    }
}

/// Criterion 12.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SheConfig {
    pub dx: f64,
    /// `None` is `dx²/4`.
    pub dt: Option<f64>,
    pub x_max: f64,
    pub horizon: f64,
    pub replicas: u64,
    pub x_obs: f64,
    pub max_ks: f64,
    /// η bins in steps.
    pub bin_steps: u64,
}

impl Default for SheConfig {
    fn default() -> Self {
        Self {
            dx: 0.01,
            dt: None,
            x_max: 4.0,
            horizon: 0.5,
            replicas: 1000,
            x_obs: 1.0,
            max_ks: 0.05,
            bin_steps: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExportConfig {
    pub pmf_n: usize,
    pub fourier_epsilon: f64,
    pub fourier_lattice_size: usize,
    pub fourier_points: usize,
    /// Field snapshot times of the `fields` export (scaled SHE time).
    pub field_times: Vec<f64>,
}

impl Default for ExportConfig {
    fn default() -> Self {
        Self {
            pmf_n: 10,
            fourier_epsilon: 0.1,
            fourier_lattice_size: 100,
            fourier_points: 201,
            field_times: vec![0.0, 0.1, 0.25, 0.5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentPlan {
    pub schema_version: u32,
    pub experiment_id: String,
    pub seed: u64,
    /// Worker threads; `None` uses every core. Results do not depend on it.
    pub parallelism: Option<usize>,
    /// Overrides every replica count when set.
    pub replicas: Option<u64>,
    /// Restrict to these criterion ids (within the chosen suite).
    pub criteria: Option<Vec<u32>>,
    pub test_function: TestFunctionSpec,
    pub norms: NormParams,
    pub output: Option<PathBuf>,
    pub simulate: SimulateConfig,
    pub identity: IdentityConfig,
    pub stationarity: StationarityConfig,
    pub corners: CornerConfig,
    pub coupling: CouplingConfig,
    pub static_invariance: StaticInvarianceConfig,
    pub moments: MomentConfig,
    pub bracket: BracketConfig,
    pub fourier: FourierConfig,
    pub increments: IncrementConfig,
    pub she: SheConfig,
    pub export: ExportConfig,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment_id: "wallflip".into(),
            seed: 1,
            parallelism: None,
            replicas: None,
            criteria: None,
            test_function: TestFunctionSpec::default(),
            norms: NormParams::default(),
            output: None,
            simulate: SimulateConfig::default(),
            identity: IdentityConfig::default(),
            stationarity: StationarityConfig::default(),
            corners: CornerConfig::default(),
            coupling: CouplingConfig::default(),
            static_invariance: StaticInvarianceConfig::default(),
            moments: MomentConfig::default(),
            bracket: BracketConfig::default(),
            fourier: FourierConfig::default(),
            increments: IncrementConfig::default(),
            she: SheConfig::default(),
            export: ExportConfig::default(),
        }
    }
}

fn plan_error(msg: impl Into<String>) -> HarnessError {
    HarnessError::Plan(msg.into())
}

impl ExperimentPlan {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let plan: Self = serde_json::from_str(text).map_err(|e| plan_error(format!("config: {e}")))?;
        if plan.schema_version != SCHEMA_VERSION {
            return Err(plan_error(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                plan.schema_version
            )));
        }
        Ok(plan)
    }

    /// Hex SHA-256 of the canonical JSON form, ignoring `parallelism` and `output`.
    pub fn hash(&self) -> String {
        // thread count and output location never change results
        let canonical = Self {
            parallelism: None,
            output: None,
            ..self.clone()
        };
        let bytes = serde_json::to_vec(&canonical).expect("plan serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Replica count after the global override.
    pub fn replicas_or(&self, configured: u64) -> u64 {
        self.replicas.unwrap_or(configured)
    }

    pub fn enabled(&self, criterion: u32) -> bool {
        self.criteria.as_ref().is_none_or(|c| c.contains(&criterion))
    }

    /// Criteria of `suite` enabled by the plan.
    pub fn enabled_criteria(&self, suite: Suite) -> Vec<u32> {
        suite.criteria().iter().copied().filter(|&c| self.enabled(c)).collect()
    }

    fn check_phi(&self) -> Result<(), HarnessError> {
        let (lo, hi) = self.test_function.support();
        if !(lo >= 0.0 && hi > lo) {
            return Err(plan_error(format!("test-function support [{lo}, {hi}] must lie in [0, ∞)")));
        }
        Ok(())
    }

    fn check_epsilon(eps: f64) -> Result<(), HarnessError> {
        if eps > 0.0 && eps <= 1.0 {
            Ok(())
        } else {
            Err(plan_error(format!("ε = {eps} must lie in (0, 1]")))
        }
    }

    fn window(&self, eps: f64, lattice_size: usize, horizon: f64) -> Result<(), HarnessError> {
        Self::check_epsilon(eps)?;
        check_window(eps, lattice_size, self.test_function.support_bound(), horizon)?;
        Ok(())
    }

    fn need_replicas(&self, what: &str, configured: u64) -> Result<(), HarnessError> {
        self.need_at_least(what, configured, 2)
    }

    /// Replica floor for criteria decided by a KS test.
    fn need_ks_samples(&self, what: &str, configured: u64) -> Result<(), HarnessError> {
        self.need_at_least(what, configured, KS_MIN_SAMPLES as u64)
    }

    fn need_at_least(&self, what: &str, configured: u64, min: u64) -> Result<(), HarnessError> {
        let n = self.replicas_or(configured);
        if n < min {
            Err(plan_error(format!("{what}: replica count {n} must be at least {min}")))
        } else {
            Ok(())
        }
    }

    /// Validate everything the enabled criteria of `suite` will use.
    pub fn validate(&self, suite: Suite) -> Result<(), HarnessError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(plan_error(format!("unsupported schema_version {}", self.schema_version)));
        }
        if self.parallelism == Some(0) {
            return Err(plan_error("parallelism must be positive"));
        }
        self.check_phi()?;
        let enabled = self.enabled_criteria(suite);
        let any = |ids: &[u32]| ids.iter().any(|c| enabled.contains(c));
        if any(&[1]) {
            let c = &self.identity;
            self.need_replicas("identity", c.runs / c.epsilons.len().max(1) as u64)?;
            for &e in &c.epsilons {
                self.window(e, c.lattice_size, c.horizon)?;
            }
        }
        if any(&[2]) {
            let c = &self.stationarity;
            self.need_ks_samples("stationarity", c.replicas)?;
            if let Some(&n) = c.sites.iter().find(|&&n| n == 0 || n > c.lattice_size) {
                return Err(plan_error(format!("stationarity site {n} outside 1..={}", c.lattice_size)));
            }
        }
        if any(&[3, 4]) {
            self.need_replicas("corners", self.corners.paths)?;
        }
        if any(&[9]) {
            self.need_ks_samples("coupling", self.coupling.pairs)?;
        }
        if any(&[11]) {
            Self::check_epsilon(self.static_invariance.epsilon)?;
            self.need_ks_samples("static invariance", self.static_invariance.samples)?;
        }
        if any(&[13]) {
            self.need_replicas("moments", self.moments.replicas)?;
        }
        if any(&[5, 6, 7, 8]) {
            let c = &self.bracket;
            self.need_replicas("bracket", c.replicas)?;
            if c.epsilons.len() < 3 {
                return Err(plan_error("bracket needs at least three ε values"));
            }
            for &e in &c.epsilons {
                self.window(e, c.lattice_size, c.horizon)?;
            }
        }
        if any(&[10]) {
            Self::check_epsilon(self.fourier.epsilon)?;
            self.need_replicas("fourier", self.fourier.functions)?;
        }
        if any(&[14]) {
            let c = &self.increments;
            self.need_replicas("increments", c.replicas)?;
            let horizon = c.lags.iter().copied().fold(0.0, f64::max) + c.epsilon * c.epsilon;
            self.window(c.epsilon, c.lattice_size, horizon)?;
        }
        if any(&[12]) {
            self.need_ks_samples("she", self.she.replicas)?;
        }
        Ok(())
    }

    pub fn validate_simulate(&self) -> Result<(), HarnessError> {
        self.check_phi()?;
        let c = &self.simulate;
        if self.replicas_or(c.replicas) == 0 {
            return Err(plan_error("simulate needs at least one replica"));
        }
        if c.horizon.is_nan() || c.horizon < 0.0 {
            return Err(plan_error("horizon must be nonnegative"));
        }
        self.window(c.epsilon, c.lattice_size, c.horizon)
    }
}
