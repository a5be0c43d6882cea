//! Observables of the rescaled interface: the semi-discrete equation terms,
//! the reflection measure, Fourier transforms, norms, and interpolation
//! diagnostics.

use thiserror::Error;

mod fourier;
mod gap;
mod norms;
mod reflection;
mod rescale;
mod semidiscrete;

pub use fourier::{c_coef, fourier_hat, fourier_hat_interface, fourier_quadrature, FourierGrid};
pub use gap::{
    brownian_control, check_lags, increment_norms, increment_scaling, interpolated_profile, interpolation_gap,
    IncrementScaling, InterpolationGap,
};
pub use norms::{
    c_rho_norm, holder_cb, norm_h_neg_s0, norm_w_s1_r, NegativeSobolevNorm, SobolevNorm, DEFAULT_CUTOFF_PERIODS,
};
pub use reflection::{reflection_measure, ReflectionCell, ReflectionMeasure, ReflectionRecorder, SupportIdentity};
pub use rescale::{check_window, interpolate, RescaledInterface, WindowViolation};
pub use semidiscrete::{
    accumulate_history, write_observable_table, ObservableRow, ObservableSnapshot, SemiDiscreteAccumulator, SiteWeights,
};

use crate::stats::StatsError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObservableError {
    #[error("quadrature did not settle: last refinement changed the result by {change:e} (tolerance {tolerance:e})")]
    QuadratureRefinement { change: f64, tolerance: f64 },
    #[error(transparent)]
    Window(#[from] WindowViolation),
    #[error("frequency cutoff too small: tail bound {tail:e} exceeds 10% of the computed part {head:e}")]
    CutoffTooSmall { tail: f64, head: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("unweighted profile has no decaying tail; apply an exponential weight ρ > 0")]
    MissingWeight,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("lag {lag} is below the microscopic time scale ε² = {floor}")]
    LagTooShort { lag: f64, floor: f64 },
    #[error("need at least {need} replicas, got {got}")]
    InsufficientReplicas { need: usize, got: usize },
    #[error(transparent)]
    Stats(#[from] StatsError),
}
