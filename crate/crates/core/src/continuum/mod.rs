//! Reference solver for the reflected stochastic heat equation and exact
//! Bessel(3) sampling.

mod bessel;
mod she;

pub use bessel::{bessel3_marginal_cdf, sample_bessel3, Bessel3Path};
pub use she::{
    she_run, she_step, she_step_with, write_field_csv, write_samples_csv, EtaRecord, SheError, SheGrid, SheObserver,
    SheRun, SheState, SheWorkspace, StepRecord, WeakForm, BLOWUP_LIMIT,
};
