pub mod continuum;
pub mod dynamics;
pub mod harness;
pub mod observables;
pub mod quad;
pub mod replica;
pub mod rng;
pub mod stats;
pub mod testfn;
pub mod walk;
