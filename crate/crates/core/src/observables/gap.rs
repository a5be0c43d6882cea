//! Time interpolation: the gap between the piecewise-constant path and its
//! linear interpolation between integer unscaled times, and the increment
//! scaling of the interpolated path in `H^{−s0}`.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{norm_h_neg_s0, ObservableError};
use crate::dynamics::{EventHistory, FlipEvent, FlipOutcome, InterfaceState, Observer};
use crate::rng::RngStream;
use crate::stats::{loglog_slope, RunningStats, Slope};

/// Observer for `sup_t sup_x e^{−ρx} |ḡ^ε_t(x) − g^ε_t(x)|` over full unit
/// intervals `[k, k+1]` of unscaled time.
///
/// Both paths are piecewise linear in `x` on the same grid, so the sup over
/// `x` is attained at sites; in time, the gap at a site is linear between its
/// flips and is read at the endpoints of each constant stretch.
pub struct InterpolationGap {
    epsilon: f64,
    weights: Vec<f64>,
    t0: f64,
    unit: u64,
    /// Touched sites of the current unit: height at its start and the
    /// `(θ, new height)` flips seen so far.
    touched: BTreeMap<usize, (u32, Vec<(f64, u32)>)>,
    sup: f64,
    units: u64,
}

impl InterpolationGap {
    pub fn new(initial: &InterfaceState, epsilon: f64, rho: f64) -> Self {
        let s = epsilon.sqrt();
        Self {
            epsilon,
            weights: (0..initial.heights().len())
                .map(|n| s * (-rho * epsilon * n as f64).exp())
                .collect(),
            t0: initial.time(),
            unit: 0,
            touched: BTreeMap::new(),
            sup: 0.0,
            units: 0,
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn close_unit(&mut self, state: &InterfaceState) {
        for (&n, (start, flips)) in std::mem::take(&mut self.touched).iter() {
            let (v0, v1) = (*start as f64, state.height(n) as f64);
            let bar = |theta: f64| v0 + theta * (v1 - v0);
            let mut worst = 0.0f64;
            let mut prev = (0.0, v0);
            for &(theta, h) in flips.iter().chain(std::iter::once(&(1.0, state.height(n)))) {
                let (t_a, v) = prev;
                worst = worst.max((v - bar(t_a)).abs()).max((v - bar(theta)).abs());
                prev = (theta, h as f64);
            }
            self.sup = self.sup.max(self.weights[n] * worst);
        }
        self.units += 1;
    }

    /// Gap over the full units seen so far and their number.
    pub fn finish(self) -> (f64, u64) {
        (self.sup, self.units)
    }
}

impl Observer for InterpolationGap {
    fn on_interval(&mut self, _start: f64, end: f64, state: &InterfaceState) {
        let end_unit = ((end - self.t0).floor().max(0.0)) as u64;
        if end_unit > self.unit {
            // the configuration is constant up to `end`, so it is the one at the unit edge
            self.close_unit(state);
            self.units += end_unit - self.unit - 1;
            self.unit = end_unit;
        }
    }

    fn before_event(&mut self, event: &FlipEvent, state: &InterfaceState) {
        if event.outcome == FlipOutcome::Flipped {
            let start = state.height(event.site);
            self.touched.entry(event.site).or_insert((start, Vec::new()));
        }
    }

    fn after_event(&mut self, event: &FlipEvent, state: &InterfaceState) {
        if event.outcome == FlipOutcome::Flipped {
            let theta = event.time - self.t0 - self.unit as f64;
            let h = state.height(event.site);
            self.touched
                .get_mut(&event.site)
                .expect("touched in before_event")
                .1
                .push((theta, h));
        }
    }
}

/// Replay `history` and return the interpolation gap over its full units.
pub fn interpolation_gap(history: &EventHistory, epsilon: f64, rho: f64) -> f64 {
    let mut gap = InterpolationGap::new(&history.initial, epsilon, rho);
    history.replay(history.horizon, &mut gap);
    gap.finish().0
}

/// `ḡ^ε` at scaled time `t`: the weighted profile interpolated linearly
/// between the configurations at the neighbouring integer unscaled times.
pub fn interpolated_profile(history: &EventHistory, epsilon: f64, rho: f64, t: f64) -> Vec<f64> {
    let tau = t / (epsilon * epsilon);
    let (k, theta) = (tau.floor(), tau - tau.floor());
    let t0 = history.initial.time();
    let snaps = history.snapshots(&[t0 + k, t0 + k + 1.0]);
    let s = epsilon.sqrt();
    snaps[0]
        .heights()
        .iter()
        .zip(snaps[1].heights())
        .enumerate()
        .map(|(n, (&a, &b))| {
            let w = s * (-rho * epsilon * n as f64).exp();
            w * ((1.0 - theta) * a as f64 + theta * b as f64)
        })
        .collect()
}

/// `‖ḡ^ε_t − ḡ^ε_0‖_{H^{−s0}}` for each scaled lag `t`.
pub fn increment_norms(
    history: &EventHistory,
    epsilon: f64,
    rho: f64,
    s0: f64,
    lags: &[f64],
) -> Result<Vec<f64>, ObservableError> {
    let base = interpolated_profile(history, epsilon, rho, 0.0);
    lags.iter()
        .map(|&t| {
            let now = interpolated_profile(history, epsilon, rho, t);
            let diff: Vec<f64> = now.iter().zip(&base).map(|(a, b)| a - b).collect();
            Ok(norm_h_neg_s0(&diff, epsilon, s0, None)?.norm)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementScaling {
    pub lags: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub slope: Slope,
    pub replicas: usize,
}

/// Lags accepted by [`increment_scaling`]: at least four, spanning a decade,
/// none below the microscopic time `ε²` (`floor`).
pub fn check_lags(lags: &[f64], floor: f64) -> Result<(), ObservableError> {
    if let Some(&lag) = lags.iter().find(|&&l| l < floor) {
        return Err(ObservableError::LagTooShort { lag, floor });
    }
    let lo = lags.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = lags.iter().copied().fold(0.0, f64::max);
    if lags.len() < 4 || hi < 10.0 * lo * (1.0 - 1e-12) {
        return Err(ObservableError::InvalidParameter(format!(
            "need at least 4 lags spanning a decade, got {lags:?}"
        )));
    }
    Ok(())
}

/// Log-log regression of the replica mean of `norms[r][j]` against `lags[j]`.
pub fn increment_scaling(norms: &[Vec<f64>], lags: &[f64], floor: f64) -> Result<IncrementScaling, ObservableError> {
    check_lags(lags, floor)?;
    if norms.len() < 2 {
        return Err(ObservableError::InsufficientReplicas { need: 2, got: norms.len() });
    }
    let stats: Vec<RunningStats> = (0..lags.len())
        .map(|j| RunningStats::from_slice(&norms.iter().map(|r| r[j]).collect::<Vec<_>>()))
        .collect();
    let pairs: Vec<(f64, f64)> = lags.iter().zip(&stats).map(|(&l, s)| (l, s.mean)).collect();
    Ok(IncrementScaling {
        lags: lags.to_vec(),
        mean: stats.iter().map(|s| s.mean).collect(),
        stderr: stats.iter().map(|s| s.stderr()).collect(),
        slope: loglog_slope(&pairs)?,
        replicas: norms.len(),
    })
}

/// Same regression for `|B_t − B_0|` of a standard Brownian motion.
pub fn brownian_control(lags: &[f64], replicas: usize, stream: RngStream) -> Result<IncrementScaling, ObservableError> {
    let mut rng = stream.rng();
    let mut order: Vec<usize> = (0..lags.len()).collect();
    order.sort_by(|&a, &b| lags[a].total_cmp(&lags[b]));
    let norms: Vec<Vec<f64>> = (0..replicas)
        .map(|_| {
            let (mut b, mut t) = (0.0f64, 0.0);
            let mut out = vec![0.0; lags.len()];
            for &j in &order {
                let z: f64 = rng.sample(StandardNormal);
                b += z * (lags[j] - t).sqrt();
                t = lags[j];
                out[j] = b.abs();
            }
            out
        })
        .collect();
    increment_scaling(&norms, lags, 0.0)
}
