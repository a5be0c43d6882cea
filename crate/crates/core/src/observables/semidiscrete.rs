//! Event-exact accumulation of every term of the semi-discrete equation for a
//! fixed test function: discrete noise (jumps and compensator), drift,
//! reflection, brackets, and the continuum-versus-lattice error term.
//!
//! All integrals are accumulated in unscaled time from running sums that are
//! updated at the three sites touched by each flip, so a run costs O(1) per
//! event. Conversions to scaled quantities happen only in [`ObservableSnapshot`].

use std::io::Write;

use serde::{Deserialize, Serialize};
use std::f64::consts::SQRT_2;

use super::ObservableError;
use crate::dynamics::{EventHistory, FlipEvent, FlipOutcome, InterfaceState, Observer};
use crate::testfn::TestFunction;

const QUAD_TARGET: f64 = 1e-12;
const QUAD_ACCEPT: f64 = 1e-8;
const QUAD_MAX_PANELS: usize = 4096;

/// Per-site quantities for one `(φ, ε, L)`: point values, and integrals of φ
/// and φ'' against the interpolation hats.
#[derive(Debug, Clone)]
pub struct SiteWeights {
    epsilon: f64,
    lattice_size: usize,
    phi: Vec<f64>,
    phi_sq: Vec<f64>,
    hat: Vec<f64>,
    hat_dd: Vec<f64>,
    sup_phi: f64,
    /// Largest relative change between the last two quadrature refinements.
    pub quadrature_change: f64,
}

fn simpson_panels(f: &impl Fn(f64) -> [f64; 2], a: f64, b: f64, panels: usize) -> [f64; 2] {
    let h = (b - a) / panels as f64;
    let mut acc = [0.0; 2];
    for i in 0..=panels {
        let c = if i == 0 || i == panels {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let v = f(a + h * i as f64);
        acc[0] += c * v[0];
        acc[1] += c * v[1];
    }
    [acc[0] * h / 3.0, acc[1] * h / 3.0]
}

impl SiteWeights {
    pub fn new(phi: &dyn TestFunction, epsilon: f64, lattice_size: usize) -> Result<Self, ObservableError> {
        let sites = lattice_size + 2;
        let (lo, hi) = phi.support();
        let grid = |n: usize| epsilon * n as f64;
        let pv: Vec<f64> = (0..sites).map(|n| phi.value(grid(n))).collect();

        // ∫ hat_n · (φ, φ'') over each half-cell, Simpson with panel doubling
        let halves = |panels: usize| -> Vec<[f64; 2]> {
            (0..sites)
                .map(|n| {
                    let x = grid(n);
                    let mut acc = [0.0; 2];
                    let left = n > 0;
                    let right = n + 1 < sites;
                    for (a, b, rising) in [(x - epsilon, x, true), (x, x + epsilon, false)] {
                        if (rising && !left) || (!rising && !right) || b <= lo || a >= hi {
                            continue;
                        }
                        let f = |y: f64| {
                            let hat = if rising { (y - a) / epsilon } else { (b - y) / epsilon };
                            let j = phi.jet(y);
                            [hat * j.0[0], hat * j.0[2]]
                        };
                        let v = simpson_panels(&f, a, b, panels);
                        acc[0] += v[0];
                        acc[1] += v[1];
                    }
                    acc
                })
                .collect()
        };
        let scale = |w: &[[f64; 2]], k: usize| w.iter().map(|v| v[k].abs()).fold(1e-300, f64::max);
        let mut panels = 2;
        let mut coarse = halves(panels);
        let mut change;
        loop {
            let fine = halves(2 * panels);
            change = (0..2)
                .map(|k| {
                    let s = scale(&fine, k);
                    fine.iter()
                        .zip(&coarse)
                        .map(|(f, c)| (f[k] - c[k]).abs() / s)
                        .fold(0.0, f64::max)
                })
                .fold(0.0, f64::max);
            coarse = fine;
            panels *= 2;
            if change <= QUAD_TARGET || panels >= QUAD_MAX_PANELS {
                break;
            }
        }
        if change > QUAD_ACCEPT {
            return Err(ObservableError::QuadratureRefinement {
                change,
                tolerance: QUAD_ACCEPT,
            });
        }
        Ok(Self {
            epsilon,
            lattice_size,
            phi_sq: pv.iter().map(|v| v * v).collect(),
            sup_phi: phi.sup_norm(),
            phi: pv,
            hat: coarse.iter().map(|v| v[0]).collect(),
            hat_dd: coarse.iter().map(|v| v[1]).collect(),
            quadrature_change: change,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn lattice_size(&self) -> usize {
        self.lattice_size
    }

    /// `⟨h^ε, φ⟩_ε = ε^{3/2} Σ h(n) φ(εn)`.
    pub fn discrete_pairing(&self, heights: &[u32]) -> f64 {
        self.epsilon.powf(1.5) * dot(heights, &self.phi)
    }

    /// `∫ h^ε φ` for the piecewise-linear `h^ε`.
    pub fn continuum_pairing(&self, heights: &[u32]) -> f64 {
        self.epsilon.sqrt() * dot(heights, &self.hat)
    }

    /// `∫ h^ε φ''`.
    pub fn continuum_pairing_dd(&self, heights: &[u32]) -> f64 {
        self.epsilon.sqrt() * dot(heights, &self.hat_dd)
    }

    pub fn phi_at_site(&self, n: usize) -> f64 {
        self.phi[n]
    }

    /// `ε Σ φ(εn)²`, the lattice version of `‖φ‖²`.
    pub fn lattice_l2_sq(&self) -> f64 {
        self.epsilon * self.phi_sq.iter().sum::<f64>()
    }
}

fn dot(h: &[u32], w: &[f64]) -> f64 {
    h.iter().zip(w).map(|(&h, w)| h as f64 * w).sum()
}

#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    drift: f64,
    allowed: f64,
    blocked: f64,
    corner_sq: f64,
    blocked_sq: f64,
}

impl Sums {
    #[inline]
    fn add(&mut self, o: &Sums, sign: f64) {
        self.drift += sign * o.drift;
        self.allowed += sign * o.allowed;
        self.blocked += sign * o.blocked;
        self.corner_sq += sign * o.corner_sq;
        self.blocked_sq += sign * o.blocked_sq;
    }

    #[inline]
    fn integrate(&mut self, rate: &Sums, dt: f64) {
        self.add(rate, dt);
    }
}

/// Every term at one (scaled) time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservableSnapshot {
    pub t: f64,
    pub discrete_t: f64,
    pub discrete_0: f64,
    pub continuum_t: f64,
    pub continuum_0: f64,
    /// `∫ ε^{-2} ⟨Δ^ε h^ε, φ⟩_ε ds`.
    pub drift: f64,
    pub w_jump: f64,
    pub w_compensator: f64,
    pub w: f64,
    pub a1: f64,
    pub a2: f64,
    /// `∫∫ φ dη^ε`.
    pub eta_phi: f64,
    /// Total η^ε mass over `[0, t] × (0, ε(L+1))`.
    pub eta_mass: f64,
    /// `∫ ⟨h^ε_s, φ''⟩ ds`.
    pub continuum_laplacian: f64,
    /// LHS − RHS of the semi-discrete equation.
    pub residual: f64,
    /// `residual` relative to the largest term.
    pub residual_rel: f64,
    /// The error term `R^ε_t(φ)`.
    pub r_eps: f64,
    /// Largest noise jump over `√2 ε^{3/2} ‖φ‖∞` (must be ≤ 1).
    pub max_jump_ratio: f64,
}

impl ObservableSnapshot {
    pub fn bracket(&self) -> f64 {
        self.a1 - self.a2
    }
}

/// Observer accumulating [`ObservableSnapshot`]s at requested unscaled times;
/// drive it by `&mut` and call [`SemiDiscreteAccumulator::finish`] after the run.
pub struct SemiDiscreteAccumulator<'w> {
    w: &'w SiteWeights,
    checkpoints: Vec<f64>,
    next_checkpoint: usize,
    rate: Sums,
    integral: Sums,
    dd_rate: f64,
    dd_integral: f64,
    blocked_integral: f64,
    jump_sum: f64,
    max_jump: f64,
    discrete_0: f64,
    continuum_0: f64,
    cursor: f64,
    snapshots: Vec<ObservableSnapshot>,
}

impl<'w> SemiDiscreteAccumulator<'w> {
    /// `checkpoints` are unscaled times, sorted, beyond the initial time.
    pub fn new(w: &'w SiteWeights, initial: &InterfaceState, checkpoints: &[f64]) -> Self {
        assert_eq!(initial.lattice_size(), w.lattice_size, "weights built for another lattice size");
        debug_assert!(checkpoints.windows(2).all(|p| p[0] <= p[1]));
        let mut rate = Sums::default();
        for n in 1..=w.lattice_size {
            rate.add(&site_terms(w, initial, n), 1.0);
        }
        Self {
            w,
            checkpoints: checkpoints.to_vec(),
            next_checkpoint: 0,
            rate,
            integral: Sums::default(),
            dd_rate: dot(initial.heights(), &w.hat_dd),
            dd_integral: 0.0,
            blocked_integral: 0.0,
            jump_sum: 0.0,
            max_jump: 0.0,
            discrete_0: w.discrete_pairing(initial.heights()),
            continuum_0: w.continuum_pairing(initial.heights()),
            cursor: initial.time(),
            snapshots: Vec::new(),
        }
    }

    fn advance(&mut self, to: f64, state: &InterfaceState) {
        let dt = to - self.cursor;
        if dt > 0.0 {
            self.integral.integrate(&self.rate, dt);
            self.dd_integral += self.dd_rate * dt;
            self.blocked_integral += state.n_blocked() as f64 * dt;
            self.cursor = to;
        }
    }

    fn snapshot(&self, tau: f64, state: &InterfaceState) -> ObservableSnapshot {
        let e = self.w.epsilon;
        let e32 = e.powf(1.5);
        let discrete_t = self.w.discrete_pairing(state.heights());
        let continuum_t = self.w.continuum_pairing(state.heights());
        let drift = e32 * self.integral.drift;
        let w_jump = e32 / SQRT_2 * self.jump_sum;
        let w_compensator = -e32 / SQRT_2 * self.integral.allowed;
        let w = w_jump + w_compensator;
        let eta_phi = 2.0 * e32 * self.integral.blocked;
        let continuum_laplacian = e * e * e.sqrt() * self.dd_integral;
        let residual = discrete_t - self.discrete_0 - drift - SQRT_2 * w - eta_phi;
        let scale = [discrete_t, self.discrete_0, drift, SQRT_2 * w, eta_phi]
            .iter()
            .map(|v| v.abs())
            .fold(0.0, f64::max);
        let jump_bound = SQRT_2 * e32 * self.w.sup_phi;
        ObservableSnapshot {
            t: e * e * tau,
            discrete_t,
            discrete_0: self.discrete_0,
            continuum_t,
            continuum_0: self.continuum_0,
            drift,
            w_jump,
            w_compensator,
            w,
            a1: 2.0 * e * e * e * self.integral.corner_sq,
            a2: 2.0 * e * e * e * self.integral.blocked_sq,
            eta_phi,
            eta_mass: 2.0 * e32 * self.blocked_integral,
            continuum_laplacian,
            residual,
            residual_rel: if scale > 0.0 { residual.abs() / scale } else { 0.0 },
            r_eps: discrete_t - continuum_t - self.discrete_0 + self.continuum_0 - drift + continuum_laplacian,
            max_jump_ratio: if jump_bound > 0.0 { self.max_jump / jump_bound } else { 0.0 },
        }
    }

    /// Close the run: record the snapshot at the state's current time.
    pub fn finish(&mut self, state: &InterfaceState) -> ObservableSnapshot {
        self.advance(state.time(), state);
        let snap = self.snapshot(state.time(), state);
        self.snapshots.push(snap);
        snap
    }

    /// Snapshots at each checkpoint reached, then any taken by [`Self::finish`].
    pub fn snapshots(&self) -> &[ObservableSnapshot] {
        &self.snapshots
    }

    /// Snapshot at the end of the run.
    pub fn last(&self) -> Option<&ObservableSnapshot> {
        self.snapshots.last()
    }

    pub fn into_snapshots(self) -> Vec<ObservableSnapshot> {
        self.snapshots
    }

    fn touched(&self, n: usize) -> std::ops::RangeInclusive<usize> {
        n.saturating_sub(1).max(1)..=(n + 1).min(self.w.lattice_size)
    }
}

#[inline]
fn site_terms(w: &SiteWeights, state: &InterfaceState, n: usize) -> Sums {
    let phi = w.phi[n];
    if phi == 0.0 {
        return Sums::default();
    }
    let lap = state.laplacian(n) as f64;
    let corner = lap != 0.0;
    let blocked = state.is_blocked(n);
    Sums {
        drift: lap * phi,
        allowed: if corner && !blocked { lap * phi } else { 0.0 },
        blocked: if blocked { phi } else { 0.0 },
        corner_sq: if corner { w.phi_sq[n] } else { 0.0 },
        blocked_sq: if blocked { w.phi_sq[n] } else { 0.0 },
    }
}

impl Observer for SemiDiscreteAccumulator<'_> {
    fn on_interval(&mut self, _start: f64, end: f64, state: &InterfaceState) {
        while let Some(&cp) = self.checkpoints.get(self.next_checkpoint) {
            if cp > end {
                break;
            }
            self.advance(cp, state);
            self.snapshots.push(self.snapshot(cp, state));
            self.next_checkpoint += 1;
        }
        self.advance(end, state);
    }

    fn before_event(&mut self, event: &FlipEvent, state: &InterfaceState) {
        if event.outcome == FlipOutcome::Flipped {
            for m in self.touched(event.site) {
                let t = site_terms(self.w, state, m);
                self.rate.add(&t, -1.0);
            }
        }
    }

    fn after_event(&mut self, event: &FlipEvent, state: &InterfaceState) {
        if event.outcome != FlipOutcome::Flipped {
            return;
        }
        for m in self.touched(event.site) {
            let t = site_terms(self.w, state, m);
            self.rate.add(&t, 1.0);
        }
        let n = event.site;
        let d = event.delta as f64;
        self.jump_sum += d * self.w.phi[n];
        self.dd_rate += d * self.w.hat_dd[n];
        let jump = self.w.epsilon.powf(1.5) / SQRT_2 * (d * self.w.phi[n]).abs();
        debug_assert!(jump <= SQRT_2 * self.w.epsilon.powf(1.5) * self.w.sup_phi * (1.0 + 1e-12) + 1e-300);
        self.max_jump = self.max_jump.max(jump);
    }
}

/// Replay `history` through a fresh accumulator; the last snapshot is at the
/// history's horizon.
pub fn accumulate_history(
    history: &EventHistory,
    weights: &SiteWeights,
    checkpoints: &[f64],
) -> Vec<ObservableSnapshot> {
    let mut acc = SemiDiscreteAccumulator::new(weights, &history.initial, checkpoints);
    let end = history.replay(history.horizon, &mut acc);
    acc.finish(&end);
    acc.into_snapshots()
}

/// One row of the observable table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservableRow {
    pub epsilon: f64,
    pub t: f64,
    pub replica: u64,
    #[serde(rename = "W")]
    pub w: f64,
    #[serde(rename = "A1")]
    pub a1: f64,
    #[serde(rename = "A2")]
    pub a2: f64,
    pub eta_mass: f64,
    pub residual: f64,
    #[serde(rename = "R_eps")]
    pub r_eps: f64,
}

impl ObservableRow {
    pub fn new(epsilon: f64, replica: u64, s: &ObservableSnapshot) -> Self {
        Self {
            epsilon,
            t: s.t,
            replica,
            w: s.w,
            a1: s.a1,
            a2: s.a2,
            eta_mass: s.eta_mass,
            residual: s.residual,
            r_eps: s.r_eps,
        }
    }
}

/// CSV with header `epsilon,t,replica,W,A1,A2,eta_mass,residual,R_eps`.
pub fn write_observable_table<W: Write>(rows: &[ObservableRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{validate_state, Simulation};
    use crate::rng::RngStream;
    use crate::stats::RunningStats;
    use crate::testfn::{Bump, TestFunction};
    use crate::walk::sample_pi_path;

    fn pi_state(size: usize, rng: &mut crate::rng::SimRng) -> InterfaceState {
        let p = sample_pi_path(size + 1, rng);
        InterfaceState::from_valid(p.into_values(), 0.0)
    }

    fn run(eps: f64, size: usize, t: f64, seed: u64, phi: &Bump, checkpoints: &[f64]) -> Vec<ObservableSnapshot> {
        let w = SiteWeights::new(phi, eps, size).unwrap();
        let mut rng = RngStream::new(seed, 1000).rng();
        let state = pi_state(size, &mut rng);
        let mut acc = SemiDiscreteAccumulator::new(&w, &state, checkpoints);
        let mut sim = Simulation::new(state, RngStream::new(seed, 0));
        let history = sim.run_recorded(t / (eps * eps), &mut acc);
        acc.finish(sim.state());
        let snaps = acc.into_snapshots();
        assert_eq!(accumulate_history(&history, &w, checkpoints), snaps);
        snaps
    }

    #[test]
    fn staircase_has_no_noise_and_no_error() {
        let phi = Bump::new(1.0, 0.6, 1.0);
        let eps = 0.1;
        let w = SiteWeights::new(&phi, eps, 40).unwrap();
        let state = InterfaceState::staircase(40);
        let mut acc = SemiDiscreteAccumulator::new(&w, &state, &[]);
        let mut sim = Simulation::new(state, RngStream::new(0, 0));
        let counts = sim.run_until(50.0, &mut acc);
        assert_eq!(counts.flips, 0);
        let s = acc.finish(sim.state());
        assert_eq!((s.w, s.a1, s.a2, s.eta_phi), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(s.residual, 0.0);
        // h^ε linear: ∫ h^ε φ'' = 0, so only quadrature noise remains
        assert!(s.r_eps.abs() < 1e-10, "{}", s.r_eps);
    }

    #[test]
    fn single_flip_jump() {
        let eps: f64 = 0.1;
        // peak of height 2 at site 2, φ(0.2) = 1 and φ vanishes at the other sites
        let phi = Bump::new(0.2, 0.05, 1.0);
        let w = SiteWeights::new(&phi, eps, 3).unwrap();
        let mut state = validate_state(&[0, 1, 2, 1, 0]).unwrap();
        let mut acc = SemiDiscreteAccumulator::new(&w, &state, &[]);
        let ev = FlipEvent {
            time: 1.0,
            site: 2,
            delta: state.laplacian(2),
            outcome: state.classify(2),
        };
        assert_eq!(ev.delta, -2);
        acc.on_interval(0.0, 1.0, &state);
        state.set_time(1.0);
        acc.before_event(&ev, &state);
        state.apply_flip(2);
        acc.after_event(&ev, &state);
        let s = acc.finish(&state);
        assert!((s.w_jump + SQRT_2 * eps.powf(1.5)).abs() < 1e-15);
        assert!((s.max_jump_ratio - 1.0).abs() < 1e-12);
        assert!(s.residual_rel < 1e-12);
    }

    #[test]
    fn permanent_corner_bracket() {
        let eps = 0.05;
        let n0 = 6usize;
        let mut h: Vec<i64> = (0..=n0 as i64).collect();
        h.extend((0..n0 as i64).rev());
        let state = validate_state(&h).unwrap();
        assert_eq!(state.corner_sites(), vec![n0]);
        let phi = Bump::new(eps * n0 as f64, 0.5 * eps, 1.0);
        let w = SiteWeights::new(&phi, eps, state.lattice_size()).unwrap();
        let mut acc = SemiDiscreteAccumulator::new(&w, &state, &[]);
        let tau = 37.0;
        acc.on_interval(0.0, tau, &state);
        let mut end = state.clone();
        end.set_time(tau);
        let s = acc.finish(&end);
        assert!((s.a1 - 2.0 * eps * s.t).abs() < 1e-15);
        assert_eq!(s.a2, 0.0);
    }

    #[test]
    fn identity_and_invariants_on_random_runs() {
        let phi = Bump::new(1.0, 0.75, 1.0);
        for (i, eps) in [0.2, 0.1].into_iter().enumerate() {
            for rep in 0..20 {
                let cps: Vec<f64> = (1..=4).map(|k| k as f64 * 0.2 / (eps * eps)).collect();
                let snaps = run(eps, 200, 1.0, 100 * i as u64 + rep, &phi, &cps);
                assert_eq!(snaps.len(), 5);
                for s in &snaps {
                    assert!(s.residual_rel <= 1e-8, "residual {}", s.residual_rel);
                    assert!(s.max_jump_ratio <= 1.0 + 1e-12);
                    assert!(s.a2 <= s.a1 && s.a2 >= 0.0);
                }
                for p in snaps.windows(2) {
                    assert!(p[1].a1 >= p[0].a1 && p[1].a2 >= p[0].a2);
                    assert!(p[1].eta_mass >= p[0].eta_mass);
                }
            }
        }
    }

    #[test]
    fn noise_has_zero_mean() {
        let phi = Bump::new(0.6, 0.4, 1.0);
        let eps = 0.1;
        let mut st = RunningStats::new();
        for rep in 0..1000 {
            let s = run(eps, 40, 0.5, rep, &phi, &[]);
            st.push(s[0].w);
        }
        assert!(st.mean.abs() < 3.0 * st.stderr(), "mean {} se {}", st.mean, st.stderr());
    }

    #[test]
    fn lattice_and_continuum_pairings_are_close() {
        // |⟨h,φ⟩_ε − ⟨h,φ⟩| ≤ ε A ‖h^ε‖_{∞,[0,A]} ‖φ'‖∞
        let phi = Bump::new(1.0, 0.75, 1.0);
        let a = phi.support_bound();
        let sup_d1 = (0..=4000).map(|i| phi.d1(i as f64 * a / 4000.0).abs()).fold(0.0, f64::max);
        let mut rng = RngStream::new(3, 0).rng();
        for eps in [0.2, 0.1, 0.05] {
            let size = (3.0 / eps) as usize;
            let w = SiteWeights::new(&phi, eps, size).unwrap();
            let state = pi_state(size, &mut rng);
            let hsup = state
                .heights()
                .iter()
                .take((a / eps) as usize + 2)
                .map(|&h| eps.sqrt() * h as f64)
                .fold(0.0, f64::max);
            let gap = (w.discrete_pairing(state.heights()) - w.continuum_pairing(state.heights())).abs();
            assert!(gap <= eps * a * hsup * sup_d1, "ε={eps}");
        }
    }

    #[test]
    fn quadrature_refines() {
        let w = SiteWeights::new(&Bump::new(1.0, 0.75, 1.0), 0.05, 100).unwrap();
        assert!(w.quadrature_change <= 1e-8);
        let l2 = Bump::new(1.0, 0.75, 1.0).l2_norm_sq();
        assert!((w.lattice_l2_sq() - l2).abs() < 1e-6);
    }

    #[test]
    fn table_header() {
        let snap = run(0.2, 50, 0.1, 0, &Bump::new(1.0, 0.75, 1.0), &[]);
        let rows = [ObservableRow::new(0.2, 0, &snap[0])];
        let mut buf = Vec::new();
        write_observable_table(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "epsilon,t,replica,W,A1,A2,eta_mass,residual,R_eps");
    }
}
