//! The discrete reflection measure: `2/√ε` times scaled time spent blocked,
//! as point masses on the blocked sites, binned in time.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dynamics::{EventHistory, FlipEvent, InterfaceState, Observer};

/// Mass of one (time bin, site) cell. `weighted_mass` is `∫ h^ε dη^ε` over
/// the cell, accrued alongside `mass` from the height seen at each interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReflectionCell {
    pub bin: u64,
    pub site: usize,
    pub mass: f64,
    pub weighted_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectionMeasure {
    pub epsilon: f64,
    /// Bin width in scaled time.
    pub bin_width: f64,
    /// Cells with positive mass, ordered by `(bin, site)`.
    pub cells: Vec<ReflectionCell>,
}

/// Both sides of `∫ xψ h^ε dη^ε = √ε ∫ xψ dη^ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportIdentity {
    pub lhs: f64,
    pub rhs: f64,
    pub relative_gap: f64,
}

impl ReflectionMeasure {
    pub fn total_mass(&self) -> f64 {
        self.cells.iter().map(|c| c.mass).sum()
    }

    pub fn site_position(&self, site: usize) -> f64 {
        self.epsilon * site as f64
    }

    /// `[start, end)` of a bin in scaled time.
    pub fn bin_range(&self, bin: u64) -> (f64, f64) {
        (bin as f64 * self.bin_width, (bin + 1) as f64 * self.bin_width)
    }

    /// `∫∫ ψ(x) dη^ε` for a function of space only (exact).
    pub fn integrate_space(&self, psi: impl Fn(f64) -> f64) -> f64 {
        self.cells
            .iter()
            .map(|c| psi(self.site_position(c.site)) * c.mass)
            .sum()
    }

    /// `∫∫ f(t, x) dη^ε` with `f` read at bin midpoints.
    pub fn integrate(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        self.cells
            .iter()
            .map(|c| {
                let (a, b) = self.bin_range(c.bin);
                f(0.5 * (a + b), self.site_position(c.site)) * c.mass
            })
            .sum()
    }

    pub fn support_identity(&self, psi: impl Fn(f64) -> f64) -> SupportIdentity {
        let (mut lhs, mut plain) = (0.0, 0.0);
        for c in &self.cells {
            let x = self.site_position(c.site);
            let w = x * psi(x);
            lhs += w * c.weighted_mass;
            plain += w * c.mass;
        }
        let rhs = self.epsilon.sqrt() * plain;
        let scale = lhs.abs().max(rhs.abs());
        SupportIdentity {
            lhs,
            rhs,
            relative_gap: if scale > 0.0 { (lhs - rhs).abs() / scale } else { 0.0 },
        }
    }

    /// CSV `t_start,t_end,x,mass` (scaled units).
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t_start", "t_end", "x", "mass"])?;
        for c in &self.cells {
            let (a, b) = self.bin_range(c.bin);
            w.serialize((a, b, self.site_position(c.site), c.mass))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Observer building a [`ReflectionMeasure`]. The blocked set is updated at
/// the three sites around each flip, so accrual costs O(#blocked) per
/// interval.
pub struct ReflectionRecorder {
    epsilon: f64,
    bin_unscaled: f64,
    bin_width: f64,
    mass_rate: f64,
    sqrt_eps: f64,
    t0: f64,
    blocked: Vec<usize>,
    slot: Vec<usize>,
    current_bin: u64,
    current: BTreeMap<usize, (f64, f64)>,
    cells: Vec<ReflectionCell>,
}

const NOT_BLOCKED: usize = usize::MAX;

impl ReflectionRecorder {
    /// `bin_width` in scaled time; `None` selects `ε²` (one unscaled unit).
    pub fn new(initial: &InterfaceState, epsilon: f64, bin_width: Option<f64>) -> Self {
        let bin_width = bin_width.unwrap_or(epsilon * epsilon);
        assert!(bin_width > 0.0, "bin width must be positive");
        let mut rec = Self {
            epsilon,
            bin_unscaled: bin_width / (epsilon * epsilon),
            bin_width,
            mass_rate: 2.0 * epsilon.powf(1.5),
            sqrt_eps: epsilon.sqrt(),
            t0: initial.time(),
            blocked: Vec::new(),
            slot: vec![NOT_BLOCKED; initial.heights().len()],
            current_bin: 0,
            current: BTreeMap::new(),
            cells: Vec::new(),
        };
        for n in 1..=initial.lattice_size() {
            rec.refresh(n, initial);
        }
        rec
    }

    fn refresh(&mut self, n: usize, state: &InterfaceState) {
        let is = state.is_blocked(n);
        let was = self.slot[n] != NOT_BLOCKED;
        if is && !was {
            self.slot[n] = self.blocked.len();
            self.blocked.push(n);
        } else if !is && was {
            let i = self.slot[n];
            self.blocked.swap_remove(i);
            if let Some(&moved) = self.blocked.get(i) {
                self.slot[moved] = i;
            }
            self.slot[n] = NOT_BLOCKED;
        }
    }

    fn flush(&mut self) {
        let bin = self.current_bin;
        self.cells.extend(
            std::mem::take(&mut self.current)
                .into_iter()
                .map(|(site, (mass, weighted_mass))| ReflectionCell {
                    bin,
                    site,
                    mass,
                    weighted_mass,
                }),
        );
    }

    fn accrue(&mut self, dt: f64, state: &InterfaceState) {
        if dt <= 0.0 {
            return;
        }
        let dm = self.mass_rate * dt;
        for &n in &self.blocked {
            debug_assert_eq!(state.height(n), 1, "blocked site must sit at height one");
            let h = self.sqrt_eps * state.height(n) as f64;
            let cell = self.current.entry(n).or_insert((0.0, 0.0));
            cell.0 += dm;
            cell.1 += h * dm;
        }
    }

    pub fn finish(mut self) -> ReflectionMeasure {
        self.flush();
        ReflectionMeasure {
            epsilon: self.epsilon,
            bin_width: self.bin_width,
            cells: self.cells,
        }
    }
}

impl Observer for ReflectionRecorder {
    fn on_interval(&mut self, start: f64, end: f64, state: &InterfaceState) {
        let mut a = start - self.t0;
        let b = end - self.t0;
        while a < b {
            let bin = (a / self.bin_unscaled).floor() as u64;
            if bin != self.current_bin {
                self.flush();
                self.current_bin = bin;
            }
            let mut edge = ((bin + 1) as f64 * self.bin_unscaled).min(b);
            // slivers left by rounding of the bin edges stay in the current bin
            if edge <= a || b - edge < 1e-9 * self.bin_unscaled {
                edge = b;
            }
            self.accrue(edge - a, state);
            a = edge;
        }
    }

    fn after_event(&mut self, event: &FlipEvent, state: &InterfaceState) {
        if event.outcome == crate::dynamics::FlipOutcome::Flipped {
            let n = event.site;
            for m in n.saturating_sub(1).max(1)..=(n + 1).min(state.lattice_size()) {
                self.refresh(m, state);
            }
        }
    }
}

/// Replay `history` and return its reflection measure.
pub fn reflection_measure(history: &EventHistory, epsilon: f64, bin_width: Option<f64>) -> ReflectionMeasure {
    let mut rec = ReflectionRecorder::new(&history.initial, epsilon, bin_width);
    history.replay(history.horizon, &mut rec);
    rec.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{validate_state, Simulation};
    use crate::observables::{SemiDiscreteAccumulator, SiteWeights};
    use crate::rng::RngStream;
    use crate::testfn::Bump;
    use crate::walk::sample_pi_path;

    #[test]
    fn one_blocked_site_for_a_whole_bin() {
        let eps: f64 = 0.04;
        let state = validate_state(&[0, 1, 0, 1, 2]).unwrap();
        let mut rec = ReflectionRecorder::new(&state, eps, Some(3.0 * eps * eps));
        rec.on_interval(0.0, 3.0, &state);
        let m = rec.finish();
        assert_eq!(m.cells.len(), 1);
        let delta = 3.0 * eps * eps;
        assert!((m.cells[0].mass - 10.0 * delta).abs() < 1e-15);
        assert_eq!(m.cells[0].site, 1);
    }

    #[test]
    fn no_blocked_sites_no_mass() {
        let state = InterfaceState::staircase(10);
        let mut sim = Simulation::new(state.clone(), RngStream::new(1, 0));
        let mut rec = ReflectionRecorder::new(&state, 0.1, None);
        sim.run_until(20.0, &mut rec);
        let m = rec.finish();
        assert!(m.cells.is_empty());
        assert_eq!(m.total_mass(), 0.0);
    }

    #[test]
    fn binning_splits_mass_and_matches_accumulator() {
        let eps = 0.1;
        let size = 60;
        let mut rng = RngStream::new(5, 9).rng();
        let state = InterfaceState::from_valid(sample_pi_path(size + 1, &mut rng).into_values(), 0.0);
        let phi = Bump::new(1.0, 0.75, 1.0);
        let w = SiteWeights::new(&phi, eps, size).unwrap();
        let mut acc = SemiDiscreteAccumulator::new(&w, &state, &[]);
        let mut fine = ReflectionRecorder::new(&state, eps, None);
        let mut coarse = ReflectionRecorder::new(&state, eps, Some(0.37));
        let mut sim = Simulation::new(state, RngStream::new(5, 0));
        let horizon = 1.0 / (eps * eps);
        let history = sim.run_recorded(horizon, (&mut acc, (&mut fine, &mut coarse)));
        let snap = acc.finish(sim.state());
        let (fine, coarse) = (fine.finish(), coarse.finish());
        let replayed = reflection_measure(&history, eps, None);
        assert_eq!(replayed, fine);
        assert!(fine.total_mass() > 0.0);
        for m in [&fine, &coarse] {
            assert!((m.total_mass() - snap.eta_mass).abs() <= 1e-10 * snap.eta_mass);
            assert!(m.cells.iter().all(|c| c.mass > 0.0));
        }
        let from_cells = fine.integrate_space(|x| crate::testfn::TestFunction::value(&phi, x));
        assert!((from_cells - snap.eta_phi).abs() <= 1e-10 * snap.eta_phi.abs().max(1e-300));
        assert!(fine.cells.windows(2).all(|p| (p[0].bin, p[0].site) < (p[1].bin, p[1].site)));
        let id = fine.support_identity(|x| (-x).exp());
        assert!(id.relative_gap <= 1e-10, "{id:?}");
    }

    #[test]
    fn csv_layout() {
        let state = validate_state(&[0, 1, 0]).unwrap();
        let mut rec = ReflectionRecorder::new(&state, 0.25, None);
        rec.on_interval(0.0, 1.5, &state);
        let mut buf = Vec::new();
        rec.finish().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "t_start,t_end,x,mass");
        assert_eq!(lines.len(), 3);
    }
}
