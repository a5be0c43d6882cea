use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use super::state::{FlipOutcome, InterfaceState};
use crate::rng::{RngStream, SimRng};

/// One ring of a site clock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlipEvent {
    /// Unscaled time of the ring.
    pub time: f64,
    pub site: usize,
    /// Discrete Laplacian at the site just before the ring (the attempted move).
    pub delta: i32,
    pub outcome: FlipOutcome,
}

/// Which rings are reported to observers and kept in histories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventLogging {
    /// Flipped and blocked rings; rings at non-corners are dropped.
    #[default]
    Transitions,
    /// Every ring, including `NoCorner`.
    Full,
}

impl EventLogging {
    #[inline]
    fn keeps(self, outcome: FlipOutcome) -> bool {
        self == EventLogging::Full || outcome != FlipOutcome::NoCorner
    }
}

/// Hooks driven by [`Simulation::run_until`] and [`super::EventHistory::replay`].
///
/// For each reported event the order of calls is `on_interval` (closing the
/// constant stretch that ends at the event), `before_event` with the
/// configuration at `t-`, and `after_event` with the configuration at `t`.
/// A final `on_interval` closes the run at the horizon.
pub trait Observer {
    fn on_interval(&mut self, _start: f64, _end: f64, _state: &InterfaceState) {}
    fn before_event(&mut self, _event: &FlipEvent, _state: &InterfaceState) {}
    fn after_event(&mut self, _event: &FlipEvent, _state: &InterfaceState) {}
}

impl Observer for () {}

impl<O: Observer + ?Sized> Observer for &mut O {
    fn on_interval(&mut self, start: f64, end: f64, state: &InterfaceState) {
        (**self).on_interval(start, end, state)
    }
    fn before_event(&mut self, event: &FlipEvent, state: &InterfaceState) {
        (**self).before_event(event, state)
    }
    fn after_event(&mut self, event: &FlipEvent, state: &InterfaceState) {
        (**self).after_event(event, state)
    }
}

impl<A: Observer, B: Observer> Observer for (A, B) {
    fn on_interval(&mut self, start: f64, end: f64, state: &InterfaceState) {
        self.0.on_interval(start, end, state);
        self.1.on_interval(start, end, state);
    }
    fn before_event(&mut self, event: &FlipEvent, state: &InterfaceState) {
        self.0.before_event(event, state);
        self.1.before_event(event, state);
    }
    fn after_event(&mut self, event: &FlipEvent, state: &InterfaceState) {
        self.0.after_event(event, state);
        self.1.after_event(event, state);
    }
}

impl<O: Observer> Observer for Vec<O> {
    fn on_interval(&mut self, start: f64, end: f64, state: &InterfaceState) {
        self.iter_mut().for_each(|o| o.on_interval(start, end, state));
    }
    fn before_event(&mut self, event: &FlipEvent, state: &InterfaceState) {
        self.iter_mut().for_each(|o| o.before_event(event, state));
    }
    fn after_event(&mut self, event: &FlipEvent, state: &InterfaceState) {
        self.iter_mut().for_each(|o| o.after_event(event, state));
    }
}

/// Counters returned by a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunCounts {
    pub rings: u64,
    pub flips: u64,
    pub blocked: u64,
}

/// Event-driven simulator of the truncated dynamics.
///
/// All `L` unit-rate clocks are superposed: the next ring comes after an
/// `Exp(L)` wait at a uniformly chosen site.
pub struct Simulation {
    state: InterfaceState,
    rng: SimRng,
    logging: EventLogging,
}

impl Simulation {
    pub fn new(state: InterfaceState, stream: RngStream) -> Self {
        Self {
            state,
            rng: stream.rng(),
            logging: EventLogging::default(),
        }
    }

    pub fn with_logging(mut self, logging: EventLogging) -> Self {
        self.logging = logging;
        self
    }

    pub fn logging(&self) -> EventLogging {
        self.logging
    }

    pub fn state(&self) -> &InterfaceState {
        &self.state
    }

    pub fn into_state(self) -> InterfaceState {
        self.state
    }

    #[inline]
    fn draw(&mut self) -> (f64, usize) {
        let size = self.state.lattice_size();
        let wait: f64 = self.rng.sample::<f64, _>(Exp1) / size as f64;
        let site = self.rng.random_range(1..=size);
        (wait, site)
    }

    /// Advance to the next ring and apply it, whatever its outcome.
    pub fn step_to_next_event(&mut self) -> FlipEvent {
        let (wait, site) = self.draw();
        let time = self.state.time() + wait;
        self.state.set_time(time);
        let delta = self.state.laplacian(site);
        let outcome = self.state.classify(site);
        if outcome == FlipOutcome::Flipped {
            self.state.apply_flip(site);
        }
        FlipEvent {
            time,
            site,
            delta,
            outcome,
        }
    }

    /// Simulate up to `horizon` (unscaled), driving `observer`.
    pub fn run_until<O: Observer>(&mut self, horizon: f64, mut observer: O) -> RunCounts {
        assert!(
            horizon >= self.state.time(),
            "horizon {horizon} precedes current time {}",
            self.state.time()
        );
        let mut counts = RunCounts::default();
        let mut last = self.state.time();
        loop {
            let (wait, site) = self.draw();
            let time = self.state.time() + wait;
            if time > horizon {
                break;
            }
            counts.rings += 1;
            self.state.set_time(time);
            let outcome = self.state.classify(site);
            if self.logging.keeps(outcome) {
                let event = FlipEvent {
                    time,
                    site,
                    delta: self.state.laplacian(site),
                    outcome,
                };
                observer.on_interval(last, time, &self.state);
                last = time;
                observer.before_event(&event, &self.state);
                if outcome == FlipOutcome::Flipped {
                    self.state.apply_flip(site);
                }
                observer.after_event(&event, &self.state);
            }
            match outcome {
                FlipOutcome::Flipped => counts.flips += 1,
                FlipOutcome::Blocked => counts.blocked += 1,
                FlipOutcome::NoCorner => {}
            }
        }
        self.state.set_time(horizon);
        observer.on_interval(last, horizon, &self.state);
        counts
    }

    /// Run to `horizon` while recording a replayable history.
    pub fn run_recorded<O: Observer>(&mut self, horizon: f64, observer: O) -> super::EventHistory {
        let mut recorder = super::HistoryRecorder::new(self.state.clone(), self.logging);
        self.run_until(horizon, (&mut recorder, observer));
        recorder.finish(self.state.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::validate_state;

    #[test]
    fn single_site_waits_are_unit_exponential() {
        let state = validate_state(&[0, 1, 0]).unwrap();
        let mut sim = Simulation::new(state, RngStream::new(11, 0));
        let n = 100_000;
        let mut prev = 0.0;
        let mut sum = 0.0;
        for _ in 0..n {
            let ev = sim.step_to_next_event();
            sum += ev.time - prev;
            prev = ev.time;
        }
        let mean = sum / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean wait {mean}");
    }

    #[test]
    fn hundred_sites_mean_wait() {
        let mut sim = Simulation::new(InterfaceState::zigzag(100), RngStream::new(12, 0));
        let n = 100_000;
        let mut last = 0.0;
        for _ in 0..n {
            last = sim.step_to_next_event().time;
        }
        let mean = last / n as f64;
        assert!((mean - 0.01).abs() < 0.01 * 0.01, "mean wait {mean}");
    }

    #[test]
    fn identical_streams_identical_events() {
        let run = || {
            let mut sim = Simulation::new(InterfaceState::zigzag(20), RngStream::new(5, 9))
                .with_logging(EventLogging::Full);
            sim.run_recorded(50.0, ()).events
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn zero_length_run() {
        let mut sim = Simulation::new(InterfaceState::zigzag(10), RngStream::new(1, 1));
        let h = sim.run_recorded(0.0, ());
        assert!(h.events.is_empty());
        assert_eq!(h.intervals.len(), 1);
        assert_eq!(h.intervals[0].t_start, h.intervals[0].t_end);
    }

    #[test]
    fn ring_count_is_poisson_mean() {
        let (size, horizon, reps) = (100usize, 100.0, 100u64);
        let total: u64 = (0..reps)
            .map(|r| {
                let mut sim = Simulation::new(InterfaceState::zigzag(size), RngStream::new(3, r));
                sim.run_until(horizon, ()).rings
            })
            .sum();
        let mean = total as f64 / reps as f64;
        let expected = size as f64 * horizon;
        assert!((mean - expected).abs() < 0.02 * expected, "mean rings {mean}");
    }

    #[test]
    fn boundary_frozen_and_constraints_hold_over_a_million_events() {
        let state = InterfaceState::zigzag(64);
        let right = state.height(65);
        let mut sim = Simulation::new(state, RngStream::new(77, 0));
        for _ in 0..1_000_000 {
            let ev = sim.step_to_next_event();
            assert!(ev.outcome != FlipOutcome::Flipped || ev.delta.abs() == 2);
        }
        sim.state().check_invariants().unwrap();
        assert_eq!(sim.state().height(65), right);
        assert_eq!(sim.state().height(0), 0);
    }
}
