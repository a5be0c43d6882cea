use std::io::Write;

use serde::{Deserialize, Serialize};

use super::sim::{EventLogging, FlipEvent, Observer};
use super::state::{FlipOutcome, InterfaceState};

/// Counts for one stretch of constant configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalSummary {
    pub t_start: f64,
    pub t_end: f64,
    pub n_corners: usize,
    pub n_blocked: usize,
}

/// Everything needed to rebuild a trajectory exactly: the initial state and
/// every configuration-changing event. Corner and blocked sets of each
/// interval are recovered by [`EventHistory::replay`].
#[derive(Debug, Clone)]
pub struct EventHistory {
    pub initial: InterfaceState,
    pub final_state: InterfaceState,
    pub events: Vec<FlipEvent>,
    pub intervals: Vec<IntervalSummary>,
    pub horizon: f64,
    pub logging: EventLogging,
}

pub(crate) struct HistoryRecorder {
    initial: InterfaceState,
    events: Vec<FlipEvent>,
    intervals: Vec<IntervalSummary>,
    logging: EventLogging,
}

impl HistoryRecorder {
    pub(crate) fn new(initial: InterfaceState, logging: EventLogging) -> Self {
        Self {
            initial,
            events: Vec::new(),
            intervals: Vec::new(),
            logging,
        }
    }

    pub(crate) fn finish(self, final_state: InterfaceState) -> EventHistory {
        let horizon = final_state.time();
        EventHistory {
            initial: self.initial,
            final_state,
            events: self.events,
            intervals: self.intervals,
            horizon,
            logging: self.logging,
        }
    }
}

impl Observer for HistoryRecorder {
    fn on_interval(&mut self, start: f64, end: f64, state: &InterfaceState) {
        self.intervals.push(IntervalSummary {
            t_start: start,
            t_end: end,
            n_corners: state.n_corners(),
            n_blocked: state.n_blocked(),
        });
    }

    fn after_event(&mut self, event: &FlipEvent, _state: &InterfaceState) {
        self.events.push(*event);
    }
}

impl EventHistory {
    pub fn lattice_size(&self) -> usize {
        self.initial.lattice_size()
    }

    pub fn flip_count(&self) -> usize {
        self.events
            .iter()
            .filter(|e| e.outcome == FlipOutcome::Flipped)
            .count()
    }

    /// Re-drive `observer` over `[initial.time, until]`, in the same call order
    /// as the live run. Returns the configuration at `until`.
    pub fn replay<O: Observer>(&self, until: f64, mut observer: O) -> InterfaceState {
        let until = until.min(self.horizon);
        let mut state = self.initial.clone();
        let mut last = state.time();
        for event in self.events.iter().take_while(|e| e.time <= until) {
            debug_assert_eq!(state.classify(event.site), event.outcome);
            observer.on_interval(last, event.time, &state);
            last = event.time;
            state.set_time(event.time);
            observer.before_event(event, &state);
            if event.outcome == FlipOutcome::Flipped {
                state.apply_flip(event.site);
            }
            observer.after_event(event, &state);
        }
        state.set_time(until);
        observer.on_interval(last, until, &state);
        state
    }

    /// Configuration at unscaled time `t`.
    pub fn state_at(&self, t: f64) -> InterfaceState {
        self.replay(t, ())
    }

    /// Configurations at each of the (sorted) unscaled `times`, in one pass.
    pub fn snapshots(&self, times: &[f64]) -> Vec<InterfaceState> {
        debug_assert!(times.windows(2).all(|w| w[0] <= w[1]));
        let mut out = Vec::with_capacity(times.len());
        let mut state = self.initial.clone();
        let mut events = self.events.iter().peekable();
        for &t in times {
            while let Some(e) = events.next_if(|e| e.time <= t) {
                if e.outcome == FlipOutcome::Flipped {
                    state.apply_flip(e.site);
                }
            }
            let mut snap = state.clone();
            snap.set_time(t);
            out.push(snap);
        }
        out
    }

    /// One JSON object per flipped or blocked event:
    /// `{"t": float, "site": int, "delta": int, "outcome": "flipped"|"blocked"}`.
    pub fn write_events_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        #[derive(Serialize)]
        struct Record {
            t: f64,
            site: usize,
            delta: i32,
            outcome: FlipOutcome,
        }
        for e in self
            .events
            .iter()
            .filter(|e| e.outcome != FlipOutcome::NoCorner)
        {
            let rec = Record {
                t: e.time,
                site: e.site,
                delta: e.delta,
                outcome: e.outcome,
            };
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// CSV with header `t_start,t_end,n_corners,n_blocked`.
    pub fn write_intervals_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for iv in &self.intervals {
            w.serialize(iv)?;
        }
        w.flush()?;
        Ok(())
    }
}
