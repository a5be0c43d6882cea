//! The `simulate` command: raw event logs and per-checkpoint observables.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::plan::{ExperimentPlan, InitialCondition};
use super::HarnessError;
use crate::dynamics::{FlipOutcome, InterfaceState, Simulation};
use crate::observables::{write_observable_table, ObservableRow, ReflectionRecorder, SemiDiscreteAccumulator, SiteWeights};
use crate::replica::map_replicas;
use crate::rng::RngStream;
use crate::walk::sample_pi_path;

const SIMULATE_LABEL: u64 = 9_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub experiment_id: String,
    pub plan_hash: String,
    pub seed: u64,
    pub epsilon: f64,
    pub lattice_size: usize,
    /// Scaled time.
    pub horizon: f64,
    pub replicas: u64,
    pub flips: Vec<u64>,
    pub blocked: Vec<u64>,
    pub files: Vec<PathBuf>,
}

fn initial_state(plan: &ExperimentPlan, replica: u64) -> InterfaceState {
    let c = &plan.simulate;
    match c.initial {
        InitialCondition::Pi => {
            let mut rng = RngStream::new(RngStream::derive(plan.seed, SIMULATE_LABEL), replica).rng();
            InterfaceState::from_valid(sample_pi_path(c.lattice_size + 1, &mut rng).into_values(), 0.0)
        }
        InitialCondition::Staircase => InterfaceState::staircase(c.lattice_size),
        InitialCondition::Zigzag => InterfaceState::zigzag(c.lattice_size),
    }
}

/// Simulate every replica and write, under `out`:
/// `replica_<r>/events.jsonl`, `replica_<r>/intervals.csv`,
/// `replica_<r>/reflection.csv`, plus `observables.csv` and `summary.json`.
pub fn run_simulation(plan: &ExperimentPlan, out: &Path) -> Result<SimulationSummary, HarnessError> {
    plan.validate_simulate()?;
    let c = &plan.simulate;
    let eps = c.epsilon;
    let tau = c.horizon / (eps * eps);
    let weights = SiteWeights::new(&plan.test_function, eps, c.lattice_size)?;
    let checkpoints: Vec<f64> = c.checkpoints.iter().filter(|&&t| t > 0.0 && t < c.horizon).map(|t| t / (eps * eps)).collect();
    fs::create_dir_all(out)?;
    let replicas = plan.replicas_or(c.replicas);

    let results = map_replicas(replicas, plan.parallelism, |r| -> Result<_, HarnessError> {
        let state = initial_state(plan, r);
        let mut acc = SemiDiscreteAccumulator::new(&weights, &state, &checkpoints);
        let mut refl = ReflectionRecorder::new(&state, eps, None);
        let stream = RngStream::new(RngStream::derive(plan.seed, SIMULATE_LABEL + 1), r);
        let mut sim = Simulation::new(state, stream).with_logging(c.logging);
        let history = sim.run_recorded(tau, (&mut acc, &mut refl));
        acc.finish(sim.state());
        let dir = out.join(format!("replica_{r}"));
        fs::create_dir_all(&dir)?;
        history.write_events_jsonl(BufWriter::new(File::create(dir.join("events.jsonl"))?))?;
        history.write_intervals_csv(BufWriter::new(File::create(dir.join("intervals.csv"))?))?;
        refl.finish().write_csv(BufWriter::new(File::create(dir.join("reflection.csv"))?))?;
        let flips = history.flip_count() as u64;
        let blocked = history.events.iter().filter(|e| e.outcome == FlipOutcome::Blocked).count() as u64;
        let rows: Vec<ObservableRow> = acc.snapshots().iter().map(|s| ObservableRow::new(eps, r, s)).collect();
        Ok((rows, flips, blocked, dir))
    });

    let mut rows = Vec::new();
    let mut summary = SimulationSummary {
        experiment_id: plan.experiment_id.clone(),
        plan_hash: plan.hash(),
        seed: plan.seed,
        epsilon: eps,
        lattice_size: c.lattice_size,
        horizon: c.horizon,
        replicas,
        flips: Vec::new(),
        blocked: Vec::new(),
        files: Vec::new(),
    };
    for res in results {
        let (r, flips, blocked, dir) = res?;
        rows.extend(r);
        summary.flips.push(flips);
        summary.blocked.push(blocked);
        for f in ["events.jsonl", "intervals.csv", "reflection.csv"] {
            summary.files.push(dir.join(f));
        }
    }
    let table = out.join("observables.csv");
    write_observable_table(&rows, BufWriter::new(File::create(&table)?))?;
    summary.files.push(table);
    let path = out.join("summary.json");
    fs::write(&path, serde_json::to_string_pretty(&summary).expect("summary serializes"))?;
    summary.files.push(path);
    Ok(summary)
}
