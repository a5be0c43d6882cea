//! Plain-data exports for plotting: exact laws, Fourier grids, marginal
//! samples and SHE field snapshots.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use super::plan::ExperimentPlan;
use super::HarnessError;
use crate::continuum::{
    bessel3_marginal_cdf, sample_bessel3, she_run, she_step, write_field_csv, write_samples_csv, EtaRecord, SheGrid, SheState,
    SheWorkspace,
};
use crate::dynamics::InterfaceState;
use crate::observables::{fourier_hat_interface, RescaledInterface};
use crate::replica::map_replicas;
use crate::rng::RngStream;
use crate::walk::{exact_pmf, sample_pi_path};

const EXPORT_LABEL: u64 = 8_000;

fn create(path: &Path) -> Result<BufWriter<File>, HarnessError> {
    Ok(BufWriter::new(File::create(path)?))
}

fn stream(plan: &ExperimentPlan, part: u64, replica: u64) -> RngStream {
    RngStream::new(RngStream::derive(plan.seed, EXPORT_LABEL + part), replica)
}

/// `pmf_n<N>.csv` with the exact law of `X_N` under π.
pub fn export_pmf(plan: &ExperimentPlan, out: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(out)?;
    let n = plan.export.pmf_n;
    let path = out.join(format!("pmf_n{n}.csv"));
    exact_pmf(n)?.write_csv(create(&path)?)?;
    Ok(vec![path])
}

/// `fourier.csv`: the lattice Fourier transform of one weighted π-sample on a
/// frequency grid symmetric about zero, covering one period `2π/ε`.
pub fn export_fourier(plan: &ExperimentPlan, out: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let c = &plan.export;
    if c.fourier_points < 2 {
        return Err(HarnessError::Plan("fourier export needs at least two frequencies".into()));
    }
    fs::create_dir_all(out)?;
    let eps = c.fourier_epsilon;
    let mut rng = stream(plan, 0, 0).rng();
    let state = InterfaceState::from_valid(sample_pi_path(c.fourier_lattice_size + 1, &mut rng).into_values(), 0.0);
    let g = RescaledInterface::new(&state, eps).weighted(plan.norms.rho);
    let half = std::f64::consts::PI / eps;
    let zeta: Vec<f64> = (0..c.fourier_points)
        .map(|i| -half + 2.0 * half * i as f64 / (c.fourier_points - 1) as f64)
        .collect();
    let path = out.join("fourier.csv");
    fourier_hat_interface(&g, &zeta)?.write_csv(create(&path)?)?;
    Ok(vec![path])
}

/// `marginal_lattice.csv` (samples of `√ε X_m`), `marginal_she.csv` (samples
/// of the SHE at the observation point) and `bessel3_cdf.csv` (the limit law).
pub fn export_marginals(plan: &ExperimentPlan, out: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(out)?;
    let s = &plan.static_invariance;
    let m = (s.x / s.epsilon + 1e-9).floor() as usize;
    let lattice = map_replicas(plan.replicas_or(s.samples), plan.parallelism, |r| {
        s.epsilon.sqrt() * sample_pi_path(m, &mut stream(plan, 1, r).rng()).at(m) as f64
    });
    let lattice_path = out.join("marginal_lattice.csv");
    write_samples_csv("value", &lattice, create(&lattice_path)?)?;

    let h = &plan.she;
    let grid = match h.dt {
        Some(dt) => SheGrid::new(h.dx, dt, h.x_max)?,
        None => SheGrid::with_max_step(h.dx, h.x_max)?,
    };
    let obs = grid.index_of(h.x_obs);
    let she: Vec<f64> = map_replicas(plan.replicas_or(h.replicas), plan.parallelism, |r| {
        let u0 = sample_bessel3(grid.dx, grid.nodes(), &mut stream(plan, 2, r).rng()).values;
        she_run(u0, h.horizon, &grid, Some(stream(plan, 3, r)), h.bin_steps, ()).map(|run| run.state.u[obs])
    })
    .into_iter()
    .collect::<Result<_, _>>()?;
    let she_path = out.join("marginal_she.csv");
    write_samples_csv("value", &she, create(&she_path)?)?;

    let cdf_path = out.join("bessel3_cdf.csv");
    let mut w = csv::Writer::from_writer(create(&cdf_path)?);
    w.write_record(["r", "cdf"])?;
    let x = grid.x(obs);
    for i in 0..=400 {
        let r = 4.0 * x.sqrt() * i as f64 / 400.0;
        w.write_record([r.to_string(), bessel3_marginal_cdf(x, r).to_string()])?;
    }
    w.flush()?;
    Ok(vec![lattice_path, she_path, cdf_path])
}

/// `field_t<t>.csv` for each configured time along one SHE path started from
/// a Bessel(3) profile, plus `eta.csv` with its reflection measure.
pub fn export_fields(plan: &ExperimentPlan, out: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(out)?;
    let h = &plan.she;
    let grid = match h.dt {
        Some(dt) => SheGrid::new(h.dx, dt, h.x_max)?,
        None => SheGrid::with_max_step(h.dx, h.x_max)?,
    };
    let mut times = plan.export.field_times.clone();
    times.sort_by(f64::total_cmp);
    if times.first().is_some_and(|&t| t < 0.0) {
        return Err(HarnessError::Plan("field times must be nonnegative".into()));
    }
    let u0 = sample_bessel3(grid.dx, grid.nodes(), &mut stream(plan, 4, 0).rng()).values;
    let mut state = SheState::new(u0, &grid)?;
    let mut eta = EtaRecord::new(&grid, h.bin_steps);
    let mut work = SheWorkspace::default();
    let mut rng = stream(plan, 5, 0).rng();
    let mut files = Vec::new();
    for t in times {
        while state.steps < grid.steps_for(t) {
            she_step(&mut state, &grid, Some(&mut rng), &mut work, &mut eta)?;
        }
        let path = out.join(format!("field_t{t}.csv"));
        write_field_csv(&grid, &state.u, create(&path)?)?;
        files.push(path);
    }
    let path = out.join("eta.csv");
    eta.finish().write_csv(create(&path)?)?;
    files.push(path);
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exports_write_their_files() {
        let mut plan = ExperimentPlan {
            replicas: Some(4),
            ..ExperimentPlan::default()
        };
        plan.she.dx = 0.05;
        plan.she.horizon = 0.05;
        plan.export.field_times = vec![0.0, 0.02];
        let dir = tempfile::tempdir().unwrap();
        let mut files = export_pmf(&plan, dir.path()).unwrap();
        files.extend(export_fourier(&plan, dir.path()).unwrap());
        files.extend(export_marginals(&plan, dir.path()).unwrap());
        files.extend(export_fields(&plan, dir.path()).unwrap());
        assert_eq!(files.len(), 1 + 1 + 3 + 3);
        for f in &files {
            assert!(fs::metadata(f).unwrap().len() > 0, "{f:?}");
        }
        let fourier = fs::read_to_string(dir.path().join("fourier.csv")).unwrap();
        assert_eq!(fourier.lines().count(), 1 + plan.export.fourier_points);
        let f0 = fs::read_to_string(dir.path().join("field_t0.csv")).unwrap();
        assert!(f0.lines().nth(1).unwrap().starts_with("0.0,0.0"));
    }
}
