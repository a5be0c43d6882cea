//! Explicit finite differences for the reflected stochastic heat equation on
//! `[0, x_max]`, Dirichlet at the origin and Neumann at `x_max`.
//!
//! Node `i` carries the trapezoid weight `w_i` (`dx`, or `dx/2` at the
//! Neumann node). One step is
//! `ũ = u + dt Δu + √(2 dt / w_i) ξ` followed by the projection
//! `u' = max(ũ, 0)` with reflection mass `w_i max(0, −ũ)`; the weighted
//! pairing of the update against any grid `φ` with `φ_0 = 0` is then an
//! exact discrete weak form.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::RngStream;

/// Any `|ũ|` above this is taken as a blowup.
pub const BLOWUP_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SheError {
    #[error("unstable grid: dt/dx² = {ratio} exceeds 1/4")]
    Unstable { ratio: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid initial condition: {0}")]
    InvalidInitial(String),
    #[error("field blew up at t = {time}: |u| = {value:e}")]
    Blowup { time: f64, value: f64 },
    #[error("observation point {x_obs} needs x_max ≥ {need}")]
    DomainTooShort { x_obs: f64, need: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SheGrid {
    pub dx: f64,
    pub dt: f64,
    pub x_max: f64,
}

impl SheGrid {
    pub fn new(dx: f64, dt: f64, x_max: f64) -> Result<Self, SheError> {
        if !(dx > 0.0 && dt > 0.0 && x_max > dx) {
            return Err(SheError::InvalidGrid(format!("dx = {dx}, dt = {dt}, x_max = {x_max}")));
        }
        let cells = x_max / dx;
        if (cells - cells.round()).abs() > 1e-9 * cells {
            return Err(SheError::InvalidGrid(format!("x_max = {x_max} is not a multiple of dx = {dx}")));
        }
        let grid = Self { dx, dt, x_max };
        if grid.ratio() > 0.25 * (1.0 + 1e-12) {
            return Err(SheError::Unstable { ratio: grid.ratio() });
        }
        Ok(grid)
    }

    /// The grid with `dt = dx²/4`.
    pub fn with_max_step(dx: f64, x_max: f64) -> Result<Self, SheError> {
        Self::new(dx, 0.25 * dx * dx, x_max)
    }

    pub fn ratio(&self) -> f64 {
        self.dt / (self.dx * self.dx)
    }

    /// Index of the last (Neumann) node.
    pub fn last(&self) -> usize {
        (self.x_max / self.dx).round() as usize
    }

    pub fn nodes(&self) -> usize {
        self.last() + 1
    }

    pub fn x(&self, i: usize) -> f64 {
        self.dx * i as f64
    }

    pub fn index_of(&self, x: f64) -> usize {
        ((x / self.dx).round() as usize).min(self.last())
    }

    pub fn weight(&self, i: usize) -> f64 {
        if i == self.last() {
            0.5 * self.dx
        } else {
            self.dx
        }
    }

    /// Steps needed to reach `horizon`.
    pub fn steps_for(&self, horizon: f64) -> u64 {
        (horizon / self.dt - 1e-9).ceil().max(0.0) as u64
    }

    /// Discrete Laplacian with `u_0` pinned and the ghost `u_{N+1} = u_{N−1}`.
    pub fn laplacian(&self, u: &[f64], i: usize) -> f64 {
        let n = self.last();
        let h2 = self.dx * self.dx;
        match i {
            0 => 0.0,
            _ if i == n => 2.0 * (u[n - 1] - u[n]) / h2,
            _ => (u[i - 1] - 2.0 * u[i] + u[i + 1]) / h2,
        }
    }

    /// `Σ w_i f_i g_i`.
    pub fn pairing(&self, f: &[f64], g: &[f64]) -> f64 {
        f.iter()
            .zip(g)
            .enumerate()
            .map(|(i, (a, b))| self.weight(i) * a * b)
            .sum()
    }

    /// Check the observation point against the Neumann boundary: errors if
    /// `x_max < 4 x_obs`, and warns when `x_obs` lies within `2√t` of `x_max`.
    pub fn check_observation(&self, x_obs: f64, horizon: f64) -> Result<Option<String>, SheError> {
        if self.x_max < 4.0 * x_obs {
            return Err(SheError::DomainTooShort {
                x_obs,
                need: 4.0 * x_obs,
            });
        }
        let reach = 2.0 * horizon.max(0.0).sqrt();
        Ok((self.x_max - x_obs < reach).then(|| {
            format!(
                "observation at x = {x_obs} is within 2√t = {reach:.3} of the Neumann boundary at {}",
                self.x_max
            )
        }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SheState {
    pub u: Vec<f64>,
    /// Reflection mass accumulated per node since the start.
    pub eta_total: Vec<f64>,
    pub time: f64,
    pub steps: u64,
}

impl SheState {
    pub fn new(u0: Vec<f64>, grid: &SheGrid) -> Result<Self, SheError> {
        if u0.len() != grid.nodes() {
            return Err(SheError::InvalidInitial(format!(
                "{} values for {} nodes",
                u0.len(),
                grid.nodes()
            )));
        }
        if u0[0] != 0.0 {
            return Err(SheError::InvalidInitial("u0(0) must be 0".into()));
        }
        if let Some(v) = u0.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(SheError::InvalidInitial(format!("negative or non-finite value {v}")));
        }
        let n = u0.len();
        Ok(Self {
            u: u0,
            eta_total: vec![0.0; n],
            time: 0.0,
            steps: 0,
        })
    }
}

/// What happened in one step, for observers.
#[derive(Debug, Clone, Copy)]
pub struct StepRecord<'a> {
    pub grid: &'a SheGrid,
    /// Field before the step.
    pub before: &'a [f64],
    /// Standard Gaussians driving the step (zeros without noise).
    pub xi: &'a [f64],
    /// `(node, mass)` for every node that was projected.
    pub eta: &'a [(usize, f64)],
    /// Time at the end of the step.
    pub time: f64,
    pub step: u64,
}

pub trait SheObserver {
    fn on_step(&mut self, record: &StepRecord<'_>, after: &SheState);
}

impl SheObserver for () {
    fn on_step(&mut self, _: &StepRecord<'_>, _: &SheState) {}
}

impl<O: SheObserver + ?Sized> SheObserver for &mut O {
    fn on_step(&mut self, r: &StepRecord<'_>, s: &SheState) {
        (**self).on_step(r, s);
    }
}

impl<A: SheObserver, B: SheObserver> SheObserver for (A, B) {
    fn on_step(&mut self, r: &StepRecord<'_>, s: &SheState) {
        self.0.on_step(r, s);
        self.1.on_step(r, s);
    }
}

impl<O: SheObserver> SheObserver for Vec<O> {
    fn on_step(&mut self, r: &StepRecord<'_>, s: &SheState) {
        self.iter_mut().for_each(|o| o.on_step(r, s));
    }
}

/// Scratch buffers reused across steps.
#[derive(Debug, Default)]
pub struct SheWorkspace {
    before: Vec<f64>,
    xi: Vec<f64>,
    eta: Vec<(usize, f64)>,
}

/// One step driven by the given standard Gaussians `xi` (entry 0 unused).
pub fn she_step_with(
    state: &mut SheState,
    grid: &SheGrid,
    xi: &[f64],
    work: &mut SheWorkspace,
    mut observer: impl SheObserver,
) -> Result<(), SheError> {
    let n = grid.last();
    work.before.clear();
    work.before.extend_from_slice(&state.u);
    work.eta.clear();
    let u = &work.before;
    let s_int = (2.0 * grid.dt / grid.dx).sqrt();
    let s_end = (2.0 * grid.dt / grid.weight(n)).sqrt();
    let mut worst = 0.0f64;
    for i in 1..=n {
        let s = if i == n { s_end } else { s_int };
        let tilde = u[i] + grid.dt * grid.laplacian(u, i) + s * xi[i];
        worst = worst.max(tilde.abs());
        if tilde < 0.0 {
            let mass = grid.weight(i) * -tilde;
            work.eta.push((i, mass));
            state.eta_total[i] += mass;
            state.u[i] = 0.0;
        } else {
            state.u[i] = tilde;
        }
    }
    state.steps += 1;
    state.time = state.steps as f64 * grid.dt;
    if worst.is_nan() || worst > BLOWUP_LIMIT {
        return Err(SheError::Blowup {
            time: state.time,
            value: worst,
        });
    }
    debug_assert!(state.u.iter().all(|&v| v >= 0.0));
    let record = StepRecord {
        grid,
        before: &work.before,
        xi,
        eta: &work.eta,
        time: state.time,
        step: state.steps,
    };
    observer.on_step(&record, state);
    Ok(())
}

/// One step with fresh noise from `rng`, or none.
pub fn she_step<R: Rng + ?Sized>(
    state: &mut SheState,
    grid: &SheGrid,
    rng: Option<&mut R>,
    work: &mut SheWorkspace,
    observer: impl SheObserver,
) -> Result<(), SheError> {
    let mut xi = std::mem::take(&mut work.xi);
    xi.clear();
    xi.resize(grid.nodes(), 0.0);
    if let Some(rng) = rng {
        for v in xi.iter_mut().skip(1) {
            *v = rng.sample(StandardNormal);
        }
    }
    let out = she_step_with(state, grid, &xi, work, observer);
    work.xi = xi;
    out
}

/// Sparse space-time record of the reflection mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaRecord {
    pub bin_steps: u64,
    pub dt: f64,
    pub dx: f64,
    /// `(bin, node, mass)`, ordered by bin then node.
    pub cells: Vec<(u64, usize, f64)>,
    #[serde(skip)]
    open: std::collections::BTreeMap<usize, f64>,
    #[serde(skip)]
    open_bin: u64,
}

impl EtaRecord {
    pub fn new(grid: &SheGrid, bin_steps: u64) -> Self {
        assert!(bin_steps > 0);
        Self {
            bin_steps,
            dt: grid.dt,
            dx: grid.dx,
            cells: Vec::new(),
            open: Default::default(),
            open_bin: 0,
        }
    }

    fn flush(&mut self) {
        let bin = self.open_bin;
        self.cells
            .extend(std::mem::take(&mut self.open).into_iter().map(|(i, m)| (bin, i, m)));
    }

    pub fn finish(mut self) -> Self {
        self.flush();
        self
    }

    pub fn total_mass(&self) -> f64 {
        self.cells.iter().map(|c| c.2).sum::<f64>() + self.open.values().sum::<f64>()
    }

    /// CSV `t_start,t_end,x,mass`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t_start", "t_end", "x", "mass"])?;
        let span = self.bin_steps as f64 * self.dt;
        for &(bin, i, m) in &self.cells {
            w.serialize((bin as f64 * span, (bin + 1) as f64 * span, i as f64 * self.dx, m))?;
        }
        w.flush()?;
        Ok(())
    }
}

impl SheObserver for EtaRecord {
    fn on_step(&mut self, r: &StepRecord<'_>, _: &SheState) {
        let bin = (r.step - 1) / self.bin_steps;
        if bin != self.open_bin {
            self.flush();
            self.open_bin = bin;
        }
        for &(i, m) in r.eta {
            *self.open.entry(i).or_insert(0.0) += m;
        }
    }
}

/// The discrete weak form against a grid test function `φ` (`φ_0 = 0`):
/// `⟨u_t,φ⟩ = ⟨u_0,φ⟩ + ∫⟨u,Δφ⟩ + √2 W_t(φ) + ∫∫ φ dη`, all pairings weighted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakForm {
    pub phi: Vec<f64>,
    lap_phi: Vec<f64>,
    pub initial: f64,
    pub current: f64,
    pub drift: f64,
    pub noise: f64,
    pub reflection: f64,
    /// Largest per-step relative residual.
    pub max_step_residual: f64,
    /// Largest `Σ u_post · (η increment)` seen in one step.
    pub support_defect: f64,
}

impl WeakForm {
    pub fn new(phi: Vec<f64>, grid: &SheGrid, u0: &[f64]) -> Self {
        assert_eq!(phi.len(), grid.nodes());
        assert_eq!(phi[0], 0.0, "test function must vanish at the origin");
        let lap_phi = (0..phi.len()).map(|i| grid.laplacian(&phi, i)).collect();
        let initial = grid.pairing(u0, &phi);
        Self {
            phi,
            lap_phi,
            initial,
            current: initial,
            drift: 0.0,
            noise: 0.0,
            reflection: 0.0,
            max_step_residual: 0.0,
            support_defect: 0.0,
        }
    }

    pub fn residual(&self) -> f64 {
        self.current - self.initial - self.drift - self.noise - self.reflection
    }
}

impl SheObserver for WeakForm {
    fn on_step(&mut self, r: &StepRecord<'_>, after: &SheState) {
        let g = r.grid;
        let n = g.last();
        let drift = g.dt * g.pairing(r.before, &self.lap_phi);
        let noise: f64 = (1..=n)
            .map(|i| (2.0 * g.dt * g.weight(i)).sqrt() * r.xi[i] * self.phi[i])
            .sum();
        let refl: f64 = r.eta.iter().map(|&(i, m)| m * self.phi[i]).sum();
        let defect: f64 = r.eta.iter().map(|&(i, m)| after.u[i] * m).sum();
        let now = g.pairing(&after.u, &self.phi);
        let step_res = (now - self.current) - drift - noise - refl;
        let scale = [now, self.current, drift, noise, refl]
            .iter()
            .map(|v| v.abs())
            .fold(f64::MIN_POSITIVE, f64::max);
        self.max_step_residual = self.max_step_residual.max(step_res.abs() / scale);
        self.support_defect = self.support_defect.max(defect.abs());
        self.current = now;
        self.drift += drift;
        self.noise += noise;
        self.reflection += refl;
    }
}

/// Final state and η record of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SheRun {
    pub state: SheState,
    pub eta: EtaRecord,
}

/// Run from `u0` to `horizon` with noise from `stream` (or none), recording
/// η in bins of `bin_steps` steps.
pub fn she_run(
    u0: Vec<f64>,
    horizon: f64,
    grid: &SheGrid,
    stream: Option<RngStream>,
    bin_steps: u64,
    mut observer: impl SheObserver,
) -> Result<SheRun, SheError> {
    let mut state = SheState::new(u0, grid)?;
    let mut eta = EtaRecord::new(grid, bin_steps);
    let mut work = SheWorkspace::default();
    let mut rng = stream.map(|s| s.rng());
    for _ in 0..grid.steps_for(horizon) {
        she_step(&mut state, grid, rng.as_mut(), &mut work, (&mut eta, &mut observer))?;
    }
    Ok(SheRun {
        state,
        eta: eta.finish(),
    })
}

/// CSV `x,u`.
pub fn write_field_csv<W: Write>(grid: &SheGrid, u: &[f64], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "u"])?;
    for (i, v) in u.iter().enumerate() {
        w.serialize((grid.x(i), v))?;
    }
    w.flush()?;
    Ok(())
}

/// Single-column CSV of replica samples.
pub fn write_samples_csv<W: Write>(header: &str, samples: &[f64], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([header])?;
    for v in samples {
        w.serialize([v])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SimRng;

    fn hat(grid: &SheGrid, c: f64, r: f64) -> Vec<f64> {
        (0..grid.nodes())
            .map(|i| if i == 0 { 0.0 } else { (1.0 - (grid.x(i) - c).abs() / r).max(0.0) })
            .collect()
    }

    #[test]
    fn grid_validation() {
        assert!(matches!(SheGrid::new(0.1, 0.003, 1.0), Err(SheError::Unstable { .. })));
        assert!(SheGrid::new(0.1, 0.0025, 1.0).is_ok());
        assert!(SheGrid::new(0.1, 0.001, 1.05).is_err());
        let g = SheGrid::with_max_step(0.01, 4.0).unwrap();
        assert_eq!(g.nodes(), 401);
        assert_eq!(g.steps_for(0.5), 20_000);
        assert!(g.check_observation(1.0, 0.5).unwrap().is_none());
        assert!(g.check_observation(1.5, 0.5).is_err());
        assert!(SheGrid::with_max_step(0.01, 1.0).unwrap().check_observation(0.25, 1.0).unwrap().is_some());
    }

    #[test]
    fn zero_stays_zero() {
        let g = SheGrid::with_max_step(0.05, 2.0).unwrap();
        let run = she_run(vec![0.0; g.nodes()], 0.2, &g, None, 10, ()).unwrap();
        assert!(run.state.u.iter().all(|&v| v == 0.0));
        assert_eq!(run.eta.total_mass(), 0.0);
    }

    #[test]
    fn deterministic_heat_flow_of_a_hat() {
        let g = SheGrid::with_max_step(0.02, 4.0).unwrap();
        let u0 = hat(&g, 1.0, 0.5);
        let ones = {
            let mut v = vec![1.0; g.nodes()];
            v[0] = 0.0;
            v
        };
        let mut wf = WeakForm::new(hat(&g, 2.0, 1.5), &g, &u0);
        let mut state = SheState::new(u0.clone(), &g).unwrap();
        let mut work = SheWorkspace::default();
        let mut mass = g.pairing(&u0, &ones);
        for _ in 0..2000 {
            she_step::<SimRng>(&mut state, &g, None, &mut work, &mut wf).unwrap();
            assert!(work.eta.is_empty());
            // mass changes only by the flux through the origin, dt·u_1/dx
            let flux = g.dt * (work.before[1] - 0.0) / g.dx;
            let now = g.pairing(&state.u, &ones);
            assert!((mass - now - flux).abs() < 1e-12, "{}", mass - now - flux);
            mass = now;
        }
        assert!(wf.max_step_residual < 1e-12);
        assert_eq!(wf.noise, 0.0);
        assert_eq!(wf.reflection, 0.0);
        assert!(wf.residual().abs() < 1e-10);
    }

    #[test]
    fn forced_negative_value_is_projected() {
        let g = SheGrid::with_max_step(0.1, 1.0).unwrap();
        let mut u0 = vec![0.5; g.nodes()];
        u0[0] = 0.0;
        let mut state = SheState::new(u0.clone(), &g).unwrap();
        let mut xi = vec![0.0; g.nodes()];
        xi[4] = -30.0;
        let mut work = SheWorkspace::default();
        she_step_with(&mut state, &g, &xi, &mut work, ()).unwrap();
        let tilde = u0[4] + g.dt * g.laplacian(&u0, 4) + (2.0 * g.dt / g.dx).sqrt() * xi[4];
        assert!(tilde < 0.0);
        assert_eq!(state.u[4], 0.0);
        assert_eq!(work.eta, vec![(4, -tilde * g.dx)]);
        assert_eq!(state.eta_total[4], -tilde * g.dx);
    }

    #[test]
    fn noisy_run_keeps_weak_form_and_support_condition() {
        let g = SheGrid::with_max_step(0.05, 4.0).unwrap();
        let mut rng = RngStream::new(3, 1).rng();
        let u0 = super::super::sample_bessel3(g.dx, g.nodes(), &mut rng).values;
        let mut forms = vec![
            WeakForm::new(hat(&g, 1.0, 0.5), &g, &u0),
            WeakForm::new(hat(&g, 0.3, 0.25), &g, &u0),
            WeakForm::new((0..g.nodes()).map(|i| g.x(i).sin()).collect(), &g, &u0),
        ];
        let run = she_run(u0, 0.5, &g, Some(RngStream::new(3, 2)), 50, &mut forms).unwrap();
        assert!(run.state.u.iter().all(|&v| v >= 0.0));
        assert!(run.eta.total_mass() > 0.0);
        assert!(run.eta.cells.iter().all(|c| c.2 > 0.0));
        let by_node: f64 = run.state.eta_total.iter().sum();
        assert!((by_node - run.eta.total_mass()).abs() < 1e-12 * by_node);
        for f in &forms {
            assert!(f.max_step_residual <= 1e-8, "{}", f.max_step_residual);
            assert_eq!(f.support_defect, 0.0);
            let scale = f.current.abs().max(f.drift.abs()).max(f.noise.abs());
            assert!(f.residual().abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn blowup_guard() {
        let g = SheGrid::with_max_step(0.1, 1.0).unwrap();
        let mut state = SheState::new(vec![0.0; g.nodes()], &g).unwrap();
        let mut xi = vec![0.0; g.nodes()];
        xi[3] = 1e9;
        let err = she_step_with(&mut state, &g, &xi, &mut SheWorkspace::default(), ()).unwrap_err();
        assert!(matches!(err, SheError::Blowup { .. }));
    }

    #[test]
    fn csv_exports() {
        let g = SheGrid::with_max_step(0.5, 1.0).unwrap();
        let mut buf = Vec::new();
        write_field_csv(&g, &[0.0, 1.0, 2.0], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "x,u\n0.0,0.0\n0.5,1.0\n1.0,2.0\n");
        let mut buf = Vec::new();
        write_samples_csv("u", &[0.25], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "u\n0.25\n");
    }
}
