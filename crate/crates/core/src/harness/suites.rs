//! One function per acceptance criterion. Every replica draws from its own
//! stream, keyed by `(plan seed, criterion, part)` and the replica index, and
//! results are reduced in replica order.

use rand::Rng;

use super::plan::ExperimentPlan;
use super::report::{BracketRow, Check, Comparison, CriterionReport, Statistic};
use super::HarnessError;
use crate::continuum::{bessel3_marginal_cdf, sample_bessel3, she_run, SheGrid};
use crate::dynamics::{InterfaceState, Simulation};
use crate::observables::{
    brownian_control, c_coef, c_rho_norm, fourier_hat, fourier_quadrature, holder_cb, increment_norms,
    increment_scaling, norm_w_s1_r, InterpolationGap, ReflectionRecorder, RescaledInterface, SemiDiscreteAccumulator,
    SiteWeights,
};
use crate::replica::map_replicas;
use crate::rng::{RngStream, SimRng};
use crate::stats::{discrete_ks, ks_test, loglog_slope, RunningStats};
use crate::testfn::TestFunction;
use crate::walk::{
    corner_density_statistic, exact_pmf, moment_growth_check, occupation_statistic, sample_coupled_pair,
    sample_pi_path, MomentKind,
};

use Comparison::{AtLeast, AtMost, Below, Equal};

fn stream(plan: &ExperimentPlan, criterion: u32, part: u64, replica: u64) -> RngStream {
    RngStream::new(RngStream::derive(plan.seed, criterion as u64 * 1000 + part), replica)
}

fn rng(plan: &ExperimentPlan, criterion: u32, part: u64, replica: u64) -> SimRng {
    stream(plan, criterion, part, replica).rng()
}

/// A configuration of `lattice_size` flipping sites drawn from π.
pub(crate) fn pi_state<R: Rng + ?Sized>(lattice_size: usize, rng: &mut R) -> InterfaceState {
    InterfaceState::from_valid(sample_pi_path(lattice_size + 1, rng).into_values(), 0.0)
}

fn stats_of(xs: impl IntoIterator<Item = f64>) -> RunningStats {
    let mut s = RunningStats::new();
    xs.into_iter().for_each(|x| s.push(x));
    s
}

fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

fn first_error<T, E>(results: Vec<Result<T, E>>) -> Result<Vec<T>, E> {
    results.into_iter().collect()
}

/// ε values from coarse to fine.
fn coarse_to_fine(eps: &[f64]) -> Vec<f64> {
    let mut v = eps.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

pub(crate) fn identity(plan: &ExperimentPlan) -> Result<CriterionReport, HarnessError> {
    let c = &plan.identity;
    let phi = plan.test_function;
    let per_eps = plan.replicas_or(c.runs / c.epsilons.len() as u64);
    let mut checks = Vec::new();
    let mut statistics = Vec::new();
    let (mut worst_residual, mut worst_jump) = (0.0f64, 0.0f64);
    for (ei, &eps) in c.epsilons.iter().enumerate() {
        let w = SiteWeights::new(&phi, eps, c.lattice_size)?;
        let tau = c.horizon / (eps * eps);
        let cps: Vec<f64> = (1..=c.checkpoints).map(|j| j as f64 * tau / (c.checkpoints + 1) as f64).collect();
        let part = 10 * ei as u64;
        let out = map_replicas(per_eps, plan.parallelism, |r| {
            let state = pi_state(c.lattice_size, &mut rng(plan, 1, part, r));
            let mut acc = SemiDiscreteAccumulator::new(&w, &state, &cps);
            let mut sim = Simulation::new(state, stream(plan, 1, part + 1, r));
            sim.run_until(tau, &mut acc);
            acc.finish(sim.state());
            let snaps = acc.snapshots();
            (
                snaps.iter().map(|s| s.residual_rel).fold(0.0, f64::max),
                snaps.iter().map(|s| s.max_jump_ratio).fold(0.0, f64::max),
            )
        });
        let res = out.iter().map(|o| o.0).fold(0.0, f64::max);
        worst_residual = worst_residual.max(res);
        worst_jump = worst_jump.max(out.iter().map(|o| o.1).fold(0.0, f64::max));
        statistics.push(Statistic::new(format!("relative residual, eps={eps}"), &stats_of(out.iter().map(|o| o.0))));
    }
    checks.push(Check::new("max relative residual", worst_residual, AtMost, c.max_relative_residual));
    checks.push(Check::new("max noise jump / (sqrt2 eps^1.5 |phi|_inf)", worst_jump, AtMost, 1.0));
    Ok(CriterionReport::new(1, "semi-discrete identity", true, checks, statistics))
}

pub(crate) fn stationarity(plan: &ExperimentPlan) -> Result<CriterionReport, HarnessError> {
    let c = &plan.stationarity;
    let n = plan.replicas_or(c.replicas);
    let samples = map_replicas(n, plan.parallelism, |r| {
        let state = pi_state(c.lattice_size, &mut rng(plan, 2, 0, r));
        let mut sim = Simulation::new(state, stream(plan, 2, 1, r));
        sim.run_until(c.horizon, ());
        c.sites.iter().map(|&k| sim.state().height(k) as i64).collect::<Vec<_>>()
    });
    let mut checks = Vec::new();
    let mut statistics = Vec::new();
    for (j, &site) in c.sites.iter().enumerate() {
        let col: Vec<i64> = samples.iter().map(|s| s[j]).collect();
        let pmf = exact_pmf(site)?;
        let ks = discrete_ks(&col, &pmf.probabilities)?;
        checks.push(Check::new(format!("KS D at n={site}"), ks.d, AtMost, c.max_ks));
        statistics.push(Statistic::new(format!("h({site})"), &stats_of(col.iter().map(|&v| v as f64))));
    }
    Ok(CriterionReport::new(2, "stationarity of the truncated dynamics", true, checks, statistics))
}

struct CornerStats {
    density: RunningStats,
    occupation: RunningStats,
    occupation_small: RunningStats,
}

fn corner_runs(plan: &ExperimentPlan) -> Result<CornerStats, HarnessError> {
    let c = &plan.corners;
    let phi = plan.test_function;
    let steps = (phi.support_bound() * c.scale as f64).ceil() as usize + 1;
    let out = map_replicas(plan.replicas_or(c.paths), plan.parallelism, |r| {
        let path = sample_pi_path(steps, &mut rng(plan, 3, 0, r));
        Ok::<_, HarnessError>((
            corner_density_statistic(&path, &phi, c.scale as f64)?,
            occupation_statistic(&path, c.level, &phi, c.scale as f64)?,
            occupation_statistic(&path, c.level, &phi, c.small_scale as f64)?,
        ))
    });
    let out = first_error(out)?;
    Ok(CornerStats {
        density: stats_of(out.iter().map(|o| o.0)),
        occupation: stats_of(out.iter().map(|o| o.1)),
        occupation_small: stats_of(out.iter().map(|o| o.2)),
    })
}

pub(crate) fn corners_and_transience(
    plan: &ExperimentPlan,
    want: &[u32],
) -> Result<Vec<CriterionReport>, HarnessError> {
    let c = &plan.corners;
    let s = corner_runs(plan)?;
    let integral = plan.test_function.integral();
    let mut out = Vec::new();
    if want.contains(&3) {
        let dev = (s.density.mean - 0.5 * integral).abs();
        out.push(CriterionReport::new(
            3,
            "corner density",
            true,
            vec![Check::new("|mean - int(phi)/2| / int(phi)", dev / integral, AtMost, c.density_rel_tol)],
            vec![Statistic::new(format!("corner statistic, N={}", c.scale), &s.density)],
        ));
    }
    if want.contains(&4) {
        out.push(CriterionReport::new(
            4,
            "transience",
            true,
            vec![
                Check::new("mean / int(phi)", s.occupation.mean / integral, AtMost, c.transience_rel_tol),
                Check::new(
                    format!("mean at N={} minus mean at N={}", c.scale, c.small_scale),
                    s.occupation.mean - s.occupation_small.mean,
                    Below,
                    0.0,
                ),
            ],
            vec![
                Statistic::new(format!("occupation of level {}, N={}", c.level, c.scale), &s.occupation),
                Statistic::new(format!("occupation of level {}, N={}", c.level, c.small_scale), &s.occupation_small),
            ],
        ));
    }
    Ok(out)
}

fn binomial_pmf(n: usize) -> Vec<f64> {
    let ln_c = |k: usize| libm::lgamma(n as f64 + 1.0) - libm::lgamma(k as f64 + 1.0) - libm::lgamma((n - k) as f64 + 1.0);
    (0..=n)
        .map(|k| (ln_c(k) - n as f64 * std::f64::consts::LN_2).exp())
        .collect()
}

pub(crate) fn coupling(plan: &ExperimentPlan) -> Result<CriterionReport, HarnessError> {
    let c = &plan.coupling;
    let long = first_error(map_replicas(plan.replicas_or(c.pairs), plan.parallelism, |r| {
        let pair = sample_coupled_pair(c.length, &mut rng(plan, 9, 0, r))?;
        Ok::<_, HarnessError>((pair.domination_violations(), pair.x.at(c.length) as i64, pair.s[c.length]))
    }))?;
    let short = first_error(map_replicas(plan.replicas_or(c.marginal_pairs), plan.parallelism, |r| {
        let pair = sample_coupled_pair(2, &mut rng(plan, 9, 1, r))?;
        Ok::<_, HarnessError>((pair.x.at(2) == 2, pair.s[2] == 0))
    }))?;
    let violations: usize = long.iter().map(|o| o.0).sum();
    let nshort = short.len() as f64;
    let p_x = short.iter().filter(|o| o.0).count() as f64 / nshort;
    let p_s = short.iter().filter(|o| o.1).count() as f64 / nshort;
    let x_end: Vec<i64> = long.iter().map(|o| o.1).collect();
    let s_half: Vec<i64> = long.iter().map(|o| (o.2 + c.length as i64) / 2).collect();
    let ks_x = discrete_ks(&x_end, &exact_pmf(c.length)?.probabilities)?;
    let ks_s = discrete_ks(&s_half, &binomial_pmf(c.length))?;
    let checks = vec![
        Check::new("pathwise domination violations", violations as f64, Equal, 0.0),
        Check::new("|P(X_2=2) - 3/4| / (3/4)", (p_x - 0.75).abs() / 0.75, AtMost, c.marginal_rel_tol),
        Check::new("|P(S_2=0) - 1/2| / (1/2)", (p_s - 0.5).abs() / 0.5, AtMost, c.marginal_rel_tol),
        Check::new(format!("KS p-value of X_{} vs exact law", c.length), ks_x.p_value, AtLeast, c.marginal_min_p),
        Check::new(format!("KS p-value of S_{} vs simple walk", c.length), ks_s.p_value, AtLeast, c.marginal_min_p),
    ];
    let statistics = vec![
        Statistic::new(format!("X_{}", c.length), &stats_of(x_end.iter().map(|&v| v as f64))),
        Statistic::new(format!("S_{}", c.length), &stats_of(long.iter().map(|o| o.2 as f64))),
    ];
    Ok(CriterionReport::new(9, "coupling domination", true, checks, statistics))
}

pub(crate) fn static_invariance(plan: &ExperimentPlan) -> Result<CriterionReport, HarnessError> {
    let c = &plan.static_invariance;
    let m = (c.x / c.epsilon + 1e-9).floor() as usize;
    let scale = c.epsilon.sqrt();
    let samples = map_replicas(plan.replicas_or(c.samples), plan.parallelism, |r| {
        scale * sample_pi_path(m, &mut rng(plan, 11, 0, r)).at(m) as f64
    });
    let cdf = |v: f64| bessel3_marginal_cdf(c.x, v);
    let ks = ks_test(&samples, cdf)?;
    // distance of the exact lattice law itself, before sampling noise
    let pmf = exact_pmf(m)?;
    let mut acc = 0.0;
    let mut population = 0.0f64;
    for k in pmf.support() {
        let f = cdf(scale * k as f64);
        population = population.max((acc - f).abs());
        acc += pmf.prob(k);
        population = population.max((acc - f).abs());
    }
    let mut report = CriterionReport::new(
        11,
        "static invariance principle",
        true,
        vec![Check::new("KS D", ks.d, AtMost, c.max_ks)],
        vec![Statistic::new(format!("sqrt(eps) X_{m}"), &stats_of(samples.iter().copied()))],
    );
    if population > c.max_ks {
        report.warnings.push(format!(
            "the exact law of sqrt(eps) X_{m} is already at KS distance {population:.4} from the limit"
        ));
    }
    Ok(report)
}

pub(crate) fn moments(plan: &ExperimentPlan) -> Result<CriterionReport, HarnessError> {
    let c = &plan.moments;
    let table = moment_growth_check(
        &c.orders,
        &c.lengths,
        plan.replicas_or(c.replicas),
        stream(plan, 13, 0, 0),
        plan.parallelism,
    )?;
    let mut checks = Vec::new();
    let mut statistics = Vec::new();
    for row in &table.rows {
        let label = match row.kind {
            MomentKind::Marginal => "marginal",
            MomentKind::Increment => "increment",
            MomentKind::SimpleWalkControl => "simple-walk control",
        };
        let name = format!("{label} slope, k={}", row.order);
        if row.kind != MomentKind::SimpleWalkControl {
            checks.push(Check::new(name.clone(), row.slope.slope, AtMost, row.order as f64 + c.slope_margin));
        }
        statistics.push(Statistic {
            name,
            mean: row.slope.slope,
            stderr: row.slope.stderr,
            replicas: table.replicas,
        });
    }
    let warnings = if table.low_replica_warning {
        vec!["fewer than 1000 replicas: slopes may be unstable".into()]
    } else {
        vec![]
    };
    Ok(CriterionReport::new(13, "moment exponents", true, checks, statistics).with_warnings(warnings))
}

/// Per-ε aggregates of the bracket runs.
pub(crate) struct BracketRuns {
    pub rows: Vec<BracketRow>,
    bracket_err: Vec<RunningStats>,
    a2: Vec<RunningStats>,
    abs_r: Vec<RunningStats>,
}

struct BracketSample {
    bracket_err: f64,
    a1: f64,
    a2: f64,
    abs_r: f64,
    eta_mass: f64,
    support_gap: f64,
    residual: f64,
}

pub(crate) fn bracket_runs(plan: &ExperimentPlan) -> Result<BracketRuns, HarnessError> {
    let c = &plan.bracket;
    let phi = plan.test_function;
    let target = c.horizon * phi.l2_norm_sq();
    let n = plan.replicas_or(c.replicas);
    let mut runs = BracketRuns {
        rows: Vec::new(),
        bracket_err: Vec::new(),
        a2: Vec::new(),
        abs_r: Vec::new(),
    };
    for (ei, &eps) in coarse_to_fine(&c.epsilons).iter().enumerate() {
        let w = SiteWeights::new(&phi, eps, c.lattice_size)?;
        let tau = c.horizon / (eps * eps);
        let part = 10 * ei as u64;
        let samples = map_replicas(n, plan.parallelism, |r| {
            let state = pi_state(c.lattice_size, &mut rng(plan, 5, part, r));
            let mut acc = SemiDiscreteAccumulator::new(&w, &state, &[]);
            let mut refl = ReflectionRecorder::new(&state, eps, c.bin_width);
            let mut sim = Simulation::new(state, stream(plan, 5, part + 1, r));
            sim.run_until(tau, (&mut acc, &mut refl));
            let s = acc.finish(sim.state());
            let eta = refl.finish();
            let gap = [
                eta.support_identity(|x| phi.value(x)).relative_gap,
                eta.support_identity(|x| (-x).exp()).relative_gap,
            ];
            BracketSample {
                bracket_err: (s.bracket() - target).abs(),
                a1: s.a1,
                a2: s.a2,
                abs_r: s.r_eps.abs(),
                eta_mass: s.eta_mass,
                support_gap: gap[0].max(gap[1]),
                residual: s.residual_rel,
            }
        });
        let be = stats_of(samples.iter().map(|s| s.bracket_err));
        let a2 = stats_of(samples.iter().map(|s| s.a2));
        let ar = stats_of(samples.iter().map(|s| s.abs_r));
        runs.rows.push(BracketRow {
            epsilon: eps,
            replicas: n,
            bracket_error_mean: be.mean,
            bracket_error_stderr: be.stderr(),
            a1_mean: stats_of(samples.iter().map(|s| s.a1)).mean,
            a2_mean: a2.mean,
            a2_stderr: a2.stderr(),
            abs_r_mean: ar.mean,
            abs_r_stderr: ar.stderr(),
            eta_mass_mean: stats_of(samples.iter().map(|s| s.eta_mass)).mean,
            max_support_gap: samples.iter().map(|s| s.support_gap).fold(0.0, f64::max),
            max_residual: samples.iter().map(|s| s.residual).fold(0.0, f64::max),
        });
        runs.bracket_err.push(be);
        runs.a2.push(a2);
        runs.abs_r.push(ar);
    }
    Ok(runs)
}

fn per_eps_stats(name: &str, rows: &[BracketRow], stats: &[RunningStats]) -> Vec<Statistic> {
    rows.iter()
        .zip(stats)
        .map(|(row, s)| Statistic::new(format!("{name}, eps={}", row.epsilon), s))
        .collect()
}

pub(crate) fn bracket_criteria(
    plan: &ExperimentPlan,
    runs: &BracketRuns,
    want: &[u32],
) -> Result<Vec<CriterionReport>, HarnessError> {
    let c = &plan.bracket;
    let norm = plan.test_function.l2_norm_sq();
    let finest = runs.rows.last().expect("at least one ε");
    let means = |s: &[RunningStats]| s.iter().map(|s| s.mean).collect::<Vec<_>>();
    let mut out = Vec::new();
    if want.contains(&5) {
        out.push(CriterionReport::new(
            5,
            "bracket convergence",
            true,
            vec![
                Check::flag("E|bracket - t|phi|^2| decreasing in eps", strictly_decreasing(&means(&runs.bracket_err))),
                Check::new(
                    format!("E|bracket - t|phi|^2| / |phi|^2 at eps={}", finest.epsilon),
                    finest.bracket_error_mean / norm,
                    AtMost,
                    c.bracket_rel_tol,
                ),
            ],
            per_eps_stats("|bracket - t|phi|^2|", &runs.rows, &runs.bracket_err),
        ));
    }
    if want.contains(&6) {
        out.push(CriterionReport::new(
            6,
            "returns to zero",
            true,
            vec![
                Check::flag("E[A2] decreasing in eps", strictly_decreasing(&means(&runs.a2))),
                Check::new(
                    format!("E[A2] / |phi|^2 at eps={}", finest.epsilon),
                    finest.a2_mean / norm,
                    AtMost,
                    c.returns_rel_tol,
                ),
            ],
            per_eps_stats("A2", &runs.rows, &runs.a2),
        ));
    }
    if want.contains(&7) {
        let gap = runs.rows.iter().map(|r| r.max_support_gap).fold(0.0, f64::max);
        out.push(CriterionReport::new(
            7,
            "support condition",
            true,
            vec![Check::new("max relative gap of the support identity", gap, AtMost, c.support_rel_tol)],
            runs.rows
                .iter()
                .map(|r| Statistic {
                    name: format!("eta mass, eps={}", r.epsilon),
                    mean: r.eta_mass_mean,
                    stderr: 0.0,
                    replicas: r.replicas,
                })
                .collect(),
        ));
    }
    if want.contains(&8) {
        let pairs: Vec<(f64, f64)> = runs.rows.iter().map(|r| (r.epsilon, r.abs_r_mean)).collect();
        let slope = loglog_slope(&pairs)?;
        let mut stats = per_eps_stats("|R_eps|", &runs.rows, &runs.abs_r);
        stats.push(Statistic {
            name: "log-log slope of E|R_eps| vs eps".into(),
            mean: slope.slope,
            stderr: slope.stderr,
            replicas: finest.replicas,
        });
        out.push(CriterionReport::new(
            8,
            "error term",
            true,
            vec![
                Check::flag("E|R_eps| decreasing in eps", strictly_decreasing(&means(&runs.abs_r))),
                Check::new("log-log slope", slope.slope, AtLeast, c.error_min_slope),
            ],
            stats,
        ));
    }
    Ok(out)
}

pub(crate) fn fourier(plan: &ExperimentPlan) -> Result<CriterionReport, HarnessError> {
    let c = &plan.fourier;
    let eps = c.epsilon;
    let zmax = 4.0 * std::f64::consts::PI / eps;
    let out = first_error(map_replicas(plan.replicas_or(c.functions), plan.parallelism, |r| {
        let mut rng = rng(plan, 10, 0, r);
        let mut g: Vec<f64> = (0..c.points).map(|_| rng.random_range(-1.0..1.0)).collect();
        g[0] = 0.0;
        let zeta: Vec<f64> = (0..c.frequencies).map(|_| rng.random_range(-zmax..zmax)).collect();
        let neg: Vec<f64> = zeta.iter().map(|z| -z).collect();
        let f = fourier_hat(&g, eps, &zeta)?;
        let fneg = fourier_hat(&g, eps, &neg)?;
        let mut err = 0.0f64;
        let mut herm = 0.0f64;
        for ((z, v), w) in zeta.iter().zip(&f.values).zip(&fneg.values) {
            err = err.max((v - fourier_quadrature(&g, eps, *z, 24)).norm());
            herm = herm.max((v - w.conj()).norm());
        }
        Ok::<_, HarnessError>((err, herm))
    }))?;
    let err = out.iter().map(|o| o.0).fold(0.0, f64::max);
    let herm = out.iter().map(|o| o.1).fold(0.0, f64::max);
    let span = 40.0 * std::f64::consts::PI / eps;
    let outside = (0..c.c_grid_points)
        .filter(|&i| {
            let z = -span + 2.0 * span * i as f64 / (c.c_grid_points - 1) as f64;
            !(0.0..=eps).contains(&c_coef(z, eps))
        })
        .count();
    Ok(CriterionReport::new(
        10,
        "lattice Fourier identity",
        true,
        vec![
            Check::new("max |lattice sum - quadrature|", err, AtMost, c.tolerance),
            Check::new("max Hermitian defect", herm, AtMost, c.tolerance),
            Check::new("c(zeta, eps) outside [0, eps]", outside as f64, Equal, 0.0),
        ],
        vec![Statistic::new("quadrature error", &stats_of(out.iter().map(|o| o.0)))],
    ))
}

pub(crate) fn increments(plan: &ExperimentPlan) -> Result<CriterionReport, HarnessError> {
    let c = &plan.increments;
    let p = &plan.norms;
    let eps = c.epsilon;
    let tau = c.lags.iter().copied().fold(0.0, f64::max) / (eps * eps) + 1.0;
    let phi_bound = plan.test_function.support_bound();
    let out = first_error(map_replicas(plan.replicas_or(c.replicas), plan.parallelism, |r| {
        let state = pi_state(c.lattice_size, &mut rng(plan, 14, 0, r));
        let g0 = RescaledInterface::new(&state, eps).weighted(p.rho);
        let mut sim = Simulation::new(state, stream(plan, 14, 1, r));
        let history = sim.run_recorded(tau, ());
        let norms = increment_norms(&history, eps, p.rho, p.s0, &c.lags)?;
        let w = norm_w_s1_r(g0.grid_values(), eps, p.s1, p.r, (0.0, phi_bound), 2)?.norm;
        let cb = holder_cb(g0.grid_values(), eps, p.b)?;
        let cr = c_rho_norm(g0.grid_values(), eps, p.rho)?;
        Ok::<_, HarnessError>((norms, [w, cb, cr]))
    }))?;
    let norms: Vec<Vec<f64>> = out.iter().map(|o| o.0.clone()).collect();
    let scaling = increment_scaling(&norms, &c.lags, eps * eps)?;
    let control = brownian_control(&c.lags, c.control_replicas as usize, stream(plan, 14, 2, 0))?;

    let mut gap_means = Vec::new();
    for (ei, &ge) in coarse_to_fine(&c.gap_epsilons).iter().enumerate() {
        let size = ((phi_bound + 2.0 * c.gap_horizon.sqrt()) / ge).ceil() as usize;
        let gaps = map_replicas(plan.replicas_or(c.gap_replicas), plan.parallelism, |r| {
            let state = pi_state(size, &mut rng(plan, 14, 10 + 2 * ei as u64, r));
            let mut gap = InterpolationGap::new(&state, ge, p.rho);
            let mut sim = Simulation::new(state, stream(plan, 14, 11 + 2 * ei as u64, r));
            sim.run_until(c.gap_horizon / (ge * ge), &mut gap);
            gap.finish().0
        });
        gap_means.push((ge, stats_of(gaps)));
    }

    let mut statistics: Vec<Statistic> = c
        .lags
        .iter()
        .zip(scaling.mean.iter().zip(&scaling.stderr))
        .map(|(lag, (m, s))| Statistic {
            name: format!("E|g(t) - g(0)|_H^-s0, t={lag}"),
            mean: *m,
            stderr: *s,
            replicas: scaling.replicas as u64,
        })
        .collect();
    statistics.push(Statistic {
        name: "increment slope".into(),
        mean: scaling.slope.slope,
        stderr: scaling.slope.stderr,
        replicas: scaling.replicas as u64,
    });
    statistics.push(Statistic {
        name: "Brownian control slope".into(),
        mean: control.slope.slope,
        stderr: control.slope.stderr,
        replicas: c.control_replicas,
    });
    for (k, name) in ["W^{s1,r} norm of g(0)", "C^b norm of g(0)", "C_rho norm of g(0)"].iter().enumerate() {
        statistics.push(Statistic::new(*name, &stats_of(out.iter().map(|o| o.1[k]))));
    }
    for (ge, s) in &gap_means {
        statistics.push(Statistic::new(format!("interpolation gap, eps={ge}"), s));
    }

    let mut warnings = Vec::new();
    if scaling.slope.slope < c.warn_below_slope {
        warnings.push(format!(
            "increment slope {:.3} below {}",
            scaling.slope.slope, c.warn_below_slope
        ));
    }
    let gm: Vec<f64> = gap_means.iter().map(|g| g.1.mean).collect();
    if !strictly_decreasing(&gm) {
        warnings.push(format!("interpolation gap not decreasing in eps: {gm:?}"));
    }
    Ok(CriterionReport::new(
        14,
        "increment scaling (diagnostic)",
        false,
        vec![Check::new("increment slope", scaling.slope.slope, AtLeast, c.warn_below_slope)],
        statistics,
    )
    .with_warnings(warnings))
}

pub(crate) fn she(plan: &ExperimentPlan) -> Result<CriterionReport, HarnessError> {
    let c = &plan.she;
    let grid = match c.dt {
        Some(dt) => SheGrid::new(c.dx, dt, c.x_max)?,
        None => SheGrid::with_max_step(c.dx, c.x_max)?,
    };
    let mut warnings: Vec<String> = grid.check_observation(c.x_obs, c.horizon)?.into_iter().collect();
    let obs = grid.index_of(c.x_obs);
    let out = first_error(map_replicas(plan.replicas_or(c.replicas), plan.parallelism, |r| {
        let u0 = sample_bessel3(grid.dx, grid.nodes(), &mut rng(plan, 12, 0, r)).values;
        let run = she_run(u0, c.horizon, &grid, Some(stream(plan, 12, 1, r)), c.bin_steps, ())?;
        Ok::<_, HarnessError>((run.state.u[obs], run.eta.total_mass()))
    }))?;
    let samples: Vec<f64> = out.iter().map(|o| o.0).collect();
    let x = grid.x(obs);
    let ks = ks_test(&samples, |v| bessel3_marginal_cdf(x, v))?;
    if ks.d > c.max_ks {
        warnings.push(format!("KS p-value {:.3e}", ks.p_value));
    }
    Ok(CriterionReport::new(
        12,
        "Bessel(3) invariance of the reflected SHE",
        true,
        vec![Check::new(format!("KS D at x={x}"), ks.d, AtMost, c.max_ks)],
        vec![
            Statistic::new(format!("u(t, {x})"), &stats_of(samples.iter().copied())),
            Statistic::new("eta total mass", &stats_of(out.iter().map(|o| o.1))),
        ],
    )
    .with_warnings(warnings))
}
