use serde::{Deserialize, Serialize};

use super::kernel::{sample_pi_path, sample_srw, WalkPath};
use super::WalkError;
use crate::replica::map_replicas;
use crate::rng::RngStream;
use crate::stats::{loglog_slope, RunningStats, Slope};
use crate::testfn::TestFunction;

fn check_length(path: &WalkPath, phi: &dyn TestFunction, scale: f64) -> Result<(), WalkError> {
    let need = (phi.support_bound() * scale).ceil() as usize + 1;
    if path.steps() < need {
        Err(WalkError::PathTooShort {
            steps: path.steps(),
            need,
        })
    } else {
        Ok(())
    }
}

/// `(1/N) Σ_n 1{ΔX_n ≠ 0} φ(n/N)`.
pub fn corner_density_statistic(path: &WalkPath, phi: &dyn TestFunction, scale: f64) -> Result<f64, WalkError> {
    check_length(path, phi, scale)?;
    let sum: f64 = (1..path.steps())
        .filter(|&n| path.is_corner(n))
        .map(|n| phi.value(n as f64 / scale))
        .sum();
    Ok(sum / scale)
}

/// `(1/N) Σ_n 1{X_n = k} φ(n/N)`.
pub fn occupation_statistic(path: &WalkPath, level: u32, phi: &dyn TestFunction, scale: f64) -> Result<f64, WalkError> {
    check_length(path, phi, scale)?;
    let sum: f64 = (0..=path.steps())
        .filter(|&n| path.at(n) == level)
        .map(|n| phi.value(n as f64 / scale))
        .sum();
    Ok(sum / scale)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentKind {
    /// `E[X_n^{2k}]` against `n`.
    Marginal,
    /// `E[(X_n − X_{n/2})^{2k}]` against `n/2`.
    Increment,
    /// `E[S_n^{2k}]` for the simple walk, against `n`.
    SimpleWalkControl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub kind: MomentKind,
    pub order: u32,
    /// `(lag, mean, stderr)` per length.
    pub points: Vec<(f64, f64, f64)>,
    pub slope: Slope,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentTable {
    pub replicas: u64,
    pub rows: Vec<MomentRow>,
    /// Fewer than 1000 replicas: slopes may be unstable.
    pub low_replica_warning: bool,
}

impl MomentTable {
    pub fn row(&self, kind: MomentKind, order: u32) -> Option<&MomentRow> {
        self.rows.iter().find(|r| r.kind == kind && r.order == order)
    }
}

/// Log-log growth exponents of even moments of the conditioned walk and of a
/// simple-walk control. Each replica samples one path of the largest length.
pub fn moment_growth_check(
    orders: &[u32],
    lengths: &[usize],
    replicas: u64,
    stream: RngStream,
    parallelism: Option<usize>,
) -> Result<MomentTable, WalkError> {
    let max_len = *lengths.iter().max().ok_or(WalkError::EmptyLengths)?;
    // per replica: for each length, for each order, three moment samples
    let samples = map_replicas(replicas, parallelism, |r| {
        let mut rng = RngStream::new(RngStream::derive(stream.seed, stream.stream_id), r).rng();
        let x = sample_pi_path(max_len, &mut rng);
        let s = sample_srw(max_len, &mut rng);
        lengths
            .iter()
            .map(|&n| {
                let xn = x.at(n) as f64;
                let inc = xn - x.at(n / 2) as f64;
                let sn = s[n] as f64;
                orders
                    .iter()
                    .map(|&k| {
                        let p = 2 * k as i32;
                        [xn.powi(p), inc.powi(p), sn.powi(p)]
                    })
                    .collect::<Vec<_>>()
            })
            .collect::<Vec<_>>()
    });

    let mut rows = Vec::new();
    for (kind_idx, kind) in [MomentKind::Marginal, MomentKind::Increment, MomentKind::SimpleWalkControl]
        .into_iter()
        .enumerate()
    {
        for (oi, &k) in orders.iter().enumerate() {
            let points: Vec<(f64, f64, f64)> = lengths
                .iter()
                .enumerate()
                .map(|(li, &n)| {
                    let st = samples.iter().fold(RunningStats::new(), |mut acc, rep| {
                        acc.push(rep[li][oi][kind_idx]);
                        acc
                    });
                    let lag = if kind == MomentKind::Increment {
                        (n - n / 2) as f64
                    } else {
                        n as f64
                    };
                    (lag, st.mean, st.stderr())
                })
                .collect();
            let pairs: Vec<(f64, f64)> = points.iter().map(|p| (p.0, p.1)).collect();
            let slope = loglog_slope(&pairs)?;
            rows.push(MomentRow {
                kind,
                order: k,
                points,
                slope,
            });
        }
    }
    Ok(MomentTable {
        replicas,
        rows,
        low_replica_warning: replicas < 1000,
    })
}

/// Outcome of an empirical stochastic-ordering check `A ≼ B`: at every integer
/// threshold `t`, `P(A > t) ≤ P(B > t) + tolerance_se · stderr`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderingCheck {
    /// Largest `(P̂(A > t) − P̂(B > t)) / stderr` over thresholds (can be negative).
    pub worst_z: f64,
    pub holds: bool,
}

fn ordering_z(a: &[i64], b: &[i64], paired: bool, tolerance_se: f64) -> OrderingCheck {
    let top = a.iter().chain(b).copied().max().unwrap_or(0);
    let mut worst = f64::NEG_INFINITY;
    let mut holds = true;
    for t in 0..=top {
        let ia: Vec<f64> = a.iter().map(|&v| (v > t) as u8 as f64).collect();
        let ib: Vec<f64> = b.iter().map(|&v| (v > t) as u8 as f64).collect();
        let (diff, se) = if paired {
            let d: Vec<f64> = ia.iter().zip(&ib).map(|(x, y)| x - y).collect();
            let s = RunningStats::from_slice(&d);
            (s.mean, s.stderr())
        } else {
            let (sa, sb) = (RunningStats::from_slice(&ia), RunningStats::from_slice(&ib));
            (sa.mean - sb.mean, (sa.stderr().powi(2) + sb.stderr().powi(2)).sqrt())
        };
        if diff > tolerance_se * se {
            holds = false;
        }
        let z = if se > 0.0 {
            diff / se
        } else if diff > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        worst = worst.max(z);
    }
    OrderingCheck {
        worst_z: worst,
        holds,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    pub n: usize,
    pub m: usize,
    /// `(X_n − X_m)_− ≼ (X_n − X_m)_+`
    pub negative_vs_positive: OrderingCheck,
    /// `(X_n − X_m)_+ ≼ X_{n−m}`
    pub positive_vs_fresh: OrderingCheck,
}

impl DominationReport {
    pub fn holds(&self) -> bool {
        self.negative_vs_positive.holds && self.positive_vs_fresh.holds
    }
}

/// Empirical check of the two increment dominations at `(n, m)`, `n ≥ m`.
pub fn domination_check(n: usize, m: usize, replicas: u64, stream: RngStream, parallelism: Option<usize>) -> DominationReport {
    assert!(n >= m, "need n ≥ m");
    let draws = map_replicas(replicas, parallelism, |r| {
        let mut rng = RngStream::new(RngStream::derive(stream.seed, stream.stream_id), r).rng();
        let x = sample_pi_path(n, &mut rng);
        let fresh = sample_pi_path(n - m, &mut rng);
        let d = x.at(n) as i64 - x.at(m) as i64;
        (d.min(0).abs(), d.max(0), fresh.at(n - m) as i64)
    });
    let neg: Vec<i64> = draws.iter().map(|d| d.0).collect();
    let pos: Vec<i64> = draws.iter().map(|d| d.1).collect();
    let fresh: Vec<i64> = draws.iter().map(|d| d.2).collect();
    DominationReport {
        n,
        m,
        negative_vs_positive: ordering_z(&neg, &pos, true, 3.0),
        positive_vs_fresh: ordering_z(&pos, &fresh, false, 3.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testfn::{Bump, SmoothCutoff};

    fn plateau() -> SmoothCutoff {
        SmoothCutoff {
            left: 0.1,
            right: 0.9,
            ramp: 0.1,
        }
    }

    #[test]
    fn deterministic_paths() {
        let phi = plateau();
        let n = 1000.0;
        let z = corner_density_statistic(&WalkPath::zigzag(2000), &phi, n).unwrap();
        assert!((z - phi.integral()).abs() < 2e-3, "{z} vs {}", phi.integral());
        assert_eq!(corner_density_statistic(&WalkPath::staircase(2000), &phi, n).unwrap(), 0.0);
        let bump = Bump::new(0.5, 0.4, 1.0);
        assert_eq!(occupation_statistic(&WalkPath::staircase(2000), 0, &bump, n).unwrap(), 0.0);
    }

    #[test]
    fn short_paths_rejected() {
        let phi = plateau();
        assert!(matches!(
            corner_density_statistic(&WalkPath::zigzag(50), &phi, 100.0),
            Err(WalkError::PathTooShort { .. })
        ));
    }

    #[test]
    fn simple_walk_control_has_unit_exponent() {
        let t = moment_growth_check(&[1], &[100, 1000, 10_000], 2000, RngStream::new(5, 0), Some(1)).unwrap();
        let row = t.row(MomentKind::SimpleWalkControl, 1).unwrap();
        assert!((0.95..=1.05).contains(&row.slope.slope), "{row:?}");
    }

    #[test]
    fn moment_table_is_thread_independent() {
        let a = moment_growth_check(&[1, 2], &[10, 40, 160], 64, RngStream::new(6, 0), Some(1)).unwrap();
        let b = moment_growth_check(&[1, 2], &[10, 40, 160], 64, RngStream::new(6, 0), Some(4)).unwrap();
        assert_eq!(a, b);
        assert!(a.low_replica_warning);
    }

    #[test]
    fn dominations_hold() {
        let r = domination_check(100, 50, 4000, RngStream::new(7, 0), None);
        assert!(r.holds(), "{r:?}");
    }

    #[test]
    fn ordering_detects_reversed_laws() {
        let small: Vec<i64> = (0..500).map(|i| i % 3).collect();
        let large: Vec<i64> = (0..500).map(|i| i % 3 + 2).collect();
        assert!(ordering_z(&small, &large, false, 3.0).holds);
        assert!(!ordering_z(&large, &small, false, 3.0).holds);
    }
}
