//! Norms of piecewise-linear grid functions: fractional Sobolev `W^{s1,r}`,
//! negative Sobolev `H^{−s0}`, Hölder `C^b` and the weighted sup norm `C_ρ`.
//!
//! Grid functions are values `f_n = f(εn)`, `n = 0..N`, read as the hat
//! expansion (see [`super::fourier_hat`]).

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::fourier::{c_coef, lattice_sum};
use super::ObservableError;

/// Default cutoff for [`norm_h_neg_s0`], in multiples of `π/ε`.
pub const DEFAULT_CUTOFF_PERIODS: f64 = 20.0;

fn check_finite(values: &[f64]) -> Result<(), ObservableError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(ObservableError::NonFinite("grid function"))
    }
}

fn cell_value(values: &[f64], epsilon: f64, x: f64) -> f64 {
    super::interpolate(values, epsilon, x)
}

/// `‖f‖_{W^{s1,r}}` on `[a, b]`: `(‖f‖^r_{L^r} + [f]^r)^{1/r}` with the
/// Slobodeckij seminorm `[f]^r = ∫∫ |f(x) − f(y)|^r / |x − y|^{s1 r + 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SobolevNorm {
    pub lr_pow: f64,
    pub seminorm_pow: f64,
    pub norm: f64,
}

/// Midpoint rule on sub-cells of width `ε/refine`; on diagonal sub-cells `f`
/// is linear with slope `s` and the integral `|s|^r ∫∫ |x−y|^{r(1−s1)−1}`
/// is taken in closed form.
pub fn norm_w_s1_r(
    values: &[f64],
    epsilon: f64,
    s1: f64,
    r: f64,
    domain: (f64, f64),
    refine: usize,
) -> Result<SobolevNorm, ObservableError> {
    if !(s1 > 0.0 && s1 < 0.5) || r < 1.0 {
        return Err(ObservableError::InvalidParameter(format!(
            "need 0 < s1 < 1/2 and r ≥ 1, got s1 = {s1}, r = {r}"
        )));
    }
    check_finite(values)?;
    let (a, b) = domain;
    let h = epsilon / refine.max(1) as f64;
    let m = ((b - a) / h).round().max(1.0) as usize;
    let h = (b - a) / m as f64;
    let mid: Vec<f64> = (0..m).map(|i| cell_value(values, epsilon, a + (i as f64 + 0.5) * h)).collect();
    let slope: Vec<f64> = (0..m)
        .map(|i| {
            let x0 = a + i as f64 * h;
            (cell_value(values, epsilon, x0 + h) - cell_value(values, epsilon, x0)) / h
        })
        .collect();
    let lr_pow = mid.iter().map(|v| v.abs().powf(r)).sum::<f64>() * h;
    let q = s1 * r + 1.0;
    let alpha = r * (1.0 - s1) - 1.0;
    let diag = 2.0 * h.powf(alpha + 2.0) / ((alpha + 1.0) * (alpha + 2.0));
    let mut semi = 0.0;
    for i in 0..m {
        semi += slope[i].abs().powf(r) * diag;
        let mut off = 0.0;
        for j in i + 1..m {
            let d = (j - i) as f64 * h;
            off += (mid[i] - mid[j]).abs().powf(r) / d.powf(q);
        }
        semi += 2.0 * off * h * h;
    }
    let norm = (lr_pow + semi).powf(1.0 / r);
    if !norm.is_finite() {
        return Err(ObservableError::NonFinite("W^{s1,r} norm"));
    }
    Ok(SobolevNorm {
        lr_pow,
        seminorm_pow: semi,
        norm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegativeSobolevNorm {
    pub norm: f64,
    /// `∫_{|ζ|≤Z} (1+ζ²)^{−s0} |f̂|²`.
    pub head: f64,
    /// Upper bound on the neglected `|ζ| > Z` part of the squared norm.
    pub tail_bound: f64,
    pub cutoff: f64,
}

/// `∫ |f̂|² / (2π)` for the hat expansion: `‖f‖²_{L²}`.
fn l2_sq(values: &[f64], epsilon: f64) -> f64 {
    let diag: f64 = values.iter().map(|v| v * v).sum();
    let off: f64 = values.windows(2).map(|w| w[0] * w[1]).sum();
    epsilon * (2.0 * diag + off) / 3.0
}

/// `‖f‖_{H^{−s0}} = (∫ (1+ζ²)^{−s0} |f̂(ζ)|² dζ)^{1/2}` over `|ζ| ≤ Z`.
///
/// `f̂(ζ) = c(ζ,ε) G(ζε)` with `G` a trigonometric polynomial, so `|G|²` is
/// tabulated once over one period and Simpson's rule runs over `[0, Z]`
/// (the integrand is even). `cutoff = None` picks `Z = 20π/ε`. The tail
/// bound is the smaller of Plancherel, `(1+Z²)^{−s0} 2π‖f‖²`, and the decay
/// `|f̂| ≤ 4Σ|f_n|/(εζ²)`.
pub fn norm_h_neg_s0(
    values: &[f64],
    epsilon: f64,
    s0: f64,
    cutoff: Option<f64>,
) -> Result<NegativeSobolevNorm, ObservableError> {
    if s0 <= 0.5 {
        return Err(ObservableError::InvalidParameter(format!("need s0 > 1/2, got {s0}")));
    }
    check_finite(values)?;
    let z_max = cutoff.unwrap_or(DEFAULT_CUTOFF_PERIODS * PI / epsilon);
    let period = 2.0 * PI / epsilon;
    let k = (16 * values.len()).max(64).next_multiple_of(2);
    let table: Vec<f64> = (0..k).map(|j| lattice_sum(values, 2.0 * PI * j as f64 / k as f64).norm_sqr()).collect();
    let periods = z_max / period;
    let aligned = (periods - periods.round()).abs() < 1e-9 && periods.round() >= 1.0;
    let steps = if aligned {
        periods.round() as usize * k
    } else {
        ((z_max * k as f64 / period).ceil() as usize).next_multiple_of(2)
    };
    let dz = z_max / steps as f64;
    let integrand = |i: usize| {
        let z = i as f64 * dz;
        let g2 = if aligned {
            table[i % k]
        } else {
            lattice_sum(values, z * epsilon).norm_sqr()
        };
        let c = c_coef(z, epsilon);
        (1.0 + z * z).powf(-s0) * c * c * g2
    };
    let mut acc = integrand(0) + integrand(steps);
    for i in 1..steps {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * integrand(i);
    }
    let head = 2.0 * acc * dz / 3.0;
    let abs_sum: f64 = values.iter().map(|v| v.abs()).sum();
    let plancherel = (1.0 + z_max * z_max).powf(-s0) * 2.0 * PI * l2_sq(values, epsilon);
    let decay = 32.0 * abs_sum * abs_sum / (epsilon * epsilon * (2.0 * s0 + 3.0)) * z_max.powf(-2.0 * s0 - 3.0);
    let tail_bound = plancherel.min(decay);
    if !head.is_finite() {
        return Err(ObservableError::NonFinite("H^{-s0} norm"));
    }
    if tail_bound > 0.1 * head {
        return Err(ObservableError::CutoffTooSmall { tail: tail_bound, head });
    }
    Ok(NegativeSobolevNorm {
        norm: head.sqrt(),
        head,
        tail_bound,
        cutoff: z_max,
    })
}

/// Hölder seminorm `max |f(x) − f(y)| / |x − y|^b` over grid pairs with
/// `|x − y| ≥ ε`, plus `max |f|`.
pub fn holder_cb(values: &[f64], epsilon: f64, b: f64) -> Result<f64, ObservableError> {
    if !(b > 0.0 && b < 1.0) {
        return Err(ObservableError::InvalidParameter(format!("need 0 < b < 1, got {b}")));
    }
    check_finite(values)?;
    let sup = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let mut semi = 0.0f64;
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            let d = epsilon * (j - i) as f64;
            semi = semi.max((values[i] - values[j]).abs() / d.powf(b));
        }
    }
    Ok(sup + semi)
}

/// `sup_x e^{−ρx} |f(x)|` over the interpolant, exact on each cell.
pub fn c_rho_norm(values: &[f64], epsilon: f64, rho: f64) -> Result<f64, ObservableError> {
    if rho < 0.0 {
        return Err(ObservableError::InvalidParameter(format!("need ρ ≥ 0, got {rho}")));
    }
    check_finite(values)?;
    let weight = |x: f64| (-rho * x).exp();
    let mut best = values
        .iter()
        .enumerate()
        .map(|(n, v)| weight(epsilon * n as f64) * v.abs())
        .fold(0.0, f64::max);
    if rho > 0.0 {
        for (n, w) in values.windows(2).enumerate() {
            // e^{−ρ(x_n+u)}(a + s u) is stationary at u* = 1/ρ − a/s
            let (a, s) = (w[0].abs(), (w[1].abs() - w[0].abs()) / epsilon);
            if w[0] * w[1] < 0.0 || s == 0.0 {
                continue;
            }
            let u = 1.0 / rho - a / s;
            if u > 0.0 && u < epsilon {
                best = best.max(weight(epsilon * n as f64 + u) * (a + s * u));
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hat_grid(eps: f64, len: f64) -> Vec<f64> {
        let n = (len / eps).round() as usize;
        (0..=n).map(|i| (1.0 - (eps * i as f64 - 1.0).abs()).max(0.0)).collect()
    }

    #[test]
    fn zero_function() {
        let z = vec![0.0; 30];
        assert_eq!(norm_w_s1_r(&z, 0.1, 0.25, 4.0, (0.0, 2.9), 4).unwrap().norm, 0.0);
        assert_eq!(norm_h_neg_s0(&z, 0.1, 1.0, None).unwrap().norm, 0.0);
        assert_eq!(holder_cb(&z, 0.1, 0.25).unwrap(), 0.0);
        assert_eq!(c_rho_norm(&z, 0.1, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn sobolev_self_convergence_and_translation() {
        let f = hat_grid(0.05, 3.0);
        let coarse = norm_w_s1_r(&f, 0.05, 0.25, 4.0, (0.0, 3.0), 4).unwrap();
        let fine = norm_w_s1_r(&f, 0.05, 0.25, 4.0, (0.0, 3.0), 16).unwrap();
        assert!((coarse.norm / fine.norm - 1.0).abs() < 0.01, "{coarse:?} {fine:?}");
        // a narrow hat well inside [0, 6], moved by 1.5
        let bump = |c: f64| -> Vec<f64> {
            (0..=120).map(|i| (1.0 - (0.05 * i as f64 - c).abs() / 0.5).max(0.0)).collect()
        };
        let here = norm_w_s1_r(&bump(2.0), 0.05, 0.25, 4.0, (0.0, 6.0), 4).unwrap();
        let there = norm_w_s1_r(&bump(3.5), 0.05, 0.25, 4.0, (0.0, 6.0), 4).unwrap();
        assert!((here.norm / there.norm - 1.0).abs() < 0.01, "{here:?} {there:?}");
    }

    #[test]
    fn negative_sobolev_of_the_hat() {
        // f̂(ζ) = e^{−iζ} sinc²(ζ/2)
        let f = hat_grid(0.05, 3.0);
        let got = norm_h_neg_s0(&f, 0.05, 1.0, None).unwrap();
        let sinc = |u: f64| if u == 0.0 { 1.0 } else { u.sin() / u };
        let n = 2_000_000;
        let zmax = 4000.0;
        let dz = zmax / n as f64;
        let g = |z: f64| sinc(0.5 * z).powi(4) / (1.0 + z * z);
        let mut acc = g(0.0) + g(zmax);
        for i in 1..n {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * g(i as f64 * dz);
        }
        let want = (2.0 * acc * dz / 3.0).sqrt();
        assert!((got.norm / want - 1.0).abs() < 0.01, "{} vs {want}", got.norm);
    }

    #[test]
    fn doubling_cutoff_within_tail_bound() {
        let eps = 0.05;
        let f: Vec<f64> = (0..60).map(|i| if i == 0 { 0.0 } else { ((i * 7919) % 13) as f64 / 13.0 }).collect();
        let base = norm_h_neg_s0(&f, eps, 1.0, None).unwrap();
        let double = norm_h_neg_s0(&f, eps, 1.0, Some(2.0 * base.cutoff)).unwrap();
        assert!(double.head >= base.head);
        assert!(double.head - base.head <= base.tail_bound);
        // a non-period-aligned cutoff uses direct evaluation
        let odd = norm_h_neg_s0(&f, eps, 1.0, Some(1.37 * base.cutoff)).unwrap();
        assert!(odd.head - base.head <= base.tail_bound + 1e-12 * base.head);
        assert!(matches!(
            norm_h_neg_s0(&f, eps, 1.0, Some(0.5)),
            Err(ObservableError::CutoffTooSmall { .. })
        ));
    }

    #[test]
    fn c_rho_finds_interior_maxima() {
        // f(x) = x on [0, 2] with ρ = 1: sup of x e^{−x} is 1/e at x = 1, between nodes
        let eps = 0.3;
        let f: Vec<f64> = (0..7).map(|i| eps * i as f64).collect();
        let v = c_rho_norm(&f, eps, 1.0).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn holder_of_a_line() {
        let f: Vec<f64> = (0..11).map(|i| 0.1 * i as f64).collect();
        // |x−y|^{1−b} is maximal at the full span
        let v = holder_cb(&f, 0.1, 0.25).unwrap();
        assert!((v - (1.0 + 1.0)).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn homogeneity(
            raw in proptest::collection::vec(-2.0f64..2.0, 8..40),
            lambda in -3.0f64..3.0,
        ) {
            let mut f = raw;
            f[0] = 0.0;
            let eps = 0.1;
            let g: Vec<f64> = f.iter().map(|v| lambda * v).collect();
            let len = eps * (f.len() - 1) as f64;
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-300);

            let (cf, cg) = (c_rho_norm(&f, eps, 1.0).unwrap(), c_rho_norm(&g, eps, 1.0).unwrap());
            prop_assert!(close(cg, lambda.abs() * cf));
            let (hf, hg) = (holder_cb(&f, eps, 0.25).unwrap(), holder_cb(&g, eps, 0.25).unwrap());
            prop_assert!(close(hg, lambda.abs() * hf));
            if lambda.abs() > 1e-3 {
                let nf = norm_h_neg_s0(&f, eps, 1.0, None).unwrap().norm;
                let ng = norm_h_neg_s0(&g, eps, 1.0, None).unwrap().norm;
                prop_assert!(close(ng, lambda.abs() * nf));
            }
            let wf = norm_w_s1_r(&f, eps, 0.25, 4.0, (0.0, len), 2).unwrap();
            let wg = norm_w_s1_r(&g, eps, 0.25, 4.0, (0.0, len), 2).unwrap();
            prop_assert!(close(wg.seminorm_pow, lambda.powi(4) * wf.seminorm_pow));
        }
    }
}
