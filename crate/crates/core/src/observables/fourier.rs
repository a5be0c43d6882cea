//! Fourier transforms of piecewise-linear grid functions.
//!
//! A grid function `g_n = g(εn)` with `g_0 = 0` is read as the hat expansion
//! `Σ g_n Λ((x − εn)/ε)`, which is its piecewise-linear interpolant when the
//! last value is zero. Its transform is the lattice sum
//! `ĝ(ζ) = c(ζ, ε) Σ g_n e^{−iζεn}` with `c(ζ, ε) = ε sinc²(ζε/2)`.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{ObservableError, RescaledInterface};
use crate::quad::GaussRule;

/// `c(ζ, ε) = 2(1 − cos ζε)/(ε ζ²) ∈ [0, ε]`, evaluated as `ε sinc²(ζε/2)`.
pub fn c_coef(zeta: f64, epsilon: f64) -> f64 {
    let u = 0.5 * zeta * epsilon;
    let s = if u.abs() < 1e-8 { 1.0 - u * u / 6.0 } else { u.sin() / u };
    epsilon * s * s
}

/// `Σ_n g_n z^n` by Horner's rule, `z = e^{−iθ}`.
pub(crate) fn lattice_sum(values: &[f64], theta: f64) -> Complex64 {
    let z = Complex64::from_polar(1.0, -theta);
    values
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &g| acc * z + g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierGrid {
    pub epsilon: f64,
    pub zeta: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl FourierGrid {
    /// CSV `zeta,re,im`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["zeta", "re", "im"])?;
        for (z, v) in self.zeta.iter().zip(&self.values) {
            w.serialize((z, v.re, v.im))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Lattice-sum transform of grid values at spacing `epsilon`.
pub fn fourier_hat(values: &[f64], epsilon: f64, zeta: &[f64]) -> Result<FourierGrid, ObservableError> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(ObservableError::NonFinite("grid function"));
    }
    if values.first().is_some_and(|&g| g != 0.0) {
        return Err(ObservableError::InvalidParameter("grid function must vanish at the origin".into()));
    }
    Ok(FourierGrid {
        epsilon,
        zeta: zeta.to_vec(),
        values: zeta
            .iter()
            .map(|&z| lattice_sum(values, z * epsilon) * c_coef(z, epsilon))
            .collect(),
    })
}

/// Transform of a rescaled profile. The truncated lattice ends at a nonzero
/// height, so an unweighted profile has no decaying tail and is rejected.
pub fn fourier_hat_interface(g: &RescaledInterface, zeta: &[f64]) -> Result<FourierGrid, ObservableError> {
    if g.rho().is_none() && g.grid_values().last().is_some_and(|&v| v != 0.0) {
        return Err(ObservableError::MissingWeight);
    }
    fourier_hat(g.grid_values(), g.epsilon(), zeta)
}

/// `∫ g(x) e^{−iζx} dx` for the hat expansion by Gauss–Legendre quadrature on
/// every cell; the oracle for [`fourier_hat`].
pub fn fourier_quadrature(values: &[f64], epsilon: f64, zeta: f64, nodes_per_cell: usize) -> Complex64 {
    let rule = GaussRule::new(nodes_per_cell);
    let at = |n: isize| {
        if n < 0 {
            0.0
        } else {
            values.get(n as usize).copied().unwrap_or(0.0)
        }
    };
    // cells [εk, ε(k+1)] for k = 0..=N-1, plus the cell after the last node
    (0..values.len() as isize)
        .map(|k| {
            let (a, b) = (epsilon * k as f64, epsilon * (k + 1) as f64);
            let (ga, gb) = (at(k), at(k + 1));
            rule.integrate(a, b, |x| {
                let frac = (x - a) / epsilon;
                Complex64::from_polar(ga * (1.0 - frac) + gb * frac, -zeta * x)
            })
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use std::f64::consts::PI;

    use crate::rng::RngStream;

    #[test]
    fn c_coef_examples() {
        let eps = 0.1;
        assert_eq!(c_coef(0.0, eps), eps);
        assert!((c_coef(1e-12, eps) - eps).abs() < 1e-15);
        assert!((c_coef(PI / eps, eps) - 4.0 * eps / (PI * PI)).abs() < 1e-15);
        assert!(c_coef(2.0 * PI / eps, eps).abs() < 1e-15);
        for i in 0..100_000 {
            let z = -500.0 + i as f64 * 0.01;
            let c = c_coef(z, eps);
            assert!((0.0..=eps).contains(&c), "ζ={z}");
            let direct = if z == 0.0 { eps } else { 2.0 * (1.0 - (z * eps).cos()) / (eps * z * z) };
            assert!((c - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn one_point_function() {
        let eps = 0.2;
        let mut g = vec![0.0; 8];
        g[3] = 1.7;
        let zeta = [0.0, 1.0, -4.0, 13.0];
        let f = fourier_hat(&g, eps, &zeta).unwrap();
        for (z, v) in zeta.iter().zip(&f.values) {
            let want = Complex64::from_polar(c_coef(*z, eps) * 1.7, -z * 0.6);
            assert!((v - want).norm() < 1e-14);
        }
    }

    #[test]
    fn matches_quadrature_and_is_hermitian() {
        let eps = 0.05;
        let mut rng = RngStream::new(21, 0).rng();
        for _ in 0..100 {
            let mut g: Vec<f64> = (0..50).map(|_| rng.random_range(-1.0..1.0)).collect();
            g[0] = 0.0;
            let zeta: Vec<f64> = (0..20).map(|_| rng.random_range(-4.0 * PI / eps..4.0 * PI / eps)).collect();
            let f = fourier_hat(&g, eps, &zeta).unwrap();
            let neg: Vec<f64> = zeta.iter().map(|z| -z).collect();
            let fneg = fourier_hat(&g, eps, &neg).unwrap();
            for ((z, v), w) in zeta.iter().zip(&f.values).zip(&fneg.values) {
                let q = fourier_quadrature(&g, eps, *z, 24);
                assert!((v - q).norm() < 1e-6, "ζ={z}: {v} vs {q}");
                assert!((v - w.conj()).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fourier_hat(&[1.0, 0.0], 0.1, &[1.0]).is_err());
        assert!(fourier_hat(&[0.0, f64::NAN], 0.1, &[1.0]).is_err());
        let g = RescaledInterface::from_heights(&[0, 1, 2], 0.25);
        assert!(matches!(fourier_hat_interface(&g, &[1.0]), Err(ObservableError::MissingWeight)));
        assert!(fourier_hat_interface(&g.weighted(1.0), &[1.0]).is_ok());
    }

    #[test]
    fn csv_layout() {
        let f = fourier_hat(&[0.0, 1.0], 0.5, &[0.0, 1.0]).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("zeta,re,im\n0.0,0.5,0.0\n"), "{text}");
    }
}
