use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::InterfaceState;

/// Diffusively rescaled profile `h^ε(εn) = √ε h(n)` on `n = 0..=L+1`, read as
/// a continuous function by linear interpolation and extended by zero outside
/// the grid. With a weight `ρ` the grid values are `e^{-ρx} h^ε(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RescaledInterface {
    epsilon: f64,
    values: Vec<f64>,
    rho: Option<f64>,
}

impl RescaledInterface {
    pub fn from_heights(heights: &[u32], epsilon: f64) -> Self {
        assert!(epsilon > 0.0 && epsilon <= 1.0, "ε must lie in (0, 1]");
        let s = epsilon.sqrt();
        Self {
            epsilon,
            values: heights.iter().map(|&h| s * h as f64).collect(),
            rho: None,
        }
    }

    pub fn new(state: &InterfaceState, epsilon: f64) -> Self {
        Self::from_heights(state.heights(), epsilon)
    }

    /// `g^ε(x) = e^{-ρx} h^ε(x)` at the grid points.
    pub fn weighted(&self, rho: f64) -> Self {
        assert!(self.rho.is_none(), "already weighted");
        Self {
            epsilon: self.epsilon,
            values: self
                .values
                .iter()
                .enumerate()
                .map(|(n, v)| v * (-rho * self.epsilon * n as f64).exp())
                .collect(),
            rho: Some(rho),
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn rho(&self) -> Option<f64> {
        self.rho
    }

    pub fn grid_values(&self) -> &[f64] {
        &self.values
    }

    pub fn grid_point(&self, n: usize) -> f64 {
        self.epsilon * n as f64
    }

    /// Right end of the grid, `ε(L+1)`.
    pub fn extent(&self) -> f64 {
        self.grid_point(self.values.len() - 1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        interpolate(&self.values, self.epsilon, x)
    }
}

/// Linear interpolation of grid values at spacing `dx`, zero off the grid.
pub fn interpolate(values: &[f64], dx: f64, x: f64) -> f64 {
    if x < 0.0 || values.is_empty() {
        return 0.0;
    }
    let u = x / dx;
    let i = u.floor() as usize;
    if i + 1 >= values.len() {
        return if i + 1 == values.len() && u == i as f64 {
            values[i]
        } else {
            0.0
        };
    }
    let frac = u - i as f64;
    values[i] * (1.0 - frac) + values[i + 1] * frac
}

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
#[error(
    "window rule violated: εL = {extent} must be at least A + 2√T = {support} + {margin} \
     (test-function support plus diffusive margin)"
)]
pub struct WindowViolation {
    pub extent: f64,
    pub support: f64,
    pub margin: f64,
}

/// The lattice must reach past the test-function support by the diffusive
/// margin `2√T` (scaled horizon `T`), i.e. `2√(T_unscaled)·ε`.
pub fn check_window(epsilon: f64, lattice_size: usize, support: f64, horizon: f64) -> Result<(), WindowViolation> {
    let extent = epsilon * lattice_size as f64;
    let margin = 2.0 * horizon.max(0.0).sqrt();
    if extent + 1e-12 >= support + margin {
        Ok(())
    } else {
        Err(WindowViolation {
            extent,
            support,
            margin,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::validate_state;

    #[test]
    fn rescale_examples() {
        let r = RescaledInterface::new(&validate_state(&[0, 1, 0]).unwrap(), 0.25);
        assert_eq!(r.grid_values(), &[0.0, 0.5, 0.0]);
        assert_eq!(r.eval(0.125), 0.25);
        assert_eq!(r.eval(0.25), 0.5);
        assert_eq!(r.eval(-1.0), 0.0);
        assert_eq!(r.eval(0.75), 0.0);
        let g = r.weighted(1.0);
        assert!((g.eval(0.25) - 0.5 * (-0.25f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn interpolation_is_nonnegative() {
        let r = RescaledInterface::new(&InterfaceState::zigzag(9), 0.1);
        for i in 0..=1000 {
            assert!(r.eval(i as f64 * 0.0011) >= 0.0);
        }
    }

    #[test]
    fn window_rule() {
        assert!(check_window(0.1, 200, 1.75, 1.0).is_ok());
        let e = check_window(0.2, 10, 1.75, 1.0).unwrap_err();
        assert!(e.to_string().contains("window rule"));
    }
}
