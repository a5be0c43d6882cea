use rand::Rng;
use serde::{Deserialize, Serialize};

use super::WalkError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

/// One-step kernel of the walk conditioned to stay nonnegative.
pub fn transition_prob(k: i64, direction: Direction) -> Result<f64, WalkError> {
    if k < 0 {
        return Err(WalkError::NegativeHeight(k));
    }
    let k = k as u64;
    Ok(match direction {
        Direction::Up => p_up(k),
        Direction::Down => p_down(k),
    })
}

/// `(k+2) / (2(k+1))`.
#[inline]
pub fn p_up(k: u64) -> f64 {
    (k + 2) as f64 / (2 * (k + 1)) as f64
}

/// `k / (2(k+1))`.
#[inline]
pub fn p_down(k: u64) -> f64 {
    k as f64 / (2 * (k + 1)) as f64
}

/// A nonnegative nearest-neighbour path `X_0 = 0, X_1, ..., X_N`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkPath {
    values: Vec<u32>,
}

impl WalkPath {
    pub fn new(values: Vec<i64>) -> Result<Self, WalkError> {
        if values.first() != Some(&0) {
            return Err(WalkError::NotRooted);
        }
        for (n, w) in values.windows(2).enumerate() {
            if (w[1] - w[0]).abs() != 1 {
                return Err(WalkError::NotNearestNeighbour(n));
            }
            if w[1] < 0 {
                return Err(WalkError::NegativeHeight(w[1]));
            }
        }
        Ok(Self {
            values: values.into_iter().map(|v| v as u32).collect(),
        })
    }

    pub(crate) fn from_valid(values: Vec<u32>) -> Self {
        Self { values }
    }

    /// `0, 1, 0, 1, ...` with `steps` steps.
    pub fn zigzag(steps: usize) -> Self {
        Self::from_valid((0..=steps as u32).map(|n| n % 2).collect())
    }

    /// `0, 1, 2, ...` with `steps` steps.
    pub fn staircase(steps: usize) -> Self {
        Self::from_valid((0..=steps as u32).collect())
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn steps(&self) -> usize {
        self.values.len() - 1
    }

    #[inline]
    pub fn at(&self, n: usize) -> u32 {
        self.values[n]
    }

    /// `ΔX_n ≠ 0`, i.e. `X_{n-1} = X_{n+1}`, for `1 ≤ n < N`.
    #[inline]
    pub fn is_corner(&self, n: usize) -> bool {
        self.values[n - 1] == self.values[n + 1]
    }

    pub fn into_values(self) -> Vec<u32> {
        self.values
    }
}

/// One step of the conditioned kernel from height `k`.
#[inline]
pub fn step_pi<R: Rng + ?Sized>(k: u32, rng: &mut R) -> u32 {
    // up iff U < (k+2)/(2(k+1)); compared in integers to avoid a division
    let u: u64 = rng.random::<u64>() >> 11;
    let scale = 1u64 << 53;
    let k = k as u64;
    let lhs = u as u128 * (2 * (k + 1)) as u128;
    let rhs = scale as u128 * (k + 2) as u128;
    if lhs < rhs {
        (k + 1) as u32
    } else {
        (k - 1) as u32
    }
}

/// First `steps` steps of the walk under π.
pub fn sample_pi_path<R: Rng + ?Sized>(steps: usize, rng: &mut R) -> WalkPath {
    let mut values = Vec::with_capacity(steps + 1);
    let mut k = 0u32;
    values.push(k);
    for _ in 0..steps {
        k = step_pi(k, rng);
        values.push(k);
    }
    WalkPath::from_valid(values)
}

/// Simple symmetric walk from 0.
pub fn sample_srw<R: Rng + ?Sized>(steps: usize, rng: &mut R) -> Vec<i64> {
    let mut out = Vec::with_capacity(steps + 1);
    let mut s = 0i64;
    out.push(0);
    let mut bits = 0u64;
    for i in 0..steps {
        if i % 64 == 0 {
            bits = rng.random();
        }
        s += if bits & 1 == 1 { 1 } else { -1 };
        bits >>= 1;
        out.push(s);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn kernel_values() {
        assert_eq!(transition_prob(0, Direction::Up), Ok(1.0));
        assert_eq!(transition_prob(0, Direction::Down), Ok(0.0));
        assert_eq!(transition_prob(1, Direction::Up), Ok(0.75));
        assert_eq!(transition_prob(1, Direction::Down), Ok(0.25));
        assert!(transition_prob(-1, Direction::Up).is_err());
    }

    #[test]
    fn kernel_normalized_and_monotone() {
        let mut prev = f64::INFINITY;
        for k in 0..=1_000_000u64 {
            let up = p_up(k);
            assert!((up + p_down(k) - 1.0).abs() < 1e-15, "k={k}");
            assert!(up < prev && up > 0.5, "k={k}");
            prev = up;
        }
        assert!(p_up(1_000_000) - 0.5 < 1e-6);
    }

    #[test]
    fn two_step_frequencies() {
        let mut rng = RngStream::new(1, 0).rng();
        let n = 100_000;
        let mut at2 = 0;
        let mut at0 = 0;
        for _ in 0..n {
            let p = sample_pi_path(2, &mut rng);
            assert!(p.values().iter().all(|&v| v as i64 >= 0));
            match p.at(2) {
                2 => at2 += 1,
                0 => at0 += 1,
                v => panic!("impossible X_2 = {v}"),
            }
        }
        let f2 = at2 as f64 / n as f64;
        let f0 = at0 as f64 / n as f64;
        assert!((f2 - 0.75).abs() < 0.01 * 0.75, "P(X_2=2) ≈ {f2}");
        assert!((f0 - 0.25).abs() < 0.02 * 0.25, "P(X_2=0) ≈ {f0}");
    }

    #[test]
    fn integer_step_rule_matches_probability() {
        let mut rng = RngStream::new(2, 0).rng();
        let n = 200_000;
        let ups = (0..n).filter(|_| step_pi(3, &mut rng) == 4).count();
        let f = ups as f64 / n as f64;
        let p = p_up(3);
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((f - p).abs() < 4.0 * se, "{f} vs {p}");
    }

    #[test]
    fn path_validation() {
        assert!(WalkPath::new(vec![0, 1, 0, 1]).is_ok());
        assert_eq!(WalkPath::new(vec![1, 2]), Err(WalkError::NotRooted));
        assert_eq!(WalkPath::new(vec![0, 2]), Err(WalkError::NotNearestNeighbour(0)));
        assert_eq!(WalkPath::new(vec![0, 1, 0, -1]), Err(WalkError::NegativeHeight(-1)));
    }
}
