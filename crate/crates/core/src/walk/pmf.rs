use std::io::Write;

use serde::Serialize;

use super::kernel::{p_down, p_up};
use super::WalkError;

pub const PMF_MAX_STEPS: usize = 10_000;
pub const ENUMERATION_MAX_STEPS: usize = 16;

/// Neumaier-compensated sum.
pub fn compensated_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for x in xs {
        let t = sum + x;
        c += if sum.abs() >= x.abs() {
            (sum - t) + x
        } else {
            (x - t) + sum
        };
        sum = t;
    }
    sum + c
}

/// Exact law of `X_n` under π.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactPmf {
    pub n: usize,
    /// `probabilities[k] = π(X_n = k)` for `0 ≤ k ≤ n`.
    pub probabilities: Vec<f64>,
}

impl ExactPmf {
    pub fn prob(&self, k: usize) -> f64 {
        self.probabilities.get(k).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        compensated_sum(self.probabilities.iter().copied())
    }

    /// Heights of the support: `n mod 2, n mod 2 + 2, ..., n`.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        (self.n % 2..=self.n).step_by(2)
    }

    pub fn cdf(&self, k: usize) -> f64 {
        compensated_sum(self.probabilities.iter().take(k + 1).copied())
    }

    /// CSV `height,probability`, one row per support point.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        #[derive(Serialize)]
        struct Row {
            height: usize,
            probability: f64,
        }
        let mut w = csv::Writer::from_writer(out);
        for k in self.support() {
            w.serialize(Row {
                height: k,
                probability: self.probabilities[k],
            })?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Forward recursion over the kernel, O(n²).
pub fn exact_pmf(n: usize) -> Result<ExactPmf, WalkError> {
    if n > PMF_MAX_STEPS {
        return Err(WalkError::TooLong {
            n,
            max: PMF_MAX_STEPS,
        });
    }
    let mut cur = vec![0.0f64; n + 2];
    let mut next = vec![0.0f64; n + 2];
    cur[0] = 1.0;
    for step in 0..n {
        next.iter_mut().for_each(|v| *v = 0.0);
        for k in (step % 2..=step).step_by(2) {
            let p = cur[k];
            next[k + 1] += p * p_up(k as u64);
            if k > 0 {
                next[k - 1] += p * p_down(k as u64);
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    cur.truncate(n + 1);
    Ok(ExactPmf {
        n,
        probabilities: cur,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoobWeight {
    pub weight: f64,
    /// Set when the path steps below 0; the weight is then 0.
    pub left_half_line: bool,
}

/// π-weight `(X_n + 1)·2^{-n}` of the cylinder fixed by `path` (`path[0] = 0`).
pub fn doob_weight(path: &[i64]) -> Result<DoobWeight, WalkError> {
    if path.first() != Some(&0) {
        return Err(WalkError::NotRooted);
    }
    if let Some(n) = path.windows(2).position(|w| (w[1] - w[0]).abs() != 1) {
        return Err(WalkError::NotNearestNeighbour(n));
    }
    if path.iter().any(|&x| x < 0) {
        return Ok(DoobWeight {
            weight: 0.0,
            left_half_line: true,
        });
    }
    let n = path.len() - 1;
    let end = *path.last().unwrap();
    Ok(DoobWeight {
        weight: (end + 1) as f64 * 0.5f64.powi(n as i32),
        left_half_line: false,
    })
}

/// Calls `visit` on every nonnegative path with `n` steps from 0.
pub fn for_each_nonnegative_path(n: usize, mut visit: impl FnMut(&[i64])) {
    fn rec(path: &mut Vec<i64>, len: usize, visit: &mut dyn FnMut(&[i64])) {
        if path.len() == len {
            visit(path);
            return;
        }
        let last = *path.last().unwrap();
        for next in [last + 1, last - 1] {
            if next >= 0 {
                path.push(next);
                rec(path, len, visit);
                path.pop();
            }
        }
    }
    let mut path = Vec::with_capacity(n + 1);
    path.push(0);
    rec(&mut path, n + 1, &mut visit);
}

/// Law of `X_n` aggregated from the Doob weights of all nonnegative paths.
/// Each weight is a small integer times a power of two, so the result is
/// exact in binary floating point.
pub fn enumerate_pmf(n: usize) -> Result<ExactPmf, WalkError> {
    if n > ENUMERATION_MAX_STEPS {
        return Err(WalkError::TooLong {
            n,
            max: ENUMERATION_MAX_STEPS,
        });
    }
    let mut probabilities = vec![0.0; n + 1];
    for_each_nonnegative_path(n, |p| {
        let w = doob_weight(p).expect("enumerated paths are valid").weight;
        probabilities[*p.last().unwrap() as usize] += w;
    });
    Ok(ExactPmf { n, probabilities })
}

/// Exhaustive check that `weight` is a probability on nonnegative `n`-step
/// paths which is invariant under interior corner flips staying nonnegative.
///
/// Flip invariance alone does not pin down the weight (any function of the
/// endpoint passes), so the total mass is also required to be 1.
pub fn equal_weight_check_with(n: usize, weight: impl Fn(&[i64]) -> f64) -> bool {
    assert!(n <= ENUMERATION_MAX_STEPS, "enumeration limited to n ≤ {ENUMERATION_MAX_STEPS}");
    let mut ok = true;
    let mut total = Vec::new();
    let mut scratch = Vec::with_capacity(n + 1);
    for_each_nonnegative_path(n, |p| {
        if !ok {
            return;
        }
        let w = weight(p);
        total.push(w);
        for i in 1..n {
            if p[i - 1] != p[i + 1] {
                continue;
            }
            let flipped = 2 * p[i - 1] - p[i];
            if flipped < 0 {
                continue;
            }
            scratch.clear();
            scratch.extend_from_slice(p);
            scratch[i] = flipped;
            if (weight(&scratch) - w).abs() > 1e-12 * w.abs().max(1e-300) {
                ok = false;
                return;
            }
        }
    });
    ok && (compensated_sum(total) - 1.0).abs() <= 1e-12
}

pub fn equal_weight_check(n: usize) -> bool {
    equal_weight_check_with(n, |p| doob_weight(p).map(|d| d.weight).unwrap_or(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Ballot count of nonnegative `n`-step paths from 0 to `k`.
    fn ballot(n: u64, k: u64) -> f64 {
        fn binom(n: u64, r: u64) -> f64 {
            if r > n {
                return 0.0;
            }
            (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
        }
        let up = (n + k) / 2;
        binom(n, up) - binom(n, up + 1)
    }

    #[test]
    fn small_pmfs() {
        assert_eq!(exact_pmf(0).unwrap().probabilities, vec![1.0]);
        let p2 = exact_pmf(2).unwrap();
        assert_eq!(p2.prob(0), 0.25);
        assert_eq!(p2.prob(1), 0.0);
        assert_eq!(p2.prob(2), 0.75);
        let p4 = exact_pmf(4).unwrap();
        assert!((p4.total() - 1.0).abs() < 1e-12);
        assert!(p4.probabilities.iter().enumerate().all(|(k, &p)| k % 2 == 0 || p == 0.0));
    }

    #[test]
    fn dp_matches_enumeration_up_to_sixteen() {
        for n in 0..=16 {
            let dp = exact_pmf(n).unwrap();
            let en = enumerate_pmf(n).unwrap();
            for k in 0..=n {
                assert!((dp.prob(k) - en.prob(k)).abs() < 1e-12, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn dp_matches_ballot_formula_at_large_n() {
        let n = 400;
        let dp = exact_pmf(n).unwrap();
        for k in dp.support() {
            let expect = (k as f64 + 1.0) * ballot(n as u64, k as u64) * 0.5f64.powi(n as i32);
            assert!((dp.prob(k) - expect).abs() < 1e-12, "k={k}");
        }
        let big = exact_pmf(PMF_MAX_STEPS).unwrap();
        assert!((big.total() - 1.0).abs() < 1e-12);
        assert!(exact_pmf(PMF_MAX_STEPS + 1).is_err());
    }

    #[test]
    fn doob_weight_examples() {
        assert_eq!(doob_weight(&[0, 1, 0]).unwrap().weight, 0.25);
        assert_eq!(doob_weight(&[0, 1, 2]).unwrap().weight, 0.75);
        let neg = doob_weight(&[0, -1, 0]).unwrap();
        assert!(neg.left_half_line);
        assert_eq!(neg.weight, 0.0);
        for n in 0..=16 {
            let mut total = Vec::new();
            for_each_nonnegative_path(n, |p| total.push(doob_weight(p).unwrap().weight));
            assert!((compensated_sum(total) - 1.0).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn equal_weight_exhaustive() {
        for n in 0..=12 {
            assert!(equal_weight_check(n), "n={n}");
        }
    }

    #[test]
    fn equal_weight_detects_mutations() {
        let shifted = |p: &[i64]| (*p.last().unwrap() as f64 + 1.1) * 0.5f64.powi(p.len() as i32 - 1);
        assert!(!equal_weight_check_with(8, shifted));
        // depends on the path interior: caught by flip invariance
        let interior = |p: &[i64]| {
            let base = doob_weight(p).unwrap().weight;
            if p.len() > 2 && p[1] == 1 && p[2] == 0 { base * 1.5 } else { base }
        };
        assert!(!equal_weight_check_with(8, interior));
    }

    #[test]
    fn pmf_csv_rows() {
        let mut buf = Vec::new();
        exact_pmf(10).unwrap().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("height,probability"));
        let probs: Vec<f64> = lines
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect();
        assert_eq!(probs.len(), 6);
        assert!((compensated_sum(probs) - 1.0).abs() < 1e-12);
    }
}
