//! Small statistics toolkit: mergeable moments, log-log regression, and
//! Kolmogorov–Smirnov tests for continuous and integer-valued laws.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("degenerate sample: {0}")]
    Degenerate(&'static str),
    #[error("log-log regression needs positive data; got scale {scale}, value {value}")]
    NonPositive { scale: f64, value: f64 },
    #[error("log-log regression needs scales spanning a factor of at least {need}, got {got}")]
    NarrowSpan { need: f64, got: f64 },
}

/// Count, mean and centred second moment, merged with Chan's update so the
/// result does not depend on how samples were grouped.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        let mut s = Self::new();
        xs.iter().for_each(|&x| s.push(x));
        s
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&self, other: &Self) -> Self {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let n = self.count + other.count;
        let d = other.mean - self.mean;
        let (na, nb) = (self.count as f64, other.count as f64);
        Self {
            count: n,
            mean: self.mean + d * nb / n as f64,
            m2: self.m2 + other.m2 + d * d * na * nb / n as f64,
        }
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

/// Mean that is bit-identical under any permutation of the input: values are
/// sorted before a pairwise sum.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    pairwise_sum(&sorted) / xs.len() as f64
}

fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        xs.iter().sum()
    } else {
        let (a, b) = xs.split_at(xs.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

/// Least-squares slope of `ln value` against `ln scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slope {
    pub slope: f64,
    pub stderr: f64,
}

pub fn loglog_slope(pairs: &[(f64, f64)]) -> Result<Slope, StatsError> {
    if pairs.len() < 3 {
        return Err(StatsError::TooFewSamples {
            need: 3,
            got: pairs.len(),
        });
    }
    if let Some(&(scale, value)) = pairs.iter().find(|(s, v)| !(*s > 0.0 && *v > 0.0)) {
        return Err(StatsError::NonPositive { scale, value });
    }
    let lo = pairs.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = pairs.iter().map(|p| p.0).fold(0.0, f64::max);
    if hi / lo < 4.0 {
        return Err(StatsError::NarrowSpan {
            need: 4.0,
            got: hi / lo,
        });
    }
    let pts: Vec<(f64, f64)> = pairs.iter().map(|&(s, v)| (s.ln(), v.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let rss: f64 = pts
        .iter()
        .map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2))
        .sum();
    let stderr = (rss / (n - 2.0) / sxx).sqrt();
    Ok(Slope { slope, stderr })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub d: f64,
    pub p_value: f64,
    pub n: usize,
}

pub const KS_MIN_SAMPLES: usize = 50;

/// Asymptotic Kolmogorov tail `P(K > λ)` with Stephens' small-sample
/// correction of the argument.
pub fn kolmogorov_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sided one-sample KS test against a continuous CDF.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult, StatsError> {
    if samples.len() < KS_MIN_SAMPLES {
        return Err(StatsError::TooFewSamples {
            need: KS_MIN_SAMPLES,
            got: samples.len(),
        });
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(StatsError::Degenerate("non-finite sample"));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    Ok(KsResult {
        d,
        p_value: kolmogorov_p_value(d, xs.len()),
        n: xs.len(),
    })
}

/// KS distance between the empirical law of integer samples and a pmf given
/// as `pmf[k] = P(X = k)`, taking the sup over the integer atoms. The p-value
/// uses the continuous asymptotics and is therefore conservative.
pub fn discrete_ks(samples: &[i64], pmf: &[f64]) -> Result<KsResult, StatsError> {
    if samples.len() < KS_MIN_SAMPLES {
        return Err(StatsError::TooFewSamples {
            need: KS_MIN_SAMPLES,
            got: samples.len(),
        });
    }
    let top = samples.iter().copied().max().unwrap_or(0).max(pmf.len() as i64 - 1);
    let lo = samples.iter().copied().min().unwrap_or(0).min(0);
    let mut counts = vec![0usize; (top - lo + 1) as usize];
    for &s in samples {
        counts[(s - lo) as usize] += 1;
    }
    let n = samples.len() as f64;
    let (mut emp, mut model, mut d) = (0.0, 0.0, 0.0f64);
    for k in lo..=top {
        emp += counts[(k - lo) as usize] as f64 / n;
        if k >= 0 {
            model += pmf.get(k as usize).copied().unwrap_or(0.0);
        }
        d = d.max((emp - model).abs());
    }
    Ok(KsResult {
        d,
        p_value: kolmogorov_p_value(d, samples.len()),
        n: samples.len(),
    })
}
