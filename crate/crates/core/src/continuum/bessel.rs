use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// `|B(x)|` for a 3-component Brownian path `B` sampled at `x_i = i·dx`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bessel3Path {
    pub dx: f64,
    pub values: Vec<f64>,
}

pub fn sample_bessel3<R: Rng + ?Sized>(dx: f64, points: usize, rng: &mut R) -> Bessel3Path {
    assert!(dx > 0.0, "dx must be positive");
    let sd = dx.sqrt();
    let mut b = [0.0f64; 3];
    let mut values = Vec::with_capacity(points);
    for i in 0..points {
        if i > 0 {
            for c in &mut b {
                *c += sd * rng.sample::<f64, _>(StandardNormal);
            }
        }
        values.push((b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt());
    }
    Bessel3Path { dx, values }
}

/// `P(|N(0, x I₃)| ≤ r) = erf(r/√(2x)) − √(2/π) (r/√x) e^{−r²/(2x)}`.
pub fn bessel3_marginal_cdf(x: f64, r: f64) -> f64 {
    assert!(x > 0.0, "position must be positive");
    if r <= 0.0 {
        return 0.0;
    }
    let z = r / x.sqrt();
    let v = libm::erf(z / std::f64::consts::SQRT_2)
        - (2.0 / std::f64::consts::PI).sqrt() * z * (-0.5 * z * z).exp();
    v.clamp(0.0, 1.0)
}
