//! Smooth compactly supported test functions with exact derivatives to order 3.
//!
//! Derivatives come from forward-mode differentiation ([`Jet3`]) through the
//! closed-form expressions, so they agree with the values to rounding.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// Value and first three derivatives of a scalar function at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet3(pub [f64; 4]);

impl Jet3 {
    pub const ZERO: Jet3 = Jet3([0.0; 4]);

    pub fn constant(c: f64) -> Self {
        Jet3([c, 0.0, 0.0, 0.0])
    }

    /// The identity function at `x`.
    pub fn variable(x: f64) -> Self {
        Jet3([x, 1.0, 0.0, 0.0])
    }

    pub fn value(self) -> f64 {
        self.0[0]
    }

    pub fn scale(self, c: f64) -> Self {
        Jet3(self.0.map(|v| v * c))
    }

    /// Compose with a function whose derivatives at `self.value()` are `g`.
    fn chain(self, g: [f64; 4]) -> Self {
        let [_, f1, f2, f3] = self.0;
        Jet3([
            g[0],
            g[1] * f1,
            g[2] * f1 * f1 + g[1] * f2,
            g[3] * f1 * f1 * f1 + 3.0 * g[2] * f1 * f2 + g[1] * f3,
        ])
    }

    pub fn exp(self) -> Self {
        let e = self.0[0].exp();
        self.chain([e; 4])
    }

    pub fn recip(self) -> Self {
        let r = 1.0 / self.0[0];
        let r2 = r * r;
        self.chain([r, -r2, 2.0 * r2 * r, -6.0 * r2 * r2])
    }
}

impl Add for Jet3 {
    type Output = Jet3;
    fn add(self, o: Jet3) -> Jet3 {
        Jet3(std::array::from_fn(|i| self.0[i] + o.0[i]))
    }
}

impl Sub for Jet3 {
    type Output = Jet3;
    fn sub(self, o: Jet3) -> Jet3 {
        Jet3(std::array::from_fn(|i| self.0[i] - o.0[i]))
    }
}

impl Neg for Jet3 {
    type Output = Jet3;
    fn neg(self) -> Jet3 {
        self.scale(-1.0)
    }
}

impl Mul for Jet3 {
    type Output = Jet3;
    fn mul(self, o: Jet3) -> Jet3 {
        let [a0, a1, a2, a3] = self.0;
        let [b0, b1, b2, b3] = o.0;
        Jet3([
            a0 * b0,
            a1 * b0 + a0 * b1,
            a2 * b0 + 2.0 * a1 * b1 + a0 * b2,
            a3 * b0 + 3.0 * a2 * b1 + 3.0 * a1 * b2 + a0 * b3,
        ])
    }
}

pub trait TestFunction: Send + Sync {
    /// φ and its first three derivatives at `x`.
    fn jet(&self, x: f64) -> Jet3;

    /// Closed interval outside which φ vanishes identically.
    fn support(&self) -> (f64, f64);

    fn value(&self, x: f64) -> f64 {
        self.jet(x).0[0]
    }
    fn d1(&self, x: f64) -> f64 {
        self.jet(x).0[1]
    }
    fn d2(&self, x: f64) -> f64 {
        self.jet(x).0[2]
    }
    fn d3(&self, x: f64) -> f64 {
        self.jet(x).0[3]
    }

    fn vanishes_at_origin(&self) -> bool {
        self.value(0.0) == 0.0
    }

    /// Right end of the support, the `A` of the window rule.
    fn support_bound(&self) -> f64 {
        self.support().1
    }

    fn sup_norm(&self) -> f64 {
        let (a, b) = self.support();
        let n = 4096;
        (0..=n)
            .map(|i| self.value(a + (b - a) * i as f64 / n as f64).abs())
            .fold(0.0, f64::max)
    }

    fn integral(&self) -> f64 {
        simpson(|x| self.value(x), self.support(), 4096)
    }

    /// `∫ φ²`.
    fn l2_norm_sq(&self) -> f64 {
        simpson(|x| self.value(x).powi(2), self.support(), 4096)
    }
}

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, (a, b): (f64, f64), n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n)
        .map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 })
        .sum();
    (f(a) + f(b) + inner) * h / 3.0
}

/// Largest discrepancy between the jet derivatives and central differences
/// on a uniform probe grid of the support, relative to the derivative scale.
pub fn derivative_consistency(phi: &dyn TestFunction, probes: usize) -> f64 {
    let (a, b) = phi.support();
    let h = 1e-4 * (b - a);
    let mut worst = 0.0f64;
    for order in 1..=3 {
        let scale = (0..=probes)
            .map(|i| phi.jet(a + (b - a) * i as f64 / probes as f64).0[order].abs())
            .fold(1e-300, f64::max);
        for i in 0..=probes {
            let x = a + (b - a) * i as f64 / probes as f64;
            let f = |dx: f64| phi.jet(x + dx).0[order - 1];
            let fd = (8.0 * (f(h) - f(-h)) - (f(2.0 * h) - f(-2.0 * h))) / (12.0 * h);
            worst = worst.max((fd - phi.jet(x).0[order]).abs() / scale);
        }
    }
    worst
}

/// `amplitude · exp(1 − 1/(1 − u²))` with `u = (x − center)/half_width`,
/// peaking at `amplitude`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: f64,
    pub half_width: f64,
    pub amplitude: f64,
}

impl Bump {
    pub fn new(center: f64, half_width: f64, amplitude: f64) -> Self {
        assert!(half_width > 0.0, "bump half-width must be positive");
        Self {
            center,
            half_width,
            amplitude,
        }
    }
}

impl TestFunction for Bump {
    fn jet(&self, x: f64) -> Jet3 {
        let u = (Jet3::variable(x) - Jet3::constant(self.center)).scale(1.0 / self.half_width);
        let gap = Jet3::constant(1.0) - u * u;
        if gap.value() <= 0.0 {
            return Jet3::ZERO;
        }
        (Jet3::constant(1.0) - gap.recip()).exp().scale(self.amplitude)
    }

    fn support(&self) -> (f64, f64) {
        (self.center - self.half_width, self.center + self.half_width)
    }
}

/// Equal to 1 on `[left, right]`, decaying smoothly to 0 over a ramp of width
/// `ramp` on each side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothCutoff {
    pub left: f64,
    pub right: f64,
    pub ramp: f64,
}

/// `exp(−1/s)` for `s > 0`, else 0.
fn flat_exp(s: Jet3) -> Jet3 {
    if s.value() <= 0.0 {
        Jet3::ZERO
    } else {
        (-s.recip()).exp()
    }
}

/// Smooth step from 0 (at `s ≤ 0`) to 1 (at `s ≥ 1`).
fn smooth_step(s: Jet3) -> Jet3 {
    let a = flat_exp(s);
    let b = flat_exp(Jet3::constant(1.0) - s);
    a * (a + b).recip()
}

impl TestFunction for SmoothCutoff {
    fn jet(&self, x: f64) -> Jet3 {
        let x = Jet3::variable(x);
        let up = smooth_step((x - Jet3::constant(self.left - self.ramp)).scale(1.0 / self.ramp));
        let down = smooth_step((Jet3::constant(self.right + self.ramp) - x).scale(1.0 / self.ramp));
        up * down
    }

    fn support(&self) -> (f64, f64) {
        (self.left - self.ramp, self.right + self.ramp)
    }
}

/// Serializable description of a test function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestFunctionSpec {
    Bump {
        center: f64,
        half_width: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    Cutoff {
        left: f64,
        right: f64,
        ramp: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Default for TestFunctionSpec {
    /// Unit bump on `[0.25, 1.75]`.
    fn default() -> Self {
        TestFunctionSpec::Bump {
            center: 1.0,
            half_width: 0.75,
            amplitude: 1.0,
        }
    }
}

impl TestFunction for TestFunctionSpec {
    fn jet(&self, x: f64) -> Jet3 {
        match *self {
            TestFunctionSpec::Bump {
                center,
                half_width,
                amplitude,
            } => Bump::new(center, half_width, amplitude).jet(x),
            TestFunctionSpec::Cutoff { left, right, ramp } => {
                SmoothCutoff { left, right, ramp }.jet(x)
            }
        }
    }

    fn support(&self) -> (f64, f64) {
        match *self {
            TestFunctionSpec::Bump {
                center, half_width, ..
            } => (center - half_width, center + half_width),
            TestFunctionSpec::Cutoff { left, right, ramp } => (left - ramp, right + ramp),
        }
    }
}
