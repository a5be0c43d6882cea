use rand::Rng;
use serde::{Deserialize, Serialize};

use super::kernel::{p_down, p_up, WalkPath};
use super::WalkError;

/// Two-step pattern shared by both walks: a peak, a valley, or a straight run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Symbol {
    Peak,
    Valley,
    Straight,
}

/// Conditioned walk `X` and simple walk `S` driven by one symbol sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPair {
    pub x: WalkPath,
    pub s: Vec<i64>,
    /// `W_n` for each two-step block.
    pub symbols: Vec<Symbol>,
    /// `B_{n, X_{2n}}`, drawn only when `X_{2n} ≠ 0` and `W_n` is straight.
    pub b: Vec<Option<bool>>,
    /// `B̃_n`, drawn only when `W_n` is straight.
    pub b_tilde: Vec<Option<bool>>,
}

/// Probability that a straight block of `X` starting at `k ≥ 1` goes up.
pub fn straight_up_probability(k: u64) -> f64 {
    let up = p_up(k) * p_up(k + 1);
    let down = p_down(k) * p_down(k.saturating_sub(1));
    up / (up + down)
}

pub fn sample_coupled_pair<R: Rng + ?Sized>(steps: usize, rng: &mut R) -> Result<CoupledPair, WalkError> {
    if steps < 2 || !steps.is_multiple_of(2) {
        return Err(WalkError::CouplingLength(steps));
    }
    let blocks = steps / 2;
    let mut x = Vec::with_capacity(steps + 1);
    let mut s = Vec::with_capacity(steps + 1);
    let mut symbols = Vec::with_capacity(blocks);
    let mut b = Vec::with_capacity(blocks);
    let mut b_tilde = Vec::with_capacity(blocks);
    x.push(0u32);
    s.push(0i64);
    let (mut xk, mut sk) = (0u32, 0i64);
    for _ in 0..blocks {
        let w = match rng.random_range(0..4u8) {
            0 => Symbol::Peak,
            1 => Symbol::Valley,
            _ => Symbol::Straight,
        };
        symbols.push(w);

        let (x1, x2, bx) = match (w, xk) {
            (Symbol::Peak, _) => (xk + 1, xk, None),
            (_, 0) => (1, 2, None),
            (Symbol::Valley, _) => (xk - 1, xk, None),
            (Symbol::Straight, _) => {
                let up = rng.random_bool(straight_up_probability(xk as u64));
                if up {
                    (xk + 1, xk + 2, Some(true))
                } else {
                    (xk - 1, xk - 2, Some(false))
                }
            }
        };
        b.push(bx);

        let (s1, s2, bs) = match w {
            Symbol::Peak => (sk + 1, sk, None),
            Symbol::Valley => (sk - 1, sk, None),
            Symbol::Straight => {
                let up = rng.random_bool(0.5);
                if up {
                    (sk + 1, sk + 2, Some(true))
                } else {
                    (sk - 1, sk - 2, Some(false))
                }
            }
        };
        b_tilde.push(bs);

        x.extend([x1, x2]);
        s.extend([s1, s2]);
        xk = x2;
        sk = s2;
    }
    Ok(CoupledPair {
        x: WalkPath::from_valid(x),
        s,
        symbols,
        b,
        b_tilde,
    })
}

impl CoupledPair {
    /// Number of blocks `n` where
    /// `|1{ΔX_{2n+1} ≠ 0} − 1{ΔS_{2n+1} ≠ 0}| > 1{X_{2n} = 0}`.
    pub fn domination_violations(&self) -> usize {
        let x = self.x.values();
        (0..self.symbols.len())
            .filter(|&n| {
                let i = 2 * n + 1;
                let cx = x[i - 1] == x[i + 1];
                let cs = self.s[i - 1] == self.s[i + 1];
                let lhs = (cx as i32 - cs as i32).abs();
                lhs > (x[2 * n] == 0) as i32
            })
            .count()
    }
}
