use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StateError {
    #[error("height sequence needs at least 2 sites, got {0}")]
    TooShort(usize),
    #[error("pinning violated at site 0")]
    Pinning,
    #[error("path constraint violated at site {0}")]
    Path(usize),
    #[error("wall violated at site {0}")]
    Wall(usize),
    #[error("site {site} outside the flippable range 1..={size}")]
    SiteOutOfRange { site: usize, size: usize },
}

/// Result of ringing the clock of one site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlipOutcome {
    Flipped,
    NoCorner,
    Blocked,
}

/// Interface heights on sites `0..=L+1`.
///
/// Site 0 is pinned at height 0 and site `L+1` is frozen; only `1..=L` flip.
/// The numbers of corner sites and blocked sites among `1..=L` are cached and
/// kept current by [`InterfaceState::attempt_flip`].
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceState {
    heights: Vec<u32>,
    time: f64,
    n_corners: usize,
    n_blocked: usize,
}

/// Build a state from raw heights, checking pinning, path and wall constraints.
pub fn validate_state(heights: &[i64]) -> Result<InterfaceState, StateError> {
    if heights.len() < 2 {
        return Err(StateError::TooShort(heights.len()));
    }
    if heights[0] != 0 {
        return Err(StateError::Pinning);
    }
    for n in 0..heights.len() {
        if heights[n] < 0 {
            return Err(StateError::Wall(n));
        }
        if n + 1 < heights.len() && (heights[n + 1] - heights[n]).abs() != 1 {
            return Err(StateError::Path(n));
        }
    }
    Ok(InterfaceState::from_valid(
        heights.iter().map(|&h| h as u32).collect(),
        0.0,
    ))
}

impl InterfaceState {
    /// `heights` must already satisfy every constraint.
    pub(crate) fn from_valid(heights: Vec<u32>, time: f64) -> Self {
        let mut state = Self {
            heights,
            time,
            n_corners: 0,
            n_blocked: 0,
        };
        state.recount();
        state
    }

    /// Straight line `h(n) = n`, which has no corners.
    pub fn staircase(lattice_size: usize) -> Self {
        Self::from_valid((0..lattice_size as u32 + 2).collect(), 0.0)
    }

    /// Alternating `0, 1, 0, 1, ...`: every flippable site is a corner.
    pub fn zigzag(lattice_size: usize) -> Self {
        Self::from_valid((0..lattice_size as u32 + 2).map(|n| n % 2).collect(), 0.0)
    }

    /// Number of flippable sites `L`.
    pub fn lattice_size(&self) -> usize {
        self.heights.len() - 2
    }

    pub fn heights(&self) -> &[u32] {
        &self.heights
    }

    #[inline]
    pub fn height(&self, n: usize) -> u32 {
        self.heights[n]
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub(crate) fn set_time(&mut self, time: f64) {
        self.time = time;
    }

    pub fn n_corners(&self) -> usize {
        self.n_corners
    }

    pub fn n_blocked(&self) -> usize {
        self.n_blocked
    }

    fn check_site(&self, n: usize) -> Result<(), StateError> {
        let size = self.lattice_size();
        if n == 0 || n > size {
            Err(StateError::SiteOutOfRange { site: n, size })
        } else {
            Ok(())
        }
    }

    /// `h(n+1) + h(n-1) - 2h(n)`, one of -2, 0, 2.
    pub fn discrete_laplacian(&self, n: usize) -> Result<i32, StateError> {
        self.check_site(n)?;
        Ok(self.laplacian(n))
    }

    /// Unchecked Laplacian for `1 <= n <= L`.
    #[inline]
    pub fn laplacian(&self, n: usize) -> i32 {
        self.heights[n + 1] as i32 + self.heights[n - 1] as i32 - 2 * self.heights[n] as i32
    }

    #[inline]
    pub fn is_corner(&self, n: usize) -> bool {
        self.heights[n + 1] == self.heights[n - 1]
    }

    /// Height-1 local maximum sitting on two zeros: the only move the wall forbids.
    #[inline]
    pub fn is_blocked(&self, n: usize) -> bool {
        self.heights[n] == 1 && self.heights[n - 1] == 0 && self.heights[n + 1] == 0
    }

    #[inline]
    pub fn classify(&self, n: usize) -> FlipOutcome {
        if !self.is_corner(n) {
            FlipOutcome::NoCorner
        } else if self.is_blocked(n) {
            FlipOutcome::Blocked
        } else {
            FlipOutcome::Flipped
        }
    }

    pub fn blocked_sites(&self) -> Vec<usize> {
        (1..=self.lattice_size()).filter(|&n| self.is_blocked(n)).collect()
    }

    pub fn corner_sites(&self) -> Vec<usize> {
        (1..=self.lattice_size()).filter(|&n| self.is_corner(n)).collect()
    }

    /// Ring the clock at site `n`; flips the corner unless the wall forbids it.
    pub fn attempt_flip(&mut self, n: usize) -> Result<FlipOutcome, StateError> {
        self.check_site(n)?;
        let outcome = self.classify(n);
        if outcome == FlipOutcome::Flipped {
            self.apply_flip(n);
        }
        Ok(outcome)
    }

    /// Flip a site already classified as `Flipped`.
    #[inline]
    pub(crate) fn apply_flip(&mut self, n: usize) {
        let size = self.lattice_size();
        let lo = n.saturating_sub(1).max(1);
        let hi = (n + 1).min(size);
        for m in lo..=hi {
            self.n_blocked -= self.is_blocked(m) as usize;
            if m != n {
                self.n_corners -= self.is_corner(m) as usize;
            }
        }
        let lap = self.laplacian(n);
        self.heights[n] = (self.heights[n] as i32 + lap) as u32;
        for m in lo..=hi {
            self.n_blocked += self.is_blocked(m) as usize;
            if m != n {
                self.n_corners += self.is_corner(m) as usize;
            }
        }
        debug_assert!(self.local_invariants_hold(n));
    }

    fn local_invariants_hold(&self, n: usize) -> bool {
        let h = self.heights[n] as i64;
        (h - self.heights[n - 1] as i64).abs() == 1 && (h - self.heights[n + 1] as i64).abs() == 1
    }

    fn recount(&mut self) {
        let size = self.lattice_size();
        self.n_corners = (1..=size).filter(|&n| self.is_corner(n)).count();
        self.n_blocked = (1..=size).filter(|&n| self.is_blocked(n)).count();
    }

    /// Full O(L) check of pinning, path and wall constraints and the cached counts.
    pub fn check_invariants(&self) -> Result<(), StateError> {
        let raw: Vec<i64> = self.heights.iter().map(|&h| h as i64).collect();
        let fresh = validate_state(&raw)?;
        debug_assert_eq!(fresh.n_corners, self.n_corners);
        debug_assert_eq!(fresh.n_blocked, self.n_blocked);
        Ok(())
    }
}
