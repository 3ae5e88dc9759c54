//! Allocations over boxes and the characteristic-time problem
//!
//! `T*(q, mu) = sup_w psi(q, mu, w)` over the box simplex, with
//!
//! ```text
//! psi(q, mu, w) = min_{k != a*} g(wA_k, wA_a*) (mu_a* - mu_k)^2 / 2,
//! wA = q^T w,  g(x, y) = x y / (x + y)  (0 when x + y vanishes).
//! ```
//!
//! `psi` is concave in `w`, so its maximizer set `W*` is convex, but it is
//! generally not a singleton once several boxes reach the same arms.

mod classical;
mod grid;
mod solver;

use alloc::vec::Vec;

use thiserror::Error;

use crate::instance::ValidatedInstance;
use crate::math;

pub use classical::classical_characteristic_time;
pub use grid::{grid_search_max, SimplexGrid, WStarSet, MEMBERSHIP_GRID_RESOLUTION};

/// Default absolute tolerance on `psi` for [`solve`].
pub const DEFAULT_TOL: f64 = 1e-8;

/// Simplex sums must equal one within this tolerance.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

/// Below this `x + y` the harmonic term `x y / (x + y)` is taken as zero.
const HARMONIC_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AllocationError {
    #[error("allocation is empty")]
    Empty,
    #[error("allocation entry {index} is {value}")]
    InvalidEntry { index: usize, value: f64 },
    #[error("allocation sums to {sum}, not 1")]
    NotNormalized { sum: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("a single-arm instance has no alternative to test against")]
    SingleArm,
    #[error("maximization did not reach tolerance after {iterations} Newton steps (residual {residual})")]
    NonConvergence { iterations: usize, residual: f64 },
}

/// A probability vector over the boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation(Vec<f64>);

impl Allocation {
    pub fn new(weights: Vec<f64>) -> Result<Self, AllocationError> {
        if weights.is_empty() {
            return Err(AllocationError::Empty);
        }
        if let Some((index, &value)) = weights
            .iter()
            .enumerate()
            .find(|(_, &v)| !(v >= 0.0) || !v.is_finite())
        {
            return Err(AllocationError::InvalidEntry { index, value });
        }
        let sum: f64 = weights.iter().sum();
        if math::abs(sum - 1.0) > SIMPLEX_TOLERANCE {
            return Err(AllocationError::NotNormalized { sum });
        }
        Ok(Allocation(weights))
    }

    pub fn uniform(num_boxes: usize) -> Self {
        Allocation(alloc::vec![1.0 / num_boxes as f64; num_boxes])
    }

    pub fn vertex(num_boxes: usize, index: usize) -> Self {
        let mut w = alloc::vec![0.0; num_boxes];
        w[index] = 1.0;
        Allocation(w)
    }

    /// Clamps negatives and rescales; for solver iterates that drifted by rounding.
    pub(crate) fn from_iterate(mut weights: Vec<f64>) -> Self {
        for w in weights.iter_mut() {
            if !(*w > 0.0) {
                *w = 0.0;
            }
        }
        let sum: f64 = weights.iter().sum();
        for w in weights.iter_mut() {
            *w /= sum;
        }
        Allocation(weights)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Which member of `W*` a solve returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MemberRule {
    /// Limit point of the barrier path: the analytic center of the optimal face.
    #[default]
    Center,
    /// Near-optimal member putting the most weight on the lowest-index box.
    FavorFirst,
    /// Near-optimal member putting the most weight on the highest-index box.
    FavorLast,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Absolute tolerance on `psi`.
    pub tol: f64,
    pub rule: MemberRule,
    /// Relative slack below `T*` allowed for the `Favor*` rules.
    pub member_slack: f64,
    /// Cross-check the result on the 1/200 simplex grid (M <= 3 only).
    pub verify_grid: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: DEFAULT_TOL,
            rule: MemberRule::Center,
            member_slack: 1e-6,
            verify_grid: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    pub t_star: f64,
    pub w_star: Allocation,
    /// Grid cross-check `|psi(w_star) - max grid psi|` when it ran, otherwise
    /// the duality bound `upper_bound - psi(w_star)`.
    pub certificate_gap: f64,
    /// Certified upper bound on `T*`.
    pub upper_bound: f64,
    /// `psi` vanishes on the whole simplex (no box reaches the leading arm, a
    /// competitor is unreachable, or a competitor ties the leader).
    pub degenerate: bool,
    pub newton_steps: usize,
}

/// `T*` optimization data for a fixed `(q, mu)`: the leading arm and the
/// per-arm weights `(mu_a* - mu_k)^2 / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicProblem {
    num_boxes: usize,
    num_arms: usize,
    q: Vec<f64>,
    best_arm: usize,
    half_sq_gaps: Vec<f64>,
}

impl CharacteristicProblem {
    /// `q` is row-major `num_boxes x num_arms`. The leading arm is the first
    /// maximizer of `mu`; any other maximizer makes the problem degenerate.
    pub fn new(num_boxes: usize, num_arms: usize, q: Vec<f64>, mu: &[f64]) -> Self {
        assert_eq!(
            q.len(),
            num_boxes * num_arms,
            "q must be num_boxes x num_arms"
        );
        assert_eq!(mu.len(), num_arms, "mu must have one entry per arm");
        let mut best_arm = 0;
        for k in 1..num_arms {
            if mu[k] > mu[best_arm] {
                best_arm = k;
            }
        }
        let half_sq_gaps = mu
            .iter()
            .map(|&m| {
                let d = mu[best_arm] - m;
                d * d / 2.0
            })
            .collect();
        CharacteristicProblem {
            num_boxes,
            num_arms,
            q,
            best_arm,
            half_sq_gaps,
        }
    }

    pub fn num_boxes(&self) -> usize {
        self.num_boxes
    }

    pub fn num_arms(&self) -> usize {
        self.num_arms
    }

    pub fn best_arm(&self) -> usize {
        self.best_arm
    }

    pub(crate) fn q(&self, m: usize, k: usize) -> f64 {
        self.q[m * self.num_arms + k]
    }

    pub(crate) fn half_sq_gap(&self, k: usize) -> f64 {
        self.half_sq_gaps[k]
    }

    /// Arms other than the leader.
    pub(crate) fn competitors(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_arms).filter(move |&k| k != self.best_arm)
    }

    /// Induced arm-sampling frequencies `wA_k = sum_m w_m q[m][k]`.
    pub fn effective_arm_weights(&self, w: &[f64]) -> Vec<f64> {
        let mut wa = alloc::vec![0.0; self.num_arms];
        self.effective_into(w, &mut wa);
        wa
    }

    pub(crate) fn effective_into(&self, w: &[f64], wa: &mut [f64]) {
        debug_assert_eq!(w.len(), self.num_boxes);
        wa.iter_mut().for_each(|x| *x = 0.0);
        for (m, &wm) in w.iter().enumerate() {
            if wm == 0.0 {
                continue;
            }
            let row = &self.q[m * self.num_arms..(m + 1) * self.num_arms];
            for (acc, &p) in wa.iter_mut().zip(row) {
                *acc += wm * p;
            }
        }
    }

    /// `psi(q, mu, w)`; `+inf` when there is no competitor.
    pub fn psi(&self, w: &[f64]) -> f64 {
        let mut wa = alloc::vec![0.0; self.num_arms];
        self.effective_into(w, &mut wa);
        self.psi_from_effective(&wa)
    }

    pub(crate) fn psi_from_effective(&self, wa: &[f64]) -> f64 {
        let y = wa[self.best_arm];
        self.competitors()
            .map(|k| self.half_sq_gaps[k] * harmonic(wa[k], y))
            .fold(f64::INFINITY, f64::min)
    }

    /// Maximizes `psi` over the simplex.
    pub fn solve(&self, options: &SolveOptions) -> Result<SolverResult, SolverError> {
        solver::solve(self, options)
    }
}

/// `x y / (x + y)`, zero when `x + y` vanishes.
#[inline]
pub(crate) fn harmonic(x: f64, y: f64) -> f64 {
    let s = x + y;
    if s < HARMONIC_FLOOR {
        0.0
    } else {
        x * y / s
    }
}

fn check_len(instance: &ValidatedInstance, w: &Allocation) -> Result<(), AllocationError> {
    if w.len() != instance.num_boxes() {
        return Err(AllocationError::DimensionMismatch {
            expected: instance.num_boxes(),
            found: w.len(),
        });
    }
    Ok(())
}

pub fn effective_arm_weights(
    instance: &ValidatedInstance,
    w: &Allocation,
) -> Result<Vec<f64>, AllocationError> {
    check_len(instance, w)?;
    Ok(instance
        .characteristic_problem()
        .effective_arm_weights(w.as_slice()))
}

pub fn psi(instance: &ValidatedInstance, w: &Allocation) -> Result<f64, AllocationError> {
    check_len(instance, w)?;
    Ok(instance.characteristic_problem().psi(w.as_slice()))
}

/// Solves for `T*` on the true instance with grid verification.
pub fn solve(instance: &ValidatedInstance, tol: f64) -> Result<SolverResult, SolverError> {
    instance.characteristic_problem().solve(&SolveOptions {
        tol,
        ..SolveOptions::default()
    })
}

/// `psi(w) >= t_star - eps`.
pub fn wstar_membership(
    instance: &ValidatedInstance,
    solution: &SolverResult,
    w: &Allocation,
    eps: f64,
) -> Result<bool, AllocationError> {
    Ok(psi(instance, w)? >= solution.t_star - eps)
}

/// `max_i |u_i - v_i|`.
pub fn dinf_point(u: &[f64], v: &[f64]) -> Result<f64, AllocationError> {
    if u.len() != v.len() {
        return Err(AllocationError::DimensionMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    Ok(u.iter()
        .zip(v)
        .map(|(a, b)| math::abs(a - b))
        .fold(0.0, f64::max))
}

/// Distance from `u` to the sampled optimizer set.
pub fn dinf_to_set(u: &[f64], set: &WStarSet) -> Result<grid::SetDistance, AllocationError> {
    set.distance(u)
}

pub use grid::SetDistance;
