//! Simplex grids: enumeration, brute-force maximization, and the sampled
//! optimizer set used for distance diagnostics.

use alloc::vec;
use alloc::vec::Vec;

use super::{dinf_point, AllocationError, CharacteristicProblem, SolverResult};

/// Points per unit on each coordinate of the membership grid.
pub const MEMBERSHIP_GRID_RESOLUTION: usize = 200;
/// Largest box count for which the membership grid is enumerated.
pub const MEMBERSHIP_GRID_MAX_BOXES: usize = 3;

/// All points of `{w in simplex : w * resolution is integral}`, in
/// lexicographically decreasing order of the integer counts.
#[derive(Debug, Clone)]
pub struct SimplexGrid {
    counts: Vec<usize>,
    resolution: usize,
    done: bool,
}

impl SimplexGrid {
    pub fn new(dim: usize, resolution: usize) -> Self {
        assert!(dim >= 1 && resolution >= 1);
        let mut counts = vec![0; dim];
        counts[0] = resolution;
        SimplexGrid {
            counts,
            resolution,
            done: false,
        }
    }

    /// Number of grid points, `C(resolution + dim - 1, dim - 1)`.
    pub fn size(dim: usize, resolution: usize) -> u128 {
        let mut acc: u128 = 1;
        for i in 1..dim as u128 {
            acc = acc * (resolution as u128 + i) / i;
        }
        acc
    }

    fn advance(&mut self) {
        let dim = self.counts.len();
        if dim == 1 {
            self.done = true;
            return;
        }
        let rest = self.counts[dim - 1];
        self.counts[dim - 1] = 0;
        match (0..dim - 1).rev().find(|&i| self.counts[i] > 0) {
            Some(i) => {
                self.counts[i] -= 1;
                self.counts[i + 1] = rest + 1;
            }
            None => self.done = true,
        }
    }
}

impl Iterator for SimplexGrid {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        if self.done {
            return None;
        }
        let n = self.resolution as f64;
        let point = self.counts.iter().map(|&c| c as f64 / n).collect();
        self.advance();
        Some(point)
    }
}

/// Maximizes `f` over the simplex by brute force: a full grid at
/// `coarse_resolution`, then pattern refinement on local grids around the
/// incumbent. Meant for concave `f` and `dim <= 5`.
pub fn grid_search_max<F>(dim: usize, coarse_resolution: usize, f: F) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> f64,
{
    let mut best_point = vec![0.0; dim];
    best_point[0] = 1.0;
    let mut best_value = f64::NEG_INFINITY;
    for point in SimplexGrid::new(dim, coarse_resolution) {
        let v = f(&point);
        if v > best_value {
            best_value = v;
            best_point = point;
        }
    }
    if dim == 1 {
        return (best_point, best_value);
    }

    const HALF_WIDTH: i64 = 8;
    const SHRINK: f64 = 4.0;
    let free = dim - 1;
    let mut step = 1.0 / coarse_resolution as f64;
    let mut offsets = vec![-HALF_WIDTH; free];
    let mut candidate = vec![0.0; dim];
    for _ in 0..2000 {
        if step < 1e-13 {
            break;
        }
        let fine = step / SHRINK;
        let center = best_point.clone();
        let mut moved_to_edge = false;
        offsets.iter_mut().for_each(|o| *o = -HALF_WIDTH);
        loop {
            let mut feasible = true;
            let mut partial = 0.0;
            for i in 0..free {
                let c = center[i] + offsets[i] as f64 * fine;
                if c < -1e-15 {
                    feasible = false;
                    break;
                }
                candidate[i] = c.max(0.0);
                partial += candidate[i];
            }
            if feasible && partial <= 1.0 + 1e-15 {
                candidate[free] = (1.0 - partial).max(0.0);
                let v = f(&candidate);
                if v > best_value {
                    best_value = v;
                    best_point.copy_from_slice(&candidate);
                    moved_to_edge = offsets.iter().any(|o| o.abs() == HALF_WIDTH);
                }
            }
            // Odometer over the offset window.
            let mut i = 0;
            while i < free {
                offsets[i] += 1;
                if offsets[i] <= HALF_WIDTH {
                    break;
                }
                offsets[i] = -HALF_WIDTH;
                i += 1;
            }
            if i == free {
                break;
            }
        }
        if !moved_to_edge {
            step = fine;
        }
    }
    (best_point, best_value)
}

/// Distance from a point to the sampled optimizer set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SetDistance {
    pub distance: f64,
    /// Grid spacing of the sampled members; `None` when only the solver's
    /// representative is available (more than three boxes).
    pub resolution: Option<f64>,
}

/// A finite sample of `W*`: the solver's representative plus every
/// membership-grid point with `psi >= t_star - eps`.
#[derive(Debug, Clone)]
pub struct WStarSet {
    members: Vec<Vec<f64>>,
    resolution: Option<f64>,
    t_star: f64,
    eps: f64,
}

impl WStarSet {
    pub fn new(problem: &CharacteristicProblem, solution: &SolverResult, eps: f64) -> Self {
        let m = problem.num_boxes();
        let mut members = vec![solution.w_star.as_slice().to_vec()];
        let mut resolution = None;
        if m <= MEMBERSHIP_GRID_MAX_BOXES {
            resolution = Some(1.0 / MEMBERSHIP_GRID_RESOLUTION as f64);
            members.extend(
                SimplexGrid::new(m, MEMBERSHIP_GRID_RESOLUTION)
                    .filter(|w| problem.psi(w) >= solution.t_star - eps),
            );
        }
        WStarSet {
            members,
            resolution,
            t_star: solution.t_star,
            eps,
        }
    }

    pub fn members(&self) -> &[Vec<f64>] {
        &self.members
    }

    pub fn t_star(&self) -> f64 {
        self.t_star
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn distance(&self, u: &[f64]) -> Result<SetDistance, AllocationError> {
        let mut distance = f64::INFINITY;
        for v in &self.members {
            distance = distance.min(dinf_point(u, v)?);
        }
        Ok(SetDistance {
            distance,
            resolution: self.resolution,
        })
    }
}
