//! Brute-force characteristic time of a classical Gaussian bandit (one box
//! per arm). Used as an oracle for the allocation solver: it shares no code
//! with the barrier method and evaluates its own objective.

use super::grid::{grid_search_max, SimplexGrid};

const COARSE_POINT_BUDGET: u128 = 600_000;
const MAX_COARSE_RESOLUTION: usize = 1000;

/// `T*` for identity `q` (`M = K`) by simplex grid search and local
/// refinement.
///
/// # Panics
///
/// If `mu` has fewer than two arms or its maximum is not unique.
pub fn classical_characteristic_time(mu: &[f64]) -> f64 {
    let k = mu.len();
    assert!(k >= 2, "need at least two arms");
    let best = (0..k).max_by(|&a, &b| mu[a].total_cmp(&mu[b])).unwrap_or(0);
    assert!(
        (0..k).all(|a| a == best || mu[a] < mu[best]),
        "best arm must be unique"
    );

    let objective = |w: &[f64]| {
        let y = w[best];
        let mut value = f64::INFINITY;
        for a in 0..k {
            if a == best {
                continue;
            }
            let x = w[a];
            let gap = mu[best] - mu[a];
            let pair = if x + y > 0.0 { x * y / (x + y) } else { 0.0 };
            value = value.min(pair * gap * gap / 2.0);
        }
        value
    };

    let mut coarse = MAX_COARSE_RESOLUTION;
    while coarse > 4 && SimplexGrid::size(k, coarse) > COARSE_POINT_BUDGET {
        coarse = coarse * 9 / 10;
    }
    grid_search_max(k, coarse, objective).1
}
