//! Sufficient statistics of a run and the pairwise GLRT statistics.

use alloc::vec::Vec;

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("arm {0} has not been pulled, its empirical mean is undefined")]
    UndefinedEstimate(usize),
}

/// Counts `N(t, m, k)`, their marginals, and per-arm reward totals.
#[derive(Debug, Clone, PartialEq)]
pub struct TallyState {
    num_boxes: usize,
    num_arms: usize,
    t: u64,
    n_mk: Vec<u64>,
    n_m: Vec<u64>,
    n_k: Vec<u64>,
    reward_sum_k: Vec<f64>,
}

/// Empirical `q_hat` and `mu_hat`; entries are `None` where undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimates {
    /// Row-major; a row is `None` until its box has been selected.
    pub q_hat: Vec<Option<Vec<f64>>>,
    pub mu_hat: Vec<Option<f64>>,
}

impl TallyState {
    pub fn new(num_boxes: usize, num_arms: usize) -> Self {
        TallyState {
            num_boxes,
            num_arms,
            t: 0,
            n_mk: alloc::vec![0; num_boxes * num_arms],
            n_m: alloc::vec![0; num_boxes],
            n_k: alloc::vec![0; num_arms],
            reward_sum_k: alloc::vec![0.0; num_arms],
        }
    }

    /// Folds one box selection into the tally.
    pub fn record(&mut self, box_index: usize, arm: usize, reward: f64) {
        self.t += 1;
        self.n_mk[box_index * self.num_arms + arm] += 1;
        self.n_m[box_index] += 1;
        self.n_k[arm] += 1;
        self.reward_sum_k[arm] += reward;
    }

    pub fn num_boxes(&self) -> usize {
        self.num_boxes
    }

    pub fn num_arms(&self) -> usize {
        self.num_arms
    }

    /// Total box selections.
    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn n_mk(&self, box_index: usize, arm: usize) -> u64 {
        self.n_mk[box_index * self.num_arms + arm]
    }

    pub fn box_counts(&self) -> &[u64] {
        &self.n_m
    }

    pub fn arm_counts(&self) -> &[u64] {
        &self.n_k
    }

    pub fn reward_sums(&self) -> &[f64] {
        &self.reward_sum_k
    }

    pub fn all_arms_pulled(&self) -> bool {
        self.n_k.iter().all(|&n| n > 0)
    }

    pub fn mu_hat(&self, arm: usize) -> Option<f64> {
        match self.n_k[arm] {
            0 => None,
            n => Some(self.reward_sum_k[arm] / n as f64),
        }
    }

    pub fn q_hat(&self, box_index: usize, arm: usize) -> Option<f64> {
        match self.n_m[box_index] {
            0 => None,
            n => Some(self.n_mk(box_index, arm) as f64 / n as f64),
        }
    }

    pub fn estimates(&self) -> Estimates {
        let q_hat = (0..self.num_boxes)
            .map(|m| {
                (self.n_m[m] > 0).then(|| {
                    (0..self.num_arms)
                        .map(|k| self.q_hat(m, k).unwrap_or(0.0))
                        .collect()
                })
            })
            .collect();
        let mu_hat = (0..self.num_arms).map(|k| self.mu_hat(k)).collect();
        Estimates { q_hat, mu_hat }
    }

    /// `Z_{a,b}(t)`; positive iff `mu_hat[a] > mu_hat[b]`.
    pub fn z_ab(&self, a: usize, b: usize) -> Result<f64, StatsError> {
        let mean_a = self.mu_hat(a).ok_or(StatsError::UndefinedEstimate(a))?;
        let mean_b = self.mu_hat(b).ok_or(StatsError::UndefinedEstimate(b))?;
        Ok(glrt_statistic(
            self.n_k[a] as f64,
            mean_a,
            self.n_k[b] as f64,
            mean_b,
        ))
    }

    /// Empirical leader with uniformly random tie-breaking, among pulled arms.
    /// `None` before any pull.
    pub fn leader<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<usize> {
        let means: Vec<Option<f64>> = (0..self.num_arms).map(|k| self.mu_hat(k)).collect();
        let top = means
            .iter()
            .flatten()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let tied: Vec<usize> = means
            .iter()
            .enumerate()
            .filter(|(_, m)| **m == Some(top))
            .map(|(k, _)| k)
            .collect();
        match tied.len() {
            0 => None,
            1 => Some(tied[0]),
            n => Some(tied[rng.random_range(0..n)]),
        }
    }

    /// `Z(t) = max_a min_{b != a} Z_{a,b}(t)` with its attaining arm, which is
    /// the empirical leader. Single-arm tallies return `+inf`.
    pub fn z_global<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(f64, usize), StatsError> {
        if let Some(k) = (0..self.num_arms).find(|&k| self.n_k[k] == 0) {
            return Err(StatsError::UndefinedEstimate(k));
        }
        let leader = self.leader(rng).unwrap_or(0);
        let mut z = f64::INFINITY;
        for b in 0..self.num_arms {
            if b != leader {
                z = z.min(self.z_ab(leader, b)?);
            }
        }
        Ok((z, leader))
    }
}

/// Gaussian GLRT statistic for `mean_a >= mean_b` against `mean_a <= mean_b`:
/// `n_a (mean_a - pooled)^2 / 2 + n_b (mean_b - pooled)^2 / 2`, signed by the
/// order of the means.
pub fn glrt_statistic(n_a: f64, mean_a: f64, n_b: f64, mean_b: f64) -> f64 {
    if mean_a == mean_b {
        return 0.0;
    }
    if mean_a > mean_b {
        unsigned_glrt(n_a, mean_a, n_b, mean_b)
    } else {
        -unsigned_glrt(n_b, mean_b, n_a, mean_a)
    }
}

/// Pooled mean `(n_a mean_a + n_b mean_b) / (n_a + n_b)`.
pub fn pooled_mean(n_a: f64, mean_a: f64, n_b: f64, mean_b: f64) -> f64 {
    (n_a * mean_a + n_b * mean_b) / (n_a + n_b)
}

fn unsigned_glrt(n_hi: f64, mean_hi: f64, n_lo: f64, mean_lo: f64) -> f64 {
    let pooled = pooled_mean(n_hi, mean_hi, n_lo, mean_lo);
    let d_hi = mean_hi - pooled;
    let d_lo = mean_lo - pooled;
    n_hi * d_hi * d_hi / 2.0 + n_lo * d_lo * d_lo / 2.0
}
