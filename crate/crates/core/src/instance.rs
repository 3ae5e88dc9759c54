//! Boxed-bandit problem instances.
//!
//! A problem instance is a row-stochastic `M x K` matrix `q` (box `m` pulls
//! arm `k` with probability `q[m][k]`), the arm means `mu`, the reward family,
//! and optionally a partition of the arms across the boxes.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::allocation::CharacteristicProblem;
use crate::math;
use crate::rng::EnvRng;

/// Row sums must equal one within this tolerance. Rows are never renormalized.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardModel {
    /// `N(mu, 1)` rewards.
    GaussianUnitVariance,
    /// `{0, 1}` rewards with success probability `mu`; needs `mu` in `[0, 1]`.
    BernoulliLike,
}

/// Unvalidated instance description.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    /// One row per box, one column per arm.
    pub q: Vec<Vec<f64>>,
    pub mu: Vec<f64>,
    pub reward_model: RewardModel,
    /// Arm sets `A_m` of a partitioned instance.
    pub arm_sets: Option<Vec<Vec<usize>>>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InstanceError {
    #[error("instance needs at least one box and one arm")]
    Empty,
    #[error("row {box_index} of q has {found} entries, expected {expected}")]
    RaggedRow {
        box_index: usize,
        expected: usize,
        found: usize,
    },
    #[error("q[{box_index}][{arm}] = {value} is not a probability")]
    InvalidProbability {
        box_index: usize,
        arm: usize,
        value: f64,
    },
    #[error("row {box_index} of q sums to {sum}, not 1")]
    RowNotStochastic { box_index: usize, sum: f64 },
    #[error("mean of arm {arm} is {value}, which the reward model does not allow")]
    InvalidMean { arm: usize, value: f64 },
    #[error("arms {first} and {second} share the largest mean")]
    TiedBestArm { first: usize, second: usize },
    #[error("partition violation at box {box_index}, arm {arm}: {reason}")]
    PartitionViolation {
        box_index: usize,
        arm: usize,
        reason: &'static str,
    },
}

/// An instance that satisfies every invariant. Immutable once built.
#[derive(Debug, Clone)]
pub struct ValidatedInstance {
    num_boxes: usize,
    num_arms: usize,
    q: Vec<f64>,
    cumulative: Vec<f64>,
    last_support: Vec<usize>,
    mu: Vec<f64>,
    best_arm: usize,
    reward_model: RewardModel,
    arm_sets: Option<Vec<Vec<usize>>>,
    box_of_arm: Option<Vec<usize>>,
}

/// Sub-optimality gaps relative to the unique best arm.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaps {
    /// `delta[k] = mu[best] - mu[k]`; the best arm's entry is `delta_best`.
    pub delta: Vec<f64>,
    /// Smallest gap among the other arms.
    pub delta_best: f64,
}

/// Validates `instance` and precomputes the cumulative rows used for sampling.
pub fn validate(instance: ProblemInstance) -> Result<ValidatedInstance, InstanceError> {
    ValidatedInstance::new(instance)
}

impl ValidatedInstance {
    pub fn new(instance: ProblemInstance) -> Result<Self, InstanceError> {
        let ProblemInstance {
            q: rows,
            mu,
            reward_model,
            arm_sets,
        } = instance;
        let num_boxes = rows.len();
        let num_arms = mu.len();
        if num_boxes == 0 || num_arms == 0 {
            return Err(InstanceError::Empty);
        }

        let mut q = Vec::with_capacity(num_boxes * num_arms);
        for (m, row) in rows.iter().enumerate() {
            if row.len() != num_arms {
                return Err(InstanceError::RaggedRow {
                    box_index: m,
                    expected: num_arms,
                    found: row.len(),
                });
            }
            for (k, &p) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&p) {
                    return Err(InstanceError::InvalidProbability {
                        box_index: m,
                        arm: k,
                        value: p,
                    });
                }
            }
            let sum: f64 = row.iter().sum();
            if math::abs(sum - 1.0) > ROW_SUM_TOLERANCE {
                return Err(InstanceError::RowNotStochastic { box_index: m, sum });
            }
            q.extend_from_slice(row);
        }

        for (k, &value) in mu.iter().enumerate() {
            let ok = match reward_model {
                RewardModel::GaussianUnitVariance => value.is_finite(),
                RewardModel::BernoulliLike => (0.0..=1.0).contains(&value),
            };
            if !ok {
                return Err(InstanceError::InvalidMean { arm: k, value });
            }
        }

        let mut best_arm = 0;
        for k in 1..num_arms {
            if mu[k] > mu[best_arm] {
                best_arm = k;
            }
        }
        if let Some(other) = (0..num_arms).find(|&k| k != best_arm && mu[k] == mu[best_arm]) {
            return Err(InstanceError::TiedBestArm {
                first: best_arm.min(other),
                second: best_arm.max(other),
            });
        }

        let box_of_arm = match &arm_sets {
            Some(sets) => Some(check_partition(sets, &q, num_boxes, num_arms)?),
            None => None,
        };

        let mut cumulative = Vec::with_capacity(q.len());
        let mut last_support = Vec::with_capacity(num_boxes);
        for m in 0..num_boxes {
            let row = &q[m * num_arms..(m + 1) * num_arms];
            let mut acc = 0.0;
            for &p in row {
                acc += p;
                cumulative.push(acc);
            }
            // Rows sum to one, so at least one entry is positive.
            last_support.push(row.iter().rposition(|&p| p > 0.0).unwrap_or(0));
        }

        Ok(ValidatedInstance {
            num_boxes,
            num_arms,
            q,
            cumulative,
            last_support,
            mu,
            best_arm,
            reward_model,
            arm_sets,
            box_of_arm,
        })
    }

    pub fn num_boxes(&self) -> usize {
        self.num_boxes
    }

    pub fn num_arms(&self) -> usize {
        self.num_arms
    }

    pub fn q(&self, box_index: usize, arm: usize) -> f64 {
        self.q[box_index * self.num_arms + arm]
    }

    pub fn q_row(&self, box_index: usize) -> &[f64] {
        &self.q[box_index * self.num_arms..(box_index + 1) * self.num_arms]
    }

    /// Row-major `M x K` probability matrix.
    pub fn q_flat(&self) -> &[f64] {
        &self.q
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn best_arm(&self) -> usize {
        self.best_arm
    }

    pub fn reward_model(&self) -> RewardModel {
        self.reward_model
    }

    pub fn arm_sets(&self) -> Option<&[Vec<usize>]> {
        self.arm_sets.as_deref()
    }

    pub fn is_partition(&self) -> bool {
        self.box_of_arm.is_some()
    }

    /// The unique box reaching `arm` in a partitioned instance.
    pub fn box_of_arm(&self, arm: usize) -> Option<usize> {
        self.box_of_arm.as_ref().map(|b| b[arm])
    }

    /// The optimization problem defining `T*` for this instance.
    pub fn characteristic_problem(&self) -> CharacteristicProblem {
        CharacteristicProblem::new(self.num_boxes, self.num_arms, self.q.clone(), &self.mu)
    }

    /// Selects `box_index` once: draws the pulled arm from the box's row by
    /// inverse CDF, then the arm's reward.
    pub fn sample_box(&self, box_index: usize, env: &mut EnvRng) -> (usize, f64) {
        let arm = self.draw_arm(box_index, &mut env.arm);
        let reward = self.draw_reward(arm, &mut env.reward);
        (arm, reward)
    }

    pub fn draw_arm<R: Rng + ?Sized>(&self, box_index: usize, rng: &mut R) -> usize {
        let cumulative =
            &self.cumulative[box_index * self.num_arms..(box_index + 1) * self.num_arms];
        let u: f64 = rng.random();
        let arm = cumulative.partition_point(|&c| c <= u);
        // A row summing to 1 - 1e-13 can leave u past the last breakpoint.
        arm.min(self.last_support[box_index])
    }

    pub fn draw_reward<R: Rng + ?Sized>(&self, arm: usize, rng: &mut R) -> f64 {
        let mean = self.mu[arm];
        match self.reward_model {
            RewardModel::GaussianUnitVariance => {
                let z: f64 = rng.sample(StandardNormal);
                mean + z
            }
            RewardModel::BernoulliLike => {
                let u: f64 = rng.random();
                if u < mean {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Gaps to the best arm. `None` for single-arm instances, which have no
    /// sub-optimal arm to compare against.
    pub fn gaps(&self) -> Option<Gaps> {
        if self.num_arms < 2 {
            return None;
        }
        let top = self.mu[self.best_arm];
        let mut delta: Vec<f64> = self.mu.iter().map(|&m| top - m).collect();
        let delta_best = delta
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != self.best_arm)
            .map(|(_, &d)| d)
            .fold(f64::INFINITY, f64::min);
        delta[self.best_arm] = delta_best;
        Some(Gaps { delta, delta_best })
    }
}

fn check_partition(
    sets: &[Vec<usize>],
    q: &[f64],
    num_boxes: usize,
    num_arms: usize,
) -> Result<Vec<usize>, InstanceError> {
    if sets.len() != num_boxes {
        return Err(InstanceError::PartitionViolation {
            box_index: sets.len().min(num_boxes),
            arm: 0,
            reason: "one arm set per box is required",
        });
    }
    let mut owner: Vec<Option<usize>> = alloc::vec![None; num_arms];
    for (m, set) in sets.iter().enumerate() {
        for &k in set {
            if k >= num_arms {
                return Err(InstanceError::PartitionViolation {
                    box_index: m,
                    arm: k,
                    reason: "arm index out of range",
                });
            }
            if owner[k].is_some() {
                return Err(InstanceError::PartitionViolation {
                    box_index: m,
                    arm: k,
                    reason: "arm belongs to more than one box",
                });
            }
            owner[k] = Some(m);
        }
    }
    let mut box_of_arm = Vec::with_capacity(num_arms);
    for (k, o) in owner.iter().enumerate() {
        match o {
            Some(m) => box_of_arm.push(*m),
            None => {
                return Err(InstanceError::PartitionViolation {
                    box_index: 0,
                    arm: k,
                    reason: "arm is not in any box",
                })
            }
        }
    }
    for m in 0..num_boxes {
        for k in 0..num_arms {
            let member = box_of_arm[k] == m;
            let positive = q[m * num_arms + k] > 0.0;
            if member != positive {
                return Err(InstanceError::PartitionViolation {
                    box_index: m,
                    arm: k,
                    reason: "q must be positive exactly on the box's arm set",
                });
            }
        }
    }
    Ok(box_of_arm)
}
