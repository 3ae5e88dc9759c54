//! Successive elimination for partition instances, where every arm belongs to
//! exactly one box.
//!
//! Round `n` selects each active box until each of its active arms has at
//! least `n` pulls, then drops every active arm whose UCB falls strictly below
//! the largest LCB among active arms.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::instance::ValidatedInstance;
use crate::math;
use crate::outcome::RunOutcome;
use crate::rng::TrialRng;

pub const DEFAULT_MAX_STEPS: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum BbseaError {
    #[error("successive elimination needs arm sets partitioning the arms")]
    NotPartition,
    #[error("delta must lie in (0, 1), got {0}")]
    InvalidDelta(f64),
    #[error("run did not stop within {max_steps} box selections")]
    CapExceeded { max_steps: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum BoundError {
    #[error("gap must be positive, got {0}")]
    NonpositiveGap(f64),
    #[error("q must lie in (0, 1], got {0}")]
    InvalidProbability(f64),
}

/// Confidence radius `sqrt(2 ln(8 K x^2 / delta) / x)` after `x` pulls.
pub fn alpha_delta(x: u64, num_arms: usize, delta: f64) -> f64 {
    let x = x as f64;
    math::sqrt(2.0 * math::ln(8.0 * num_arms as f64 * x * x / delta) / x)
}

/// Round by which an arm with gap `gap` is eliminated with high probability:
/// `1 + (102 / gap^2) ln(64 sqrt(8K / delta) / gap^2)`.
pub fn theory_alpha(gap: f64, num_arms: usize, delta: f64) -> Result<f64, BoundError> {
    if !(gap > 0.0) {
        return Err(BoundError::NonpositiveGap(gap));
    }
    let g2 = gap * gap;
    let inner = 64.0 * math::sqrt(8.0 * num_arms as f64 / delta) / g2;
    Ok(1.0 + 102.0 / g2 * math::ln(inner))
}

/// Box selections sufficient for `alpha` pulls of an arm with selection
/// probability `q`: `(alpha + 2L + 2 sqrt(L (L + alpha))) / q`,
/// `L = ln(2K / delta)`.
pub fn theory_beta(q: f64, alpha: f64, num_arms: usize, delta: f64) -> Result<f64, BoundError> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(BoundError::InvalidProbability(q));
    }
    let l = math::ln(2.0 * num_arms as f64 / delta);
    Ok((alpha + 2.0 * l + 2.0 * math::sqrt(l * (l + alpha))) / q)
}

/// Upper and lower stopping-time bounds of a partition instance.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryBounds {
    pub alpha_mk: Vec<f64>,
    pub beta_mk: Vec<f64>,
    pub beta_m: Vec<f64>,
    /// `sum_m beta_m`.
    pub upper_bound: f64,
    pub lower_bound: f64,
}

fn check_delta(delta: f64) -> Result<(), BbseaError> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(BbseaError::InvalidDelta(delta))
    }
}

/// Per-arm `alpha`, `beta` (indexed by arm) and per-box `beta_m`. The best
/// arm uses the smallest gap.
pub fn theory_bounds(instance: &ValidatedInstance, delta: f64) -> Result<TheoryBounds, BbseaError> {
    check_delta(delta)?;
    let sets = instance.arm_sets().ok_or(BbseaError::NotPartition)?;
    let gaps = instance.gaps().ok_or(BbseaError::NotPartition)?;
    let k = instance.num_arms();
    let mut alpha_mk = vec![0.0; k];
    let mut beta_mk = vec![0.0; k];
    let mut beta_m = vec![0.0; instance.num_boxes()];
    for (m, set) in sets.iter().enumerate() {
        for &arm in set {
            // Validation guarantees positive gaps and q on the arm set.
            let alpha = theory_alpha(gaps.delta[arm], k, delta).unwrap_or(f64::INFINITY);
            let beta = theory_beta(instance.q(m, arm), alpha, k, delta).unwrap_or(f64::INFINITY);
            alpha_mk[arm] = alpha;
            beta_mk[arm] = beta;
            beta_m[m] = f64::max(beta_m[m], beta);
        }
    }
    let upper_bound = beta_m.iter().sum();
    Ok(TheoryBounds {
        alpha_mk,
        beta_mk,
        beta_m,
        upper_bound,
        lower_bound: partition_lower_bound(instance, delta)?,
    })
}

/// `ln(1 / (2.4 delta)) * sum_m max_{k in A_m} 1 / (q_mk gap_k^2)`. Negative
/// for `delta >= 1 / 2.4`, where the bound is vacuous.
pub fn partition_lower_bound(instance: &ValidatedInstance, delta: f64) -> Result<f64, BbseaError> {
    check_delta(delta)?;
    let sets = instance.arm_sets().ok_or(BbseaError::NotPartition)?;
    let gaps = instance.gaps().ok_or(BbseaError::NotPartition)?;
    let mut total = 0.0;
    for (m, set) in sets.iter().enumerate() {
        let worst = set
            .iter()
            .map(|&arm| {
                let g = gaps.delta[arm];
                1.0 / (instance.q(m, arm) * g * g)
            })
            .fold(0.0, f64::max);
        total += worst;
    }
    Ok(math::ln(1.0 / (2.4 * delta)) * total)
}

/// Upper-to-lower bound ratio and the normalized per-arm `beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderReport {
    pub ratio: f64,
    /// `beta_mk q_mk gap_k^2 / ln(K / (delta gap_k))`, by arm.
    pub normalized_beta: Vec<f64>,
    pub bounds: TheoryBounds,
}

pub fn order_check(instance: &ValidatedInstance, delta: f64) -> Result<OrderReport, BbseaError> {
    let bounds = theory_bounds(instance, delta)?;
    let sets = instance.arm_sets().ok_or(BbseaError::NotPartition)?;
    let gaps = instance.gaps().ok_or(BbseaError::NotPartition)?;
    let k = instance.num_arms() as f64;
    let mut normalized_beta = vec![0.0; instance.num_arms()];
    for (m, set) in sets.iter().enumerate() {
        for &arm in set {
            let g = gaps.delta[arm];
            let scale = instance.q(m, arm) * g * g / math::ln(k / (delta * g));
            normalized_beta[arm] = bounds.beta_mk[arm] * scale;
        }
    }
    Ok(OrderReport {
        ratio: bounds.upper_bound / bounds.lower_bound,
        normalized_beta,
        bounds,
    })
}

/// Active sets, counts and confidence bounds of a run.
#[derive(Debug, Clone)]
pub struct EliminationState {
    num_arms: usize,
    delta: f64,
    box_of_arm: Vec<usize>,
    round: u64,
    active: Vec<bool>,
    active_per_box: Vec<Vec<usize>>,
    pulls: Vec<u64>,
    sums: Vec<f64>,
    box_selections: Vec<u64>,
    t: u64,
}

impl EliminationState {
    pub fn new(instance: &ValidatedInstance, delta: f64) -> Result<Self, BbseaError> {
        check_delta(delta)?;
        let sets = instance.arm_sets().ok_or(BbseaError::NotPartition)?;
        let k = instance.num_arms();
        let box_of_arm = (0..k)
            .map(|a| instance.box_of_arm(a).ok_or(BbseaError::NotPartition))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(EliminationState {
            num_arms: k,
            delta,
            box_of_arm,
            round: 0,
            active: vec![true; k],
            active_per_box: sets.to_vec(),
            pulls: vec![0; k],
            sums: vec![0.0; k],
            box_selections: vec![0; instance.num_boxes()],
            t: 0,
        })
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn is_active(&self, arm: usize) -> bool {
        self.active[arm]
    }

    pub fn active_arms(&self) -> Vec<usize> {
        (0..self.num_arms).filter(|&a| self.active[a]).collect()
    }

    pub fn active_per_box(&self) -> &[Vec<usize>] {
        &self.active_per_box
    }

    pub fn active_boxes(&self) -> Vec<usize> {
        (0..self.active_per_box.len())
            .filter(|&m| !self.active_per_box[m].is_empty())
            .collect()
    }

    pub fn pulls(&self) -> &[u64] {
        &self.pulls
    }

    pub fn box_selections(&self) -> &[u64] {
        &self.box_selections
    }

    pub fn box_of_arm(&self, arm: usize) -> usize {
        self.box_of_arm[arm]
    }

    pub fn mean(&self, arm: usize) -> Option<f64> {
        (self.pulls[arm] > 0).then(|| self.sums[arm] / self.pulls[arm] as f64)
    }

    pub fn radius(&self, arm: usize) -> f64 {
        match self.pulls[arm] {
            0 => f64::INFINITY,
            n => alpha_delta(n, self.num_arms, self.delta),
        }
    }

    pub fn ucb(&self, arm: usize) -> f64 {
        self.mean(arm)
            .map_or(f64::INFINITY, |m| m + self.radius(arm))
    }

    pub fn lcb(&self, arm: usize) -> f64 {
        self.mean(arm)
            .map_or(f64::NEG_INFINITY, |m| m - self.radius(arm))
    }

    pub fn is_done(&self) -> bool {
        self.active.iter().filter(|&&a| a).count() <= 1
    }

    fn record(&mut self, box_index: usize, arm: usize, reward: f64) {
        self.t += 1;
        self.box_selections[box_index] += 1;
        self.pulls[arm] += 1;
        self.sums[arm] += reward;
    }

    /// Eliminates every active arm with UCB strictly below the largest active
    /// LCB; returns the arms removed.
    fn eliminate(&mut self) -> Vec<usize> {
        let best_lcb = (0..self.num_arms)
            .filter(|&a| self.active[a])
            .map(|a| self.lcb(a))
            .fold(f64::NEG_INFINITY, f64::max);
        let removed: Vec<usize> = (0..self.num_arms)
            .filter(|&a| self.active[a] && self.ucb(a) < best_lcb)
            .collect();
        for &a in &removed {
            self.active[a] = false;
            self.active_per_box[self.box_of_arm[a]].retain(|&b| b != a);
        }
        removed
    }
}

/// Stepwise execution of one run.
#[derive(Debug, Clone)]
pub struct BbseaRun<'a> {
    instance: &'a ValidatedInstance,
    state: EliminationState,
    rng: TrialRng,
    max_steps: u64,
}

impl<'a> BbseaRun<'a> {
    pub fn new(
        instance: &'a ValidatedInstance,
        delta: f64,
        seed: u64,
        max_steps: u64,
    ) -> Result<Self, BbseaError> {
        Ok(BbseaRun {
            instance,
            state: EliminationState::new(instance, delta)?,
            rng: TrialRng::from_seed(seed),
            max_steps,
        })
    }

    pub fn state(&self) -> &EliminationState {
        &self.state
    }

    /// Plays one round: top-ups in ascending box order, then elimination.
    /// Returns the arms eliminated.
    pub fn play_round(&mut self) -> Result<Vec<usize>, BbseaError> {
        let n = self.state.round + 1;
        self.state.round = n;
        for m in 0..self.state.active_per_box.len() {
            loop {
                let short = self.state.active_per_box[m]
                    .iter()
                    .any(|&a| self.state.pulls[a] < n);
                if !short {
                    break;
                }
                if self.state.t >= self.max_steps {
                    return Err(BbseaError::CapExceeded {
                        max_steps: self.max_steps,
                    });
                }
                let (arm, reward) = self.instance.sample_box(m, &mut self.rng.env);
                self.state.record(m, arm, reward);
            }
        }
        Ok(self.state.eliminate())
    }

    pub fn run_to_end(mut self) -> Result<RunOutcome, BbseaError> {
        while !self.state.is_done() {
            self.play_round()?;
        }
        let declared_arm = self.state.active_arms().first().copied().unwrap_or(0);
        Ok(RunOutcome {
            declared_arm,
            tau: self.state.t,
            correct: declared_arm == self.instance.best_arm(),
            box_counts: self.state.box_selections.clone(),
            arm_counts: self.state.pulls.clone(),
            trace: Vec::new(),
        })
    }
}

/// One seeded run with the given selection cap.
pub fn run(
    instance: &ValidatedInstance,
    delta: f64,
    seed: u64,
    max_steps: u64,
) -> Result<RunOutcome, BbseaError> {
    BbseaRun::new(instance, delta, seed, max_steps)?.run_to_end()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{ProblemInstance, RewardModel};

    fn two_arm() -> ValidatedInstance {
        ValidatedInstance::new(ProblemInstance {
            q: vec![vec![0.5, 0.5]],
            mu: vec![1.0, 0.0],
            reward_model: RewardModel::BernoulliLike,
            arm_sets: Some(vec![vec![0, 1]]),
        })
        .unwrap()
    }

    #[test]
    fn radius_examples() {
        assert!((alpha_delta(1, 4, 0.05) - 3.5948).abs() < 1e-4);
        assert!((alpha_delta(100, 4, 0.05) - 0.5598).abs() < 1e-4);
    }

    #[test]
    fn alpha_and_beta_examples() {
        let a = theory_alpha(1.0, 2, 0.1).unwrap();
        let expected = 1.0 + 102.0 * math::ln(64.0 * math::sqrt(160.0));
        assert!((a - expected).abs() < 1e-9);
        assert!((a - 684.05).abs() < 0.05);
        let l = math::ln(2.0 * 2.0 / 0.1);
        assert!((theory_beta(1.0, 0.0, 2, 0.1).unwrap() - 4.0 * l).abs() < 1e-12);
        assert_eq!(
            theory_alpha(0.0, 2, 0.1),
            Err(BoundError::NonpositiveGap(0.0))
        );
    }

    #[test]
    fn lower_bound_example() {
        let lb = partition_lower_bound(&two_arm(), 0.1).unwrap();
        assert!((lb - 2.0 * math::ln(1.0 / 0.24)).abs() < 1e-12);
    }

    #[test]
    fn requires_partition() {
        let inst = ValidatedInstance::new(ProblemInstance {
            q: vec![vec![0.5, 0.5]],
            mu: vec![1.0, 0.0],
            reward_model: RewardModel::BernoulliLike,
            arm_sets: None,
        })
        .unwrap();
        assert_eq!(
            run(&inst, 0.1, 0, 10).unwrap_err(),
            BbseaError::NotPartition
        );
    }

    #[test]
    fn two_arm_run_identifies_best() {
        let out = run(&two_arm(), 0.1, 3, DEFAULT_MAX_STEPS).unwrap();
        assert!(out.correct);
        assert_eq!(out.box_counts.iter().sum::<u64>(), out.tau);
    }
}
