//! Boxed-bandit modified track-and-stop.
//!
//! Each step re-solves the characteristic-time problem on the empirical
//! instance `(q_hat, mu_hat)`, takes any member `w(t+1)` of the optimizer set,
//! and selects a box with the modified D-tracking rule:
//!
//! * if some box has fewer than `sqrt(t / M)` selections, the round-robin
//!   pointer box is forced;
//! * otherwise the box with the largest lag `sum_s w_m(s) - N(t, m)` among
//!   boxes in the support of the cumulative allocation.
//!
//! Tracking the *cumulative* allocation rather than the latest one is what
//! makes the rule converge to the optimizer set when it is not a singleton.
//! The run stops once `Z(t) >= zeta(t, delta, rho)` with every arm pulled.

use alloc::vec::Vec;

use thiserror::Error;

use crate::allocation::{
    Allocation, CharacteristicProblem, MemberRule, SolveOptions, SolverError, WStarSet,
};
use crate::instance::ValidatedInstance;
use crate::math;
use crate::outcome::{RunOutcome, TracePoint};
use crate::rng::TrialRng;
use crate::statistics::TallyState;
use crate::threshold::Threshold;

pub const DEFAULT_MAX_STEPS: u64 = 10_000_000;
/// Steps re-solved unconditionally under [`ResolveSchedule::Thinned`].
const THINNED_WARMUP: u64 = 1000;
const RELAXED_TOL_FACTOR: f64 = 1e4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BbmtsError {
    #[error("single-arm instances have no alternative hypothesis")]
    SingleArm,
    #[error("run did not stop within {max_steps} box selections")]
    CapExceeded { max_steps: u64 },
    #[error("allocation solver failed at t = {t}: {source}")]
    Solver { t: u64, source: SolverError },
}

/// How often the optimizer set is recomputed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResolveSchedule {
    /// Every step.
    #[default]
    Strict,
    /// Every step up to t = 1000, then every `ceil(t / 100)` steps, reusing the
    /// last allocation in between.
    Thinned,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BbmtsConfig {
    pub threshold: Threshold,
    pub max_steps: u64,
    pub resolve: ResolveSchedule,
    pub member_rule: MemberRule,
    pub solver_tol: f64,
    /// Disables the stopping rule and runs exactly this many selections.
    pub horizon: Option<u64>,
    /// Record a [`TracePoint`] every this many selections.
    pub trace_every: Option<u64>,
}

impl BbmtsConfig {
    pub fn new(threshold: Threshold) -> Self {
        BbmtsConfig {
            threshold,
            max_steps: DEFAULT_MAX_STEPS,
            resolve: ResolveSchedule::Strict,
            member_rule: MemberRule::Center,
            solver_tol: crate::allocation::DEFAULT_TOL,
            horizon: None,
            trace_every: None,
        }
    }
}

/// Round-robin pointer and cumulative allocation of the D-tracking rule.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackerState {
    pointer: usize,
    w_cumsum: Vec<f64>,
    allocations_issued: u64,
}

/// Which branch of the tracking rule picked the box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    Forced(usize),
    Tracked(usize),
}

impl Selection {
    pub fn box_index(self) -> usize {
        match self {
            Selection::Forced(m) | Selection::Tracked(m) => m,
        }
    }
}

impl TrackerState {
    pub fn new(num_boxes: usize) -> Self {
        TrackerState {
            pointer: 0,
            w_cumsum: alloc::vec![0.0; num_boxes],
            allocations_issued: 0,
        }
    }

    /// Starts from a given cumulative allocation.
    pub fn with_cumsum(w_cumsum: Vec<f64>, allocations_issued: u64) -> Self {
        TrackerState {
            pointer: 0,
            w_cumsum,
            allocations_issued,
        }
    }

    pub fn pointer(&self) -> usize {
        self.pointer
    }

    pub fn w_cumsum(&self) -> &[f64] {
        &self.w_cumsum
    }

    pub fn allocations_issued(&self) -> u64 {
        self.allocations_issued
    }

    /// Forced-exploration level `f(t) = sqrt(t / M)`, evaluated at `max(t, 1)`
    /// so that the first `M` selections visit every box once.
    pub fn forced_level(t: u64, num_boxes: usize) -> f64 {
        math::sqrt(t.max(1) as f64 / num_boxes as f64)
    }

    /// Adds `w` to the cumulative allocation and picks the next box.
    pub fn next_box(&mut self, box_counts: &[u64], t: u64, w: &Allocation) -> Selection {
        let num_boxes = self.w_cumsum.len();
        debug_assert_eq!(box_counts.len(), num_boxes);
        for (acc, &x) in self.w_cumsum.iter_mut().zip(w.as_slice()) {
            *acc += x;
        }
        self.allocations_issued += 1;

        let least = box_counts.iter().copied().min().unwrap_or(0);
        if (least as f64) < Self::forced_level(t, num_boxes) {
            let chosen = self.pointer;
            self.pointer = (self.pointer + 1) % num_boxes;
            return Selection::Forced(chosen);
        }
        Selection::Tracked(self.most_lagging(box_counts))
    }

    /// `argmin_m N(t, m) - sum_s w_m(s)` over the support of the cumulative
    /// allocation; lowest index on ties.
    pub fn most_lagging(&self, box_counts: &[u64]) -> usize {
        let mut best = None;
        let mut best_deficit = f64::INFINITY;
        for (m, (&n, &cum)) in box_counts.iter().zip(&self.w_cumsum).enumerate() {
            if !(cum > 0.0) {
                continue;
            }
            let deficit = n as f64 - cum;
            if deficit < best_deficit {
                best_deficit = deficit;
                best = Some(m);
            }
        }
        best.unwrap_or(0)
    }
}

/// `next_box` as a free function over a tally.
pub fn next_box(tracker: &mut TrackerState, tally: &TallyState, w: &Allocation) -> usize {
    tracker
        .next_box(tally.box_counts(), tally.t(), w)
        .box_index()
}

/// The instance the learner believes in: `q_hat` (uniform rows for boxes
/// never selected) and `mu_hat`, with unpulled arms imputed one unit below the
/// lowest observed mean (0 if nothing has been observed).
pub fn estimated_problem(tally: &TallyState) -> CharacteristicProblem {
    let (m, k) = (tally.num_boxes(), tally.num_arms());
    let mut q = Vec::with_capacity(m * k);
    for b in 0..m {
        for a in 0..k {
            q.push(tally.q_hat(b, a).unwrap_or(1.0 / k as f64));
        }
    }
    let observed = (0..k).filter_map(|a| tally.mu_hat(a));
    let floor = observed.fold(f64::INFINITY, f64::min);
    let fill = if floor.is_finite() { floor - 1.0 } else { 0.0 };
    let mu: Vec<f64> = (0..k).map(|a| tally.mu_hat(a).unwrap_or(fill)).collect();
    CharacteristicProblem::new(m, k, q, &mu)
}

/// `d_inf` from the empirical box frequencies to a reference optimizer set.
pub fn tracking_distance(tally: &TallyState, reference: &WStarSet) -> f64 {
    let t = tally.t().max(1) as f64;
    let freq: Vec<f64> = tally.box_counts().iter().map(|&n| n as f64 / t).collect();
    reference
        .distance(&freq)
        .map(|d| d.distance)
        .unwrap_or(f64::INFINITY)
}

/// Stepwise execution of one run.
#[derive(Debug, Clone)]
pub struct BbmtsRun<'a> {
    instance: &'a ValidatedInstance,
    config: &'a BbmtsConfig,
    rng: TrialRng,
    tally: TallyState,
    tracker: TrackerState,
    current: Allocation,
    next_solve_at: u64,
    solves: u64,
    degenerate_solves: u64,
    relaxed_solves: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SolveCounts {
    pub solves: u64,
    /// Solves where `psi` vanished on the whole simplex.
    pub degenerate: u64,
    /// Solves that needed the looser tolerance.
    pub relaxed: u64,
}

/// Outcome of a stopping check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopCheck {
    pub leader: usize,
    pub z: f64,
    pub zeta: f64,
    pub stop: bool,
}

impl<'a> BbmtsRun<'a> {
    pub fn new(
        instance: &'a ValidatedInstance,
        config: &'a BbmtsConfig,
        seed: u64,
    ) -> Result<Self, BbmtsError> {
        if instance.num_arms() < 2 {
            return Err(BbmtsError::SingleArm);
        }
        let m = instance.num_boxes();
        Ok(BbmtsRun {
            instance,
            config,
            rng: TrialRng::from_seed(seed),
            tally: TallyState::new(m, instance.num_arms()),
            tracker: TrackerState::new(m),
            current: Allocation::uniform(m),
            next_solve_at: 0,
            solves: 0,
            degenerate_solves: 0,
            relaxed_solves: 0,
        })
    }

    pub fn tally(&self) -> &TallyState {
        &self.tally
    }

    pub fn tracker(&self) -> &TrackerState {
        &self.tracker
    }

    pub fn current_allocation(&self) -> &Allocation {
        &self.current
    }

    pub fn solve_counts(&self) -> SolveCounts {
        SolveCounts {
            solves: self.solves,
            degenerate: self.degenerate_solves,
            relaxed: self.relaxed_solves,
        }
    }

    /// Evaluates the stopping rule at the current time. `None` until every
    /// arm has been pulled.
    pub fn check_stop(&mut self) -> Option<StopCheck> {
        if !self.tally.all_arms_pulled() {
            return None;
        }
        let (z, leader) = self.tally.z_global(&mut self.rng.policy).ok()?;
        let zeta = self.config.threshold.zeta(self.tally.t());
        Some(StopCheck {
            leader,
            z,
            zeta,
            stop: z >= zeta,
        })
    }

    fn resolve_due(&self) -> bool {
        match self.config.resolve {
            ResolveSchedule::Strict => true,
            ResolveSchedule::Thinned => {
                self.tally.t() <= THINNED_WARMUP || self.tally.t() >= self.next_solve_at
            }
        }
    }

    /// One box selection: refresh `w(t+1)` if due, track, sample, record.
    pub fn step(&mut self) -> Result<Selection, BbmtsError> {
        let t = self.tally.t();
        if self.resolve_due() {
            let problem = estimated_problem(&self.tally);
            let options = SolveOptions {
                tol: self.config.solver_tol,
                rule: self.config.member_rule,
                verify_grid: false,
                ..SolveOptions::default()
            };
            // Estimated instances can be badly scaled early on; a looser
            // certificate still yields a usable member of the optimizer set.
            let solution = match problem.solve(&options) {
                Err(SolverError::NonConvergence { .. }) => {
                    self.relaxed_solves += 1;
                    problem.solve(&SolveOptions {
                        tol: options.tol * RELAXED_TOL_FACTOR,
                        ..options
                    })
                }
                other => other,
            }
            .map_err(|source| BbmtsError::Solver { t, source })?;
            self.solves += 1;
            if solution.degenerate {
                self.degenerate_solves += 1;
            }
            self.current = solution.w_star;
            self.next_solve_at = t + (math::ceil(t as f64 / 100.0) as u64).max(1);
        }
        let selection = self
            .tracker
            .next_box(self.tally.box_counts(), t, &self.current);
        let (arm, reward) = self
            .instance
            .sample_box(selection.box_index(), &mut self.rng.env);
        self.tally.record(selection.box_index(), arm, reward);
        Ok(selection)
    }

    fn outcome(&self, declared_arm: usize, trace: Vec<TracePoint>) -> RunOutcome {
        RunOutcome {
            declared_arm,
            tau: self.tally.t(),
            correct: declared_arm == self.instance.best_arm(),
            box_counts: self.tally.box_counts().to_vec(),
            arm_counts: self.tally.arm_counts().to_vec(),
            trace,
        }
    }

    fn trace_point(&mut self, reference: &WStarSet) -> TracePoint {
        let t = self.tally.t();
        let (z, zeta) = match self.check_stop() {
            Some(c) => (c.z, c.zeta),
            None => (f64::NAN, self.config.threshold.zeta(t)),
        };
        TracePoint {
            t,
            tracking_distance: tracking_distance(&self.tally, reference),
            z,
            zeta,
        }
    }

    /// Runs until the stopping rule fires (or the horizon is reached).
    pub fn run_to_end(mut self, reference: Option<&WStarSet>) -> Result<RunOutcome, BbmtsError> {
        let mut trace = Vec::new();
        loop {
            let t = self.tally.t();
            match self.config.horizon {
                Some(h) if t >= h => {
                    let leader = self.tally.leader(&mut self.rng.policy).unwrap_or(0);
                    return Ok(self.outcome(leader, trace));
                }
                Some(_) => {}
                None => {
                    if let Some(check) = self.check_stop() {
                        if check.stop {
                            return Ok(self.outcome(check.leader, trace));
                        }
                    }
                }
            }
            if t >= self.config.max_steps {
                return Err(BbmtsError::CapExceeded {
                    max_steps: self.config.max_steps,
                });
            }
            self.step()?;
            if let (Some(every), Some(reference)) = (self.config.trace_every, reference) {
                if every > 0 && self.tally.t().is_multiple_of(every) {
                    let point = self.trace_point(reference);
                    trace.push(point);
                }
            }
        }
    }
}

/// One seeded run. `reference` is the true instance's optimizer set, used
/// only for trace diagnostics.
pub fn run(
    instance: &ValidatedInstance,
    config: &BbmtsConfig,
    seed: u64,
    reference: Option<&WStarSet>,
) -> Result<RunOutcome, BbmtsError> {
    BbmtsRun::new(instance, config, seed)?.run_to_end(reference)
}
