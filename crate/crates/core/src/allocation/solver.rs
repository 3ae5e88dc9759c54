//! Log-barrier interior point maximization of `psi` over the simplex.
//!
//! The max-min problem is written in epigraph form
//!
//! ```text
//! maximize t  subject to  f_k(w) >= t  (k != a*),  w >= 0,  sum(w) = 1,
//! ```
//!
//! with `f_k(w) = c_k g(wA_k, wA_a*)` concave and smooth on the open simplex.
//! Each centering step is an equality-constrained Newton method; the duality
//! gap of a centered point is `m / tau` for `m` inequality constraints.

use alloc::vec;
use alloc::vec::Vec;

use super::grid::{SimplexGrid, MEMBERSHIP_GRID_RESOLUTION};
use super::{
    Allocation, CharacteristicProblem, MemberRule, SolveOptions, SolverError, SolverResult,
};
use crate::linalg::solve_dense;
use crate::math;

const TAU_GROWTH: f64 = 20.0;
const MAX_NEWTON_PER_CENTER: usize = 200;
const CENTERED_DECREMENT: f64 = 1e-12;
/// Centering accuracy on the way along the path; only the last center is
/// refined to [`CENTERED_DECREMENT`].
const PATH_DECREMENT: f64 = 1e-5;
/// Normalized duality gap below which further centering only fights rounding.
const MIN_NORMALIZED_GAP: f64 = 1e-13;
const EXTREME_MEMBER_GAP: f64 = 1e-10;
const VERIFY_MAX_BOXES: usize = 3;
/// Boxes below this fraction of the largest weight are treated as unused when
/// reconstructing multipliers.
const KKT_SUPPORT: f64 = 1e-6;
/// Competitors within this relative margin of `psi` count as binding.
const KKT_ACTIVE: f64 = 1e-6;

pub(super) fn solve(
    problem: &CharacteristicProblem,
    options: &SolveOptions,
) -> Result<SolverResult, SolverError> {
    let num_boxes = problem.num_boxes();
    if problem.num_arms() < 2 {
        return Err(SolverError::SingleArm);
    }
    if num_boxes == 1 {
        let t_star = problem.psi(&[1.0]);
        return Ok(SolverResult {
            t_star,
            w_star: Allocation::vertex(1, 0),
            certificate_gap: 0.0,
            upper_bound: t_star,
            degenerate: t_star <= 0.0,
            newton_steps: 0,
        });
    }

    let barycenter = Allocation::uniform(num_boxes);
    // psi is nondecreasing and positively homogeneous in w, so
    // psi(barycenter) >= T*/M: it vanishes only if psi does everywhere.
    let scale = problem.psi(barycenter.as_slice());
    if !(scale > 0.0) {
        let w_star = match options.rule {
            MemberRule::Center => barycenter,
            MemberRule::FavorFirst => Allocation::vertex(num_boxes, 0),
            MemberRule::FavorLast => Allocation::vertex(num_boxes, num_boxes - 1),
        };
        return Ok(SolverResult {
            t_star: 0.0,
            w_star,
            certificate_gap: 0.0,
            upper_bound: 0.0,
            degenerate: true,
            newton_steps: 0,
        });
    }

    let barrier = Barrier::new(problem, scale);
    let target = (0.1 * options.tol / scale).max(MIN_NORMALIZED_GAP);

    let mut start = barycenter.into_inner();
    start.push(0.5);
    // Any positive multipliers certify an upper bound, so the path is
    // followed only until the certificate closes to within `tol`.
    let mut best: Option<Certified> = None;
    let path = barrier.follow_path(
        start,
        Level::Free,
        &unit(num_boxes + 1, num_boxes),
        target,
        &mut |x: &[f64]| {
            let candidate = barrier.certify(x);
            let closed = candidate.residual() <= 0.5 * options.tol;
            if best
                .as_ref()
                .is_none_or(|b| candidate.residual() < b.residual())
            {
                best = Some(candidate);
            }
            closed
        },
    );
    let mut steps = path.newton_steps;
    let Some(Certified {
        w: center,
        value: t_star,
        upper_bound,
    }) = best
    else {
        return Err(SolverError::NonConvergence {
            iterations: steps,
            residual: f64::INFINITY,
        });
    };
    let residual = upper_bound - t_star;
    if residual > options.tol {
        return Err(SolverError::NonConvergence {
            iterations: steps,
            residual,
        });
    }

    let w_star = match options.rule {
        MemberRule::Center => center,
        rule => {
            let favored = if rule == MemberRule::FavorFirst {
                0
            } else {
                num_boxes - 1
            };
            let floor = (t_star / scale) * (1.0 - options.member_slack.max(1e-12));
            let extreme = barrier.follow_path(
                center.as_slice().to_vec(),
                Level::Fixed(floor),
                &unit(num_boxes, favored),
                EXTREME_MEMBER_GAP,
                &mut |_: &[f64]| false,
            );
            steps += extreme.newton_steps;
            Allocation::from_iterate(extreme.x)
        }
    };

    let psi_star = problem.psi(w_star.as_slice());
    let certificate_gap = if options.verify_grid && num_boxes <= VERIFY_MAX_BOXES {
        let grid_best = SimplexGrid::new(num_boxes, MEMBERSHIP_GRID_RESOLUTION)
            .map(|w| problem.psi(&w))
            .fold(f64::NEG_INFINITY, f64::max);
        math::abs(psi_star - grid_best)
    } else {
        upper_bound - psi_star
    };

    Ok(SolverResult {
        t_star,
        w_star,
        certificate_gap,
        upper_bound,
        degenerate: false,
        newton_steps: steps,
    })
}

/// Upper bound on `T*` from nonnegative multipliers on the competitor terms.
///
/// Each `f_k` is concave and positively homogeneous, so
/// `f_k(v) <= grad f_k(w) . v` for every `v`, and
/// `T* <= max_v sum_k lambda_k f_k(v) / sum_k lambda_k`, a linear function of
/// `v` maximized at a vertex of the simplex.
fn dual_bound(problem: &CharacteristicProblem, w: &[f64], multipliers: &[f64]) -> f64 {
    let m = problem.num_boxes();
    let b = problem.best_arm();
    let wa = problem.effective_arm_weights(w);
    let y = wa[b];
    let total: f64 = multipliers.iter().sum();
    let mut combined = vec![0.0; m];
    for (k, &lambda) in problem.competitors().zip(multipliers) {
        let x = wa[k];
        let sum = x + y;
        if !(sum > 0.0) {
            return f64::INFINITY;
        }
        let c = problem.half_sq_gap(k) * lambda / total;
        let hx = c * y * y / (sum * sum);
        let hy = c * x * x / (sum * sum);
        for (i, acc) in combined.iter_mut().enumerate() {
            *acc += hx * problem.q(i, k) + hy * problem.q(i, b);
        }
    }
    combined.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// Multipliers balancing the competitor gradients on the support of `w`,
/// fitted by least squares over the nearly binding competitors. The barrier
/// duals lose accuracy late on the path; these do not, since they are read off
/// `w` alone.
fn kkt_multipliers(problem: &CharacteristicProblem, w: &[f64], value: f64) -> Option<Vec<f64>> {
    let m = problem.num_boxes();
    let b = problem.best_arm();
    let wa = problem.effective_arm_weights(w);
    let y = wa[b];
    let competitors: Vec<usize> = problem.competitors().collect();
    let w_max = w.iter().copied().fold(0.0, f64::max);
    let support: Vec<usize> = (0..m).filter(|&i| w[i] > KKT_SUPPORT * w_max).collect();

    let mut active = Vec::new();
    let mut grads = Vec::new();
    for (slot, &k) in competitors.iter().enumerate() {
        let x = wa[k];
        let sum = x + y;
        if !(sum > 0.0) {
            return None;
        }
        let f = problem.half_sq_gap(k) * x * y / sum;
        if f > value * (1.0 + KKT_ACTIVE) {
            continue;
        }
        let c = problem.half_sq_gap(k);
        let hx = c * y * y / (sum * sum);
        let hy = c * x * x / (sum * sum);
        active.push(slot);
        grads.push(
            (0..m)
                .map(|i| hx * problem.q(i, k) + hy * problem.q(i, b))
                .collect::<Vec<f64>>(),
        );
    }
    if active.is_empty() {
        return None;
    }

    // Unknowns (lambda_active, nu); rows: gradient balance on the support,
    // then sum(lambda) = 1. Scaled so both row types weigh alike.
    let n = active.len() + 1;
    let rows = support.len() + 1;
    let unit = value.max(f64::MIN_POSITIVE);
    let mut a = vec![0.0; rows * n];
    let mut rhs = vec![0.0; rows];
    for (r, &i) in support.iter().enumerate() {
        for (j, g) in grads.iter().enumerate() {
            a[r * n + j] = g[i] / unit;
        }
        a[r * n + n - 1] = -1.0;
    }
    for j in 0..active.len() {
        a[support.len() * n + j] = 1.0;
    }
    rhs[support.len()] = 1.0;

    let mut normal = vec![0.0; n * n];
    let mut proj = vec![0.0; n];
    for r in 0..rows {
        for i in 0..n {
            proj[i] += a[r * n + i] * rhs[r];
            for j in 0..n {
                normal[i * n + j] += a[r * n + i] * a[r * n + j];
            }
        }
    }
    for i in 0..n {
        normal[i * n + i] += 1e-14;
    }
    let sol = solve_dense(&mut normal, &mut proj, n)?;
    let mut multipliers = vec![0.0; competitors.len()];
    for (j, &slot) in active.iter().enumerate() {
        multipliers[slot] = sol[j].max(0.0);
    }
    (multipliers.iter().sum::<f64>() > 0.0).then_some(multipliers)
}

fn unit(len: usize, index: usize) -> Vec<f64> {
    let mut v = vec![0.0; len];
    v[index] = 1.0;
    v
}

#[derive(Clone, Copy)]
enum Level {
    /// The level `t` is the last optimization variable.
    Free,
    /// Constraints `f_k(w) >= level` with `w` the only variables.
    Fixed(f64),
}

/// A feasible allocation with its objective value and a proven upper bound on
/// `T*`.
struct Certified {
    w: Allocation,
    value: f64,
    upper_bound: f64,
}

impl Certified {
    fn residual(&self) -> f64 {
        self.upper_bound - self.value
    }
}

struct PathPoint {
    x: Vec<f64>,
    newton_steps: usize,
}

/// Scaled problem data: `f_k = (c_k / scale) g(wA_k, wA_a*)`.
struct Barrier<'a> {
    problem: &'a CharacteristicProblem,
    competitors: Vec<usize>,
    weights: Vec<f64>,
}

struct Derivatives {
    value: f64,
    grad: Vec<f64>,
    hess: Vec<f64>,
}

impl<'a> Barrier<'a> {
    fn new(problem: &'a CharacteristicProblem, scale: f64) -> Self {
        let competitors: Vec<usize> = problem.competitors().collect();
        let weights = competitors
            .iter()
            .map(|&k| problem.half_sq_gap(k) / scale)
            .collect();
        Barrier {
            problem,
            competitors,
            weights,
        }
    }

    /// Certificate at a path point of the free-level problem, with
    /// multipliers `1 / slack` read off the barrier.
    fn certify(&self, x: &[f64]) -> Certified {
        let m = self.problem.num_boxes();
        let w = Allocation::from_iterate(x[..m].to_vec());
        let value = self.problem.psi(w.as_slice());
        let mut upper_bound = match self.slacks(x, Level::Free) {
            Some(slacks) => {
                let multipliers: Vec<f64> = slacks.iter().map(|s| 1.0 / s).collect();
                dual_bound(self.problem, w.as_slice(), &multipliers)
            }
            None => f64::INFINITY,
        };
        if let Some(multipliers) = kkt_multipliers(self.problem, w.as_slice(), value) {
            upper_bound = upper_bound.min(dual_bound(self.problem, w.as_slice(), &multipliers));
        }
        Certified {
            w,
            value,
            upper_bound,
        }
    }

    fn num_constraints(&self) -> usize {
        self.competitors.len() + self.problem.num_boxes()
    }

    /// Slacks `f_k(w) - level`, or `None` outside the barrier domain.
    fn slacks(&self, x: &[f64], level: Level) -> Option<Vec<f64>> {
        let m = self.problem.num_boxes();
        if x[..m].iter().any(|&w| !(w > 0.0)) {
            return None;
        }
        let lev = match level {
            Level::Free => x[m],
            Level::Fixed(l) => l,
        };
        let mut wa = vec![0.0; self.problem.num_arms()];
        self.problem.effective_into(&x[..m], &mut wa);
        let y = wa[self.problem.best_arm()];
        let mut out = Vec::with_capacity(self.competitors.len());
        for (&k, &c) in self.competitors.iter().zip(&self.weights) {
            let s = c * super::harmonic(wa[k], y) - lev;
            if !(s > 0.0) {
                return None;
            }
            out.push(s);
        }
        Some(out)
    }

    fn objective(&self, x: &[f64], level: Level, direction: &[f64], tau: f64) -> Option<f64> {
        let slacks = self.slacks(x, level)?;
        let m = self.problem.num_boxes();
        let linear: f64 = x.iter().zip(direction).map(|(a, b)| a * b).sum();
        let mut value = -tau * linear;
        for s in slacks {
            value -= math::ln(s);
        }
        for &w in &x[..m] {
            value -= math::ln(w);
        }
        Some(value)
    }

    /// Value, gradient and Hessian of the barrier objective at a feasible `x`.
    fn derivatives(&self, x: &[f64], level: Level, direction: &[f64], tau: f64) -> Derivatives {
        let p = self.problem;
        let m = p.num_boxes();
        let n = x.len();
        let free = matches!(level, Level::Free);
        let lev = match level {
            Level::Free => x[m],
            Level::Fixed(l) => l,
        };
        let b = p.best_arm();

        let mut wa = vec![0.0; p.num_arms()];
        p.effective_into(&x[..m], &mut wa);
        let y = wa[b];

        let mut value = 0.0;
        let mut grad: Vec<f64> = direction.iter().map(|d| -tau * d).collect();
        let mut hess = vec![0.0; n * n];
        let mut gs = vec![0.0; n];

        for (&k, &c) in self.competitors.iter().zip(&self.weights) {
            let xk = wa[k];
            let sum = xk + y;
            let sum2 = sum * sum;
            let sum3 = sum2 * sum;
            let f = c * xk * y / sum;
            let hx = c * y * y / sum2;
            let hy = c * xk * xk / sum2;
            let hxx = -2.0 * c * y * y / sum3;
            let hyy = -2.0 * c * xk * xk / sum3;
            let hxy = 2.0 * c * xk * y / sum3;
            let s = f - lev;
            value -= math::ln(s);

            for (i, g) in gs[..m].iter_mut().enumerate() {
                *g = hx * p.q(i, k) + hy * p.q(i, b);
            }
            if free {
                gs[m] = -1.0;
            }
            let inv_s = 1.0 / s;
            let inv_s2 = inv_s * inv_s;
            for i in 0..n {
                grad[i] -= gs[i] * inv_s;
                for j in 0..n {
                    hess[i * n + j] += gs[i] * gs[j] * inv_s2;
                }
            }
            // -f''/s is positive semidefinite because f is concave.
            for i in 0..m {
                let (ai, bi) = (p.q(i, k), p.q(i, b));
                for j in 0..m {
                    let (aj, bj) = (p.q(j, k), p.q(j, b));
                    let second = hxx * ai * aj + hxy * (ai * bj + bi * aj) + hyy * bi * bj;
                    hess[i * n + j] -= second * inv_s;
                }
            }
        }
        for i in 0..m {
            let w = x[i];
            value -= math::ln(w);
            grad[i] -= 1.0 / w;
            hess[i * n + i] += 1.0 / (w * w);
        }
        let linear: f64 = x.iter().zip(direction).map(|(a, d)| a * d).sum();
        value -= tau * linear;
        Derivatives { value, grad, hess }
    }

    /// Newton step for the barrier objective restricted to `sum(w) = 1`. The
    /// KKT system is equilibrated by the Hessian diagonal first: near the end
    /// of the path the slack terms dwarf everything else.
    fn newton_step(&self, d: &Derivatives, n: usize) -> Option<Vec<f64>> {
        let m = self.problem.num_boxes();
        let size = n + 1;
        let scale: Vec<f64> = (0..n)
            .map(|i| {
                let h = d.hess[i * n + i];
                if h > 0.0 {
                    1.0 / math::sqrt(h)
                } else {
                    1.0
                }
            })
            .collect();
        let mut kkt = vec![0.0; size * size];
        for i in 0..n {
            for j in 0..n {
                kkt[i * size + j] = scale[i] * d.hess[i * n + j] * scale[j];
            }
        }
        for i in 0..m {
            kkt[i * size + n] = scale[i];
            kkt[n * size + i] = scale[i];
        }
        let mut rhs: Vec<f64> = d.grad.iter().zip(&scale).map(|(g, s)| -g * s).collect();
        rhs.push(0.0);
        let mut sol = solve_dense(&mut kkt, &mut rhs, size)?;
        sol.truncate(n);
        for (x, s) in sol.iter_mut().zip(&scale) {
            *x *= s;
        }
        Some(sol)
    }

    /// Newton centering at fixed `tau`. Returns `false` when rounding stops
    /// progress before the requested accuracy; the caller then keeps the
    /// current point and lets the certificate judge it.
    fn center(
        &self,
        x: &mut Vec<f64>,
        level: Level,
        direction: &[f64],
        tau: f64,
        tight: bool,
        steps: &mut usize,
    ) -> bool {
        let done = if tight {
            CENTERED_DECREMENT
        } else {
            PATH_DECREMENT
        };
        let n = x.len();
        for _ in 0..MAX_NEWTON_PER_CENTER {
            let d = self.derivatives(x, level, direction, tau);
            let Some(dx) = self.newton_step(&d, n) else {
                return false;
            };
            *steps += 1;
            let decrement = -d.grad.iter().zip(&dx).map(|(g, s)| g * s).sum::<f64>();
            if !(decrement > 0.0 && decrement.is_finite()) {
                return false;
            }
            if decrement / 2.0 <= done {
                return true;
            }
            let slope = -decrement;
            let mut alpha = 1.0;
            let accepted = loop {
                let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, s)| a + alpha * s).collect();
                if let Some(v) = self.objective(&trial, level, direction, tau) {
                    if v <= d.value + 0.25 * alpha * slope {
                        break Some(trial);
                    }
                }
                alpha *= 0.5;
                if alpha < 1e-16 {
                    break None;
                }
            };
            match accepted {
                Some(trial) => *x = trial,
                None => return false,
            }
        }
        false
    }

    fn follow_path(
        &self,
        mut x: Vec<f64>,
        level: Level,
        direction: &[f64],
        target_gap: f64,
        accept: &mut dyn FnMut(&[f64]) -> bool,
    ) -> PathPoint {
        let constraints = self.num_constraints() as f64;
        let mut tau = constraints;
        let mut steps = 0;
        loop {
            let gap = constraints / tau;
            let last = gap <= target_gap;
            let centered = self.center(&mut x, level, direction, tau, last, &mut steps);
            if accept(&x) || last || !centered {
                return PathPoint {
                    x,
                    newton_steps: steps,
                };
            }
            tau *= TAU_GROWTH;
        }
    }
}
