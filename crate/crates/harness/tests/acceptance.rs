//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Pass criterion numbers as arguments to run a subset.

use std::time::{Duration, Instant};

use boxed_bandit::allocation::{self, wstar_membership, WStarSet};
use boxed_bandit::bbsea::order_check;
use boxed_bandit::statistics::glrt_statistic;
use boxed_bandit::{Allocation, ProblemInstance, RewardModel, TallyState, ValidatedInstance};
use boxed_bandit_harness::experiment::Reference;
use boxed_bandit_harness::report::write_outputs;
use boxed_bandit_harness::{parse_config, run_experiment, ExperimentOutput};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{Binomial, DiscreteCDF};

const WORKERS: usize = 4;

type Verdict = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    check: fn() -> Verdict,
}

fn main() {
    let selected: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let criteria = [
        Criterion {
            id: 1,
            name: "flat objective on the non-unique instance",
            budget: secs(1),
            check: c1_flat_instance,
        },
        Criterion {
            id: 2,
            name: "classical reduction against brute force",
            budget: secs(30),
            check: c2_classical_reduction,
        },
        Criterion {
            id: 3,
            name: "GLRT sign law and antisymmetry",
            budget: secs(5),
            check: c3_sign_law,
        },
        Criterion {
            id: 4,
            name: "convexity of the optimizer set",
            budget: secs(60),
            check: c4_convexity,
        },
        Criterion {
            id: 5,
            name: "track-and-stop delta-correctness",
            budget: secs(600),
            check: c5_delta_correct,
        },
        Criterion {
            id: 6,
            name: "slope monotone in delta",
            budget: secs(600),
            check: c6_slope,
        },
        Criterion {
            id: 7,
            name: "tracking converges to the optimizer set",
            budget: secs(600),
            check: c7_tracking,
        },
        Criterion {
            id: 8,
            name: "successive elimination correctness and bounds",
            budget: secs(300),
            check: c8_bbsea,
        },
        Criterion {
            id: 9,
            name: "order-tightness of the elimination bounds",
            budget: secs(1),
            check: c9_order,
        },
        Criterion {
            id: 10,
            name: "byte-identical reruns",
            budget: secs(600),
            check: c10_determinism,
        },
    ];
    let mut failures = 0;
    for c in criteria
        .iter()
        .filter(|c| selected.is_empty() || selected.contains(&c.id))
    {
        let start = Instant::now();
        let verdict = (c.check)();
        let elapsed = start.elapsed();
        let verdict = match verdict {
            Ok(detail) if elapsed > c.budget => Err(format!(
                "{detail}; runtime {:.1}s over budget {}s",
                elapsed.as_secs_f64(),
                c.budget.as_secs()
            )),
            other => other,
        };
        match verdict {
            Ok(detail) => println!(
                "PASS {:>2} {}: {detail} [{:.2}s]",
                c.id,
                c.name,
                elapsed.as_secs_f64()
            ),
            Err(detail) => {
                failures += 1;
                println!(
                    "FAIL {:>2} {}: {detail} [{:.2}s]",
                    c.id,
                    c.name,
                    elapsed.as_secs_f64()
                );
            }
        }
    }
    if failures > 0 {
        eprintln!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn ensure(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn gaussian(q: Vec<Vec<f64>>, mu: Vec<f64>) -> ValidatedInstance {
    ValidatedInstance::new(ProblemInstance {
        q,
        mu,
        reward_model: RewardModel::GaussianUnitVariance,
        arm_sets: None,
    })
    .expect("valid instance")
}

/// Objective written from its closed form, independent of the library.
fn oracle_psi(q: &[Vec<f64>], mu: &[f64], w: &[f64]) -> f64 {
    let k = mu.len();
    let best = (0..k).fold(0, |b, a| if mu[a] > mu[b] { a } else { b });
    let wa: Vec<f64> = (0..k)
        .map(|a| w.iter().zip(q).map(|(wm, row)| wm * row[a]).sum())
        .collect();
    (0..k)
        .filter(|&a| a != best)
        .map(|a| {
            let (x, y) = (wa[a], wa[best]);
            let h = if x + y > 0.0 { x * y / (x + y) } else { 0.0 };
            h * (mu[best] - mu[a]).powi(2) / 2.0
        })
        .fold(f64::INFINITY, f64::min)
}

/// Every point of the simplex in `dim` coordinates at spacing `1/n`.
fn simplex_grid(dim: usize, n: usize) -> Vec<Vec<f64>> {
    fn rec(dim: usize, n: usize, left: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if prefix.len() == dim - 1 {
            prefix.push(left);
            out.push(prefix.iter().map(|&c| c as f64 / n as f64).collect());
            prefix.pop();
            return;
        }
        for c in 0..=left {
            prefix.push(c);
            rec(dim, n, left - c, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(dim, n, n, &mut Vec::new(), &mut out);
    out
}

/// Grid maximum followed by lattice zooms around the incumbent.
fn brute_force_max(dim: usize, f: &dyn Fn(&[f64]) -> f64) -> f64 {
    let n = if dim <= 3 { 1000 } else { 100 };
    let mut best = vec![1.0 / dim as f64; dim];
    let mut best_v = f(&best);
    for p in simplex_grid(dim, n) {
        let v = f(&p);
        if v > best_v {
            best_v = v;
            best = p;
        }
    }
    if dim == 1 {
        return best_v;
    }
    let free = dim - 1;
    let span = 6i64;
    let side = 2 * span + 1;
    let mut h = 1.0 / n as f64;
    while h > 1e-13 {
        let center = best.clone();
        let mut moved_to_edge = false;
        for idx in 0..side.pow(free as u32) {
            let mut rem = idx;
            let mut cand = vec![0.0; dim];
            let mut edge = false;
            let mut ok = true;
            for i in 0..free {
                let off = rem % side - span;
                rem /= side;
                edge |= off.abs() == span;
                cand[i] = center[i] + off as f64 * h / 3.0;
                ok &= cand[i] >= 0.0;
            }
            let partial: f64 = cand[..free].iter().sum();
            if !ok || partial > 1.0 {
                continue;
            }
            cand[free] = 1.0 - partial;
            let v = f(&cand);
            if v > best_v {
                best_v = v;
                best = cand;
                moved_to_edge = edge;
            }
        }
        if !moved_to_edge {
            h /= 3.0;
        }
    }
    best_v
}

fn c1_flat_instance() -> Verdict {
    let inst = gaussian(
        vec![vec![0.3, 0.3, 0.3, 0.1], vec![0.3, 0.3, 0.1, 0.3]],
        vec![0.5, 0.4, 0.3, 0.3],
    );
    let mut worst: f64 = 0.0;
    for i in 0..=200 {
        let a = i as f64 / 200.0;
        let w = Allocation::new(vec![a, 1.0 - a]).map_err(|e| e.to_string())?;
        let psi = allocation::psi(&inst, &w).map_err(|e| e.to_string())?;
        worst = worst.max((psi - 7.5e-4).abs());
    }
    let s = allocation::solve(&inst, 1e-10).map_err(|e| e.to_string())?;
    let solve_err = (s.t_star - 7.5e-4).abs();
    ensure(
        worst <= 1e-12 && solve_err <= 1e-8,
        format!(
            "max |psi - 7.5e-4| = {worst:.2e} over 201 points, |t_star - 7.5e-4| = {solve_err:.2e}"
        ),
    )
}

fn c2_classical_reduction() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let k = 2 + i % 3;
        let mu: Vec<f64> = loop {
            let mu: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
            let mut sorted = mu.clone();
            sorted.sort_by(f64::total_cmp);
            if sorted.windows(2).all(|w| w[1] - w[0] > 1e-3) {
                break mu;
            }
        };
        let q: Vec<Vec<f64>> = (0..k)
            .map(|m| (0..k).map(|j| if j == m { 1.0 } else { 0.0 }).collect())
            .collect();
        let inst = gaussian(q.clone(), mu.clone());
        let s = allocation::solve(&inst, 1e-10).map_err(|e| format!("instance {i}: {e}"))?;
        let oracle = brute_force_max(k, &|w| oracle_psi(&q, &mu, w));
        let rel = (s.t_star - oracle).abs() / oracle;
        worst = worst.max(rel);
    }
    ensure(
        worst <= 1e-5,
        format!("worst relative gap {worst:.2e} over 10 instances (K = 2, 3, 4)"),
    )
}

fn c3_sign_law() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut violations, mut asymmetric, mut ties) = (0, 0, 0);
    for _ in 0..10_000 {
        let mut tally = TallyState::new(1, 2);
        let pulls = rng.random_range(2..40);
        for _ in 0..pulls {
            let arm = rng.random_range(0..2);
            // Quarter-integer rewards make exact ties of the means common.
            let reward = rng.random_range(-4..=4) as f64 / 4.0;
            tally.record(0, arm, reward);
        }
        for arm in 0..2 {
            if tally.arm_counts()[arm] == 0 {
                tally.record(0, arm, 0.0);
            }
        }
        let (ma, mb) = (tally.mu_hat(0).unwrap(), tally.mu_hat(1).unwrap());
        let z = tally.z_ab(0, 1).map_err(|e| e.to_string())?;
        let r = tally.z_ab(1, 0).map_err(|e| e.to_string())?;
        ties += usize::from(ma == mb);
        if (z >= 0.0) != (ma >= mb) || (r >= 0.0) != (mb >= ma) {
            violations += 1;
        }
        if z != -r {
            asymmetric += 1;
        }
        let n = tally.arm_counts();
        if z != glrt_statistic(n[0] as f64, ma, n[1] as f64, mb) {
            asymmetric += 1;
        }
    }
    ensure(
        violations == 0 && asymmetric == 0,
        format!("{violations} sign violations, {asymmetric} antisymmetry breaks in 10000 tallies ({ties} ties)"),
    )
}

fn random_instance(rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<f64>) {
    let m = rng.random_range(1..=3);
    let k = rng.random_range(2..=4);
    loop {
        let q: Option<Vec<Vec<f64>>> = (0..m)
            .map(|_| {
                let raw: Vec<f64> = (0..k)
                    .map(|_| {
                        if rng.random_bool(0.2) {
                            0.0
                        } else {
                            rng.random_range(0.05..1.0)
                        }
                    })
                    .collect();
                let s: f64 = raw.iter().sum();
                (s > 0.0).then(|| {
                    let mut row: Vec<f64> = raw.iter().map(|x| x / s).collect();
                    let err = 1.0 - row.iter().sum::<f64>();
                    let top = (0..k).fold(0, |b, i| if row[i] > row[b] { i } else { b });
                    row[top] += err;
                    row
                })
            })
            .collect();
        let mu: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut sorted = mu.clone();
        sorted.sort_by(f64::total_cmp);
        if let Some(q) = q {
            if sorted.windows(2).all(|w| w[1] - w[0] >= 0.05) {
                return (q, mu);
            }
        }
    }
}

fn c4_convexity() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut pairs, mut violations) = (0u64, 0u64);
    for i in 0..20 {
        let (q, mu) = random_instance(&mut rng);
        let inst = gaussian(q, mu);
        let s = allocation::solve(&inst, 1e-10).map_err(|e| format!("instance {i}: {e}"))?;
        let eps = 1e-3 * s.t_star + 1e-12;
        let set = WStarSet::new(&inst.characteristic_problem(), &s, eps);
        let members = set.members();
        for (j, a) in members.iter().enumerate() {
            for b in &members[j + 1..] {
                let mid: Vec<f64> = a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect();
                let mid = Allocation::new(mid).map_err(|e| e.to_string())?;
                pairs += 1;
                if !wstar_membership(&inst, &s, &mid, 2.0 * eps).map_err(|e| e.to_string())? {
                    violations += 1;
                }
            }
        }
    }
    ensure(
        violations == 0 && pairs > 0,
        format!("{violations} violations over {pairs} midpoint pairs on 20 instances"),
    )
}

const TRACKING_INSTANCE: &str = "
algorithm = bbmts
q = [[0.6, 0.3, 0.1],
     [0.1, 0.3, 0.6]]
mu = [1.0, 0.5, 0.25]
rho = 1
resolve = strict
";

fn experiment(extra: &str) -> Result<ExperimentOutput, String> {
    let config = parse_config(&format!("{TRACKING_INSTANCE}{extra}")).map_err(|e| e.to_string())?;
    run_experiment(&config, WORKERS).map_err(|e| e.to_string())
}

const C5_CONFIG: &str =
    "delta_grid = [0.1]\nthreshold = certified\ntrials = 200\nbase_seed = 5000\n";

fn c5_delta_correct() -> Verdict {
    let out = experiment(C5_CONFIG)?;
    let row = &out.rows[0];
    let errors = (row.error_rate * row.trials as f64).round() as u64;
    // P(X >= errors) under an error rate of exactly delta.
    let binom = Binomial::new(0.1, row.trials).map_err(|e| e.to_string())?;
    let p_value = if errors == 0 {
        1.0
    } else {
        binom.sf(errors - 1)
    };
    ensure(
        row.error_rate <= 0.1 && p_value > 0.05 && row.capped == 0,
        format!(
            "{errors}/{} errors (rate {:.3}, one-sided p = {p_value:.3}), mean tau {:.0}, {} capped",
            row.trials, row.error_rate, row.mean_tau, row.capped
        ),
    )
}

fn c6_slope() -> Verdict {
    let out = experiment(
        "delta_grid = [0.3, 0.1, 0.03]\nthreshold = practical\ntrials = 100\nbase_seed = 6000\n",
    )?;
    let slopes: Vec<f64> = out.rows.iter().map(|r| r.slope).collect();
    let monotone = slopes.windows(2).all(|w| w[1] <= w[0]);
    let capped = out.capped_trials();
    ensure(
        monotone && capped == 0,
        format!(
            "mean tau / ln(1/delta) = {slopes:.1?} for delta = [0.3, 0.1, 0.03], {capped} capped"
        ),
    )
}

fn c7_tracking() -> Verdict {
    let out = experiment("delta_grid = [0.1]\nthreshold = practical\ntrials = 50\nbase_seed = 7000\nhorizon = 100000\n")?;
    let distances: Vec<f64> = out
        .trials
        .iter()
        .map(|t| t.final_tracking_distance.unwrap_or(f64::INFINITY))
        .collect();
    let close = distances.iter().filter(|&&d| d < 0.05).count();
    let worst = distances.iter().copied().fold(0.0, f64::max);
    ensure(
        close * 100 >= 95 * distances.len() && distances.len() == 50,
        format!("{close}/50 runs within 0.05 at t = 1e5 (worst {worst:.4})"),
    )
}

const PARTITION: &str = "
algorithm = bbsea
q = [[0.5, 0.5, 0, 0],
     [0, 0, 0.5, 0.5]]
mu = [1, 0.3, 0.5, 0.0]
arm_sets = [[0, 1], [2, 3]]
";

fn c8_bbsea() -> Verdict {
    let config = parse_config(&format!(
        "{PARTITION}delta_grid = [0.1]\ntrials = 200\nbase_seed = 8000\n"
    ))
    .map_err(|e| e.to_string())?;
    let out = run_experiment(&config, WORKERS).map_err(|e| e.to_string())?;
    let row = &out.rows[0];
    let Reference::Bounds { upper, lower } = row.reference else {
        return Err("missing bounds".into());
    };
    let within = out
        .trials
        .iter()
        .filter(|t| !t.capped && (t.tau as f64) <= upper)
        .count();
    ensure(
        row.error_rate <= 0.1 && within * 10 >= 9 * out.trials.len() && row.mean_tau >= lower,
        format!(
            "error rate {:.3}, {within}/{} runs with tau <= sum beta = {upper:.0}, mean tau {:.0} >= lower bound {lower:.1}",
            row.error_rate,
            out.trials.len(),
            row.mean_tau
        ),
    )
}

fn c9_order() -> Verdict {
    let config =
        parse_config(&format!("{PARTITION}delta_grid = [0.1]\n")).map_err(|e| e.to_string())?;
    let ratios = [1e-1, 1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&d| order_check(&config.instance, d).map(|r| r.ratio))
        .collect::<Result<Vec<f64>, _>>()
        .map_err(|e| e.to_string())?;
    let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    ensure(
        max / min <= 10.0 && min > 0.0,
        format!("upper/lower ratios {ratios:.1?}, spread {:.2}", max / min),
    )
}

fn c10_determinism() -> Verdict {
    let dirs = [tempfile::tempdir(), tempfile::tempdir()];
    let mut contents = Vec::new();
    for dir in &dirs {
        let dir = dir.as_ref().map_err(|e| e.to_string())?;
        let out = experiment(C5_CONFIG)?;
        let files = write_outputs(dir.path(), &out).map_err(|e| e.to_string())?;
        let bytes = files
            .iter()
            .map(std::fs::read)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        contents.push(bytes);
    }
    let size: usize = contents[0].iter().map(Vec::len).sum();
    ensure(
        contents[0] == contents[1],
        format!("two runs of the delta-correctness experiment wrote {size} identical bytes"),
    )
}
