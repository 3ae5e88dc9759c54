use boxed_bandit::instance::{validate, InstanceError};
use boxed_bandit::rng::TrialRng;
use boxed_bandit::{ProblemInstance, RewardModel, ValidatedInstance};

fn two_box_instance() -> ProblemInstance {
    ProblemInstance {
        q: vec![vec![0.3, 0.3, 0.3, 0.1], vec![0.3, 0.3, 0.1, 0.3]],
        mu: vec![0.5, 0.4, 0.3, 0.3],
        reward_model: RewardModel::GaussianUnitVariance,
        arm_sets: None,
    }
}

fn gaussian(q: Vec<Vec<f64>>, mu: Vec<f64>) -> ValidatedInstance {
    validate(ProblemInstance {
        q,
        mu,
        reward_model: RewardModel::GaussianUnitVariance,
        arm_sets: None,
    })
    .unwrap()
}

#[test]
fn validation_examples() {
    let inst = validate(two_box_instance()).unwrap();
    assert_eq!((inst.num_boxes(), inst.num_arms()), (2, 4));
    assert_eq!(inst.best_arm(), 0);

    let single = gaussian(vec![vec![1.0]], vec![0.0]);
    assert_eq!((single.num_boxes(), single.num_arms()), (1, 1));

    let tied = validate(ProblemInstance {
        q: vec![vec![0.5, 0.5]],
        mu: vec![0.5, 0.5],
        reward_model: RewardModel::GaussianUnitVariance,
        arm_sets: None,
    });
    assert!(matches!(tied, Err(InstanceError::TiedBestArm { .. })));
}

#[test]
fn rejects_bad_rows_and_partitions() {
    let mut bad = two_box_instance();
    bad.q[1][0] = 0.31;
    match validate(bad) {
        Err(InstanceError::RowNotStochastic { box_index, .. }) => assert_eq!(box_index, 1),
        other => panic!("unexpected {other:?}"),
    }

    // Row sums within 1e-12 pass, beyond fail.
    let mut close = two_box_instance();
    close.q[0][3] += 5e-13;
    assert!(validate(close).is_ok());

    let overlapping = ProblemInstance {
        q: vec![vec![0.5, 0.5, 0.0], vec![0.0, 0.5, 0.5]],
        mu: vec![1.0, 0.5, 0.0],
        reward_model: RewardModel::BernoulliLike,
        arm_sets: Some(vec![vec![0, 1], vec![1, 2]]),
    };
    assert!(matches!(
        validate(overlapping),
        Err(InstanceError::PartitionViolation {
            box_index: 1,
            arm: 1,
            ..
        })
    ));

    let support_mismatch = ProblemInstance {
        q: vec![vec![0.5, 0.5, 0.0], vec![0.0, 0.5, 0.5]],
        mu: vec![1.0, 0.5, 0.0],
        reward_model: RewardModel::BernoulliLike,
        arm_sets: Some(vec![vec![0, 1], vec![2]]),
    };
    assert!(matches!(
        validate(support_mismatch),
        Err(InstanceError::PartitionViolation { .. })
    ));
}

#[test]
fn gap_examples() {
    let g = validate(two_box_instance()).unwrap().gaps().unwrap();
    let expected = [0.1, 0.1, 0.2, 0.2];
    for (a, b) in g.delta.iter().zip(expected) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!((g.delta_best - 0.1).abs() < 1e-12);

    let g = gaussian(vec![vec![0.5, 0.5]], vec![1.0, 0.0])
        .gaps()
        .unwrap();
    assert_eq!(g.delta, vec![1.0, 1.0]);

    let g = gaussian(vec![vec![0.2, 0.3, 0.5]], vec![1.0, 0.5, 0.25])
        .gaps()
        .unwrap();
    assert_eq!(g.delta, vec![0.5, 0.5, 0.75]);
}

#[test]
fn degenerate_row_always_pulls_its_arm() {
    let inst = gaussian(
        vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.5, 0.5]],
        vec![1.0, 0.0, 0.5],
    );
    let mut rng = TrialRng::from_seed(5);
    for _ in 0..1000 {
        assert_eq!(inst.sample_box(0, &mut rng.env).0, 0);
    }
}

#[test]
fn arm_frequencies_follow_q() {
    let inst = validate(two_box_instance()).unwrap();
    let mut rng = TrialRng::from_seed(11);
    let n = 1_000_000;
    let mut counts = [0u64; 4];
    for _ in 0..n {
        counts[inst.sample_box(0, &mut rng.env).0] += 1;
    }
    for (c, q) in counts.iter().zip([0.3, 0.3, 0.3, 0.1]) {
        assert!((*c as f64 / n as f64 - q).abs() < 0.005);
    }
}

#[test]
fn gaussian_rewards_have_the_arm_mean() {
    let inst = gaussian(vec![vec![0.0, 1.0]], vec![1.0, 0.5]);
    let mut rng = TrialRng::from_seed(12);
    let n = 1_000_000;
    let mut sum = 0.0;
    for _ in 0..n {
        let (arm, r) = inst.sample_box(0, &mut rng.env);
        assert_eq!(arm, 1);
        sum += r;
    }
    assert!((sum / n as f64 - 0.5).abs() < 0.005);
}

#[test]
fn hoeffding_frequency_check_over_seeds() {
    let inst = validate(two_box_instance()).unwrap();
    let n = 100_000;
    let radius = 3.0 * (f64::ln(2.0 * 4.0 / 0.01) / (2.0 * n as f64)).sqrt();
    let mut violations = 0;
    for seed in 0..20 {
        let mut rng = TrialRng::from_seed(seed);
        let mut counts = [0u64; 4];
        for _ in 0..n {
            counts[inst.sample_box(1, &mut rng.env).0] += 1;
        }
        let worst = counts
            .iter()
            .zip(inst.q_row(1))
            .map(|(&c, &q)| (c as f64 / n as f64 - q).abs())
            .fold(0.0, f64::max);
        if worst > radius {
            violations += 1;
        }
    }
    assert_eq!(violations, 0);
}

#[test]
fn conditional_means_per_arm() {
    let inst = validate(two_box_instance()).unwrap();
    let mut rng = TrialRng::from_seed(3);
    let mut sums = [0.0; 4];
    let mut counts = [0u64; 4];
    for i in 0..400_000 {
        let (arm, r) = inst.sample_box(i % 2, &mut rng.env);
        sums[arm] += r;
        counts[arm] += 1;
    }
    for k in 0..4 {
        let mean = sums[k] / counts[k] as f64;
        // Four standard errors.
        let se = 1.0 / (counts[k] as f64).sqrt();
        assert!((mean - inst.mu()[k]).abs() < 4.0 * se, "arm {k}: {mean}");
    }
}

#[test]
fn bernoulli_rewards_are_binary_with_the_right_mean() {
    let inst = validate(ProblemInstance {
        q: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        mu: vec![0.7, 0.2],
        reward_model: RewardModel::BernoulliLike,
        arm_sets: Some(vec![vec![0], vec![1]]),
    })
    .unwrap();
    let mut rng = TrialRng::from_seed(4);
    let n = 200_000;
    let mut sum = 0.0;
    for _ in 0..n {
        let (_, r) = inst.sample_box(0, &mut rng.env);
        assert!(r == 0.0 || r == 1.0);
        sum += r;
    }
    assert!((sum / n as f64 - 0.7).abs() < 0.005);
}

#[test]
fn same_seed_same_trajectory() {
    let inst = validate(two_box_instance()).unwrap();
    let trajectory = |seed| {
        let mut rng = TrialRng::from_seed(seed);
        (0..500)
            .map(|i| inst.sample_box(i % 2, &mut rng.env))
            .collect::<Vec<_>>()
    };
    let a = trajectory(77);
    let b = trajectory(77);
    assert!(a
        .iter()
        .zip(&b)
        .all(|(x, y)| x.0 == y.0 && x.1.to_bits() == y.1.to_bits()));
    assert_ne!(a, trajectory(78));
}
