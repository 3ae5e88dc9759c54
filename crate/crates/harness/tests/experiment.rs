use boxed_bandit_harness::experiment::Reference;
use boxed_bandit_harness::report::{summary_csv, trials_csv, SUMMARY_HEADER};
use boxed_bandit_harness::{parse_config, run_experiment};

const BBMTS: &str = "
algorithm = bbmts
q = [[0.6, 0.3, 0.1],
     [0.1, 0.3, 0.6]]
mu = [1.0, 0.5, 0.25]
delta_grid = [0.1, 0.01]
rho = 1
threshold = practical
trials = 12
base_seed = 100
";

const BBSEA: &str = "
algorithm = bbsea
q = [[0.5, 0.5, 0, 0], [0, 0, 0.5, 0.5]]
mu = [1, 0.3, 0.5, 0]
arm_sets = [[0, 1], [2, 3]]
delta_grid = [0.1]
trials = 20
";

#[test]
fn flat_instance_config_parses() {
    let c = parse_config(
        "algorithm = bbmts\n\
         q = [[0.3, 0.3, 0.3, 0.1], [0.3, 0.3, 0.1, 0.3]]\n\
         mu = [0.5, 0.4, 0.3, 0.3]\n\
         delta_grid = [0.1]\n\
         rho = 1\n",
    )
    .unwrap();
    assert_eq!((c.instance.num_boxes(), c.instance.num_arms()), (2, 4));
}

#[test]
fn worker_count_does_not_change_output() {
    let config = parse_config(BBMTS).unwrap();
    let one = run_experiment(&config, 1).unwrap();
    let three = run_experiment(&config, 3).unwrap();
    assert_eq!(summary_csv(&one.rows), summary_csv(&three.rows));
    assert_eq!(trials_csv(&one.trials), trials_csv(&three.trials));
}

#[test]
fn every_trial_is_reported_in_seed_order() {
    let config = parse_config(BBMTS).unwrap();
    let out = run_experiment(&config, 2).unwrap();
    assert_eq!(out.trials.len(), 24);
    for (group, &delta) in out.trials.chunks(12).zip(&config.delta_grid) {
        let seeds: Vec<u64> = group.iter().map(|t| t.seed).collect();
        assert_eq!(seeds, (100..112).collect::<Vec<_>>());
        assert!(group.iter().all(|t| t.delta == delta));
    }
    for (row, group) in out.rows.iter().zip(out.trials.chunks(12)) {
        let errors = group.iter().filter(|t| !t.correct).count();
        assert_eq!(row.error_rate, errors as f64 / 12.0);
        assert!((0.0..=1.0).contains(&row.error_rate));
        assert!(row.mean_tau >= 2.0);
        assert!(matches!(row.reference, Reference::TStar(t) if (t - 0.024942).abs() < 1e-5));
        assert!(row.tracking_distance.is_some());
    }
    let csv = summary_csv(&out.rows);
    assert_eq!(csv.lines().next(), Some(SUMMARY_HEADER));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn capped_trials_are_flagged_not_dropped() {
    let text = BBMTS.replace("trials = 12", "trials = 4\nmax_steps = 5");
    let out = run_experiment(&parse_config(&text).unwrap(), 1).unwrap();
    assert_eq!(out.trials.len(), 8);
    assert!(out.trials.iter().all(|t| t.capped && !t.correct));
    assert_eq!(out.capped_trials(), 8);
    assert_eq!(out.rows[0].error_rate, 1.0);
}

#[test]
fn bbsea_rows_carry_bounds() {
    let out = run_experiment(&parse_config(BBSEA).unwrap(), 2).unwrap();
    assert_eq!(out.trials.len(), 20);
    match out.rows[0].reference {
        Reference::Bounds { upper, lower } => assert!(upper > lower && lower > 0.0),
        other => panic!("{other:?}"),
    }
    assert!(out.rows[0].tracking_distance.is_none());
    assert!(out.t_star.is_none());
}

#[test]
fn traces_are_sampled_when_requested() {
    let text = BBMTS.replace(
        "trials = 12",
        "trials = 2\nhorizon = 300\ntrace_every = 100",
    );
    let out = run_experiment(&parse_config(&text).unwrap(), 1).unwrap();
    for t in &out.trials {
        assert_eq!(t.tau, 300);
        assert_eq!(
            t.trace.iter().map(|p| p.t).collect::<Vec<_>>(),
            vec![100, 200, 300]
        );
    }
}
