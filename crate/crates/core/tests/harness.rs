use cmainj::harness::{
    clip_stats, compare, run_scenario, InitialMean, InjectionMode, RunStatus, ScenarioConfig,
};
use cmainj::{ClipMode, Error};

fn sphere10() -> ScenarioConfig {
    ScenarioConfig::new("sphere", 10)
}

#[test]
fn baseline_sphere_reaches_target() {
    let log = run_scenario(&ScenarioConfig {
        seed: 7,
        ..sphere10()
    })
    .unwrap();
    assert_eq!(log.status, RunStatus::TargetReached);
    let evals = log.evals_to_target.unwrap();
    assert!(evals <= 100_000);
    assert_eq!(evals, log.total_evals);
}

#[test]
fn near_optimum_injection_speeds_up_sphere() {
    let base = run_scenario(&ScenarioConfig {
        seed: 5,
        ..sphere10()
    })
    .unwrap();
    let inj = run_scenario(&ScenarioConfig {
        seed: 5,
        injection_mode: InjectionMode::NearOptimum,
        ..sphere10()
    })
    .unwrap();
    let ratio = base.total_evals as f64 / inj.total_evals as f64;
    assert!((1.4..=3.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn csv_is_byte_identical_for_identical_configs() {
    for mode in [
        "none",
        "near_optimum",
        "direction",
        "mean_shift",
        "best_ever",
    ] {
        let cfg = ScenarioConfig {
            problem: "rosenbrock".into(),
            dim: 6,
            injection_mode: mode.parse().unwrap(),
            clip_policy: ClipMode::CdfAdaptive,
            seed: 21,
            target_f: 1e-8,
            max_evals: 4000,
            ..ScenarioConfig::default()
        };
        let a = run_scenario(&cfg).unwrap().to_csv_string();
        let b = run_scenario(&cfg).unwrap().to_csv_string();
        assert_eq!(a, b, "{mode}");
    }
}

#[test]
fn rows_match_iterations_and_evaluations() {
    let cfg = ScenarioConfig {
        problem: "rosenbrock".into(),
        injection_mode: InjectionMode::NearOptimum,
        target_f: 1e-4,
        seed: 2,
        ..sphere10()
    };
    let log = run_scenario(&cfg).unwrap();
    let lambda = 10;
    assert_eq!(log.total_evals, lambda * log.rows.len() as u64);
    for (i, row) in log.rows.iter().enumerate() {
        assert_eq!(row.iter, i as u64);
        assert_eq!(row.evals, lambda * (i as u64 + 1));
    }
    assert!(log.rows.windows(2).all(|w| w[1].best_f <= w[0].best_f));
    let csv = log.to_csv_string();
    assert_eq!(csv.lines().count(), log.rows.len() + 1);
}

#[test]
fn censored_run_reports_no_target() {
    let cfg = ScenarioConfig {
        problem: "rosenbrock".into(),
        target_f: 1e-10,
        max_evals: 505,
        ..sphere10()
    };
    let log = run_scenario(&cfg).unwrap();
    assert_eq!(log.status, RunStatus::BudgetExhausted);
    assert_eq!(log.evals_to_target, None);
    assert_eq!(log.total_evals, 500);
    assert_eq!(log.rows.len(), 50);
}

#[test]
fn unclipped_injection_from_a_tight_start_fails() {
    for seed in 1..=3 {
        let cfg = ScenarioConfig {
            problem: "rosenbrock".into(),
            sigma0: Some(0.01),
            m0: InitialMean::Zeros,
            injection_mode: InjectionMode::NearOptimum,
            clip_policy: ClipMode::Off,
            delta_sigma_max: Some(f64::INFINITY),
            target_f: 1e-4,
            max_evals: 20_000,
            seed,
            ..sphere10()
        };
        let log = run_scenario(&cfg).unwrap();
        assert!(matches!(
            log.status,
            RunStatus::Diverged | RunStatus::BudgetExhausted
        ));
        assert_eq!(log.evals_to_target, None);
        assert_eq!(log.rows.len() as u64 * 10, log.total_evals);

        let clipped = run_scenario(&ScenarioConfig {
            clip_policy: ClipMode::HardClip,
            delta_sigma_max: None,
            ..cfg
        })
        .unwrap();
        assert_eq!(clipped.status, RunStatus::TargetReached);
    }
}

#[test]
fn compare_identical_configs_gives_unit_ratio() {
    let cfg = ScenarioConfig {
        dim: 5,
        ..sphere10()
    };
    let report = compare(&cfg, &cfg, &[1, 2, 3, 4]).unwrap();
    assert_eq!(report.ratio, 1.0);
    assert_eq!(report.ratio_min, 1.0);
    assert_eq!(report.ratio_max, 1.0);
    assert!(!report.censored);
    assert_eq!(report.outcomes.len(), 4);
}

#[test]
fn compare_flags_censoring() {
    let a = ScenarioConfig {
        dim: 5,
        max_evals: 40,
        ..sphere10()
    };
    let b = ScenarioConfig {
        dim: 5,
        ..sphere10()
    };
    let report = compare(&a, &b, &[1, 2]).unwrap();
    assert!(report.censored);
    assert!(report
        .outcomes
        .iter()
        .all(|o| o.status_a == RunStatus::BudgetExhausted));
    assert!(report.outcomes.iter().all(|o| o.evals_a == 40));

    let mut csv = Vec::new();
    report.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.contains("budget_exhausted"));
}

#[test]
fn compare_rejects_mismatched_scenarios() {
    let a = sphere10();
    let b = ScenarioConfig {
        target_f: 1e-3,
        ..sphere10()
    };
    assert!(matches!(compare(&a, &b, &[1]), Err(Error::Config(_))));
    assert!(matches!(compare(&a, &a, &[]), Err(Error::Config(_))));
}

#[test]
fn invalid_configs_are_rejected() {
    let unknown = ScenarioConfig {
        problem: "ackley".into(),
        ..sphere10()
    };
    assert_eq!(
        run_scenario(&unknown).unwrap_err(),
        Error::UnknownProblem("ackley".into())
    );
    for bad in [
        ScenarioConfig {
            target_f: 0.0,
            ..sphere10()
        },
        ScenarioConfig {
            max_evals: 5,
            ..sphere10()
        },
        ScenarioConfig {
            sigma0: Some(-1.0),
            ..sphere10()
        },
        ScenarioConfig {
            lambda: Some(1),
            ..sphere10()
        },
        ScenarioConfig {
            m0: InitialMean::Values(vec![1.0; 3]),
            ..sphere10()
        },
        ScenarioConfig {
            injection_scale: f64::NAN,
            ..sphere10()
        },
    ] {
        assert!(
            matches!(run_scenario(&bad), Err(Error::Config(_))),
            "{bad:?}"
        );
    }
}

#[test]
fn elitist_rastrigin_terminates_cleanly() {
    let log = run_scenario(&ScenarioConfig {
        problem: "rastrigin".into(),
        injection_mode: InjectionMode::BestEverElitist,
        max_evals: 20_000,
        ..sphere10()
    })
    .unwrap();
    assert_ne!(log.status, RunStatus::Diverged);
    assert!(log
        .rows
        .iter()
        .all(|r| r.sigma.is_finite() && r.best_f.is_finite()));
}

#[test]
fn clip_stats_small_dimension() {
    let s = clip_stats(2, 200_000, 3).unwrap();
    let exact = (-(1.0 + 2f64.sqrt()).powi(2) / 2.0).exp();
    assert!((s.fraction - exact).abs() < 4.0 * s.std_error, "{s:?}");
    assert!(clip_stats(2, 100, 3).is_err());
    assert!(clip_stats(0, 100_000, 3).is_err());
}
