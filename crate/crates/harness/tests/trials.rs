use rispriv_core::sensing::{assemble_observation, lmmse_gain_sensor};
use rispriv_core::{PriorScenario, ScenarioModel, SystemConfig};
use rispriv_harness::trial::{trial_rng, TrialInstance};
use rispriv_harness::{run_trial, write_csv, HarnessError, TrialOptions};

fn desk(scenario: PriorScenario) -> SystemConfig {
    scenario.apply(&SystemConfig::default())
}

#[test]
fn trials_are_reproducible() {
    let cfg = desk(PriorScenario::ImperfectBoth);
    let opts = TrialOptions::default();
    let a = run_trial(&cfg, 16.0, &opts, 7, 3).unwrap();
    let b = run_trial(&cfg, 16.0, &opts, 7, 3).unwrap();
    assert!(!a.failed);
    assert_eq!(
        (
            a.nmse_analytic,
            a.nmse_mc,
            a.rate,
            a.iterations,
            a.aoa_error_deg
        ),
        (
            b.nmse_analytic,
            b.nmse_mc,
            b.rate,
            b.iterations,
            b.aoa_error_deg
        )
    );
    let other = run_trial(&cfg, 16.0, &opts, 7, 4).unwrap();
    assert_ne!(a.nmse_analytic, other.nmse_analytic);
}

#[test]
fn transmitter_only_errors_leave_the_sensor_filter_unchanged() {
    let perfect = desk(PriorScenario::Perfect);
    let imperfect = desk(PriorScenario::ImperfectA);
    let gain = |cfg: &SystemConfig| {
        let model = ScenarioModel::new(cfg).unwrap();
        let inst = TrialInstance::draw(&model, &mut trial_rng(5, 0));
        let obs = assemble_observation(&inst.initial, &inst.channels, cfg, &inst.symbols).unwrap();
        lmmse_gain_sensor(&obs, &inst.priors, cfg).unwrap().gain
    };
    assert_eq!(gain(&perfect), gain(&imperfect));
}

#[test]
fn perfect_prior_simulated_nmse_matches_analytic() {
    let cfg = desk(PriorScenario::Perfect);
    let opts = TrialOptions {
        monte_carlo_draws: 2000,
        ..TrialOptions::default()
    };
    let rec = run_trial(&cfg, 16.0, &opts, 1, 0).unwrap();
    let rel = (rec.nmse_mc - rec.nmse_analytic).abs() / rec.nmse_analytic;
    assert!(
        rel <= 0.03,
        "analytic {} simulated {}",
        rec.nmse_analytic,
        rec.nmse_mc
    );
}

#[test]
fn converged_trials_are_feasible() {
    let cfg = desk(PriorScenario::ImperfectBoth);
    for t in 0..3 {
        let rec = run_trial(&cfg, 16.0, &TrialOptions::default(), 1, t).unwrap();
        assert!(rec.feasible, "trial {t}: rate {}", rec.rate);
    }
}

#[test]
fn invalid_config_is_rejected() {
    let cfg = SystemConfig {
        k: 0,
        ..SystemConfig::default()
    };
    assert!(matches!(
        run_trial(&cfg, 0.0, &TrialOptions::default(), 1, 0),
        Err(HarnessError::Core(_))
    ));
}

#[test]
fn unwritable_output_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("missing").join("out.csv");
    assert!(matches!(
        write_csv(&[], &path),
        Err(HarnessError::Write { .. })
    ));
}
