mod common;

use common::*;
use proptest::prelude::*;
use rispriv_core::linalg::{c, frob_sq, CVec};
use rispriv_core::pdd::{
    initial_design, outer_loop, project_phases, project_precoder, InnerTermination,
    OptimizerReport, PddSettings, Problem, Termination,
};
use rispriv_core::sensing::draw_symbols;
use rispriv_core::{PriorScenario, ScenarioModel, SystemConfig};

fn run(cfg: &SystemConfig, seed: u64) -> OptimizerReport {
    let model = ScenarioModel::new(cfg).unwrap();
    let mut r = rng(seed);
    let channels = model.sample_channels(&mut r);
    let priors = model.derive_priors(&mut r);
    let symbols = draw_symbols(&mut r, cfg.m_min, cfg.m_a, cfg.k);
    let init = initial_design(cfg, &mut r);
    let problem = Problem::new(cfg, &channels, &priors, &symbols);
    outer_loop(&problem, init, &PddSettings::default()).unwrap()
}

#[test]
fn converged_designs_are_feasible_and_inner_loops_monotone() {
    let cfg = PriorScenario::ImperfectBoth.apply(&SystemConfig::default());
    for seed in 0..4 {
        let rep = run(&cfg, seed);
        assert!(rep.worst_inner_decrease() <= 1e-9, "seed {seed}");
        assert_eq!(rep.termination, Termination::Converged, "seed {seed}");
        assert!(rep.design.is_feasible(cfg.p_max));
        assert!(
            rep.rate >= cfg.rate_threshold - 1e-3,
            "seed {seed}: rate {}",
            rep.rate
        );
        assert!(rep.residual.abs() <= 1e-4);
    }
}

#[test]
fn slack_constraint_leaves_rate_free() {
    let cfg = SystemConfig {
        rate_threshold: 1e-9,
        ..SystemConfig::default()
    };
    let rep = run(&cfg, 1);
    assert_eq!(rep.termination, Termination::Converged);
    assert!(rep.state.tau >= 0.0);
    assert!(rep.rate > cfg.rate_threshold);
    assert!(rep.residual.abs() <= 1e-4);
}

#[test]
fn augmented_objective_jumps_only_between_inner_loops() {
    let cfg = PriorScenario::ImperfectBoth.apply(&SystemConfig::default());
    let rep = run(&cfg, 0);
    assert!(rep.outer_boundaries.len() > 1);
    for (j, &b) in rep.outer_boundaries.iter().enumerate().skip(1) {
        let before = rep.trajectory[b - 1];
        let start = rep.inner_start_values[j];
        if before.residual != 0.0 {
            assert_ne!(before.augmented, start, "boundary {j}");
        }
    }
    assert!(rep
        .inner_terminations
        .iter()
        .all(|t| *t != InnerTermination::Stall || rep.residual.abs() <= 1e-4));
}

#[test]
fn optimizer_without_ris_keeps_empty_phases() {
    let cfg = SystemConfig {
        m_r: 0,
        ..PriorScenario::Perfect.apply(&SystemConfig::default())
    };
    let rep = run(&cfg, 2);
    assert_eq!(rep.design.theta.len(), 0);
    assert!(rep.design.is_feasible(cfg.p_max));
}

#[test]
fn bad_settings_are_rejected() {
    let cfg = SystemConfig::default();
    let model = ScenarioModel::new(&cfg).unwrap();
    let mut r = rng(0);
    let channels = model.sample_channels(&mut r);
    let priors = model.derive_priors(&mut r);
    let symbols = draw_symbols(&mut r, cfg.m_min, cfg.m_a, cfg.k);
    let init = initial_design(&cfg, &mut r);
    let problem = Problem::new(&cfg, &channels, &priors, &symbols);
    let settings = PddSettings {
        rho0: -1.0,
        ..PddSettings::default()
    };
    assert!(outer_loop(&problem, init, &settings).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn precoder_projection_is_nonexpansive(seed in 0u64..10_000, p in 0.01f64..10.0) {
        let a = random_matrix(seed, 3, 2).scale(2.0);
        let b = random_matrix(seed + 1, 3, 2);
        let pa = project_precoder(&a, p);
        let pb = project_precoder(&b, p);
        prop_assert!(frob_sq(&pa) <= p * (1.0 + 1e-12));
        prop_assert!((&pa - &pb).norm() <= (&a - &b).norm() * (1.0 + 1e-12));
        prop_assert!((project_precoder(&pa, p) - &pa).norm() <= 1e-12 * pa.norm());
    }

    #[test]
    fn phase_projection_lands_on_unit_circle(re in prop::collection::vec(-5.0f64..5.0, 1..8), im in prop::collection::vec(-5.0f64..5.0, 8)) {
        let theta = CVec::from_iterator(re.len(), re.iter().zip(&im).map(|(a, b)| c(*a, *b)));
        let p = project_phases(&theta);
        prop_assert!(p.iter().all(|z| (z.norm() - 1.0).abs() <= 1e-12));
        prop_assert!((project_phases(&p) - &p).norm() <= 1e-15 * p.len() as f64);
    }
}
