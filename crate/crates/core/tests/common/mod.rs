#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rispriv_core::linalg::{c, complex_gaussian, kron, CMat, CVec, ONE};
use rispriv_core::pdd::initial_design;
use rispriv_core::sensing::{assemble_observation, draw_symbols, ObservationBlock};
use rispriv_core::{
    ChannelSet, Design, PriorScenario, PriorSet, ScenarioModel, SymbolBlock, SystemConfig,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Small instance used by the simulation oracles.
pub fn small_config(scenario: PriorScenario) -> SystemConfig {
    let cfg = SystemConfig {
        m_a: 2,
        m_s: 2,
        m_r: 4,
        m_min: 2,
        k: 4,
        ..SystemConfig::default()
    };
    scenario.apply(&cfg)
}

pub struct Instance {
    pub config: SystemConfig,
    pub channels: ChannelSet,
    pub priors: PriorSet,
    pub symbols: SymbolBlock,
    pub design: Design,
    pub obs: ObservationBlock,
}

pub fn instance(config: &SystemConfig, seed: u64) -> Instance {
    let model = ScenarioModel::new(config).unwrap();
    let mut r = rng(seed);
    let channels = model.sample_channels(&mut r);
    let priors = model.derive_priors(&mut r);
    let symbols = draw_symbols(&mut r, config.m_min, config.m_a, config.k);
    let design = initial_design(config, &mut r);
    let obs = assemble_observation(&design, &channels, config, &symbols).unwrap();
    Instance {
        config: config.clone(),
        channels,
        priors,
        symbols,
        design,
        obs,
    }
}

/// Scalar configuration without RIS: one antenna everywhere, one slot.
pub fn scalar_config(noise: f64) -> SystemConfig {
    SystemConfig {
        m_a: 1,
        m_b: 1,
        m_s: 1,
        m_r: 0,
        m_min: 1,
        k: 1,
        sigma2_s: noise,
        sigma2_b: noise,
        ..SystemConfig::default()
    }
}

pub fn scalar_matrix(v: f64) -> CMat {
    CMat::from_element(1, 1, c(v, 0.0))
}

/// Observation block for a single transmitted scalar `x`.
pub fn scalar_observation(x: f64) -> ObservationBlock {
    let xm = scalar_matrix(x);
    ObservationBlock {
        w_c: CMat::from_element(1, 1, ONE),
        w_s: CMat::zeros(1, 1),
        x: xm.clone(),
        xtil: kron(&xm.transpose(), &CMat::identity(1, 1)),
        xbrk: CMat::zeros(1, 0),
        xbrk_s: CMat::zeros(1, 0),
        m_s: 1,
    }
}

pub fn scalar_priors(sigma: f64, sigmahat: f64) -> PriorSet {
    let mu = CVec::from_element(1, c(0.3, -0.1));
    PriorSet {
        mu_as: mu.clone(),
        sigma_as: scalar_matrix(sigma),
        sigma_rs: CMat::zeros(0, 0),
        muhat_a_as: mu.clone(),
        muhat_s_as: mu,
        sigmahat_a_as: scalar_matrix(sigmahat),
        sigmahat_s_as: scalar_matrix(sigmahat),
        sigmahat_a_rs: CMat::zeros(0, 0),
        sigmahat_s_rs: CMat::zeros(0, 0),
    }
}

pub fn random_matrix(seed: u64, rows: usize, cols: usize) -> CMat {
    complex_gaussian(&mut rng(seed), rows, cols)
}
