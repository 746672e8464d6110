//! Observation model at the sensor, mismatched LMMSE filters and the true and
//! predicted estimation errors.

use rand::Rng;

use crate::comm::Design;
use crate::error::{check_shape, Result};
use crate::linalg::{
    c, complex_gaussian_vec, hermitian_sqrt, kron, trace_of_product, trace_re, CMat, CVec,
    HermitianFactor,
};
use crate::scenario::{ChannelSet, PriorSet, SystemConfig};

/// Symbol and artificial-noise blocks over the K observation slots.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolBlock {
    pub w_c: CMat,
    pub w_s: CMat,
}

/// Draws `CN(0, I)` symbols slot by slot, so a longer block extends a
/// shorter one drawn from the same stream.
pub fn draw_symbols<R: Rng + ?Sized>(
    rng: &mut R,
    m_min: usize,
    m_a: usize,
    k: usize,
) -> SymbolBlock {
    let mut w_c = CMat::zeros(m_min, k);
    let mut w_s = CMat::zeros(m_a, k);
    for slot in 0..k {
        w_c.set_column(slot, &complex_gaussian_vec(rng, m_min));
        w_s.set_column(slot, &complex_gaussian_vec(rng, m_a));
    }
    SymbolBlock { w_c, w_s }
}

/// Transmit block and the vectorized observation operators.
#[derive(Debug, Clone)]
pub struct ObservationBlock {
    pub w_c: CMat,
    pub w_s: CMat,
    /// `F_c W_c + F_s W_s`.
    pub x: CMat,
    /// `X^T ⊗ I_{m_S}`.
    pub xtil: CMat,
    /// `(X^T H_AR^T Θ) ⊗ I_{m_S}`.
    pub xbrk: CMat,
    /// As `xbrk`, with the sensor's A–R estimate.
    pub xbrk_s: CMat,
    pub m_s: usize,
}

/// `K × m_R` matrix `X^T H^T diag(θ)`, i.e. `(diag(θ) H X)^T`.
pub fn cascade_symbols(x: &CMat, h_ar: &CMat, theta: &CVec) -> CMat {
    let mut hx = h_ar * x;
    for (r, t) in theta.iter().enumerate() {
        hx.row_mut(r).iter_mut().for_each(|z| *z *= t);
    }
    hx.transpose()
}

pub fn assemble_observation(
    design: &Design,
    channels: &ChannelSet,
    config: &SystemConfig,
    symbols: &SymbolBlock,
) -> Result<ObservationBlock> {
    design.check(config)?;
    check_shape(
        "symbol block W_c",
        symbols.w_c.shape(),
        (config.m_min, config.k),
    )?;
    check_shape(
        "symbol block W_s",
        symbols.w_s.shape(),
        (config.m_a, config.k),
    )?;
    let x = &design.f_c * &symbols.w_c + &design.f_s * &symbols.w_s;
    let eye = CMat::identity(config.m_s, config.m_s);
    let xtil = kron(&x.transpose(), &eye);
    let xbrk = kron(&cascade_symbols(&x, &channels.h_ar, &design.theta), &eye);
    let xbrk_s = kron(
        &cascade_symbols(&x, &channels.hhat_s_ar, &design.theta),
        &eye,
    );
    Ok(ObservationBlock {
        w_c: symbols.w_c.clone(),
        w_s: symbols.w_s.clone(),
        x,
        xtil,
        xbrk,
        xbrk_s,
        m_s: config.m_s,
    })
}

pub fn build_observation<R: Rng + ?Sized>(
    design: &Design,
    channels: &ChannelSet,
    config: &SystemConfig,
    rng: &mut R,
) -> Result<ObservationBlock> {
    let symbols = draw_symbols(rng, config.m_min, config.m_a, config.k);
    assemble_observation(design, channels, config, &symbols)
}

/// `gain = cross · inner_cov^{-1}`.
#[derive(Debug, Clone)]
pub struct LmmseFilter {
    pub gain: CMat,
    pub inner_cov: CMat,
    pub cross: CMat,
    factor: HermitianFactor,
}

impl LmmseFilter {
    /// `Σ X̃^H (X̃ Σ X̃^H + X̆ Σ_R X̆^H + σ² I)^{-1}`.
    pub fn new(
        xtil: &CMat,
        xbrk: &CMat,
        sigma_as: &CMat,
        sigma_rs: &CMat,
        noise: f64,
    ) -> Result<Self> {
        let cross = sigma_as * xtil.adjoint();
        let mut inner_cov = xtil * &cross;
        if xbrk.ncols() > 0 {
            inner_cov += xbrk * sigma_rs * xbrk.adjoint();
        }
        for i in 0..inner_cov.nrows() {
            inner_cov[(i, i)] += c(noise, 0.0);
        }
        let factor = HermitianFactor::new(&inner_cov, "LMMSE inner covariance")?;
        let gain = factor.solve(&cross.adjoint()).adjoint();
        Ok(Self {
            gain,
            inner_cov,
            cross,
            factor,
        })
    }

    pub fn factor(&self) -> &HermitianFactor {
        &self.factor
    }

    /// `I − gain · X̃`.
    pub fn residual_operator(&self, xtil: &CMat) -> CMat {
        let n = self.gain.nrows();
        CMat::identity(n, n) - &self.gain * xtil
    }
}

/// Filter designed by the sensor from its own priors and A–R estimate.
pub fn lmmse_gain_sensor(
    obs: &ObservationBlock,
    priors: &PriorSet,
    config: &SystemConfig,
) -> Result<LmmseFilter> {
    LmmseFilter::new(
        &obs.xtil,
        &obs.xbrk_s,
        &priors.sigmahat_s_as,
        &priors.sigmahat_s_rs,
        config.sigma2_s,
    )
}

/// Filter the transmitter predicts from its priors and the true cascade.
pub fn lmmse_gain_transmitter(
    obs: &ObservationBlock,
    priors: &PriorSet,
    config: &SystemConfig,
) -> Result<LmmseFilter> {
    LmmseFilter::new(
        &obs.xtil,
        &obs.xbrk,
        &priors.sigmahat_a_as,
        &priors.sigmahat_a_rs,
        config.sigma2_s,
    )
}

/// `μ̂_S + R_S (y − X̃ μ̂_S)`.
pub fn estimate_channel(
    obs: &ObservationBlock,
    filter: &LmmseFilter,
    priors: &PriorSet,
    y: &CVec,
) -> Result<CVec> {
    check_shape("observation vector", y.shape(), (obs.xtil.nrows(), 1))?;
    let innovation = y - &obs.xtil * &priors.muhat_s_as;
    Ok(&priors.muhat_s_as + &filter.gain * innovation)
}

/// Mean of the sensor's estimation error.
pub fn error_mean(obs: &ObservationBlock, filter: &LmmseFilter, priors: &PriorSet) -> CVec {
    filter.residual_operator(&obs.xtil) * (&priors.mu_as - &priors.muhat_s_as)
}

/// `X̆ Σ X̆^H + σ² I`.
fn disturbance_cov(xbrk: &CMat, sigma_rs: &CMat, noise: f64) -> CMat {
    let n = xbrk.nrows();
    let mut m = CMat::identity(n, n).scale(noise);
    if xbrk.ncols() > 0 {
        m += xbrk * sigma_rs * xbrk.adjoint();
    }
    m
}

/// Covariance of the sensor's estimation error under the true statistics.
pub fn error_covariance(
    obs: &ObservationBlock,
    filter: &LmmseFilter,
    priors: &PriorSet,
    config: &SystemConfig,
) -> CMat {
    let res = filter.residual_operator(&obs.xtil);
    let g = &filter.gain;
    &res * &priors.sigma_as * res.adjoint()
        + g * disturbance_cov(&obs.xbrk, &priors.sigma_rs, config.sigma2_s) * g.adjoint()
}

/// True Bayesian MSE of the sensor's mismatched estimator.
pub fn true_mse(obs: &ObservationBlock, priors: &PriorSet, config: &SystemConfig) -> Result<f64> {
    let filter = lmmse_gain_sensor(obs, priors, config)?;
    Ok(true_mse_with(obs, &filter, priors, config))
}

pub fn true_mse_with(
    obs: &ObservationBlock,
    filter: &LmmseFilter,
    priors: &PriorSet,
    config: &SystemConfig,
) -> f64 {
    error_mean(obs, filter, priors).norm_squared()
        + trace_re(&error_covariance(obs, filter, priors, config))
}

fn predicted_traces(
    obs: &ObservationBlock,
    filter: &LmmseFilter,
    priors: &PriorSet,
    config: &SystemConfig,
) -> f64 {
    let res = filter.residual_operator(&obs.xtil);
    let g = &filter.gain;
    let first = trace_re(&(&res * &priors.sigmahat_a_as * res.adjoint()));
    let second = trace_re(
        &(g * disturbance_cov(&obs.xbrk, &priors.sigmahat_a_rs, config.sigma2_s) * g.adjoint()),
    );
    first + second
}

/// MSE the transmitter would predict including the bias term it cannot
/// evaluate in practice (needs the true mean).
pub fn predicted_mse_full(
    obs: &ObservationBlock,
    priors: &PriorSet,
    config: &SystemConfig,
) -> Result<f64> {
    let filter = lmmse_gain_transmitter(obs, priors, config)?;
    let bias = filter.residual_operator(&obs.xtil) * (&priors.mu_as - &priors.muhat_a_as);
    Ok(bias.norm_squared() + predicted_traces(obs, &filter, priors, config))
}

/// Transmitter-side objective: the two covariance trace terms.
pub fn predicted_objective(
    obs: &ObservationBlock,
    priors: &PriorSet,
    config: &SystemConfig,
) -> Result<f64> {
    let filter = lmmse_gain_transmitter(obs, priors, config)?;
    Ok(predicted_traces(obs, &filter, priors, config))
}

/// Same value as [`predicted_objective`] via the identity
/// `tr Σ̂ − tr(R_A X̃ Σ̂)`, which holds because `R_A` solves its normal equation.
pub fn predicted_objective_reduced(filter: &LmmseFilter, xtil: &CMat, sigmahat_as: &CMat) -> f64 {
    trace_re(sigmahat_as) - trace_of_product(&(&filter.gain * xtil), sigmahat_as).re
}

pub fn normalized_objective(
    obs: &ObservationBlock,
    priors: &PriorSet,
    config: &SystemConfig,
) -> Result<f64> {
    Ok(predicted_objective(obs, priors, config)? / trace_re(&priors.sigma_as))
}

/// Draws fresh channels from the true priors and the sensor observation they
/// produce.
#[derive(Debug, Clone)]
pub struct ObservationSampler {
    mu_as: CVec,
    sqrt_as: CMat,
    sqrt_rs: CMat,
    noise: f64,
}

/// One simulated observation together with the channel that generated it.
#[derive(Debug, Clone)]
pub struct SimulatedObservation {
    pub h_as: CVec,
    pub y: CVec,
}

impl ObservationSampler {
    pub fn new(priors: &PriorSet, config: &SystemConfig) -> Self {
        Self {
            mu_as: priors.mu_as.clone(),
            sqrt_as: hermitian_sqrt(&priors.sigma_as),
            sqrt_rs: hermitian_sqrt(&priors.sigma_rs),
            noise: config.sigma2_s,
        }
    }

    pub fn sample<R: Rng + ?Sized>(
        &self,
        obs: &ObservationBlock,
        rng: &mut R,
    ) -> SimulatedObservation {
        let h_as = &self.mu_as + &self.sqrt_as * complex_gaussian_vec(rng, self.mu_as.len());
        let n = obs.xtil.nrows();
        let mut y = &obs.xtil * &h_as + complex_gaussian_vec(rng, n).scale(self.noise.sqrt());
        if self.sqrt_rs.nrows() > 0 {
            let h_rs = &self.sqrt_rs * complex_gaussian_vec(rng, self.sqrt_rs.nrows());
            y += &obs.xbrk * h_rs;
        }
        SimulatedObservation { h_as, y }
    }
}

pub fn simulate_observation<R: Rng + ?Sized>(
    priors: &PriorSet,
    config: &SystemConfig,
    obs: &ObservationBlock,
    rng: &mut R,
) -> SimulatedObservation {
    ObservationSampler::new(priors, config).sample(obs, rng)
}

/// Average squared estimation error of the sensor over `draws` simulated
/// observations.
pub fn monte_carlo_mse<R: Rng + ?Sized>(
    obs: &ObservationBlock,
    filter: &LmmseFilter,
    priors: &PriorSet,
    config: &SystemConfig,
    draws: usize,
    rng: &mut R,
) -> Result<f64> {
    let sampler = ObservationSampler::new(priors, config);
    let mut total = 0.0;
    for _ in 0..draws {
        let sim = sampler.sample(obs, rng);
        let est = estimate_channel(obs, filter, priors, &sim.y)?;
        total += (sim.h_as - est).norm_squared();
    }
    Ok(total / draws.max(1) as f64)
}
