//! Penalty dual decomposition for the privacy-aware precoder and RIS design:
//! the transmitter-side objective, its gradients, projections, the Armijo
//! line search and the inner/outer iterations.

pub mod gradcheck;
mod gradient;
mod line_search;
pub mod reference;
mod solver;

pub use gradient::{grad_f, grad_theta, sensing_gradient, AugmentedGradient, SensingGradient};
pub use line_search::{armijo_step, backtrack, ArmijoSettings, Trial};
pub use solver::{
    initial_design, inner_loop, outer_loop, project_phases, project_precoder, update_tau,
    InnerOutcome, InnerTermination, IterationRecord, OptimizerReport, PddSettings, PddState,
    Termination,
};

use crate::comm::{qos_residual, Design, RateContext};
use crate::error::Result;
use crate::linalg::{c, kron_id_left, kron_id_right, trace_re, CMat, HermitianFactor};
use crate::scenario::{ChannelSet, PriorSet, SystemConfig};
use crate::sensing::{cascade_symbols, SymbolBlock};

/// Fixed inputs of one optimization run.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub config: &'a SystemConfig,
    pub channels: &'a ChannelSet,
    pub priors: &'a PriorSet,
    pub symbols: &'a SymbolBlock,
}

/// Objective, rate and the intermediate products the gradients reuse, at
/// one design.
#[derive(Debug, Clone)]
pub struct Evaluation {
    /// `F_c W_c + F_s W_s`.
    pub x: CMat,
    /// `H_AR X`, `m_R × K`.
    pub hx: CMat,
    /// `R_A2^{-1} X̃ Σ̂_A,AS`, the adjoint of the transmitter's filter.
    pub rh: CMat,
    /// `X̃ Σ̂_A,AS`.
    pub xts: CMat,
    /// `X̆ Σ̂_A,RS`.
    pub xi: CMat,
    pub inner_factor: HermitianFactor,
    /// Unnormalized predicted MSE.
    pub objective: f64,
    /// Predicted MSE over `tr(Σ_AS)`.
    pub normalized: f64,
    pub rate: RateContext,
}

impl<'a> Problem<'a> {
    pub fn new(
        config: &'a SystemConfig,
        channels: &'a ChannelSet,
        priors: &'a PriorSet,
        symbols: &'a SymbolBlock,
    ) -> Self {
        Self {
            config,
            channels,
            priors,
            symbols,
        }
    }

    pub fn trace_sigma_as(&self) -> f64 {
        trace_re(&self.priors.sigma_as)
    }

    pub fn evaluate(&self, design: &Design) -> Result<Evaluation> {
        let cfg = self.config;
        let m_s = cfg.m_s;
        let rate = RateContext::new(design, self.channels, cfg)?;
        let x = &design.f_c * &self.symbols.w_c + &design.f_s * &self.symbols.w_s;
        let sig_a = &self.priors.sigmahat_a_as;

        let xts = kron_id_left(&x.transpose(), m_s, sig_a);
        let mut r2 = kron_id_right(&xts, &x.map(|z| z.conj()), m_s);

        let mut hx = &self.channels.h_ar * &x;
        // X̆ Σ̂_RS X̆^H + σ_S² I, the part of R2 not driven by the direct channel.
        let mut nuisance = CMat::zeros(r2.nrows(), r2.ncols());
        let xi = if cfg.m_r > 0 {
            let b = cascade_symbols(&x, &self.channels.h_ar, &design.theta);
            let xi = kron_id_left(&b, m_s, &self.priors.sigmahat_a_rs);
            nuisance = kron_id_right(&xi, &b.adjoint(), m_s);
            xi
        } else {
            hx = CMat::zeros(0, cfg.k);
            CMat::zeros(cfg.k * m_s, 0)
        };
        for i in 0..r2.nrows() {
            nuisance[(i, i)] += c(cfg.sigma2_s, 0.0);
        }
        r2 += &nuisance;
        let inner_factor = HermitianFactor::new(&r2, "transmitter LMMSE inner covariance")?;
        let rh = inner_factor.solve(&xts);
        let objective = match information_form_trace(sig_a, &x, &nuisance, m_s) {
            Some(v) => v,
            None => {
                let captured: f64 = xts
                    .iter()
                    .zip(rh.iter())
                    .map(|(a, b)| (a.conj() * b).re)
                    .sum();
                trace_re(sig_a) - captured
            }
        };
        Ok(Evaluation {
            x,
            hx,
            rh,
            xts,
            xi,
            inner_factor,
            objective,
            normalized: objective / self.trace_sigma_as(),
            rate,
        })
    }

    pub fn residual(&self, eval: &Evaluation, tau: f64) -> f64 {
        qos_residual(eval.rate.rate, self.config.rate_threshold, tau)
    }

    /// `ξ̄ − ν f − f²/(2ρ)`.
    pub fn augmented(&self, eval: &Evaluation, state: &PddState) -> f64 {
        augmented_value(
            eval.normalized,
            self.residual(eval, state.tau),
            state.nu,
            state.rho,
        )
    }
}

/// `tr[(Σ̂^{-1} + X̃^H N^{-1} X̃)^{-1}]`, the posterior trace without the
/// cancellation in `tr Σ̂ − tr(Σ̂ X̃^H R2^{-1} X̃ Σ̂)`. `None` if either
/// covariance is singular.
fn information_form_trace(sigma: &CMat, x: &CMat, nuisance: &CMat, m_s: usize) -> Option<f64> {
    let prior = HermitianFactor::new(sigma, "prior covariance").ok()?;
    let noise = HermitianFactor::new(nuisance, "nuisance covariance").ok()?;
    let xtil = crate::linalg::kron(&x.transpose(), &crate::linalg::identity(m_s));
    let w = noise.whiten(&xtil);
    let info = prior.inverse() + w.adjoint() * w;
    let posterior = HermitianFactor::new(&info, "posterior information").ok()?;
    Some(trace_re(&posterior.inverse()))
}

pub fn augmented_value(normalized: f64, residual: f64, nu: f64, rho: f64) -> f64 {
    normalized - nu * residual - residual * residual / (2.0 * rho)
}
