//! Closed-form gradients with respect to `F_c*`, `F_s*` and `θ*`.
//!
//! The predicted objective reduces to `tr Σ̂ − tr(Σ̂ X̃^H R2^{-1} X̃ Σ̂)`, so its
//! sensitivities to `X̃*` and `X̆*` are
//! `−rh (Σ̂ − rh^H X̃Σ̂)` and `rh rh^H X̆Σ̂_RS` with `rh = R2^{-1} X̃ Σ̂`.
//! Both operators are Kronecker products with `I_{m_S}`, so only the block
//! traces of these sensitivities are needed; for `X̆` that is a block-diagonal
//! contraction whose cost is linear in `m_R`.

use crate::comm::Design;
use crate::linalg::{block_trace, block_trace_of_product, CMat, CVec};

use super::{Evaluation, PddState, Problem};

/// Gradient of the normalized predicted objective.
#[derive(Debug, Clone)]
pub struct SensingGradient {
    pub f_c: CMat,
    pub f_s: CMat,
    pub theta: CVec,
}

/// Gradient of the augmented Lagrangian.
#[derive(Debug, Clone)]
pub struct AugmentedGradient {
    pub f_c: CMat,
    pub f_s: CMat,
    pub theta: CVec,
}

/// `∂ξ/∂B*` for `B = X^T H_AR^T Θ`, `K × m_R`.
fn cascade_sensitivity(problem: &Problem<'_>, eval: &Evaluation) -> CMat {
    let m_s = problem.config.m_s;
    let y = eval.rh.adjoint() * &eval.xi;
    block_trace_of_product(&eval.rh, &y, m_s)
}

fn theta_from_cascade(tb: &CMat, hx: &CMat, scale: f64) -> CVec {
    CVec::from_fn(tb.ncols(), |r, _| {
        (0..tb.nrows())
            .map(|k| tb[(k, r)] * hx[(r, k)].conj())
            .sum::<num_complex::Complex64>()
            * scale
    })
}

pub fn sensing_gradient(
    problem: &Problem<'_>,
    design: &Design,
    eval: &Evaluation,
) -> SensingGradient {
    let m_s = problem.config.m_s;
    let scale = 1.0 / problem.trace_sigma_as();
    let sig_a = &problem.priors.sigmahat_a_as;

    let retained = sig_a - eval.rh.adjoint() * &eval.xts;
    let gx = -(&eval.rh * retained);
    let mut dx = block_trace(&gx, m_s).transpose();

    let theta = if problem.config.m_r > 0 {
        let tb = cascade_sensitivity(problem, eval);
        let mut weighted = tb.transpose();
        for (r, t) in design.theta.iter().enumerate() {
            let tc = t.conj();
            weighted.row_mut(r).iter_mut().for_each(|z| *z *= tc);
        }
        dx += problem.channels.h_ar.adjoint() * weighted;
        theta_from_cascade(&tb, &eval.hx, scale)
    } else {
        CVec::zeros(0)
    };
    dx.scale_mut(scale);
    SensingGradient {
        f_c: &dx * problem.symbols.w_c.adjoint(),
        f_s: &dx * problem.symbols.w_s.adjoint(),
        theta,
    }
}

/// Weight of the rate gradient inside the augmented gradient.
fn rate_weight(problem: &Problem<'_>, eval: &Evaluation, state: &PddState) -> f64 {
    let f = problem.residual(eval, state.tau);
    (state.nu + f / state.rho) / problem.config.rate_threshold
}

/// `(∇_{F_c} g, ∇_{F_s} g)`.
pub fn grad_f(
    problem: &Problem<'_>,
    design: &Design,
    eval: &Evaluation,
    state: &PddState,
) -> (CMat, CMat) {
    let sensing = sensing_gradient(problem, design, eval);
    let rate = eval.rate.gradient(design, problem.channels, problem.config);
    let w = rate_weight(problem, eval, state);
    (
        sensing.f_c + rate.f_c.scale(w),
        sensing.f_s + rate.f_s.scale(w),
    )
}

/// `∇_θ g`, touching only the `m_R` diagonal terms of every intermediate.
pub fn grad_theta(
    problem: &Problem<'_>,
    design: &Design,
    eval: &Evaluation,
    state: &PddState,
) -> CVec {
    if problem.config.m_r == 0 {
        return CVec::zeros(0);
    }
    let tb = cascade_sensitivity(problem, eval);
    let sensing = theta_from_cascade(&tb, &eval.hx, 1.0 / problem.trace_sigma_as());
    let rate = eval.rate.gradient(design, problem.channels, problem.config);
    sensing + rate.theta.scale(rate_weight(problem, eval, state))
}

impl AugmentedGradient {
    pub fn new(
        problem: &Problem<'_>,
        design: &Design,
        eval: &Evaluation,
        state: &PddState,
    ) -> Self {
        let sensing = sensing_gradient(problem, design, eval);
        let rate = eval.rate.gradient(design, problem.channels, problem.config);
        let w = rate_weight(problem, eval, state);
        Self {
            f_c: sensing.f_c + rate.f_c.scale(w),
            f_s: sensing.f_s + rate.f_s.scale(w),
            theta: sensing.theta + rate.theta.scale(w),
        }
    }
}
