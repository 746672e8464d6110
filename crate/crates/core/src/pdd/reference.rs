//! Dense evaluation of the gradient expressions with every auxiliary matrix
//! formed explicitly. Cubic in the problem size and quadratic in `m_R`; used
//! as an independent route for checking the fast gradients.

use crate::comm::{composite_channel, Design, RateContext};
use crate::error::Result;
use crate::linalg::{block_trace, c, identity, kron, trace_re, CMat, CVec, HermitianFactor};
use crate::sensing::cascade_symbols;

use super::{PddState, Problem};

#[derive(Debug, Clone)]
pub struct DenseGradient {
    pub f_c: CMat,
    pub f_s: CMat,
    pub theta: CVec,
}

/// Which form of the rate term in the `F_s` gradient to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArtificialNoiseRateTerm {
    /// `(Ẑ^H D Ẑ + tr(D)(ς²_AB I + ς²_RB H_AR^H H_AR)) F_s`.
    Exact,
    /// `tr(D)(Ẑ^H Ẑ + ς²_AB I + ς²_RB H_AR^H H_AR) F_s`, the trace pulled
    /// out of the first product as well.
    TraceFactored,
}

struct Operators {
    xtil: CMat,
    xbrk: CMat,
    r1: CMat,
    r2_inv: CMat,
    r: CMat,
    sigma_ars: CMat,
}

fn operators(problem: &Problem<'_>, design: &Design) -> Result<Operators> {
    let cfg = problem.config;
    let sig_a = &problem.priors.sigmahat_a_as;
    let sig_r = &problem.priors.sigmahat_a_rs;
    let eye_s = identity(cfg.m_s);
    let x = &design.f_c * &problem.symbols.w_c + &design.f_s * &problem.symbols.w_s;
    let xtil = kron(&x.transpose(), &eye_s);
    let xbrk = kron(
        &cascade_symbols(&x, &problem.channels.h_ar, &design.theta),
        &eye_s,
    );
    let sigma_ars = if cfg.m_r > 0 {
        &xbrk * sig_r * xbrk.adjoint()
    } else {
        CMat::zeros(xtil.nrows(), xtil.nrows())
    };
    let r1 = sig_a * xtil.adjoint();
    let mut r2 = &xtil * &r1 + &sigma_ars;
    for i in 0..r2.nrows() {
        r2[(i, i)] += c(cfg.sigma2_s, 0.0);
    }
    let r2_inv = HermitianFactor::new(&r2, "dense inner covariance")?.inverse();
    let r = &r1 * &r2_inv;
    Ok(Operators {
        xtil,
        xbrk,
        r1,
        r2_inv,
        r,
        sigma_ars,
    })
}

/// Gradient of the normalized predicted objective.
pub fn dense_sensing_gradient(problem: &Problem<'_>, design: &Design) -> Result<DenseGradient> {
    let cfg = problem.config;
    let m_s = cfg.m_s;
    let sig_a = &problem.priors.sigmahat_a_as;
    let sig_r = &problem.priors.sigmahat_a_rs;
    let h_ar = &problem.channels.h_ar;
    let eye_s = identity(m_s);
    let op = operators(problem, design)?;
    let (xtil, xbrk, r, r1, r2_inv) = (&op.xtil, &op.xbrk, &op.r, &op.r1, &op.r2_inv);
    let n = sig_a.nrows();
    let scale = 1.0 / trace_re(&problem.priors.sigma_as);

    let m1 = sig_a * (identity(n) - r * xtil).adjoint();
    let m2 = r2_inv * xtil * &m1 * r + r.adjoint() * m1.adjoint() * xtil.adjoint() * r2_inv;
    let m3 = r2_inv * xtil * &m1 * sig_a + r.adjoint() * m1.adjoint();

    let mut noise = op.sigma_ars.clone();
    for i in 0..noise.nrows() {
        noise[(i, i)] += c(cfg.sigma2_s, 0.0);
    }
    let u1 = &noise * r.adjoint();
    let u2 = r.adjoint() * r;
    let u3 = r2_inv * &u1 * r + r.adjoint() * u1.adjoint() * r2_inv;
    let u4 = (r2_inv * &u1 - &u3 * xtil) * sig_a;

    // (Θ* H_AR*) ⊗ I
    let theta_h = {
        let mut m = h_ar.map(|z| z.conj());
        for (row, t) in design.theta.iter().enumerate() {
            let tc = t.conj();
            m.row_mut(row).iter_mut().for_each(|z| *z *= tc);
        }
        kron(&m, &eye_s)
    };

    let precoder_grad = |w: &CMat| -> CMat {
        let wk = kron(&w.map(|z| z.conj()), &eye_s);
        let mut m = &wk * (&m2 * xtil * sig_a - &m3);
        let mut u = u4.clone();
        if cfg.m_r > 0 {
            m += &wk * &m2 * xbrk * sig_r * &theta_h;
            let u5 = (&u2 - &u3) * xbrk * sig_r;
            u += u5 * &theta_h;
        }
        let total = m + &wk * u;
        block_trace(&total, m_s).transpose().scale(scale)
    };
    let f_c = precoder_grad(&problem.symbols.w_c);
    let f_s = precoder_grad(&problem.symbols.w_s);

    let theta = if cfg.m_r > 0 {
        let x = &design.f_c * &problem.symbols.w_c + &design.f_s * &problem.symbols.w_s;
        let hx_conj = kron(&(h_ar * &x).map(|z| z.conj()), &eye_s);
        let v1 = {
            let t = xtil * &m1 * r1;
            &t + t.adjoint()
        };
        let v2 = r2_inv * &v1 * r2_inv * xbrk * sig_r;
        let v3 = &hx_conj * v2;
        let j1 = {
            let t = &u1 * r1;
            &t + t.adjoint()
        };
        let j2 = &u2 * xbrk * sig_r;
        let j3 = j2 - r2_inv * &j1 * r2_inv * xbrk * sig_r;
        let j4 = &hx_conj * j3;
        let full = block_trace(&(v3 + j4), m_s);
        CVec::from_fn(cfg.m_r, |i, _| full[(i, i)] * scale)
    } else {
        CVec::zeros(0)
    };
    Ok(DenseGradient { f_c, f_s, theta })
}

/// Gradient of the QoS residual `f = 1 + τ − C/𝒞`.
pub fn dense_residual_gradient(
    problem: &Problem<'_>,
    design: &Design,
    term: ArtificialNoiseRateTerm,
) -> Result<DenseGradient> {
    let cfg = problem.config;
    let ch = problem.channels;
    let ctx = RateContext::new(design, ch, cfg)?;
    let z = composite_channel(ch, &design.theta)?;
    let tr_d = trace_re(&ctx.d);
    let mut csi = identity(cfg.m_a).scale(cfg.varsigma2_ab);
    if cfg.m_r > 0 {
        csi += (ch.h_ar.adjoint() * &ch.h_ar).scale(cfg.varsigma2_rb);
    }
    let inv_c = 1.0 / cfg.rate_threshold;
    let f_c = (csi.scale(tr_d) - z.adjoint() * &ctx.e_inv * &z) * &design.f_c * c(inv_c, 0.0);
    let f_s = match term {
        ArtificialNoiseRateTerm::Exact => {
            (z.adjoint() * &ctx.d * &z + csi.scale(tr_d)) * &design.f_s
        }
        ArtificialNoiseRateTerm::TraceFactored => {
            ((z.adjoint() * &z + &csi).scale(tr_d)) * &design.f_s
        }
    }
    .scale(inv_c);
    let theta = if cfg.m_r > 0 {
        let l = &ctx.d * &z * &design.f_s * design.f_s.adjoint()
            - &ctx.e_inv * &z * &design.f_c * design.f_c.adjoint();
        let full = ch.hhat_rb.adjoint() * l * ch.h_ar.adjoint();
        CVec::from_fn(cfg.m_r, |i, _| full[(i, i)] * inv_c)
    } else {
        CVec::zeros(0)
    };
    Ok(DenseGradient { f_c, f_s, theta })
}

/// `∇ξ̄ − (ν + f/ρ) ∇f`.
pub fn dense_augmented_gradient(
    problem: &Problem<'_>,
    design: &Design,
    state: &PddState,
    term: ArtificialNoiseRateTerm,
) -> Result<DenseGradient> {
    let sensing = dense_sensing_gradient(problem, design)?;
    let residual = dense_residual_gradient(problem, design, term)?;
    let eval = problem.evaluate(design)?;
    let w = state.nu + problem.residual(&eval, state.tau) / state.rho;
    Ok(DenseGradient {
        f_c: sensing.f_c - residual.f_c.scale(w),
        f_s: sensing.f_s - residual.f_s.scale(w),
        theta: sensing.theta - residual.theta.scale(w),
    })
}
