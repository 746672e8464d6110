//! Legitimate-link metrics: composite channel, conservative interference
//! covariance, achievable rate and the QoS residual.

use crate::error::{check_shape, Error, Result};
use crate::linalg::{c, frob_sq, trace_re, CMat, CVec, HermitianFactor, ONE};
use crate::scenario::{ChannelSet, SystemConfig};

/// Transmit precoders and RIS phase profile.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub f_c: CMat,
    pub f_s: CMat,
    pub theta: CVec,
}

impl Design {
    pub fn zeros(config: &SystemConfig) -> Self {
        Self {
            f_c: CMat::zeros(config.m_a, config.m_min),
            f_s: CMat::zeros(config.m_a, config.m_a),
            theta: CVec::from_element(config.m_r, ONE),
        }
    }

    /// `‖[F_c, F_s]‖_F²`.
    pub fn power(&self) -> f64 {
        frob_sq(&self.f_c) + frob_sq(&self.f_s)
    }

    pub fn check(&self, config: &SystemConfig) -> Result<()> {
        check_shape("design F_c", self.f_c.shape(), (config.m_a, config.m_min))?;
        check_shape("design F_s", self.f_s.shape(), (config.m_a, config.m_a))?;
        check_shape("design theta", self.theta.shape(), (config.m_r, 1))
    }

    /// Power budget within `1e-9` and unit-modulus phases within `1e-12`.
    pub fn is_feasible(&self, p_max: f64) -> bool {
        self.power() <= p_max + 1e-9 && self.theta.iter().all(|t| (t.norm() - 1.0).abs() <= 1e-12)
    }
}

/// `Ĥ_AB + Ĥ_RB diag(θ) H_AR`.
pub fn composite_channel(channels: &ChannelSet, theta: &CVec) -> Result<CMat> {
    let m_r = channels.h_ar.nrows();
    check_shape("composite channel theta", theta.shape(), (m_r, 1))?;
    check_shape(
        "composite channel H_RB",
        channels.hhat_rb.shape(),
        (channels.hhat_ab.nrows(), m_r),
    )?;
    check_shape(
        "composite channel H_AR",
        channels.h_ar.shape(),
        (m_r, channels.hhat_ab.ncols()),
    )?;
    let mut z = channels.hhat_ab.clone();
    if m_r > 0 {
        let mut scaled = channels.h_ar.clone();
        for (r, t) in theta.iter().enumerate() {
            scaled.row_mut(r).iter_mut().for_each(|z| *z *= t);
        }
        z += &channels.hhat_rb * scaled;
    }
    Ok(z)
}

fn noise_level(design: &Design, channels: &ChannelSet, config: &SystemConfig) -> f64 {
    let mut level = config.sigma2_b + config.varsigma2_ab * design.power();
    if channels.m_r() > 0 {
        level += config.varsigma2_rb
            * (frob_sq(&(&channels.h_ar * &design.f_c)) + frob_sq(&(&channels.h_ar * &design.f_s)));
    }
    level
}

fn add_identity(m: &mut CMat, v: f64) {
    for i in 0..m.nrows() {
        m[(i, i)] += c(v, 0.0);
    }
}

/// Interference-plus-noise covariance at B with the CSI-error terms replaced
/// by their expectations.
pub fn interference_covariance(
    design: &Design,
    channels: &ChannelSet,
    config: &SystemConfig,
) -> Result<CMat> {
    let z = composite_channel(channels, &design.theta)?;
    Ok(interference_from(&z, design, channels, config))
}

fn interference_from(
    z: &CMat,
    design: &Design,
    channels: &ChannelSet,
    config: &SystemConfig,
) -> CMat {
    let zs = z * &design.f_s;
    let mut q = &zs * zs.adjoint();
    add_identity(&mut q, noise_level(design, channels, config));
    q
}

/// Everything the rate and its gradients need at one design.
#[derive(Debug, Clone)]
pub struct RateContext {
    pub zhat: CMat,
    pub q: CMat,
    pub e: CMat,
    pub q_inv: CMat,
    pub e_inv: CMat,
    pub d: CMat,
    pub rate: f64,
}

/// Gradients of the rate with respect to `F_c*`, `F_s*` and `θ*`.
#[derive(Debug, Clone)]
pub struct RateGradient {
    pub f_c: CMat,
    pub f_s: CMat,
    pub theta: CVec,
}

impl RateContext {
    pub fn new(design: &Design, channels: &ChannelSet, config: &SystemConfig) -> Result<Self> {
        design.check(config)?;
        let zhat = composite_channel(channels, &design.theta)?;
        let q = interference_from(&zhat, design, channels, config);
        let zc = &zhat * &design.f_c;
        let e = &q + &zc * zc.adjoint();
        let q_fac = HermitianFactor::new(&q, "interference covariance")?;
        let e_fac = HermitianFactor::new(&e, "received covariance")?;
        // ln det(I + W^H W) with W = L_Q^{-1} Ẑ F_c; same value as
        // ln det E − ln det Q without the cancellation between two large logs.
        let w = q_fac.whiten(&zc);
        let gram = CMat::identity(w.ncols(), w.ncols()) + w.adjoint() * &w;
        let rate = HermitianFactor::new(&gram, "rate Gram matrix")?.ln_det();
        if !rate.is_finite() {
            return Err(Error::Numerical {
                what: "achievable rate",
                condition: crate::linalg::condition_number(&q),
            });
        }
        let q_inv = q_fac.inverse();
        let e_inv = e_fac.inverse();
        let d = &q_inv - &e_inv;
        Ok(Self {
            zhat,
            q,
            e,
            q_inv,
            e_inv,
            d,
            rate: rate.max(0.0),
        })
    }

    pub fn gradient(
        &self,
        design: &Design,
        channels: &ChannelSet,
        config: &SystemConfig,
    ) -> RateGradient {
        let z = &self.zhat;
        let tr_d = trace_re(&self.d);
        let ar = &channels.h_ar;
        let noise_grad = |f: &CMat| -> CMat {
            let mut g = f.scale(config.varsigma2_ab);
            if ar.nrows() > 0 {
                g += (ar.adjoint() * (ar * f)).scale(config.varsigma2_rb);
            }
            g.scale(tr_d)
        };
        let zc = z * &design.f_c;
        let zs = z * &design.f_s;
        let f_c = z.adjoint() * (&self.e_inv * &zc) - noise_grad(&design.f_c);
        let f_s = -(z.adjoint() * (&self.d * &zs)) - noise_grad(&design.f_s);

        let m_r = ar.nrows();
        let theta = if m_r == 0 {
            CVec::zeros(0)
        } else {
            // L = D Ẑ F_s F_s^H − E^{-1} Ẑ F_c F_c^H; only vecd(Ĥ_RB^H L H_AR^H) is needed.
            let l = &self.d * &zs * design.f_s.adjoint() - &self.e_inv * &zc * design.f_c.adjoint();
            let l_ar = l * ar.adjoint();
            let rb = &channels.hhat_rb;
            CVec::from_fn(m_r, |r, _| {
                -(0..rb.nrows())
                    .map(|b| rb[(b, r)].conj() * l_ar[(b, r)])
                    .sum::<num_complex::Complex64>()
            })
        };
        RateGradient { f_c, f_s, theta }
    }
}

/// `ln det(I + Ẑ F_c F_c^H Ẑ^H Q^{-1})` in nats/s/Hz.
pub fn achievable_rate(
    design: &Design,
    channels: &ChannelSet,
    config: &SystemConfig,
) -> Result<f64> {
    Ok(RateContext::new(design, channels, config)?.rate)
}

/// `1 + τ − C/𝒞`.
pub fn qos_residual(rate: f64, threshold: f64, tau: f64) -> f64 {
    1.0 + tau - rate / threshold
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{complex_gaussian, complex_gaussian_vec, is_hermitian_psd};
    use crate::scenario::ScenarioModel;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar_setup() -> (Design, ChannelSet, SystemConfig) {
        let cfg = SystemConfig {
            m_a: 1,
            m_b: 1,
            m_s: 1,
            m_r: 0,
            m_min: 1,
            sigma2_b: 1.0,
            varsigma2_ab: 0.0,
            varsigma2_rb: 0.0,
            ..SystemConfig::default()
        };
        let one = CMat::from_element(1, 1, ONE);
        let empty_r = CMat::zeros(0, 1);
        let ch = ChannelSet {
            h_ab: one.clone(),
            h_as: one.clone(),
            h_ar: empty_r.clone(),
            h_rb: CMat::zeros(1, 0),
            h_rs: CMat::zeros(1, 0),
            hhat_ab: one.clone(),
            hhat_rb: CMat::zeros(1, 0),
            hhat_s_ar: empty_r,
        };
        let d = Design {
            f_c: one,
            f_s: CMat::zeros(1, 1),
            theta: CVec::zeros(0),
        };
        (d, ch, cfg)
    }

    #[test]
    fn scalar_rate_is_ln2() {
        let (d, ch, cfg) = scalar_setup();
        let r = achievable_rate(&d, &ch, &cfg).unwrap();
        assert!((r - std::f64::consts::LN_2).abs() < 1e-14);
        let zero = Design {
            f_c: CMat::zeros(1, 1),
            ..d
        };
        assert_eq!(achievable_rate(&zero, &ch, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn residual_examples() {
        assert_eq!(qos_residual(5.0, 5.0, 0.0), 0.0);
        assert_eq!(qos_residual(10.0, 5.0, 1.0), 0.0);
        assert_eq!(qos_residual(0.0, 5.0, 0.0), 1.0);
    }

    fn random_instance(seed: u64) -> (Design, ChannelSet, SystemConfig) {
        let cfg = SystemConfig {
            m_r: 4,
            ..SystemConfig::default()
        };
        let model = ScenarioModel::new(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = model.sample_channels(&mut rng);
        let scale = (cfg.p_max / 6.0).sqrt();
        let theta = complex_gaussian_vec(&mut rng, 4).map(|z| z / z.norm());
        let d = Design {
            f_c: complex_gaussian(&mut rng, 2, 2).scale(scale),
            f_s: complex_gaussian(&mut rng, 2, 2).scale(scale),
            theta,
        };
        (d, ch, cfg)
    }

    #[test]
    fn zero_theta_leaves_direct_channel() {
        let (d, ch, _) = random_instance(1);
        let z = composite_channel(&ch, &CVec::zeros(d.theta.len())).unwrap();
        assert_eq!(z, ch.hhat_ab);
        assert!(composite_channel(&ch, &CVec::zeros(3)).is_err());
    }

    #[test]
    fn rate_paths_agree_and_d_is_psd() {
        for seed in 0..5 {
            let (d, ch, cfg) = random_instance(seed);
            let ctx = RateContext::new(&d, &ch, &cfg).unwrap();
            let zc = &ctx.zhat * &d.f_c;
            let m = CMat::identity(cfg.m_b, cfg.m_b) + &zc * zc.adjoint() * &ctx.q_inv;
            let literal = m.determinant().re.ln();
            assert!((literal - ctx.rate).abs() <= 1e-10 * ctx.rate.abs().max(1.0));
            assert!(is_hermitian_psd(
                &crate::linalg::hermitian_part(&ctx.d),
                1e-6,
                1e-10
            ));
        }
    }

    #[test]
    fn more_artificial_noise_never_helps() {
        for seed in 0..5 {
            let (d, ch, cfg) = random_instance(seed);
            let r1 = achievable_rate(&d, &ch, &cfg).unwrap();
            let louder = Design {
                f_s: d.f_s.scale(2.0),
                ..d
            };
            assert!(achievable_rate(&louder, &ch, &cfg).unwrap() <= r1 + 1e-12);
        }
    }

    #[test]
    fn zero_precoders_leave_thermal_noise() {
        let (d, ch, cfg) = random_instance(2);
        let quiet = Design {
            f_c: CMat::zeros(2, 2),
            f_s: CMat::zeros(2, 2),
            ..d
        };
        let q = interference_covariance(&quiet, &ch, &cfg).unwrap();
        let expect = CMat::identity(cfg.m_b, cfg.m_b).scale(cfg.sigma2_b);
        assert_eq!(q, expect);
    }
}
