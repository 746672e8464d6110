//! Geometry, large-scale fading, spatial correlation, channel sampling and the
//! true/presumed prior statistics of the A–S and R–S links.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, complex_gaussian, hermitian_sqrt, kron, vec_of, CMat, CVec};

const SPEED_OF_LIGHT: f64 = 299_792_458.0;
const NOISE_PSD_DBM_PER_HZ: f64 = -174.0;
const REFERENCE_DISTANCE_M: f64 = 1.0;

/// A power ratio in decibels.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Db(pub f64);

impl Db {
    pub fn linear(self) -> f64 {
        10f64.powf(self.0 / 10.0)
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

/// Thermal noise power over `bandwidth_hz` at -174 dBm/Hz.
pub fn thermal_noise_watts(bandwidth_hz: f64) -> f64 {
    10f64.powf((NOISE_PSD_DBM_PER_HZ - 30.0) / 10.0) * bandwidth_hz
}

/// Large-scale path loss `-30 - 10 α log10(d / 1 m)`.
pub fn path_loss_db(distance_m: f64, alpha: f64) -> Result<Db> {
    if !(distance_m >= REFERENCE_DISTANCE_M) {
        return Err(Error::Domain(format!(
            "distance {distance_m} m is below the 1 m reference distance"
        )));
    }
    if !(alpha > 0.0) {
        return Err(Error::Domain(format!(
            "path-loss exponent {alpha} must be positive"
        )));
    }
    Ok(Db(-30.0
        - 10.0
            * alpha
            * (distance_m / REFERENCE_DISTANCE_M).log10()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathLossExponents {
    pub ab: f64,
    #[serde(rename = "as")]
    pub as_: f64,
    pub ar: f64,
    pub rb: f64,
    pub rs: f64,
}

impl Default for PathLossExponents {
    fn default() -> Self {
        Self {
            ab: 3.6,
            as_: 3.6,
            ar: 2.2,
            rb: 2.2,
            rs: 2.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Positions {
    pub a: [f64; 3],
    pub b: [f64; 3],
    pub r: [f64; 3],
    pub s: [f64; 3],
}

impl Default for Positions {
    fn default() -> Self {
        Self {
            a: [0.0, 0.0, 0.0],
            b: [100.0, 20.0, 5.0],
            r: [50.0, 10.0, 5.0],
            s: [20.0, 5.0, 0.0],
        }
    }
}

fn distance(p: [f64; 3], q: [f64; 3]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

fn unit_vector(from: [f64; 3], to: [f64; 3]) -> [f64; 3] {
    let d = distance(from, to);
    [
        (to[0] - from[0]) / d,
        (to[1] - from[1]) / d,
        (to[2] - from[2]) / d,
    ]
}

/// All scalar system parameters. Powers and variances are linear (W).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub m_a: usize,
    pub m_b: usize,
    pub m_s: usize,
    /// Number of RIS meta-atoms; 0 disables the RIS.
    pub m_r: usize,
    pub m_min: usize,
    pub k: usize,
    pub p_max: f64,
    /// QoS threshold in nats/s/Hz.
    pub rate_threshold: f64,
    pub sigma2_b: f64,
    pub sigma2_s: f64,
    pub varsigma2_ab: f64,
    pub varsigma2_rb: f64,
    pub varsigma2_a_as: f64,
    pub varsigma2_s_as: f64,
    pub varsigma2_a_rs: f64,
    pub varsigma2_s_rs: f64,
    pub varsigma2_s_ar: f64,
    /// Variance used for the imperfect-prior scenarios.
    pub prior_error_variance: f64,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub rician_factor_db: f64,
    pub corr_coeff: f64,
    pub ris_spacing_wavelengths: f64,
    pub pathloss_exponents: PathLossExponents,
    pub positions: Positions,
    pub seed: u64,
}

impl Default for SystemConfig {
    /// Small dimensions suitable for tests and quick sweeps; all physical
    /// parameters match the full-scale setup.
    fn default() -> Self {
        let sigma2 = thermal_noise_watts(20e6);
        Self {
            m_a: 2,
            m_b: 4,
            m_s: 2,
            m_r: 16,
            m_min: 2,
            k: 4,
            p_max: dbm_to_watts(10.0),
            rate_threshold: 1.5,
            sigma2_b: sigma2,
            sigma2_s: sigma2,
            varsigma2_ab: 100.0 * sigma2,
            varsigma2_rb: 100.0 * sigma2,
            varsigma2_a_as: 0.0,
            varsigma2_s_as: 0.0,
            varsigma2_a_rs: 0.0,
            varsigma2_s_rs: 0.0,
            varsigma2_s_ar: 0.0,
            prior_error_variance: 5e5 * sigma2,
            carrier_hz: 2e9,
            bandwidth_hz: 20e6,
            rician_factor_db: 3.0,
            corr_coeff: 0.5,
            ris_spacing_wavelengths: 0.25,
            pathloss_exponents: PathLossExponents::default(),
            positions: Positions::default(),
            seed: 1,
        }
    }
}

impl SystemConfig {
    /// Full-scale parameters of the reference deployment.
    pub fn paper_scale() -> Self {
        Self {
            m_a: 4,
            m_b: 16,
            m_s: 4,
            m_r: 64,
            m_min: 4,
            k: 16,
            rate_threshold: 5.0,
            ..Self::default()
        }
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    pub fn rician_factor(&self) -> f64 {
        Db(self.rician_factor_db).linear()
    }

    pub fn has_ris(&self) -> bool {
        self.m_r > 0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        for (name, v) in [
            ("m_a", self.m_a),
            ("m_b", self.m_b),
            ("m_s", self.m_s),
            ("k", self.k),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.m_min == 0 || self.m_min > self.m_a.min(self.m_b) {
            return bad(format!(
                "m_min = {} must lie in [1, min(m_a, m_b) = {}]",
                self.m_min,
                self.m_a.min(self.m_b)
            ));
        }
        for (name, v) in [
            ("p_max", self.p_max),
            ("rate_threshold", self.rate_threshold),
            ("sigma2_b", self.sigma2_b),
            ("sigma2_s", self.sigma2_s),
            ("carrier_hz", self.carrier_hz),
            ("bandwidth_hz", self.bandwidth_hz),
            ("ris_spacing_wavelengths", self.ris_spacing_wavelengths),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        for (name, v) in [
            ("varsigma2_ab", self.varsigma2_ab),
            ("varsigma2_rb", self.varsigma2_rb),
            ("varsigma2_a_as", self.varsigma2_a_as),
            ("varsigma2_s_as", self.varsigma2_s_as),
            ("varsigma2_a_rs", self.varsigma2_a_rs),
            ("varsigma2_s_rs", self.varsigma2_s_rs),
            ("varsigma2_s_ar", self.varsigma2_s_ar),
            ("prior_error_variance", self.prior_error_variance),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be nonnegative and finite, got {v}"));
            }
        }
        if !self.rician_factor_db.is_finite() {
            return bad("rician_factor_db must be finite".into());
        }
        if !(0.0..1.0).contains(&self.corr_coeff) {
            return bad(format!(
                "corr_coeff must lie in [0, 1), got {}",
                self.corr_coeff
            ));
        }
        let e = &self.pathloss_exponents;
        for (name, v) in [
            ("ab", e.ab),
            ("as", e.as_),
            ("ar", e.ar),
            ("rb", e.rb),
            ("rs", e.rs),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("path-loss exponent {name} must be positive"));
            }
        }
        for (link, d) in self.link_distances() {
            if !(d >= REFERENCE_DISTANCE_M) {
                return bad(format!("{link} distance {d} m is below the 1 m reference"));
            }
        }
        Ok(())
    }

    fn link_distances(&self) -> [(&'static str, f64); 5] {
        let p = &self.positions;
        [
            ("A-B", distance(p.a, p.b)),
            ("A-S", distance(p.a, p.s)),
            ("A-R", distance(p.a, p.r)),
            ("R-B", distance(p.r, p.b)),
            ("R-S", distance(p.r, p.s)),
        ]
    }
}

/// Exponential-correlation Toeplitz matrix `r^|i-j|`.
pub fn ula_correlation(n: usize, r: f64) -> Result<CMat> {
    if !(0.0..1.0).contains(&r) {
        return Err(Error::Domain(format!(
            "correlation coefficient {r} outside [0, 1)"
        )));
    }
    Ok(CMat::from_fn(n, n, |i, j| {
        c(r.powi(i.abs_diff(j) as i32), 0.0)
    }))
}

pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Rows and columns of the planar RIS grid: the most square factorization.
pub fn ris_grid_shape(m_r: usize) -> (usize, usize) {
    if m_r == 0 {
        return (0, 0);
    }
    let mut rows = (m_r as f64).sqrt().floor() as usize;
    while rows > 1 && !m_r.is_multiple_of(rows) {
        rows -= 1;
    }
    (rows.max(1), m_r / rows.max(1))
}

/// Meta-atom offsets in wavelengths on an x–z grid, column index fastest.
pub fn ris_positions(m_r: usize, spacing: f64) -> Vec<[f64; 3]> {
    let (_, cols) = ris_grid_shape(m_r);
    (0..m_r)
        .map(|n| {
            [
                (n % cols) as f64 * spacing,
                0.0,
                (n / cols) as f64 * spacing,
            ]
        })
        .collect()
}

/// Isotropic-scattering RIS correlation `sinc(2‖u_m − u_n‖/λ)`.
pub fn ris_correlation(m_r: usize, spacing_wavelengths: f64) -> Result<CMat> {
    if !(spacing_wavelengths > 0.0) {
        return Err(Error::Config(format!(
            "RIS spacing {spacing_wavelengths} must be positive"
        )));
    }
    let pos = ris_positions(m_r, spacing_wavelengths);
    Ok(CMat::from_fn(m_r, m_r, |i, j| {
        c(sinc(2.0 * distance(pos[i], pos[j])), 0.0)
    }))
}

/// Half-wavelength ULA along x, offsets in wavelengths.
pub fn ula_positions(n: usize) -> Vec<[f64; 3]> {
    (0..n).map(|i| [0.5 * i as f64, 0.0, 0.0]).collect()
}

/// Far-field line-of-sight response (`rx × tx`) for the unit direction `u`
/// from transmitter to receiver; element offsets are in wavelengths and the
/// first element pair has phase 0.
pub fn los_matrix(rx: &[[f64; 3]], tx: &[[f64; 3]], u: [f64; 3]) -> CMat {
    let dot = |p: &[f64; 3]| p[0] * u[0] + p[1] * u[1] + p[2] * u[2];
    CMat::from_fn(rx.len(), tx.len(), |n, m| {
        let phase = 2.0 * std::f64::consts::PI * (dot(&tx[m]) - dot(&rx[n]));
        c(phase.cos(), phase.sin())
    })
}

/// True channels and the imperfect copies available at A and S.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub h_ab: CMat,
    pub h_as: CMat,
    pub h_ar: CMat,
    pub h_rb: CMat,
    pub h_rs: CMat,
    pub hhat_ab: CMat,
    pub hhat_rb: CMat,
    pub hhat_s_ar: CMat,
}

impl ChannelSet {
    pub fn m_r(&self) -> usize {
        self.h_ar.nrows()
    }
}

/// Mean and covariances of `vec(H_AS)` and `vec(H_RS)`, true and presumed.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSet {
    pub mu_as: CVec,
    pub sigma_as: CMat,
    pub sigma_rs: CMat,
    pub muhat_a_as: CVec,
    pub muhat_s_as: CVec,
    pub sigmahat_a_as: CMat,
    pub sigmahat_s_as: CMat,
    pub sigmahat_a_rs: CMat,
    pub sigmahat_s_rs: CMat,
}

/// Which of the two parties holds erroneous priors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorScenario {
    Perfect,
    ImperfectBoth,
    #[serde(rename = "imperfect_A", alias = "imperfect_a")]
    ImperfectA,
    #[serde(rename = "imperfect_S", alias = "imperfect_s")]
    ImperfectS,
}

impl PriorScenario {
    pub const ALL: [PriorScenario; 4] = [
        PriorScenario::Perfect,
        PriorScenario::ImperfectBoth,
        PriorScenario::ImperfectA,
        PriorScenario::ImperfectS,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PriorScenario::Perfect => "perfect",
            PriorScenario::ImperfectBoth => "imperfect_both",
            PriorScenario::ImperfectA => "imperfect_A",
            PriorScenario::ImperfectS => "imperfect_S",
        }
    }

    /// Sets the four prior-error variances from `prior_error_variance`.
    pub fn apply(self, config: &SystemConfig) -> SystemConfig {
        let v = config.prior_error_variance;
        let (at_a, at_s) = match self {
            PriorScenario::Perfect => (0.0, 0.0),
            PriorScenario::ImperfectBoth => (v, v),
            PriorScenario::ImperfectA => (v, 0.0),
            PriorScenario::ImperfectS => (0.0, v),
        };
        SystemConfig {
            varsigma2_a_as: at_a,
            varsigma2_a_rs: at_a,
            varsigma2_s_as: at_s,
            varsigma2_s_rs: at_s,
            ..config.clone()
        }
    }
}

impl std::str::FromStr for PriorScenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PriorScenario::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown prior scenario '{s}' (expected perfect, imperfect_both, imperfect_A or imperfect_S)"
                ))
            })
    }
}

impl std::fmt::Display for PriorScenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Independent child generator seeded from `rng`.
pub fn substream<R: Rng + ?Sized>(rng: &mut R) -> ChaCha8Rng {
    let mut seed = <ChaCha8Rng as SeedableRng>::Seed::default();
    rng.fill(&mut seed);
    ChaCha8Rng::from_seed(seed)
}

/// One Rician (or Rayleigh, with zero LoS weight) link.
#[derive(Debug, Clone)]
struct FadingLink {
    los: CMat,
    los_weight: f64,
    nlos_weight: f64,
    rx_sqrt: CMat,
    tx_sqrt: CMat,
}

impl FadingLink {
    fn rician(path_loss: f64, kappa: f64, los: CMat, rx_corr: &CMat, tx_corr: &CMat) -> Self {
        Self {
            los,
            los_weight: (path_loss * kappa / (1.0 + kappa)).sqrt(),
            nlos_weight: (path_loss / (1.0 + kappa)).sqrt(),
            rx_sqrt: hermitian_sqrt(rx_corr),
            tx_sqrt: hermitian_sqrt(tx_corr),
        }
    }

    fn mean(&self) -> CMat {
        self.los.scale(self.los_weight)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CMat {
        let g = complex_gaussian(rng, self.rx_sqrt.nrows(), self.tx_sqrt.ncols());
        self.mean() + (&self.rx_sqrt * g * &self.tx_sqrt).scale(self.nlos_weight)
    }
}

/// Deterministic quantities of a deployment (path loss, correlation, LoS
/// components), from which channels and priors are drawn.
#[derive(Debug, Clone)]
pub struct ScenarioModel {
    config: SystemConfig,
    ab: FadingLink,
    as_: FadingLink,
    rb: FadingLink,
    rs: FadingLink,
    h_ar: CMat,
    corr_a: CMat,
    corr_s: CMat,
    corr_ris: CMat,
    path_loss_as: f64,
    path_loss_rs: f64,
}

impl ScenarioModel {
    pub fn new(config: &SystemConfig) -> Result<Self> {
        config.validate()?;
        let p = &config.positions;
        let e = &config.pathloss_exponents;
        let pl = |from, to, alpha| path_loss_db(distance(from, to), alpha).map(Db::linear);
        let pl_ab = pl(p.a, p.b, e.ab)?;
        let pl_as = pl(p.a, p.s, e.as_)?;
        let pl_ar = pl(p.a, p.r, e.ar)?;
        let pl_rb = pl(p.r, p.b, e.rb)?;
        let pl_rs = pl(p.r, p.s, e.rs)?;

        let kappa = config.rician_factor();
        let corr_a = ula_correlation(config.m_a, config.corr_coeff)?;
        let corr_b = ula_correlation(config.m_b, config.corr_coeff)?;
        let corr_s = ula_correlation(config.m_s, config.corr_coeff)?;
        let corr_ris = ris_correlation(config.m_r, config.ris_spacing_wavelengths)?;

        let arr_a = ula_positions(config.m_a);
        let arr_b = ula_positions(config.m_b);
        let arr_s = ula_positions(config.m_s);
        let arr_r = ris_positions(config.m_r, config.ris_spacing_wavelengths);

        let ab = FadingLink::rician(
            pl_ab,
            kappa,
            los_matrix(&arr_b, &arr_a, unit_vector(p.a, p.b)),
            &corr_b,
            &corr_a,
        );
        let as_ = FadingLink::rician(
            pl_as,
            kappa,
            los_matrix(&arr_s, &arr_a, unit_vector(p.a, p.s)),
            &corr_s,
            &corr_a,
        );
        let rb = FadingLink::rician(
            pl_rb,
            kappa,
            los_matrix(&arr_b, &arr_r, unit_vector(p.r, p.b)),
            &corr_b,
            &corr_ris,
        );
        let rs = FadingLink::rician(
            pl_rs,
            0.0,
            CMat::zeros(config.m_s, config.m_r),
            &corr_s,
            &corr_ris,
        );
        let h_ar = los_matrix(&arr_r, &arr_a, unit_vector(p.a, p.r)).scale(pl_ar.sqrt());

        Ok(Self {
            config: config.clone(),
            ab,
            as_,
            rb,
            rs,
            h_ar,
            corr_a,
            corr_s,
            corr_ris,
            path_loss_as: pl_as,
            path_loss_rs: pl_rs,
        })
    }

    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    pub fn path_loss_as(&self) -> f64 {
        self.path_loss_as
    }

    /// Draws one channel realization. Each link uses its own sub-stream so
    /// that changing one dimension leaves the other links unchanged.
    pub fn sample_channels<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelSet {
        let mut streams: Vec<ChaCha8Rng> = (0..7).map(|_| substream(rng)).collect();
        let cfg = &self.config;
        let h_ab = self.ab.sample(&mut streams[0]);
        let h_as = self.as_.sample(&mut streams[1]);
        let h_rb = self.rb.sample(&mut streams[2]);
        let h_rs = self.rs.sample(&mut streams[3]);
        let h_ar = self.h_ar.clone();
        let err = |rng: &mut ChaCha8Rng, rows, cols, var: f64| {
            complex_gaussian(rng, rows, cols).scale(var.sqrt())
        };
        let hhat_ab = &h_ab - err(&mut streams[4], cfg.m_b, cfg.m_a, cfg.varsigma2_ab);
        let hhat_rb = &h_rb - err(&mut streams[5], cfg.m_b, cfg.m_r, cfg.varsigma2_rb);
        let hhat_s_ar = &h_ar - err(&mut streams[6], cfg.m_r, cfg.m_a, cfg.varsigma2_s_ar);
        ChannelSet {
            h_ab,
            h_as,
            h_ar,
            h_rb,
            h_rs,
            hhat_ab,
            hhat_rb,
            hhat_s_ar,
        }
    }

    pub fn mu_as(&self) -> CVec {
        vec_of(&self.as_.mean())
    }

    pub fn sigma_as(&self) -> CMat {
        let kappa = self.config.rician_factor();
        kron(&self.corr_a.transpose(), &self.corr_s).scale(self.path_loss_as / (1.0 + kappa))
    }

    pub fn sigma_rs(&self) -> CMat {
        kron(&self.corr_ris.transpose(), &self.corr_s).scale(self.path_loss_rs)
    }

    /// True statistics plus the presumed ones at A and S. The mean
    /// perturbations for A and S come from separate sub-streams.
    pub fn derive_priors<R: Rng + ?Sized>(&self, rng: &mut R) -> PriorSet {
        let mut stream_a = substream(rng);
        let mut stream_s = substream(rng);
        let cfg = &self.config;
        let mu_as = self.mu_as();
        let sigma_as = self.sigma_as();
        let sigma_rs = self.sigma_rs();
        let n = mu_as.len();
        let perturb = |rng: &mut ChaCha8Rng, var: f64| -> CVec {
            let r = crate::linalg::complex_gaussian_vec(rng, n);
            &mu_as + r.scale(var.sqrt())
        };
        let inflate = |m: &CMat, var: f64| -> CMat {
            let mut out = m.clone();
            for i in 0..out.nrows() {
                out[(i, i)] += c(var, 0.0);
            }
            out
        };
        PriorSet {
            muhat_a_as: perturb(&mut stream_a, cfg.varsigma2_a_as),
            muhat_s_as: perturb(&mut stream_s, cfg.varsigma2_s_as),
            sigmahat_a_as: inflate(&sigma_as, cfg.varsigma2_a_as),
            sigmahat_s_as: inflate(&sigma_as, cfg.varsigma2_s_as),
            sigmahat_a_rs: inflate(&sigma_rs, cfg.varsigma2_a_rs),
            sigmahat_s_rs: inflate(&sigma_rs, cfg.varsigma2_s_rs),
            mu_as,
            sigma_as,
            sigma_rs,
        }
    }
}

/// Convenience wrapper: builds the model and draws one channel set.
pub fn sample_channels<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> Result<ChannelSet> {
    Ok(ScenarioModel::new(config)?.sample_channels(rng))
}

pub fn derive_priors<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> Result<PriorSet> {
    Ok(ScenarioModel::new(config)?.derive_priors(rng))
}
