//! Parameter sweeps: trials per point run in parallel, aggregated in trial
//! order.

use rayon::prelude::*;
use rispriv_core::scenario::dbm_to_watts;
use rispriv_core::{PriorScenario, ScenarioModel, SystemConfig};
use serde::{Deserialize, Serialize};

use crate::aoa::rmse;
use crate::error::{HarnessError, Result};
use crate::trial::{run_trial_with, TrialOptions, TrialRecord};

/// Environment variable capping the worker count (0 or unset: all cores).
pub const THREADS_ENV: &str = "RISPRIV_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SweepParam {
    #[serde(rename = "m_R")]
    RisElements,
    #[serde(rename = "m_A")]
    TxAntennas,
    #[serde(rename = "m_S")]
    SensorAntennas,
    #[serde(rename = "K")]
    ObservationLength,
    #[serde(rename = "p_max_dbm")]
    PowerDbm,
    /// Common prior-error variance in W.
    #[serde(rename = "prior_var")]
    PriorVariance,
}

impl SweepParam {
    pub const ALL: [SweepParam; 6] = [
        SweepParam::RisElements,
        SweepParam::TxAntennas,
        SweepParam::SensorAntennas,
        SweepParam::ObservationLength,
        SweepParam::PowerDbm,
        SweepParam::PriorVariance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::RisElements => "m_R",
            SweepParam::TxAntennas => "m_A",
            SweepParam::SensorAntennas => "m_S",
            SweepParam::ObservationLength => "K",
            SweepParam::PowerDbm => "p_max_dbm",
            SweepParam::PriorVariance => "prior_var",
        }
    }

    /// `config` with this parameter set to `value`.
    pub fn apply(self, config: &SystemConfig, value: f64) -> Result<SystemConfig> {
        let mut cfg = config.clone();
        let count = |min: usize| -> Result<usize> {
            if value.fract() == 0.0 && value >= min as f64 && value <= u32::MAX as f64 {
                Ok(value as usize)
            } else {
                Err(HarnessError::Config(format!(
                    "{} must be an integer >= {min}, got {value}",
                    self.name()
                )))
            }
        };
        match self {
            SweepParam::RisElements => cfg.m_r = count(0)?,
            SweepParam::TxAntennas => {
                cfg.m_a = count(1)?;
                cfg.m_min = cfg.m_a.min(cfg.m_b);
            }
            SweepParam::SensorAntennas => cfg.m_s = count(1)?,
            SweepParam::ObservationLength => cfg.k = count(1)?,
            SweepParam::PowerDbm => {
                if !value.is_finite() {
                    return Err(HarnessError::Config(format!(
                        "p_max_dbm must be finite, got {value}"
                    )));
                }
                cfg.p_max = dbm_to_watts(value);
            }
            SweepParam::PriorVariance => cfg.prior_error_variance = value,
        }
        Ok(cfg)
    }

    /// Current value of this parameter in `config`.
    pub fn current(self, config: &SystemConfig) -> f64 {
        match self {
            SweepParam::RisElements => config.m_r as f64,
            SweepParam::TxAntennas => config.m_a as f64,
            SweepParam::SensorAntennas => config.m_s as f64,
            SweepParam::ObservationLength => config.k as f64,
            SweepParam::PowerDbm => rispriv_core::scenario::watts_to_dbm(config.p_max),
            SweepParam::PriorVariance => config.prior_error_variance,
        }
    }
}

impl std::str::FromStr for SweepParam {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        SweepParam::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                HarnessError::Config(format!(
                "unknown sweep parameter '{s}' (expected m_R, m_A, m_S, K, p_max_dbm or prior_var)"
            ))
            })
    }
}

impl std::fmt::Display for SweepParam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub trials: usize,
    pub scenario: PriorScenario,
    pub ris_enabled: bool,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(HarnessError::Config("sweep value list is empty".into()));
        }
        if self.trials == 0 {
            return Err(HarnessError::Config("trials must be at least 1".into()));
        }
        if !self.ris_enabled && self.param == SweepParam::RisElements {
            return Err(HarnessError::Config(
                "cannot sweep m_R with the RIS disabled".into(),
            ));
        }
        Ok(())
    }

    /// Configuration of one sweep point, with the prior scenario applied and
    /// the RIS removed when disabled.
    pub fn point_config(&self, base: &SystemConfig, value: f64) -> Result<SystemConfig> {
        let mut cfg = self.scenario.apply(&self.param.apply(base, value)?);
        if !self.ris_enabled {
            cfg.m_r = 0;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One CSV row; field order is the column order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub sweep_param: String,
    pub sweep_value: f64,
    pub scenario: String,
    pub ris: bool,
    pub nmse_analytic_mean: f64,
    pub nmse_mc_mean: f64,
    /// Standard error of the analytic NMSE mean.
    pub nmse_stderr: f64,
    pub rate_mean: f64,
    pub residual_mean: f64,
    pub aoa_rmse: f64,
    /// Trials that completed; failed trials are excluded from every mean.
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub row: SweepRow,
    pub records: Vec<TrialRecord>,
}

impl SweepPoint {
    pub fn failed(&self) -> usize {
        self.records.iter().filter(|r| r.failed).count()
    }
}

/// Mean and standard error (sample standard deviation over `√n`), summed in
/// slice order.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

pub fn aggregate(spec: &SweepSpec, value: f64, seed: u64, records: &[TrialRecord]) -> SweepRow {
    let ok: Vec<&TrialRecord> = records.iter().filter(|r| !r.failed).collect();
    let col = |f: fn(&TrialRecord) -> f64| ok.iter().map(|r| f(r)).collect::<Vec<f64>>();
    let (nmse, stderr) = mean_stderr(&col(|r| r.nmse_analytic));
    let aoa: Vec<f64> = ok
        .iter()
        .map(|r| r.aoa_error_deg)
        .filter(|e| e.is_finite())
        .collect();
    SweepRow {
        sweep_param: spec.param.name().to_string(),
        sweep_value: value,
        scenario: spec.scenario.name().to_string(),
        ris: spec.ris_enabled,
        nmse_analytic_mean: nmse,
        nmse_mc_mean: mean_stderr(&col(|r| r.nmse_mc)).0,
        nmse_stderr: stderr,
        rate_mean: mean_stderr(&col(|r| r.rate)).0,
        residual_mean: mean_stderr(&col(|r| r.residual)).0,
        aoa_rmse: rmse(&aoa),
        trials: ok.len(),
        seed,
    }
}

/// Worker pool sized by [`THREADS_ENV`].
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v.trim().parse::<usize>().map_err(|_| {
            HarnessError::Config(format!(
                "{THREADS_ENV} must be a nonnegative integer, got '{v}'"
            ))
        })?,
        _ => 0,
    };
    Ok(rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()?)
}

/// Runs every trial of every sweep point. Trial `i` uses the same random
/// stream at every point, so neighbouring points share channel draws.
pub fn run_sweep(
    spec: &SweepSpec,
    base: &SystemConfig,
    options: &TrialOptions,
    seed: u64,
) -> Result<Vec<SweepPoint>> {
    spec.validate()?;
    let configs = spec
        .values
        .iter()
        .map(|&v| spec.point_config(base, v))
        .collect::<Result<Vec<_>>>()?;
    let pool = thread_pool()?;
    let mut points = Vec::with_capacity(configs.len());
    for (&value, cfg) in spec.values.iter().zip(&configs) {
        let model = ScenarioModel::new(cfg)?;
        let records: Vec<TrialRecord> = pool.install(|| {
            (0..spec.trials)
                .into_par_iter()
                .map(|t| run_trial_with(&model, value, options, seed, t))
                .collect()
        });
        points.push(SweepPoint {
            row: aggregate(spec, value, seed, &records),
            records,
        });
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn param_names_round_trip() {
        for p in SweepParam::ALL {
            assert_eq!(p.name().parse::<SweepParam>().unwrap(), p);
        }
        assert!("mR".parse::<SweepParam>().is_err());
    }

    #[test]
    fn tx_antenna_sweep_resets_stream_count() {
        let base = SystemConfig::default();
        let cfg = SweepParam::TxAntennas.apply(&base, 3.0).unwrap();
        assert_eq!((cfg.m_a, cfg.m_min), (3, 3));
        let cfg = SweepParam::TxAntennas.apply(&base, 8.0).unwrap();
        assert_eq!((cfg.m_a, cfg.m_min), (8, base.m_b));
    }

    #[test]
    fn integer_params_reject_fractions() {
        let base = SystemConfig::default();
        assert!(SweepParam::ObservationLength.apply(&base, 2.5).is_err());
        assert!(SweepParam::RisElements.apply(&base, -1.0).is_err());
        assert_eq!(SweepParam::RisElements.apply(&base, 0.0).unwrap().m_r, 0);
        let p = SweepParam::PowerDbm.apply(&base, 20.0).unwrap().p_max;
        assert!((p - 0.1).abs() < 1e-15);
    }

    #[test]
    fn spec_validation() {
        let spec = SweepSpec {
            param: SweepParam::RisElements,
            values: vec![],
            trials: 1,
            scenario: PriorScenario::Perfect,
            ris_enabled: true,
        };
        assert!(spec.validate().is_err());
        let spec = SweepSpec {
            values: vec![4.0],
            ris_enabled: false,
            ..spec
        };
        assert!(spec.validate().is_err());
        let spec = SweepSpec {
            ris_enabled: true,
            trials: 0,
            ..spec
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn mean_stderr_examples() {
        assert_eq!(mean_stderr(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert!(mean_stderr(&[]).0.is_nan());
    }
}
