//! TOML configuration: the system parameters at top level plus the
//! `[experiment]`, `[sweep]`, `[aoa]` and `[solver]` tables.

use std::path::Path;

use rispriv_core::pdd::PddSettings;
use rispriv_core::scenario::dbm_to_watts;
use rispriv_core::{PriorScenario, SystemConfig};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::sweep::SweepParam;

pub const DEFAULT_TRIALS: usize = 100;
pub const PAPER_SCALE_TRIALS: usize = 1000;
pub const DEFAULT_MC_DRAWS: usize = 200;
pub const DEFAULT_GRID_STEP_DEG: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSettings {
    pub trials: usize,
    pub prior: PriorScenario,
    pub ris: bool,
    /// Simulated sensor observations per trial for the Monte Carlo NMSE.
    pub monte_carlo_draws: usize,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        Self {
            trials: DEFAULT_TRIALS,
            prior: PriorScenario::ImperfectBoth,
            ris: true,
            monte_carlo_draws: DEFAULT_MC_DRAWS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepTable {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AoaSettings {
    pub grid_step_deg: f64,
    /// Power budgets of the AoA study.
    pub p_max_dbm: Vec<f64>,
}

impl Default for AoaSettings {
    fn default() -> Self {
        Self {
            grid_step_deg: DEFAULT_GRID_STEP_DEG,
            p_max_dbm: vec![0.0, 10.0, 20.0],
        }
    }
}

/// Everything one invocation needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub experiment: ExperimentSettings,
    pub sweep: Option<SweepTable>,
    pub aoa: AoaSettings,
    pub solver: PddSettings,
}

impl ExperimentConfig {
    /// Defaults on top of `system`.
    pub fn with_system(system: SystemConfig) -> Self {
        Self {
            system,
            experiment: ExperimentSettings::default(),
            sweep: None,
            aoa: AoaSettings::default(),
            solver: PddSettings::default(),
        }
    }

    pub fn desk() -> Self {
        Self::with_system(SystemConfig::default())
    }

    pub fn paper_scale() -> Self {
        let mut cfg = Self::with_system(SystemConfig::paper_scale());
        cfg.experiment.trials = PAPER_SCALE_TRIALS;
        cfg
    }

    /// Parses `text`, overriding the fields of `base` that it sets. Nested
    /// tables such as `positions` may be given partially. `p_max_dbm` is
    /// accepted in place of the linear `p_max`.
    pub fn from_toml_str(text: &str, base: &ExperimentConfig) -> std::result::Result<Self, String> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| e.to_string())?;
        let mut out = base.clone();

        if let Some(v) = table.remove("experiment") {
            out.experiment = overlay(&out.experiment, v, "experiment")?;
        }
        if let Some(v) = table.remove("sweep") {
            out.sweep = Some(v.try_into().map_err(|e| format!("[sweep]: {e}"))?);
        }
        if let Some(v) = table.remove("aoa") {
            out.aoa = overlay(&out.aoa, v, "aoa")?;
        }
        if let Some(v) = table.remove("solver") {
            out.solver = overlay(&out.solver, v, "solver")?;
        }
        let p_max_dbm = match table.remove("p_max_dbm") {
            Some(v) => {
                if table.contains_key("p_max") {
                    return Err("set either p_max (W) or p_max_dbm, not both".into());
                }
                Some(number(&v).ok_or("p_max_dbm must be a number")?)
            }
            None => None,
        };
        out.system = overlay(&out.system, toml::Value::Table(table), "system")?;
        if let Some(dbm) = p_max_dbm {
            out.system.p_max = dbm_to_watts(dbm);
        }
        Ok(out)
    }

    pub fn load(path: &Path, base: &ExperimentConfig) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg = Self::from_toml_str(&text, base)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.solver.validate()?;
        if self.experiment.trials == 0 {
            return Err(HarnessError::Config("trials must be at least 1".into()));
        }
        if !(self.aoa.grid_step_deg > 0.0 && self.aoa.grid_step_deg <= 180.0) {
            return Err(HarnessError::Config(
                "aoa.grid_step_deg must lie in (0, 180]".into(),
            ));
        }
        Ok(())
    }
}

fn number(v: &toml::Value) -> Option<f64> {
    match v {
        toml::Value::Float(x) => Some(*x),
        toml::Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

/// Serializes `base`, deep-merges `patch` into it and deserializes back.
fn overlay<T>(base: &T, patch: toml::Value, what: &str) -> std::result::Result<T, String>
where
    T: Serialize + for<'de> Deserialize<'de>,
{
    let mut merged = toml::Value::try_from(base).map_err(|e| format!("{what}: {e}"))?;
    merge(&mut merged, patch);
    merged.try_into().map_err(|e| format!("{what}: {e}"))
}

fn merge(into: &mut toml::Value, patch: toml::Value) {
    match (into, patch) {
        (toml::Value::Table(dst), toml::Value::Table(src)) => {
            for (k, v) in src {
                match dst.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        dst.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}
