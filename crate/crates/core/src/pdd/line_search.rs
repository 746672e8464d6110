//! Backtracking line search with the Armijo sufficient-increase test.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArmijoSettings {
    pub c: f64,
    pub beta: f64,
    pub max_halvings: u32,
}

impl Default for ArmijoSettings {
    fn default() -> Self {
        Self {
            c: 1e-4,
            beta: 0.5,
            max_halvings: 40,
        }
    }
}

/// Outcome of trying one step size.
#[derive(Debug, Clone)]
pub struct Trial<T> {
    /// Objective at the trial point.
    pub value: f64,
    /// Increase over the current objective required for acceptance.
    pub required_increase: f64,
    pub payload: T,
}

/// Tries `μ0, βμ0, β²μ0, …` and returns the first step whose trial meets
/// its required increase over `g0`, or `None` when every step fails.
pub fn backtrack<T>(
    g0: f64,
    mu0: f64,
    settings: &ArmijoSettings,
    mut attempt: impl FnMut(f64) -> Result<Trial<T>>,
) -> Result<Option<(f64, T)>> {
    if !(mu0 > 0.0) {
        return Err(Error::Domain(format!(
            "initial step size {mu0} must be positive"
        )));
    }
    let mut mu = mu0;
    for _ in 0..=settings.max_halvings {
        let trial = attempt(mu)?;
        if !trial.value.is_finite() {
            return Err(Error::Numerical {
                what: "line-search objective",
                condition: f64::NAN,
            });
        }
        if trial.value >= g0 + trial.required_increase {
            return Ok(Some((mu, trial.payload)));
        }
        mu *= settings.beta;
    }
    Ok(None)
}

/// Classic Armijo rule along `d`: accepts the largest `μ = μ0 β^k` with
/// `g(x + μ d) ≥ g(x) + c μ ‖d‖²`; returns 0 when no step qualifies.
pub fn armijo_step(
    g0: f64,
    direction_norm_sq: f64,
    mu0: f64,
    settings: &ArmijoSettings,
    mut evaluate: impl FnMut(f64) -> Result<f64>,
) -> Result<f64> {
    let found = backtrack(g0, mu0, settings, |mu| {
        Ok(Trial {
            value: evaluate(mu)?,
            required_increase: settings.c * mu * direction_norm_sq,
            payload: (),
        })
    })?;
    Ok(found.map_or(0.0, |(mu, ())| mu))
}

#[cfg(test)]
mod tests {
    use super::*;

    // g(x) = -(x - 3)², maximized at 3.
    fn g(x: f64) -> f64 {
        -(x - 3.0) * (x - 3.0)
    }

    #[test]
    fn quadratic_step_satisfies_armijo() {
        let s = ArmijoSettings::default();
        let x = 0.0;
        let d = 6.0; // g'(0)
        let mu = armijo_step(g(x), d * d, 100.0, &s, |mu| Ok(g(x + mu * d))).unwrap();
        assert!(mu > 0.0);
        assert!(g(x + mu * d) >= g(x) + s.c * mu * d * d);
        // the next larger step fails
        assert!(g(x + 2.0 * mu * d) < g(x) + s.c * 2.0 * mu * d * d);
    }

    #[test]
    fn tiny_ascent_direction_accepted_immediately() {
        let s = ArmijoSettings::default();
        let d = 1e-9;
        let mu = armijo_step(g(0.0), d * d, 1.0, &s, |mu| Ok(g(mu * d))).unwrap();
        assert_eq!(mu, 1.0);
    }

    #[test]
    fn descent_direction_returns_zero() {
        let s = ArmijoSettings::default();
        let d = -6.0;
        let mut calls = 0;
        let mu = armijo_step(g(0.0), d * d, 100.0, &s, |mu| {
            calls += 1;
            Ok(g(mu * d))
        })
        .unwrap();
        assert_eq!(mu, 0.0);
        assert_eq!(calls, 41);
    }

    #[test]
    fn non_finite_objective_is_an_error() {
        let s = ArmijoSettings::default();
        assert!(armijo_step(0.0, 1.0, 1.0, &s, |_| Ok(f64::NAN)).is_err());
        assert!(armijo_step(0.0, 1.0, 0.0, &s, |_| Ok(1.0)).is_err());
    }
}
