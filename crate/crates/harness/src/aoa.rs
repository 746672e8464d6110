//! Bartlett angle-of-arrival search on the sensor's channel estimate.

use rispriv_core::linalg::{c, CMat, CVec};
use rispriv_core::SystemConfig;

use crate::error::{HarnessError, Result};

/// Sensor ULA steering vector `a(φ)_n = exp(jπ n sin φ)`.
pub fn steering_vector(m_s: usize, angle_deg: f64) -> CVec {
    let s = angle_deg.to_radians().sin();
    CVec::from_fn(m_s, |n, _| {
        let phase = std::f64::consts::PI * n as f64 * s;
        c(phase.cos(), phase.sin())
    })
}

/// Candidate angles `−90, −90 + step, …, 90` (the last point is clamped).
pub fn angle_grid(step_deg: f64) -> Result<Vec<f64>> {
    if !(step_deg > 0.0 && step_deg <= 180.0) {
        return Err(HarnessError::Config(format!(
            "AoA grid step {step_deg} must lie in (0, 180]"
        )));
    }
    let n = (180.0 / step_deg).floor() as usize;
    let mut grid: Vec<f64> = (0..=n).map(|i| -90.0 + i as f64 * step_deg).collect();
    if let Some(last) = grid.last_mut() {
        *last = last.min(90.0);
    }
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BartlettEstimate {
    pub estimated_deg: f64,
    /// `(angle in degrees, power)` over the grid.
    pub spectrum: Vec<(f64, f64)>,
}

/// Maximizes `P(φ) = a(φ)^H (Ĥ Ĥ^H / m_A) a(φ)` over the grid; ties go to the
/// smallest angle.
pub fn bartlett_aoa(h: &CMat, step_deg: f64) -> Result<BartlettEstimate> {
    let (m_s, m_a) = h.shape();
    if m_s < 2 {
        return Err(HarnessError::Config(format!(
            "AoA search needs at least 2 sensor antennas, got {m_s}"
        )));
    }
    let scale = 1.0 / m_a.max(1) as f64;
    let spectrum: Vec<(f64, f64)> = angle_grid(step_deg)?
        .into_iter()
        .map(|phi| {
            let proj = h.adjoint() * steering_vector(m_s, phi);
            (phi, proj.norm_squared() * scale)
        })
        .collect();
    let mut best = 0;
    for (i, &(_, p)) in spectrum.iter().enumerate() {
        if p > spectrum[best].1 {
            best = i;
        }
    }
    Ok(BartlettEstimate {
        estimated_deg: spectrum[best].0,
        spectrum,
    })
}

/// Broadside angle of the transmitter as seen by the sensor array (along x).
pub fn true_aoa_deg(config: &SystemConfig) -> f64 {
    let (a, s) = (config.positions.a, config.positions.s);
    let d: f64 = a
        .iter()
        .zip(s)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt();
    ((a[0] - s[0]) / d).asin().to_degrees()
}

/// Outcome of one AoA evaluation, with the RMSE over the trials it was part
/// of.
#[derive(Debug, Clone, PartialEq)]
pub struct AoaResult {
    pub true_deg: f64,
    pub estimated_deg: f64,
    pub spectrum: Vec<(f64, f64)>,
    pub rmse_deg: f64,
}

/// Root mean square of the errors, NaN when empty.
pub fn rmse(errors: &[f64]) -> f64 {
    if errors.is_empty() {
        return f64::NAN;
    }
    (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_covers_both_ends() {
        let g = angle_grid(0.1).unwrap();
        assert_eq!(g.len(), 1801);
        assert_eq!(g[0], -90.0);
        assert!((g[1800] - 90.0).abs() < 1e-9);
        assert_eq!(angle_grid(7.0).unwrap().last().copied(), Some(85.0));
        assert!(angle_grid(0.0).is_err());
    }

    #[test]
    fn single_path_peak() {
        let b = CVec::from_vec(vec![c(1.0, 0.5), c(-0.3, 0.2)]);
        let h = steering_vector(4, 30.0) * b.adjoint();
        let est = bartlett_aoa(&h, 0.1).unwrap();
        assert!((est.estimated_deg - 30.0).abs() <= 0.1 + 1e-9);
    }

    #[test]
    fn zero_channel_ties_to_smallest_angle() {
        let est = bartlett_aoa(&CMat::zeros(3, 2), 0.5).unwrap();
        assert_eq!(est.estimated_deg, -90.0);
        assert!(est.spectrum.iter().all(|&(_, p)| p == 0.0));
    }

    #[test]
    fn rejects_single_antenna() {
        assert!(bartlett_aoa(&CMat::zeros(1, 2), 0.1).is_err());
    }

    #[test]
    fn line_of_sight_mean_points_at_truth() {
        let cfg = SystemConfig::default();
        let model = rispriv_core::ScenarioModel::new(&cfg).unwrap();
        let mean = rispriv_core::linalg::unvec(&model.mu_as(), cfg.m_s, cfg.m_a).unwrap();
        let est = bartlett_aoa(&mean, 0.1).unwrap();
        assert!((est.estimated_deg - true_aoa_deg(&cfg)).abs() <= 0.1);
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[3.0, -4.0]), (12.5f64).sqrt());
        assert!(rmse(&[]).is_nan());
    }
}
