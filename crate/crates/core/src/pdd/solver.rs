//! Projections, the alternating inner loop and the outer multiplier/penalty
//! loop.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::comm::{qos_residual, Design};
use crate::error::Result;
use crate::linalg::{c, complex_gaussian, frob_sq, CMat, CVec, ONE};
use crate::scenario::SystemConfig;

use super::gradient::{grad_f, grad_theta};
use super::line_search::{backtrack, ArmijoSettings, Trial};
use super::{Evaluation, Problem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PddSettings {
    pub nu0: f64,
    pub rho0: f64,
    pub kappa: f64,
    pub mu_f: f64,
    pub mu_theta: f64,
    pub armijo: ArmijoSettings,
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    pub outer_tol: f64,
    pub outer_max_iter: usize,
    pub rho_floor: f64,
}

impl Default for PddSettings {
    fn default() -> Self {
        Self {
            nu0: 0.0,
            rho0: 10.0,
            kappa: 0.1,
            mu_f: 100.0,
            mu_theta: 100.0,
            armijo: ArmijoSettings::default(),
            inner_tol: 1e-6,
            inner_max_iter: 500,
            outer_tol: 1e-4,
            outer_max_iter: 30,
            rho_floor: 1e-12,
        }
    }
}

impl PddSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(crate::Error::Config(m.to_string()));
        if !(self.rho0 > 0.0) {
            return bad("rho0 must be positive");
        }
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return bad("kappa must lie in (0, 1)");
        }
        if !(self.mu_f > 0.0 && self.mu_theta > 0.0) {
            return bad("initial step sizes must be positive");
        }
        if !(self.armijo.beta > 0.0 && self.armijo.beta < 1.0 && self.armijo.c > 0.0) {
            return bad("Armijo constants must satisfy c > 0 and 0 < beta < 1");
        }
        if self.inner_max_iter == 0 || self.outer_max_iter == 0 {
            return bad("iteration caps must be positive");
        }
        Ok(())
    }
}

/// Multiplier, penalty, slack and counters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PddState {
    pub nu: f64,
    pub rho: f64,
    pub tau: f64,
    pub kappa: f64,
    pub mu_f: f64,
    pub mu_theta: f64,
    pub inner_iter: usize,
    pub outer_iter: usize,
}

impl PddState {
    pub fn new(settings: &PddSettings) -> Self {
        Self {
            nu: settings.nu0,
            rho: settings.rho0,
            tau: 0.0,
            kappa: settings.kappa,
            mu_f: settings.mu_f,
            mu_theta: settings.mu_theta,
            inner_iter: 0,
            outer_iter: 0,
        }
    }
}

/// `√p · F / max(‖F‖_F, √p)`.
pub fn project_precoder(f: &CMat, p_max: f64) -> CMat {
    f.scale(power_scale(frob_sq(f), p_max))
}

fn power_scale(norm_sq: f64, p_max: f64) -> f64 {
    let root = p_max.sqrt();
    root / norm_sq.sqrt().max(root)
}

/// Projects `[F_c, F_s]` jointly onto the power ball.
fn project_pair(f_c: CMat, f_s: CMat, p_max: f64) -> (CMat, CMat) {
    let s = power_scale(frob_sq(&f_c) + frob_sq(&f_s), p_max);
    (f_c.scale(s), f_s.scale(s))
}

/// Elementwise `θ/|θ|`, with zero mapped to 1.
pub fn project_phases(theta: &CVec) -> CVec {
    theta.map(|t| {
        let n = t.norm();
        if n == 0.0 {
            ONE
        } else {
            t / n
        }
    })
}

/// Maximizer of the augmented Lagrangian over `τ ≥ 0`.
pub fn update_tau(rate: f64, threshold: f64, nu: f64, rho: f64) -> f64 {
    (rate / threshold - 1.0 - nu * rho).max(0.0)
}

/// Gaussian precoders with the budget split evenly between `F_c` and `F_s`,
/// uniform random RIS phases.
pub fn initial_design<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> Design {
    let half = config.p_max / 2.0;
    let scaled = |m: CMat| {
        let n = frob_sq(&m);
        if n > 0.0 {
            m.scale((half / n).sqrt())
        } else {
            m
        }
    };
    let f_c = scaled(complex_gaussian(rng, config.m_a, config.m_min));
    let f_s = scaled(complex_gaussian(rng, config.m_a, config.m_a));
    let theta = CVec::from_fn(config.m_r, |_, _| {
        let phase = rng.random::<f64>() * std::f64::consts::TAU;
        c(phase.cos(), phase.sin())
    });
    Design { f_c, f_s, theta }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InnerTermination {
    Converged,
    Stall,
    IterationLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Converged,
    PenaltyFloor,
    IterationLimit,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Termination::Converged => "converged",
            Termination::PenaltyFloor => "penalty-floor",
            Termination::IterationLimit => "iteration-limit",
        })
    }
}

/// State after one full F/θ/τ cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub outer: usize,
    pub inner: usize,
    pub augmented: f64,
    /// Normalized predicted objective.
    pub objective: f64,
    pub residual: f64,
    pub rate: f64,
    pub tau: f64,
    pub step_f: f64,
    pub step_theta: f64,
}

#[derive(Debug, Clone)]
pub struct InnerOutcome {
    pub design: Design,
    pub tau: f64,
    pub records: Vec<IterationRecord>,
    pub termination: InnerTermination,
    pub evaluation: Evaluation,
    /// Augmented objective at entry, before the first cycle.
    pub initial_augmented: f64,
}

#[derive(Debug, Clone)]
pub struct OptimizerReport {
    pub trajectory: Vec<IterationRecord>,
    /// Index into `trajectory` where each outer iteration starts.
    pub outer_boundaries: Vec<usize>,
    /// Augmented objective at the start of each inner loop.
    pub inner_start_values: Vec<f64>,
    pub inner_terminations: Vec<InnerTermination>,
    pub termination: Termination,
    pub design: Design,
    pub state: PddState,
    pub rate: f64,
    pub residual: f64,
    pub objective: f64,
    pub augmented: f64,
}

impl OptimizerReport {
    pub fn total_inner_iterations(&self) -> usize {
        self.trajectory.len()
    }

    /// Largest decrease of the augmented objective between consecutive
    /// cycles of the same inner loop (0 when monotone).
    pub fn worst_inner_decrease(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let mut bounds = self.outer_boundaries.clone();
        bounds.push(self.trajectory.len());
        for (w, start) in bounds.windows(2).zip(&self.inner_start_values) {
            let mut prev = *start;
            for rec in &self.trajectory[w[0]..w[1]] {
                worst = worst.max(prev - rec.augmented);
                prev = rec.augmented;
            }
        }
        worst
    }
}

/// One run of the alternating projected-gradient updates at fixed `(ν, ρ)`.
pub fn inner_loop(
    problem: &Problem<'_>,
    design: Design,
    state: &mut PddState,
    settings: &PddSettings,
) -> Result<InnerOutcome> {
    let cfg = problem.config;
    let armijo = &settings.armijo;
    let mut design = design;
    let mut eval = problem.evaluate(&design)?;
    let mut g = problem.augmented(&eval, state);
    let initial_augmented = g;
    let mut records = Vec::new();
    let mut termination = InnerTermination::IterationLimit;

    for inner in 1..=settings.inner_max_iter {
        state.inner_iter += 1;
        let g_prev = g;

        let (gc, gs) = grad_f(problem, &design, &eval, state);
        let frozen = *state;
        let step_f = backtrack(g, state.mu_f, armijo, |mu| {
            let (f_c, f_s) = project_pair(
                &design.f_c + gc.scale(mu),
                &design.f_s + gs.scale(mu),
                cfg.p_max,
            );
            let moved = frob_sq(&(&f_c - &design.f_c)) + frob_sq(&(&f_s - &design.f_s));
            let cand = Design {
                f_c,
                f_s,
                theta: design.theta.clone(),
            };
            let ev = problem.evaluate(&cand)?;
            Ok(Trial {
                value: problem.augmented(&ev, &frozen),
                required_increase: sufficient_increase(armijo.c, moved, mu),
                payload: (cand, ev),
            })
        })?;
        let mu_f = match step_f {
            Some((mu, (cand, ev))) => {
                design = cand;
                eval = ev;
                g = problem.augmented(&eval, state);
                mu
            }
            None => 0.0,
        };

        let mut mu_theta = 0.0;
        if cfg.m_r > 0 {
            let gt = grad_theta(problem, &design, &eval, state);
            let step_t = backtrack(g, state.mu_theta, armijo, |mu| {
                let theta = project_phases(&(&design.theta + gt.scale(mu)));
                let moved = (&theta - &design.theta).norm_squared();
                let cand = Design {
                    f_c: design.f_c.clone(),
                    f_s: design.f_s.clone(),
                    theta,
                };
                let ev = problem.evaluate(&cand)?;
                Ok(Trial {
                    value: problem.augmented(&ev, &frozen),
                    required_increase: sufficient_increase(armijo.c, moved, mu),
                    payload: (cand, ev),
                })
            })?;
            if let Some((mu, (cand, ev))) = step_t {
                design = cand;
                eval = ev;
                mu_theta = mu;
            }
        }

        state.tau = update_tau(eval.rate.rate, cfg.rate_threshold, state.nu, state.rho);
        g = problem.augmented(&eval, state);
        records.push(IterationRecord {
            outer: state.outer_iter,
            inner,
            augmented: g,
            objective: eval.normalized,
            residual: problem.residual(&eval, state.tau),
            rate: eval.rate.rate,
            tau: state.tau,
            step_f: mu_f,
            step_theta: mu_theta,
        });

        if (g - g_prev).abs() <= settings.inner_tol * (1.0 + g.abs()) {
            termination = if mu_f == 0.0 && mu_theta == 0.0 {
                InnerTermination::Stall
            } else {
                InnerTermination::Converged
            };
            break;
        }
    }

    Ok(InnerOutcome {
        design,
        tau: state.tau,
        records,
        termination,
        evaluation: eval,
        initial_augmented,
    })
}

/// Projected Armijo test: `c ‖x(μ) − x‖² / μ`, which equals `c μ ‖d‖²` when
/// the projection is inactive. A step that does not move is never accepted.
fn sufficient_increase(c: f64, moved_sq: f64, mu: f64) -> f64 {
    if moved_sq > 0.0 {
        c * moved_sq / mu
    } else {
        f64::INFINITY
    }
}

/// Alternates inner loops with multiplier and penalty updates.
pub fn outer_loop(
    problem: &Problem<'_>,
    initial: Design,
    settings: &PddSettings,
) -> Result<OptimizerReport> {
    settings.validate()?;
    let cfg = problem.config;
    let mut state = PddState::new(settings);
    let mut design = initial;
    let (f_c, f_s) = project_pair(design.f_c, design.f_s, cfg.p_max);
    design.f_c = f_c;
    design.f_s = f_s;
    design.theta = project_phases(&design.theta);

    let mut trajectory = Vec::new();
    let mut outer_boundaries = Vec::new();
    let mut inner_start_values = Vec::new();
    let mut inner_terminations = Vec::new();
    let mut termination = Termination::IterationLimit;
    let mut last_eval = None;

    for outer in 0..settings.outer_max_iter {
        state.outer_iter = outer;
        outer_boundaries.push(trajectory.len());
        let outcome = inner_loop(problem, design, &mut state, settings)?;
        inner_start_values.push(outcome.initial_augmented);
        trajectory.extend_from_slice(&outcome.records);
        inner_terminations.push(outcome.termination);
        design = outcome.design;
        let f = problem.residual(&outcome.evaluation, state.tau);
        last_eval = Some(outcome.evaluation);

        if f.abs() <= settings.outer_tol && outcome.termination != InnerTermination::IterationLimit
        {
            termination = Termination::Converged;
            break;
        }
        if outer + 1 == settings.outer_max_iter {
            break;
        }
        state.nu += f / state.rho;
        state.rho *= state.kappa;
        if state.rho < settings.rho_floor {
            termination = Termination::PenaltyFloor;
            break;
        }
    }

    let eval = match last_eval {
        Some(e) => e,
        None => problem.evaluate(&design)?,
    };
    let residual = qos_residual(eval.rate.rate, cfg.rate_threshold, state.tau);
    Ok(OptimizerReport {
        trajectory,
        outer_boundaries,
        inner_start_values,
        inner_terminations,
        termination,
        augmented: problem.augmented(&eval, &state),
        design,
        state,
        rate: eval.rate.rate,
        residual,
        objective: eval.normalized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precoder_projection_examples() {
        let f = CMat::from_element(1, 1, c(1.0, 0.0));
        assert_eq!(project_precoder(&f, 4.0), f);
        let big = CMat::from_element(1, 1, c(0.0, 4.0));
        let p = project_precoder(&big, 4.0);
        assert!((frob_sq(&p).sqrt() - 2.0).abs() < 1e-15);
        assert!((&project_precoder(&p, 4.0) - &p).norm() < 1e-14);
    }

    #[test]
    fn phase_projection_examples() {
        let t = CVec::from_vec(vec![c(3.0, 4.0), c(0.0, 0.0)]);
        let p = project_phases(&t);
        assert!((p[0] - c(0.6, 0.8)).norm() < 1e-15);
        assert_eq!(p[1], ONE);
        let unit = CVec::from_vec(vec![c(0.6, 0.8), c(0.0, -1.0)]);
        assert!((project_phases(&unit) - &unit).norm() < 1e-15);
    }

    #[test]
    fn tau_update_examples() {
        assert_eq!(update_tau(5.0, 5.0, 0.0, 10.0), 0.0);
        assert_eq!(update_tau(10.0, 5.0, 0.0, 10.0), 1.0);
        assert_eq!(update_tau(10.0, 5.0, 1.0, 10.0), 0.0);
    }

    #[test]
    fn settings_reject_bad_kappa() {
        let s = PddSettings {
            kappa: 1.5,
            ..PddSettings::default()
        };
        assert!(s.validate().is_err());
        PddSettings::default().validate().unwrap();
    }
}
