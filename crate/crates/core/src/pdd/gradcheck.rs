//! Central finite-difference check of the augmented-Lagrangian gradients.
//!
//! For a real function `g` of a complex entry `z = a + jb` the conjugate
//! Wirtinger derivative is `(∂g/∂a + j ∂g/∂b) / 2`; both partials are taken
//! by central differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::comm::Design;
use crate::error::Result;
use num_complex::Complex64;

use crate::linalg::{c, max_rel_diff, CMat, CVec};
use crate::scenario::{ChannelSet, PriorScenario, PriorSet, ScenarioModel, SystemConfig};
use crate::sensing::{draw_symbols, SymbolBlock};

use super::reference::DenseGradient;
use super::{initial_design, AugmentedGradient, PddSettings, PddState, Problem};

pub const DEFAULT_STEP: f64 = 1e-6;

/// Largest relative error per gradient block.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GradientErrors {
    pub f_c: f64,
    pub f_s: f64,
    pub theta: f64,
}

impl GradientErrors {
    pub fn max(&self) -> f64 {
        self.f_c.max(self.f_s).max(self.theta)
    }

    fn merge(self, other: GradientErrors) -> Self {
        Self {
            f_c: self.f_c.max(other.f_c),
            f_s: self.f_s.max(other.f_s),
            theta: self.theta.max(other.theta),
        }
    }
}

/// `max|a − b| / max|b|` for each block.
pub fn compare(a: &DenseGradient, b: &DenseGradient) -> GradientErrors {
    GradientErrors {
        f_c: max_rel_diff(&a.f_c, &b.f_c),
        f_s: max_rel_diff(&a.f_s, &b.f_s),
        theta: max_rel_diff(&col(&a.theta), &col(&b.theta)),
    }
}

fn col(v: &CVec) -> CMat {
    CMat::from_column_slice(v.len(), 1, v.as_slice())
}

impl From<AugmentedGradient> for DenseGradient {
    fn from(g: AugmentedGradient) -> Self {
        Self {
            f_c: g.f_c,
            f_s: g.f_s,
            theta: g.theta,
        }
    }
}

/// Augmented Lagrangian at fixed `ν, ρ, τ`.
pub fn augmented_at(problem: &Problem<'_>, design: &Design, state: &PddState) -> Result<f64> {
    let eval = problem.evaluate(design)?;
    Ok(problem.augmented(&eval, state))
}

fn wirtinger<F>(step: f64, mut g: F) -> Result<Complex64>
where
    F: FnMut(Complex64) -> Result<f64>,
{
    let mut partial =
        |delta: Complex64| -> Result<f64> { Ok((g(delta)? - g(-delta)?) / (2.0 * step)) };
    let re = partial(c(step, 0.0))?;
    let im = partial(c(0.0, step))?;
    Ok(c(re, im) * 0.5)
}

/// Finite-difference gradient of the augmented Lagrangian with respect to
/// `F_c*`, `F_s*` and `θ*`, treating every entry as unconstrained.
pub fn finite_difference_gradient(
    problem: &Problem<'_>,
    design: &Design,
    state: &PddState,
    step: f64,
) -> Result<DenseGradient> {
    let perturbed = |edit: &dyn Fn(&mut Design, Complex64), delta: Complex64| -> Result<f64> {
        let mut trial = design.clone();
        edit(&mut trial, delta);
        augmented_at(problem, &trial, state)
    };
    let mut f_c = CMat::zeros(design.f_c.nrows(), design.f_c.ncols());
    for i in 0..f_c.len() {
        f_c[i] = wirtinger(step, |d| perturbed(&|t, d| t.f_c[i] += d, d))?;
    }
    let mut f_s = CMat::zeros(design.f_s.nrows(), design.f_s.ncols());
    for i in 0..f_s.len() {
        f_s[i] = wirtinger(step, |d| perturbed(&|t, d| t.f_s[i] += d, d))?;
    }
    let mut theta = CVec::zeros(design.theta.len());
    for i in 0..theta.len() {
        theta[i] = wirtinger(step, |d| perturbed(&|t, d| t.theta[i] += d, d))?;
    }
    Ok(DenseGradient { f_c, f_s, theta })
}

/// Analytic gradient through the fast route used by the optimizer.
pub fn analytic_gradient(
    problem: &Problem<'_>,
    design: &Design,
    state: &PddState,
) -> Result<DenseGradient> {
    let eval = problem.evaluate(design)?;
    Ok(AugmentedGradient::new(problem, design, &eval, state).into())
}

/// Small instance on which the check runs.
pub fn gradcheck_config() -> SystemConfig {
    let cfg = SystemConfig {
        m_a: 2,
        m_min: 2,
        m_b: 3,
        m_s: 2,
        m_r: 4,
        k: 3,
        ..SystemConfig::default()
    };
    PriorScenario::ImperfectBoth.apply(&cfg)
}

/// Randomly drawn problem data, design and multiplier state.
#[derive(Debug, Clone)]
pub struct GradcheckCase {
    pub config: SystemConfig,
    pub channels: ChannelSet,
    pub priors: PriorSet,
    pub symbols: SymbolBlock,
    pub design: Design,
    pub state: PddState,
}

impl GradcheckCase {
    pub fn draw<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> Result<Self> {
        let model = ScenarioModel::new(config)?;
        let channels = model.sample_channels(rng);
        let priors = model.derive_priors(rng);
        let symbols = draw_symbols(rng, config.m_min, config.m_a, config.k);
        let mut design = initial_design(config, rng);
        // Random interior point of the power ball.
        let shrink = 0.3 + 0.7 * rng.random::<f64>();
        design.f_c = design.f_c.scale(shrink);
        design.f_s = design.f_s.scale(shrink);
        let mut state = PddState::new(&PddSettings::default());
        state.nu = rng.random::<f64>();
        state.rho = 0.1 + 10.0 * rng.random::<f64>();
        state.tau = 0.5 * rng.random::<f64>();
        Ok(Self {
            config: config.clone(),
            channels,
            priors,
            symbols,
            design,
            state,
        })
    }

    pub fn problem(&self) -> Problem<'_> {
        Problem::new(&self.config, &self.channels, &self.priors, &self.symbols)
    }
}

#[derive(Debug, Clone)]
pub struct GradcheckReport {
    pub points: Vec<GradientErrors>,
    pub worst: GradientErrors,
}

/// Checks the analytic gradients against finite differences at `points`
/// random feasible points.
pub fn run_gradcheck(
    config: &SystemConfig,
    points: usize,
    seed: u64,
    step: f64,
) -> Result<GradcheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut errors = Vec::with_capacity(points);
    for _ in 0..points {
        let case = GradcheckCase::draw(config, &mut rng)?;
        let problem = case.problem();
        let analytic = analytic_gradient(&problem, &case.design, &case.state)?;
        let numeric = finite_difference_gradient(&problem, &case.design, &case.state, step)?;
        errors.push(compare(&analytic, &numeric));
    }
    let worst = errors
        .iter()
        .copied()
        .fold(GradientErrors::default(), GradientErrors::merge);
    Ok(GradcheckReport {
        points: errors,
        worst,
    })
}
