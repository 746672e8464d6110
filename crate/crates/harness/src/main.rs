use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rispriv_core::pdd::gradcheck::{gradcheck_config, run_gradcheck, DEFAULT_STEP};
use rispriv_core::{PriorScenario, ScenarioModel};
use rispriv_harness::config::ExperimentConfig;
use rispriv_harness::output::convergence_rows;
use rispriv_harness::sweep::SweepParam;
use rispriv_harness::trial::{trial_rng, TrialInstance};
use rispriv_harness::{
    run_sweep, write_convergence_csv, write_csv, HarnessError, Result, SweepRow, SweepSpec,
    TrialOptions,
};

const GRADCHECK_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Parser)]
#[command(
    name = "rispriv",
    version,
    about = "Privacy-aware precoder/RIS design experiments"
)]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Trials per sweep point.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Output CSV path.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Disable the RIS.
    #[arg(long, global = true)]
    no_ris: bool,
    /// perfect, imperfect_both, imperfect_A or imperfect_S.
    #[arg(long, global = true)]
    prior: Option<String>,
    /// Start from the full-scale deployment instead of the desk defaults.
    #[arg(long, global = true)]
    paper_scale: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Trials at the configured operating point.
    Run,
    /// Trials over a list of parameter values.
    Sweep {
        /// m_R, m_A, m_S, K, p_max_dbm or prior_var.
        #[arg(long)]
        param: Option<String>,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        values: Option<Vec<f64>>,
    },
    /// AoA RMSE versus power budget with and without the RIS.
    Aoa {
        /// Comma-separated power budgets in dBm.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        p_max_dbm: Option<Vec<f64>>,
    },
    /// Compares the analytic gradients with central finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 20)]
        points: usize,
        #[arg(long, default_value_t = DEFAULT_STEP)]
        step: f64,
    },
    /// Optimizer trajectory of one trial.
    Convergence {
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
}

struct Context {
    cfg: ExperimentConfig,
    seed: u64,
    out: Option<PathBuf>,
    options: TrialOptions,
}

impl Context {
    fn new(cli: &Cli) -> Result<Self> {
        let base = if cli.paper_scale {
            ExperimentConfig::paper_scale()
        } else {
            ExperimentConfig::desk()
        };
        let mut cfg = match &cli.config {
            Some(path) => ExperimentConfig::load(path, &base)?,
            None => base,
        };
        if let Some(t) = cli.trials {
            cfg.experiment.trials = t;
        }
        if let Some(p) = &cli.prior {
            cfg.experiment.prior = p.parse::<PriorScenario>()?;
        }
        if cli.no_ris {
            cfg.experiment.ris = false;
        }
        cfg.validate()?;
        let options = TrialOptions {
            solver: cfg.solver,
            monte_carlo_draws: cfg.experiment.monte_carlo_draws,
            grid_step_deg: cfg.aoa.grid_step_deg,
        };
        Ok(Self {
            seed: cli.seed.unwrap_or(cfg.system.seed),
            out: cli.out.clone(),
            cfg,
            options,
        })
    }

    fn out_or(&self, default: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(default))
    }

    fn spec(&self, param: SweepParam, values: Vec<f64>, ris_enabled: bool) -> SweepSpec {
        SweepSpec {
            param,
            values,
            trials: self.cfg.experiment.trials,
            scenario: self.cfg.experiment.prior,
            ris_enabled,
        }
    }

    fn sweep(&self, spec: &SweepSpec) -> Result<Vec<SweepRow>> {
        let points = run_sweep(spec, &self.cfg.system, &self.options, self.seed)?;
        for p in &points {
            if p.failed() > 0 {
                eprintln!(
                    "warning: {} of {} trials failed at {} = {}",
                    p.failed(),
                    p.records.len(),
                    spec.param,
                    p.row.sweep_value
                );
            }
        }
        Ok(points.into_iter().map(|p| p.row).collect())
    }
}

fn print_rows(rows: &[SweepRow], path: &Path) {
    println!(
        "{:>10} {:>10} {:>15} {:>5} {:>12} {:>12} {:>10} {:>8} {:>9} {:>6}",
        "param",
        "value",
        "scenario",
        "ris",
        "nmse",
        "nmse_mc",
        "stderr",
        "rate",
        "aoa_rmse",
        "trials"
    );
    for r in rows {
        println!(
            "{:>10} {:>10} {:>15} {:>5} {:>12.5e} {:>12.5e} {:>10.2e} {:>8.3} {:>9.3} {:>6}",
            r.sweep_param,
            r.sweep_value,
            r.scenario,
            r.ris,
            r.nmse_analytic_mean,
            r.nmse_mc_mean,
            r.nmse_stderr,
            r.rate_mean,
            r.aoa_rmse,
            r.trials
        );
    }
    println!("wrote {}", path.display());
}

fn run(cli: &Cli) -> Result<()> {
    let ctx = Context::new(cli)?;
    let ris = ctx.cfg.experiment.ris;
    match &cli.command {
        Command::Run => {
            let sys = &ctx.cfg.system;
            let value = if ris { sys.m_r as f64 } else { 0.0 };
            let spec = ctx.spec(SweepParam::RisElements, vec![value], true);
            let mut base = sys.clone();
            base.m_r = value as usize;
            let points = run_sweep(&spec, &base, &ctx.options, ctx.seed)?;
            let mut rows: Vec<SweepRow> = points.into_iter().map(|p| p.row).collect();
            for r in &mut rows {
                r.ris = ris && value > 0.0;
            }
            let path = ctx.out_or("run.csv");
            write_csv(&rows, &path)?;
            print_rows(&rows, &path);
        }
        Command::Sweep { param, values } => {
            let table = ctx.cfg.sweep.clone();
            let param = match (param, &table) {
                (Some(p), _) => p.parse::<SweepParam>()?,
                (None, Some(t)) => t.param,
                (None, None) => {
                    return Err(HarnessError::Config(
                        "sweep needs --param or a [sweep] table".into(),
                    ))
                }
            };
            let values = match (values, &table) {
                (Some(v), _) => v.clone(),
                (None, Some(t)) => t.values.clone(),
                (None, None) => {
                    return Err(HarnessError::Config(
                        "sweep needs --values or a [sweep] table".into(),
                    ))
                }
            };
            let spec = ctx.spec(param, values, ris);
            let rows = ctx.sweep(&spec)?;
            let path = ctx.out_or(&format!("sweep_{}.csv", param.name()));
            write_csv(&rows, &path)?;
            print_rows(&rows, &path);
        }
        Command::Aoa { p_max_dbm } => {
            let values = p_max_dbm
                .clone()
                .unwrap_or_else(|| ctx.cfg.aoa.p_max_dbm.clone());
            let mut rows = Vec::new();
            let archs: &[bool] = if ris { &[true, false] } else { &[false] };
            for &arch in archs {
                rows.extend(ctx.sweep(&ctx.spec(SweepParam::PowerDbm, values.clone(), arch))?);
            }
            let path = ctx.out_or("aoa.csv");
            write_csv(&rows, &path)?;
            print_rows(&rows, &path);
        }
        Command::Gradcheck { points, step } => {
            let report = run_gradcheck(&gradcheck_config(), *points, cli.seed.unwrap_or(0), *step)?;
            let w = report.worst;
            println!("points: {points}, step: {step:e}");
            println!(
                "max relative error  F_c: {:.3e}  F_s: {:.3e}  theta: {:.3e}",
                w.f_c, w.f_s, w.theta
            );
            let pass = w.max() <= GRADCHECK_TOLERANCE;
            println!(
                "{} (tolerance {GRADCHECK_TOLERANCE:e})",
                if pass { "PASS" } else { "FAIL" }
            );
            if !pass {
                return Err(HarnessError::Core(rispriv_core::Error::Domain(format!(
                    "gradient check exceeded tolerance: {:.3e}",
                    w.max()
                ))));
            }
        }
        Command::Convergence { trial } => {
            let mut sys = ctx.cfg.experiment.prior.apply(&ctx.cfg.system);
            if !ris {
                sys.m_r = 0;
            }
            let model = ScenarioModel::new(&sys)?;
            let inst = TrialInstance::draw(&model, &mut trial_rng(ctx.seed, *trial));
            let report = inst.optimize(&sys, &ctx.options.solver)?;
            let rows = convergence_rows(&report);
            let path = ctx.out_or("convergence.csv");
            write_convergence_csv(&rows, &path)?;
            println!(
                "{} inner cycles, {} outer iterations, termination: {}",
                report.total_inner_iterations(),
                report.outer_boundaries.len(),
                report.termination
            );
            println!(
                "objective {:.6e}, rate {:.4} (threshold {:.4}), residual {:.2e}",
                report.objective, report.rate, sys.rate_threshold, report.residual
            );
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
