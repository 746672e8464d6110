//! Experiment driver: configuration, seeded Monte Carlo trials, parameter
//! sweeps, the Bartlett AoA study and CSV output.

pub mod aoa;
pub mod config;
pub mod error;
pub mod output;
pub mod sweep;
pub mod trial;

pub use aoa::{bartlett_aoa, AoaResult, BartlettEstimate};
pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use output::{write_convergence_csv, write_csv, ConvergenceRow};
pub use sweep::{run_sweep, SweepParam, SweepPoint, SweepRow, SweepSpec};
pub use trial::{run_trial, TrialOptions, TrialRecord};
