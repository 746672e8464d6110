//! Transmitter-privacy design for RIS-aided links with a channel-estimating
//! adversary: channel models, estimator analysis and a penalty-dual-
//! decomposition optimizer for the precoders and RIS phases.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN.

pub mod comm;
pub mod error;
pub mod linalg;
pub mod pdd;
pub mod scenario;
pub mod sensing;

pub use comm::{
    achievable_rate, composite_channel, interference_covariance, qos_residual, Design, RateContext,
};
pub use error::{Error, Result};
pub use scenario::{ChannelSet, PriorScenario, PriorSet, ScenarioModel, SystemConfig};
pub use sensing::{LmmseFilter, ObservationBlock, SymbolBlock};
