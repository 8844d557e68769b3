//! Streaming battery state-of-health forecasting with pseudo-target online
//! updates.

pub mod error;
pub mod evaluation;
pub mod forecast;
pub mod ingest;
pub mod protocol;
pub mod pseudo;
pub mod scalar;
pub mod series;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Default-precision aliases used by the CLI and most tests.
pub type SohSeries64 = series::SohSeries<f64>;
pub type Window64 = series::Window<f64>;
pub type ForecastVector64 = series::ForecastVector<f64>;
pub type PseudoTargets64 = pseudo::PseudoTargets<f64>;
pub type RunConfig64 = protocol::RunConfig<f64>;
pub type RunResult64 = protocol::RunResult<f64>;
