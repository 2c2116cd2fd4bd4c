//! Simulation library for an aggregator of residential PV-plus-battery
//! units trading in a two-settlement electricity market.
//!
//! The pipeline: fit seasonal ARIMA forecasts to unit histories, model
//! the hourly forecast errors as a correlated Gaussian, turn samples of
//! that model into price/PV/demand scenarios, reduce them to a tractable
//! set, and solve quadratic programs for day-ahead commitments and
//! hour-by-hour real-time recourse, tracking battery state and realized
//! settlement cost along the way.

pub mod core;
pub mod error;
pub mod errormodel;
pub mod forecast;
pub mod optimize;
pub mod scenario;
pub mod sim;
pub mod synth;

pub use error::{Error, Result};
