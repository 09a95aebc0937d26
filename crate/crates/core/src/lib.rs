//! Simulation and analysis of a dual-polarized, IRS-assisted massive MIMO-NOMA
//! downlink.

pub mod analytics;
pub mod channel;
pub mod covariance;
pub mod error;
pub mod harness;
pub mod irs;
pub mod linalg;
pub mod precoding;
pub mod quadrature;
pub mod receiver;
pub mod scenario;
pub mod validation;

pub use error::{Error, Result};
