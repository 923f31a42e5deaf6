//! Fault detection, cluster localization and PMU placement for radial
//! three-phase distribution networks.

pub mod error;
pub mod estimator;
pub mod fdl;
pub mod grid;
pub mod linalg;
pub mod montecarlo;
pub mod observability;
pub mod par;
pub mod phase;
pub mod placement;
pub mod simulator;

pub use error::{Error, Result};
