//! Quasi-static phasor frames: linear steady-state solves before and after a
//! fault step, plus PMU noise.

pub mod benchmark;
mod fault;
mod frames;
mod steady_state;

pub use benchmark::{
    build_benchmark, build_benchmark_with, placed_benchmark, second_topology, BenchmarkGrounding,
};
pub use fault::{apply_fault, FaultKind, FaultSpec};
pub use frames::{generate_frames, FrameSource, Scenario, Snapshot};
pub use steady_state::{solve_steady_state, SteadyState};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn default_current_floor() -> f64 {
    0.01
}

fn default_voltage_floor() -> f64 {
    1e-3
}

/// PMU noise. Magnitude deviations are relative, angle deviations absolute
/// (radians). The floors only enter the estimator covariance, keeping it
/// positive definite for near-zero phasors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma_vmag_rel: f64,
    pub sigma_imag_rel: f64,
    pub sigma_vang: f64,
    pub sigma_iang: f64,
    /// Sampling period, seconds.
    pub dt: f64,
    pub seed: u64,
    /// Amperes.
    #[serde(default = "default_current_floor")]
    pub current_floor: f64,
    /// Volts.
    #[serde(default = "default_voltage_floor")]
    pub voltage_floor: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            sigma_vmag_rel: 1.6e-5,
            sigma_imag_rel: 4e-3,
            sigma_vang: 5.1e-5,
            sigma_iang: 5.8e-3,
            dt: 0.02,
            seed: 0,
            current_floor: default_current_floor(),
            voltage_floor: default_voltage_floor(),
        }
    }
}

impl NoiseSpec {
    pub fn with_seed(seed: u64) -> Self {
        NoiseSpec {
            seed,
            ..NoiseSpec::default()
        }
    }

    /// All deviations zero: frames carry the exact solution.
    pub fn noiseless() -> Self {
        NoiseSpec {
            sigma_vmag_rel: 0.0,
            sigma_imag_rel: 0.0,
            sigma_vang: 0.0,
            sigma_iang: 0.0,
            ..NoiseSpec::default()
        }
    }

    pub fn is_noiseless(&self) -> bool {
        self.sigma_vmag_rel == 0.0
            && self.sigma_imag_rel == 0.0
            && self.sigma_vang == 0.0
            && self.sigma_iang == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.sigma_vmag_rel,
            self.sigma_imag_rel,
            self.sigma_vang,
            self.sigma_iang,
        ];
        if all.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::Domain("noise deviations must be finite and >= 0".into()));
        }
        if !(self.dt > 0.0 && self.current_floor > 0.0 && self.voltage_floor > 0.0) {
            return Err(Error::Domain("dt and covariance floors must be positive".into()));
        }
        Ok(())
    }
}
