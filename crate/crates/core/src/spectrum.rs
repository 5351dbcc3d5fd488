use serde::{Deserialize, Serialize};

use crate::error::{DoaError, Result};

/// Scanning grid over the broadside angle, degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub start_deg: f64,
    pub stop_deg: f64,
    pub step_deg: f64,
}

impl GridSpec {
    /// Default 0.3 degree grid over (0, 180) excluding the endfire endpoints.
    pub fn default_scan() -> Self {
        GridSpec {
            start_deg: 0.3,
            stop_deg: 179.7,
            step_deg: 0.3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_deg > 0.0) {
            return Err(DoaError::Domain(format!(
                "grid step must be positive, got {}",
                self.step_deg
            )));
        }
        if self.start_deg <= 0.0 || self.stop_deg >= 180.0 || self.start_deg > self.stop_deg {
            return Err(DoaError::Domain(format!(
                "grid [{}, {}] must lie inside (0, 180) with start <= stop",
                self.start_deg, self.stop_deg
            )));
        }
        Ok(())
    }

    /// Grid angles, ascending. The stop angle is included up to half a step
    /// of rounding slack.
    pub fn angles(&self) -> Vec<f64> {
        let n = ((self.stop_deg - self.start_deg) / self.step_deg + 0.5).floor() as usize + 1;
        (0..n)
            .map(|i| self.start_deg + i as f64 * self.step_deg)
            .collect()
    }
}

/// Output power over the scanning grid plus non-fatal per-angle failures.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub angles_deg: Vec<f64>,
    pub power: Vec<f64>,
    /// (angle, failure tag) for angles where the estimator hit a singularity;
    /// those angles carry power 0.
    pub diagnostics: Vec<(f64, String)>,
}

/// Spectrum plus instrumented operation counts from the estimator core.
#[derive(Debug, Clone)]
pub struct ScanOutcome {
    pub spectrum: Spectrum,
    /// Total complex multiply-accumulates in the per-snapshot recursions.
    pub op_count: u64,
    /// The share spent in basis-vector updates (scales with the I^2 terms).
    pub basis_ops: u64,
    /// The share spent in auxiliary-vector updates (scales with the D^2 terms).
    pub aux_ops: u64,
}
