//! ULA snapshot simulator: steering vectors, BPSK / AR(1)-correlated source
//! matrices and white circular complex Gaussian noise.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{DoaError, Result};

pub type C64 = Complex64;
pub type CVec = Array1<C64>;
pub type CMat = Array2<C64>;

/// Uniform linear array: element count and inter-element spacing as a
/// fraction of the carrier wavelength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UlaGeometry {
    pub num_sensors: usize,
    pub spacing_ratio: f64,
}

impl UlaGeometry {
    pub fn new(num_sensors: usize, spacing_ratio: f64) -> Result<Self> {
        let g = UlaGeometry {
            num_sensors,
            spacing_ratio,
        };
        g.validate()?;
        Ok(g)
    }

    /// Half-wavelength spacing.
    pub fn half_wavelength(num_sensors: usize) -> Result<Self> {
        UlaGeometry::new(num_sensors, 0.5)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_sensors < 2 {
            return Err(DoaError::Domain(format!(
                "ULA needs at least 2 sensors, got {}",
                self.num_sensors
            )));
        }
        if !(self.spacing_ratio > 0.0) {
            return Err(DoaError::Domain(format!(
                "spacing ratio must be positive, got {}",
                self.spacing_ratio
            )));
        }
        Ok(())
    }
}

/// Synthetic source scenario. Sources are BPSK except for the optional
/// correlated pair, which follows a first-order autoregressive model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceScenario {
    /// True DOAs in degrees, strictly ascending, inside (0, 180).
    pub doas_deg: Vec<f64>,
    pub source_power: f64,
    pub noise_power: f64,
    /// Indices (0-based) of the AR(1)-correlated source pair.
    pub correlated_pair: Option<(usize, usize)>,
    pub correlation_coeff: f64,
    pub num_snapshots: usize,
    pub rng_seed: u64,
}

impl SourceScenario {
    /// Noise power from an SNR (dB) defined per source per element.
    pub fn noise_power_for_snr(source_power: f64, snr_db: f64) -> f64 {
        source_power * 10f64.powf(-snr_db / 10.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.doas_deg.is_empty() {
            return Err(DoaError::Domain("scenario needs at least one source".into()));
        }
        for w in self.doas_deg.windows(2) {
            if w[0] >= w[1] {
                return Err(DoaError::Domain(format!(
                    "DOAs must be strictly ascending, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        for &t in &self.doas_deg {
            if !(t > 0.0 && t < 180.0) {
                return Err(DoaError::Domain(format!("DOA {} outside (0, 180)", t)));
            }
        }
        if !(self.source_power >= 0.0) || !(self.noise_power >= 0.0) {
            return Err(DoaError::Domain("powers must be non-negative".into()));
        }
        if let Some((p, q)) = self.correlated_pair {
            let k = self.doas_deg.len();
            if p == q || p >= k || q >= k {
                return Err(DoaError::Domain(format!(
                    "correlated pair ({}, {}) invalid for {} sources",
                    p, q, k
                )));
            }
            if !(self.correlation_coeff >= 0.0 && self.correlation_coeff < 1.0) {
                return Err(DoaError::Domain(format!(
                    "correlation coefficient {} outside [0, 1)",
                    self.correlation_coeff
                )));
            }
        }
        if self.num_snapshots == 0 {
            return Err(DoaError::Domain("need at least one snapshot".into()));
        }
        Ok(())
    }
}

/// A batch of received array snapshots: column i is r(i).
#[derive(Debug, Clone)]
pub struct SnapshotBatch {
    pub data: CMat,
    pub scenario: SourceScenario,
    pub geometry: UlaGeometry,
}

/// Steering vector a(theta): element m is exp(-2*pi*j*m*ratio*cos(theta)).
pub fn steering_vector(geometry: &UlaGeometry, theta_deg: f64) -> Result<CVec> {
    geometry.validate()?;
    if !(theta_deg > 0.0 && theta_deg < 180.0) {
        return Err(DoaError::Domain(format!(
            "scanning angle {} outside (0, 180)",
            theta_deg
        )));
    }
    let phase = -2.0 * PI * geometry.spacing_ratio * theta_deg.to_radians().cos();
    Ok(Array1::from_iter(
        (0..geometry.num_sensors).map(|m| Complex64::from_polar(1.0, phase * m as f64)),
    ))
}

/// Derivative of the steering vector with respect to theta in radians.
pub(crate) fn steering_derivative(geometry: &UlaGeometry, theta_deg: f64) -> Result<CVec> {
    let a = steering_vector(geometry, theta_deg)?;
    let coeff = 2.0 * PI * geometry.spacing_ratio * theta_deg.to_radians().sin();
    Ok(Array1::from_iter(a.iter().enumerate().map(|(m, &am)| {
        am * Complex64::new(0.0, coeff * m as f64)
    })))
}

/// K x N source sample matrix. Uncorrelated sources are i.i.d. BPSK with
/// amplitude sigma_s; the correlated pair (p, q) follows
/// s_q = rho * s_p + sqrt(1 - rho^2) * e with real Gaussian s_p, e.
pub fn generate_source_matrix<R: Rng>(scenario: &SourceScenario, rng: &mut R) -> Result<CMat> {
    scenario.validate()?;
    let k = scenario.doas_deg.len();
    let n = scenario.num_snapshots;
    let sigma = scenario.source_power.sqrt();
    let mut s = Array2::<C64>::zeros((k, n));

    // Draw order is fixed row by row so batches are reproducible.
    let mut driver_row: Vec<f64> = Vec::new();
    let mut innovation_row: Vec<f64> = Vec::new();
    let (pair_p, pair_q) = match scenario.correlated_pair {
        Some((p, q)) => (Some(p), Some(q)),
        None => (None, None),
    };
    for row in 0..k {
        if Some(row) == pair_p {
            driver_row = (0..n)
                .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
                .collect();
            for (i, &x) in driver_row.iter().enumerate() {
                s[(row, i)] = Complex64::new(x, 0.0);
            }
        } else if Some(row) == pair_q {
            innovation_row = (0..n)
                .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
                .collect();
        } else {
            for i in 0..n {
                let b = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                s[(row, i)] = Complex64::new(sigma * b, 0.0);
            }
        }
    }
    if let (Some(p), Some(q)) = (pair_p, pair_q) {
        let rho = scenario.correlation_coeff;
        let mix = (1.0 - rho * rho).sqrt();
        for i in 0..n {
            let x = rho * driver_row[i] + mix * innovation_row[i];
            s[(q, i)] = Complex64::new(x, 0.0);
            // Driver row was already written; keep the borrow checker happy.
            let _ = p;
        }
    }
    Ok(s)
}

/// Received snapshot batch r(i) = sum_k a(theta_k) s_k(i) + n(i) with white
/// circular complex Gaussian noise of per-element variance noise_power.
pub fn generate_snapshots<R: Rng>(
    geometry: &UlaGeometry,
    scenario: &SourceScenario,
    rng: &mut R,
) -> Result<SnapshotBatch> {
    geometry.validate()?;
    let sources = generate_source_matrix(scenario, rng)?;
    let m = geometry.num_sensors;
    let k = scenario.doas_deg.len();
    let n = scenario.num_snapshots;

    let mut steering = Array2::<C64>::zeros((m, k));
    for (col, &theta) in scenario.doas_deg.iter().enumerate() {
        let a = steering_vector(geometry, theta)?;
        steering.column_mut(col).assign(&a);
    }
    let mut data = steering.dot(&sources);

    let noise_sigma = (scenario.noise_power / 2.0).sqrt();
    for i in 0..n {
        for row in 0..m {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            data[(row, i)] += Complex64::new(noise_sigma * re, noise_sigma * im);
        }
    }
    Ok(SnapshotBatch {
        data,
        scenario: scenario.clone(),
        geometry: *geometry,
    })
}

/// Independent per-trial RNG stream derived from (master seed, SNR index,
/// trial index) with SplitMix64-style mixing.
pub fn trial_rng(master_seed: u64, snr_index: u64, trial_index: u64) -> ChaCha12Rng {
    let mut z = master_seed
        .wrapping_add(snr_index.wrapping_mul(0x9e3779b97f4a7c15))
        .wrapping_add(trial_index.wrapping_mul(0xbf58476d1ce4e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^= z >> 31;
    ChaCha12Rng::seed_from_u64(z)
}
