//! Classical comparison estimators: Capon, MUSIC and LS-ESPRIT, each
//! optionally preceded by forward-backward averaging of the sample
//! covariance.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{DoaError, Result};
use crate::linalg::{forward_backward_average, hermitian_eig, sample_covariance, CovarianceEstimate};
use crate::signal::{steering_vector, CMat, SnapshotBatch, UlaGeometry, C64};
use crate::spectrum::{GridSpec, Spectrum};

/// Condition number beyond which the covariance is diagonally loaded before
/// inversion (Capon).
const COND_LIMIT: f64 = 1e12;
/// Loading as a fraction of trace / M.
const LOAD_FRACTION: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineMethod {
    Capon,
    Music,
    Esprit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    /// Known model order K.
    pub num_sources: usize,
    pub use_fba: bool,
    pub grid: GridSpec,
}

impl BaselineConfig {
    pub fn validate(&self, num_sensors: usize) -> Result<()> {
        if self.num_sources >= num_sensors {
            return Err(DoaError::Domain(format!(
                "model order {} must be below the sensor count {}",
                self.num_sources, num_sensors
            )));
        }
        self.grid.validate()
    }
}

/// Eigendecomposition with diagonal loading applied when the matrix is
/// ill-conditioned. Loading shifts every eigenvalue by epsilon and keeps the
/// eigenvectors.
fn loaded_eig(r: &CMat) -> Result<(Array1<f64>, CMat, bool)> {
    let (mut vals, vecs) = hermitian_eig(r)?;
    let n = vals.len();
    let max = vals[0].max(0.0);
    let min = vals[n - 1];
    let loaded = if min <= 0.0 || max / min.max(f64::MIN_POSITIVE) > COND_LIMIT {
        let trace: f64 = vals.sum();
        let eps = LOAD_FRACTION * trace.abs().max(f64::MIN_POSITIVE) / n as f64;
        vals.mapv_inplace(|v| v + eps);
        true
    } else {
        false
    };
    if vals[n - 1] <= 0.0 {
        return Err(DoaError::Singular(
            "covariance irreparably singular for inversion".into(),
        ));
    }
    Ok((vals, vecs, loaded))
}

/// Capon power spectrum P(theta) = 1 / (a^H R^{-1} a).
pub fn capon_spectrum(
    cov: &CovarianceEstimate,
    geometry: &UlaGeometry,
    config: &BaselineConfig,
) -> Result<Spectrum> {
    config.grid.validate()?;
    let (vals, vecs, loaded) = loaded_eig(&cov.matrix)?;
    let n = vals.len();
    let angles = config.grid.angles();
    let mut power = Vec::with_capacity(angles.len());
    for &theta in &angles {
        let a = steering_vector(geometry, theta)?;
        // a^H R^{-1} a = sum_k |v_k^H a|^2 / lambda_k.
        let mut quad = 0.0;
        for k in 0..n {
            let mut proj = Complex64::new(0.0, 0.0);
            for row in 0..n {
                proj += vecs[(row, k)].conj() * a[row];
            }
            quad += proj.norm_sqr() / vals[k];
        }
        power.push(1.0 / quad);
    }
    let diagnostics = if loaded {
        vec![(angles[0], "diagonal-loading-applied".to_string())]
    } else {
        Vec::new()
    };
    Ok(Spectrum {
        angles_deg: angles,
        power,
        diagnostics,
    })
}

/// MUSIC pseudospectrum P(theta) = 1 / ||E_n^H a(theta)||^2.
pub fn music_spectrum(
    cov: &CovarianceEstimate,
    geometry: &UlaGeometry,
    config: &BaselineConfig,
) -> Result<Spectrum> {
    let m = cov.matrix.nrows();
    if config.num_sources >= m {
        return Err(DoaError::Domain(format!(
            "model order {} must be below {}",
            config.num_sources, m
        )));
    }
    config.grid.validate()?;
    let (_, vecs) = hermitian_eig(&cov.matrix)?;
    let k = config.num_sources;
    let angles = config.grid.angles();
    let mut power = Vec::with_capacity(angles.len());
    for &theta in &angles {
        let a = steering_vector(geometry, theta)?;
        let mut denom = 0.0;
        for col in k..m {
            let mut proj = Complex64::new(0.0, 0.0);
            for row in 0..m {
                proj += vecs[(row, col)].conj() * a[row];
            }
            denom += proj.norm_sqr();
        }
        power.push(1.0 / denom.max(f64::MIN_POSITIVE));
    }
    Ok(Spectrum {
        angles_deg: angles,
        power,
        diagnostics: Vec::new(),
    })
}

/// LS-ESPRIT with maximum-overlap subarrays: solve
/// Phi = (E_s upper)^+ (E_s lower) and read DOAs from the eigenvalue phases.
pub fn esprit_estimate(
    cov: &CovarianceEstimate,
    geometry: &UlaGeometry,
    num_sources: usize,
) -> Result<Vec<f64>> {
    let m = cov.matrix.nrows();
    if num_sources >= m || num_sources == 0 {
        return Err(DoaError::Domain(format!(
            "model order {} must be in [1, {})",
            num_sources, m
        )));
    }
    let (_, vecs) = hermitian_eig(&cov.matrix)?;
    let k = num_sources;
    // Signal subspace, split into overlapping subarrays.
    let upper = vecs.slice(ndarray::s![0..m - 1, 0..k]).to_owned();
    let lower = vecs.slice(ndarray::s![1..m, 0..k]).to_owned();

    // Normal equations: G = U^H U, H = U^H L, Phi = G^{-1} H.
    let mut g = Array2::<C64>::zeros((k, k));
    let mut h = Array2::<C64>::zeros((k, k));
    for a in 0..k {
        for b in 0..k {
            let mut ga = Complex64::new(0.0, 0.0);
            let mut ha = Complex64::new(0.0, 0.0);
            for row in 0..m - 1 {
                ga += upper[(row, a)].conj() * upper[(row, b)];
                ha += upper[(row, a)].conj() * lower[(row, b)];
            }
            g[(a, b)] = ga;
            h[(a, b)] = ha;
        }
    }
    let (gvals, gvecs) = hermitian_eig(&g)?;
    if gvals[k - 1] <= 1e-12 * gvals[0].max(f64::MIN_POSITIVE) {
        return Err(DoaError::Singular(
            "rank-deficient subarray block in least-squares solve".into(),
        ));
    }
    // G^{-1} H via the eigendecomposition of G.
    let mut phi = Array2::<C64>::zeros((k, k));
    for col in 0..k {
        // y = G^{-1} h_col
        let hcol = h.column(col);
        let mut y = Array1::<C64>::zeros(k);
        for e in 0..k {
            let mut proj = Complex64::new(0.0, 0.0);
            for row in 0..k {
                proj += gvecs[(row, e)].conj() * hcol[row];
            }
            proj /= gvals[e];
            for row in 0..k {
                y[row] += gvecs[(row, e)] * proj;
            }
        }
        phi.column_mut(col).assign(&y);
    }

    // Eigenvalue phases of the (generally non-Hermitian) rotation operator.
    let phi_na = DMatrix::from_fn(k, k, |r, c| phi[(r, c)]);
    let (_, t) = phi_na.schur().unpack();
    let mut thetas: Vec<f64> = (0..k)
        .map(|i| {
            let phase = t[(i, i)].arg();
            let c = (-phase / (2.0 * std::f64::consts::PI * geometry.spacing_ratio))
                .clamp(-1.0, 1.0);
            c.acos().to_degrees()
        })
        .collect();
    thetas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(thetas)
}

/// Uniform front door: sample covariance, optional forward-backward
/// averaging, then the requested method plus peak picking.
pub fn baseline_estimate(
    batch: &SnapshotBatch,
    geometry: &UlaGeometry,
    config: &BaselineConfig,
    method: BaselineMethod,
) -> Result<Vec<f64>> {
    config.validate(geometry.num_sensors)?;
    let mut cov = sample_covariance(batch.data.view())?;
    if config.use_fba {
        cov.matrix = forward_backward_average(&cov.matrix)?;
    }
    match method {
        BaselineMethod::Capon => {
            let spectrum = capon_spectrum(&cov, geometry, config)?;
            crate::eval::find_peaks(&spectrum, config.num_sources)
        }
        BaselineMethod::Music => {
            let spectrum = music_spectrum(&cov, geometry, config)?;
            crate::eval::find_peaks(&spectrum, config.num_sources)
        }
        BaselineMethod::Esprit => esprit_estimate(&cov, geometry, config.num_sources),
    }
}

/// Nominal multiply-accumulate count for a baseline run (covariance plus
/// decomposition plus grid search); used for the complexity comparisons.
pub fn baseline_op_count(
    method: BaselineMethod,
    num_sensors: usize,
    num_sources: usize,
    num_snapshots: usize,
    grid_len: usize,
) -> u64 {
    let m = num_sensors as u64;
    let k = num_sources as u64;
    let n = num_snapshots as u64;
    let g = grid_len as u64;
    let cov = m * m * n;
    match method {
        BaselineMethod::Capon => cov + m * m * m + g * (m * m + 2 * m),
        BaselineMethod::Music => cov + m * m * m + g * (m * (m - k) * 2),
        BaselineMethod::Esprit => cov + m * m * m + 2 * m * k * k + k * k * k,
    }
}
