//! Monte Carlo experiment engine: SNR sweeps, resolution probability, RMSE,
//! a stochastic Cramer-Rao reference curve and instrumented operation counts.

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::alrd::{alrd_scan, AlrdConfig};
use crate::baselines::{baseline_estimate, baseline_op_count, BaselineConfig, BaselineMethod};
use crate::error::{DoaError, Result};
use crate::linalg::hermitian_eig;
use crate::malrd::malrd_scan;
use crate::signal::{
    generate_snapshots, steering_derivative, steering_vector, trial_rng, CMat, SourceScenario,
    UlaGeometry, C64,
};
use crate::spectrum::{GridSpec, Spectrum};

/// Resolution threshold for a single-source scenario, degrees. The
/// half-neighbor-gap criterion is undefined at K = 1.
pub const SINGLE_SOURCE_RESOLUTION_DEG: f64 = 1.0;

/// One estimator entry in a sweep.
#[derive(Debug, Clone)]
pub enum MethodSpec {
    Alrd(AlrdConfig),
    Malrd(AlrdConfig),
    Capon(BaselineConfig),
    Music(BaselineConfig),
    Esprit { num_sources: usize, use_fba: bool },
}

impl MethodSpec {
    pub fn label(&self) -> &'static str {
        match self {
            MethodSpec::Alrd(_) => "alrd-rls",
            MethodSpec::Malrd(_) => "malrd-rls",
            MethodSpec::Capon(_) => "capon",
            MethodSpec::Music(_) => "music",
            MethodSpec::Esprit { .. } => "esprit",
        }
    }
}

/// Outcome of one estimator on one snapshot batch.
#[derive(Debug, Clone)]
pub struct TrialResult {
    pub estimated_doas: Vec<f64>,
    pub resolved: bool,
    pub squared_errors: Vec<f64>,
    pub op_count: u64,
}

/// Aggregated per-method sweep results, arrays aligned with `snr_grid_db`.
#[derive(Debug, Clone)]
pub struct SweepReport {
    pub method: String,
    pub snr_grid_db: Vec<f64>,
    pub resolution_prob: Vec<f64>,
    pub rmse_deg: Vec<f64>,
    pub rmse_resolved_only_deg: Vec<f64>,
    pub crb_deg: Vec<f64>,
    pub mean_op_count: Vec<f64>,
    pub trials: usize,
    pub config_echo: String,
}

/// The K largest strict local maxima of the spectrum (endpoints compare to
/// their single neighbor); ties broken toward the lower angle. If fewer than
/// K local maxima exist the remaining slots are filled with the largest
/// not-yet-selected grid points.
pub fn find_peaks(spectrum: &Spectrum, k: usize) -> Result<Vec<f64>> {
    let n = spectrum.power.len();
    if k > n {
        return Err(DoaError::Domain(format!(
            "requested {} peaks from a {}-point grid",
            k, n
        )));
    }
    let p = &spectrum.power;
    let is_peak = |i: usize| -> bool {
        let left_ok = i == 0 || p[i] > p[i - 1];
        let right_ok = i == n - 1 || p[i] > p[i + 1];
        left_ok && right_ok
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        p[b].partial_cmp(&p[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    for &i in &order {
        if chosen.len() == k {
            break;
        }
        if is_peak(i) {
            chosen.push(i);
        }
    }
    if chosen.len() < k {
        for &i in &order {
            if chosen.len() == k {
                break;
            }
            if !chosen.contains(&i) {
                chosen.push(i);
            }
        }
    }
    let mut angles: Vec<f64> = chosen.into_iter().map(|i| spectrum.angles_deg[i]).collect();
    angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(angles)
}

/// Resolution predicate: after sorting, every estimate must lie within half
/// the gap to the previous true DOA (the k = 1 source uses its gap to the
/// next one; a lone source uses a fixed 1 degree threshold).
pub fn check_resolution(true_doas: &[f64], est_doas: &[f64]) -> Result<bool> {
    if true_doas.len() != est_doas.len() {
        return Err(DoaError::Domain(format!(
            "resolution check length mismatch: {} true vs {} estimated",
            true_doas.len(),
            est_doas.len()
        )));
    }
    let mut t = true_doas.to_vec();
    let mut e = est_doas.to_vec();
    t.sort_by(|a, b| a.partial_cmp(b).unwrap());
    e.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = t.len();
    for i in 0..k {
        let gap = if k == 1 {
            2.0 * SINGLE_SOURCE_RESOLUTION_DEG
        } else if i == 0 {
            t[1] - t[0]
        } else {
            t[i] - t[i - 1]
        };
        if (e[i] - t[i]).abs() >= gap / 2.0 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Sorted pairing of estimates to true DOAs; squared errors in degrees^2.
pub fn squared_errors(true_doas: &[f64], est_doas: &[f64]) -> Vec<f64> {
    let mut t = true_doas.to_vec();
    let mut e = est_doas.to_vec();
    t.sort_by(|a, b| a.partial_cmp(b).unwrap());
    e.sort_by(|a, b| a.partial_cmp(b).unwrap());
    t.iter()
        .zip(e.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .collect()
}

/// RMSE = sqrt( (1 / (N_tr K)) sum_trials sum_k (est_k - true_k)^2 ).
pub fn rmse(trials: &[TrialResult]) -> f64 {
    if trials.is_empty() {
        return f64::NAN;
    }
    let k = trials[0].squared_errors.len().max(1);
    let total: f64 = trials
        .iter()
        .map(|t| t.squared_errors.iter().sum::<f64>())
        .sum();
    (total / (trials.len() * k) as f64).sqrt()
}

fn rmse_filtered(trials: &[TrialResult], resolved_only: bool) -> f64 {
    if resolved_only {
        let subset: Vec<TrialResult> = trials.iter().filter(|t| t.resolved).cloned().collect();
        rmse(&subset)
    } else {
        rmse(trials)
    }
}

fn invert_hermitian(r: &CMat) -> Result<CMat> {
    let (vals, vecs) = hermitian_eig(r)?;
    let n = vals.len();
    if vals[n - 1] <= 1e-14 * vals[0].max(f64::MIN_POSITIVE) {
        return Err(DoaError::Singular(
            "Hermitian matrix numerically singular".into(),
        ));
    }
    let mut out = Array2::<C64>::zeros((n, n));
    for a in 0..n {
        for b in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..n {
                acc += vecs[(a, k)] * vecs[(b, k)].conj() / vals[k];
            }
            out[(a, b)] = acc;
        }
    }
    Ok(out)
}

/// Stochastic (unconditional) Cramer-Rao bound for the Gaussian array model,
/// averaged over sources and reported in degrees. This is a standard
/// reference curve, not an algorithm-specific bound.
pub fn crb_reference(scenario: &SourceScenario, geometry: &UlaGeometry) -> Result<f64> {
    scenario.validate()?;
    geometry.validate()?;
    let m = geometry.num_sensors;
    let k = scenario.doas_deg.len();
    if k >= m {
        return Err(DoaError::Domain(format!(
            "CRB needs K < M, got K = {}, M = {}",
            k, m
        )));
    }
    let n = scenario.num_snapshots as f64;
    let sigma_n = scenario.noise_power;
    if !(sigma_n > 0.0) {
        return Err(DoaError::Domain("CRB needs positive noise power".into()));
    }

    let mut a_mat = Array2::<C64>::zeros((m, k));
    let mut d_mat = Array2::<C64>::zeros((m, k));
    for (col, &theta) in scenario.doas_deg.iter().enumerate() {
        a_mat.column_mut(col).assign(&steering_vector(geometry, theta)?);
        d_mat
            .column_mut(col)
            .assign(&steering_derivative(geometry, theta)?);
    }
    let p_mat = source_covariance(scenario);

    // R = A P A^H + sigma_n I.
    let ah = a_mat.t().mapv(|z| z.conj());
    let mut r = a_mat.dot(&p_mat).dot(&ah);
    for i in 0..m {
        r[(i, i)] += Complex64::new(sigma_n, 0.0);
    }
    let r_inv = invert_hermitian(&r)?;

    // Projector onto the orthogonal complement of the steering columns.
    let aha = ah.dot(&a_mat);
    let aha_inv = invert_hermitian(&aha).map_err(|_| {
        DoaError::Singular("coincident DOAs make the Fisher information singular".into())
    })?;
    let proj = a_mat.dot(&aha_inv).dot(&ah);
    let mut perp = Array2::<C64>::eye(m);
    perp -= &proj;

    let dh = d_mat.t().mapv(|z| z.conj());
    let dpd = dh.dot(&perp).dot(&d_mat);
    let papr = p_mat.dot(&ah).dot(&r_inv).dot(&a_mat).dot(&p_mat);

    // Hadamard product with the transpose, real part.
    let mut fisher = Array2::<C64>::zeros((k, k));
    for a in 0..k {
        for b in 0..k {
            let v = dpd[(a, b)] * papr[(b, a)];
            fisher[(a, b)] = Complex64::new(v.re, 0.0);
        }
    }
    // Symmetrize rounding residue before inversion.
    let fisher = {
        let t = fisher.t().to_owned();
        (&fisher + &t).mapv(|z| z * 0.5)
    };
    let crb = invert_hermitian(&fisher).map_err(|_| {
        DoaError::Singular("coincident DOAs make the Fisher information singular".into())
    })?;
    let scale = sigma_n / (2.0 * n);
    let mean_var: f64 = (0..k).map(|i| scale * crb[(i, i)].re).sum::<f64>() / k as f64;
    if !(mean_var >= 0.0) {
        return Err(DoaError::Singular("negative CRB variance".into()));
    }
    Ok(mean_var.sqrt().to_degrees())
}

/// Source covariance used by the CRB reference: diagonal powers plus the
/// real cross term of the AR(1) pair.
pub(crate) fn source_covariance(scenario: &SourceScenario) -> CMat {
    let k = scenario.doas_deg.len();
    let mut p = Array2::<C64>::eye(k) * Complex64::new(scenario.source_power, 0.0);
    if let Some((a, b)) = scenario.correlated_pair {
        let c = scenario.correlation_coeff * scenario.source_power;
        p[(a, b)] = Complex64::new(c, 0.0);
        p[(b, a)] = Complex64::new(c, 0.0);
    }
    p
}

fn run_method(
    spec: &MethodSpec,
    batch: &crate::signal::SnapshotBatch,
    geometry: &UlaGeometry,
    k_true: usize,
) -> Result<(Vec<f64>, u64)> {
    match spec {
        MethodSpec::Alrd(cfg) => {
            let out = alrd_scan(cfg, batch, geometry)?;
            Ok((find_peaks(&out.spectrum, k_true)?, out.op_count))
        }
        MethodSpec::Malrd(cfg) => {
            let out = malrd_scan(cfg, batch, geometry)?;
            Ok((find_peaks(&out.spectrum, k_true)?, out.op_count))
        }
        MethodSpec::Capon(cfg) => {
            let est = baseline_estimate(batch, geometry, cfg, BaselineMethod::Capon)?;
            let ops = baseline_op_count(
                BaselineMethod::Capon,
                geometry.num_sensors,
                cfg.num_sources,
                batch.data.ncols(),
                cfg.grid.angles().len(),
            );
            Ok((est, ops))
        }
        MethodSpec::Music(cfg) => {
            let est = baseline_estimate(batch, geometry, cfg, BaselineMethod::Music)?;
            let ops = baseline_op_count(
                BaselineMethod::Music,
                geometry.num_sensors,
                cfg.num_sources,
                batch.data.ncols(),
                cfg.grid.angles().len(),
            );
            Ok((est, ops))
        }
        MethodSpec::Esprit {
            num_sources,
            use_fba,
        } => {
            let cfg = BaselineConfig {
                num_sources: *num_sources,
                use_fba: *use_fba,
                grid: GridSpec::default_scan(),
            };
            let est = baseline_estimate(batch, geometry, &cfg, BaselineMethod::Esprit)?;
            let ops = baseline_op_count(
                BaselineMethod::Esprit,
                geometry.num_sensors,
                *num_sources,
                batch.data.ncols(),
                0,
            );
            Ok((est, ops))
        }
    }
}

/// Run every method over an SNR sweep with `trials` Monte Carlo repetitions
/// per SNR. All methods within one trial share the same snapshot batch; the
/// per-trial RNG stream depends only on (master seed, SNR index, trial
/// index), so reports are reproducible regardless of thread count.
pub fn run_sweep(
    methods: &[MethodSpec],
    geometry: &UlaGeometry,
    template: &SourceScenario,
    snr_list_db: &[f64],
    trials: usize,
    master_seed: u64,
) -> Result<Vec<SweepReport>> {
    if trials == 0 {
        return Err(DoaError::Domain("need at least one trial".into()));
    }
    if snr_list_db.is_empty() {
        return Err(DoaError::Domain("empty SNR list".into()));
    }
    if methods.is_empty() {
        return Err(DoaError::Domain("no methods selected".into()));
    }
    template.validate()?;
    geometry.validate()?;
    let true_doas = template.doas_deg.clone();
    let k_true = true_doas.len();

    let jobs: Vec<(usize, usize)> = (0..snr_list_db.len())
        .flat_map(|s| (0..trials).map(move |t| (s, t)))
        .collect();

    let per_job: Vec<Vec<std::result::Result<TrialResult, String>>> = jobs
        .par_iter()
        .map(|&(s, t)| {
            let mut scen = template.clone();
            scen.noise_power =
                SourceScenario::noise_power_for_snr(template.source_power, snr_list_db[s]);
            let mut rng = trial_rng(master_seed, s as u64, t as u64);
            let batch = match generate_snapshots(geometry, &scen, &mut rng) {
                Ok(b) => b,
                Err(e) => return vec![Err(e.to_string()); methods.len()],
            };
            methods
                .iter()
                .map(|m| {
                    match run_method(m, &batch, geometry, k_true) {
                        Ok((est, ops)) => {
                            let resolved = check_resolution(&true_doas, &est).unwrap_or(false);
                            let sq = squared_errors(&true_doas, &est);
                            Ok(TrialResult {
                                estimated_doas: est,
                                resolved,
                                squared_errors: sq,
                                op_count: ops,
                            })
                        }
                        Err(e) => Err(e.to_string()),
                    }
                })
                .collect()
        })
        .collect();

    // Scatter back to [method][snr][trial].
    let mut table: Vec<Vec<Vec<TrialResult>>> =
        vec![vec![Vec::with_capacity(trials); snr_list_db.len()]; methods.len()];
    let mut failures: Vec<usize> = vec![0; methods.len()];
    for (job_idx, &(s, _t)) in jobs.iter().enumerate() {
        for (m_idx, outcome) in per_job[job_idx].iter().enumerate() {
            match outcome {
                Ok(tr) => table[m_idx][s].push(tr.clone()),
                Err(_) => {
                    // Failed estimator: counted as unresolved with the
                    // degenerate broadside guess.
                    failures[m_idx] += 1;
                    let est = vec![90.0; k_true];
                    let sq = squared_errors(&true_doas, &est);
                    table[m_idx][s].push(TrialResult {
                        estimated_doas: est,
                        resolved: false,
                        squared_errors: sq,
                        op_count: 0,
                    });
                }
            }
        }
    }
    for (m_idx, m) in methods.iter().enumerate() {
        if failures[m_idx] == snr_list_db.len() * trials {
            return Err(DoaError::Singular(format!(
                "method {} failed on every trial",
                m.label()
            )));
        }
    }

    let mut crb = Vec::with_capacity(snr_list_db.len());
    for &snr in snr_list_db {
        let mut scen = template.clone();
        scen.noise_power = SourceScenario::noise_power_for_snr(template.source_power, snr);
        crb.push(crb_reference(&scen, geometry)?);
    }

    let reports = methods
        .iter()
        .enumerate()
        .map(|(m_idx, m)| {
            let mut resolution_prob = Vec::new();
            let mut rmse_all = Vec::new();
            let mut rmse_resolved = Vec::new();
            let mut mean_ops = Vec::new();
            for s in 0..snr_list_db.len() {
                let cell = &table[m_idx][s];
                let resolved = cell.iter().filter(|t| t.resolved).count();
                resolution_prob.push(resolved as f64 / trials as f64);
                rmse_all.push(rmse_filtered(cell, false));
                rmse_resolved.push(rmse_filtered(cell, true));
                mean_ops
                    .push(cell.iter().map(|t| t.op_count as f64).sum::<f64>() / trials as f64);
            }
            SweepReport {
                method: m.label().to_string(),
                snr_grid_db: snr_list_db.to_vec(),
                resolution_prob,
                rmse_deg: rmse_all,
                rmse_resolved_only_deg: rmse_resolved,
                crb_deg: crb.clone(),
                mean_op_count: mean_ops,
                trials,
                config_echo: format!(
                    "M={} K={} N={} seed={}",
                    geometry.num_sensors, k_true, template.num_snapshots, master_seed
                ),
            }
        })
        .collect();
    Ok(reports)
}

/// Which structural dimension a complexity probe sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeVar {
    BasisLen,
    Rank,
    Snapshots,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeMethod {
    Alrd,
    Malrd,
}

/// Least-squares slope of log(count) against log(value).
pub fn loglog_slope(values: &[f64], counts: &[f64]) -> f64 {
    let n = values.len() as f64;
    let xs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|c| c.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Runs the estimator across a sweep of one structural variable and returns
/// the fitted log-log slope of measured multiply-accumulate counts. Sweeps
/// of I and D fit the basis-update counter (the Table of complexity's
/// dominant DI^2 / I^2 terms come from basis updates); the N sweep fits the
/// total count.
pub fn complexity_probe(
    method: ProbeMethod,
    base: &AlrdConfig,
    num_sensors: usize,
    num_snapshots: usize,
    var: ProbeVar,
    values: &[usize],
) -> Result<f64> {
    if values.len() < 2 {
        return Err(DoaError::Domain("probe needs at least two values".into()));
    }
    let geometry = UlaGeometry::half_wavelength(num_sensors)?;
    let mut counts = Vec::with_capacity(values.len());
    for &v in values {
        let mut cfg = base.clone();
        let mut n = num_snapshots;
        match var {
            ProbeVar::BasisLen => cfg.basis_len = v,
            ProbeVar::Rank => cfg.rank = v,
            ProbeVar::Snapshots => n = v,
        }
        let scen = SourceScenario {
            doas_deg: vec![60.0, 100.0],
            source_power: 1.0,
            noise_power: 0.1,
            correlated_pair: None,
            correlation_coeff: 0.0,
            num_snapshots: n,
            rng_seed: 0,
        };
        let mut rng = trial_rng(1234, 0, v as u64);
        let batch = generate_snapshots(&geometry, &scen, &mut rng)?;
        let out = match method {
            ProbeMethod::Alrd => alrd_scan(&cfg, &batch, &geometry)?,
            ProbeMethod::Malrd => malrd_scan(&cfg, &batch, &geometry)?,
        };
        let count = match var {
            ProbeVar::Snapshots => out.op_count,
            _ => out.basis_ops,
        };
        counts.push(count as f64);
    }
    let values_f: Vec<f64> = values.iter().map(|&v| v as f64).collect();
    Ok(loglog_slope(&values_f, &counts))
}
