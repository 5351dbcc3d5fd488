//! Behavioral oracles driven by the snapshot simulator: peak placement on
//! easy scenarios, rank-one agreement between the two recursive estimators,
//! forward-backward averaging on correlated sources, and a finite-difference
//! Fisher-information oracle for the reference bound.

mod common;

use common::gauss_jordan_inverse;
use ndarray::Array2;
use num_complex::Complex64;

use doa_lowrank::alrd::{alrd_scan, AlrdConfig};
use doa_lowrank::baselines::{baseline_estimate, BaselineConfig, BaselineMethod};
use doa_lowrank::eval::{crb_reference, find_peaks};
use doa_lowrank::malrd::malrd_scan;
use doa_lowrank::signal::{
    generate_snapshots, steering_vector, trial_rng, SourceScenario, UlaGeometry,
};
use doa_lowrank::spectrum::GridSpec;

fn clean_scenario(doas: Vec<f64>, snr_db: f64, n: usize) -> SourceScenario {
    SourceScenario {
        doas_deg: doas,
        source_power: 1.0,
        noise_power: SourceScenario::noise_power_for_snr(1.0, snr_db),
        correlated_pair: None,
        correlation_coeff: 0.0,
        num_snapshots: n,
        rng_seed: 0,
    }
}

fn small_recursive_config(grid: GridSpec) -> AlrdConfig {
    AlrdConfig {
        basis_len: 8,
        rank: 3,
        forget: 0.998,
        init_scale: 0.01,
        grid,
    }
}

#[test]
fn decomposed_estimator_peaks_at_single_source() {
    let geometry = UlaGeometry::half_wavelength(30).unwrap();
    let scen = clean_scenario(vec![60.0], 20.0, 50);
    let grid = GridSpec {
        start_deg: 40.0,
        stop_deg: 80.0,
        step_deg: 0.3,
    };
    let config = small_recursive_config(grid);
    let mut rng = trial_rng(61, 0, 0);
    let batch = generate_snapshots(&geometry, &scen, &mut rng).unwrap();
    let out = alrd_scan(&config, &batch, &geometry).unwrap();
    let peaks = find_peaks(&out.spectrum, 1).unwrap();
    assert!(
        (peaks[0] - 60.0).abs() <= 0.45,
        "peak at {} deg, expected near 60",
        peaks[0]
    );
}

#[test]
fn shared_basis_estimator_peaks_at_single_source() {
    let geometry = UlaGeometry::half_wavelength(30).unwrap();
    let scen = clean_scenario(vec![60.0], 20.0, 50);
    let grid = GridSpec {
        start_deg: 40.0,
        stop_deg: 80.0,
        step_deg: 0.3,
    };
    let config = small_recursive_config(grid);
    let mut rng = trial_rng(67, 0, 0);
    let batch = generate_snapshots(&geometry, &scen, &mut rng).unwrap();
    let out = malrd_scan(&config, &batch, &geometry).unwrap();
    let peaks = find_peaks(&out.spectrum, 1).unwrap();
    assert!(
        (peaks[0] - 60.0).abs() <= 0.45,
        "peak at {} deg, expected near 60",
        peaks[0]
    );
}

#[test]
fn on_source_power_dominates_off_source() {
    let geometry = UlaGeometry::half_wavelength(30).unwrap();
    let scen = clean_scenario(vec![60.0], 20.0, 50);
    let grid = GridSpec {
        start_deg: 60.0,
        stop_deg: 120.0,
        step_deg: 60.0,
    };
    let config = small_recursive_config(grid);
    let mut rng = trial_rng(71, 0, 0);
    let batch = generate_snapshots(&geometry, &scen, &mut rng).unwrap();
    let out = malrd_scan(&config, &batch, &geometry).unwrap();
    let on = out.spectrum.power[0];
    let off = out.spectrum.power[1];
    assert!(
        on > 10.0 * off,
        "on-source power {} not dominating off-source {}",
        on,
        off
    );
}

/// At rank one the decomposed and shared-basis recursions perform the exact
/// same arithmetic, so their spectra must agree to fp-roundoff levels.
#[test]
fn rank_one_spectra_agree() {
    let geometry = UlaGeometry::half_wavelength(16).unwrap();
    let scen = clean_scenario(vec![55.0, 120.0], 10.0, 10);
    let grid = GridSpec {
        start_deg: 30.0,
        stop_deg: 150.0,
        step_deg: 2.0,
    };
    let config = AlrdConfig {
        basis_len: 4,
        rank: 1,
        forget: 0.998,
        init_scale: 0.01,
        grid,
    };
    assert_eq!(config.grid.angles().len(), 61);
    let mut rng = trial_rng(73, 0, 0);
    let batch = generate_snapshots(&geometry, &scen, &mut rng).unwrap();
    let full = alrd_scan(&config, &batch, &geometry).unwrap();
    let shared = malrd_scan(&config, &batch, &geometry).unwrap();
    for (p, q) in full.spectrum.power.iter().zip(shared.spectrum.power.iter()) {
        let scale = p.abs().max(q.abs()).max(1e-300);
        assert!(
            (p - q).abs() / scale < 1e-9,
            "rank-one spectra disagree: {} vs {}",
            p,
            q
        );
    }
}

/// Strongly correlated sources defeat the plain subspace estimator;
/// forward-backward averaging restores it.
#[test]
fn forward_backward_averaging_recovers_correlated_sources() {
    let geometry = UlaGeometry::half_wavelength(20).unwrap();
    let scen = SourceScenario {
        doas_deg: vec![70.0, 100.0],
        source_power: 1.0,
        noise_power: SourceScenario::noise_power_for_snr(1.0, 15.0),
        correlated_pair: Some((0, 1)),
        correlation_coeff: 0.99,
        num_snapshots: 50,
        rng_seed: 0,
    };
    let grid = GridSpec {
        start_deg: 40.0,
        stop_deg: 140.0,
        step_deg: 0.3,
    };
    let with_fba = BaselineConfig {
        num_sources: 2,
        use_fba: true,
        grid: grid.clone(),
    };
    let without_fba = BaselineConfig {
        num_sources: 2,
        use_fba: false,
        grid,
    };
    let mut worst_with = 0.0f64;
    let mut worst_without = 0.0f64;
    for trial in 0..20 {
        let mut rng = trial_rng(79, 0, trial);
        let batch = generate_snapshots(&geometry, &scen, &mut rng).unwrap();
        let est_fba =
            baseline_estimate(&batch, &geometry, &with_fba, BaselineMethod::Music).unwrap();
        let est_raw =
            baseline_estimate(&batch, &geometry, &without_fba, BaselineMethod::Music).unwrap();
        let err = |est: &[f64]| -> f64 {
            est.iter()
                .zip(scen.doas_deg.iter())
                .map(|(e, t)| (e - t).abs())
                .fold(0.0, f64::max)
        };
        worst_with = worst_with.max(err(&est_fba));
        worst_without = worst_without.max(err(&est_raw));
    }
    assert!(
        worst_with < 2.0,
        "averaged estimates drift up to {} deg",
        worst_with
    );
    assert!(
        worst_with < worst_without,
        "averaging did not help: {} vs {}",
        worst_with,
        worst_without
    );
}

/// Finite-difference Fisher-information oracle for the reference bound: the
/// full information matrix over (DOAs, source covariance parameters, noise
/// power) is built from numerical derivatives of the array covariance, its
/// inverse's DOA block must match the closed form within 1%.
#[test]
fn reference_bound_matches_finite_difference_fisher() {
    let m = 8;
    let geometry = UlaGeometry::half_wavelength(m).unwrap();
    let scen = SourceScenario {
        doas_deg: vec![65.0, 95.0],
        source_power: 1.0,
        noise_power: 0.2,
        correlated_pair: Some((0, 1)),
        correlation_coeff: 0.4,
        num_snapshots: 30,
        rng_seed: 0,
    };
    let closed_form = crb_reference(&scen, &geometry).unwrap();

    // Parameter vector: theta_1, theta_2 (radians), p11, p22, Re p12,
    // Im p12, sigma_n^2.
    let build_r = |params: &[f64]| -> Array2<Complex64> {
        let thetas = [params[0].to_degrees(), params[1].to_degrees()];
        let mut p = Array2::<Complex64>::zeros((2, 2));
        p[(0, 0)] = Complex64::new(params[2], 0.0);
        p[(1, 1)] = Complex64::new(params[3], 0.0);
        p[(0, 1)] = Complex64::new(params[4], params[5]);
        p[(1, 0)] = p[(0, 1)].conj();
        let mut a = Array2::<Complex64>::zeros((m, 2));
        for (col, theta) in thetas.iter().enumerate() {
            a.column_mut(col)
                .assign(&steering_vector(&geometry, *theta).unwrap());
        }
        let ah = a.t().mapv(|z: Complex64| z.conj());
        let mut r = a.dot(&p).dot(&ah);
        for i in 0..m {
            r[(i, i)] += Complex64::new(params[6], 0.0);
        }
        r
    };

    let rho_cross = scen.correlation_coeff * scen.source_power;
    let base = [
        scen.doas_deg[0].to_radians(),
        scen.doas_deg[1].to_radians(),
        scen.source_power,
        scen.source_power,
        rho_cross,
        0.0,
        scen.noise_power,
    ];
    let np = base.len();
    let h = 1e-6;
    let mut derivs: Vec<Array2<Complex64>> = Vec::with_capacity(np);
    for i in 0..np {
        let mut plus = base;
        let mut minus = base;
        plus[i] += h;
        minus[i] -= h;
        let d = (&build_r(&plus) - &build_r(&minus)).mapv(|z| z / Complex64::new(2.0 * h, 0.0));
        derivs.push(d);
    }
    let r_inv = gauss_jordan_inverse(&build_r(&base));
    let n = scen.num_snapshots as f64;
    let mut fim = Array2::<f64>::zeros((np, np));
    for i in 0..np {
        for j in 0..np {
            // tr(R^{-1} dR_i R^{-1} dR_j), real by construction.
            let prod = r_inv.dot(&derivs[i]).dot(&r_inv).dot(&derivs[j]);
            let mut tr = 0.0;
            for t in 0..m {
                tr += prod[(t, t)].re;
            }
            fim[(i, j)] = n * tr;
        }
    }
    // Invert via the complex oracle (real symmetric matrix).
    let fim_c = fim.mapv(|v| Complex64::new(v, 0.0));
    let crb_full = gauss_jordan_inverse(&fim_c);
    let var_mean = (crb_full[(0, 0)].re + crb_full[(1, 1)].re) / 2.0;
    let numeric = var_mean.sqrt().to_degrees();
    let rel = (numeric - closed_form).abs() / closed_form;
    assert!(
        rel < 0.01,
        "finite-difference bound {} vs closed form {} (rel {})",
        numeric,
        closed_form,
        rel
    );
}
