//! Oracle tests for the recursive inverse tracking: every tracked inverse is
//! compared against a Gauss-Jordan inversion of the corresponding
//! exponentially weighted accumulate built by direct summation.

mod common;

use common::{gauss_jordan_inverse, random_cvec, rel_frobenius, CMat, CVec};
use ndarray::{Array1, Array2};
use num_complex::Complex64;

use doa_lowrank::alrd::{alrd_init, update_aux, update_basis, AlrdConfig};
use doa_lowrank::linalg::{hankel_embed, rank1_inverse_update, udot};
use doa_lowrank::malrd::{malrd_init, malrd_update_aux, malrd_update_basis};
use doa_lowrank::signal::{steering_vector, trial_rng, UlaGeometry};
use doa_lowrank::spectrum::GridSpec;

const M: usize = 8;
const I_LEN: usize = 3;
const D_LEN: usize = 2;
const N_SNAPSHOTS: usize = 50;
const ALPHA: f64 = 0.95;
const DELTA: f64 = 0.01;

fn oracle_config() -> AlrdConfig {
    AlrdConfig {
        basis_len: I_LEN,
        rank: D_LEN,
        forget: ALPHA,
        init_scale: DELTA,
        grid: GridSpec {
            start_deg: 60.0,
            stop_deg: 60.0,
            step_deg: 0.3,
        },
    }
}

fn forget_all(acc: &mut CMat, alpha: f64) {
    acc.mapv_inplace(|z| z * alpha);
}

fn accumulate_outer(acc: &mut CMat, u: &CVec, weight: f64) {
    let n = u.len();
    for a in 0..n {
        for b in 0..n {
            acc[(a, b)] += u[a] * u[b].conj() * weight;
        }
    }
}

/// Tracked per-segment inverses match direct inversion with the auxiliary
/// vector frozen at its initial value (the aux update is never invoked, so
/// the |omega_d|^2 weights stay constant).
#[test]
fn decomposed_segment_inverses_match_direct_summation_frozen_aux() {
    let config = oracle_config();
    let geometry = UlaGeometry::half_wavelength(M).unwrap();
    let a = steering_vector(&geometry, 60.0).unwrap();
    let ah = hankel_embed(&a, I_LEN).unwrap();
    let mut state = alrd_init(&config, &ah).unwrap();
    let mut rng = trial_rng(41, 0, 0);

    let mut direct: Vec<CMat> = (0..D_LEN)
        .map(|_| Array2::eye(I_LEN) * Complex64::new(DELTA, 0.0))
        .collect();

    for _ in 0..N_SNAPSHOTS {
        let x = random_cvec(M, &mut rng);
        let xh = hankel_embed(&x, I_LEN).unwrap();
        for d in 0..D_LEN {
            let w2 = state.aux[d].norm_sqr();
            let u_d = xh.row(state.mu[d]);
            forget_all(&mut direct[d], ALPHA);
            accumulate_outer(&mut direct[d], &u_d, w2);
            update_basis(&mut state, &config, &xh, d).unwrap();
        }
    }
    for d in 0..D_LEN {
        let oracle = gauss_jordan_inverse(&direct[d]);
        let err = rel_frobenius(&state.inv_rsd[d], &oracle);
        assert!(err < 1e-8, "segment {} inverse off by {}", d, err);
    }
}

/// Tracked shared-basis inverse matches direct inversion under a frozen aux.
#[test]
fn shared_basis_inverse_matches_direct_summation_frozen_aux() {
    let config = oracle_config();
    let geometry = UlaGeometry::half_wavelength(M).unwrap();
    let a = steering_vector(&geometry, 104.0).unwrap();
    let ah = hankel_embed(&a, I_LEN).unwrap();
    let mut state = malrd_init(&config, &ah).unwrap();
    let mut rng = trial_rng(43, 0, 0);

    let mut direct: CMat = Array2::eye(I_LEN) * Complex64::new(DELTA, 0.0);
    for _ in 0..N_SNAPSHOTS {
        let x = random_cvec(M, &mut rng);
        let xh = hankel_embed(&x, I_LEN).unwrap();
        let mut u = Array1::<Complex64>::zeros(I_LEN);
        for d in 0..D_LEN {
            let w = state.aux[d].conj();
            let row = xh.row(state.mu[d]);
            for t in 0..I_LEN {
                u[t] += w * row[t];
            }
        }
        forget_all(&mut direct, ALPHA);
        accumulate_outer(&mut direct, &u, 1.0);
        malrd_update_basis(&mut state, &config, &xh).unwrap();
    }
    let oracle = gauss_jordan_inverse(&direct);
    let err = rel_frobenius(&state.inv_rs, &oracle);
    assert!(err < 1e-8, "shared inverse off by {}", err);
}

/// Tracked reduced-data inverse matches direct inversion in the full
/// alternating loop (basis updates evolve the reduced snapshot, which the
/// direct accumulate recomputes from the post-update basis each step).
#[test]
fn reduced_data_inverse_matches_direct_summation_full_loop() {
    let config = oracle_config();
    let geometry = UlaGeometry::half_wavelength(M).unwrap();
    let a = steering_vector(&geometry, 77.0).unwrap();
    let ah = hankel_embed(&a, I_LEN).unwrap();
    let mut state = alrd_init(&config, &ah).unwrap();
    let mut rng = trial_rng(47, 0, 0);

    let mut direct: CMat = Array2::eye(D_LEN) * Complex64::new(DELTA, 0.0);
    for _ in 0..N_SNAPSHOTS {
        let x = random_cvec(M, &mut rng);
        let xh = hankel_embed(&x, I_LEN).unwrap();
        for d in 0..D_LEN {
            update_basis(&mut state, &config, &xh, d).unwrap();
        }
        let mut r_bar = Array1::<Complex64>::zeros(D_LEN);
        for d in 0..D_LEN {
            let u_d = xh.row(state.mu[d]);
            r_bar[d] = udot(&u_d, &state.basis[d].mapv(|z| z.conj()));
        }
        forget_all(&mut direct, ALPHA);
        accumulate_outer(&mut direct, &r_bar, 1.0);
        update_aux(&mut state, &config, &xh).unwrap();
        let oracle = gauss_jordan_inverse(&direct);
        let err = rel_frobenius(&state.inv_rd, &oracle);
        assert!(err < 1e-8, "reduced inverse off by {}", err);
    }
}

/// Same oracle for the shared-basis variant's reduced-data inverse.
#[test]
fn shared_basis_reduced_inverse_matches_direct_summation() {
    let config = oracle_config();
    let geometry = UlaGeometry::half_wavelength(M).unwrap();
    let a = steering_vector(&geometry, 130.0).unwrap();
    let ah = hankel_embed(&a, I_LEN).unwrap();
    let mut state = malrd_init(&config, &ah).unwrap();
    let mut rng = trial_rng(53, 0, 0);

    let mut direct: CMat = Array2::eye(D_LEN) * Complex64::new(DELTA, 0.0);
    for _ in 0..N_SNAPSHOTS {
        let x = random_cvec(M, &mut rng);
        let xh = hankel_embed(&x, I_LEN).unwrap();
        malrd_update_basis(&mut state, &config, &xh).unwrap();
        let conj_s = state.basis.mapv(|z| z.conj());
        let mut r_bar = Array1::<Complex64>::zeros(D_LEN);
        for d in 0..D_LEN {
            let row = xh.row(state.mu[d]);
            r_bar[d] = udot(&row, &conj_s);
        }
        forget_all(&mut direct, ALPHA);
        accumulate_outer(&mut direct, &r_bar, 1.0);
        malrd_update_aux(&mut state, &config, &xh).unwrap();
    }
    let oracle = gauss_jordan_inverse(&direct);
    let err = rel_frobenius(&state.inv_rd, &oracle);
    assert!(err < 1e-8, "reduced inverse off by {}", err);
}

/// Composing up to 100 generic rank-1 inverse updates stays within 1e-8 of
/// the Gauss-Jordan inverse of the directly accumulated matrix, including
/// non-Hermitian u v^H increments.
#[test]
fn rank1_update_composition_matches_oracle() {
    let n = 5;
    let alpha = 0.9;
    let mut rng = trial_rng(59, 0, 0);
    let mut direct: CMat = Array2::eye(n) * Complex64::new(2.0, 0.0);
    let mut tracked = gauss_jordan_inverse(&direct);
    for step in 0..100 {
        let u = random_cvec(n, &mut rng);
        let v = random_cvec(n, &mut rng);
        forget_all(&mut direct, alpha);
        for a in 0..n {
            for b in 0..n {
                direct[(a, b)] += u[a] * v[b].conj();
            }
        }
        let (_, next) = rank1_inverse_update(&tracked, &u, &v, alpha).unwrap();
        tracked = next;
        let oracle = gauss_jordan_inverse(&direct);
        let err = rel_frobenius(&tracked, &oracle);
        assert!(err < 1e-8, "step {}: drift {}", step, err);
    }
}
