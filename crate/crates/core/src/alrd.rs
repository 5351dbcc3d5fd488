//! ALRD-RLS estimator: per scanning angle, D segment basis vectors and a
//! D-length auxiliary vector are alternately updated by constrained
//! exponentially-weighted RLS; the output power spectrum peaks at the DOAs.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DoaError, Result};
use crate::linalg::{
    cdot, hankel_embed, hermitize, rank1_inverse_update, udot, HankelEmbedding, SINGULARITY_FLOOR,
};
use crate::malrd::selection_rows;
use crate::signal::{steering_vector, CMat, CVec, SnapshotBatch, UlaGeometry, C64};
use crate::spectrum::{GridSpec, ScanOutcome, Spectrum};

/// Weight magnitude below which a segment's data update is skipped for the
/// snapshot (the effective forgetting term would diverge).
pub const WEIGHT_GUARD: f64 = 1e-12;

/// Shared configuration for the ALRD-RLS and MALRD-RLS estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlrdConfig {
    /// Basis vector length I.
    pub basis_len: usize,
    /// Number of segments / reduced dimension D.
    pub rank: usize,
    /// Exponential forgetting factor.
    pub forget: f64,
    /// Inverse-matrix initialization scale delta: inverses start at
    /// delta^{-1} I.
    pub init_scale: f64,
    pub grid: GridSpec,
}

impl AlrdConfig {
    /// Simulation defaults: I = 12, D = 5, forgetting 0.998, 0.3 degree grid.
    pub fn paper_defaults() -> Self {
        AlrdConfig {
            basis_len: 12,
            rank: 5,
            forget: 0.998,
            init_scale: 0.01,
            grid: GridSpec::default_scan(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.basis_len < 1 || self.rank < 1 {
            return Err(DoaError::Domain(format!(
                "basis length {} and rank {} must be at least 1",
                self.basis_len, self.rank
            )));
        }
        if !(self.forget > 0.0 && self.forget <= 1.0) {
            return Err(DoaError::Domain(format!(
                "forgetting factor {} outside (0, 1]",
                self.forget
            )));
        }
        if !(self.init_scale > 0.0) {
            return Err(DoaError::Domain(format!(
                "initialization scale {} must be positive",
                self.init_scale
            )));
        }
        self.grid.validate()
    }
}

/// Per-scanning-angle RLS state for ALRD-RLS.
#[derive(Debug, Clone)]
pub struct AlrdState {
    /// D basis vectors s_d, each of length I.
    pub basis: Vec<CVec>,
    /// Auxiliary vector, length D.
    pub aux: CVec,
    /// Tracked inverses of the per-segment weighted accumulates, I x I each.
    pub inv_rsd: Vec<CMat>,
    /// Cross-term ledger P_{d,j}; entry [d][j] is an I-vector, diagonal unused.
    pub cross_ledger: Vec<Vec<CVec>>,
    /// Tracked inverse of the reduced-data accumulate, D x D.
    pub inv_rd: CMat,
    /// Reduced steering vector, length D.
    pub a_bar: CVec,
    pub snapshots_seen: usize,
    /// Selection rows mu_d into the Hankel embeddings.
    pub mu: Vec<usize>,
    /// Cached selection rows of the scanning steering Hankel matrix.
    pub asegs: Vec<CVec>,
    /// Complex multiply-accumulate counters (basis / aux updates).
    pub basis_ops: u64,
    pub aux_ops: u64,
}

impl AlrdState {
    pub fn op_count(&self) -> u64 {
        self.basis_ops + self.aux_ops
    }
}

/// Initialize the per-angle state from the scanning steering Hankel matrix.
pub fn alrd_init(config: &AlrdConfig, steering_hankel: &HankelEmbedding) -> Result<AlrdState> {
    config.validate()?;
    let i_len = config.basis_len;
    let d_len = config.rank;
    if steering_hankel.window != i_len {
        return Err(DoaError::Domain(format!(
            "steering Hankel window {} does not match basis length {}",
            steering_hankel.window, i_len
        )));
    }
    let m = steering_hankel.source_len;
    let mu = selection_rows(m, d_len)?;

    let mut e1 = Array1::<C64>::zeros(i_len);
    e1[0] = Complex64::new(1.0, 0.0);
    let basis: Vec<CVec> = (0..d_len).map(|_| e1.clone()).collect();
    let aux = Array1::from_elem(d_len, Complex64::new(1.0 / d_len as f64, 0.0));
    let inv_scale = Complex64::new(1.0 / config.init_scale, 0.0);
    let inv_rsd: Vec<CMat> = (0..d_len)
        .map(|_| Array2::<C64>::eye(i_len) * inv_scale)
        .collect();
    let cross_ledger: Vec<Vec<CVec>> = (0..d_len)
        .map(|_| (0..d_len).map(|_| Array1::<C64>::zeros(i_len)).collect())
        .collect();
    let inv_rd = Array2::<C64>::eye(d_len) * inv_scale;
    let asegs: Vec<CVec> = mu.iter().map(|&r| steering_hankel.row(r)).collect();

    let mut state = AlrdState {
        basis,
        aux,
        inv_rsd,
        cross_ledger,
        inv_rd,
        a_bar: Array1::<C64>::zeros(d_len),
        snapshots_seen: 0,
        mu,
        asegs,
        basis_ops: 0,
        aux_ops: 0,
    };
    state.recompute_a_bar();
    Ok(state)
}

impl AlrdState {
    /// a_bar[d] = (row mu_d of the steering Hankel matrix) . conj(s_d).
    pub fn recompute_a_bar(&mut self) {
        for d in 0..self.aux.len() {
            self.a_bar[d] = udot(&self.asegs[d], &self.basis[d].mapv(|z| z.conj()));
        }
    }

    /// Constraint value omega^H a_bar; must stay at 1 after aux updates.
    pub fn constraint_value(&self) -> C64 {
        cdot(&self.aux, &self.a_bar)
    }

    /// Full decomposition constraint sum_d conj(omega_d) (d_d^H A s_d^*).
    pub fn decomposition_constraint(&self) -> C64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for d in 0..self.aux.len() {
            acc += self.aux[d].conj() * udot(&self.asegs[d], &self.basis[d].mapv(|z| z.conj()));
        }
        acc
    }
}

/// One constrained RLS update of basis vector d for the current snapshot.
pub fn update_basis(
    state: &mut AlrdState,
    config: &AlrdConfig,
    snapshot_hankel: &HankelEmbedding,
    d: usize,
) -> Result<()> {
    let i_len = config.basis_len;
    let d_len = config.rank;
    if d >= d_len {
        return Err(DoaError::Domain(format!(
            "basis index {} out of range for rank {}",
            d, d_len
        )));
    }
    let alpha = config.forget;
    let u_d = snapshot_hankel.row(state.mu[d]);
    let w_d = state.aux[d];
    let w_mag = w_d.norm();

    // Tracked inverse of the weighted segment accumulate. The |omega_d|^2
    // weight is folded into the rank-1 direction.
    if w_mag >= WEIGHT_GUARD {
        let scaled = u_d.mapv(|z| z * w_mag);
        let (_, mut next) = rank1_inverse_update(&state.inv_rsd[d], &scaled, &scaled, alpha)?;
        hermitize(&mut next);
        state.inv_rsd[d] = next;
        state.basis_ops += (3 * i_len * i_len + 3 * i_len) as u64;
    } else {
        let inv_alpha = 1.0 / alpha;
        state.inv_rsd[d].mapv_inplace(|z| z * inv_alpha);
    }

    // Cross-term ledger, one accumulation per ordered pair (d, j) using the
    // freshest s_j.
    for j in 0..d_len {
        if j == d {
            continue;
        }
        let u_j = snapshot_hankel.row(state.mu[j]);
        let proj = cdot(&u_j, &state.basis[j]);
        let coeff = w_d.conj() * state.aux[j] * proj;
        let ledger = &mut state.cross_ledger[d][j];
        for t in 0..i_len {
            ledger[t] = alpha * ledger[t] + coeff * u_d[t];
        }
        state.basis_ops += (4 * i_len) as u64;
    }

    // Lagrange multiplier and the new basis vector.
    let mut p_sum = Array1::<C64>::zeros(i_len);
    for j in 0..d_len {
        if j != d {
            p_sum += &state.cross_ledger[d][j];
        }
    }
    let rinv = &state.inv_rsd[d];
    let rinv_psum = rinv.dot(&p_sum);
    let aseg = &state.asegs[d];
    let rinv_a = rinv.dot(aseg);
    // a_seg^H R^{-1} a_seg (conjugated segment, the embedding rows are
    // unconjugated steering samples).
    let a_rinv_a = {
        let mut acc = Complex64::new(0.0, 0.0);
        for t in 0..i_len {
            acc += aseg[t].conj() * rinv_a[t];
        }
        acc
    };
    let denom = w_mag * w_mag * a_rinv_a;
    if denom.norm() < SINGULARITY_FLOOR {
        return Err(DoaError::Singular(
            "vanishing look-direction denominator in basis update".into(),
        ));
    }
    // Constraint mass carried by the other segments, paired d_j with s_j.
    let mut c_rest = Complex64::new(0.0, 0.0);
    for j in 0..d_len {
        if j == d {
            continue;
        }
        let proj = udot(&state.asegs[j], &state.basis[j].mapv(|z| z.conj()));
        c_rest += state.aux[j].conj() * proj;
    }
    let mut pi_rinv_psum = Complex64::new(0.0, 0.0);
    for t in 0..i_len {
        pi_rinv_psum += aseg[t].conj() * rinv_psum[t];
    }
    let pi_rinv_psum = w_d * pi_rinv_psum;
    let lambda = (c_rest.conj() - 1.0 - pi_rinv_psum) / denom;

    let scale = lambda * w_d.conj();
    for t in 0..i_len {
        state.basis[d][t] = -rinv_psum[t] - scale * rinv_a[t];
    }
    state.basis_ops +=
        (2 * i_len * i_len + (d_len - 1) * 4 * i_len + 5 * i_len) as u64;
    Ok(())
}

/// Auxiliary-vector RLS update shared by ALRD and MALRD: advances the tracked
/// reduced-data inverse with the reduced snapshot and renormalizes omega
/// against the reduced steering vector.
pub(crate) fn constrained_aux_update(
    inv_rd: &mut CMat,
    r_bar: &CVec,
    a_bar: &CVec,
    alpha: f64,
) -> Result<CVec> {
    let (_, mut next) = rank1_inverse_update(inv_rd, r_bar, r_bar, alpha)?;
    hermitize(&mut next);
    *inv_rd = next;
    let q = inv_rd.dot(a_bar);
    let norm = cdot(a_bar, &q);
    if norm.norm() < SINGULARITY_FLOOR {
        return Err(DoaError::Singular(
            "reduced steering vector annihilated by tracked inverse".into(),
        ));
    }
    Ok(q.mapv(|z| z / norm))
}

/// One auxiliary-vector update for the current snapshot.
pub fn update_aux(
    state: &mut AlrdState,
    config: &AlrdConfig,
    snapshot_hankel: &HankelEmbedding,
) -> Result<()> {
    let d_len = config.rank;
    let i_len = config.basis_len;
    let mut r_bar = Array1::<C64>::zeros(d_len);
    for d in 0..d_len {
        let u_d = snapshot_hankel.row(state.mu[d]);
        r_bar[d] = udot(&u_d, &state.basis[d].mapv(|z| z.conj()));
    }
    state.recompute_a_bar();
    state.aux = constrained_aux_update(&mut state.inv_rd, &r_bar, &state.a_bar, config.forget)?;
    state.snapshots_seen += 1;
    state.aux_ops += (4 * d_len * d_len + 2 * d_len * i_len + 4 * d_len) as u64;
    Ok(())
}

/// Output power 1 / (a_bar^H R_D^{-1} a_bar) at the current state.
pub fn alrd_power(state: &AlrdState) -> Result<f64> {
    if state.snapshots_seen == 0 {
        return Err(DoaError::Domain(
            "power requested before any snapshot was processed".into(),
        ));
    }
    power_from(&state.inv_rd, &state.a_bar)
}

pub(crate) fn power_from(inv_rd: &CMat, a_bar: &CVec) -> Result<f64> {
    let q = inv_rd.dot(a_bar);
    let s = cdot(a_bar, &q);
    if !s.re.is_finite() || s.norm() < SINGULARITY_FLOOR {
        return Err(DoaError::Singular("degenerate output power".into()));
    }
    Ok((1.0 / s).re)
}

/// Per-snapshot Hankel embeddings shared across all scanning angles.
pub(crate) fn snapshot_hankels(batch: &SnapshotBatch, window: usize) -> Result<Vec<HankelEmbedding>> {
    let n = batch.data.ncols();
    if n == 0 {
        return Err(DoaError::Domain("empty snapshot batch".into()));
    }
    (0..n)
        .map(|i| hankel_embed(&batch.data.column(i).to_owned(), window))
        .collect()
}

/// Full grid scan: for each angle, run the alternating basis/aux recursions
/// over all snapshots and record the final output power. Per-angle
/// singularities yield power 0 plus a diagnostic instead of aborting.
pub fn alrd_scan(
    config: &AlrdConfig,
    batch: &SnapshotBatch,
    geometry: &UlaGeometry,
) -> Result<ScanOutcome> {
    config.validate()?;
    geometry.validate()?;
    let angles = config.grid.angles();
    if angles.is_empty() {
        return Err(DoaError::Domain("empty scanning grid".into()));
    }
    let hankels = snapshot_hankels(batch, config.basis_len)?;

    let per_angle: Vec<(f64, Option<String>, u64, u64)> = angles
        .par_iter()
        .map(|&theta| scan_one_angle(config, geometry, &hankels, theta))
        .collect();

    assemble_outcome(&angles, per_angle)
}

fn scan_one_angle(
    config: &AlrdConfig,
    geometry: &UlaGeometry,
    hankels: &[HankelEmbedding],
    theta: f64,
) -> (f64, Option<String>, u64, u64) {
    let run = || -> Result<(f64, u64, u64)> {
        let a = steering_vector(geometry, theta)?;
        let a_hankel = hankel_embed(&a, config.basis_len)?;
        let mut state = alrd_init(config, &a_hankel)?;
        for h in hankels {
            for d in 0..config.rank {
                update_basis(&mut state, config, h, d)?;
            }
            update_aux(&mut state, config, h)?;
        }
        let p = alrd_power(&state)?;
        Ok((p.max(0.0), state.basis_ops, state.aux_ops))
    };
    match run() {
        Ok((p, b, x)) => (p, None, b, x),
        Err(e) => (0.0, Some(e.to_string()), 0, 0),
    }
}

pub(crate) fn assemble_outcome(
    angles: &[f64],
    per_angle: Vec<(f64, Option<String>, u64, u64)>,
) -> Result<ScanOutcome> {
    let mut power = Vec::with_capacity(angles.len());
    let mut diagnostics = Vec::new();
    let mut basis_ops = 0u64;
    let mut aux_ops = 0u64;
    for (angle, (p, diag, b, x)) in angles.iter().zip(per_angle.into_iter()) {
        power.push(p);
        if let Some(tag) = diag {
            diagnostics.push((*angle, tag));
        }
        basis_ops += b;
        aux_ops += x;
    }
    Ok(ScanOutcome {
        spectrum: Spectrum {
            angles_deg: angles.to_vec(),
            power,
            diagnostics,
        },
        op_count: basis_ops + aux_ops,
        basis_ops,
        aux_ops,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn small_config() -> AlrdConfig {
        AlrdConfig {
            basis_len: 3,
            rank: 2,
            forget: 0.998,
            init_scale: 0.01,
            grid: GridSpec {
                start_deg: 60.0,
                stop_deg: 60.0,
                step_deg: 0.3,
            },
        }
    }

    fn steering_hankel(m: usize, theta: f64, window: usize) -> HankelEmbedding {
        let g = UlaGeometry::half_wavelength(m).unwrap();
        let a = steering_vector(&g, theta).unwrap();
        hankel_embed(&a, window).unwrap()
    }

    #[test]
    fn init_values_match_definitions() {
        let cfg = small_config();
        let ah = steering_hankel(8, 72.0, 3);
        let st = alrd_init(&cfg, &ah).unwrap();
        for d in 0..2 {
            for t in 0..3 {
                let expect = if t == 0 { 1.0 } else { 0.0 };
                assert_eq!(st.basis[d][t].re, expect);
            }
            for a in 0..3 {
                for b in 0..3 {
                    let expect = if a == b { 100.0 } else { 0.0 };
                    assert_abs_diff_eq!(st.inv_rsd[d][(a, b)].re, expect, epsilon = 1e-12);
                }
            }
        }
        assert_abs_diff_eq!(st.aux[0].re, 0.5, epsilon = 0.0);
        assert_abs_diff_eq!(st.aux[1].re, 0.5, epsilon = 0.0);
        // With s_d = e_1 the reduced steering vector picks entry (mu_d, 0)
        // of the steering Hankel matrix.
        for d in 0..2 {
            let expect = ah.data[(st.mu[d], 0)];
            assert_abs_diff_eq!((st.a_bar[d] - expect).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_snapshot_with_unit_forgetting_is_inert() {
        let mut cfg = small_config();
        cfg.forget = 1.0;
        let ah = steering_hankel(8, 72.0, 3);
        let mut st = alrd_init(&cfg, &ah).unwrap();
        let zero = hankel_embed(&Array1::<C64>::zeros(8), 3).unwrap();
        let before = st.inv_rsd[0].clone();
        let ledger_before = st.cross_ledger[0][1].clone();
        update_basis(&mut st, &cfg, &zero, 0).unwrap();
        for (a, b) in st.inv_rsd[0].iter().zip(before.iter()) {
            assert_abs_diff_eq!((a - b).norm(), 0.0, epsilon = 1e-12);
        }
        for (a, b) in st.cross_ledger[0][1].iter().zip(ledger_before.iter()) {
            assert_abs_diff_eq!((a - b).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn single_basis_update_enforces_constraint() {
        let mut cfg = small_config();
        cfg.rank = 1;
        let ah = steering_hankel(8, 72.0, 3);
        let mut st = alrd_init(&cfg, &ah).unwrap();
        let mut rng = crate::signal::trial_rng(2, 0, 0);
        use rand::Rng;
        let snap: CVec = (0..8)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let h = hankel_embed(&snap, 3).unwrap();
        update_basis(&mut st, &cfg, &h, 0).unwrap();
        let c = st.decomposition_constraint();
        assert_abs_diff_eq!((c - Complex64::new(1.0, 0.0)).norm(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn constraint_holds_after_full_snapshot_pass() {
        let cfg = small_config();
        let ah = steering_hankel(8, 72.0, 3);
        let mut st = alrd_init(&cfg, &ah).unwrap();
        let mut rng = crate::signal::trial_rng(3, 0, 0);
        use rand::Rng;
        for _ in 0..5 {
            let snap: CVec = (0..8)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let h = hankel_embed(&snap, 3).unwrap();
            for d in 0..cfg.rank {
                update_basis(&mut st, &cfg, &h, d).unwrap();
            }
            let c = st.decomposition_constraint();
            assert!(
                (c - Complex64::new(1.0, 0.0)).norm() < 1e-6,
                "decomposition constraint {} after basis pass",
                c
            );
            update_aux(&mut st, &cfg, &h).unwrap();
            let c2 = st.constraint_value();
            assert!(
                (c2 - Complex64::new(1.0, 0.0)).norm() < 1e-10,
                "aux constraint {}",
                c2
            );
        }
    }

    #[test]
    fn aux_update_identity_closed_forms() {
        // inv_RD = I, a_bar = e_1 -> omega = e_1.
        let mut inv = Array2::<C64>::eye(2);
        let mut a_bar = Array1::<C64>::zeros(2);
        a_bar[0] = Complex64::new(1.0, 0.0);
        let r_bar = Array1::<C64>::zeros(2);
        let aux = constrained_aux_update(&mut inv, &r_bar, &a_bar, 1.0).unwrap();
        assert_abs_diff_eq!(aux[0].re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(aux[1].norm(), 0.0, epsilon = 1e-12);

        // inv_RD = diag(4, 1), a_bar = [1, 1] -> omega = [4/5, 1/5].
        let mut inv = Array2::<C64>::zeros((2, 2));
        inv[(0, 0)] = Complex64::new(4.0, 0.0);
        inv[(1, 1)] = Complex64::new(1.0, 0.0);
        let a_bar = Array1::from_elem(2, Complex64::new(1.0, 0.0));
        let aux = constrained_aux_update(&mut inv, &r_bar, &a_bar, 1.0).unwrap();
        assert_abs_diff_eq!(aux[0].re, 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(aux[1].re, 0.2, epsilon = 1e-12);
    }

    #[test]
    fn power_closed_forms() {
        let inv = Array2::<C64>::eye(2);
        let mut a_bar = Array1::<C64>::zeros(2);
        a_bar[0] = Complex64::new(1.0, 0.0);
        assert_abs_diff_eq!(power_from(&inv, &a_bar).unwrap(), 1.0, epsilon = 1e-12);

        let inv2 = Array2::<C64>::eye(2) * Complex64::new(2.0, 0.0);
        let ones = Array1::from_elem(2, Complex64::new(1.0, 0.0));
        assert_abs_diff_eq!(power_from(&inv2, &ones).unwrap(), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn scan_single_angle_grid() {
        let cfg = small_config();
        let g = UlaGeometry::half_wavelength(8).unwrap();
        let sc = crate::signal::SourceScenario {
            doas_deg: vec![60.0],
            source_power: 1.0,
            noise_power: 0.01,
            correlated_pair: None,
            correlation_coeff: 0.0,
            num_snapshots: 6,
            rng_seed: 0,
        };
        let batch =
            crate::signal::generate_snapshots(&g, &sc, &mut crate::signal::trial_rng(1, 0, 0))
                .unwrap();
        let out = alrd_scan(&cfg, &batch, &g).unwrap();
        assert_eq!(out.spectrum.angles_deg.len(), 1);
        assert_eq!(out.spectrum.power.len(), 1);
        assert!(out.op_count > 0);
    }
}
