//! MALRD-RLS estimator: a single shared basis vector combined with the D-row
//! selection operator Q, plus the same auxiliary-vector RLS as ALRD-RLS.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::alrd::{assemble_outcome, constrained_aux_update, snapshot_hankels, AlrdConfig};
use crate::error::{DoaError, Result};
use crate::linalg::{cdot, hankel_embed, hermitize, rank1_inverse_update, udot, HankelEmbedding,
    SINGULARITY_FLOOR};
use crate::signal::{steering_vector, CMat, CVec, SnapshotBatch, UlaGeometry, C64};
use crate::spectrum::ScanOutcome;

/// Selection pattern mu_d = (d - 1) * floor(M / D) as 0-based row indices;
/// applying Q to a matrix gathers these rows.
pub fn selection_rows(num_sensors: usize, rank: usize) -> Result<Vec<usize>> {
    if num_sensors < 2 || rank < 1 {
        return Err(DoaError::Domain(format!(
            "invalid selection operator for M = {}, D = {}",
            num_sensors, rank
        )));
    }
    let stride = num_sensors / rank;
    let last = (rank - 1) * stride;
    if last > num_sensors - 1 {
        return Err(DoaError::Domain(format!(
            "selection row {} out of range for M = {}",
            last, num_sensors
        )));
    }
    Ok((0..rank).map(|d| d * stride).collect())
}

/// Per-scanning-angle RLS state for MALRD-RLS.
#[derive(Debug, Clone)]
pub struct MalrdState {
    /// Shared basis vector, length I.
    pub basis: CVec,
    /// Auxiliary vector, length D.
    pub aux: CVec,
    /// Tracked inverse of the basis accumulate, I x I.
    pub inv_rs: CMat,
    /// Tracked inverse of the reduced-data accumulate, D x D.
    pub inv_rd: CMat,
    /// Reduced steering vector Q A s^*, length D.
    pub a_bar: CVec,
    pub snapshots_seen: usize,
    pub mu: Vec<usize>,
    pub asegs: Vec<CVec>,
    pub basis_ops: u64,
    pub aux_ops: u64,
}

impl MalrdState {
    pub fn op_count(&self) -> u64 {
        self.basis_ops + self.aux_ops
    }

    pub fn recompute_a_bar(&mut self) {
        let conj_s = self.basis.mapv(|z| z.conj());
        for d in 0..self.aux.len() {
            self.a_bar[d] = udot(&self.asegs[d], &conj_s);
        }
    }

    pub fn constraint_value(&self) -> C64 {
        cdot(&self.aux, &self.a_bar)
    }

    /// Basis constraint omega^H Q A s^* recomputed from scratch.
    pub fn basis_constraint(&self) -> C64 {
        let conj_s = self.basis.mapv(|z| z.conj());
        let mut acc = Complex64::new(0.0, 0.0);
        for d in 0..self.aux.len() {
            acc += self.aux[d].conj() * udot(&self.asegs[d], &conj_s);
        }
        acc
    }
}

pub fn malrd_init(config: &AlrdConfig, steering_hankel: &HankelEmbedding) -> Result<MalrdState> {
    config.validate()?;
    let i_len = config.basis_len;
    let d_len = config.rank;
    if steering_hankel.window != i_len {
        return Err(DoaError::Domain(format!(
            "steering Hankel window {} does not match basis length {}",
            steering_hankel.window, i_len
        )));
    }
    let mu = selection_rows(steering_hankel.source_len, d_len)?;
    let mut basis = Array1::<C64>::zeros(i_len);
    basis[0] = Complex64::new(1.0, 0.0);
    let inv_scale = Complex64::new(1.0 / config.init_scale, 0.0);
    let asegs: Vec<CVec> = mu.iter().map(|&r| steering_hankel.row(r)).collect();
    let mut state = MalrdState {
        basis,
        aux: Array1::from_elem(d_len, Complex64::new(1.0 / d_len as f64, 0.0)),
        inv_rs: Array2::<C64>::eye(i_len) * inv_scale,
        inv_rd: Array2::<C64>::eye(d_len) * inv_scale,
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

/// One shared-basis RLS update for the current snapshot.
pub fn malrd_update_basis(
    state: &mut MalrdState,
    config: &AlrdConfig,
    snapshot_hankel: &HankelEmbedding,
) -> Result<()> {
    let i_len = config.basis_len;
    let d_len = config.rank;
    let alpha = config.forget;

    // u = R^T Q^T omega^*: the omega-weighted stack of snapshot segments.
    let mut u = Array1::<C64>::zeros(i_len);
    for d in 0..d_len {
        let w = state.aux[d].conj();
        let row = snapshot_hankel.row(state.mu[d]);
        for t in 0..i_len {
            u[t] += w * row[t];
        }
    }
    let (_, mut next) = rank1_inverse_update(&state.inv_rs, &u, &u, alpha)?;
    hermitize(&mut next);
    state.inv_rs = next;

    // b = A^T Q^T omega^*; s = R_s^{-1} b / (b^H R_s^{-1} b).
    let mut b = Array1::<C64>::zeros(i_len);
    for d in 0..d_len {
        let w = state.aux[d].conj();
        for t in 0..i_len {
            b[t] += w * state.asegs[d][t];
        }
    }
    let w_vec = state.inv_rs.dot(&b);
    let denom = cdot(&b, &w_vec);
    if denom.norm() < SINGULARITY_FLOOR {
        return Err(DoaError::Singular(
            "vanishing normalization in shared-basis update".into(),
        ));
    }
    state.basis = w_vec.mapv(|z| z / denom);
    state.basis_ops += (4 * i_len * i_len + 2 * d_len * i_len + 4 * i_len) as u64;
    Ok(())
}

/// One auxiliary-vector update (redefines a_bar from the current basis first).
pub fn malrd_update_aux(
    state: &mut MalrdState,
    config: &AlrdConfig,
    snapshot_hankel: &HankelEmbedding,
) -> Result<()> {
    let d_len = config.rank;
    let i_len = config.basis_len;
    let conj_s = state.basis.mapv(|z| z.conj());
    let mut r_bar = Array1::<C64>::zeros(d_len);
    for d in 0..d_len {
        let row = snapshot_hankel.row(state.mu[d]);
        r_bar[d] = udot(&row, &conj_s);
    }
    state.recompute_a_bar();
    state.aux = constrained_aux_update(&mut state.inv_rd, &r_bar, &state.a_bar, config.forget)?;
    state.snapshots_seen += 1;
    state.aux_ops += (4 * d_len * d_len + 2 * d_len * i_len + 4 * d_len) as u64;
    Ok(())
}

pub fn malrd_power(state: &MalrdState) -> Result<f64> {
    if state.snapshots_seen == 0 {
        return Err(DoaError::Domain(
            "power requested before any snapshot was processed".into(),
        ));
    }
    crate::alrd::power_from(&state.inv_rd, &state.a_bar)
}

/// Full grid scan with the shared-basis recursions.
pub fn malrd_scan(
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
        .map(|&theta| {
            let run = || -> Result<(f64, u64, u64)> {
                let a = steering_vector(geometry, theta)?;
                let a_hankel = hankel_embed(&a, config.basis_len)?;
                let mut state = malrd_init(config, &a_hankel)?;
                for h in &hankels {
                    malrd_update_basis(&mut state, config, h)?;
                    malrd_update_aux(&mut state, config, h)?;
                }
                let p = malrd_power(&state)?;
                Ok((p.max(0.0), state.basis_ops, state.aux_ops))
            };
            match run() {
                Ok((p, b, x)) => (p, None, b, x),
                Err(e) => (0.0, Some(e.to_string()), 0, 0),
            }
        })
        .collect();

    assemble_outcome(&angles, per_angle)
}
