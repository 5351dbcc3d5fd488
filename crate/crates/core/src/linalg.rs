//! Structured linear algebra shared by the estimators: Hankel embedding,
//! sample covariance, forward-backward averaging, Hermitian
//! eigendecomposition (cyclic Jacobi) and the rank-1 inversion-lemma update.

use ndarray::{Array1, Array2, ArrayView2};
use num_complex::Complex64;

use crate::error::{DoaError, Result};
use crate::signal::{CMat, CVec, C64};

/// Floor below which a denominator counts as singular.
pub const SINGULARITY_FLOOR: f64 = 1e-300;

/// M x I zero-padded Hankel matrix built from a length-M vector:
/// entry (m, j) = x[m + j] when m + j <= M - 1, else exactly 0.
#[derive(Debug, Clone)]
pub struct HankelEmbedding {
    pub source_len: usize,
    pub window: usize,
    pub data: CMat,
}

impl HankelEmbedding {
    /// Row mu as an owned vector: the segment [x[mu], ..., x[mu + I - 1]]
    /// zero-padded past the end of the source vector.
    pub fn row(&self, mu: usize) -> CVec {
        self.data.row(mu).to_owned()
    }
}

pub fn hankel_embed(x: &CVec, window: usize) -> Result<HankelEmbedding> {
    let m = x.len();
    if window < 1 || window > m {
        return Err(DoaError::Domain(format!(
            "hankel window {} outside [1, {}]",
            window, m
        )));
    }
    let mut data = Array2::<C64>::zeros((m, window));
    for row in 0..m {
        for col in 0..window {
            if row + col < m {
                data[(row, col)] = x[row + col];
            }
        }
    }
    Ok(HankelEmbedding {
        source_len: m,
        window,
        data,
    })
}

/// Sample covariance and snapshot count.
#[derive(Debug, Clone)]
pub struct CovarianceEstimate {
    pub matrix: CMat,
    pub num_snapshots: usize,
}

/// R_hat = (1/N) sum_i r(i) r(i)^H, symmetrized to be exactly Hermitian.
pub fn sample_covariance(batch: ArrayView2<C64>) -> Result<CovarianceEstimate> {
    let (m, n) = batch.dim();
    if n == 0 {
        return Err(DoaError::Domain("empty snapshot batch".into()));
    }
    let mut r = Array2::<C64>::zeros((m, m));
    for i in 0..n {
        let col = batch.column(i);
        for a in 0..m {
            for b in 0..m {
                r[(a, b)] += col[a] * col[b].conj();
            }
        }
    }
    let scale = 1.0 / n as f64;
    r.mapv_inplace(|z| z * scale);
    hermitize(&mut r);
    Ok(CovarianceEstimate {
        matrix: r,
        num_snapshots: n,
    })
}

/// (R + J conj(R) J) / 2 with J the exchange matrix. Output is Hermitian
/// and persymmetric.
pub fn forward_backward_average(r: &CMat) -> Result<CMat> {
    let (m, n) = r.dim();
    if m != n {
        return Err(DoaError::Domain(format!(
            "forward-backward averaging needs a square matrix, got {}x{}",
            m, n
        )));
    }
    let mut out = Array2::<C64>::zeros((m, m));
    for a in 0..m {
        for b in 0..m {
            out[(a, b)] = 0.5 * (r[(a, b)] + r[(m - 1 - a, m - 1 - b)].conj());
        }
    }
    Ok(out)
}

/// Force exact Hermitian symmetry in place.
pub fn hermitize(r: &mut CMat) {
    let n = r.nrows();
    for a in 0..n {
        r[(a, a)] = Complex64::new(r[(a, a)].re, 0.0);
        for b in (a + 1)..n {
            let avg = 0.5 * (r[(a, b)] + r[(b, a)].conj());
            r[(a, b)] = avg;
            r[(b, a)] = avg.conj();
        }
    }
}

fn frobenius(r: &CMat) -> f64 {
    r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
/// Returns eigenvalues sorted descending and the matching unitary
/// eigenvector matrix (columns).
pub fn hermitian_eig(r: &CMat) -> Result<(Array1<f64>, CMat)> {
    let (m, n) = r.dim();
    if m != n {
        return Err(DoaError::Domain(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            m, n
        )));
    }
    let norm = frobenius(r);
    let mut dev = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            dev += (r[(a, b)] - r[(b, a)].conj()).norm_sqr();
        }
    }
    let dev = dev.sqrt() / 2.0;
    if norm > 0.0 && dev > 1e-10 * norm {
        return Err(DoaError::NotHermitian(dev / norm));
    }

    let mut a = r.clone();
    hermitize(&mut a);
    let mut v = Array2::<C64>::eye(n);
    let tol = 1e-14 * norm.max(f64::MIN_POSITIVE);

    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let h = apq.norm();
                if h <= tol / (n as f64) {
                    continue;
                }
                let phase = apq / h;
                let tau = (a[(q, q)].re - a[(p, p)].re) / (2.0 * h);
                let t = if tau == 0.0 {
                    1.0
                } else {
                    tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Right multiply by the rotation.
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * phase.conj() * akq;
                    a[(k, q)] = s * phase * akp + c * akq;
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * phase.conj() * vkq;
                    v[(k, q)] = s * phase * vkp + c * vkq;
                }
                // Left multiply by its conjugate transpose.
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * phase * aqk;
                    a[(q, k)] = s * phase.conj() * apk + c * aqk;
                }
                a[(p, p)] = Complex64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = Complex64::new(a[(q, q)].re, 0.0);
                a[(p, q)] = Complex64::new(0.0, 0.0);
                a[(q, p)] = Complex64::new(0.0, 0.0);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].re.partial_cmp(&a[(i, i)].re).unwrap());
    let eigenvalues = Array1::from_iter(order.iter().map(|&i| a[(i, i)].re));
    let mut vectors = Array2::<C64>::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        vectors.column_mut(dst).assign(&v.column(src));
    }
    Ok((eigenvalues, vectors))
}

/// Inversion-lemma update for A_next = forget * A + u v^H given A^{-1}.
/// Returns the gain vector and the updated inverse:
/// gain = (A^{-1} u) / (forget + v^H A^{-1} u),
/// A_next^{-1} = forget^{-1} (A^{-1} - gain v^H A^{-1}).
pub fn rank1_inverse_update(
    a_inv: &CMat,
    u: &CVec,
    v: &CVec,
    forget: f64,
) -> Result<(CVec, CMat)> {
    let n = a_inv.nrows();
    if a_inv.ncols() != n || u.len() != n || v.len() != n {
        return Err(DoaError::Domain(format!(
            "rank-1 update dimension mismatch: {}x{} inverse, |u|={}, |v|={}",
            n,
            a_inv.ncols(),
            u.len(),
            v.len()
        )));
    }
    if !(forget > 0.0 && forget <= 1.0) {
        return Err(DoaError::Domain(format!(
            "forgetting factor {} outside (0, 1]",
            forget
        )));
    }
    let au = a_inv.dot(u);
    // Row vector v^H A^{-1}: component j is sum_i conj(v_i) a_ij.
    let vh_a: CVec = Array1::from_iter((0..n).map(|j| {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            acc += v[i].conj() * a_inv[(i, j)];
        }
        acc
    }));
    let mut denom = Complex64::new(forget, 0.0);
    for i in 0..n {
        denom += v[i].conj() * au[i];
    }
    if denom.norm() < SINGULARITY_FLOOR {
        return Err(DoaError::Singular(
            "rank-1 update denominator vanished".into(),
        ));
    }
    let gain: CVec = au.mapv(|z| z / denom);
    let inv_forget = 1.0 / forget;
    let mut next = a_inv.clone();
    for i in 0..n {
        for j in 0..n {
            next[(i, j)] = (next[(i, j)] - gain[i] * vh_a[j]) * inv_forget;
        }
    }
    Ok((gain, next))
}

/// Inner product conj(a) . b.
pub fn cdot(a: &CVec, b: &CVec) -> C64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (x, y) in a.iter().zip(b.iter()) {
        acc += x.conj() * y;
    }
    acc
}

/// Plain (unconjugated) inner product a . b.
pub fn udot(a: &CVec, b: &CVec) -> C64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (x, y) in a.iter().zip(b.iter()) {
        acc += x * y;
    }
    acc
}
