#![allow(dead_code)] // each test binary uses a different helper subset

//! Shared helpers for integration tests: a dense complex Gauss-Jordan
//! inverse used as an independent oracle against the tracked recursive
//! inverses, plus Frobenius-distance utilities.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::Rng;

pub type CMat = Array2<Complex64>;
pub type CVec = Array1<Complex64>;

/// Plain Gauss-Jordan elimination with partial pivoting.
pub fn gauss_jordan_inverse(a: &CMat) -> CMat {
    let n = a.nrows();
    assert_eq!(a.ncols(), n);
    let mut work = a.clone();
    let mut inv: CMat = Array2::eye(n);
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&p, &q| {
                work[(p, col)]
                    .norm()
                    .partial_cmp(&work[(q, col)].norm())
                    .unwrap()
            })
            .unwrap();
        assert!(
            work[(pivot_row, col)].norm() > 1e-300,
            "singular matrix passed to oracle inverse"
        );
        if pivot_row != col {
            for j in 0..n {
                work.swap((col, j), (pivot_row, j));
                inv.swap((col, j), (pivot_row, j));
            }
        }
        let pivot = work[(col, col)];
        for j in 0..n {
            work[(col, j)] /= pivot;
            inv[(col, j)] /= pivot;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = work[(row, col)];
            for j in 0..n {
                let w = work[(col, j)];
                let v = inv[(col, j)];
                work[(row, j)] -= factor * w;
                inv[(row, j)] -= factor * v;
            }
        }
    }
    inv
}

pub fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Relative Frobenius distance ||a - b|| / ||b||.
pub fn rel_frobenius(a: &CMat, b: &CMat) -> f64 {
    frobenius(&(a - b)) / frobenius(b).max(1e-300)
}

pub fn random_cvec<R: Rng>(n: usize, rng: &mut R) -> CVec {
    Array1::from_iter(
        (0..n).map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)),
    )
}

#[allow(dead_code)]
pub fn random_hermitian<R: Rng>(n: usize, rng: &mut R) -> CMat {
    let mut a = Array2::<Complex64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
        }
    }
    let ah = a.t().mapv(|z: Complex64| z.conj());
    (&a + &ah).mapv(|z| z * 0.5)
}
