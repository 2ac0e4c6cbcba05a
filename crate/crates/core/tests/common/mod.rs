//! Independent reference computations shared by the integration tests.
//!
//! Everything here is written from the definitions and only reads the raw CSC
//! arrays, so it does not go through the library's oracles.

#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rcd_core::CscMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

pub fn random_dense(rng: &mut ChaCha8Rng, m: usize, n: usize) -> Vec<Vec<f64>> {
    (0..m).map(|_| uniform_vec(rng, n, -1.0, 1.0)).collect()
}

pub fn ax(a: &CscMatrix, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.nrows()];
    let (cp, ri, v) = (a.col_ptr(), a.row_indices(), a.values());
    for j in 0..a.ncols() {
        for k in cp[j]..cp[j + 1] {
            out[ri[k]] += v[k] * x[j];
        }
    }
    out
}

pub fn atr(a: &CscMatrix, r: &[f64]) -> Vec<f64> {
    let (cp, ri, v) = (a.col_ptr(), a.row_indices(), a.values());
    (0..a.ncols())
        .map(|j| (cp[j]..cp[j + 1]).map(|k| v[k] * r[ri[k]]).sum())
        .collect()
}

pub fn l1(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

pub fn soft(u: f64, v: f64) -> f64 {
    if u > v {
        u - v
    } else if u < -v {
        u + v
    } else {
        0.0
    }
}

/// `½||Ax - b||²`.
pub fn ls_value(a: &CscMatrix, b: &[f64], x: &[f64]) -> f64 {
    let r = ax(a, x);
    0.5 * r.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>()
}

pub fn ls_grad(a: &CscMatrix, b: &[f64], x: &[f64]) -> Vec<f64> {
    let r: Vec<f64> = ax(a, x).iter().zip(b).map(|(p, q)| p - q).collect();
    atr(a, &r)
}

fn softplus_neg(z: f64) -> f64 {
    if z > 0.0 {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

/// `Σ_q log(1 + exp(-y_q a_qᵀx))`.
pub fn logistic_value(a: &CscMatrix, y: &[f64], x: &[f64]) -> f64 {
    ax(a, x)
        .iter()
        .zip(y)
        .map(|(z, l)| softplus_neg(l * z))
        .sum()
}

pub fn logistic_grad(a: &CscMatrix, y: &[f64], x: &[f64]) -> Vec<f64> {
    let r: Vec<f64> = ax(a, x)
        .iter()
        .zip(y)
        .map(|(z, l)| -l / (1.0 + (l * z).exp()))
        .collect();
    atr(a, &r)
}

/// `(x - S(x - β∇f, βc)) / β`, the stationarity residual at `t = 0`.
pub fn residual(x: &[f64], grad: &[f64], c: f64, beta: f64) -> Vec<f64> {
    x.iter()
        .zip(grad)
        .map(|(&xj, &gj)| (xj - soft(xj - beta * gj, beta * c)) / beta)
        .collect()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, a| m.max(a.abs()))
}

pub fn dense_of(a: &CscMatrix) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(a.nrows(), a.ncols());
    let (cp, ri, v) = (a.col_ptr(), a.row_indices(), a.values());
    for j in 0..a.ncols() {
        for k in cp[j]..cp[j + 1] {
            d[(ri[k], j)] += v[k];
        }
    }
    d
}

/// `A_Bᵀ A_B` for the columns in `cols`.
pub fn gram(a: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    let sub = a.select_columns(cols);
    sub.transpose() * sub
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn eig_range(h: &DMatrix<f64>) -> (f64, f64) {
    let e = SymmetricEigen::new(h.clone()).eigenvalues;
    (e.min(), e.max())
}

pub fn monotone(values: impl IntoIterator<Item = f64>) -> bool {
    let mut prev = f64::INFINITY;
    for v in values {
        if v > prev {
            return false;
        }
        prev = v;
    }
    true
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// `f(x) - f(y)` for least squares, summed row by row as `½(r - r')(r + r')`
/// so that small differences do not cancel against the full value.
pub fn ls_decrease(a: &CscMatrix, b: &[f64], x: &[f64], y: &[f64]) -> f64 {
    let (ax_, ay) = (ax(a, x), ax(a, y));
    (0..b.len())
        .map(|q| {
            let (r, s) = (ax_[q] - b[q], ay[q] - b[q]);
            0.5 * (r - s) * (r + s)
        })
        .sum()
}

/// `f(x) - f(y)` for the logistic loss, row by row. With margins `z`, `z'` and
/// `d = z' - z`, each row contributes `-log1p(σ(-z) expm1(-d))`.
pub fn logistic_decrease(a: &CscMatrix, labels: &[f64], x: &[f64], y: &[f64]) -> f64 {
    let (ax_, ay) = (ax(a, x), ax(a, y));
    (0..labels.len())
        .map(|q| {
            let (z, z2) = (labels[q] * ax_[q], labels[q] * ay[q]);
            let d = z2 - z;
            if d.abs() <= 1.0 {
                let s = 1.0 / (1.0 + z.exp());
                -(s * (-d).exp_m1()).ln_1p()
            } else {
                softplus_neg(z) - softplus_neg(z2)
            }
        })
        .sum()
}

/// `c(||x||_1 - ||y||_1)` over the coordinates where they differ.
pub fn l1_decrease(c: f64, x: &[f64], y: &[f64]) -> f64 {
    c * x
        .iter()
        .zip(y)
        .filter(|(a, b)| a != b)
        .map(|(a, b)| a.abs() - b.abs())
        .sum::<f64>()
}
