//! Independent reference implementations shared by the integration tests.
//! Nothing here goes through the library's linear algebra.
#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64;

pub type Mat = Vec<Vec<Complex64>>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `exp(−j2πkn/K)/√K` straight from the definition.
pub fn dft_entry(k: usize, n: usize, size: usize) -> Complex64 {
    let arg = -2.0 * PI * (k as f64) * (n as f64) / size as f64;
    c(arg.cos(), arg.sin()) / (size as f64).sqrt()
}

pub fn dft(size: usize, cols: usize) -> Mat {
    (0..size).map(|k| (0..cols).map(|n| dft_entry(k, n, size)).collect()).collect()
}

/// Pilot `i` sits on subcarrier `i·K/N` and sees `x_i Σ_m h_m e^{−j2π(iK/N)m/K}/√K`.
pub fn observation(k: usize, m: usize, n: usize, pilots: &[Complex64]) -> Mat {
    let step = k / n;
    (0..n).map(|i| (0..m).map(|col| pilots[i] * dft_entry(i * step, col, k)).collect()).collect()
}

pub fn plain_sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Sinc pulse samples `p(nT − τ)`, `n = 0..M`.
pub fn sinc_column(m: usize, t: f64, tau: f64) -> Vec<Complex64> {
    (0..m).map(|n| c(plain_sinc((n as f64 * t - tau) / t), 0.0)).collect()
}

pub fn matvec(a: &Mat, x: &[Complex64]) -> Vec<Complex64> {
    a.iter().map(|row| row.iter().zip(x).map(|(u, v)| u * v).sum()).collect()
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let cols = b[0].len();
    a.iter()
        .map(|row| (0..cols).map(|j| row.iter().zip(b).map(|(u, brow)| u * brow[j]).sum()).collect())
        .collect()
}

pub fn adjoint(a: &Mat) -> Mat {
    let (rows, cols) = (a.len(), a[0].len());
    (0..cols).map(|j| (0..rows).map(|i| a[i][j].conj()).collect()).collect()
}

/// Solves `G x = b` by Gaussian elimination with partial pivoting.
pub fn solve(mut g: Mat, mut b: Vec<Complex64>) -> Vec<Complex64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| g[i][col].norm().total_cmp(&g[j][col].norm())).unwrap();
        g.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = g[row][col] / g[col][col];
            let pivot_row = g[col].clone();
            for (dst, v) in g[row][col..].iter_mut().zip(&pivot_row[col..]) {
                *dst -= f * v;
            }
            let v = b[col];
            b[row] -= f * v;
        }
    }
    let mut x = vec![Complex64::default(); n];
    for row in (0..n).rev() {
        let s: Complex64 = (row + 1..n).map(|k| g[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / g[row][row];
    }
    x
}

/// Least squares through the normal equations `AᴴA x = Aᴴy`.
pub fn normal_equations(a: &Mat, y: &[Complex64]) -> Vec<Complex64> {
    let ah = adjoint(a);
    solve(matmul(&ah, a), matvec(&ah, y))
}

pub fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max)
}
