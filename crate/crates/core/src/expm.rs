//! Dense complex matrix exponential via scaling-and-squaring with a
//! Pade(13,13) approximant (Higham 2005).
//!
//! Sized for the small dense matrices of this crate (dim <= ~130); the
//! linear solve is straightforward Gaussian elimination with partial
//! pivoting.

use ndarray::{s, Array2};
use num_complex::Complex64;

/// Pade(13,13) numerator coefficients.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Scaling threshold for the degree-13 approximant (Higham, Table 10.2).
const THETA13: f64 = 5.371920351148152;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// 1-norm (max column sum of moduli).
fn one_norm(m: &Array2<Complex64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        let col_sum: f64 = m.column(j).iter().map(|z| z.norm()).sum();
        best = best.max(col_sum);
    }
    best
}

/// Compute `exp(A)` for a square complex matrix.
pub fn matrix_exp(a: &Array2<Complex64>) -> Array2<Complex64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix_exp requires a square matrix");
    if n == 0 {
        return Array2::zeros((0, 0));
    }
    if n == 1 {
        let mut out = Array2::zeros((1, 1));
        out[[0, 0]] = a[[0, 0]].exp();
        return out;
    }

    let norm = one_norm(a);
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as u32
    } else {
        0
    };
    let scale = c(0.5f64.powi(squarings as i32));
    let a1 = a.mapv(|z| z * scale);

    let mut result = pade13(&a1);
    for _ in 0..squarings {
        result = result.dot(&result);
    }
    result
}

fn pade13(a: &Array2<Complex64>) -> Array2<Complex64> {
    let n = a.nrows();
    let eye: Array2<Complex64> = Array2::eye(n);
    let a2 = a.dot(a);
    let a4 = a2.dot(&a2);
    let a6 = a2.dot(&a4);

    let w1 = a6.mapv(|z| z * c(PADE13[13]))
        + a4.mapv(|z| z * c(PADE13[11]))
        + a2.mapv(|z| z * c(PADE13[9]));
    let w2 = a6.dot(&w1)
        + a6.mapv(|z| z * c(PADE13[7]))
        + a4.mapv(|z| z * c(PADE13[5]))
        + a2.mapv(|z| z * c(PADE13[3]))
        + eye.mapv(|z| z * c(PADE13[1]));
    let u = a.dot(&w2);

    let z1 = a6.mapv(|z| z * c(PADE13[12]))
        + a4.mapv(|z| z * c(PADE13[10]))
        + a2.mapv(|z| z * c(PADE13[8]));
    let v = a6.dot(&z1)
        + a6.mapv(|z| z * c(PADE13[6]))
        + a4.mapv(|z| z * c(PADE13[4]))
        + a2.mapv(|z| z * c(PADE13[2]))
        + eye.mapv(|z| z * c(PADE13[0]));

    // exp(A) ~= (V - U)^-1 (V + U)
    let num = &v + &u;
    let den = &v - &u;
    solve(den, num)
}

/// Solve `A X = B` by Gaussian elimination with partial pivoting.
fn solve(a: Array2<Complex64>, b: Array2<Complex64>) -> Array2<Complex64> {
    let n = a.nrows();
    let m = b.ncols();
    let mut aug: Array2<Complex64> = Array2::zeros((n, n + m));
    aug.slice_mut(s![.., ..n]).assign(&a);
    aug.slice_mut(s![.., n..]).assign(&b);

    for col in 0..n {
        let mut piv_row = col;
        let mut piv_val = aug[[col, col]].norm();
        for row in (col + 1)..n {
            let v = aug[[row, col]].norm();
            if v > piv_val {
                piv_val = v;
                piv_row = row;
            }
        }
        assert!(
            piv_val > 0.0,
            "singular denominator in Pade approximant (pivot {col})"
        );
        if piv_row != col {
            for j in 0..(n + m) {
                aug.swap([col, j], [piv_row, j]);
            }
        }
        let pivot = aug[[col, col]];
        for row in (col + 1)..n {
            let factor = aug[[row, col]] / pivot;
            if factor.norm() == 0.0 {
                continue;
            }
            for j in col..(n + m) {
                let v = aug[[col, j]];
                aug[[row, j]] -= factor * v;
            }
        }
    }

    let mut x: Array2<Complex64> = Array2::zeros((n, m));
    for col in (0..n).rev() {
        let pivot = aug[[col, col]];
        for j in 0..m {
            let mut sum = aug[[col, n + j]];
            for k in (col + 1)..n {
                sum -= aug[[col, k]] * x[[k, j]];
            }
            x[[col, j]] = sum / pivot;
        }
    }
    x
}
