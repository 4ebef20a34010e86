//! Exact matrix permanents.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;

pub const MAX_PERMANENT_SIZE: usize = 20;

/// Permanent by Glynn's formula, visiting the `2^(n−1)` sign vectors in
/// Gray-code order so that each term costs `O(n)`:
///
/// `Per(A) = 2^(1−n) Σ_δ (Π_k δ_k) Π_j Σ_i δ_i a_ij`, with `δ_0 = +1`.
pub fn permanent(a: &CMatrix) -> Result<Complex64> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Domain(format!("permanent needs a square matrix, got {}x{}", n, a.ncols())));
    }
    if n == 0 {
        return Err(Error::Domain("permanent of an empty matrix".into()));
    }
    if n > MAX_PERMANENT_SIZE {
        return Err(Error::Capacity { size: n, max: MAX_PERMANENT_SIZE });
    }
    Ok(glynn_gray(a))
}

fn glynn_gray(a: &CMatrix) -> Complex64 {
    let n = a.nrows();
    if n == 1 {
        return a[(0, 0)];
    }
    // column sums with every row sign +1
    let mut sums: Vec<Complex64> = (0..n).map(|j| (0..n).map(|i| a[(i, j)]).sum()).collect();
    let mut delta = vec![1.0f64; n];
    let mut total: Complex64 = sums.iter().product();
    let mut sign = 1.0f64;

    let terms: u64 = 1 << (n - 1);
    for k in 1..terms {
        // row to flip: position of the lowest set bit, offset past row 0
        let row = k.trailing_zeros() as usize + 1;
        let d = delta[row];
        for (j, s) in sums.iter_mut().enumerate() {
            *s -= a[(row, j)] * (2.0 * d);
        }
        delta[row] = -d;
        sign = -sign;
        let prod: Complex64 = sums.iter().product();
        total += prod * sign;
    }
    total / (terms as f64)
}

/// Permanent of a non-negative real matrix, returned as `f64`.
pub fn permanent_real(a: &nalgebra::DMatrix<f64>) -> Result<f64> {
    let c = a.map(|v| Complex64::new(v, 0.0));
    permanent(&c).map(|p| p.re)
}
