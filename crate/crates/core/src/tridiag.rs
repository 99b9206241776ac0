//! Thomas algorithm for the tridiagonal systems produced by implicit radial diffusion.

use crate::Scalar;

/// Solves `A x = rhs` in place, with `lower[i] = A[i][i-1]`, `diag[i] = A[i][i]`,
/// `upper[i] = A[i][i+1]`. `lower[0]` and `upper[n-1]` are ignored.
///
/// No pivoting: the systems assembled here (identity minus a positive multiple of
/// the discrete Laplacian) are strictly diagonally dominant.
pub fn solve_tridiagonal<T: Scalar>(
    lower: &[T],
    diag: &[T],
    upper: &[T],
    rhs: &mut [T],
    scratch: &mut Vec<T>,
) {
    let n = rhs.len();
    debug_assert!(lower.len() == n && diag.len() == n && upper.len() == n);
    if n == 0 {
        return;
    }
    scratch.clear();
    scratch.resize(n, T::zero());

    let mut denom = diag[0];
    scratch[0] = upper[0] / denom;
    rhs[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * scratch[i - 1];
        scratch[i] = if i + 1 < n {
            upper[i] / denom
        } else {
            T::zero()
        };
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        rhs[i] = rhs[i] - scratch[i] * rhs[i + 1];
    }
}
