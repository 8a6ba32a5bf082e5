//! Dense symmetric positive-definite factorization on row-major buffers.

/// Relative pivot threshold below which the matrix is treated as singular.
const PIVOT_TOL: f64 = 1e-10;

/// In-place Cholesky factorization `A = L Lᵀ` of an `n × n` row-major matrix.
/// Only the lower triangle is read; on success it holds `L`.
///
/// On failure returns the offending equation and its pivot value.
pub(crate) fn cholesky_in_place(a: &mut [f64], n: usize) -> Result<(), (usize, f64)> {
    debug_assert_eq!(a.len(), n * n);
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max);
    let tol = PIVOT_TOL * scale.max(f64::MIN_POSITIVE);
    for j in 0..n {
        let (top, below) = a.split_at_mut((j + 1) * n);
        let row_j = &mut top[j * n..];
        let d = row_j[j] - row_j[..j].iter().map(|v| v * v).sum::<f64>();
        if !(d > tol) {
            return Err((j, d));
        }
        let d = d.sqrt();
        row_j[j] = d;
        let row_j = &row_j[..j];
        for row_i in below.chunks_exact_mut(n) {
            let s = row_i[j] - row_i[..j].iter().zip(row_j).map(|(x, y)| x * y).sum::<f64>();
            row_i[j] = s / d;
        }
    }
    Ok(())
}

/// Solves `L Lᵀ x = b` in place given the factor from [`cholesky_in_place`].
pub(crate) fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let row = &l[i * n..i * n + i];
        let mut s = b[i];
        for (k, v) in row.iter().enumerate() {
            s -= v * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}
