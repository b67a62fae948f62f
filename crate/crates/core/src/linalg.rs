//! Small dense helpers on row-major slices; dimensions here are single digits.

/// `out += scale * A v` with `A` row-major `rows x cols`.
#[inline]
pub fn gemv_acc(out: &mut [f64], a: &[f64], rows: usize, cols: usize, v: &[f64], scale: f64) {
    debug_assert_eq!(a.len(), rows * cols);
    debug_assert_eq!(v.len(), cols);
    for (i, o) in out.iter_mut().enumerate().take(rows) {
        let row = &a[i * cols..(i + 1) * cols];
        let mut s = 0.0;
        for (aij, vj) in row.iter().zip(v) {
            s += aij * vj;
        }
        *o += scale * s;
    }
}

/// `out += scale * A^T v` with `A` row-major `rows x cols`, `out` of length `cols`.
#[inline]
pub fn gemv_t_acc(out: &mut [f64], a: &[f64], rows: usize, cols: usize, v: &[f64], scale: f64) {
    debug_assert_eq!(a.len(), rows * cols);
    for (i, vi) in v.iter().enumerate().take(rows) {
        let row = &a[i * cols..(i + 1) * cols];
        for (o, aij) in out.iter_mut().zip(row) {
            *o += scale * aij * vi;
        }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Lower Cholesky factor of a symmetric positive semidefinite matrix.
/// Zero pivots (within `1e-14` of the diagonal scale) yield zero columns.
pub fn cholesky_psd(cov: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    let scale = (0..n)
        .map(|i| cov[i * n + i].abs())
        .fold(0.0_f64, f64::max)
        .max(1.0);
    for j in 0..n {
        let mut d = cov[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if d < -1e-12 * scale {
            return None;
        }
        let djj = if d <= 1e-14 * scale { 0.0 } else { d.sqrt() };
        l[j * n + j] = djj;
        for i in j + 1..n {
            let mut s = cov[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = if djj == 0.0 {
                if s.abs() > 1e-10 * scale {
                    return None;
                }
                0.0
            } else {
                s / djj
            };
        }
    }
    Some(l)
}

pub fn is_symmetric(a: &[f64], n: usize, tol: f64) -> bool {
    (0..n).all(|i| (0..i).all(|j| (a[i * n + j] - a[j * n + i]).abs() <= tol))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_reconstructs() {
        let c = [4.0, 2.0, 2.0, 3.0];
        let l = cholesky_psd(&c, 2).unwrap();
        let r00 = l[0] * l[0];
        let r10 = l[2] * l[0];
        let r11 = l[2] * l[2] + l[3] * l[3];
        assert!(
            (r00 - 4.0).abs() < 1e-14 && (r10 - 2.0).abs() < 1e-14 && (r11 - 3.0).abs() < 1e-14
        );
    }

    #[test]
    fn cholesky_rejects_indefinite_and_accepts_singular() {
        assert!(cholesky_psd(&[1.0, 2.0, 2.0, 1.0], 2).is_none());
        let l = cholesky_psd(&[1.0, 1.0, 1.0, 1.0], 2).unwrap();
        assert_eq!(l[3], 0.0);
    }

    #[test]
    fn gemv_and_transpose() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]; // 2x3
        let mut out = [0.0; 2];
        gemv_acc(&mut out, &a, 2, 3, &[1.0, 0.0, -1.0], 1.0);
        assert_eq!(out, [-2.0, -2.0]);
        let mut out_t = [0.0; 3];
        gemv_t_acc(&mut out_t, &a, 2, 3, &[1.0, 1.0], 2.0);
        assert_eq!(out_t, [10.0, 14.0, 18.0]);
    }
}
