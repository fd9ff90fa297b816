// SPDX-License-Identifier: Apache-2.0

use nalgebra::DMatrix;

/// Orthonormal basis (n x (k+1)) of polynomials of degree <= k evaluated on
/// the grid `0..n`. Built by modified Gram-Schmidt, applied twice, on a
/// centered and scaled grid to keep the monomials well conditioned.
pub fn poly_basis(n: usize, k: usize) -> DMatrix<f64> {
    assert!(k < n, "polynomial degree {k} needs at least {} points", k + 1);
    let half = (n as f64 - 1.0) / 2.0;
    let scale = half.max(1.0);
    let grid: Vec<f64> = (0..n).map(|i| (i as f64 - half) / scale).collect();
    let mut q = DMatrix::from_fn(n, k + 1, |i, j| grid[i].powi(j as i32));
    for j in 0..=k {
        for _ in 0..2 {
            for l in 0..j {
                let proj = q.column(j).dot(&q.column(l));
                let ql = q.column(l).clone_owned();
                q.column_mut(j).axpy(-proj, &ql, 1.0);
            }
            let norm = q.column(j).norm();
            q.column_mut(j).unscale_mut(norm);
        }
    }
    q
}

/// `k`-th order forward difference; result has length `len - k`.
pub fn forward_difference(v: &[f64], k: usize) -> Vec<f64> {
    let mut d = v.to_vec();
    for _ in 0..k {
        d = d.windows(2).map(|w| w[1] - w[0]).collect();
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_is_orthonormal() {
        for &(n, k) in &[(1, 0), (5, 2), (200, 3), (1000, 2)] {
            let q = poly_basis(n, k);
            let g = q.transpose() * &q;
            let err = (g - DMatrix::identity(k + 1, k + 1)).amax();
            assert!(err < 1e-12, "n={n} k={k} err={err}");
        }
    }

    #[test]
    fn basis_spans_monomials() {
        let q = poly_basis(9, 2);
        let sq: Vec<f64> = (0..9).map(|i| (i * i) as f64).collect();
        let v = nalgebra::DVector::from_vec(sq.clone());
        let fit = &q * (q.transpose() * &v);
        assert!((fit - v).amax() < 1e-10);
    }

    #[test]
    fn differences() {
        assert_eq!(forward_difference(&[1.0, 4.0, 9.0, 16.0], 2), vec![2.0, 2.0]);
        assert_eq!(forward_difference(&[1.0, 2.0], 0), vec![1.0, 2.0]);
    }
}
