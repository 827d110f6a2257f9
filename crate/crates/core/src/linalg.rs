//! Small dense linear algebra helpers on top of nalgebra.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Symmetric Toeplitz matrix `(γ(|i-j|))_{i,j<r}`.
pub fn toeplitz(gamma: &[f64], r: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, r, |i, j| gamma[i.abs_diff(j)])
}

/// Solves `A x = b` for symmetric positive definite `A` and returns `x`
/// together with an estimate of the 1-norm condition number of `A`.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let chol = a
        .clone()
        .cholesky()
        .ok_or(Error::DegenerateAutocovariance {
            condition: f64::INFINITY,
        })?;
    let x = chol.solve(b);
    let inv_norm = hager_inverse_norm(a.nrows(), |v| chol.solve(v));
    let condition = one_norm(a) * inv_norm;
    Ok((x, condition))
}

pub fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Hager's lower bound for `‖A⁻¹‖₁`, exact in most practical cases. `solve`
/// applies `A⁻¹`; `A` must be symmetric.
fn hager_inverse_norm<F>(n: usize, solve: F) -> f64
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut estimate = 0.0;
    for _ in 0..5 {
        let y = solve(&x);
        estimate = y.iter().map(|v| v.abs()).sum::<f64>();
        let xi = y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
        let z = solve(&xi);
        let (j, zmax) = z
            .iter()
            .enumerate()
            .map(|(i, v)| (i, v.abs()))
            .fold((0, f64::NEG_INFINITY), |acc, c| if c.1 > acc.1 { c } else { acc });
        if zmax <= z.dot(&x) {
            break;
        }
        x = DVector::zeros(n);
        x[j] = 1.0;
    }
    estimate
}

/// Singular values in decreasing order.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Number of singular values above `rel_tol` times the largest.
pub fn numeric_rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    let s = singular_values(a);
    match s.first() {
        Some(&top) if top > 0.0 => s.iter().filter(|&&v| v > rel_tol * top).count(),
        _ => 0,
    }
}

/// Inverse of a square matrix, failing with the smallest singular value when
/// it is numerically singular.
pub fn inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let s = singular_values(a);
    let smallest = s.last().copied().unwrap_or(0.0);
    let largest = s.first().copied().unwrap_or(0.0);
    if !(smallest > 1e-14 * largest) {
        return Err(Error::SingularMatrix {
            smallest_singular_value: smallest,
        });
    }
    a.clone().try_inverse().ok_or(Error::SingularMatrix {
        smallest_singular_value: smallest,
    })
}

/// `(M + Mᵀ)/2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toeplitz_layout() {
        let t = toeplitz(&[3.0, 2.0, 1.0], 3);
        assert_eq!(t[(0, 2)], 1.0);
        assert_eq!(t[(2, 1)], 2.0);
        assert_eq!(t[(1, 1)], 3.0);
    }

    #[test]
    fn condition_of_diagonal() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 10.0, 1e3]));
        let (x, cond) = solve_spd(&a, &DVector::from_vec(vec![1.0, 10.0, 1e3])).unwrap();
        assert!((cond - 1e3).abs() < 1e-9);
        assert!(x.iter().all(|v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn hager_matches_explicit_inverse() {
        let a = toeplitz(&[1.0, 0.9, 0.8, 0.7, 0.6], 5);
        let (_, cond) = solve_spd(&a, &DVector::from_element(5, 1.0)).unwrap();
        let exact = one_norm(&a) * one_norm(&a.clone().try_inverse().unwrap());
        assert!((cond / exact - 1.0).abs() < 1e-8, "{cond} vs {exact}");
    }

    #[test]
    fn singular_is_reported() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(solve_spd(&a, &DVector::from_element(2, 1.0)).is_err());
        assert!(matches!(inverse(&a), Err(Error::SingularMatrix { .. })));
        assert_eq!(numeric_rank(&a, 1e-10), 1);
    }
}
