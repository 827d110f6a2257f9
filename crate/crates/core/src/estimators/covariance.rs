//! Sandwich covariance `Ξ = J⁻¹ I J⁻¹` of an indirect inference estimator.

use super::WeightMatrix;
use crate::aux_ar::SigmaEstimate;
use crate::error::{invalid, Error, Result};
use crate::linalg::{singular_values, symmetrize};
use nalgebra::DMatrix;

/// `J = ∇πᵀΩ∇π`, `I = (1 + 1/K) ∇πᵀΩΣΩ∇π`. `k = None` drops the simulation
/// factor, as for the binding-function estimator.
pub fn asymptotic_cov(
    grad_pi: &DMatrix<f64>,
    sigma: &SigmaEstimate,
    omega: &WeightMatrix,
    k: Option<usize>,
) -> Result<DMatrix<f64>> {
    let d = grad_pi.nrows();
    if sigma.sigma.nrows() != d || omega.dim() != d {
        return Err(invalid(format!(
            "dimension mismatch: grad {}x{}, sigma {}, omega {}",
            d,
            grad_pi.ncols(),
            sigma.sigma.nrows(),
            omega.dim()
        )));
    }
    let factor = match k {
        Some(0) => return Err(invalid("K must be >= 1")),
        Some(k) => 1.0 + 1.0 / k as f64,
        None => 1.0,
    };
    let w = omega.matrix();
    let wg = w * grad_pi;
    let j = grad_pi.tr_mul(&wg);
    let s = singular_values(&j);
    let smallest = *s.last().unwrap_or(&0.0);
    if !(smallest > 1e-14 * s[0]) {
        return Err(Error::SingularMatrix {
            smallest_singular_value: smallest,
        });
    }
    let j_inv = j.try_inverse().ok_or(Error::SingularMatrix {
        smallest_singular_value: smallest,
    })?;
    let info = wg.tr_mul(&(&sigma.sigma * &wg)) * factor;
    Ok(symmetrize(&(&j_inv * info * &j_inv)))
}
