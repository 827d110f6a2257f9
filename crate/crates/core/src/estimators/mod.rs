//! Estimators of `θ = (β, η, φ)`.

mod covariance;
mod iie_sim;
mod iie_star;
mod mm;

pub use covariance::asymptotic_cov;
pub use iie_sim::{iie_sim, iie_sim_with_table, IieConfig, SimulatedBindingTable};
pub use iie_star::{iie_star, iie_star_objective};
pub use mm::{initial_guess, mm_estimate, mm_from_summary, mm_summary};

use crate::error::{invalid, Result};
use crate::levy::{psi, CogarchParams, LevyModel};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Mm,
    IieStar,
    IieSim,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Mm => "mm",
            Method::IieStar => "iie_star",
            Method::IieSim => "iie_sim",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Symmetric positive definite weight `Ω` of the quadratic distance.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    omega: DMatrix<f64>,
    identity: bool,
}

impl WeightMatrix {
    pub fn identity(dim: usize) -> Self {
        Self {
            omega: DMatrix::identity(dim, dim),
            identity: true,
        }
    }

    pub fn new(omega: DMatrix<f64>) -> Result<Self> {
        if !omega.is_square() {
            return Err(invalid("weight matrix must be square"));
        }
        let scale = omega.amax().max(1.0);
        if (&omega - omega.transpose()).amax() > 1e-12 * scale {
            return Err(invalid("weight matrix must be symmetric"));
        }
        if omega.clone().cholesky().is_none() {
            return Err(invalid("weight matrix must be positive definite"));
        }
        let identity = omega == DMatrix::identity(omega.nrows(), omega.ncols());
        Ok(Self { omega, identity })
    }

    pub fn dim(&self) -> usize {
        self.omega.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.omega
    }

    /// `dᵀ Ω d`.
    pub fn quad_form(&self, d: &DVector<f64>) -> f64 {
        if self.identity {
            d.dot(d)
        } else {
            d.dot(&(&self.omega * d))
        }
    }
}

/// Axis-aligned search domain in `θ`-space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterBox {
    pub lower: CogarchParams,
    pub upper: CogarchParams,
}

impl ParameterBox {
    pub fn new(lower: CogarchParams, upper: CogarchParams) -> Result<Self> {
        let b = Self { lower, upper };
        b.validate()?;
        Ok(b)
    }

    /// `[spacing, 3 θ]` per component.
    pub fn around(theta: &CogarchParams, spacing: [f64; 3]) -> Result<Self> {
        let t = theta.to_array();
        Self::new(
            CogarchParams::from_array(spacing),
            CogarchParams::from_array([3.0 * t[0], 3.0 * t[1], 3.0 * t[2]]),
        )
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = (self.lower.to_array(), self.upper.to_array());
        for i in 0..3 {
            if !(lo[i] > 0.0 && lo[i] <= hi[i] && hi[i].is_finite()) {
                return Err(invalid(format!("invalid box {self:?}")));
            }
        }
        Ok(())
    }

    pub fn contains(&self, theta: &CogarchParams) -> bool {
        let (x, lo, hi) = (theta.to_array(), self.lower.to_array(), self.upper.to_array());
        (0..3).all(|i| lo[i] <= x[i] && x[i] <= hi[i])
    }

    pub fn centre(&self) -> CogarchParams {
        let (lo, hi) = (self.lower.to_array(), self.upper.to_array());
        CogarchParams::from_array([
            0.5 * (lo[0] + hi[0]),
            0.5 * (lo[1] + hi[1]),
            0.5 * (lo[2] + hi[2]),
        ])
    }

    pub fn project(&self, theta: &CogarchParams) -> CogarchParams {
        let (x, lo, hi) = (theta.to_array(), self.lower.to_array(), self.upper.to_array());
        CogarchParams::from_array([
            x[0].clamp(lo[0], hi[0]),
            x[1].clamp(lo[1], hi[1]),
            x[2].clamp(lo[2], hi[2]),
        ])
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub evaluations: usize,
    pub iterations: usize,
    pub converged: bool,
    /// The auxiliary estimate of the data was clamped into the compact set.
    pub clamped: bool,
    /// Index of the argmin in the flattened `(β, (η, φ))` grid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub theta_hat: CogarchParams,
    pub method: Method,
    pub objective: f64,
    /// `Ψ_θ̂(4) < 0`.
    pub feasible: bool,
    pub psi4: f64,
    pub diagnostics: Diagnostics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi: Option<[[f64; 3]; 3]>,
}

impl EstimationResult {
    pub(crate) fn new(
        theta_hat: CogarchParams,
        method: Method,
        objective: f64,
        model: &LevyModel,
        diagnostics: Diagnostics,
    ) -> Self {
        let psi4 = psi(model, &theta_hat, 4.0).unwrap_or(f64::INFINITY);
        Self {
            theta_hat,
            method,
            objective,
            feasible: psi4 < 0.0,
            psi4,
            diagnostics,
            xi: None,
        }
    }
}

pub(crate) fn require_r(r: usize) -> Result<()> {
    if r < 2 {
        return Err(invalid(format!("the auxiliary AR order must be >= 2, got {r}")));
    }
    Ok(())
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_matrix_checks() {
        assert!(WeightMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0])).is_err());
        assert!(WeightMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).is_err());
        let w = WeightMatrix::new(DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0])).unwrap();
        let d = DVector::from_vec(vec![1.0, 2.0]);
        assert!((w.quad_form(&d) - (2.0 + 2.0 + 4.0)).abs() < 1e-15);
        assert_eq!(WeightMatrix::identity(3).quad_form(&DVector::from_element(3, 2.0)), 12.0);
    }

    #[test]
    fn box_around_truth() {
        let theta = CogarchParams::new(0.04, 0.053, 0.038).unwrap();
        let b = ParameterBox::around(&theta, [0.002; 3]).unwrap();
        assert!(b.contains(&theta));
        assert!((b.upper.eta - 0.159).abs() < 1e-15);
        let p = b.project(&CogarchParams::from_array([1.0, 0.0, 0.05]));
        assert_eq!(p.to_array(), [0.12, 0.002, 0.05]);
    }
}
