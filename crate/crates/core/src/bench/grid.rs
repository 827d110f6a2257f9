//! Lattices over the restricted parameter set `{θ : Ψ_θ(4) < 0}`.

use crate::error::{invalid, Error, Result};
use crate::estimators::ParameterBox;
use crate::levy::{psi, CogarchParams, LevyModel};
use serde::{Deserialize, Serialize};

/// `β × (η, φ)` lattice. `Ψ(4)` does not involve `β`, so the filter acts on
/// the `(η, φ)` plane only and every `β` is paired with every kept `(η, φ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterGrid {
    pub betas: Vec<f64>,
    /// Kept `(η, φ)` pairs in lexicographic order.
    pub eta_phi: Vec<(f64, f64)>,
    /// `Ψ(4)` for each entry of `eta_phi`.
    pub psi4: Vec<f64>,
    pub spacing: [f64; 3],
    pub bounds: ParameterBox,
    /// Lattice sizes along `β`, `η`, `φ` before filtering.
    pub axis_counts: [usize; 3],
    /// Lattice points removed by the filter (counted with their `β` copies).
    pub filtered: usize,
}

impl ParameterGrid {
    pub fn len(&self) -> usize {
        self.betas.len() * self.eta_phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Point `idx` in `(β, η, φ)` lexicographic order.
    pub fn point(&self, idx: usize) -> CogarchParams {
        let m = self.eta_phi.len();
        let (eta, phi) = self.eta_phi[idx % m];
        CogarchParams::from_array([self.betas[idx / m], eta, phi])
    }

    pub fn points(&self) -> Vec<CogarchParams> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Grid from explicit axes, filtered by `Ψ(4) < 0`.
    pub fn from_axes(
        betas: Vec<f64>,
        etas: &[f64],
        phis: &[f64],
        model: &LevyModel,
        spacing: [f64; 3],
        bounds: ParameterBox,
    ) -> Result<Self> {
        if betas.iter().chain(etas).chain(phis).any(|v| !(*v > 0.0)) {
            return Err(invalid("grid axes must be positive"));
        }
        let mut eta_phi = Vec::new();
        let mut psi4 = Vec::new();
        for &eta in etas {
            for &phi in phis {
                let v = psi(model, &CogarchParams::from_array([1.0, eta, phi]), 4.0)?;
                if v < 0.0 {
                    eta_phi.push((eta, phi));
                    psi4.push(v);
                }
            }
        }
        let plane = etas.len() * phis.len();
        let grid = Self {
            filtered: (plane - eta_phi.len()) * betas.len(),
            axis_counts: [betas.len(), etas.len(), phis.len()],
            betas,
            eta_phi,
            psi4,
            spacing,
            bounds,
        };
        if grid.is_empty() {
            return Err(Error::EmptyGrid(format!(
                "no point of {bounds:?} satisfies Psi(4) < 0"
            )));
        }
        Ok(grid)
    }
}

/// `lo, lo + d, …` up to `hi` (inclusive up to rounding).
pub fn axis(lo: f64, hi: f64, d: f64) -> Vec<f64> {
    let count = ((hi - lo) / d + 1e-9).floor() as usize + 1;
    (0..count).map(|i| lo + i as f64 * d).collect()
}

pub fn build_grid(bounds: &ParameterBox, spacing: [f64; 3], model: &LevyModel) -> Result<ParameterGrid> {
    bounds.validate()?;
    if spacing.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
        return Err(invalid(format!("grid spacings must be > 0, got {spacing:?}")));
    }
    let (lo, hi) = (bounds.lower.to_array(), bounds.upper.to_array());
    ParameterGrid::from_axes(
        axis(lo[0], hi[0], spacing[0]),
        &axis(lo[1], hi[1], spacing[1]),
        &axis(lo[2], hi[2], spacing[2]),
        model,
        spacing,
        *bounds,
    )
}
