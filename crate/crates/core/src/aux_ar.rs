//! The auxiliary AR(r) model of squared returns `W_i = G_i²`.
//!
//! The auxiliary parameter is `π = (μ, a_1, …, a_r, γ(0))`: the mean of `W`,
//! the coefficients of the best linear AR(r) predictor of the centred `W`, and
//! the variance of `W`.

use crate::cogarch::ReturnsSeries;
use crate::error::{invalid, Error, Result};
use crate::linalg::{inverse, solve_spd, symmetrize, toeplitz};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Bounds of the compact auxiliary parameter space.
pub const COMPACT_EPS: f64 = 1e-6;
/// Every root of `1 - Σ a_j z^j` must satisfy `|z| >= ROOT_MARGIN`.
pub const ROOT_MARGIN: f64 = 1.001;
/// Toeplitz systems with a larger condition number are rejected.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxParams {
    pub mu: f64,
    pub a: Vec<f64>,
    pub gamma0: f64,
    pub r: usize,
    /// Set when the estimate had to be moved into the compact set.
    pub clamped: bool,
}

impl AuxParams {
    /// `(μ, a_1, …, a_r, γ(0))`.
    pub fn to_vector(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.r + 2);
        v[0] = self.mu;
        for (j, a) in self.a.iter().enumerate() {
            v[j + 1] = *a;
        }
        v[self.r + 1] = self.gamma0;
        v
    }

    pub fn from_vector(v: &DVector<f64>) -> Result<Self> {
        if v.len() < 4 {
            return Err(invalid("auxiliary vector needs r >= 2"));
        }
        let r = v.len() - 2;
        Ok(Self {
            mu: v[0],
            a: v.iter().skip(1).take(r).copied().collect(),
            gamma0: v[r + 1],
            r,
            clamped: false,
        })
    }

    /// `π` at `β` from `π` at `β = 1`: `μ` scales by `β`, `γ(0)` by `β²`.
    pub fn scale_beta(&self, beta: f64) -> Self {
        Self {
            mu: self.mu * beta,
            gamma0: self.gamma0 * beta * beta,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcvfEstimate {
    pub mean: f64,
    /// `γ̂(h)` for `h = 0..=r`, divisor `n`.
    pub gamma: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaEstimate {
    /// `Σ̂ = B Σ̂* Bᵀ` with `B = diag(1, Γ̂⁻¹, 1)`.
    pub sigma: DMatrix<f64>,
    pub sigma_star: DMatrix<f64>,
    pub truncation: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArMethod {
    #[default]
    YuleWalker,
    LeastSquares,
}

pub fn sample_acvf(w: &[f64], r: usize) -> Result<AcvfEstimate> {
    let n = w.len();
    if n == 0 {
        return Err(Error::InsufficientData { needed: r, got: 0 });
    }
    let mean = w.iter().sum::<f64>() / n as f64;
    let gamma = acvf_about(w, mean, r)?;
    Ok(AcvfEstimate { mean, gamma })
}

/// Autocovariances about a given mean, divisor `n`.
pub fn acvf_about(w: &[f64], mean: f64, r: usize) -> Result<Vec<f64>> {
    let n = w.len();
    if r >= n {
        return Err(Error::InsufficientData { needed: r, got: n });
    }
    let x: Vec<f64> = w.iter().map(|v| v - mean).collect();
    Ok((0..=r)
        .map(|h| x[..n - h].iter().zip(&x[h..]).map(|(p, q)| p * q).sum::<f64>() / n as f64)
        .collect())
}

/// Solves the Yule–Walker system `Γ a = (γ(1), …, γ(r))`.
pub fn yule_walker(acvf: &AcvfEstimate, r: usize) -> Result<Vec<f64>> {
    yule_walker_gamma(&acvf.gamma, r)
}

pub(crate) fn yule_walker_gamma(gamma: &[f64], r: usize) -> Result<Vec<f64>> {
    if r == 0 || gamma.len() < r + 1 {
        return Err(invalid(format!(
            "need gamma(0..={r}), got {} values",
            gamma.len()
        )));
    }
    if !(gamma[0] > 0.0) {
        return Err(Error::DegenerateAutocovariance {
            condition: f64::INFINITY,
        });
    }
    let big = toeplitz(gamma, r);
    let rhs = DVector::from_column_slice(&gamma[1..=r]);
    let (a, condition) = solve_spd(&big, &rhs)?;
    if !(condition <= MAX_CONDITION) {
        return Err(Error::DegenerateAutocovariance { condition });
    }
    Ok(a.iter().copied().collect())
}

pub fn aux_estimate(returns: &ReturnsSeries, r: usize, method: ArMethod) -> Result<AuxParams> {
    aux_estimate_squares(&returns.squares(), r, method)
}

/// [`aux_estimate`] on already squared returns.
pub fn aux_estimate_squares(w: &[f64], r: usize, method: ArMethod) -> Result<AuxParams> {
    let mut pi = unclamped_estimate(w, r, method)?;
    match method {
        // a positive definite Toeplitz system always gives a causal AR
        ArMethod::YuleWalker => clamp_box(&mut pi),
        ArMethod::LeastSquares => clamp_to_compact(&mut pi),
    }
    Ok(pi)
}

/// The estimate before any clamping. Simulated paths at `β = 1` use this so
/// that rescaling to other `β` stays exact.
pub(crate) fn unclamped_estimate(w: &[f64], r: usize, method: ArMethod) -> Result<AuxParams> {
    if r < 2 {
        return Err(invalid(format!("the auxiliary AR order must be >= 2, got {r}")));
    }
    if w.len() <= 2 * r {
        return Err(Error::InsufficientData {
            needed: 2 * r,
            got: w.len(),
        });
    }
    let acvf = sample_acvf(w, r)?;
    let a = match method {
        ArMethod::YuleWalker => yule_walker(&acvf, r)?,
        ArMethod::LeastSquares => least_squares(w, acvf.mean, r)?,
    };
    Ok(AuxParams {
        mu: acvf.mean,
        a,
        gamma0: acvf.gamma[0],
        r,
        clamped: false,
    })
}

/// Regression of `W̃_t` on `W̃_{t-1}, …, W̃_{t-r}` via the normal equations.
fn least_squares(w: &[f64], mean: f64, r: usize) -> Result<Vec<f64>> {
    let x: Vec<f64> = w.iter().map(|v| v - mean).collect();
    let rows = x.len() - r;
    let design = DMatrix::from_fn(rows, r, |t, j| x[t + r - 1 - j]);
    let target = DVector::from_column_slice(&x[r..]);
    let gram = design.tr_mul(&design);
    let rhs = design.tr_mul(&target);
    let (a, condition) = solve_spd(&gram, &rhs)?;
    if !(condition <= MAX_CONDITION) {
        return Err(Error::DegenerateAutocovariance { condition });
    }
    Ok(a.iter().copied().collect())
}

/// Largest modulus of the companion matrix eigenvalues, i.e. the inverse of
/// the smallest root modulus of `1 - Σ a_j z^j`.
pub fn companion_spectral_radius(a: &[f64]) -> f64 {
    let r = a.len();
    if r == 0 {
        return 0.0;
    }
    let mut c = DMatrix::zeros(r, r);
    for (j, v) in a.iter().enumerate() {
        c[(0, j)] = *v;
    }
    for i in 1..r {
        c[(i, i - 1)] = 1.0;
    }
    c.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Moves `π` into the compact set and flags it if anything changed.
///
/// AR roots inside the margin are pushed out by `a_j ← a_j λ^j`, which scales
/// every companion eigenvalue by `λ`.
pub fn clamp_to_compact(pi: &mut AuxParams) {
    clamp_box(pi);
    clamp_roots(pi);
}

pub(crate) fn clamp_roots(pi: &mut AuxParams) {
    let radius = companion_spectral_radius(&pi.a);
    let limit = 1.0 / ROOT_MARGIN;
    if radius > limit {
        log::warn!("AR spectral radius {radius} clamped to {limit}");
        let lambda = limit / radius * (1.0 - 1e-12);
        let mut scale = 1.0;
        for a in pi.a.iter_mut() {
            scale *= lambda;
            *a *= scale;
        }
        pi.clamped = true;
    }
}

fn clamp_box(pi: &mut AuxParams) {
    let bound = 1.0 / COMPACT_EPS;
    if pi.mu.abs() > bound {
        log::warn!("auxiliary mean {} clamped to the compact set", pi.mu);
        pi.mu = pi.mu.clamp(-bound, bound);
        pi.clamped = true;
    }
    if !(COMPACT_EPS..=bound).contains(&pi.gamma0) {
        log::warn!("auxiliary variance {} clamped to the compact set", pi.gamma0);
        pi.gamma0 = pi.gamma0.clamp(COMPACT_EPS, bound);
        pi.clamped = true;
    }
}

/// `⌈10 log₁₀ n⌉`.
pub fn default_truncation(n: usize) -> usize {
    (10.0 * (n as f64).log10()).ceil() as usize
}

/// Truncated long-run covariance of the auxiliary estimator.
pub fn estimate_sigma_star(w: &[f64], pi_hat: &AuxParams, truncation: usize) -> Result<SigmaEstimate> {
    let r = pi_hat.r;
    let n = w.len();
    if r < 2 || n <= 2 * r {
        return Err(Error::InsufficientData { needed: 2 * r, got: n });
    }
    if truncation + r + 1 > n {
        return Err(Error::InsufficientData {
            needed: truncation + r + 1,
            got: n,
        });
    }
    let mu = pi_hat.mu;
    let second = pi_hat.gamma0 + mu * mu;
    let x: Vec<f64> = w.iter().map(|v| v - mu).collect();
    let m = n - r;
    let d = r + 2;
    let c = DMatrix::from_fn(m, d, |k, col| {
        if col == 0 {
            x[k]
        } else if col == d - 1 {
            w[k] * w[k] - second
        } else {
            let resid = x[k + r]
                - pi_hat
                    .a
                    .iter()
                    .enumerate()
                    .map(|(j, a)| a * x[k + r - 1 - j])
                    .sum::<f64>();
            resid * x[k + r - col]
        }
    });
    let lag = |i: usize| -> DMatrix<f64> {
        let head = c.rows(0, m - i);
        let tail = c.rows(i, m - i);
        head.tr_mul(&tail) / (m - i) as f64
    };
    let mut star = lag(0);
    for i in 1..=truncation {
        let mi = lag(i);
        star += &mi + mi.transpose();
    }
    let star = symmetrize(&star);

    let acvf = sample_acvf(w, r)?;
    let gamma_inv = inverse(&toeplitz(&acvf.gamma, r))?;
    let mut b = DMatrix::zeros(d, d);
    b[(0, 0)] = 1.0;
    b[(d - 1, d - 1)] = 1.0;
    b.view_mut((1, 1), (r, r)).copy_from(&gamma_inv);
    let sigma = symmetrize(&(&b * &star * b.transpose()));
    Ok(SigmaEstimate {
        sigma,
        sigma_star: star,
        truncation,
    })
}
