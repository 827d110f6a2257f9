//! The binding function `θ ↦ π_θ`.
//!
//! The squared returns of a stationary COGARCH(1,1) have mean `μ` and an
//! autocovariance that is exactly geometric from lag one on,
//! `γ(h) = γ(0) k e^{-hρ}`. The map is composed as
//! `θ → (μ, γ(0), k, ρ) → (γ(1), …, γ(r)) → π_θ`, the last step being the
//! Yule–Walker solve.
//!
//! With `a = |Ψ(1)|`, `b = |Ψ(2)|`, `m = β/a`, `M = Eσ⁴ = 2β²/(ab)`,
//! `c = (1 + φ m₄) M` and `J = Δ - (1 - e^{-aΔ})/a` the analytic backend uses
//!
//! ```text
//! μ    = mΔ,                ρ = aΔ,
//! γ(h) = (c - m²)(1 - e^{-aΔ})(e^{aΔ} - 1) e^{-ahΔ} / a²,      h >= 1,
//! γ(0) = 6(c - m²) J / a + 2m²Δ² + m₄ M Δ.
//! ```

use crate::aux_ar::{yule_walker_gamma, AuxParams};
use crate::cogarch::{simulate_returns, Recording, SimConfig, DEFAULT_BURN_IN, DEFAULT_SUBSTEPS};
use crate::error::{invalid, Error, Result};
use crate::levy::{levy_moment, psi, CogarchParams, LevyModel};
use crate::linalg::singular_values;
use crate::rng::{Lane, StreamId};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub mu: f64,
    pub gamma0: f64,
    pub k: f64,
    pub rho: f64,
    pub delta: f64,
}

impl MomentSummary {
    /// All four moments strictly positive and finite.
    pub fn is_valid(&self) -> bool {
        [self.mu, self.gamma0, self.k, self.rho]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0)
    }
}

/// Standard errors of a Monte Carlo [`MomentSummary`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentErrors {
    pub mu: f64,
    pub gamma0: f64,
    pub k: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub summary: MomentSummary,
    pub errors: Option<MomentErrors>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub paths: usize,
    pub n_per_path: usize,
    pub seed: u64,
    /// Lags used in the log-linear fit of the autocovariance.
    pub fit_lags: usize,
    pub substeps: usize,
    pub burn_in: usize,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            paths: 16,
            n_per_path: 200_000,
            seed: 0x5eed,
            fit_lags: 50,
            substeps: DEFAULT_SUBSTEPS,
            burn_in: DEFAULT_BURN_IN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BindingBackend {
    #[default]
    Analytic,
    MonteCarlo(MonteCarloConfig),
}

fn membership(theta: &CogarchParams, model: &LevyModel) -> Result<(f64, f64)> {
    theta.validate()?;
    let psi1 = psi(model, theta, 1.0)?;
    let psi2 = psi(model, theta, 2.0)?;
    if psi2 >= 0.0 {
        return Err(Error::OutsideM { psi2 });
    }
    if psi1 >= 0.0 {
        return Err(Error::NonStationary { psi1 });
    }
    Ok((-psi1, -psi2))
}

fn analytic(theta: &CogarchParams, model: &LevyModel, delta: f64) -> Result<MomentSummary> {
    let (a, b) = membership(theta, model)?;
    let m4 = levy_moment(model, 2)?;
    let beta = theta.beta;
    let m = beta / a;
    let big_m = 2.0 * beta * beta / (a * b);
    let excess = (1.0 + theta.phi * m4) * big_m - m * m;
    let ad = a * delta;
    let j = delta + (-ad).exp_m1() / a;
    let gamma0 = 6.0 * excess * j / a + 2.0 * m * m * delta * delta + m4 * big_m * delta;
    // γ(1) e^{ρ} = (c - m²)(1 - e^{-aΔ})(e^{aΔ} - 1)/a²
    let lag_one = excess * (-(-ad).exp_m1()) * ad.exp_m1() / (a * a);
    Ok(MomentSummary {
        mu: m * delta,
        gamma0,
        k: lag_one / gamma0,
        rho: ad,
        delta,
    })
}

/// `(μ, γ(0), k, ρ)` at `θ` with observation spacing `delta`.
pub fn moment_map(
    theta: &CogarchParams,
    model: &LevyModel,
    delta: f64,
    backend: &BindingBackend,
) -> Result<MomentSummary> {
    Ok(moment_estimate(theta, model, delta, backend)?.summary)
}

/// [`moment_map`] together with Monte Carlo standard errors when available.
pub fn moment_estimate(
    theta: &CogarchParams,
    model: &LevyModel,
    delta: f64,
    backend: &BindingBackend,
) -> Result<MomentEstimate> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(invalid(format!("delta must be > 0, got {delta}")));
    }
    match backend {
        BindingBackend::Analytic => Ok(MomentEstimate {
            summary: analytic(theta, model, delta)?,
            errors: None,
        }),
        BindingBackend::MonteCarlo(cfg) => monte_carlo(theta, model, delta, cfg),
    }
}

struct PathMoments {
    mean: f64,
    second: f64,
    /// `E[W_t W_{t+h}]` for `h = 1..=fit_lags`.
    cross: Vec<f64>,
}

/// Fit of `log γ(h) = log(γ(0)k) - ρh` over lags with positive `γ(h)`.
fn log_linear_fit(gamma: &[f64]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = gamma
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, g)| **g > 0.0)
        .map(|(h, g)| (h as f64, g.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx = pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let sxy = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>();
    let slope = sxy / sxx;
    Some((my - slope * mx, slope))
}

/// `(k, ρ)` from `γ(0..=L)` by [`log_linear_fit`].
pub fn fit_k_rho(gamma: &[f64]) -> Result<(f64, f64)> {
    let (intercept, slope) = log_linear_fit(gamma).ok_or_else(|| {
        Error::MomentShapeViolated("fewer than 3 positive autocovariances".into())
    })?;
    let rho = -slope;
    let k = intercept.exp() / gamma[0];
    if !(rho > 0.0 && k > 0.0) {
        return Err(Error::MomentShapeViolated(format!(
            "fitted k = {k}, rho = {rho}"
        )));
    }
    Ok((k, rho))
}

fn summarise(paths: &[&PathMoments], delta: f64) -> Result<MomentSummary> {
    let p = paths.len() as f64;
    let mean = paths.iter().map(|m| m.mean).sum::<f64>() / p;
    let second = paths.iter().map(|m| m.second).sum::<f64>() / p;
    let lags = paths[0].cross.len();
    let mut gamma = Vec::with_capacity(lags + 1);
    gamma.push(second - mean * mean);
    for h in 0..lags {
        let cross = paths.iter().map(|m| m.cross[h]).sum::<f64>() / p;
        gamma.push(cross - mean * mean);
    }
    let (k, rho) = fit_k_rho(&gamma)?;
    Ok(MomentSummary {
        mu: mean,
        gamma0: gamma[0],
        k,
        rho,
        delta,
    })
}

fn monte_carlo(
    theta: &CogarchParams,
    model: &LevyModel,
    delta: f64,
    cfg: &MonteCarloConfig,
) -> Result<MomentEstimate> {
    membership(theta, model)?;
    if cfg.paths == 0 || cfg.n_per_path <= cfg.fit_lags + 1 || cfg.fit_lags < 3 {
        return Err(invalid(format!("Monte Carlo binding config {cfg:?} is too small")));
    }
    if cfg.paths < 8 {
        log::warn!("only {} Monte Carlo paths; standard errors are unreliable", cfg.paths);
    }
    let per_path: Vec<PathMoments> = (0..cfg.paths)
        .into_par_iter()
        .map(|k| {
            let seed = StreamId::new(cfg.seed, Lane::Binding, 0, k as u32);
            let mut sim = SimConfig::new(delta, cfg.n_per_path, seed);
            sim.substeps = cfg.substeps;
            sim.burn_in = cfg.burn_in;
            sim.record = Recording::None;
            let (g, _) = simulate_returns(theta, model, &sim)?;
            let w = g.squares();
            let n = w.len() as f64;
            let cross = (1..=cfg.fit_lags)
                .map(|h| w[..w.len() - h].iter().zip(&w[h..]).map(|(a, b)| a * b).sum::<f64>() / (n - h as f64))
                .collect();
            Ok(PathMoments {
                mean: w.iter().sum::<f64>() / n,
                second: w.iter().map(|v| v * v).sum::<f64>() / n,
                cross,
            })
        })
        .collect::<Result<_>>()?;
    let all: Vec<&PathMoments> = per_path.iter().collect();
    let summary = summarise(&all, delta)?;
    let errors = if cfg.paths >= 2 {
        jackknife(&per_path, delta)
    } else {
        None
    };
    Ok(MomentEstimate { summary, errors })
}

fn jackknife(per_path: &[PathMoments], delta: f64) -> Option<MomentErrors> {
    let p = per_path.len();
    let mut leave_out = Vec::with_capacity(p);
    for skip in 0..p {
        let subset: Vec<&PathMoments> = per_path
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != skip)
            .map(|(_, m)| m)
            .collect();
        leave_out.push(summarise(&subset, delta).ok()?);
    }
    let se = |f: fn(&MomentSummary) -> f64| {
        let mean = leave_out.iter().map(f).sum::<f64>() / p as f64;
        let ss = leave_out.iter().map(|s| (f(s) - mean).powi(2)).sum::<f64>();
        ((p - 1) as f64 / p as f64 * ss).sqrt()
    };
    Some(MomentErrors {
        mu: se(|s| s.mu),
        gamma0: se(|s| s.gamma0),
        k: se(|s| s.k),
        rho: se(|s| s.rho),
    })
}

/// `γ(h) = γ(0) k e^{-hρ}`.
pub fn acvf_from_moments(ms: &MomentSummary, h: usize) -> f64 {
    ms.gamma0 * ms.k * (-(h as f64) * ms.rho).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KRho {
    pub k: f64,
    pub rho: f64,
    /// `ρ = 0`: no decay between lags one and two.
    pub on_boundary: bool,
}

/// `k = γ(1)²/(γ(0)γ(2))`, `ρ = log(γ(1)/γ(2))`.
pub fn recover_k_rho(gamma0: f64, gamma1: f64, gamma2: f64) -> Result<KRho> {
    if !(gamma0 > 0.0 && gamma1 > 0.0 && gamma2 > 0.0) {
        return Err(Error::OutsideMomentCone(format!(
            "gamma = ({gamma0}, {gamma1}, {gamma2})"
        )));
    }
    let rho = (gamma1 / gamma2).ln();
    Ok(KRho {
        k: gamma1 * gamma1 / (gamma0 * gamma2),
        rho,
        on_boundary: rho == 0.0,
    })
}

/// `π` from a moment summary: `(μ, Γ⁻¹(γ(1), …, γ(r)), γ(0))`.
pub fn binding_from_moments(ms: &MomentSummary, r: usize) -> Result<AuxParams> {
    if r < 2 {
        return Err(invalid(format!(
            "the binding function needs r >= 2 to be injective, got {r}"
        )));
    }
    let mut gamma = Vec::with_capacity(r + 1);
    gamma.push(ms.gamma0);
    gamma.extend((1..=r).map(|h| acvf_from_moments(ms, h)));
    let a = yule_walker_gamma(&gamma, r)?;
    Ok(AuxParams {
        mu: ms.mu,
        a,
        gamma0: ms.gamma0,
        r,
        clamped: false,
    })
}

pub fn binding(
    theta: &CogarchParams,
    model: &LevyModel,
    delta: f64,
    r: usize,
    backend: &BindingBackend,
) -> Result<AuxParams> {
    if r < 2 {
        return Err(invalid(format!(
            "the binding function needs r >= 2 to be injective, got {r}"
        )));
    }
    binding_from_moments(&moment_map(theta, model, delta, backend)?, r)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BindingGradient {
    /// `(r+2) × 3`, columns `∂/∂β, ∂/∂η, ∂/∂φ`.
    pub jacobian: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub rank_deficient: bool,
}

/// Central differences of [`binding`] with steps `1e-5 · max(1, |θ_i|)`.
pub fn gradient_binding(
    theta: &CogarchParams,
    model: &LevyModel,
    delta: f64,
    r: usize,
    backend: &BindingBackend,
) -> Result<BindingGradient> {
    gradient_binding_with_step(theta, model, delta, r, backend, 1e-5)
}

/// [`gradient_binding`] with steps `rel_step · max(1, |θ_i|)`.
pub fn gradient_binding_with_step(
    theta: &CogarchParams,
    model: &LevyModel,
    delta: f64,
    r: usize,
    backend: &BindingBackend,
    rel_step: f64,
) -> Result<BindingGradient> {
    let x = theta.to_array();
    let mut jacobian = DMatrix::zeros(r + 2, 3);
    for i in 0..3 {
        let h = rel_step * x[i].abs().max(1.0);
        let mut up = x;
        let mut down = x;
        up[i] += h;
        down[i] -= h;
        let fu = binding(&CogarchParams::from_array(up), model, delta, r, backend)?.to_vector();
        let fd = binding(&CogarchParams::from_array(down), model, delta, r, backend)?.to_vector();
        jacobian.set_column(i, &((fu - fd) / (2.0 * h)));
    }
    let singular_values = singular_values(&jacobian);
    let largest = singular_values[0];
    let smallest = *singular_values.last().unwrap();
    let rank_deficient = !(smallest >= 1e-8 * largest);
    if rank_deficient {
        log::warn!("binding gradient is rank deficient: singular values {singular_values:?}");
    }
    Ok(BindingGradient {
        jacobian,
        singular_values,
        rank_deficient,
    })
}
