//! Method of moments: match `(μ, γ(0), k, ρ)` of the squared returns.

use super::{require_r, Diagnostics, EstimationResult, Method, ParameterBox};
use crate::aux_ar::sample_acvf;
use crate::binding::{fit_k_rho, moment_map, BindingBackend, MomentSummary};
use crate::cogarch::ReturnsSeries;
use crate::error::{Error, Result};
use crate::levy::{levy_moment, CogarchParams, LevyModel};
use crate::optimize::{nelder_mead_restarted, NelderMeadOptions};

/// Empirical `(μ̂, γ̂(0))` plus `(k̂, ρ̂)` from a log-linear fit over lags
/// `1..=r`.
pub fn mm_summary(w: &[f64], r: usize, delta: f64) -> Result<MomentSummary> {
    require_r(r)?;
    if w.len() <= 2 * r {
        return Err(Error::InsufficientData {
            needed: 2 * r,
            got: w.len(),
        });
    }
    let acvf = sample_acvf(w, r)?;
    let (k, rho) = fit_k_rho(&acvf.gamma)?;
    Ok(MomentSummary {
        mu: acvf.mean,
        gamma0: acvf.gamma[0],
        k,
        rho,
        delta,
    })
}

/// Closed-form inversion of `(μ, k γ(0), ρ)`; `None` if it leaves the
/// parameter space.
pub fn initial_guess(ms: &MomentSummary, model: &LevyModel) -> Option<CogarchParams> {
    let m2 = levy_moment(model, 1).ok()?;
    let m4 = levy_moment(model, 2).ok()?;
    let delta = ms.delta;
    let a = ms.rho / delta;
    let m = ms.mu / delta;
    let beta = m * a;
    let ad = a * delta;
    let d = -(-ad).exp_m1() * ad.exp_m1();
    // c - m² from γ(1)e^{ρ}; then c/m² = 2a(1 + φm₄)/(2a - φ²m₄)
    let excess = ms.k * ms.gamma0 * a * a / d;
    let q = (excess + m * m) / (m * m);
    let disc = 4.0 * a * a * m4 * m4 + 8.0 * a * q * m4 * (q - 1.0);
    let phi = (-2.0 * a * m4 + disc.sqrt()) / (2.0 * q * m4);
    let eta = a + phi * m2;
    let theta = CogarchParams::new(beta, eta, phi).ok()?;
    Some(theta)
}

fn relative_distance(target: &MomentSummary, theta: &CogarchParams, model: &LevyModel) -> f64 {
    match moment_map(theta, model, target.delta, &BindingBackend::Analytic) {
        Ok(ms) => [
            (target.mu, ms.mu),
            (target.gamma0, ms.gamma0),
            (target.k, ms.k),
            (target.rho, ms.rho),
        ]
        .iter()
        .map(|(x, y)| ((x - y) / x).powi(2))
        .sum(),
        Err(_) => f64::INFINITY,
    }
}

/// Minimum relative distance between `ms` and the model moments over `domain`.
pub fn mm_from_summary(
    ms: &MomentSummary,
    model: &LevyModel,
    domain: &ParameterBox,
) -> Result<EstimationResult> {
    if !ms.is_valid() {
        return Err(Error::MomentShapeViolated(format!("{ms:?}")));
    }
    let objective = |x: &[f64]| relative_distance(ms, &CogarchParams::from_array([x[0], x[1], x[2]]), model);
    let mut note = None;
    let start = match initial_guess(ms, model) {
        Some(t) if objective(&domain.project(&t).to_array()).is_finite() => domain.project(&t),
        _ => {
            note = Some("closed-form start infeasible; started at the domain centre".to_string());
            domain.centre()
        }
    };
    let opts = NelderMeadOptions::default();
    let res = nelder_mead_restarted(
        objective,
        &start.to_array(),
        &domain.lower.to_array(),
        &domain.upper.to_array(),
        &opts,
    );
    if !res.fx.is_finite() {
        return Err(Error::MomentShapeViolated(
            "no parameter in the domain reproduces the moments".into(),
        ));
    }
    let diagnostics = Diagnostics {
        evaluations: res.evals,
        iterations: res.iterations,
        converged: res.converged,
        note,
        ..Default::default()
    };
    Ok(EstimationResult::new(
        CogarchParams::from_array([res.x[0], res.x[1], res.x[2]]),
        Method::Mm,
        res.fx,
        model,
        diagnostics,
    ))
}

pub fn mm_estimate(
    returns: &ReturnsSeries,
    r: usize,
    model: &LevyModel,
    domain: &ParameterBox,
) -> Result<EstimationResult> {
    let ms = mm_summary(&returns.squares(), r, returns.delta)?;
    mm_from_summary(&ms, model, domain)
}
