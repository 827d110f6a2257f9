//! Indirect inference through the binding function (IIE*).

use super::{Diagnostics, EstimationResult, Method, ParameterBox, WeightMatrix};
use crate::aux_ar::AuxParams;
use crate::binding::{binding, BindingBackend};
use crate::error::{invalid, Error, Result};
use crate::levy::{CogarchParams, LevyModel};
use crate::optimize::{nelder_mead_restarted, NelderMeadOptions};
use nalgebra::DVector;

/// `(π̂ - π_θ)ᵀ Ω (π̂ - π_θ)`, or `+∞` where `π_θ` is undefined.
pub fn iie_star_objective(
    pi_hat: &DVector<f64>,
    theta: &CogarchParams,
    model: &LevyModel,
    delta: f64,
    omega: &WeightMatrix,
    backend: &BindingBackend,
) -> f64 {
    let r = pi_hat.len() - 2;
    match binding(theta, model, delta, r, backend) {
        Ok(pi) => omega.quad_form(&(pi_hat - pi.to_vector())),
        Err(_) => f64::INFINITY,
    }
}

/// Minimises the IIE* objective over `domain` by a restarted Nelder–Mead
/// search from `start` (the MM estimate in the replication study).
pub fn iie_star(
    pi_hat: &AuxParams,
    model: &LevyModel,
    delta: f64,
    omega: &WeightMatrix,
    domain: &ParameterBox,
    backend: &BindingBackend,
    start: &CogarchParams,
) -> Result<EstimationResult> {
    if omega.dim() != pi_hat.r + 2 {
        return Err(invalid(format!(
            "weight matrix is {0}x{0}, auxiliary vector has {1} entries",
            omega.dim(),
            pi_hat.r + 2
        )));
    }
    let target = pi_hat.to_vector();
    let objective = |x: &[f64]| {
        let theta = CogarchParams::from_array([x[0], x[1], x[2]]);
        iie_star_objective(&target, &theta, model, delta, omega, backend)
    };
    let mut note = None;
    let mut x0 = domain.project(start);
    if !objective(&x0.to_array()).is_finite() {
        note = Some("start outside M; started at the domain centre".to_string());
        x0 = domain.centre();
    }
    let res = nelder_mead_restarted(
        objective,
        &x0.to_array(),
        &domain.lower.to_array(),
        &domain.upper.to_array(),
        &NelderMeadOptions::default(),
    );
    if !res.fx.is_finite() {
        return Err(Error::OutsideM { psi2: f64::NAN });
    }
    if !res.converged {
        log::warn!("IIE* search stopped after {} evaluations without converging", res.evals);
    }
    let diagnostics = Diagnostics {
        evaluations: res.evals,
        iterations: res.iterations,
        converged: res.converged,
        clamped: pi_hat.clamped,
        note,
        ..Default::default()
    };
    Ok(EstimationResult::new(
        CogarchParams::from_array([res.x[0], res.x[1], res.x[2]]),
        Method::IieStar,
        res.fx,
        model,
        diagnostics,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vg() -> LevyModel {
        LevyModel::variance_gamma(1.0).unwrap()
    }

    fn theta0() -> CogarchParams {
        CogarchParams::new(0.04, 0.053, 0.038).unwrap()
    }

    #[test]
    fn exact_binding_recovers_truth() {
        let r = 10;
        let pi = binding(&theta0(), &vg(), 1.0, r, &BindingBackend::Analytic).unwrap();
        let domain = ParameterBox::around(&theta0(), [0.002; 3]).unwrap();
        let start = CogarchParams::new(0.05, 0.06, 0.04).unwrap();
        let est = iie_star(
            &pi,
            &vg(),
            1.0,
            &WeightMatrix::identity(r + 2),
            &domain,
            &BindingBackend::Analytic,
            &start,
        )
        .unwrap();
        assert!(est.objective <= 1e-16, "{}", est.objective);
        for (g, t) in est.theta_hat.to_array().iter().zip(theta0().to_array()) {
            assert!((g / t - 1.0).abs() < 1e-5, "{:?}", est.theta_hat);
        }
        let at_start = iie_star_objective(
            &pi.to_vector(),
            &start,
            &vg(),
            1.0,
            &WeightMatrix::identity(r + 2),
            &BindingBackend::Analytic,
        );
        assert!(est.objective <= at_start);
    }

    #[test]
    fn outside_m_scores_infinity() {
        let pi = binding(&theta0(), &vg(), 1.0, 4, &BindingBackend::Analytic).unwrap();
        let bad = CogarchParams::new(0.04, 0.02, 0.1).unwrap();
        let v = iie_star_objective(
            &pi.to_vector(),
            &bad,
            &vg(),
            1.0,
            &WeightMatrix::identity(6),
            &BindingBackend::Analytic,
        );
        assert!(v.is_infinite());
    }

    #[test]
    fn dimension_mismatch() {
        let pi = binding(&theta0(), &vg(), 1.0, 4, &BindingBackend::Analytic).unwrap();
        let domain = ParameterBox::around(&theta0(), [0.002; 3]).unwrap();
        assert!(iie_star(
            &pi,
            &vg(),
            1.0,
            &WeightMatrix::identity(5),
            &domain,
            &BindingBackend::Analytic,
            &theta0()
        )
        .is_err());
    }
}
