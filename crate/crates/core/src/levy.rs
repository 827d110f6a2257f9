//! Driving Lévy processes.
//!
//! A [`LevyModel`] is a zero-mean, unit-variance, symmetric Lévy process made
//! of an optional Brownian part with variance `c_L` and a jump part. The jump
//! part is either a Variance Gamma process, with Lévy density
//!
//! ```text
//! ν(dx) = C/|x| · exp(-√(2C)|x|) dx,   x ≠ 0
//! ```
//!
//! scaled by `√(1 - c_L)` so that `Var L_1 = 1`, or a compound Poisson process
//! with a symmetric jump law.

use crate::error::{invalid, Error, Result};
use crate::quadrature;
use crate::rng::StreamId;
use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

/// Absolute tolerance of the quadrature route for `Ψ_θ(p)`.
pub const PSI_QUADRATURE_TOL: f64 = 1e-10;

const VARIANCE_TOL: f64 = 1e-9;

/// COGARCH(1,1) parameter `θ = (β, η, φ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CogarchParams {
    pub beta: f64,
    pub eta: f64,
    pub phi: f64,
}

impl CogarchParams {
    pub fn new(beta: f64, eta: f64, phi: f64) -> Result<Self> {
        let theta = Self { beta, eta, phi };
        theta.validate()?;
        Ok(theta)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("beta", self.beta), ("eta", self.eta), ("phi", self.phi)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.beta, self.eta, self.phi]
    }

    /// Builds from an array without validation.
    pub fn from_array(x: [f64; 3]) -> Self {
        Self {
            beta: x[0],
            eta: x[1],
            phi: x[2],
        }
    }

    pub fn with_beta(self, beta: f64) -> Self {
        Self { beta, ..self }
    }
}

/// Symmetric law of a single compound Poisson jump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum JumpLaw {
    /// `±size` with probability ½ each.
    TwoPoint { size: f64 },
    Normal { sd: f64 },
    /// Scaled Student t; moments of order `>= dof` do not exist.
    StudentT { dof: f64, scale: f64 },
}

impl JumpLaw {
    /// `E|J|^{2k}`.
    pub fn even_moment(&self, k: u32) -> Result<f64> {
        match *self {
            JumpLaw::TwoPoint { size } => Ok(size.abs().powi(2 * k as i32)),
            JumpLaw::Normal { sd } => {
                let double_factorial: f64 = (1..=k).map(|j| (2 * j - 1) as f64).product();
                Ok(sd.powi(2 * k as i32) * double_factorial)
            }
            JumpLaw::StudentT { dof, scale } => {
                let order = 2.0 * k as f64;
                if dof <= order {
                    return Err(Error::MomentUndefined(format!(
                        "Student t jumps with {dof} degrees of freedom have no moment of order {order}"
                    )));
                }
                let kf = k as f64;
                let log_m = kf * dof.ln() + ln_gamma(kf + 0.5) + ln_gamma(0.5 * dof - kf)
                    - 0.5 * std::f64::consts::PI.ln()
                    - ln_gamma(0.5 * dof);
                Ok(scale.powi(2 * k as i32) * log_m.exp())
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            JumpLaw::TwoPoint { size } => size.is_finite() && size != 0.0,
            JumpLaw::Normal { sd } => sd.is_finite() && sd > 0.0,
            JumpLaw::StudentT { dof, scale } => dof > 0.0 && scale.is_finite() && scale > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("invalid jump law {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LevyKind {
    VarianceGamma { c: f64 },
    CompoundPoisson { rate: f64, jump_law: JumpLaw },
    PureBrownian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevyModel {
    pub kind: LevyKind,
    /// Variance `c_L` of the Brownian component.
    #[serde(default)]
    pub brownian_variance: f64,
}

impl LevyModel {
    /// Pure-jump Variance Gamma process with parameter `C`.
    pub fn variance_gamma(c: f64) -> Result<Self> {
        Self::variance_gamma_with_brownian(c, 0.0)
    }

    /// Variance Gamma jumps scaled by `√(1 - c_L)` plus a Brownian part with
    /// variance `c_L`.
    pub fn variance_gamma_with_brownian(c: f64, brownian_variance: f64) -> Result<Self> {
        let model = Self {
            kind: LevyKind::VarianceGamma { c },
            brownian_variance,
        };
        model.validate()?;
        Ok(model)
    }

    /// Compound Poisson jumps; `rate · E J² + c_L` must equal 1.
    pub fn compound_poisson(rate: f64, jump_law: JumpLaw, brownian_variance: f64) -> Result<Self> {
        let model = Self {
            kind: LevyKind::CompoundPoisson { rate, jump_law },
            brownian_variance,
        };
        model.validate()?;
        Ok(model)
    }

    /// Standard Brownian motion. It has no jumps, so the volatility is
    /// deterministic; it violates `c_L < 1` and is only useful as a fixture.
    pub fn pure_brownian() -> Self {
        Self {
            kind: LevyKind::PureBrownian,
            brownian_variance: 1.0,
        }
    }

    pub fn has_jumps(&self) -> bool {
        !matches!(self.kind, LevyKind::PureBrownian)
    }

    /// Checks parameter ranges and `Var L_1 = 1`.
    pub fn validate(&self) -> Result<()> {
        let c_l = self.brownian_variance;
        match self.kind {
            LevyKind::VarianceGamma { c } => {
                if !(c.is_finite() && c > 0.0) {
                    return Err(invalid(format!("Variance Gamma C must be > 0, got {c}")));
                }
                if !(0.0..1.0).contains(&c_l) {
                    return Err(invalid(format!("c_L must lie in [0, 1), got {c_l}")));
                }
            }
            LevyKind::CompoundPoisson { rate, jump_law } => {
                if !(rate.is_finite() && rate > 0.0) {
                    return Err(invalid(format!("jump rate must be > 0, got {rate}")));
                }
                jump_law.validate()?;
                if !(0.0..1.0).contains(&c_l) {
                    return Err(invalid(format!("c_L must lie in [0, 1), got {c_l}")));
                }
            }
            LevyKind::PureBrownian => {}
        }
        let variance = c_l + levy_moment(self, 1)?;
        if (variance - 1.0).abs() > VARIANCE_TOL {
            return Err(invalid(format!("Var L_1 must be 1, got {variance}")));
        }
        Ok(())
    }
}

/// `m_{2k} = ∫ x^{2k} ν_L(dx)`, the even jump moments.
///
/// For Variance Gamma, `m_{2k} = (1 - c_L)^k (2k-1)! / (2C)^{k-1}`.
pub fn levy_moment(model: &LevyModel, k: u32) -> Result<f64> {
    if k == 0 {
        return Err(invalid("levy_moment needs k >= 1"));
    }
    match model.kind {
        LevyKind::VarianceGamma { c } => {
            let scale2 = 1.0 - model.brownian_variance;
            let factorial: f64 = (1..2 * k).map(|j| j as f64).product();
            Ok(scale2.powi(k as i32) * factorial / (2.0 * c).powi(k as i32 - 1))
        }
        LevyKind::CompoundPoisson { rate, jump_law } => Ok(rate * jump_law.even_moment(k)?),
        LevyKind::PureBrownian => Ok(0.0),
    }
}

/// Laplace exponent `Ψ_θ(p) = -pη + ∫((1 + φx²)^p - 1) ν_L(dx)`.
///
/// Integer `p` uses the binomial expansion over [`levy_moment`]; other `p` are
/// integrated numerically, which is only available for Variance Gamma jumps.
pub fn psi(model: &LevyModel, theta: &CogarchParams, p: f64) -> Result<f64> {
    if !(p.is_finite() && p >= 0.0) {
        return Err(invalid(format!("psi needs p >= 0, got {p}")));
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    if p.fract() == 0.0 && p <= 64.0 {
        return psi_binomial(model, theta, p as u32);
    }
    match model.kind {
        LevyKind::VarianceGamma { .. } => psi_quadrature(model, theta, p),
        LevyKind::PureBrownian => Ok(-p * theta.eta),
        LevyKind::CompoundPoisson { .. } => Err(Error::Unsupported(format!(
            "non-integer p = {p} is only supported for Variance Gamma jumps"
        ))),
    }
}

fn psi_binomial(model: &LevyModel, theta: &CogarchParams, p: u32) -> Result<f64> {
    let mut sum = -(p as f64) * theta.eta;
    let mut binom = 1.0;
    for k in 1..=p {
        binom *= (p - k + 1) as f64 / k as f64;
        sum += binom * theta.phi.powi(k as i32) * levy_moment(model, k)?;
    }
    Ok(sum)
}

/// `Ψ_θ(p)` by adaptive quadrature against the Variance Gamma density.
pub fn psi_quadrature(model: &LevyModel, theta: &CogarchParams, p: f64) -> Result<f64> {
    let LevyKind::VarianceGamma { c } = model.kind else {
        return Err(Error::Unsupported(
            "quadrature of Psi needs a Variance Gamma model".into(),
        ));
    };
    let rate = (2.0 * c).sqrt();
    let scale2 = 1.0 - model.brownian_variance;
    let phi = theta.phi * scale2;
    // symmetric density: twice the positive half-line
    let integrand = |v: f64| {
        if v <= 0.0 {
            return 0.0;
        }
        let growth = (p * (phi * v * v).ln_1p()).exp_m1();
        2.0 * c * growth / v * (-rate * v).exp()
    };
    let integral = quadrature::integrate_half_line(integrand, PSI_QUADRATURE_TOL);
    if !integral.value.is_finite() {
        return Err(Error::MomentUndefined(format!("Psi({p}) diverges")));
    }
    Ok(-p * theta.eta + integral.value)
}

/// One inner-step increment of `L`, split into its Brownian and jump parts.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Increment {
    pub continuous: f64,
    pub jump: f64,
}

impl Increment {
    pub fn total(&self) -> f64 {
        self.continuous + self.jump
    }
}

#[derive(Debug, Clone)]
enum JumpSampler {
    VarianceGamma { leg: Gamma<f64>, scale: f64 },
    CompoundPoisson { count: Poisson<f64>, law: JumpLaw },
    None,
}

/// Draws i.i.d. increments of `L` over a fixed step.
#[derive(Debug, Clone)]
pub struct IncrementSampler {
    jumps: JumpSampler,
    brownian_sd: f64,
}

impl IncrementSampler {
    pub fn new(model: &LevyModel, step: f64) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(invalid(format!("increment step must be > 0, got {step}")));
        }
        let jumps = match model.kind {
            LevyKind::VarianceGamma { c } => JumpSampler::VarianceGamma {
                // shape Cδ and rate √(2C) per leg
                leg: Gamma::new(c * step, 1.0 / (2.0 * c).sqrt())
                    .map_err(|e| invalid(format!("gamma leg: {e}")))?,
                scale: (1.0 - model.brownian_variance).sqrt(),
            },
            LevyKind::CompoundPoisson { rate, jump_law } => JumpSampler::CompoundPoisson {
                count: Poisson::new(rate * step)
                    .map_err(|e| invalid(format!("poisson count: {e}")))?,
                law: jump_law,
            },
            LevyKind::PureBrownian => JumpSampler::None,
        };
        Ok(Self {
            jumps,
            brownian_sd: (model.brownian_variance * step).sqrt(),
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Increment {
        let jump = match &self.jumps {
            JumpSampler::VarianceGamma { leg, scale } => {
                let up = leg.sample(rng);
                let down = leg.sample(rng);
                scale * (up - down)
            }
            JumpSampler::CompoundPoisson { count, law } => {
                let n = count.sample(rng) as u64;
                (0..n).map(|_| sample_jump(law, rng)).sum()
            }
            JumpSampler::None => 0.0,
        };
        let continuous = if self.brownian_sd > 0.0 {
            let z: f64 = rng.sample(StandardNormal);
            self.brownian_sd * z
        } else {
            0.0
        };
        Increment { continuous, jump }
    }
}

fn sample_jump<R: Rng + ?Sized>(law: &JumpLaw, rng: &mut R) -> f64 {
    match *law {
        JumpLaw::TwoPoint { size } => {
            if rng.random::<bool>() {
                size
            } else {
                -size
            }
        }
        JumpLaw::Normal { sd } => {
            let z: f64 = rng.sample(StandardNormal);
            sd * z
        }
        JumpLaw::StudentT { dof, scale } => {
            // dof was validated positive
            scale * StudentT::new(dof).expect("positive dof").sample(rng)
        }
    }
}

/// `count` i.i.d. increments of `L` over steps of length `delta`, drawn from
/// the stream `seed`.
pub fn sample_increments(
    model: &LevyModel,
    delta: f64,
    count: usize,
    seed: StreamId,
) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(invalid("count must be >= 1"));
    }
    let sampler = IncrementSampler::new(model, delta)?;
    let mut rng = seed.rng();
    Ok((0..count).map(|_| sampler.sample(&mut rng).total()).collect())
}
