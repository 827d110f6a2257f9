//! COGARCH(1,1) simulation on an equally spaced observation grid.
//!
//! Each observation period of length `Δ` is split into `substeps` inner steps
//! of length `δ`. Over one inner step the volatility first decays exactly,
//!
//! ```text
//! σ²_{t+δ-} = β/η + (σ²_t - β/η) e^{-ηδ},
//! ```
//!
//! then the aggregated Lévy increment is applied as a single jump,
//! `σ²_{t+δ} = σ²_{t+δ-} (1 + φ (ΔL)²)`. The return picks up
//! `σ_t · ΔB + σ_{t+δ-} · ΔL_jump`, i.e. the left-limit volatility.

use crate::error::{invalid, Error, Result};
use crate::levy::{levy_moment, psi, CogarchParams, Increment, IncrementSampler, LevyModel};
use crate::rng::StreamId;
use serde::{Deserialize, Serialize};

pub const DEFAULT_SUBSTEPS: usize = 20;
pub const DEFAULT_BURN_IN: usize = 500;

/// Which parts of the volatility path are kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recording {
    None,
    /// `σ²` at the observation times `iΔ`.
    #[default]
    ObservationGrid,
    /// `σ²` after every inner step plus the list of jumps.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub delta: f64,
    pub n: usize,
    pub substeps: usize,
    pub burn_in: usize,
    pub seed: StreamId,
    pub record: Recording,
}

impl SimConfig {
    pub fn new(delta: f64, n: usize, seed: StreamId) -> Self {
        Self {
            delta,
            n,
            substeps: DEFAULT_SUBSTEPS,
            burn_in: DEFAULT_BURN_IN,
            seed,
            record: Recording::ObservationGrid,
        }
    }

    pub fn inner_step(&self) -> f64 {
        self.delta / self.substeps as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(invalid(format!("delta must be > 0, got {}", self.delta)));
        }
        if self.n == 0 {
            return Err(invalid("n must be >= 1"));
        }
        if self.substeps == 0 {
            return Err(invalid("substeps must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnsSeries {
    pub values: Vec<f64>,
    pub delta: f64,
    pub theta_used: CogarchParams,
    pub seed_used: Option<StreamId>,
}

impl ReturnsSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn squares(&self) -> Vec<f64> {
        self.values.iter().map(|g| g * g).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct VolatilityPath {
    pub times: Vec<f64>,
    pub sigma2: Vec<f64>,
    /// `(time, ΔL)` for every non-zero jump increment; empty unless the path
    /// was recorded with [`Recording::Full`].
    pub jumps: Vec<(f64, f64)>,
    pub jumps_recorded: bool,
}

/// `∇_{(η, φ)} σ²_t` along the recorded times.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VolatilityGradient {
    pub times: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub d_eta: Vec<f64>,
    pub d_phi: Vec<f64>,
}

/// Output of [`simulate_from_increments`].
#[derive(Debug, Clone, Default)]
pub struct EngineOutput {
    pub returns: Vec<f64>,
    pub path: VolatilityPath,
    pub gradient: Option<VolatilityGradient>,
    pub final_sigma2: f64,
}

/// Initial state of the volatility recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StartState {
    pub sigma2: f64,
    pub d_eta: f64,
    pub d_phi: f64,
}

impl StartState {
    pub fn fixed(sigma2: f64) -> Self {
        Self {
            sigma2,
            d_eta: 0.0,
            d_phi: 0.0,
        }
    }

    /// Starts at the stationary mean `β/|Ψ(1)|`, with its `(η, φ)` derivative.
    pub fn stationary_mean(theta: &CogarchParams, model: &LevyModel) -> Result<Self> {
        let psi1 = psi(model, theta, 1.0)?;
        if psi1 >= 0.0 {
            return Err(Error::NonStationary { psi1 });
        }
        let a = -psi1;
        let m2 = levy_moment(model, 1)?;
        Ok(Self {
            sigma2: theta.beta / a,
            d_eta: -theta.beta / (a * a),
            d_phi: theta.beta * m2 / (a * a),
        })
    }
}

/// Layout of a path for [`simulate_from_increments`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub delta: f64,
    pub substeps: usize,
    /// Observation periods simulated and discarded first.
    pub burn_in: usize,
    /// Observation periods returned.
    pub n: usize,
}

impl Schedule {
    pub fn total_steps(&self) -> usize {
        (self.burn_in + self.n) * self.substeps
    }
}

/// Runs the volatility recursion on a given stream of inner-step increments.
///
/// The iterator must yield at least `schedule.total_steps()` items. Times are
/// measured from the end of the burn-in.
pub fn simulate_from_increments<I>(
    theta: &CogarchParams,
    start: StartState,
    increments: I,
    schedule: Schedule,
    record: Recording,
    with_gradient: bool,
) -> Result<EngineOutput>
where
    I: IntoIterator<Item = Increment>,
{
    if schedule.substeps == 0 || !(schedule.delta > 0.0) {
        return Err(invalid("schedule needs delta > 0 and substeps >= 1"));
    }
    if !(start.sigma2 > 0.0) {
        return Err(invalid(format!("initial sigma2 must be > 0, got {}", start.sigma2)));
    }
    let step = schedule.delta / schedule.substeps as f64;
    let CogarchParams { beta, eta, phi } = *theta;
    let level = beta / eta;
    let decay = (-eta * step).exp();
    // ∂level/∂η and ∂decay/∂η
    let d_level = -beta / (eta * eta);
    let d_decay = -step * decay;

    let mut s = start.sigma2;
    let mut ds_eta = start.d_eta;
    let mut ds_phi = start.d_phi;

    let mut out = EngineOutput {
        returns: Vec::with_capacity(schedule.n),
        ..Default::default()
    };
    out.path.jumps_recorded = record == Recording::Full;
    let mut grad = VolatilityGradient::default();

    let mut iter = increments.into_iter();
    let burn_steps = schedule.burn_in * schedule.substeps;
    let mut acc = 0.0;
    for j in 0..schedule.total_steps() {
        let inc = iter
            .next()
            .ok_or_else(|| invalid("increment stream ended early"))?;
        let s_minus = level + (s - level) * decay;
        if with_gradient {
            ds_eta = d_level + (ds_eta - d_level) * decay + (s - level) * d_decay;
            ds_phi *= decay;
        }
        acc += s.sqrt() * inc.continuous + s_minus.sqrt() * inc.jump;
        let x2 = inc.jump * inc.jump;
        let growth = 1.0 + phi * x2;
        if with_gradient {
            ds_eta *= growth;
            ds_phi = ds_phi * growth + s_minus * x2;
        }
        s = s_minus * growth;
        debug_assert!(s > 0.0);

        let done = j + 1;
        if done < burn_steps {
            continue;
        }
        if done == burn_steps {
            acc = 0.0;
            if record != Recording::None {
                out.path.times.push(0.0);
                out.path.sigma2.push(s);
            }
            if with_gradient {
                push_grad(&mut grad, 0.0, s, ds_eta, ds_phi);
            }
            continue;
        }
        let local = done - burn_steps;
        let t = local as f64 * step;
        let at_obs = local % schedule.substeps == 0;
        if record == Recording::Full {
            out.path.times.push(t);
            out.path.sigma2.push(s);
            if inc.jump != 0.0 {
                out.path.jumps.push((t, inc.jump));
            }
        } else if record == Recording::ObservationGrid && at_obs {
            out.path.times.push(t);
            out.path.sigma2.push(s);
        }
        if with_gradient && (record == Recording::Full || at_obs) {
            push_grad(&mut grad, t, s, ds_eta, ds_phi);
        }
        if at_obs {
            out.returns.push(acc);
            acc = 0.0;
        }
    }
    if burn_steps == 0 {
        // the start state itself sits at t = 0
        if record != Recording::None {
            out.path.times.insert(0, 0.0);
            out.path.sigma2.insert(0, start.sigma2);
        }
        if with_gradient {
            grad.times.insert(0, 0.0);
            grad.sigma2.insert(0, start.sigma2);
            grad.d_eta.insert(0, start.d_eta);
            grad.d_phi.insert(0, start.d_phi);
        }
    }
    out.final_sigma2 = s;
    if with_gradient {
        out.gradient = Some(grad);
    }
    Ok(out)
}

fn push_grad(g: &mut VolatilityGradient, t: f64, s: f64, de: f64, dp: f64) {
    g.times.push(t);
    g.sigma2.push(s);
    g.d_eta.push(de);
    g.d_phi.push(dp);
}

fn check_model(theta: &CogarchParams, model: &LevyModel, cfg: &SimConfig) -> Result<()> {
    theta.validate()?;
    model.validate()?;
    cfg.validate()?;
    if model.has_jumps() && cfg.inner_step() * theta.eta >= 1.0 {
        log::warn!(
            "eta * inner step = {} >= 1; the exact decay is still used",
            cfg.inner_step() * theta.eta
        );
    }
    Ok(())
}

fn run(
    theta: &CogarchParams,
    model: &LevyModel,
    cfg: &SimConfig,
    with_gradient: bool,
) -> Result<EngineOutput> {
    check_model(theta, model, cfg)?;
    let start = StartState::stationary_mean(theta, model)?;
    let sampler = IncrementSampler::new(model, cfg.inner_step())?;
    let mut rng = cfg.seed.rng();
    let schedule = Schedule {
        delta: cfg.delta,
        substeps: cfg.substeps,
        burn_in: cfg.burn_in,
        n: cfg.n,
    };
    let increments = std::iter::repeat_with(move || sampler.sample(&mut rng));
    simulate_from_increments(theta, start, increments, schedule, cfg.record, with_gradient)
}

/// Simulates `n` returns after a burn-in started from the stationary mean of
/// `σ²`.
pub fn simulate_returns(
    theta: &CogarchParams,
    model: &LevyModel,
    cfg: &SimConfig,
) -> Result<(ReturnsSeries, VolatilityPath)> {
    let out = run(theta, model, cfg, false)?;
    Ok((
        ReturnsSeries {
            values: out.returns,
            delta: cfg.delta,
            theta_used: *theta,
            seed_used: Some(cfg.seed),
        },
        out.path,
    ))
}

/// Pathwise `∇_{(η, φ)} σ²_t`, on the same grid that `cfg.record` selects
/// (observation times unless `Full`).
pub fn pathwise_gradient(
    theta: &CogarchParams,
    model: &LevyModel,
    cfg: &SimConfig,
) -> Result<VolatilityGradient> {
    let out = run(theta, model, cfg, true)?;
    Ok(out.gradient.expect("gradient requested"))
}

/// `∂G_i/∂β = G_i/(2β)`.
pub fn beta_gradient(series: &ReturnsSeries) -> Vec<f64> {
    let b = series.theta_used.beta;
    series.values.iter().map(|g| g / (2.0 * b)).collect()
}

/// Turns a series simulated at `β = 1` into the one at `β`, which is exact
/// because `σ²` is linear in `β` when started at `β/|Ψ(1)|`.
pub fn rescale_beta(base: &ReturnsSeries, beta: f64) -> Result<ReturnsSeries> {
    if base.theta_used.beta != 1.0 {
        return Err(invalid(format!(
            "rescale_beta needs a series simulated at beta = 1, got {}",
            base.theta_used.beta
        )));
    }
    if !(beta.is_finite() && beta > 0.0) {
        return Err(invalid(format!("beta must be > 0, got {beta}")));
    }
    let scale = beta.sqrt();
    Ok(ReturnsSeries {
        values: base.values.iter().map(|g| g * scale).collect(),
        theta_used: base.theta_used.with_beta(beta),
        ..base.clone()
    })
}

/// The step function `K_s(φ) = Σ_{0<u≤s} (ΔL_u)²/(1 + φ(ΔL_u)²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KProcess {
    /// Jump times, increasing.
    pub times: Vec<f64>,
    /// `K` just after each jump.
    pub values: Vec<f64>,
}

impl KProcess {
    pub fn at(&self, s: f64) -> f64 {
        let idx = self.times.partition_point(|&t| t <= s);
        if idx == 0 {
            0.0
        } else {
            self.values[idx - 1]
        }
    }
}

pub fn k_process(path: &VolatilityPath, phi: f64) -> Result<KProcess> {
    if !(phi.is_finite() && phi > 0.0) {
        return Err(invalid(format!("phi must be > 0, got {phi}")));
    }
    if !path.jumps_recorded {
        return Err(invalid("path was simulated without recording jumps"));
    }
    let mut total = 0.0;
    let mut times = Vec::with_capacity(path.jumps.len());
    let mut values = Vec::with_capacity(path.jumps.len());
    for &(t, x) in &path.jumps {
        let x2 = x * x;
        total += x2 / (1.0 + phi * x2);
        times.push(t);
        values.push(total);
    }
    Ok(KProcess { times, values })
}
