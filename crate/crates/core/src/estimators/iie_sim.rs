//! Simulation-based indirect inference on a grid with common random numbers.
//!
//! `K` increment paths are drawn once and reused for every grid point, so the
//! simulated objective is a deterministic function of `θ`. Paths are run at
//! `β = 1` for each `(η, φ)`; the auxiliary estimate at any other `β` follows
//! by scaling `μ̂` with `β` and `γ̂(0)` with `β²`.

use super::{require_r, Diagnostics, EstimationResult, Method, WeightMatrix};
use crate::aux_ar::{aux_estimate, clamp_roots, unclamped_estimate, ArMethod, AuxParams};
use crate::bench::grid::ParameterGrid;
use crate::cogarch::{
    simulate_from_increments, Recording, ReturnsSeries, Schedule, StartState, DEFAULT_BURN_IN,
    DEFAULT_SUBSTEPS,
};
use crate::error::{invalid, Error, Result};
use crate::levy::{CogarchParams, Increment, IncrementSampler, LevyModel};
use crate::rng::{Lane, StreamId};
use nalgebra::DVector;
use rayon::prelude::*;

#[derive(Debug, Clone, PartialEq)]
pub struct IieConfig {
    pub k: usize,
    pub omega: WeightMatrix,
    pub sim_seed: u64,
    /// Simulated sample length; `None` uses the observed length.
    pub n_sim: Option<usize>,
    pub substeps: usize,
    pub burn_in: usize,
    pub ar_method: ArMethod,
}

impl IieConfig {
    pub fn new(k: usize, r: usize, sim_seed: u64) -> Self {
        Self {
            k,
            omega: WeightMatrix::identity(r + 2),
            sim_seed,
            n_sim: None,
            substeps: DEFAULT_SUBSTEPS,
            burn_in: DEFAULT_BURN_IN,
            ar_method: ArMethod::YuleWalker,
        }
    }

    /// Stream of simulated path `k` (zero based).
    pub fn path_stream(&self, k: usize) -> StreamId {
        StreamId::new(self.sim_seed, Lane::Simulation, 0, k as u32)
    }
}

/// `(1/K) Σ_k π̂_{n,k}((1, η, φ))` for every `(η, φ)` of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedBindingTable {
    pub r: usize,
    pub k: usize,
    pub n_sim: usize,
    pub delta: f64,
    pub eta_phi: Vec<(f64, f64)>,
    /// `None` where a simulated path gave a degenerate auxiliary estimate.
    pub base: Vec<Option<DVector<f64>>>,
}

impl SimulatedBindingTable {
    pub fn build(
        grid: &ParameterGrid,
        model: &LevyModel,
        delta: f64,
        r: usize,
        n_sim: usize,
        cfg: &IieConfig,
    ) -> Result<Self> {
        require_r(r)?;
        if cfg.k == 0 {
            return Err(invalid("K must be >= 1"));
        }
        if grid.is_empty() {
            return Err(Error::EmptyGrid("simulation table over an empty grid".into()));
        }
        let schedule = Schedule {
            delta,
            substeps: cfg.substeps,
            burn_in: cfg.burn_in,
            n: n_sim,
        };
        let sampler = IncrementSampler::new(model, delta / cfg.substeps as f64)?;
        let paths: Vec<Vec<Increment>> = (0..cfg.k)
            .into_par_iter()
            .map(|k| {
                let mut rng = cfg.path_stream(k).rng();
                (0..schedule.total_steps()).map(|_| sampler.sample(&mut rng)).collect()
            })
            .collect();
        let base = grid
            .eta_phi
            .par_iter()
            .map(|&(eta, phi)| average_over_paths(eta, phi, model, &paths, schedule, r, cfg))
            .collect();
        Ok(Self {
            r,
            k: cfg.k,
            n_sim,
            delta,
            eta_phi: grid.eta_phi.clone(),
            base,
        })
    }

    /// The simulated binding at `(β, η_i, φ_i)`.
    pub fn pi_at(&self, idx: usize, beta: f64) -> Option<DVector<f64>> {
        let mut v = self.base[idx].clone()?;
        v[0] *= beta;
        v[self.r + 1] *= beta * beta;
        Some(v)
    }
}

fn average_over_paths(
    eta: f64,
    phi: f64,
    model: &LevyModel,
    paths: &[Vec<Increment>],
    schedule: Schedule,
    r: usize,
    cfg: &IieConfig,
) -> Option<DVector<f64>> {
    let theta = CogarchParams::from_array([1.0, eta, phi]);
    let start = StartState::stationary_mean(&theta, model).ok()?;
    let mut sum = DVector::zeros(r + 2);
    for path in paths {
        let out = simulate_from_increments(
            &theta,
            start,
            path.iter().copied(),
            schedule,
            Recording::None,
            false,
        )
        .ok()?;
        let w: Vec<f64> = out.returns.iter().map(|g| g * g).collect();
        let mut pi = unclamped_estimate(&w, r, cfg.ar_method).ok()?;
        if cfg.ar_method == ArMethod::LeastSquares {
            clamp_roots(&mut pi);
        }
        sum += pi.to_vector();
    }
    Some(sum / paths.len() as f64)
}

/// Grid argmin of `‖π̂ - π̄(θ)‖_Ω`. Ties go to the lexicographically smallest
/// `(β, η, φ)`, which makes the result independent of the grid order.
pub fn iie_sim_with_table(
    pi_hat: &AuxParams,
    grid: &ParameterGrid,
    table: &SimulatedBindingTable,
    omega: &WeightMatrix,
    model: &LevyModel,
) -> Result<EstimationResult> {
    if pi_hat.r != table.r || omega.dim() != table.r + 2 {
        return Err(invalid("auxiliary order does not match the simulation table"));
    }
    if table.eta_phi != grid.eta_phi {
        return Err(invalid("simulation table was built on a different grid"));
    }
    let target = pi_hat.to_vector();
    let m = grid.eta_phi.len();
    let mut best: Option<(f64, [f64; 3], usize)> = None;
    for (j, &beta) in grid.betas.iter().enumerate() {
        for i in 0..m {
            let Some(pi) = table.pi_at(i, beta) else { continue };
            let value = omega.quad_form(&(&target - pi));
            if !value.is_finite() {
                continue;
            }
            let (eta, phi) = grid.eta_phi[i];
            let key = [beta, eta, phi];
            let better = match &best {
                None => true,
                Some((v, k, _)) => value < *v || (value == *v && key < *k),
            };
            if better {
                best = Some((value, key, j * m + i));
            }
        }
    }
    let (objective, key, index) =
        best.ok_or_else(|| Error::EmptyGrid("no grid point has a finite objective".into()))?;
    let diagnostics = Diagnostics {
        evaluations: grid.len(),
        converged: true,
        clamped: pi_hat.clamped,
        grid_index: Some(index),
        note: Some("grid argmin; a local refinement around it may lower the objective".into()),
        ..Default::default()
    };
    Ok(EstimationResult::new(
        CogarchParams::from_array(key),
        Method::IieSim,
        objective,
        model,
        diagnostics,
    ))
}

/// Builds the simulation table for `returns` and minimises over the grid.
pub fn iie_sim(
    returns: &ReturnsSeries,
    model: &LevyModel,
    r: usize,
    grid: &ParameterGrid,
    cfg: &IieConfig,
) -> Result<EstimationResult> {
    let pi_hat = aux_estimate(returns, r, cfg.ar_method)?;
    let n_sim = cfg.n_sim.unwrap_or(returns.len());
    let table = SimulatedBindingTable::build(grid, model, returns.delta, r, n_sim, cfg)?;
    iie_sim_with_table(&pi_hat, grid, &table, &cfg.omega, model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::grid::ParameterGrid;
    use crate::cogarch::{simulate_returns, SimConfig};
    use crate::estimators::ParameterBox;

    fn vg() -> LevyModel {
        LevyModel::variance_gamma(1.0).unwrap()
    }

    fn small_grid(betas: Vec<f64>) -> ParameterGrid {
        let bounds = ParameterBox::new(
            CogarchParams::from_array([0.01, 0.049, 0.034]),
            CogarchParams::from_array([2.0, 0.057, 0.042]),
        )
        .unwrap();
        ParameterGrid::from_axes(
            betas,
            &[0.049, 0.051, 0.053, 0.055, 0.057],
            &[0.034, 0.036, 0.038, 0.040, 0.042],
            &vg(),
            [0.01, 0.002, 0.002],
            bounds,
        )
        .unwrap()
    }

    fn observed(theta: &CogarchParams, cfg: &IieConfig, n: usize) -> ReturnsSeries {
        let mut sim = SimConfig::new(1.0, n, cfg.path_stream(0));
        sim.substeps = cfg.substeps;
        sim.burn_in = cfg.burn_in;
        sim.record = Recording::None;
        simulate_returns(theta, &vg(), &sim).unwrap().0
    }

    #[test]
    fn common_seed_self_recovery() {
        let r = 5;
        let mut cfg = IieConfig::new(1, r, 77);
        cfg.burn_in = 50;
        let truth = CogarchParams::new(1.0, 0.053, 0.038).unwrap();
        let data = observed(&truth, &cfg, 2000);
        let grid = small_grid(vec![0.5, 1.0, 1.5]);
        let est = iie_sim(&data, &vg(), r, &grid, &cfg).unwrap();
        assert_eq!(est.objective, 0.0);
        assert_eq!(est.theta_hat, truth);
    }

    #[test]
    fn common_seed_self_recovery_general_beta() {
        let r = 5;
        let mut cfg = IieConfig::new(1, r, 78);
        cfg.burn_in = 50;
        let truth = CogarchParams::new(0.04, 0.053, 0.038).unwrap();
        let data = observed(&truth, &cfg, 2000);
        let grid = small_grid(vec![0.02, 0.03, 0.04, 0.05]);
        let est = iie_sim(&data, &vg(), r, &grid, &cfg).unwrap();
        assert!(est.objective < 1e-18, "{}", est.objective);
        assert_eq!(est.theta_hat, truth);
    }

    #[test]
    fn beta_transform_only_moves_mu_and_gamma0() {
        let r = 4;
        let mut cfg = IieConfig::new(2, r, 5);
        cfg.burn_in = 20;
        let grid = small_grid(vec![1.0]);
        let table = SimulatedBindingTable::build(&grid, &vg(), 1.0, r, 500, &cfg).unwrap();
        let one = table.pi_at(3, 1.0).unwrap();
        let three = table.pi_at(3, 3.0).unwrap();
        assert_eq!(three[0], 3.0 * one[0]);
        assert_eq!(three[r + 1], 9.0 * one[r + 1]);
        for j in 1..=r {
            assert_eq!(three[j], one[j]);
        }
    }

    #[test]
    fn argmin_ignores_grid_order() {
        let r = 4;
        let mut cfg = IieConfig::new(2, r, 9);
        cfg.burn_in = 20;
        let grid = small_grid(vec![0.03, 0.04, 0.05]);
        let table = SimulatedBindingTable::build(&grid, &vg(), 1.0, r, 800, &cfg).unwrap();
        let pi_hat = crate::binding::binding(
            &CogarchParams::new(0.04, 0.053, 0.038).unwrap(),
            &vg(),
            1.0,
            r,
            &Default::default(),
        )
        .unwrap();
        let a = iie_sim_with_table(&pi_hat, &grid, &table, &cfg.omega, &vg()).unwrap();

        let mut rev = grid.clone();
        rev.eta_phi.reverse();
        rev.psi4.reverse();
        rev.betas.reverse();
        let mut rev_table = table.clone();
        rev_table.eta_phi.reverse();
        rev_table.base.reverse();
        let b = iie_sim_with_table(&pi_hat, &rev, &rev_table, &cfg.omega, &vg()).unwrap();
        assert_eq!(a.theta_hat, b.theta_hat);
        assert_eq!(a.objective, b.objective);
    }

    #[test]
    fn ties_break_to_smallest_theta() {
        let grid = small_grid(vec![1.0, 2.0]);
        let r = 2;
        let v = DVector::from_vec(vec![1.0, 0.1, 0.1, 1.0]);
        let table = SimulatedBindingTable {
            r,
            k: 1,
            n_sim: 10,
            delta: 1.0,
            eta_phi: grid.eta_phi.clone(),
            base: vec![Some(v.clone()); grid.eta_phi.len()],
        };
        let pi_hat = AuxParams::from_vector(&v).unwrap();
        let est = iie_sim_with_table(&pi_hat, &grid, &table, &WeightMatrix::identity(4), &vg()).unwrap();
        assert_eq!(est.theta_hat.to_array(), [1.0, grid.eta_phi[0].0, grid.eta_phi[0].1]);
        assert_eq!(est.diagnostics.grid_index, Some(0));
    }
}
