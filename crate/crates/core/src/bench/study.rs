//! The replication study driver.

use super::config::StudyConfig;
use super::grid::{build_grid, ParameterGrid};
use super::report::{method_row, qq_rows, GridSummary, RepEstimate, StudyReport, COMPONENTS};
use crate::aux_ar::aux_estimate;
use crate::cogarch::{simulate_returns, Recording, SimConfig};
use crate::error::{Error, Result};
use crate::estimators::{
    iie_sim_with_table, iie_star, mm_estimate, EstimationResult, IieConfig, Method, ParameterBox,
    SimulatedBindingTable, WeightMatrix,
};
use crate::levy::CogarchParams;
use crate::rng::StreamId;
use rayon::prelude::*;

/// Estimates of every configured method for one replication.
#[derive(Debug, Clone)]
pub struct Replication {
    pub rep: usize,
    /// Failed estimates carry the error message.
    pub results: Vec<(Method, std::result::Result<EstimationResult, String>)>,
}

impl Replication {
    /// A replication is kept only when every method returned a feasible
    /// estimate.
    pub fn included(&self) -> bool {
        self.results.iter().all(|(_, r)| matches!(r, Ok(e) if e.feasible))
    }
}

/// The search box `[spacing, upper_factor · θ_true]`.
pub fn study_domain(cfg: &StudyConfig) -> Result<ParameterBox> {
    let t = cfg.theta_true.to_array();
    let s = cfg.grid_spacing;
    ParameterBox::new(
        CogarchParams::from_array(s),
        CogarchParams::from_array([0, 1, 2].map(|i| cfg.upper_factor * t[i])),
    )
}

/// Everything shared read-only by the replications.
pub struct StudyContext {
    pub domain: ParameterBox,
    pub grid: Option<ParameterGrid>,
    pub table: Option<SimulatedBindingTable>,
    pub omega: WeightMatrix,
}

impl StudyContext {
    pub fn new(cfg: &StudyConfig) -> Result<Self> {
        cfg.validate()?;
        let domain = study_domain(cfg)?;
        let omega = WeightMatrix::identity(cfg.r + 2);
        let (grid, table) = if cfg.methods.contains(&Method::IieSim) {
            let grid = build_grid(&domain, cfg.grid_spacing, &cfg.model)?;
            log::info!(
                "grid: {} points over {} (eta, phi) pairs; building simulation table with K = {}",
                grid.len(),
                grid.eta_phi.len(),
                cfg.k
            );
            let table =
                SimulatedBindingTable::build(&grid, &cfg.model, cfg.delta, cfg.r, cfg.n, &iie_config(cfg))?;
            (Some(grid), Some(table))
        } else {
            (None, None)
        };
        Ok(Self {
            domain,
            grid,
            table,
            omega,
        })
    }
}

fn iie_config(cfg: &StudyConfig) -> IieConfig {
    let mut c = IieConfig::new(cfg.k, cfg.r, cfg.sim_seed());
    c.n_sim = Some(cfg.n);
    c.substeps = cfg.substeps;
    c.burn_in = cfg.burn_in;
    c.ar_method = cfg.ar_method;
    c
}

/// Simulates replication `rep` and runs every configured method on it.
pub fn run_replication(cfg: &StudyConfig, ctx: &StudyContext, rep: usize) -> Replication {
    let fail = |e: &Error| cfg.methods.iter().map(|&m| (m, Err(e.to_string()))).collect();
    let mut sim = SimConfig::new(cfg.delta, cfg.n, StreamId::observed(cfg.master_seed, rep as u32));
    sim.substeps = cfg.substeps;
    sim.burn_in = cfg.burn_in;
    sim.record = Recording::None;
    let returns = match simulate_returns(&cfg.theta_true, &cfg.model, &sim) {
        Ok((g, _)) => g,
        Err(e) => return Replication { rep, results: fail(&e) },
    };
    let pi_hat = match aux_estimate(&returns, cfg.r, cfg.ar_method) {
        Ok(p) => p,
        Err(e) => return Replication { rep, results: fail(&e) },
    };
    let mm = mm_estimate(&returns, cfg.r, &cfg.model, &ctx.domain).map_err(|e| e.to_string());
    let results = cfg
        .methods
        .iter()
        .map(|&m| {
            let res = match m {
                Method::Mm => mm.clone(),
                Method::IieStar => {
                    let start = mm.as_ref().map(|e| e.theta_hat).unwrap_or_else(|_| ctx.domain.centre());
                    iie_star(&pi_hat, &cfg.model, cfg.delta, &ctx.omega, &ctx.domain, &cfg.backend, &start)
                        .map_err(|e| e.to_string())
                }
                Method::IieSim => match (&ctx.grid, &ctx.table) {
                    (Some(grid), Some(table)) => {
                        iie_sim_with_table(&pi_hat, grid, table, &ctx.omega, &cfg.model).map_err(|e| e.to_string())
                    }
                    _ => Err("no simulation table".to_string()),
                },
            };
            (m, res)
        })
        .collect();
    Replication { rep, results }
}

/// Runs the study on the global rayon pool.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyReport> {
    let ctx = StudyContext::new(cfg)?;
    let reps: Vec<Replication> = (0..cfg.reps)
        .into_par_iter()
        .map(|i| run_replication(cfg, &ctx, i))
        .collect();
    aggregate(cfg, &ctx, reps)
}

/// Runs the study on a dedicated pool of `threads` workers.
pub fn run_study_with_threads(cfg: &StudyConfig, threads: usize) -> Result<StudyReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| run_study(cfg))
}

/// Applies the joint exclusion rule and computes the per-method metrics.
pub fn aggregate(cfg: &StudyConfig, ctx: &StudyContext, mut reps: Vec<Replication>) -> Result<StudyReport> {
    reps.sort_by_key(|r| r.rep);
    let mut estimates = Vec::new();
    let mut excluded_reps = Vec::new();
    for r in &reps {
        if !r.included() {
            excluded_reps.push(r.rep);
        }
        for (m, res) in &r.results {
            estimates.push(match res {
                Ok(e) => RepEstimate {
                    rep: r.rep,
                    method: *m,
                    theta: Some(e.theta_hat),
                    objective: Some(e.objective),
                    feasible: e.feasible,
                    error: None,
                },
                Err(err) => RepEstimate {
                    rep: r.rep,
                    method: *m,
                    theta: None,
                    objective: None,
                    feasible: false,
                    error: Some(err.clone()),
                },
            });
        }
    }
    let kept: Vec<&Replication> = reps.iter().filter(|r| r.included()).collect();
    if kept.is_empty() {
        return Err(Error::AllReplicationsExcluded(reps.len()));
    }
    let mut rows = Vec::new();
    let mut qq = Vec::new();
    for (j, &m) in cfg.methods.iter().enumerate() {
        let thetas: Vec<CogarchParams> = kept
            .iter()
            .map(|r| match &r.results[j].1 {
                Ok(e) => e.theta_hat,
                Err(_) => unreachable!("excluded above"),
            })
            .collect();
        rows.push(method_row(m, &thetas, &cfg.theta_true));
        for (c, name) in COMPONENTS.iter().enumerate() {
            let values: Vec<f64> = thetas.iter().map(|t| t.to_array()[c]).collect();
            qq.extend(qq_rows(&format!("{m}.{name}"), &values));
        }
    }
    let grid = ctx.grid.as_ref().map(|g| GridSummary {
        points: g.len(),
        filtered: g.filtered,
        axis_counts: g.axis_counts,
        spacing: g.spacing,
    });
    let mut config = cfg.clone();
    config.output_dir = None;
    Ok(StudyReport {
        config,
        std_convention: "population (divisor = included replications)".into(),
        reps: reps.len(),
        included: kept.len(),
        excluded: excluded_reps.len(),
        excluded_reps,
        rows,
        grid,
        estimates,
        qq,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> StudyConfig {
        StudyConfig {
            n: 1500,
            reps: 3,
            r: 5,
            k: 2,
            burn_in: 50,
            substeps: 5,
            grid_spacing: [0.01, 0.01, 0.01],
            methods: vec![Method::Mm, Method::IieStar],
            ..Default::default()
        }
    }

    #[test]
    fn deterministic_across_threads() {
        let cfg = small();
        let a = run_study_with_threads(&cfg, 1);
        let b = run_study_with_threads(&cfg, 2);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
                assert_eq!(a.reps, 3);
                assert_eq!(a.included + a.excluded, 3);
                assert_eq!(a.estimates.len(), 6);
                assert_eq!(a.qq.len(), 2 * 3 * a.included);
            }
            (Err(Error::AllReplicationsExcluded(3)), Err(Error::AllReplicationsExcluded(3))) => {}
            (a, b) => panic!("{a:?} / {b:?}"),
        }
    }

    #[test]
    fn exclusion_is_joint() {
        let ok = |m| {
            (
                m,
                Ok(EstimationResult {
                    theta_hat: CogarchParams::from_array([0.04, 0.053, 0.038]),
                    method: m,
                    objective: 0.0,
                    feasible: true,
                    psi4: -0.02,
                    diagnostics: Default::default(),
                    xi: None,
                }),
            )
        };
        let mut r = Replication {
            rep: 0,
            results: vec![ok(Method::Mm), ok(Method::IieStar)],
        };
        assert!(r.included());
        if let Ok(e) = &mut r.results[1].1 {
            e.feasible = false;
        }
        assert!(!r.included());
        r.results[1].1 = Err("k <= 0".to_string());
        assert!(!r.included());
    }

    #[test]
    fn single_rep_has_zero_std() {
        let cfg = StudyConfig {
            reps: 1,
            methods: vec![Method::Mm],
            ..small()
        };
        let ctx = StudyContext::new(&cfg).unwrap();
        let theta = CogarchParams::from_array([0.05, 0.06, 0.04]);
        let rep = Replication {
            rep: 0,
            results: vec![(
                Method::Mm,
                Ok(EstimationResult {
                    theta_hat: theta,
                    method: Method::Mm,
                    objective: 0.0,
                    feasible: true,
                    psi4: -0.01,
                    diagnostics: Default::default(),
                    xi: None,
                }),
            )],
        };
        let report = aggregate(&cfg, &ctx, vec![rep]).unwrap();
        let row = report.row(Method::Mm).unwrap();
        assert_eq!(row.std, [0.0; 3]);
        for c in 0..3 {
            let diff = (theta.to_array()[c] - cfg.theta_true.to_array()[c]).abs();
            assert!((row.rmse[c] - diff).abs() < 1e-15);
        }
    }

    #[test]
    fn all_excluded_is_an_error() {
        let cfg = StudyConfig {
            reps: 2,
            methods: vec![Method::Mm],
            ..small()
        };
        let ctx = StudyContext::new(&cfg).unwrap();
        let reps = (0..2)
            .map(|rep| Replication {
                rep,
                results: vec![(Method::Mm, Err("x".to_string()))],
            })
            .collect();
        assert!(matches!(aggregate(&cfg, &ctx, reps), Err(Error::AllReplicationsExcluded(2))));
    }
}
