//! Study configuration, read from JSON or TOML.

use crate::aux_ar::ArMethod;
use crate::binding::BindingBackend;
use crate::cogarch::{DEFAULT_BURN_IN, DEFAULT_SUBSTEPS};
use crate::error::{Error, Result};
use crate::estimators::Method;
use crate::levy::{CogarchParams, LevyModel};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudyConfig {
    pub theta_true: CogarchParams,
    pub model: LevyModel,
    pub delta: f64,
    pub n: usize,
    pub reps: usize,
    pub r: usize,
    pub methods: Vec<Method>,
    /// Number of simulated paths of the simulation-based IIE.
    #[serde(rename = "K")]
    pub k: usize,
    pub master_seed: u64,
    /// Seed of the simulation lane; defaults to `master_seed`.
    pub sim_seed: Option<u64>,
    pub grid_spacing: [f64; 3],
    /// The search box is `[spacing, upper_factor · θ_true]`.
    pub upper_factor: f64,
    pub substeps: usize,
    pub burn_in: usize,
    pub ar_method: ArMethod,
    pub backend: BindingBackend,
    pub output_dir: Option<PathBuf>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            theta_true: CogarchParams {
                beta: 0.04,
                eta: 0.053,
                phi: 0.038,
            },
            model: LevyModel::variance_gamma(1.0).expect("valid model"),
            delta: 1.0,
            n: 10_000,
            reps: 200,
            r: 70,
            methods: vec![Method::Mm, Method::IieStar, Method::IieSim],
            k: 20,
            master_seed: 2024,
            sim_seed: None,
            grid_spacing: [0.002; 3],
            upper_factor: 3.0,
            substeps: DEFAULT_SUBSTEPS,
            burn_in: DEFAULT_BURN_IN,
            ar_method: ArMethod::YuleWalker,
            backend: BindingBackend::Analytic,
            output_dir: None,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if let Err(e) = self.theta_true.validate() {
            return fail(e.to_string());
        }
        if let Err(e) = self.model.validate() {
            return fail(e.to_string());
        }
        if self.reps == 0 {
            return fail("reps must be >= 1".into());
        }
        if self.r < 2 {
            return fail(format!("r must be >= 2, got {}", self.r));
        }
        if self.n <= 2 * self.r {
            return fail(format!("n = {} must exceed 2r = {}", self.n, 2 * self.r));
        }
        if self.methods.is_empty() {
            return fail("at least one method is required".into());
        }
        if self.k == 0 {
            return fail("K must be >= 1".into());
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return fail(format!("delta must be > 0, got {}", self.delta));
        }
        if self.grid_spacing.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return fail(format!("grid spacings must be > 0, got {:?}", self.grid_spacing));
        }
        if !(self.upper_factor > 1.0) {
            return fail(format!("upper_factor must exceed 1, got {}", self.upper_factor));
        }
        if self.substeps == 0 {
            return fail("substeps must be >= 1".into());
        }
        Ok(())
    }

    pub fn sim_seed(&self) -> u64 {
        self.sim_seed.unwrap_or(self.master_seed)
    }

    /// Parses TOML when `path` ends in `.toml`, JSON otherwise.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
        let cfg: Self = if is_toml {
            toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
        } else {
            serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
