//! The TOML study file: `[geometry]`, `[grid]`, `[study]` and `[solver]` sections.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::GeometrySpec;
use crate::lab::{AlphaSetting, Datum, GridPolicy, StudyConfig};

pub const SCHEMA_HINT: &str = "expected a TOML file with [geometry] (kind, params), optional [grid] (n_x, n_fiber, refine), \
[study] (epsilons, k, alpha, samples, times, epsilon, datum) and [solver] (tol, seed, max_iter)";

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    pub epsilons: Option<Vec<f64>>,
    pub k: Option<usize>,
    pub alpha: Option<AlphaSetting>,
    pub samples: Option<usize>,
    pub times: Option<Vec<f64>>,
    /// Tube thickness for the `spectrum` subcommand; defaults to the largest ladder value.
    pub epsilon: Option<f64>,
    /// Initial datum for the `semigroup` subcommand.
    pub datum: Option<Datum>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub max_iter: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub geometry: GeometrySpec,
    pub grid: Option<GridPolicy>,
    #[serde(default)]
    pub study: StudySection,
    #[serde(default)]
    pub solver: SolverSection,
}

/// A parsed study file merged with command line overrides.
#[derive(Debug, Clone, Serialize)]
pub struct CliConfig {
    pub study: StudyConfig,
    pub epsilon: f64,
    pub datum: Datum,
    pub out: PathBuf,
    pub plot: bool,
    pub verbose: bool,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("{}; {SCHEMA_HINT}", e.message())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}; {SCHEMA_HINT}", path.display())))?;
        Self::parse(&text).map_err(|e| e.context(&path.display().to_string()))
    }

    pub fn study_config(&self) -> StudyConfig {
        let mut cfg = StudyConfig::new(self.geometry.clone());
        if let Some(g) = self.grid {
            cfg.grid = g;
        }
        let s = &self.study;
        if let Some(e) = &s.epsilons {
            cfg.epsilons = e.clone();
        }
        if let Some(k) = s.k {
            cfg.k = k;
        }
        if let Some(a) = &s.alpha {
            cfg.alpha = a.clone();
        }
        if let Some(n) = s.samples {
            cfg.samples = n;
        }
        if let Some(t) = &s.times {
            cfg.times = t.clone();
        }
        if let Some(t) = self.solver.tol {
            cfg.tol = t;
        }
        if let Some(seed) = self.solver.seed {
            cfg.seed = seed;
        }
        if let Some(m) = self.solver.max_iter {
            cfg.max_iter = m;
        }
        cfg
    }
}
