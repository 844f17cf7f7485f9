//! Convergence studies and inequality checks on the unit tube.

pub mod checks;
pub mod oracle;
pub mod output;

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{
    assemble_limit_form_on, assemble_rescaled_form, build_grid, fiber_pencil, E0Projector, FermiGrid, FiberPencil,
    FormPair,
};
use crate::ball::BallSpectrum;
use crate::eigen::{dense_eigenpairs, lowest_eigenpairs_with, LobpcgOptions, SpectrumResult, DEFAULT_SEED};
use crate::error::{Error, Result};
use crate::fermi::{loglog_slope, potential_field};
use crate::geometry::{Geometry, GeometryKind, GeometrySpec};
pub use checks::{
    asymptotics_check, coercivity_check, kato_check, scaled_samples, semigroup_convergence_study, AsymptoticsReport,
    CoercivityReport, Datum, KatoReport, ScaledSample, SemigroupReport, ASYMPTOTIC_QUANTITIES,
};
pub use oracle::OracleCheck;

/// Default ε-ladder in √2 steps.
pub const DEFAULT_LADDER: [f64; 5] = [0.2, 0.141, 0.1, 0.071, 0.05];
/// Errors below this are treated as exact agreement.
pub const NOISE_FLOOR: f64 = 1e-9;
/// Required agreement between independent oracle routes.
pub const ORACLE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaSetting {
    Fixed(f64),
    /// Only `"auto"` is accepted: the coercivity floor plus one.
    Named(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridPolicy {
    pub n_x: usize,
    pub n_fiber: usize,
    /// Also solve on a grid 1.5× finer in every direction.
    #[serde(default = "yes")]
    pub refine: bool,
}

fn yes() -> bool {
    true
}

impl GridPolicy {
    pub fn default_for(kind: GeometryKind) -> Self {
        let (n_x, n_fiber) = match kind {
            GeometryKind::SphereInR3 => (32, 16),
            GeometryKind::SpaceCurve => (48, 16),
            _ => (64, 16),
        };
        GridPolicy { n_x, n_fiber, refine: true }
    }

    pub fn refined(&self) -> (usize, usize) {
        let up = |n: usize| (3 * n).div_ceil(4) * 2;
        (up(self.n_x), up(self.n_fiber))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub geometry: GeometrySpec,
    /// Descending, inside (0, ε_max].
    pub epsilons: Vec<f64>,
    pub k: usize,
    pub alpha: AlphaSetting,
    pub grid: GridPolicy,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
    /// Random test functions for the inequality checks.
    pub samples: usize,
    /// Heat times for the semigroup study.
    pub times: Vec<f64>,
}

impl StudyConfig {
    pub fn new(geometry: GeometrySpec) -> Self {
        let grid = GridPolicy::default_for(geometry.kind);
        StudyConfig {
            geometry,
            epsilons: DEFAULT_LADDER.to_vec(),
            k: 4,
            alpha: AlphaSetting::Named("auto".into()),
            grid,
            seed: DEFAULT_SEED,
            tol: 1e-8,
            max_iter: 5000,
            samples: 100,
            times: vec![0.5, 1.0, 2.0],
        }
    }

    pub fn validate(&self, geom: &Geometry) -> Result<()> {
        if self.epsilons.is_empty() {
            return Err(Error::Validation("empty ε-ladder".into()));
        }
        if self.epsilons.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(Error::Validation("ε-ladder must be strictly descending".into()));
        }
        let top = geom.eps_max();
        if let Some(e) = self.epsilons.iter().find(|e| !(**e > 0.0 && **e <= top)) {
            return Err(Error::Validation(format!("ε = {e} outside (0, {top}]")));
        }
        if self.k == 0 || self.k > crate::eigen::MAX_PAIRS {
            return Err(Error::Validation(format!("k = {} outside 1..=20", self.k)));
        }
        if !(self.tol >= crate::eigen::MIN_TOL) {
            return Err(Error::Validation(format!("solver tolerance {} below 1e-10", self.tol)));
        }
        if self.samples == 0 {
            return Err(Error::Validation("at least one sample is required".into()));
        }
        if let Some(t) = self.times.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return Err(Error::Validation(format!("heat time {t} must be positive")));
        }
        if let AlphaSetting::Named(s) = &self.alpha {
            if s != "auto" {
                return Err(Error::Validation(format!("alpha must be a number or \"auto\", got {s:?}")));
            }
        }
        if let AlphaSetting::Fixed(a) = self.alpha {
            if !a.is_finite() {
                return Err(Error::Validation("alpha must be finite".into()));
            }
        }
        Ok(())
    }

    /// ε-values at most `bound`, for checks with a smallness hypothesis.
    pub fn epsilons_below(&self, bound: f64) -> Vec<f64> {
        self.epsilons.iter().copied().filter(|e| *e <= bound).collect()
    }
}

/// A fixed tube grid with its fiber pencil and E₀ projector.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub grid: FermiGrid,
    pub pencil: FiberPencil,
    pub e0: E0Projector,
}

impl Discretization {
    pub fn new(geom: &Geometry, n_x: usize, n_fiber: usize) -> Result<Self> {
        let grid = build_grid(geom, n_x, n_fiber)?;
        let pencil = fiber_pencil(&grid.fiber)?;
        let e0 = E0Projector::new(&grid, &pencil)?;
        Ok(Discretization { grid, pencil, e0 })
    }

    pub fn info(&self) -> GridInfo {
        GridInfo {
            n_x: self.grid.n_x(),
            n_fiber: self.grid.n_fiber(),
            n_unknowns: self.grid.n_unknowns(),
            lambda0_h: self.pencil.lambda0_h,
        }
    }

    pub fn solver_options(&self, cfg: &StudyConfig) -> LobpcgOptions {
        LobpcgOptions {
            tol: cfg.tol,
            seed: cfg.seed,
            max_iter: cfg.max_iter,
            precond_block: self.grid.n_fiber_interior,
            ..LobpcgOptions::default()
        }
    }

    /// Lowest pairs of the pencil of F_{ε,α}, i.e. of Δ(ε) + α.
    pub fn solve(&self, form: &FormPair, k: usize, cfg: &StudyConfig) -> Result<SpectrumResult> {
        lowest_eigenpairs_with(form, k, &self.solver_options(cfg))
    }

    /// Lowest pairs of the limit pencil on the same base mesh, unshifted.
    pub fn limit_spectrum(&self, geom: &Geometry, k: usize, cfg: &StudyConfig) -> Result<SpectrumResult> {
        let form = assemble_limit_form_on(geom, &self.grid.base, 0.0)?;
        if form.n() <= crate::eigen::dense::DENSE_LIMIT {
            dense_eigenpairs(&form, k)
        } else {
            lowest_eigenpairs_with(&form, k, &LobpcgOptions { tol: cfg.tol, seed: cfg.seed, ..Default::default() })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridInfo {
    pub n_x: usize,
    pub n_fiber: usize,
    pub n_unknowns: usize,
    pub lambda0_h: f64,
}

/// Resolved study constants shared by all checks.
#[derive(Debug, Clone, Serialize)]
pub struct StudyContext {
    pub alpha: f64,
    pub alpha_floor: f64,
    pub lambda0: f64,
    pub eps_max: f64,
    pub eps_star: f64,
}

impl StudyContext {
    pub fn new(geom: &Geometry, disc: &Discretization, cfg: &StudyConfig) -> Result<Self> {
        let field = potential_field(geom, &disc.grid)?;
        let alpha = match cfg.alpha {
            AlphaSetting::Fixed(a) => a,
            AlphaSetting::Named(_) => field.alpha_floor + 1.0,
        };
        Ok(StudyContext {
            alpha,
            alpha_floor: field.alpha_floor,
            lambda0: field.lambda0,
            eps_max: geom.eps_max(),
            eps_star: BallSpectrum::new(geom.codim(), 2)?.eps_star,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenRow {
    pub epsilon: f64,
    pub k: usize,
    /// Eigenvalue of Δ(ε), the pencil eigenvalue minus α.
    pub lambda_eps: f64,
    /// Eigenvalue of the limit pencil on the same base mesh.
    pub mu_limit: f64,
    pub abs_err: f64,
    pub grid_nx: usize,
    pub grid_nfiber: usize,
    pub lambda0_h: f64,
    pub residual: f64,
    /// Closed-form limit eigenvalue where known.
    pub mu_exact: Option<f64>,
    /// Exact tube eigenvalue from the separable oracle where available.
    pub lambda_exact: Option<f64>,
    pub lambda_refined: Option<f64>,
    pub mu_refined: Option<f64>,
    pub abs_err_refined: Option<f64>,
    /// Change of abs_err under grid refinement.
    pub grid_delta: Option<f64>,
    /// abs_err is within 5× the grid delta (or below the noise floor) and not asserted on.
    pub grid_limited: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitSummary {
    pub discrete: Vec<f64>,
    pub discrete_refined: Option<Vec<f64>>,
    pub exact: Option<Vec<f64>>,
    pub oracle: Option<OracleCheck>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ContractOutcome {
    pub passed: bool,
    pub violations: Vec<String>,
    pub flags: Vec<String>,
}

impl ContractOutcome {
    pub fn new() -> Self {
        ContractOutcome { passed: true, ..Default::default() }
    }

    pub fn violate(&mut self, msg: String) {
        self.passed = false;
        self.violations.push(msg);
    }

    pub fn flag(&mut self, msg: String) {
        self.flags.push(msg);
    }

    pub fn merge(&mut self, other: &ContractOutcome) {
        self.passed &= other.passed;
        self.violations.extend(other.violations.iter().cloned());
        self.flags.extend(other.flags.iter().cloned());
    }
}

/// Wall-clock timings; the only non-reproducible part of a report.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Metadata {
    pub version: String,
    pub runtime_ms: BTreeMap<String, f64>,
}

impl Metadata {
    pub fn new() -> Self {
        Metadata { version: env!("CARGO_PKG_VERSION").into(), runtime_ms: BTreeMap::new() }
    }

    pub fn record(&mut self, what: &str, start: Instant) {
        self.runtime_ms.insert(what.into(), start.elapsed().as_secs_f64() * 1e3);
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub geometry: GeometrySpec,
    pub context: StudyContext,
    pub seed: u64,
    pub tol: f64,
    pub grid: GridInfo,
    pub refined_grid: Option<GridInfo>,
    pub limit: LimitSummary,
    pub tube_oracles: Vec<OracleCheck>,
    pub rows: Vec<EigenRow>,
    /// Least-squares log-log slope of abs_err against ε per k; `None` when all errors are noise.
    pub slopes: Vec<Option<f64>>,
    pub contract: ContractOutcome,
    pub metadata: Metadata,
}

struct EpsSolve {
    values: Vec<f64>,
    residuals: Vec<f64>,
    refined: Option<Vec<f64>>,
}

/// Eigenvalues of Δ(ε) on the ε-ladder against the limit operator Δ_L + W_L.
pub fn eigenvalue_convergence_study(cfg: &StudyConfig) -> Result<ConvergenceReport> {
    let mut meta = Metadata::new();
    let start = Instant::now();
    let geom = Geometry::new(cfg.geometry.clone())?;
    cfg.validate(&geom)?;
    let disc = Discretization::new(&geom, cfg.grid.n_x, cfg.grid.n_fiber)?;
    let fine = if cfg.grid.refine {
        let (nx, nf) = cfg.grid.refined();
        Some(Discretization::new(&geom, nx, nf)?)
    } else {
        None
    };
    let ctx = StudyContext::new(&geom, &disc, cfg)?;
    let k = cfg.k;

    let t = Instant::now();
    let exact = oracle::limit_spectrum_exact(&geom, k);
    let limit_oracle = oracle::limit_oracle(&geom, k)?;
    let tube_oracles: Vec<OracleCheck> = cfg
        .epsilons
        .par_iter()
        .map(|&e| oracle::tube_spectrum_oracle(&geom, e, k))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    meta.record("oracles", t);

    let t = Instant::now();
    let mu = disc.limit_spectrum(&geom, k, cfg)?.eigenvalues;
    let mu_fine = match &fine {
        Some(f) => Some(f.limit_spectrum(&geom, k, cfg)?.eigenvalues),
        None => None,
    };
    meta.record("limit", t);

    let t = Instant::now();
    let solves: Vec<EpsSolve> = cfg
        .epsilons
        .par_iter()
        .map(|&eps| {
            let run = |d: &Discretization| -> Result<SpectrumResult> {
                let form = assemble_rescaled_form(&geom, &d.grid, eps, ctx.alpha, &d.pencil)?;
                d.solve(&form, k, cfg)
            };
            let coarse = run(&disc).map_err(|e| e.context(&format!("ε = {eps}")))?;
            let refined = match &fine {
                Some(f) => Some(run(f).map_err(|e| e.context(&format!("ε = {eps}, refined grid")))?),
                None => None,
            };
            Ok(EpsSolve {
                values: coarse.shifted(ctx.alpha).eigenvalues,
                residuals: coarse.residuals,
                refined: refined.map(|r| r.shifted(ctx.alpha).eigenvalues),
            })
        })
        .collect::<Result<_>>()?;
    meta.record("tube_solves", t);

    let mut rows = Vec::with_capacity(cfg.epsilons.len() * k);
    for (&eps, s) in cfg.epsilons.iter().zip(&solves) {
        let oracle_row = tube_oracles.iter().find(|o| o.epsilon == Some(eps));
        for j in 0..k {
            let abs_err = (s.values[j] - mu[j]).abs();
            let (lambda_refined, mu_refined, abs_err_refined, grid_delta) = match (&s.refined, &mu_fine) {
                (Some(r), Some(m)) => {
                    let e = (r[j] - m[j]).abs();
                    (Some(r[j]), Some(m[j]), Some(e), Some((e - abs_err).abs()))
                }
                _ => (None, None, None, None),
            };
            let grid_limited = abs_err <= NOISE_FLOOR || grid_delta.is_some_and(|d| abs_err <= 5.0 * d);
            rows.push(EigenRow {
                epsilon: eps,
                k: j,
                lambda_eps: s.values[j],
                mu_limit: mu[j],
                abs_err,
                grid_nx: disc.grid.n_x(),
                grid_nfiber: disc.grid.n_fiber(),
                lambda0_h: disc.pencil.lambda0_h,
                residual: s.residuals[j],
                mu_exact: exact.as_ref().map(|e| e[j]),
                lambda_exact: oracle_row.map(|o| o.primary[j]),
                lambda_refined,
                mu_refined,
                abs_err_refined,
                grid_delta,
                grid_limited,
            });
        }
    }

    let slopes = (0..k)
        .map(|j| {
            let pts: Vec<(f64, f64)> =
                rows.iter().filter(|r| r.k == j && r.abs_err > NOISE_FLOOR).map(|r| (r.epsilon, r.abs_err)).collect();
            if pts.len() < 2 {
                None
            } else {
                let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
                Some(loglog_slope(&x, &y))
            }
        })
        .collect();

    let mut contract = ContractOutcome::new();
    if let Some(o) = &limit_oracle {
        if o.max_gap > ORACLE_TOL {
            contract.violate(format!("limit oracle routes differ by {:.3e}", o.max_gap));
        }
    }
    for o in &tube_oracles {
        if o.max_gap > ORACLE_TOL {
            contract.violate(format!("tube oracle routes differ by {:.3e} at ε = {:?}", o.max_gap, o.epsilon));
        }
    }
    for j in 0..k {
        let errs: Vec<&EigenRow> = rows.iter().filter(|r| r.k == j && !r.grid_limited).collect();
        let ups = errs.windows(2).filter(|w| w[1].abs_err >= w[0].abs_err).count();
        if ups > 1 {
            contract.violate(format!("k = {j}: abs_err increases {ups} times along the ε-ladder"));
        } else if ups == 1 {
            contract.flag(format!("k = {j}: one non-monotone step along the ε-ladder (grid-limited)"));
        }
        if let (Some(first), Some(last)) = (errs.first(), errs.last()) {
            if errs.len() > 1 && last.abs_err >= first.abs_err {
                contract.violate(format!("k = {j}: abs_err at the smallest ε is not below the largest"));
            }
        }
        let limited = rows.iter().filter(|r| r.k == j && r.grid_limited).count();
        if limited > 0 {
            contract.flag(format!("k = {j}: {limited} rows at or below the grid/noise limit"));
        }
    }
    meta.record("total", start);

    Ok(ConvergenceReport {
        geometry: cfg.geometry.clone(),
        context: ctx,
        seed: cfg.seed,
        tol: cfg.tol,
        grid: disc.info(),
        refined_grid: fine.as_ref().map(Discretization::info),
        limit: LimitSummary { discrete: mu, discrete_refined: mu_fine, exact, oracle: limit_oracle },
        tube_oracles,
        rows,
        slopes,
        contract,
        metadata: meta,
    })
}
