//! Quantitative checks of the Kato and coercivity inequalities, the asymptotic orders of
//! the tube data, and heat semigroup convergence.

use std::f64::consts::TAU;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ContractOutcome, Discretization, GridInfo, Metadata, StudyConfig, StudyContext, NOISE_FLOOR};
use crate::assembly::{
    assemble_limit_form_on, assemble_potential_mass, assemble_rescaled_form, BaseMesh, CsrMatrix, ReferenceParts,
};
use crate::eigen::{dense_eigenpairs, heat_apply, lowest_eigenpairs_with, LobpcgOptions, SpectrumResult, MAX_PAIRS};
use crate::error::{Error, Result};
use crate::fermi::{effective_potential_from, log_rho_gradient, loglog_slope, potential_w, reference_dual};
use crate::geometry::{Geometry, GeometryKind};

/// Band for the log-log slope of the Kato ratio against ε.
pub const KATO_SLOPE_BAND: f64 = 0.2;
/// Minimum log-log slope of the asymptotic quantities.
pub const ASYMPTOTIC_SLOPE: f64 = 0.9;
/// Finite-difference noise below which an asymptotic quantity counts as identically zero.
pub const FD_NOISE: f64 = 1e-8;
/// Allowed gap between the sequence and fixed-datum semigroup errors at the smallest ε.
pub const SEQUENCE_TOL: f64 = 1e-3;

/// A smooth function on L with a few low modes.
fn base_profile(geom: &Geometry, x: &[f64], coeffs: &[f64; 4]) -> f64 {
    if geom.kind() == GeometryKind::SphereInR3 {
        let (st, ct) = x[0].sin_cos();
        let (sp, cp) = x[1].sin_cos();
        coeffs[0] + coeffs[1] * ct + coeffs[2] * st * cp + coeffs[3] * st * sp
    } else {
        let axis = &geom.param_axes()[0];
        let t = TAU * (x[0] - axis.lo) / (axis.hi - axis.lo);
        coeffs[0] + coeffs[1] * t.cos() + coeffs[2] * t.sin() + coeffs[3] * (2.0 * t).cos()
    }
}

fn normalized(mut u: Vec<f64>, mass: &CsrMatrix) -> Option<Vec<f64>> {
    let n = mass.quad_form(&u).sqrt();
    if !(n > 0.0 && n.is_finite()) {
        return None;
    }
    u.iter_mut().for_each(|v| *v /= n);
    Some(u)
}

/// Seeded test functions: white noise smoothed by one mass multiplication, every other one
/// dominated by a smooth E₀ component. All are M-normalized; zero vectors are skipped.
pub fn sample_vectors(geom: &Geometry, disc: &Discretization, mass: &CsrMatrix, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = disc.grid.n_unknowns();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let noise: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let coeffs: [f64; 4] = [rng.gen_range(0.5..1.5), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-0.5..0.5)];
        let Some(smooth_noise) = normalized(mass.matvec(&noise), mass) else { continue };
        let u = if out.len() % 2 == 0 {
            let v: Vec<f64> = disc.grid.base.coords.iter().map(|x| base_profile(geom, x, &coeffs)).collect();
            let Some(e) = normalized(disc.e0.lift(&v)?, mass) else { continue };
            e.iter().zip(&smooth_noise).map(|(a, b)| a + 0.1 * b).collect()
        } else {
            smooth_noise
        };
        if let Some(u) = normalized(u, mass) {
            out.push(u);
        }
    }
    Ok(out)
}

/// A test function split as u_ε = `tangential` + ε·`transverse`, with `tangential` in
/// range(E₀) and `transverse` M-orthogonal to it. Transverse excitation of size O(ε) keeps
/// F⁰ bounded as ε → 0, which is where the Kato ratio is largest.
#[derive(Debug, Clone)]
pub struct ScaledSample {
    pub tangential: Vec<f64>,
    pub transverse: Vec<f64>,
}

impl ScaledSample {
    pub fn at(&self, eps: f64) -> Vec<f64> {
        self.tangential.iter().zip(&self.transverse).map(|(a, b)| a + eps * b).collect()
    }
}

/// Seeded ε-scaled samples: a smooth E₀ profile plus a smooth first transverse mode
/// with a little mass-smoothed noise, the E₀ part of the latter removed. Every fourth
/// sample has no tangential part.
pub fn scaled_samples(geom: &Geometry, disc: &Discretization, mass: &CsrMatrix, count: usize, seed: u64) -> Result<Vec<ScaledSample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = disc.grid.n_unknowns();
    let mut out = Vec::with_capacity(count);
    let mut coeffs = || -> [f64; 4] {
        [rng.gen_range(0.5..1.5), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-0.5..0.5)]
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    while out.len() < count {
        let (along_c, across_c) = (coeffs(), coeffs());
        let angle = rng.gen_range(0.0..TAU);
        let dir = [angle.cos(), angle.sin()];
        let amplitude = rng.gen_range(0.25..4.0);
        let noise: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let Some(noise) = normalized(mass.matvec(&noise), mass) else { continue };
        let mode = disc.grid.sample(|x, w| {
            let r2: f64 = w.iter().map(|v| v * v).sum();
            let lin: f64 = w.iter().zip(&dir).map(|(a, b)| a * b).sum();
            base_profile(geom, x, &across_c) * lin * (1.0 - r2)
        });
        let Some(mode) = normalized(mode, mass) else { continue };
        let raw: Vec<f64> = mode.iter().zip(&noise).map(|(a, b)| a + 0.05 * b).collect();
        let along = disc.e0.project(&raw)?;
        let perp: Vec<f64> = raw.iter().zip(&along).map(|(a, b)| a - b).collect();
        let Some(perp) = normalized(perp, mass) else { continue };
        let transverse: Vec<f64> = perp.iter().map(|v| amplitude * v).collect();
        let tangential = if out.len() % 4 == 3 {
            vec![0.0; n]
        } else {
            let v: Vec<f64> = disc.grid.base.coords.iter().map(|x| base_profile(geom, x, &along_c)).collect();
            let Some(e) = normalized(disc.e0.lift(&v)?, mass) else { continue };
            e
        };
        out.push(ScaledSample { tangential, transverse });
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct KatoRow {
    pub epsilon: f64,
    /// max over samples of |F − F⁰ − ½⟨u, W̄_L u⟩| / (ε F⁰).
    pub ratio: f64,
    pub worst_sample: usize,
    pub mean_ratio: f64,
    /// Samples with F⁰ ≤ 0.
    pub nonpositive_reference: usize,
    pub nonfinite: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct KatoReport {
    pub grid: GridInfo,
    pub context: StudyContext,
    pub samples: usize,
    pub rows: Vec<KatoRow>,
    /// Largest ratio on the ladder, an empirical Kato constant.
    pub k_fit: f64,
    /// Log-log slope of the ratio against ε.
    pub slope: f64,
    pub contract: ContractOutcome,
    pub metadata: Metadata,
}

struct Prepared {
    geom: Geometry,
    disc: Discretization,
    ctx: StudyContext,
    parts: ReferenceParts,
}

fn prepare(cfg: &StudyConfig) -> Result<Prepared> {
    let geom = Geometry::new(cfg.geometry.clone())?;
    cfg.validate(&geom)?;
    let disc = Discretization::new(&geom, cfg.grid.n_x, cfg.grid.n_fiber)?;
    let ctx = StudyContext::new(&geom, &disc, cfg)?;
    let parts = ReferenceParts::new(&geom, &disc.grid, &disc.pencil)?;
    Ok(Prepared { geom, disc, ctx, parts })
}

/// Relative Kato bound on the ε-ladder (restricted to ε ≤ ε*²).
pub fn kato_check(cfg: &StudyConfig) -> Result<KatoReport> {
    let start = Instant::now();
    let mut meta = Metadata::new();
    let p = prepare(cfg)?;
    if p.ctx.alpha < p.ctx.lambda0 {
        return Err(Error::Validation(format!("α = {} below λ₀ = {}", p.ctx.alpha, p.ctx.lambda0)));
    }
    let eps_list = cfg.epsilons_below(p.ctx.eps_star.powi(2));
    if eps_list.is_empty() {
        return Err(Error::Validation("no ε on the ladder satisfies ε ≤ ε*²".into()));
    }
    let wbar = assemble_potential_mass(&p.geom, &p.disc.grid)?;
    let samples = scaled_samples(&p.geom, &p.disc, &p.parts.mass, cfg.samples, cfg.seed)?;
    let alpha = p.ctx.alpha;
    let rows: Vec<KatoRow> = eps_list
        .par_iter()
        .map(|&eps| {
            let f = assemble_rescaled_form(&p.geom, &p.disc.grid, eps, alpha, &p.disc.pencil)?;
            let f0 = p.parts.form(eps, alpha)?;
            let mut row = KatoRow { epsilon: eps, ratio: 0.0, worst_sample: 0, mean_ratio: 0.0, nonpositive_reference: 0, nonfinite: 0 };
            let mut sum = 0.0;
            for (i, sample) in samples.iter().enumerate() {
                let u = sample.at(eps);
                if u.iter().all(|v| *v == 0.0) {
                    continue;
                }
                let fe = f.energy(&u);
                let fr = f0.energy(&u);
                let lhs = fe - fr - 0.5 * wbar.quad_form(&u);
                if fr <= 0.0 {
                    row.nonpositive_reference += 1;
                    continue;
                }
                let r = lhs.abs() / (eps * fr);
                if !r.is_finite() {
                    row.nonfinite += 1;
                    continue;
                }
                sum += r;
                if r > row.ratio {
                    row.ratio = r;
                    row.worst_sample = i;
                }
            }
            row.mean_ratio = sum / samples.len() as f64;
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let k_fit = rows.iter().fold(0.0f64, |m, r| m.max(r.ratio));
    let (x, y): (Vec<f64>, Vec<f64>) = rows.iter().map(|r| (r.epsilon, r.ratio)).unzip();
    let slope = if rows.len() > 1 { loglog_slope(&x, &y) } else { 0.0 };
    let mut contract = ContractOutcome::new();
    for r in &rows {
        if r.nonfinite > 0 {
            contract.violate(format!("ε = {}: {} non-finite ratios", r.epsilon, r.nonfinite));
        }
        if r.nonpositive_reference > 0 {
            contract.violate(format!("ε = {}: F⁰ ≤ 0 for {} samples", r.epsilon, r.nonpositive_reference));
        }
    }
    if !k_fit.is_finite() {
        contract.violate("Kato constant is not finite".into());
    }
    // A negative slope means the ratio grows as ε shrinks.
    if slope < -KATO_SLOPE_BAND {
        contract.violate(format!("Kato ratio grows as ε decreases: log-log slope {slope:.3}"));
    } else if slope > KATO_SLOPE_BAND {
        contract.flag(format!("Kato ratio decays with log-log slope {slope:.3}; the O(ε) bound is not sharp here"));
    }
    meta.record("total", start);
    Ok(KatoReport { grid: p.disc.info(), context: p.ctx, samples: samples.len(), rows, k_fit, slope, contract, metadata: meta })
}

#[derive(Debug, Clone, Serialize)]
pub struct CoercivityRow {
    pub epsilon: f64,
    /// min over samples of (F − ¼q₀)/q₀.
    pub margin: f64,
    /// min over samples of (F⁰ − ½q₀)/q₀.
    pub reference_margin: f64,
    pub violations: usize,
    pub reference_violations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub epsilon: f64,
    pub sample: usize,
    pub form: String,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoercivityReport {
    pub grid: GridInfo,
    pub context: StudyContext,
    pub samples: usize,
    /// ε-values skipped because they exceed ε* or 1/(2K̂).
    pub skipped: Vec<f64>,
    pub kato_constant: Option<f64>,
    pub rows: Vec<CoercivityRow>,
    pub violating: Vec<Violation>,
    pub contract: ContractOutcome,
    pub metadata: Metadata,
}

/// F_{ε,α} ≥ ¼q₀ʰ and F⁰_{ε,α} ≥ ½q₀ʰ on seeded samples, for ε below ε* and 1/(2K̂).
pub fn coercivity_check(cfg: &StudyConfig, kato_constant: Option<f64>) -> Result<CoercivityReport> {
    let start = Instant::now();
    let mut meta = Metadata::new();
    let p = prepare(cfg)?;
    if p.ctx.alpha < p.ctx.alpha_floor {
        return Err(Error::Validation(format!("α = {} below the coercivity floor {}", p.ctx.alpha, p.ctx.alpha_floor)));
    }
    let mut bound = p.ctx.eps_star;
    if let Some(k) = kato_constant.filter(|k| *k > 0.0) {
        bound = bound.min(0.5 / k);
    }
    let eps_list = cfg.epsilons_below(bound);
    let skipped: Vec<f64> = cfg.epsilons.iter().copied().filter(|e| *e > bound).collect();
    let q0 = p.parts.sobolev()?;
    let samples = sample_vectors(&p.geom, &p.disc, &p.parts.mass, cfg.samples, cfg.seed)?;
    let alpha = p.ctx.alpha;
    let results: Vec<(CoercivityRow, Vec<Violation>)> = eps_list
        .par_iter()
        .map(|&eps| {
            let f = assemble_rescaled_form(&p.geom, &p.disc.grid, eps, alpha, &p.disc.pencil)?;
            let f0 = p.parts.form(eps, alpha)?;
            let mut row = CoercivityRow {
                epsilon: eps,
                margin: f64::INFINITY,
                reference_margin: f64::INFINITY,
                violations: 0,
                reference_violations: 0,
            };
            let mut bad = Vec::new();
            for (i, u) in samples.iter().enumerate() {
                let q = q0.quad_form(u);
                let m = (f.energy(u) - 0.25 * q) / q;
                let m0 = (f0.energy(u) - 0.5 * q) / q;
                row.margin = row.margin.min(m);
                row.reference_margin = row.reference_margin.min(m0);
                if !(m >= 0.0) {
                    row.violations += 1;
                    bad.push(Violation { epsilon: eps, sample: i, form: "rescaled".into(), vector: u.clone() });
                }
                if !(m0 >= 0.0) {
                    row.reference_violations += 1;
                    bad.push(Violation { epsilon: eps, sample: i, form: "reference".into(), vector: u.clone() });
                }
            }
            Ok((row, bad))
        })
        .collect::<Result<_>>()?;
    let mut contract = ContractOutcome::new();
    let mut rows = Vec::new();
    let mut violating = Vec::new();
    for (row, bad) in results {
        if row.violations + row.reference_violations > 0 {
            contract.violate(format!(
                "ε = {}: {} rescaled and {} reference coercivity violations",
                row.epsilon, row.violations, row.reference_violations
            ));
        }
        rows.push(row);
        violating.extend(bad);
    }
    if eps_list.is_empty() {
        contract.violate("no ε on the ladder satisfies the smallness hypothesis".into());
    }
    if !skipped.is_empty() {
        contract.flag(format!("skipped ε above {bound:.4}: {skipped:?}"));
    }
    meta.record("total", start);
    Ok(CoercivityReport {
        grid: p.disc.info(),
        context: p.ctx,
        samples: samples.len(),
        skipped,
        kato_constant,
        rows,
        violating,
        contract,
        metadata: meta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Datum {
    /// u₀ʰ ⊗ v with a smooth base profile v.
    GroundFiber,
    /// A smooth function with components inside and outside E₀.
    Generic,
    /// Odd in w, so E₀u = 0.
    Antisymmetric,
}

fn odd_profile(w: &[f64]) -> f64 {
    let r2: f64 = w.iter().map(|v| v * v).sum();
    w[0] * (1.0 - r2)
}

fn datum_vector(geom: &Geometry, disc: &Discretization, datum: Datum, mass: &CsrMatrix) -> Result<Vec<f64>> {
    let coeffs = [1.0, 0.5, 0.25, 0.0];
    let u = match datum {
        Datum::GroundFiber => {
            let v: Vec<f64> = disc.grid.base.coords.iter().map(|x| base_profile(geom, x, &coeffs)).collect();
            disc.e0.lift(&v)?
        }
        Datum::Generic => disc.grid.sample(|x, w| {
            let r2: f64 = w.iter().map(|v| v * v).sum();
            base_profile(geom, x, &coeffs) * (1.0 - r2) * (1.0 + 0.5 * w[0]) + 0.3 * odd_profile(w)
        }),
        Datum::Antisymmetric => disc.grid.sample(|x, w| base_profile(geom, x, &coeffs) * odd_profile(w)),
    };
    normalized(u, mass).ok_or_else(|| Error::Validation("initial datum vanishes on the grid".into()))
}

/// Fixed M-normalized perturbation orthogonal to E₀, for the u_ε = u + ε φ variant.
fn perturbation(disc: &Discretization, mass: &CsrMatrix) -> Result<Vec<f64>> {
    let raw = disc.grid.sample(|x, w| (1.0 + 0.5 * x[0].cos()) * odd_profile(w) + w[0] * w[0]);
    let proj = disc.e0.project(&raw)?;
    let perp: Vec<f64> = raw.iter().zip(&proj).map(|(a, b)| a - b).collect();
    normalized(perp, mass).ok_or_else(|| Error::Validation("perturbation vanishes on the grid".into()))
}

#[derive(Debug, Clone, Serialize)]
pub struct SemigroupRow {
    pub epsilon: f64,
    pub t: f64,
    /// ‖e^{−tΔ(ε)/2}u − E₀ e^{−t(Δ_L + W_L)/2} E₀u‖_M.
    pub err: f64,
    /// The same with u replaced by u + εφ.
    pub err_sequence: f64,
    /// ‖e^{−tΔ(ε)/2}(u + εφ) − e^{−tΔ(ε)/2}u‖_M.
    pub sequence_gap: f64,
    pub truncation_bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SemigroupReport {
    pub grid: GridInfo,
    pub context: StudyContext,
    pub datum: Datum,
    pub pairs: usize,
    pub rows: Vec<SemigroupRow>,
    /// sup over t of err, per ε.
    pub sup_err: Vec<(f64, f64)>,
    pub contract: ContractOutcome,
    pub metadata: Metadata,
}

fn m_distance(a: &[f64], b: &[f64], mass: &CsrMatrix) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    mass.quad_form(&d).max(0.0).sqrt()
}

/// Heat semigroup of Δ(ε) against the lifted limit semigroup on the ε-ladder.
pub fn semigroup_convergence_study(cfg: &StudyConfig, times: &[f64], datum: Datum) -> Result<SemigroupReport> {
    let start = Instant::now();
    let mut meta = Metadata::new();
    let p = prepare(cfg)?;
    if let Some(t) = times.iter().find(|t| !(**t > 0.0)) {
        return Err(Error::Domain(format!("heat time {t} must be positive")));
    }
    let mass = &p.parts.mass;
    let pairs = MAX_PAIRS.min(p.disc.grid.n_unknowns() / 4).min(p.disc.grid.base.n_dofs);
    let u = datum_vector(&p.geom, &p.disc, datum, mass)?;
    let phi = perturbation(&p.disc, mass)?;

    let limit_form = assemble_limit_form_on(&p.geom, &p.disc.grid.base, 0.0)?;
    let limit: SpectrumResult = if limit_form.n() <= crate::eigen::dense::DENSE_LIMIT {
        dense_eigenpairs(&limit_form, pairs)?
    } else {
        lowest_eigenpairs_with(&limit_form, pairs, &LobpcgOptions { tol: cfg.tol, seed: cfg.seed, ..Default::default() })?
    };
    let v = p.disc.e0.restrict(&u)?;
    let limit_side: Vec<Vec<f64>> = times
        .iter()
        .map(|&t| p.disc.e0.lift(&heat_apply(&limit, t, &v, &limit_form.mass)?.value))
        .collect::<Result<_>>()?;

    let alpha = p.ctx.alpha;
    let per_eps: Vec<Vec<SemigroupRow>> = cfg
        .epsilons
        .par_iter()
        .map(|&eps| {
            let form = assemble_rescaled_form(&p.geom, &p.disc.grid, eps, alpha, &p.disc.pencil)?;
            let spec = p.disc.solve(&form, pairs, cfg)?.shifted(alpha);
            let u_eps: Vec<f64> = u.iter().zip(&phi).map(|(a, b)| a + eps * b).collect();
            times
                .iter()
                .zip(&limit_side)
                .map(|(&t, lim)| {
                    let h = heat_apply(&spec, t, &u, mass)?;
                    let hs = heat_apply(&spec, t, &u_eps, mass)?;
                    Ok(SemigroupRow {
                        epsilon: eps,
                        t,
                        err: m_distance(&h.value, lim, mass),
                        err_sequence: m_distance(&hs.value, lim, mass),
                        sequence_gap: m_distance(&hs.value, &h.value, mass),
                        truncation_bound: h.truncation_bound.max(hs.truncation_bound),
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let rows: Vec<SemigroupRow> = per_eps.into_iter().flatten().collect();

    let mut contract = ContractOutcome::new();
    for &t in times {
        let errs: Vec<&SemigroupRow> = rows.iter().filter(|r| r.t == t).collect();
        for w in errs.windows(2) {
            if w[1].err >= w[0].err && w[0].err > NOISE_FLOOR {
                contract.violate(format!("t = {t}: err does not decrease from ε = {} to ε = {}", w[0].epsilon, w[1].epsilon));
            }
        }
        if let Some(last) = errs.last() {
            if last.sequence_gap > SEQUENCE_TOL {
                contract.violate(format!(
                    "t = {t}: sequence datum differs by {:.3e} at ε = {}",
                    last.sequence_gap, last.epsilon
                ));
            }
        }
    }
    let sup_err: Vec<(f64, f64)> = cfg
        .epsilons
        .iter()
        .map(|&e| (e, rows.iter().filter(|r| r.epsilon == e).fold(0.0f64, |m, r| m.max(r.err))))
        .collect();
    for w in sup_err.windows(2) {
        if w[1].1 >= w[0].1 && w[0].1 > NOISE_FLOOR {
            contract.violate(format!("sup over t of err does not decrease at ε = {}", w[1].0));
        }
    }
    meta.record("total", start);
    Ok(SemigroupReport { grid: p.disc.info(), context: p.ctx, datum, pairs, rows, sup_err, contract, metadata: meta })
}

#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticsRow {
    pub epsilon: f64,
    /// sup ‖H*(ε) − H*(0)‖ of the rescaled dual metric perturbation.
    pub dual_metric: f64,
    /// sup |ρ∘σ_ε⁻¹ − 1|.
    pub density: f64,
    /// sup |d log ρ∘σ_ε⁻¹ + τ| over the normal components.
    pub log_density_gradient: f64,
    /// sup |W∘σ_ε⁻¹ − W_L∘π|.
    pub potential: f64,
}

impl AsymptoticsRow {
    pub fn values(&self) -> [f64; 4] {
        [self.dual_metric, self.density, self.log_density_gradient, self.potential]
    }
}

pub const ASYMPTOTIC_QUANTITIES: [&str; 4] = ["dual_metric", "density", "log_density_gradient", "potential"];

#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticsReport {
    pub rows: Vec<AsymptoticsRow>,
    /// Log-log slopes per quantity; +∞ marks a quantity that vanishes identically.
    pub slopes: [f64; 4],
    pub identically_zero: [bool; 4],
    pub contract: ContractOutcome,
    pub metadata: Metadata,
}

fn fiber_probes(codim: usize) -> Vec<Vec<f64>> {
    if codim == 1 {
        vec![vec![-1.0], vec![-0.5], vec![0.5], vec![1.0]]
    } else {
        let mut out = Vec::new();
        for r in [0.5, 1.0] {
            for k in 0..8 {
                let t = k as f64 * TAU / 8.0 + 0.1;
                out.push(vec![r * t.cos(), r * t.sin()]);
            }
        }
        out
    }
}

fn asymptotic_row(geom: &Geometry, points: &[Vec<f64>], probes: &[Vec<f64>], eps: f64) -> Result<AsymptoticsRow> {
    let (l, c) = (geom.l(), geom.codim());
    let m = l + c;
    let mut row = AsymptoticsRow { epsilon: eps, dual_metric: 0.0, density: 0.0, log_density_gradient: 0.0, potential: 0.0 };
    for x in points {
        let cd = geom.curvature_at(x)?;
        let wl = effective_potential_from(&cd);
        for w in probes {
            let ws: Vec<f64> = w.iter().map(|v| eps * v).collect();
            let exact = geom.exact_tube_metric(x, &ws)?;
            let inv = exact.g.try_inverse().ok_or_else(|| Error::Domain("singular tube metric".into()))?;
            let reference = reference_dual(&cd, &ws);
            let scale = |i: usize| if i < l { 1.0 } else { 1.0 / eps };
            let h0 = DMatrix::from_fn(m, m, |i, j| {
                if i < l || j < l {
                    0.0
                } else {
                    let (mu, nu) = (i - l, j - l);
                    let mut s = 0.0;
                    for a in 0..c {
                        for b in 0..c {
                            s += w[a] * w[b] * cd.fiber_curv(mu, a, nu, b);
                        }
                    }
                    s / 3.0
                }
            });
            for i in 0..m {
                for j in 0..m {
                    let h = scale(i) * scale(j) * (inv[(i, j)] - reference[(i, j)]) - h0[(i, j)];
                    row.dual_metric = row.dual_metric.max(h.abs());
                }
            }
            row.density = row.density.max((exact.rho - 1.0).abs());
            let grad = log_rho_gradient(geom, x, &ws)?;
            for a in 0..c {
                row.log_density_gradient = row.log_density_gradient.max((grad[l + a] + cd.trace_weingarten(a)).abs());
            }
            row.potential = row.potential.max((potential_w(geom, x, &ws)? - wl).abs());
        }
    }
    Ok(row)
}

/// Sup-norm decay of the four tube asymptotics on the ε-ladder, sampled on base cell centers
/// of a 16-cell mesh and fixed fiber probes including the boundary.
pub fn asymptotics_check(geom: &Geometry, epsilons: &[f64]) -> Result<AsymptoticsReport> {
    let start = Instant::now();
    let mut meta = Metadata::new();
    if epsilons.len() < 2 {
        return Err(Error::Validation("at least two ε-values are needed for a slope".into()));
    }
    if let Some(e) = epsilons.iter().find(|e| !(**e > 0.0 && **e <= geom.eps_max())) {
        return Err(Error::Validation(format!("ε = {e} outside (0, {}]", geom.eps_max())));
    }
    let points = BaseMesh::new(geom, 16)?.cell_centers();
    let probes = fiber_probes(geom.codim());
    let rows: Vec<AsymptoticsRow> =
        epsilons.par_iter().map(|&e| asymptotic_row(geom, &points, &probes, e)).collect::<Result<_>>()?;
    let mut slopes = [0.0; 4];
    let mut zero = [false; 4];
    let mut contract = ContractOutcome::new();
    for q in 0..4 {
        let y: Vec<f64> = rows.iter().map(|r| r.values()[q]).collect();
        let noise = if q == 3 { FD_NOISE } else { 1e-12 };
        if y.iter().all(|v| *v <= noise) {
            zero[q] = true;
            slopes[q] = f64::INFINITY;
            continue;
        }
        slopes[q] = loglog_slope(epsilons, &y);
        if !(slopes[q] >= ASYMPTOTIC_SLOPE) {
            contract.violate(format!("{}: log-log slope {:.3} below {ASYMPTOTIC_SLOPE}", ASYMPTOTIC_QUANTITIES[q], slopes[q]));
        }
    }
    meta.record("total", start);
    Ok(AsymptoticsReport { rows, slopes, identically_zero: zero, contract, metadata: meta })
}
