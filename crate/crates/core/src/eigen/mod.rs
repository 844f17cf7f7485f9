//! Lowest eigenpairs of symmetric pencils and the spectral heat semigroup.

pub mod dense;
pub mod lobpcg;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::assembly::sparse::dot;
use crate::assembly::{CsrMatrix, FormPair};
use crate::error::{Error, Result};
pub use lobpcg::{dual_norm, LobpcgOptions};

pub const DEFAULT_SEED: u64 = 0x5EED;
pub const MAX_PAIRS: usize = 20;
pub const MIN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct SolverMeta {
    pub method: String,
    pub tol: f64,
    pub seed: u64,
    pub max_iter: usize,
    pub block_size: usize,
    /// Amount subtracted from the pencil eigenvalues (α for shifted forms).
    pub shift: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumResult {
    pub eigenvalues: Vec<f64>,
    /// M-orthonormal eigenvectors as columns.
    #[serde(skip)]
    pub eigenvectors: DMatrix<f64>,
    /// ‖Av − λMv‖_{M⁻¹} per pair.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub meta: SolverMeta,
}

impl SpectrumResult {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn vector(&self, j: usize) -> &[f64] {
        let n = self.eigenvectors.nrows();
        &self.eigenvectors.as_slice()[j * n..(j + 1) * n]
    }

    /// The same pairs with `shift` subtracted from every eigenvalue.
    pub fn shifted(&self, shift: f64) -> SpectrumResult {
        let mut out = self.clone();
        out.eigenvalues.iter_mut().for_each(|v| *v -= shift);
        out.meta.shift += shift;
        out
    }
}

fn check_request(n: usize, k: usize, tol: f64) -> Result<()> {
    if k == 0 || k > MAX_PAIRS {
        return Err(Error::Validation(format!("eigenpair count {k} outside 1..={MAX_PAIRS}")));
    }
    if k > n {
        return Err(Error::Validation(format!("{k} eigenpairs requested from {n} unknowns")));
    }
    if !(tol >= MIN_TOL) {
        return Err(Error::Validation(format!("tolerance {tol} below {MIN_TOL:e}")));
    }
    Ok(())
}

fn residuals_of(pencil: &FormPair, vals: &[f64], v: &DMatrix<f64>) -> Vec<f64> {
    let n = v.nrows();
    vals.iter()
        .enumerate()
        .map(|(j, &l)| {
            let x = &v.as_slice()[j * n..(j + 1) * n];
            let ax = pencil.stiffness.matvec(x);
            let mx = pencil.mass.matvec(x);
            let r: Vec<f64> = ax.iter().zip(&mx).map(|(a, b)| a - l * b).collect();
            dual_norm(&pencil.mass, &r)
        })
        .collect()
}

/// Lowest `k` eigenpairs of the pencil by LOBPCG; pencils too small for a
/// three-block search space are handed to the dense solver.
pub fn lowest_eigenpairs(pencil: &FormPair, k: usize, tol: f64, seed: u64) -> Result<SpectrumResult> {
    let opts = LobpcgOptions { tol, seed, ..LobpcgOptions::default() };
    lowest_eigenpairs_with(pencil, k, &opts)
}

pub fn lowest_eigenpairs_with(pencil: &FormPair, k: usize, opts: &LobpcgOptions) -> Result<SpectrumResult> {
    let n = pencil.n();
    check_request(n, k, opts.tol)?;
    if pencil.mass.n() != n {
        return Err(Error::Shape("stiffness and mass differ in size".into()));
    }
    if n < 4 * (k + opts.pad) {
        let mut out = dense_eigenpairs(pencil, k)?;
        out.meta.tol = opts.tol;
        out.meta.seed = opts.seed;
        return Ok(out);
    }
    let res = lobpcg::lobpcg(&pencil.stiffness, &pencil.mass, k, opts)?;
    Ok(SpectrumResult {
        eigenvalues: res.values,
        eigenvectors: res.vectors,
        residuals: res.residuals,
        iterations: res.iterations,
        meta: SolverMeta {
            method: "lobpcg".into(),
            tol: opts.tol,
            seed: opts.seed,
            max_iter: opts.max_iter,
            block_size: k + opts.pad,
            shift: 0.0,
        },
    })
}

/// Dense reference solve, limited to `dense::DENSE_LIMIT` unknowns.
pub fn dense_eigenpairs(pencil: &FormPair, k: usize) -> Result<SpectrumResult> {
    let n = pencil.n();
    if n > dense::DENSE_LIMIT {
        return Err(Error::Validation(format!("dense solve limited to {} unknowns, got {n}", dense::DENSE_LIMIT)));
    }
    let (vals, vecs) = dense::generalized_lowest(&pencil.stiffness.to_dense(), &pencil.mass.to_dense(), k)?;
    let residuals = residuals_of(pencil, &vals, &vecs);
    Ok(SpectrumResult {
        eigenvalues: vals,
        eigenvectors: vecs,
        residuals,
        iterations: 0,
        meta: SolverMeta { method: "dense".into(), tol: 0.0, seed: 0, max_iter: 0, block_size: k, shift: 0.0 },
    })
}

#[derive(Debug, Clone)]
pub struct HeatResult {
    pub value: Vec<f64>,
    /// Bound on the M-norm of the part of e^{−tΔ/2}u outside the computed pairs.
    pub truncation_bound: f64,
}

/// Σⱼ e^{−tλⱼ/2} ⟨vⱼ, u⟩_M vⱼ over the pairs in `spec`.
pub fn heat_apply(spec: &SpectrumResult, t: f64, u: &[f64], mass: &CsrMatrix) -> Result<HeatResult> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("heat time t = {t} must be positive")));
    }
    let n = spec.eigenvectors.nrows();
    if u.len() != n || mass.n() != n {
        return Err(Error::Shape(format!("vector of length {} for eigenvectors of length {n}", u.len())));
    }
    let mu = mass.matvec(u);
    let mut value = vec![0.0; n];
    let mut captured = 0.0;
    for (j, &l) in spec.eigenvalues.iter().enumerate() {
        let v = spec.vector(j);
        let c = dot(v, &mu);
        captured += c * c;
        let f = (-0.5 * t * l).exp() * c;
        for (o, x) in value.iter_mut().zip(v) {
            *o += f * x;
        }
    }
    let rest = (dot(u, &mu) - captured).max(0.0).sqrt();
    let top = spec.eigenvalues.last().copied().unwrap_or(0.0);
    Ok(HeatResult { value, truncation_bound: (-0.5 * t * top).exp() * rest })
}
