//! Blocked LOBPCG for the lowest eigenpairs of a sparse symmetric pencil (A, M).

use nalgebra::{Cholesky, DMatrix, Dyn, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::dense::fix_signs;
use crate::assembly::sparse::{dot, CsrMatrix};
use crate::error::{Error, Result};

const DROP: f64 = 1e-13;
const REORTH_EVERY: usize = 25;

#[derive(Debug, Clone, Copy)]
pub struct LobpcgOptions {
    pub tol: f64,
    pub seed: u64,
    pub max_iter: usize,
    /// Extra block columns beyond the requested count.
    pub pad: usize,
    /// Size of the diagonal blocks of A inverted by the preconditioner; 1 is plain Jacobi.
    pub precond_block: usize,
}

impl Default for LobpcgOptions {
    fn default() -> Self {
        LobpcgOptions { tol: 1e-8, seed: super::DEFAULT_SEED, max_iter: 5000, pad: 3, precond_block: 1 }
    }
}

pub struct LobpcgOutput {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

/// M-orthonormal basis of span(S) via scaled eigen-decomposition of the Gram matrix,
/// dropping numerically dependent directions. Returns (Q, MQ).
fn svqb(s: DMatrix<f64>, ms: DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut s = s;
    let mut ms = ms;
    for _ in 0..2 {
        let g = s.transpose() * &ms;
        let g = (&g + g.transpose()) * 0.5;
        let d: Vec<f64> = g.diagonal().iter().map(|&v| if v > 0.0 { 1.0 / v.sqrt() } else { 0.0 }).collect();
        let dg = DMatrix::from_fn(g.nrows(), g.ncols(), |i, j| d[i] * g[(i, j)] * d[j]);
        let eig = SymmetricEigen::new(dg);
        let top = eig.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v));
        let keep: Vec<usize> = (0..eig.eigenvalues.len()).filter(|&i| eig.eigenvalues[i] > DROP * top).collect();
        let t = DMatrix::from_fn(g.nrows(), keep.len(), |i, c| {
            d[i] * eig.eigenvectors[(i, keep[c])] / eig.eigenvalues[keep[c]].sqrt()
        });
        s = &s * &t;
        ms = &ms * &t;
        let low = keep.iter().fold(f64::INFINITY, |m, &i| m.min(eig.eigenvalues[i]));
        if low > 1e-4 * top {
            break;
        }
    }
    (s, ms)
}

/// Rayleigh–Ritz on an M-orthonormal basis Q: lowest `b` Ritz values and coefficients.
fn rayleigh_ritz(q: &DMatrix<f64>, aq: &DMatrix<f64>, b: usize) -> (Vec<f64>, DMatrix<f64>) {
    let h = q.transpose() * aq;
    let h = (&h + h.transpose()) * 0.5;
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let b = b.min(order.len());
    let vals = order[..b].iter().map(|&i| eig.eigenvalues[i]).collect();
    let y = DMatrix::from_fn(q.ncols(), b, |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, y)
}

/// Inverse of the block diagonal of A over consecutive index ranges, falling back to
/// the diagonal where a block is not positive definite.
struct Preconditioner {
    block: usize,
    diag_inv: Vec<f64>,
    factors: Vec<Option<Cholesky<f64, Dyn>>>,
}

impl Preconditioner {
    fn new(a: &CsrMatrix, block: usize) -> Result<Self> {
        let n = a.n();
        let diag_inv = a.diagonal().iter().map(|d| 1.0 / d.abs().max(f64::MIN_POSITIVE)).collect();
        if block <= 1 {
            return Ok(Preconditioner { block: 1, diag_inv, factors: Vec::new() });
        }
        if !n.is_multiple_of(block) {
            return Err(Error::Shape(format!("preconditioner block {block} does not divide {n}")));
        }
        let factors = (0..n / block)
            .into_par_iter()
            .map(|b| {
                let lo = b * block;
                let mut d = DMatrix::zeros(block, block);
                for i in 0..block {
                    for (j, v) in a.row(lo + i) {
                        if j >= lo && j < lo + block {
                            d[(i, j - lo)] = v;
                        }
                    }
                }
                Cholesky::new((&d + d.transpose()) * 0.5)
            })
            .collect();
        Ok(Preconditioner { block, diag_inv, factors })
    }

    fn apply(&self, w: &mut DMatrix<f64>) {
        let s = self.block;
        if s == 1 {
            for mut col in w.column_iter_mut() {
                for (v, d) in col.iter_mut().zip(&self.diag_inv) {
                    *v *= d;
                }
            }
            return;
        }
        let c = w.ncols();
        let solved: Vec<DMatrix<f64>> = self
            .factors
            .par_iter()
            .enumerate()
            .map(|(b, f)| {
                let rhs = w.view((b * s, 0), (s, c)).into_owned();
                match f {
                    Some(ch) => ch.solve(&rhs),
                    None => DMatrix::from_fn(s, c, |i, j| rhs[(i, j)] * self.diag_inv[b * s + i]),
                }
            })
            .collect();
        for (b, blk) in solved.iter().enumerate() {
            w.view_mut((b * s, 0), (s, c)).copy_from(blk);
        }
    }
}

fn hcat(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let n = blocks[0].nrows();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(n, cols);
    let mut c0 = 0;
    for b in blocks {
        out.view_mut((0, c0), (n, b.ncols())).copy_from(*b);
        c0 += b.ncols();
    }
    out
}

fn select_columns(m: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), cols.len(), |r, c| m[(r, cols[c])])
}

/// ‖r‖_{M⁻¹} = √(rᵀ M⁻¹ r) by Jacobi-preconditioned conjugate gradients on M.
pub fn dual_norm(mass: &CsrMatrix, r: &[f64]) -> f64 {
    let n = r.len();
    let dinv: Vec<f64> = mass.diagonal().iter().map(|d| 1.0 / d).collect();
    let mut z = vec![0.0; n];
    let mut res = r.to_vec();
    let mut y: Vec<f64> = res.iter().zip(&dinv).map(|(a, b)| a * b).collect();
    let mut p = y.clone();
    let mut ry = dot(&res, &y);
    let target = ry.abs() * 1e-28;
    let mut ap = vec![0.0; n];
    for _ in 0..10 * n.max(10) {
        if ry <= target || ry == 0.0 {
            break;
        }
        mass.matvec_into(&p, &mut ap);
        let step = ry / dot(&p, &ap);
        for i in 0..n {
            z[i] += step * p[i];
            res[i] -= step * ap[i];
        }
        y = res.iter().zip(&dinv).map(|(a, b)| a * b).collect();
        let ry_new = dot(&res, &y);
        let beta = ry_new / ry;
        ry = ry_new;
        for i in 0..n {
            p[i] = y[i] + beta * p[i];
        }
    }
    dot(r, &z).max(0.0).sqrt()
}

fn residual_columns(ax: &DMatrix<f64>, mx: &DMatrix<f64>, vals: &[f64]) -> DMatrix<f64> {
    let mut r = ax.clone();
    for (j, &l) in vals.iter().enumerate() {
        r.column_mut(j).axpy(-l, &mx.column(j), 1.0);
    }
    r
}

pub fn lobpcg(a: &CsrMatrix, m: &CsrMatrix, k: usize, opts: &LobpcgOptions) -> Result<LobpcgOutput> {
    let n = a.n();
    let b = (k + opts.pad).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let x0 = DMatrix::from_fn(n, b, |_, _| rng.gen_range(-1.0..1.0));
    let prec = Preconditioner::new(a, opts.precond_block)?;
    let mdiag_inv: Vec<f64> = m.diagonal().iter().map(|d| 1.0 / d).collect();

    let (mut x, mut mx) = svqb(x0.clone(), m.mul_block(&x0));
    let mut ax = a.mul_block(&x);
    let (mut vals, y) = rayleigh_ritz(&x, &ax, b);
    x = &x * &y;
    ax = &ax * &y;
    mx = &mx * &y;
    let mut p: Option<DMatrix<f64>> = None;
    let mut thresh = opts.tol;
    let mut best = vec![f64::INFINITY; k];

    for it in 1..=opts.max_iter {
        let r = residual_columns(&ax, &mx, &vals);
        let est: Vec<f64> = (0..b)
            .map(|j| r.column(j).iter().zip(&mdiag_inv).map(|(v, d)| v * v * d).sum::<f64>().sqrt())
            .collect();
        best.copy_from_slice(&est[..k]);
        if est[..k].iter().all(|&e| e <= thresh) {
            let exact: Vec<f64> = (0..k)
                .map(|j| dual_norm(m, r.column(j).as_slice()))
                .collect();
            let worst = exact.iter().fold(0.0f64, |w, &e| w.max(e));
            if worst <= opts.tol {
                let mut vectors = x.columns(0, k).into_owned();
                fix_signs(&mut vectors);
                return Ok(LobpcgOutput { values: vals[..k].to_vec(), vectors, residuals: exact, iterations: it });
            }
            thresh *= 0.5 * opts.tol / worst;
        }
        let active: Vec<usize> = (0..b).filter(|&j| j >= k || est[j] > thresh).collect();
        let mut w = select_columns(&r, &active);
        prec.apply(&mut w);
        let s = match &p {
            Some(p) => hcat(&[&x, &w, &select_columns(p, &active)]),
            None => hcat(&[&x, &w]),
        };
        let ms = m.mul_block(&s);
        let (q, mq) = svqb(s, ms);
        let aq = a.mul_block(&q);
        let (new_vals, y) = rayleigh_ritz(&q, &aq, b);
        if y.ncols() < b {
            return Err(Error::Convergence { iterations: it, worst: f64::INFINITY, residuals: best });
        }
        let x_new = &q * &y;
        let c = mx.transpose() * &x_new;
        p = Some(&x_new - &x * c);
        x = x_new;
        ax = &aq * &y;
        mx = &mq * &y;
        vals = new_vals;
        if it % REORTH_EVERY == 0 {
            let (xq, mxq) = svqb(x, mx);
            let axq = a.mul_block(&xq);
            let (v2, y2) = rayleigh_ritz(&xq, &axq, b);
            x = &xq * &y2;
            ax = &axq * &y2;
            mx = &mxq * &y2;
            vals = v2;
        }
    }
    let worst = best.iter().fold(0.0f64, |w, &e| w.max(e));
    Err(Error::Convergence { iterations: opts.max_iter, worst, residuals: best })
}
