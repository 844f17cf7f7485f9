//! Dirichlet spectrum of the unit ball in one or two dimensions and the
//! fiberwise projection onto its ground state.

pub mod bessel;

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use bessel::{bessel_j, bessel_j_zero, bessel_j_zeros};

fn check_codim(codim: usize) -> Result<()> {
    if codim == 1 || codim == 2 {
        Ok(())
    } else {
        Err(Error::Unsupported(format!("fiber dimension {codim} (only 1 and 2)")))
    }
}

/// The k-th distinct Dirichlet eigenvalue of the unit ball, k ≥ 0.
pub fn ball_eigenvalue(codim: usize, k: usize) -> Result<f64> {
    check_codim(codim)?;
    if codim == 1 {
        let a = (k as f64 + 1.0) * PI / 2.0;
        return Ok(a * a);
    }
    Ok(disk_ladder(k + 1)[k])
}

/// First `count` distinct squared zeros of J_ν over all orders ν ≥ 0.
fn disk_ladder(count: usize) -> Vec<f64> {
    let mut all = Vec::new();
    for nu in 0..=count as u32 {
        for z in bessel_j_zeros(nu, count) {
            all.push(z * z);
        }
    }
    all.sort_by(f64::total_cmp);
    all.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    all.truncate(count);
    all
}

/// Normalized radial ground state U₀ with ∫_B U₀² = 1.
pub fn ground_state(codim: usize, r: f64) -> Result<f64> {
    check_codim(codim)?;
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::Domain(format!("radius {r} outside [0, 1]")));
    }
    Ok(ground_state_unchecked(codim, r))
}

fn ground_state_unchecked(codim: usize, r: f64) -> f64 {
    if r >= 1.0 {
        return 0.0;
    }
    if codim == 1 {
        (0.5 * PI * r).cos()
    } else {
        let j = bessel_j_zero(0, 1);
        bessel_j(0, j * r) / (PI.sqrt() * bessel_j(1, j).abs())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BallSpectrum {
    pub codim: usize,
    /// Distinct eigenvalues, ascending.
    pub lambda: Vec<f64>,
    /// √(1 − λ₀/λ₁).
    pub eps_star: f64,
    #[serde(skip)]
    zero: f64,
}

impl BallSpectrum {
    pub fn new(codim: usize, levels: usize) -> Result<Self> {
        check_codim(codim)?;
        let levels = levels.max(2);
        let lambda: Vec<f64> = if codim == 1 {
            (0..levels).map(|k| ball_eigenvalue(1, k).unwrap()).collect()
        } else {
            disk_ladder(levels)
        };
        let eps_star = (1.0 - lambda[0] / lambda[1]).sqrt();
        let zero = if codim == 1 { 0.5 * PI } else { lambda[0].sqrt() };
        Ok(BallSpectrum { codim, lambda, eps_star, zero })
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda[0]
    }

    pub fn ground_state(&self, r: f64) -> f64 {
        if r >= 1.0 {
            return 0.0;
        }
        if self.codim == 1 {
            (self.zero * r).cos()
        } else {
            bessel_j(0, self.zero * r) / (PI.sqrt() * bessel_j(1, self.zero).abs())
        }
    }
}

/// Quadrature rule on the unit ball.
#[derive(Debug, Clone)]
pub struct FiberQuadrature {
    pub codim: usize,
    /// Points as normal-coordinate vectors of length `codim`.
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

/// Gauss–Legendre nodes and weights on (−1, 1).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

impl FiberQuadrature {
    /// Tensor Gauss rule: `n` Legendre points on the interval, or `n` radial
    /// Legendre points times `2n` equispaced angles (offset by `angle`) on the disk.
    pub fn gauss(codim: usize, n: usize, angle: f64) -> Result<Self> {
        check_codim(codim)?;
        let (x, w) = gauss_legendre(n);
        if codim == 1 {
            return Ok(FiberQuadrature {
                codim,
                points: x.iter().map(|&v| vec![v]).collect(),
                weights: w,
            });
        }
        let na = 2 * n;
        let da = 2.0 * PI / na as f64;
        let mut points = Vec::with_capacity(n * na);
        let mut weights = Vec::with_capacity(n * na);
        for (xi, wi) in x.iter().zip(&w) {
            let r = 0.5 * (xi + 1.0);
            for a in 0..na {
                let t = angle + a as f64 * da;
                points.push(vec![r * t.cos(), r * t.sin()]);
                weights.push(0.5 * wi * r * da);
            }
        }
        Ok(FiberQuadrature { codim, points, weights })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        self.points.iter().map(|p| f(p)).collect()
    }
}

fn norm(p: &[f64]) -> f64 {
    p.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Ground-state coefficient ⟨U₀, u⟩ and the projection coefficient·U₀ sampled at the quadrature points.
pub fn fiber_project(u: &[f64], quad: &FiberQuadrature) -> Result<(f64, Vec<f64>)> {
    if u.len() != quad.len() {
        return Err(Error::Shape(format!(
            "fiber samples have length {}, quadrature has {} points",
            u.len(),
            quad.len()
        )));
    }
    let spec = BallSpectrum::new(quad.codim, 2)?;
    let u0: Vec<f64> = quad.points.iter().map(|p| spec.ground_state(norm(p))).collect();
    let coeff: f64 = u.iter().zip(&u0).zip(&quad.weights).map(|((a, b), w)| a * b * w).sum();
    Ok((coeff, u0.iter().map(|v| coeff * v).collect()))
}
