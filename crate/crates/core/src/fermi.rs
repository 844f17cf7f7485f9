//! Second-order expansions of the tube metric in Fermi coordinates, the
//! reference metric, the log-density and the effective potential.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::assembly::grid::FermiGrid;
use crate::ball::ball_eigenvalue;
use crate::error::{Error, Result};
use crate::geometry::{CurvatureData, Geometry};

/// Taylor coefficients of the metric blocks and log ρ at a point of L.
///
/// The metric is g = [[a + c b⁻¹ cᵀ, c], [cᵀ, b]] with
/// a = a0 + wᵅ a1[α] + wᵅwᵝ a2[α][β], c = wᵅ c1[α], b = Id + wᵅwᵝ b2[α][β].
#[derive(Debug, Clone, Serialize)]
pub struct FermiJet {
    pub l: usize,
    pub codim: usize,
    pub a0: DMatrix<f64>,
    pub a1: Vec<DMatrix<f64>>,
    pub a2: Vec<Vec<DMatrix<f64>>>,
    /// l × codim, entry (i, σ) = C[i][α][σ].
    pub c1: Vec<DMatrix<f64>>,
    /// codim × codim, entry (μ, σ) = −R_{μασβ}/3.
    pub b2: Vec<Vec<DMatrix<f64>>>,
    pub logrho1: Vec<f64>,
    pub logrho2: Vec<Vec<f64>>,
}

pub fn metric_jet(geom: &Geometry, x: &[f64]) -> Result<FermiJet> {
    Ok(jet_from_curvature(&geom.curvature_at(x)?))
}

pub fn jet_from_curvature(cd: &CurvatureData) -> FermiJet {
    let (l, c) = (cd.l, cd.codim);
    let g = &cd.g_l;
    let g_inv = g.clone().try_inverse().expect("g_L invertible");
    let a1 = cd.weingarten.iter().map(|a| g * a * -2.0).collect();
    let mixed = |al: usize, be: usize| DMatrix::from_fn(l, l, |i, j| cd.mixed_curv(i, al, j, be));
    let mut a2 = vec![vec![DMatrix::zeros(l, l); c]; c];
    let mut b2 = vec![vec![DMatrix::zeros(c, c); c]; c];
    let mut logrho2 = vec![vec![0.0; c]; c];
    for al in 0..c {
        for be in 0..c {
            let aa = &cd.weingarten[al];
            let ab = &cd.weingarten[be];
            let prod = g * aa * ab;
            let prod_t = g * ab * aa;
            a2[al][be] = (prod + prod_t) * 0.5 - (mixed(al, be) + mixed(be, al)) * 0.5;
            b2[al][be] = DMatrix::from_fn(c, c, |mu, s| {
                -(cd.fiber_curv(mu, al, s, be) + cd.fiber_curv(s, be, mu, al)) / 6.0
            });
            let tr_aa = (aa * ab).trace();
            let fib: f64 = (0..c).map(|mu| cd.fiber_curv(mu, al, mu, be)).sum();
            let tan: f64 = (g_inv.component_mul(&mixed(al, be))).sum();
            logrho2[al][be] = -0.5 * (tr_aa + fib / 3.0 + tan);
        }
    }
    // symmetrize the scalar block exactly
    for al in 0..c {
        for be in 0..al {
            let v = 0.5 * (logrho2[al][be] + logrho2[be][al]);
            logrho2[al][be] = v;
            logrho2[be][al] = v;
        }
    }
    let c1 = (0..c)
        .map(|al| DMatrix::from_fn(l, c, |i, s| cd.conn(i, al, s)))
        .collect();
    FermiJet {
        l,
        codim: c,
        a0: g.clone(),
        a1,
        a2,
        c1,
        b2,
        logrho1: cd.weingarten.iter().map(|a| -a.trace()).collect(),
        logrho2,
    }
}

impl FermiJet {
    pub fn a_at(&self, w: &[f64]) -> DMatrix<f64> {
        let mut a = self.a0.clone();
        for al in 0..self.codim {
            a += &self.a1[al] * w[al];
            for be in 0..self.codim {
                a += &self.a2[al][be] * (w[al] * w[be]);
            }
        }
        a
    }

    pub fn b_at(&self, w: &[f64]) -> DMatrix<f64> {
        let mut b = DMatrix::identity(self.codim, self.codim);
        for al in 0..self.codim {
            for be in 0..self.codim {
                b += &self.b2[al][be] * (w[al] * w[be]);
            }
        }
        b
    }

    pub fn c_at(&self, w: &[f64]) -> DMatrix<f64> {
        let mut c = DMatrix::zeros(self.l, self.codim);
        for al in 0..self.codim {
            c += &self.c1[al] * w[al];
        }
        c
    }

    pub fn logrho_at(&self, w: &[f64]) -> f64 {
        let mut v = 0.0;
        for al in 0..self.codim {
            v += self.logrho1[al] * w[al];
            for be in 0..self.codim {
                v += self.logrho2[al][be] * w[al] * w[be];
            }
        }
        v
    }

    /// Assemble the full metric from the truncated blocks.
    pub fn metric_at(&self, w: &[f64]) -> DMatrix<f64> {
        compose_blocks(&self.a_at(w), &self.b_at(w), &self.c_at(w))
    }

    /// Coefficients (linear, quadratic) of log ρ obtained from the truncated
    /// determinant ratio det(g_L⁻¹ a) · det b, independently of `logrho1/2`.
    pub fn logrho_from_blocks(&self) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = self.codim;
        let g_inv = self.a0.clone().try_inverse().expect("g_L invertible");
        let l = self.l;
        let entry = |i: usize, j: usize| {
            let mut p = Poly::constant(n, if i == j { 1.0 } else { 0.0 });
            for al in 0..n {
                p.c1[al] = (&g_inv * &self.a1[al])[(i, j)];
                for be in 0..n {
                    p.c2[al][be] = (&g_inv * &self.a2[al][be])[(i, j)];
                }
            }
            p
        };
        let det_a = match l {
            1 => entry(0, 0),
            2 => entry(0, 0).mul(&entry(1, 1)).sub(&entry(0, 1).mul(&entry(1, 0))),
            _ => unreachable!("submanifold dimension is at most 2"),
        };
        let mut det_b = Poly::constant(n, 1.0);
        for al in 0..n {
            for be in 0..n {
                det_b.c2[al][be] = self.b2[al][be].trace();
            }
        }
        let mut p = det_a.mul(&det_b);
        p.c0 -= 1.0;
        // log ρ = ½ log(1 + p) = ½ (p − p²/2) to second order
        let sq = p.mul(&p);
        let lin = p.c1.iter().map(|v| 0.5 * v).collect();
        let quad = (0..n)
            .map(|a| (0..n).map(|b| 0.5 * (p.c2[a][b] - 0.5 * sq.c2[a][b])).collect())
            .collect();
        (lin, sym(quad))
    }
}

fn sym(mut m: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = m.len();
    for a in 0..n {
        for b in 0..a {
            let v = 0.5 * (m[a][b] + m[b][a]);
            m[a][b] = v;
            m[b][a] = v;
        }
    }
    m
}

/// Polynomial in the normal coordinates truncated after degree two.
#[derive(Debug, Clone)]
struct Poly {
    c0: f64,
    c1: Vec<f64>,
    c2: Vec<Vec<f64>>,
}

impl Poly {
    fn constant(n: usize, v: f64) -> Self {
        Poly { c0: v, c1: vec![0.0; n], c2: vec![vec![0.0; n]; n] }
    }

    fn mul(&self, o: &Poly) -> Poly {
        let n = self.c1.len();
        let mut p = Poly::constant(n, self.c0 * o.c0);
        for a in 0..n {
            p.c1[a] = self.c0 * o.c1[a] + o.c0 * self.c1[a];
            for b in 0..n {
                p.c2[a][b] = self.c0 * o.c2[a][b] + o.c0 * self.c2[a][b] + self.c1[a] * o.c1[b];
            }
        }
        p
    }

    fn sub(&self, o: &Poly) -> Poly {
        let n = self.c1.len();
        let mut p = Poly::constant(n, self.c0 - o.c0);
        for a in 0..n {
            p.c1[a] = self.c1[a] - o.c1[a];
            for b in 0..n {
                p.c2[a][b] = self.c2[a][b] - o.c2[a][b];
            }
        }
        p
    }
}

/// g = [[a + c b⁻¹ cᵀ, c], [cᵀ, b]].
pub fn compose_blocks(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> DMatrix<f64> {
    let (l, n) = (a.nrows(), b.nrows());
    let b_inv = b.clone().try_inverse().expect("b invertible");
    let mut g = DMatrix::zeros(l + n, l + n);
    g.view_mut((0, 0), (l, l)).copy_from(&(a + c * &b_inv * c.transpose()));
    g.view_mut((0, l), (l, n)).copy_from(c);
    g.view_mut((l, 0), (n, l)).copy_from(&c.transpose());
    g.view_mut((l, l), (n, n)).copy_from(b);
    g
}

/// Split a metric into (a, b, c) blocks, with a the Schur complement.
pub fn split_blocks(g: &DMatrix<f64>, l: usize) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let n = g.nrows() - l;
    let b = g.view((l, l), (n, n)).into_owned();
    let c = g.view((0, l), (l, n)).into_owned();
    let b_inv = b.clone().try_inverse().expect("normal block invertible");
    let a = g.view((0, 0), (l, l)).into_owned() - &c * b_inv * c.transpose();
    (a, b, c)
}

/// Mixing matrix c(w) of the reference metric: c_{iσ} = w^μ C[i][μ][σ].
pub fn reference_mixing(cd: &CurvatureData, w: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(cd.l, cd.codim, |i, s| (0..cd.codim).map(|mu| w[mu] * cd.conn(i, mu, s)).sum())
}

/// Reference (Sasaki-type) metric g₀ = [[g_L + c cᵀ, c], [cᵀ, Id]].
pub fn reference_metric(cd: &CurvatureData, w: &[f64]) -> DMatrix<f64> {
    let c = reference_mixing(cd, w);
    compose_blocks(&cd.g_l, &DMatrix::identity(cd.codim, cd.codim), &c)
}

/// Dual reference metric g₀* = Pᵀ g_L⁻¹ P + diag(0, Id) with P = [Id | −c].
pub fn reference_dual(cd: &CurvatureData, w: &[f64]) -> DMatrix<f64> {
    let (l, n) = (cd.l, cd.codim);
    let g_inv = cd.g_l.clone().try_inverse().expect("g_L invertible");
    let p = horizontal_projector(cd, w);
    let mut d = p.transpose() * g_inv * p;
    for k in 0..n {
        d[(l + k, l + k)] += 1.0;
    }
    d
}

/// P = [Id | −c(w)], mapping a covector (∂ₓ, ∂_w) to its covariant horizontal part.
pub fn horizontal_projector(cd: &CurvatureData, w: &[f64]) -> DMatrix<f64> {
    let (l, n) = (cd.l, cd.codim);
    let c = reference_mixing(cd, w);
    let mut p = DMatrix::zeros(l, l + n);
    p.view_mut((0, 0), (l, l)).fill_with_identity();
    p.view_mut((0, l), (l, n)).copy_from(&(-c));
    p
}

/// Effective potential ½Scal_L − ¼|τ|² − (Scal_M + Ric̄ + R̄)/6.
pub fn effective_potential(geom: &Geometry, x: &[f64]) -> Result<f64> {
    Ok(effective_potential_from(&geom.curvature_at(x)?))
}

pub fn effective_potential_from(cd: &CurvatureData) -> f64 {
    0.5 * cd.scal_l - 0.25 * cd.tension_norm_sq - (cd.scal_m + cd.ric_bar + cd.r_bar) / 6.0
}

/// The same potential with the intrinsic curvature replaced through the Gauss
/// equation: ½(Σ(tr A)² − tr A² − R_{μαμα}/3 − R_{iαiα}) − ¼|τ|².
pub fn effective_potential_gauss(cd: &CurvatureData) -> f64 {
    let g_inv = cd.g_l.clone().try_inverse().expect("g_L invertible");
    let mut fib = 0.0;
    let mut tan = 0.0;
    for al in 0..cd.codim {
        for mu in 0..cd.codim {
            fib += cd.fiber_curv(mu, al, mu, al);
        }
        for i in 0..cd.l {
            for j in 0..cd.l {
                tan += g_inv[(i, j)] * cd.mixed_curv(i, al, j, al);
            }
        }
    }
    0.5 * (cd.gauss_extrinsic() - fib / 3.0 - tan) - 0.25 * cd.tension_norm_sq
}

/// Default finite-difference step for the potential.
pub const FD_STEP: f64 = 1e-3;

fn fd4(f: impl Fn(f64) -> Result<f64>, h: f64) -> Result<f64> {
    Ok((f(-2.0 * h)? - 8.0 * f(-h)? + 8.0 * f(h)? - f(2.0 * h)?) / (12.0 * h))
}

struct Probe<'a> {
    geom: &'a Geometry,
    l: usize,
}

impl Probe<'_> {
    fn split<'b>(&self, y: &'b [f64]) -> (&'b [f64], &'b [f64]) {
        y.split_at(self.l)
    }

    fn log_rho(&self, y: &[f64]) -> Result<f64> {
        let (x, w) = self.split(y);
        Ok(self.geom.exact_tube_metric(x, w)?.rho.ln())
    }

    fn shifted(y: &[f64], k: usize, d: f64) -> Vec<f64> {
        let mut z = y.to_vec();
        z[k] += d;
        z
    }

    fn gradient(&self, y: &[f64], h: f64) -> Result<DVector<f64>> {
        let m = y.len();
        let mut g = DVector::zeros(m);
        for k in 0..m {
            g[k] = fd4(|d| self.log_rho(&Self::shifted(y, k, d)), h)?;
        }
        Ok(g)
    }

    /// √det g · g⁻¹ at y.
    fn weighted_inverse(&self, y: &[f64]) -> Result<(DMatrix<f64>, f64)> {
        let (x, w) = self.split(y);
        let g = self.geom.exact_tube_metric(x, w)?.g;
        let det = g.determinant();
        let inv = g.try_inverse().ok_or_else(|| Error::Domain("singular tube metric".into()))?;
        Ok((inv, det.sqrt()))
    }

    fn potential(&self, y: &[f64], h: f64) -> Result<f64> {
        let m = y.len();
        let (inv, vol) = self.weighted_inverse(y)?;
        let grad = self.gradient(y, h)?;
        let mut div = 0.0;
        for a in 0..m {
            div += fd4(
                |d| {
                    let z = Self::shifted(y, a, d);
                    let (inv_z, vol_z) = self.weighted_inverse(&z)?;
                    let gz = self.gradient(&z, h)?;
                    Ok(vol_z * (inv_z.row(a) * gz)[0])
                },
                h,
            )?;
        }
        let lap = div / vol;
        let sq = (grad.transpose() * &inv * &grad)[0];
        Ok(0.5 * lap - 0.25 * sq)
    }
}

/// Potential W = ½Δ log ρ − ¼|d log ρ|² at the Fermi point (x, w), by nested
/// fourth-order central differences of the exact metric.
pub fn potential_w(geom: &Geometry, x: &[f64], w: &[f64]) -> Result<f64> {
    let probe = Probe { geom, l: geom.l() };
    let y: Vec<f64> = x.iter().chain(w).copied().collect();
    match probe.potential(&y, FD_STEP) {
        Err(Error::Domain(_)) => probe.potential(&y, 0.1 * FD_STEP),
        r => r,
    }
}

/// Gradient of log ρ in Fermi coordinates (x first, then w).
pub fn log_rho_gradient(geom: &Geometry, x: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    let probe = Probe { geom, l: geom.l() };
    let y: Vec<f64> = x.iter().chain(w).copied().collect();
    let g = match probe.gradient(&y, FD_STEP) {
        Err(Error::Domain(_)) => probe.gradient(&y, 0.1 * FD_STEP),
        r => r,
    }?;
    Ok(g.iter().copied().collect())
}

/// Effective potential sampled on a grid, with the full tube potential available on demand.
#[derive(Debug, Clone, Serialize)]
pub struct PotentialField {
    /// Sample points on L (base cell centers of the grid).
    pub points: Vec<Vec<f64>>,
    pub wl: Vec<f64>,
    pub lambda0: f64,
    /// λ₀ + sup max(−W_L, 0).
    pub alpha_floor: f64,
    #[serde(skip)]
    geom: Option<Geometry>,
}

impl PotentialField {
    /// W(x, ε w) on the unit tube.
    pub fn w_full(&self, x: &[f64], w: &[f64], eps: f64) -> Result<f64> {
        let geom = self.geom.as_ref().expect("field built from a geometry");
        let ws: Vec<f64> = w.iter().map(|v| eps * v).collect();
        potential_w(geom, x, &ws)
    }
}

pub fn potential_field(geom: &Geometry, grid: &FermiGrid) -> Result<PotentialField> {
    let points = grid.base.cell_centers();
    let wl = points
        .iter()
        .map(|x| effective_potential(geom, x))
        .collect::<Result<Vec<_>>>()?;
    let lambda0 = ball_eigenvalue(geom.codim(), 0)?;
    let sup_neg = wl.iter().fold(0.0f64, |acc, v| acc.max(-v));
    Ok(PotentialField { points, wl, lambda0, alpha_floor: lambda0 + sup_neg, geom: Some(geom.clone()) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum JetQuantity {
    /// The a and b blocks of the metric.
    Metric,
    /// The mixing block c, whose remainder is only O(|w|²).
    Mixing,
    LogRho,
}

#[derive(Debug, Clone, Serialize)]
pub struct RemainderFit {
    pub radii: Vec<f64>,
    pub errors: Vec<f64>,
    /// Least-squares log-log slope; +∞ when the jet is exact to rounding.
    pub slope: f64,
}

impl RemainderFit {
    pub fn is_exact(&self) -> bool {
        self.slope == f64::INFINITY
    }
}

/// Least-squares slope of log y against log x.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn directions(codim: usize) -> Vec<Vec<f64>> {
    if codim == 1 {
        vec![vec![1.0], vec![-1.0]]
    } else {
        (0..8)
            .map(|k| {
                let t = k as f64 * std::f64::consts::FRAC_PI_4 + 0.1;
                vec![t.cos(), t.sin()]
            })
            .collect()
    }
}

/// Sup-norm gap between the exact metric data and the jet over |w| = 2⁻ᵏ ε_max, k = 3..8.
pub fn jet_remainder_slope(geom: &Geometry, x: &[f64], quantity: JetQuantity) -> Result<RemainderFit> {
    let jet = metric_jet(geom, x)?;
    let l = geom.l();
    let dirs = directions(geom.codim());
    let mut radii = Vec::new();
    let mut errors = Vec::new();
    let mut scale: f64 = 1.0;
    for k in 3..=8 {
        let r = geom.eps_max() * 0.5f64.powi(k);
        let mut err: f64 = 0.0;
        for d in &dirs {
            let w: Vec<f64> = d.iter().map(|v| r * v).collect();
            let exact = geom.exact_tube_metric(x, &w)?;
            let e = match quantity {
                JetQuantity::Metric => {
                    let (a, b, _) = split_blocks(&exact.g, l);
                    scale = scale.max(a.amax());
                    (a - jet.a_at(&w)).amax().max((b - jet.b_at(&w)).amax())
                }
                JetQuantity::Mixing => {
                    let (_, _, c) = split_blocks(&exact.g, l);
                    (c - jet.c_at(&w)).amax()
                }
                JetQuantity::LogRho => (exact.rho.ln() - jet.logrho_at(&w)).abs(),
            };
            err = err.max(e);
        }
        radii.push(r);
        errors.push(err);
    }
    let exact = errors.iter().all(|e| *e <= 1e-13 * scale);
    let slope = if exact { f64::INFINITY } else { loglog_slope(&radii, &errors) };
    Ok(RemainderFit { radii, errors, slope })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GeometrySpec;

    #[test]
    fn circle_potential_closed_form() {
        let g = Geometry::new(GeometrySpec::circle(2.0)).unwrap();
        assert!((effective_potential(&g, &[0.1]).unwrap() + 1.0 / 16.0).abs() < 1e-15);
        let w = potential_w(&g, &[0.1], &[0.0]).unwrap();
        assert!((w + 1.0 / 16.0).abs() < 1e-6, "{w}");
    }

    #[test]
    fn circle_jet_matches_polynomial_metric() {
        let g = Geometry::new(GeometrySpec::circle(1.0)).unwrap();
        let j = metric_jet(&g, &[0.0]).unwrap();
        assert_eq!(j.a0[(0, 0)], 1.0);
        assert_eq!(j.a1[0][(0, 0)], 2.0);
        assert_eq!(j.a2[0][0][(0, 0)], 1.0);
        assert_eq!(j.b2[0][0][(0, 0)], 0.0);
    }
}
