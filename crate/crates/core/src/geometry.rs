//! Catalog of closed submanifolds with exact curvature data and exact
//! pullback metrics in Fermi coordinates.

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GeometryKind {
    /// Circle of radius R in the Euclidean plane. Params: `[R]`.
    CircleInPlane,
    /// Closed arclength-parametrized plane curve given by curvature samples.
    /// Params: `[length, κ_0, …, κ_{n−1}]` on a uniform periodic grid. All-zero
    /// samples describe a straight periodic strip (a flat cylinder).
    PlaneCurve,
    /// Closed curve t ↦ (R cos t, R sin t, h sin(n t)) in ℝ³. Params: `[R, h, n]`.
    SpaceCurve,
    /// Round sphere of radius R in ℝ³. Params: `[R]`.
    SphereInR3,
    /// Circle of colatitude θ₀ on the unit sphere. Params: `[θ₀]`.
    LatitudeCircleOnSphere,
}

impl GeometryKind {
    pub fn dim_l(self) -> usize {
        match self {
            GeometryKind::SphereInR3 => 2,
            _ => 1,
        }
    }

    pub fn dim_m(self) -> usize {
        match self {
            GeometryKind::SpaceCurve | GeometryKind::SphereInR3 => 3,
            _ => 2,
        }
    }

    pub fn codim(self) -> usize {
        self.dim_m() - self.dim_l()
    }

    pub const ALL: [GeometryKind; 5] = [
        GeometryKind::CircleInPlane,
        GeometryKind::PlaneCurve,
        GeometryKind::SpaceCurve,
        GeometryKind::SphereInR3,
        GeometryKind::LatitudeCircleOnSphere,
    ];
}

impl std::str::FromStr for GeometryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GeometryKind::ALL
            .into_iter()
            .find(|k| format!("{k:?}") == s)
            .ok_or_else(|| Error::Validation(format!("unknown geometry kind {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub kind: GeometryKind,
    pub params: Vec<f64>,
}

impl GeometrySpec {
    pub fn circle(radius: f64) -> Self {
        GeometrySpec { kind: GeometryKind::CircleInPlane, params: vec![radius] }
    }

    pub fn plane_curve(length: f64, curvature: &[f64]) -> Self {
        let mut params = vec![length];
        params.extend_from_slice(curvature);
        GeometrySpec { kind: GeometryKind::PlaneCurve, params }
    }

    /// Straight periodic strip of the given length.
    pub fn flat_strip(length: f64) -> Self {
        Self::plane_curve(length, &[0.0; 8])
    }

    pub fn space_curve(radius: f64, height: f64, winding: u32) -> Self {
        GeometrySpec { kind: GeometryKind::SpaceCurve, params: vec![radius, height, winding as f64] }
    }

    pub fn sphere(radius: f64) -> Self {
        GeometrySpec { kind: GeometryKind::SphereInR3, params: vec![radius] }
    }

    pub fn latitude(theta0: f64) -> Self {
        GeometrySpec { kind: GeometryKind::LatitudeCircleOnSphere, params: vec![theta0] }
    }

    pub fn l(&self) -> usize {
        self.kind.dim_l()
    }

    pub fn m(&self) -> usize {
        self.kind.dim_m()
    }

    pub fn codim(&self) -> usize {
        self.kind.codim()
    }
}

/// One coordinate axis of the parameter domain of L.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ParamAxis {
    pub lo: f64,
    pub hi: f64,
    pub periodic: bool,
}

/// Curvature data at a point of L in the adapted frame (coordinate tangent
/// vectors, orthonormal normals).
#[derive(Debug, Clone, Serialize)]
pub struct CurvatureData {
    pub l: usize,
    pub codim: usize,
    pub g_l: DMatrix<f64>,
    /// Mixed Weingarten maps A_α, one per normal; the bilinear form is g_L·A_α.
    pub weingarten: Vec<DMatrix<f64>>,
    /// C[i][α][μ] = ⟨ν_μ, D_i ν_α⟩, flattened with `conn_index`.
    pub conn_coeff: Vec<f64>,
    /// Ambient curvature R_{ABCD} with tangent indices first, flattened with `riemann_index`.
    pub ambient: Vec<f64>,
    pub scal_l: f64,
    pub scal_m: f64,
    pub ric_bar: f64,
    pub r_bar: f64,
    pub tension_norm_sq: f64,
}

impl CurvatureData {
    fn m(&self) -> usize {
        self.l + self.codim
    }

    pub fn conn_index(&self, i: usize, alpha: usize, mu: usize) -> usize {
        (i * self.codim + alpha) * self.codim + mu
    }

    pub fn conn(&self, i: usize, alpha: usize, mu: usize) -> f64 {
        self.conn_coeff[self.conn_index(i, alpha, mu)]
    }

    pub fn riemann_index(&self, a: usize, b: usize, c: usize, d: usize) -> usize {
        let m = self.m();
        ((a * m + b) * m + c) * m + d
    }

    pub fn riemann(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        self.ambient[self.riemann_index(a, b, c, d)]
    }

    /// R_{μανβ} with all four indices normal.
    pub fn fiber_curv(&self, mu: usize, alpha: usize, nu: usize, beta: usize) -> f64 {
        let l = self.l;
        self.riemann(l + mu, l + alpha, l + nu, l + beta)
    }

    /// R_{iαjβ}: tangent, normal, tangent, normal.
    pub fn mixed_curv(&self, i: usize, alpha: usize, j: usize, beta: usize) -> f64 {
        let l = self.l;
        self.riemann(i, l + alpha, j, l + beta)
    }

    pub fn trace_weingarten(&self, alpha: usize) -> f64 {
        self.weingarten[alpha].trace()
    }

    /// Inverse of the full adapted metric diag(g_L, Id) at the zero section.
    fn inverse_adapted(&self) -> DMatrix<f64> {
        let m = self.m();
        let gi = self.g_l.clone().try_inverse().expect("g_L must be invertible");
        let mut inv = DMatrix::identity(m, m);
        inv.view_mut((0, 0), (self.l, self.l)).copy_from(&gi);
        inv
    }

    /// Recompute the scalar contractions from the raw tensors.
    pub fn with_contractions(mut self) -> Self {
        let m = self.m();
        let l = self.l;
        let gi = self.inverse_adapted();
        let (mut scal_m, mut ric_bar, mut r_bar) = (0.0, 0.0, 0.0);
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    for d in 0..m {
                        let r = self.riemann(a, b, c, d);
                        if r == 0.0 {
                            continue;
                        }
                        let w = gi[(a, c)] * gi[(b, d)];
                        scal_m += w * r;
                        if a < l && c < l {
                            ric_bar += w * r;
                            if b < l && d < l {
                                r_bar += w * r;
                            }
                        }
                    }
                }
            }
        }
        self.scal_m = scal_m;
        self.ric_bar = ric_bar;
        self.r_bar = r_bar;
        self.tension_norm_sq = (0..self.codim).map(|a| self.trace_weingarten(a).powi(2)).sum();
        self
    }

    /// Σ_α (tr A_α)² − tr(A_α²), the extrinsic side of the Gauss equation.
    pub fn gauss_extrinsic(&self) -> f64 {
        self.weingarten
            .iter()
            .map(|a| a.trace().powi(2) - (a * a).trace())
            .sum()
    }

    /// Express the data in a new frame: tangent vectors e'_j = Σ_i T_ij ∂_i and
    /// normals ν'_β = Σ_α O_αβ ν_α with O orthogonal.
    pub fn reframe(&self, t: &DMatrix<f64>, o: &DMatrix<f64>) -> Result<Self> {
        let (l, c, m) = (self.l, self.codim, self.m());
        if t.shape() != (l, l) || o.shape() != (c, c) {
            return Err(Error::Shape("reframe matrices do not match dimensions".into()));
        }
        let t_inv = t
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Validation("tangent frame change is singular".into()))?;
        let g_l = t.transpose() * &self.g_l * t;
        let weingarten = (0..c)
            .map(|b| {
                let mut acc = DMatrix::zeros(l, l);
                for a in 0..c {
                    acc += &self.weingarten[a] * o[(a, b)];
                }
                &t_inv * acc * t
            })
            .collect();
        let mut conn_coeff = vec![0.0; l * c * c];
        for j in 0..l {
            for b in 0..c {
                for n in 0..c {
                    let mut s = 0.0;
                    for i in 0..l {
                        for a in 0..c {
                            for mu in 0..c {
                                s += t[(i, j)] * o[(a, b)] * o[(mu, n)] * self.conn(i, a, mu);
                            }
                        }
                    }
                    conn_coeff[(j * c + b) * c + n] = s;
                }
            }
        }
        let mut f = DMatrix::zeros(m, m);
        f.view_mut((0, 0), (l, l)).copy_from(t);
        f.view_mut((l, l), (c, c)).copy_from(o);
        let mut ambient = vec![0.0; m.pow(4)];
        // Contract one index at a time to keep this O(m^5).
        let mut tmp = self.ambient.clone();
        for slot in 0..4 {
            let mut out = vec![0.0; m.pow(4)];
            for idx in 0..m.pow(4) {
                let mut digits = [idx / (m * m * m), (idx / (m * m)) % m, (idx / m) % m, idx % m];
                let new = digits[slot];
                let mut s = 0.0;
                for old in 0..m {
                    digits[slot] = old;
                    let src = ((digits[0] * m + digits[1]) * m + digits[2]) * m + digits[3];
                    s += f[(old, new)] * tmp[src];
                }
                out[idx] = s;
            }
            tmp = out;
        }
        ambient.copy_from_slice(&tmp);
        Ok(CurvatureData {
            l,
            codim: c,
            g_l,
            weingarten,
            conn_coeff,
            ambient,
            scal_l: self.scal_l,
            scal_m: 0.0,
            ric_bar: 0.0,
            r_bar: 0.0,
            tension_norm_sq: 0.0,
        }
        .with_contractions())
    }

    /// Check the structural invariants of the data.
    pub fn validate(&self) -> Result<()> {
        let tol = 1e-10;
        let g = &self.g_l;
        if (g - g.transpose()).amax() > tol * g.amax() || g.clone().cholesky().is_none() {
            return Err(Error::Validation("g_L is not symmetric positive definite".into()));
        }
        for (a, wm) in self.weingarten.iter().enumerate() {
            let h = g * wm;
            if (&h - h.transpose()).amax() > tol * h.amax().max(1.0) {
                return Err(Error::Validation(format!("second fundamental form {a} not symmetric")));
            }
        }
        for i in 0..self.l {
            for a in 0..self.codim {
                for mu in 0..self.codim {
                    if (self.conn(i, a, mu) + self.conn(i, mu, a)).abs() > tol {
                        return Err(Error::Validation("normal connection is not antisymmetric".into()));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Exact metric in Fermi coordinates (x, w) and the density ratio ρ.
#[derive(Debug, Clone)]
pub struct TubeMetric {
    pub g: DMatrix<f64>,
    pub rho: f64,
}

/// Periodic orthonormal normal frame sampled along L.
#[derive(Debug, Clone, Serialize)]
pub struct NormalFrameField {
    pub params: Vec<Vec<f64>>,
    /// Normals as ambient vectors, `frames[p][α]`.
    pub frames: Vec<Vec<Vec<f64>>>,
    /// Connection coefficients C[i][α][μ] at each sample.
    pub conn: Vec<Vec<f64>>,
    /// Rotation of the transported frame after one loop, removed by the twist correction.
    pub holonomy_angle: f64,
    pub closure_defect: f64,
}

#[derive(Debug, Clone)]
enum Model {
    Circle { r: f64 },
    Plane(PlaneCurveModel),
    FlatStrip { length: f64 },
    Space(SpaceCurveModel),
    Sphere { r: f64 },
    Latitude { theta0: f64 },
}

/// A validated catalog geometry with cached reconstructions.
#[derive(Debug, Clone)]
pub struct Geometry {
    spec: GeometrySpec,
    model: Model,
    normal_sign: f64,
    bound: f64,
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::Validation(format!("{name} must be positive and finite, got {v}")))
    }
}

fn expect_params(spec: &GeometrySpec, n: usize) -> Result<()> {
    if spec.params.len() != n {
        return Err(Error::Validation(format!(
            "{:?} takes {n} parameter(s), got {}",
            spec.kind,
            spec.params.len()
        )));
    }
    Ok(())
}

impl Geometry {
    pub fn new(spec: GeometrySpec) -> Result<Self> {
        if let Some(v) = spec.params.iter().find(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("non-finite parameter {v}")));
        }
        let model = match spec.kind {
            GeometryKind::CircleInPlane => {
                expect_params(&spec, 1)?;
                Model::Circle { r: positive("radius", spec.params[0])? }
            }
            GeometryKind::PlaneCurve => {
                if spec.params.len() < 5 {
                    return Err(Error::Validation(
                        "PlaneCurve takes a length and at least 4 curvature samples".into(),
                    ));
                }
                let length = positive("curve length", spec.params[0])?;
                let samples = &spec.params[1..];
                if samples.iter().all(|k| k.abs() < 1e-14) {
                    Model::FlatStrip { length }
                } else {
                    Model::Plane(PlaneCurveModel::new(length, samples)?)
                }
            }
            GeometryKind::SpaceCurve => {
                expect_params(&spec, 3)?;
                let r = positive("radius", spec.params[0])?;
                let n = spec.params[2];
                if n < 1.0 || n.fract() != 0.0 {
                    return Err(Error::Validation(format!("winding number must be a positive integer, got {n}")));
                }
                Model::Space(SpaceCurveModel::new(r, spec.params[1], n)?)
            }
            GeometryKind::SphereInR3 => {
                expect_params(&spec, 1)?;
                Model::Sphere { r: positive("radius", spec.params[0])? }
            }
            GeometryKind::LatitudeCircleOnSphere => {
                expect_params(&spec, 1)?;
                let t = spec.params[0];
                if !(t > 1e-6 && t < PI - 1e-6) {
                    return Err(Error::Validation(format!("colatitude {t} must lie in (1e-6, π − 1e-6)")));
                }
                Model::Latitude { theta0: t }
            }
        };
        let bound = match &model {
            Model::Circle { r } | Model::Sphere { r } => *r,
            Model::Plane(p) => p.bound,
            Model::FlatStrip { .. } => f64::INFINITY,
            Model::Space(s) => s.bound,
            Model::Latitude { theta0 } => theta0.min(PI - theta0),
        };
        Ok(Geometry { spec, model, normal_sign: 1.0, bound })
    }

    /// The same geometry with the first normal reversed.
    pub fn flipped(&self) -> Self {
        let mut g = self.clone();
        g.normal_sign = -g.normal_sign;
        g
    }

    pub fn spec(&self) -> &GeometrySpec {
        &self.spec
    }

    pub fn kind(&self) -> GeometryKind {
        self.spec.kind
    }

    pub fn l(&self) -> usize {
        self.spec.l()
    }

    pub fn m(&self) -> usize {
        self.spec.m()
    }

    pub fn codim(&self) -> usize {
        self.spec.codim()
    }

    pub fn is_flat_strip(&self) -> bool {
        matches!(self.model, Model::FlatStrip { .. })
    }

    /// Normal distance below which Fermi coordinates are injective (may be infinite).
    pub fn injectivity_bound(&self) -> f64 {
        self.bound
    }

    /// Largest admissible tube radius: min(0.4 · bound, 0.5).
    pub fn eps_max(&self) -> f64 {
        (0.4 * self.bound).min(0.5)
    }

    pub fn param_axes(&self) -> Vec<ParamAxis> {
        let periodic = |hi| ParamAxis { lo: 0.0, hi, periodic: true };
        match &self.model {
            Model::Circle { r } => vec![periodic(TAU * r)],
            Model::Plane(p) => vec![periodic(p.length)],
            Model::FlatStrip { length } => vec![periodic(*length)],
            Model::Space(_) => vec![periodic(TAU)],
            Model::Sphere { .. } => vec![ParamAxis { lo: 0.0, hi: PI, periodic: false }, periodic(TAU)],
            Model::Latitude { theta0 } => vec![periodic(TAU * theta0.sin())],
        }
    }

    /// Riemannian volume of L.
    pub fn volume(&self) -> f64 {
        match &self.model {
            Model::Circle { r } => TAU * r,
            Model::Plane(p) => p.length,
            Model::FlatStrip { length } => *length,
            Model::Space(s) => s.length,
            Model::Sphere { r } => 2.0 * TAU * r * r,
            Model::Latitude { theta0 } => TAU * theta0.sin(),
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.l() {
            return Err(Error::Shape(format!("point has {} coordinates, expected {}", x.len(), self.l())));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("non-finite point coordinate".into()));
        }
        if let Model::Sphere { .. } = self.model {
            if !(x[0] > 0.0 && x[0] < PI) {
                return Err(Error::Domain(format!("colatitude {} outside (0, π)", x[0])));
            }
        }
        Ok(())
    }

    fn check_normal(&self, w: &[f64]) -> Result<f64> {
        if w.len() != self.codim() {
            return Err(Error::Shape(format!("normal vector has {} entries, expected {}", w.len(), self.codim())));
        }
        let r = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !r.is_finite() || r >= self.bound {
            return Err(Error::Domain(format!(
                "normal distance {r} beyond the injectivity bound {}",
                self.bound
            )));
        }
        Ok(r)
    }

    pub fn induced_metric(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(x)?;
        Ok(self.raw_curvature(x).g_l)
    }

    /// Curvature data at x in the adapted frame.
    pub fn curvature_at(&self, x: &[f64]) -> Result<CurvatureData> {
        self.check_point(x)?;
        let raw = self.raw_curvature(x);
        if self.normal_sign > 0.0 {
            return Ok(raw);
        }
        let t = DMatrix::identity(self.l(), self.l());
        raw.reframe(&t, &self.sign_matrix(self.codim()))
    }

    fn sign_matrix(&self, c: usize) -> DMatrix<f64> {
        let mut o = DMatrix::identity(c, c);
        o[(0, 0)] = self.normal_sign;
        o
    }

    fn raw_curvature(&self, x: &[f64]) -> CurvatureData {
        let (l, c) = (self.l(), self.codim());
        let m = l + c;
        let mut data = CurvatureData {
            l,
            codim: c,
            g_l: DMatrix::identity(l, l),
            weingarten: vec![DMatrix::zeros(l, l); c],
            conn_coeff: vec![0.0; l * c * c],
            ambient: vec![0.0; m.pow(4)],
            scal_l: 0.0,
            scal_m: 0.0,
            ric_bar: 0.0,
            r_bar: 0.0,
            tension_norm_sq: 0.0,
        };
        match &self.model {
            Model::Circle { r } => data.weingarten[0][(0, 0)] = -1.0 / r,
            Model::Plane(p) => data.weingarten[0][(0, 0)] = -p.curvature(x[0]),
            Model::FlatStrip { .. } => {}
            Model::Space(s) => {
                let f = s.frame(x[0]);
                let speed2 = dot(&f.d1, &f.d1);
                data.g_l[(0, 0)] = speed2;
                for a in 0..2 {
                    data.weingarten[a][(0, 0)] = dot(&f.d2, &f.normals[a]) / speed2;
                }
                data.conn_coeff[1] = s.twist_rate;
                data.conn_coeff[2] = -s.twist_rate;
            }
            Model::Sphere { r } => {
                let s = x[0].sin();
                data.g_l[(0, 0)] = r * r;
                data.g_l[(1, 1)] = r * r * s * s;
                data.weingarten[0] = DMatrix::identity(2, 2) * (-1.0 / r);
                data.scal_l = 2.0 / (r * r);
            }
            Model::Latitude { theta0 } => {
                data.weingarten[0][(0, 0)] = -1.0 / theta0.tan();
                // Unit sphere: R_ABCD = G_AC G_BD − G_AD G_BC with G = Id in the adapted frame.
                for a in 0..2 {
                    for b in 0..2 {
                        for cc in 0..2 {
                            for d in 0..2 {
                                let del = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
                                data.ambient[((a * 2 + b) * 2 + cc) * 2 + d] =
                                    del(a, cc) * del(b, d) - del(a, d) * del(b, cc);
                            }
                        }
                    }
                }
            }
        }
        data.with_contractions()
    }

    /// Exact pullback metric g(x, w) and ρ = √(det g / det g_L).
    pub fn exact_tube_metric(&self, x: &[f64], w: &[f64]) -> Result<TubeMetric> {
        self.check_point(x)?;
        self.check_normal(w)?;
        let mut ws = w.to_vec();
        ws[0] *= self.normal_sign;
        let (mut g, det_l) = self.raw_metric(x, &ws);
        let l = self.l();
        if self.normal_sign < 0.0 {
            for k in 0..g.nrows() {
                if k != l {
                    g[(k, l)] = -g[(k, l)];
                    g[(l, k)] = -g[(l, k)];
                }
            }
        }
        let det = g.determinant();
        if !(det > 0.0) {
            return Err(Error::Domain(format!("degenerate tube metric at x={x:?}, w={w:?}")));
        }
        Ok(TubeMetric { rho: (det / det_l).sqrt(), g })
    }

    fn raw_metric(&self, x: &[f64], w: &[f64]) -> (DMatrix<f64>, f64) {
        match &self.model {
            Model::Circle { r } => {
                let s = 1.0 + w[0] / r;
                (diag(&[s * s, 1.0]), 1.0)
            }
            Model::Plane(p) => {
                let s = 1.0 + w[0] * p.curvature(x[0]);
                (diag(&[s * s, 1.0]), 1.0)
            }
            Model::FlatStrip { .. } => (DMatrix::identity(2, 2), 1.0),
            Model::Space(sc) => {
                let f = sc.frame(x[0]);
                let mut dt = f.d1;
                for a in 0..2 {
                    for k in 0..3 {
                        dt[k] += w[a] * f.dnormals[a][k];
                    }
                }
                let mut g = DMatrix::identity(3, 3);
                g[(0, 0)] = dot(&dt, &dt);
                for a in 0..2 {
                    // ⟨γ', ν_α⟩ = 0 analytically, so only the frame rotation contributes.
                    let v = w[0] * dot(&f.dnormals[0], &f.normals[a]) + w[1] * dot(&f.dnormals[1], &f.normals[a]);
                    g[(0, a + 1)] = v;
                    g[(a + 1, 0)] = v;
                }
                (g, dot(&f.d1, &f.d1))
            }
            Model::Sphere { r } => {
                let s = (r + w[0]) * (r + w[0]);
                let sn = x[0].sin();
                (diag(&[s, s * sn * sn, 1.0]), diag(&[r * r, r * r * sn * sn]).determinant())
            }
            Model::Latitude { theta0 } => {
                let q = (theta0 + w[0]).sin() / theta0.sin();
                (diag(&[q * q, 1.0]), 1.0)
            }
        }
    }

    /// Ambient position of the Fermi point (x, w), in ℝ² or ℝ³ (spheres embedded in ℝ³).
    pub fn embed(&self, x: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        self.check_normal(w)?;
        let mut w = w.to_vec();
        w[0] *= self.normal_sign;
        Ok(match &self.model {
            Model::Circle { r } => {
                let t = x[0] / r;
                let rr = r + w[0];
                vec![rr * t.cos(), rr * t.sin()]
            }
            Model::Plane(p) => {
                let pos = p.position(x[0]);
                let th = p.angle(x[0]);
                vec![pos[0] + w[0] * th.sin(), pos[1] - w[0] * th.cos()]
            }
            Model::FlatStrip { .. } => vec![x[0], -w[0]],
            Model::Space(sc) => {
                let f = sc.frame(x[0]);
                (0..3).map(|k| f.pos[k] + w[0] * f.normals[0][k] + w[1] * f.normals[1][k]).collect()
            }
            Model::Sphere { r } => {
                let rr = r + w[0];
                let (st, ct) = x[0].sin_cos();
                let (sp, cp) = x[1].sin_cos();
                vec![rr * st * cp, rr * st * sp, rr * ct]
            }
            Model::Latitude { theta0 } => {
                let th = theta0 + w[0];
                let ph = x[0] / theta0.sin();
                vec![th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()]
            }
        })
    }

    /// Unit normals at x as ambient vectors, in the order of the Fermi coordinates.
    pub fn normal_frame(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_point(x)?;
        let mut frame = match &self.model {
            Model::Circle { r } => {
                let t = x[0] / r;
                vec![vec![t.cos(), t.sin()]]
            }
            Model::Plane(p) => {
                let th = p.angle(x[0]);
                vec![vec![th.sin(), -th.cos()]]
            }
            Model::FlatStrip { .. } => vec![vec![0.0, -1.0]],
            Model::Space(sc) => sc.frame(x[0]).normals.iter().map(|v| v.to_vec()).collect(),
            Model::Sphere { .. } => {
                let (st, ct) = x[0].sin_cos();
                let (sp, cp) = x[1].sin_cos();
                vec![vec![st * cp, st * sp, ct]]
            }
            Model::Latitude { theta0 } => {
                let ph = x[0] / theta0.sin();
                let (st, ct) = theta0.sin_cos();
                vec![vec![ct * ph.cos(), ct * ph.sin(), -st]]
            }
        };
        for v in frame[0].iter_mut() {
            *v *= self.normal_sign;
        }
        Ok(frame)
    }

    /// Periodic normal frame and connection coefficients on the given parameter samples.
    pub fn frame_transport(&self, samples: &[Vec<f64>]) -> Result<NormalFrameField> {
        let mut frames = Vec::with_capacity(samples.len());
        let mut conn = Vec::with_capacity(samples.len());
        for x in samples {
            frames.push(self.normal_frame(x)?);
            conn.push(self.curvature_at(x)?.conn_coeff);
        }
        let (holonomy_angle, closure_defect) = match &self.model {
            Model::Space(sc) => (sc.holonomy, sc.closure_defect),
            _ => (0.0, 0.0),
        };
        Ok(NormalFrameField { params: samples.to_vec(), frames, conn, holonomy_angle, closure_defect })
    }
}

fn diag(v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(v))
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Injectivity heuristic for a closed curve sampled at `pts` with total parameter period:
/// min(1/κ_max, half the smallest distance between points more than π/κ_max apart in arclength).
fn reach_estimate(pts: &[Vec<f64>], arclength: &[f64], total: f64, kappa_max: f64) -> f64 {
    let r = 1.0 / kappa_max;
    let sep = PI * r;
    let mut dmin = f64::INFINITY;
    let n = pts.len();
    for i in 0..n {
        for j in (i + 1)..n {
            let d_arc = (arclength[j] - arclength[i]).abs();
            let d_arc = d_arc.min(total - d_arc);
            if d_arc < sep {
                continue;
            }
            let d: f64 = pts[i].iter().zip(&pts[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            dmin = dmin.min(d);
        }
    }
    r.min(0.5 * dmin)
}

/// Arclength plane curve reconstructed from trigonometric interpolation of curvature samples.
#[derive(Debug, Clone)]
struct PlaneCurveModel {
    length: f64,
    mean: f64,
    cos_coef: Vec<f64>,
    sin_coef: Vec<f64>,
    nyquist: f64,
    /// Positions at `nodes` equispaced arclength values.
    table: Vec<[f64; 2]>,
    bound: f64,
}

const PLANE_NODES: usize = 2048;

impl PlaneCurveModel {
    fn new(length: f64, samples: &[f64]) -> Result<Self> {
        let n = samples.len();
        let nf = n as f64;
        let mean = samples.iter().sum::<f64>() / nf;
        let half = (n - 1) / 2;
        let mut cos_coef = Vec::with_capacity(half);
        let mut sin_coef = Vec::with_capacity(half);
        for k in 1..=half {
            let (mut a, mut b) = (0.0, 0.0);
            for (j, v) in samples.iter().enumerate() {
                let t = TAU * (k * j) as f64 / nf;
                a += v * t.cos();
                b += v * t.sin();
            }
            cos_coef.push(2.0 * a / nf);
            sin_coef.push(2.0 * b / nf);
        }
        let nyquist = if n.is_multiple_of(2) {
            samples.iter().enumerate().map(|(j, v)| if j % 2 == 0 { *v } else { -*v }).sum::<f64>() / nf
        } else {
            0.0
        };
        let mut model = PlaneCurveModel {
            length,
            mean,
            cos_coef,
            sin_coef,
            nyquist,
            table: Vec::new(),
            bound: 0.0,
        };
        let turning = mean * length;
        if (turning - TAU).abs() > 1e-6 {
            return Err(Error::Validation(format!(
                "curvature integrates to {turning}, a simple counter-clockwise closed curve needs 2π"
            )));
        }
        let h = length / PLANE_NODES as f64;
        let mut table = vec![[0.0, 0.0]; PLANE_NODES + 1];
        for j in 0..PLANE_NODES {
            let d = model.integrate_tangent(j as f64 * h, (j + 1) as f64 * h);
            table[j + 1] = [table[j][0] + d[0], table[j][1] + d[1]];
        }
        let defect = table[PLANE_NODES][0].hypot(table[PLANE_NODES][1]);
        if defect > 1e-6 * length.max(1.0) {
            return Err(Error::Validation(format!("curve does not close: endpoint defect {defect:.3e}")));
        }
        model.table = table;
        let m = 512;
        let step = PLANE_NODES / m;
        let pts: Vec<Vec<f64>> = (0..m).map(|i| model.table[i * step].to_vec()).collect();
        let arcs: Vec<f64> = (0..m).map(|i| (i * step) as f64 * h).collect();
        let kmax = (0..4 * m)
            .map(|i| model.curvature(length * i as f64 / (4 * m) as f64).abs())
            .fold(0.0, f64::max);
        model.bound = reach_estimate(&pts, &arcs, length, kmax);
        Ok(model)
    }

    fn omega(&self, k: usize) -> f64 {
        TAU * k as f64 / self.length
    }

    fn curvature(&self, s: f64) -> f64 {
        let mut v = self.mean;
        for (i, (a, b)) in self.cos_coef.iter().zip(&self.sin_coef).enumerate() {
            let t = self.omega(i + 1) * s;
            v += a * t.cos() + b * t.sin();
        }
        if self.nyquist != 0.0 {
            let kn = self.cos_coef.len() + 1;
            v += self.nyquist * (self.omega(kn) * s).cos();
        }
        v
    }

    /// Tangent angle θ(s) with θ(0) = 0.
    fn angle(&self, s: f64) -> f64 {
        let mut v = self.mean * s;
        for (i, (a, b)) in self.cos_coef.iter().zip(&self.sin_coef).enumerate() {
            let w = self.omega(i + 1);
            let t = w * s;
            v += a * t.sin() / w - b * (t.cos() - 1.0) / w;
        }
        if self.nyquist != 0.0 {
            let w = self.omega(self.cos_coef.len() + 1);
            v += self.nyquist * (w * s).sin() / w;
        }
        v
    }

    fn integrate_tangent(&self, a: f64, b: f64) -> [f64; 2] {
        // 10-point Gauss–Legendre on [a, b]
        const X: [f64; 5] = [
            0.148_874_338_981_631_2,
            0.433_395_394_129_247_2,
            0.679_409_568_299_024_4,
            0.865_063_366_688_984_5,
            0.973_906_528_517_171_7,
        ];
        const W: [f64; 5] = [
            0.295_524_224_714_752_9,
            0.269_266_719_309_996_4,
            0.219_086_362_515_982,
            0.149_451_349_150_580_6,
            0.066_671_344_308_688_1,
        ];
        let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
        let mut acc = [0.0, 0.0];
        for (x, w) in X.iter().zip(W) {
            for s in [c - r * x, c + r * x] {
                let th = self.angle(s);
                acc[0] += w * th.cos();
                acc[1] += w * th.sin();
            }
        }
        [acc[0] * r, acc[1] * r]
    }

    fn position(&self, s: f64) -> [f64; 2] {
        let s = s.rem_euclid(self.length);
        let h = self.length / PLANE_NODES as f64;
        let j = ((s / h).floor() as usize).min(PLANE_NODES - 1);
        let d = self.integrate_tangent(j as f64 * h, s);
        [self.table[j][0] + d[0], self.table[j][1] + d[1]]
    }
}

struct SpaceFrame {
    pos: [f64; 3],
    d1: [f64; 3],
    d2: [f64; 3],
    normals: [[f64; 3]; 2],
    dnormals: [[f64; 3]; 2],
}

/// Closed curve (R cos t, R sin t, h sin(n t)) with a twist-corrected rotation-minimizing frame.
#[derive(Debug, Clone)]
struct SpaceCurveModel {
    r: f64,
    h: f64,
    n: f64,
    /// Transported frames at equispaced t-nodes, inclusive of t = 2π.
    nodes: Vec<[[f64; 3]; 2]>,
    holonomy: f64,
    /// φ'(t) of the corrective rotation; equals C[t][0][1].
    twist_rate: f64,
    closure_defect: f64,
    length: f64,
    bound: f64,
}

const SPACE_NODES: usize = 4096;

impl SpaceCurveModel {
    fn new(r: f64, h: f64, n: f64) -> Result<Self> {
        let mut model = SpaceCurveModel {
            r,
            h,
            n,
            nodes: Vec::with_capacity(SPACE_NODES + 1),
            holonomy: 0.0,
            twist_rate: 0.0,
            closure_defect: 0.0,
            length: 0.0,
            bound: 0.0,
        };
        let d1 = model.d1(0.0);
        let t0 = normalize(d1);
        let e1 = normalize(sub_proj([1.0, 0.0, 0.0], t0));
        let e2 = cross(&t0, &e1);
        let mut frame = [e1, e2];
        model.nodes.push(frame);
        let step = TAU / SPACE_NODES as f64;
        for j in 0..SPACE_NODES {
            frame = model.rk4(frame, j as f64 * step, step);
            model.nodes.push(frame);
        }
        let end = model.nodes[SPACE_NODES][0];
        model.holonomy = dot(&end, &e2).atan2(dot(&end, &e1));
        model.twist_rate = -model.holonomy / TAU;
        let closed = model.frame(TAU - 1e-15).normals;
        let start = model.frame(0.0).normals;
        model.closure_defect = (0..2)
            .map(|a| (0..3).map(|k| (closed[a][k] - start[a][k]).powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        if model.closure_defect > 1e-8 {
            return Err(Error::Frame(format!(
                "normal frame fails to close: defect {:.3e}",
                model.closure_defect
            )));
        }
        let m = 1024;
        let mut pts = Vec::with_capacity(m);
        let mut arcs = Vec::with_capacity(m);
        let mut kmax: f64 = 0.0;
        let mut acc = 0.0;
        let dt = TAU / m as f64;
        for i in 0..m {
            let t = i as f64 * dt;
            pts.push(model.pos(t).to_vec());
            arcs.push(acc);
            let a = model.d1(t);
            let b = model.d2(t);
            let sp = dot(&a, &a).sqrt();
            kmax = kmax.max(norm3(cross(&a, &b)) / sp.powi(3));
            // Simpson on the subinterval
            let mid = norm3(model.d1(t + 0.5 * dt));
            let next = norm3(model.d1(t + dt));
            acc += dt / 6.0 * (sp + 4.0 * mid + next);
        }
        model.length = acc;
        model.bound = reach_estimate(&pts, &arcs, acc, kmax);
        Ok(model)
    }

    fn pos(&self, t: f64) -> [f64; 3] {
        [self.r * t.cos(), self.r * t.sin(), self.h * (self.n * t).sin()]
    }

    fn d1(&self, t: f64) -> [f64; 3] {
        [-self.r * t.sin(), self.r * t.cos(), self.h * self.n * (self.n * t).cos()]
    }

    fn d2(&self, t: f64) -> [f64; 3] {
        [-self.r * t.cos(), -self.r * t.sin(), -self.h * self.n * self.n * (self.n * t).sin()]
    }

    /// Transport ODE m' = −(⟨m, γ''⟩/|γ'|²) γ'.
    fn rhs(&self, m: [[f64; 3]; 2], t: f64) -> [[f64; 3]; 2] {
        let a = self.d1(t);
        let b = self.d2(t);
        let s2 = dot(&a, &a);
        let mut out = [[0.0; 3]; 2];
        for k in 0..2 {
            let c = -dot(&m[k], &b) / s2;
            out[k] = [c * a[0], c * a[1], c * a[2]];
        }
        out
    }

    fn rk4(&self, m: [[f64; 3]; 2], t: f64, h: f64) -> [[f64; 3]; 2] {
        let add = |m: &[[f64; 3]; 2], k: &[[f64; 3]; 2], s: f64| {
            let mut o = *m;
            for a in 0..2 {
                for i in 0..3 {
                    o[a][i] += s * k[a][i];
                }
            }
            o
        };
        let k1 = self.rhs(m, t);
        let k2 = self.rhs(add(&m, &k1, 0.5 * h), t + 0.5 * h);
        let k3 = self.rhs(add(&m, &k2, 0.5 * h), t + 0.5 * h);
        let k4 = self.rhs(add(&m, &k3, h), t + h);
        let mut o = m;
        for a in 0..2 {
            for i in 0..3 {
                o[a][i] += h / 6.0 * (k1[a][i] + 2.0 * k2[a][i] + 2.0 * k3[a][i] + k4[a][i]);
            }
        }
        o
    }

    fn frame(&self, t: f64) -> SpaceFrame {
        let t = t.rem_euclid(TAU);
        let step = TAU / SPACE_NODES as f64;
        let j = ((t / step).round() as usize).min(SPACE_NODES);
        let dt = t - j as f64 * step;
        let mut m = if dt == 0.0 { self.nodes[j] } else { self.rk4(self.nodes[j], j as f64 * step, dt) };
        let d1 = self.d1(t);
        let d2 = self.d2(t);
        let tan = normalize(d1);
        m[0] = normalize(sub_proj(m[0], tan));
        m[1] = cross(&tan, &m[0]);
        let (s, c) = (self.twist_rate * t).sin_cos();
        let mut normals = [[0.0; 3]; 2];
        for k in 0..3 {
            normals[0][k] = c * m[0][k] + s * m[1][k];
            normals[1][k] = -s * m[0][k] + c * m[1][k];
        }
        let s2 = dot(&d1, &d1);
        let mut dnormals = [[0.0; 3]; 2];
        for k in 0..3 {
            let t0 = -dot(&normals[0], &d2) / s2;
            let t1 = -dot(&normals[1], &d2) / s2;
            dnormals[0][k] = self.twist_rate * normals[1][k] + t0 * d1[k];
            dnormals[1][k] = -self.twist_rate * normals[0][k] + t1 * d1[k];
        }
        SpaceFrame { pos: self.pos(t), d1, d2, normals, dnormals }
    }
}

fn norm3(a: [f64; 3]) -> f64 {
    dot(&a, &a).sqrt()
}

fn normalize(a: [f64; 3]) -> [f64; 3] {
    let n = norm3(a);
    [a[0] / n, a[1] / n, a[2] / n]
}

fn sub_proj(a: [f64; 3], unit: [f64; 3]) -> [f64; 3] {
    let c = dot(&a, &unit);
    [a[0] - c * unit[0], a[1] - c * unit[1], a[2] - c * unit[2]]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_data() {
        let g = Geometry::new(GeometrySpec::circle(2.0)).unwrap();
        let c = g.curvature_at(&[0.3]).unwrap();
        assert!((c.weingarten[0][(0, 0)].abs() - 0.5).abs() < 1e-15);
        assert_eq!(c.scal_l, 0.0);
        assert!((c.tension_norm_sq - 0.25).abs() < 1e-15);
        assert_eq!((c.scal_m, c.ric_bar, c.r_bar), (0.0, 0.0, 0.0));
    }

    #[test]
    fn equator_contractions() {
        let g = Geometry::new(GeometrySpec::latitude(PI / 2.0)).unwrap();
        let c = g.curvature_at(&[1.0]).unwrap();
        assert!(c.tension_norm_sq < 1e-30);
        assert!((c.scal_m - 2.0).abs() < 1e-14);
        assert!((c.ric_bar - 1.0).abs() < 1e-14);
        assert!(c.r_bar.abs() < 1e-14);
    }

    #[test]
    fn zero_section_is_isometric() {
        for spec in [
            GeometrySpec::circle(1.3),
            GeometrySpec::sphere(0.8),
            GeometrySpec::latitude(1.1),
            GeometrySpec::space_curve(1.0, 0.2, 2),
        ] {
            let g = Geometry::new(spec).unwrap();
            let x = vec![0.7; g.l()];
            let t = g.exact_tube_metric(&x, &vec![0.0; g.codim()]).unwrap();
            let gl = g.induced_metric(&x).unwrap();
            let l = g.l();
            for i in 0..g.m() {
                for j in 0..g.m() {
                    let e = if i < l && j < l {
                        gl[(i, j)]
                    } else if i == j {
                        1.0
                    } else {
                        0.0
                    };
                    assert_eq!(t.g[(i, j)], e);
                }
            }
            assert_eq!(t.rho, 1.0);
        }
    }

    #[test]
    fn rejects_bad_params() {
        assert!(matches!(Geometry::new(GeometrySpec::circle(-1.0)), Err(Error::Validation(_))));
        assert!(matches!(Geometry::new(GeometrySpec::circle(f64::NAN)), Err(Error::Validation(_))));
        assert!(matches!(Geometry::new(GeometrySpec::latitude(0.0)), Err(Error::Validation(_))));
        let open = GeometrySpec::plane_curve(TAU, &[0.5; 8]);
        assert!(matches!(Geometry::new(open), Err(Error::Validation(_))));
    }

    #[test]
    fn beyond_bound_is_a_domain_error() {
        let g = Geometry::new(GeometrySpec::circle(1.0)).unwrap();
        assert!(matches!(g.exact_tube_metric(&[0.0], &[-1.0]), Err(Error::Domain(_))));
    }
}
