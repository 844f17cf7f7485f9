//! Finite element discretization of the tube forms on tensor-product Fermi grids.

pub mod element;
pub mod grid;
pub mod sparse;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fermi::{effective_potential_from, horizontal_projector, potential_w, reference_metric};
use crate::geometry::{CurvatureData, Geometry};
use element::ReferenceElement;
pub use grid::{build_grid, BaseMesh, BoxCell, FermiGrid, FiberMesh};
pub use sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FormKind {
    Rescaled,
    Reference,
    Vertical,
    Horizontal,
    HorizontalFlat,
    Sobolev,
    Mass,
    Limit,
    Fiber,
}

#[derive(Debug, Clone, Serialize)]
pub struct FormMeta {
    pub kind: FormKind,
    pub epsilon: Option<f64>,
    pub alpha: Option<f64>,
    pub lambda0_h: Option<f64>,
}

/// Stiffness A and mass M of a quadratic form F(u) = ½ uᵀAu with ⟨u, u⟩ = uᵀMu.
#[derive(Debug, Clone)]
pub struct FormPair {
    pub stiffness: CsrMatrix,
    pub mass: CsrMatrix,
    pub meta: FormMeta,
}

impl FormPair {
    pub fn n(&self) -> usize {
        self.stiffness.n()
    }

    /// F(u) = ½ uᵀAu.
    pub fn energy(&self, u: &[f64]) -> f64 {
        0.5 * self.stiffness.quad_form(u)
    }

    pub fn norm_sq(&self, u: &[f64]) -> f64 {
        self.mass.quad_form(u)
    }
}

/// Discrete Dirichlet pencil of the unit ball on the fiber mesh.
#[derive(Debug, Clone)]
pub struct FiberPencil {
    pub stiffness: DMatrix<f64>,
    pub mass: DMatrix<f64>,
    pub lambda0_h: f64,
    pub lambda1_h: f64,
    /// Ground state on interior fiber nodes, mass-normalized and positive.
    pub ground: Vec<f64>,
}

fn scatter_local(
    triplets: &mut Vec<(usize, usize, f64)>,
    local: &[f64],
    map: &[Option<usize>],
) {
    let n = map.len();
    for a in 0..n {
        let Some(i) = map[a] else { continue };
        for b in 0..n {
            let Some(j) = map[b] else { continue };
            triplets.push((i, j, local[a * n + b]));
        }
    }
}

pub fn fiber_pencil(fiber: &FiberMesh) -> Result<FiberPencil> {
    let refel = ReferenceElement::new(fiber.codim);
    let mut interior = Vec::with_capacity(fiber.coords.len());
    let mut count = 0;
    for &b in &fiber.boundary {
        interior.push(if b {
            None
        } else {
            count += 1;
            Some(count - 1)
        });
    }
    let mut kt = Vec::new();
    let mut mt = Vec::new();
    for cell in &fiber.cells {
        let q = cell.center();
        let j = fiber.jacobian(&q);
        let c = fiber.codim;
        let g = DMatrix::from_fn(c, c, |p, r| (0..c).map(|k| j[p][k] * j[r][k]).sum());
        let dens = fiber.density(&q);
        let map: Vec<Option<usize>> = cell.corners.iter().map(|&k| interior[k]).collect();
        scatter_local(&mut kt, &refel.local_matrix(&cell.size, &g, dens, 0.0), &map);
        scatter_local(&mut mt, &refel.local_mass(&cell.size, dens), &map);
    }
    let k = CsrMatrix::from_triplets(count, &kt).to_dense();
    let m = CsrMatrix::from_triplets(count, &mt).to_dense();
    let (vals, vecs) = crate::eigen::dense::generalized_lowest(&k, &m, 2)?;
    let mut ground: Vec<f64> = vecs.column(0).iter().copied().collect();
    if ground.iter().sum::<f64>() < 0.0 {
        ground.iter_mut().for_each(|v| *v = -*v);
    }
    Ok(FiberPencil { stiffness: k, mass: m, lambda0_h: vals[0], lambda1_h: vals[1], ground })
}

/// Curvature data at every base cell center.
pub fn base_curvature(geom: &Geometry, base: &BaseMesh) -> Result<Vec<CurvatureData>> {
    base.cells.par_iter().map(|c| geom.curvature_at(&c.center())).collect()
}

/// Coefficients (dual metric in (x, w) coordinates, potential) at a cell midpoint.
type Coefficients<'a> = dyn Fn(usize, &[f64], &[f64]) -> Result<(DMatrix<f64>, f64)> + Sync + 'a;

/// Assemble ∫ (du·G du + V u²) dm₀ over the tube with midpoint-frozen coefficients.
fn assemble_tube(geom: &Geometry, grid: &FermiGrid, coeff: &Coefficients) -> Result<CsrMatrix> {
    let l = geom.l();
    let c = geom.codim();
    let m = l + c;
    let refel = ReferenceElement::new(m);
    let base_dens = grid::base_cell_density(geom, &grid.base)?;
    let nfc = grid.fiber.cells.len();
    let n_cells = grid.base.cells.len() * nfc;
    let locals: Vec<Vec<f64>> = (0..n_cells)
        .into_par_iter()
        .map(|k| {
            let (bi, fi) = (k / nfc, k % nfc);
            let bc = &grid.base.cells[bi];
            let fc = &grid.fiber.cells[fi];
            let x = bc.center();
            let q = fc.center();
            let w = grid.fiber.to_normal(&q);
            let (gw, v) = coeff(bi, &x, &w)?;
            let jac = grid.fiber.jacobian(&q);
            let p = DMatrix::from_fn(m, m, |r, s| {
                if r < l || s < l {
                    if r == s {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    jac[r - l][s - l]
                }
            });
            let gy = &p * gw * p.transpose();
            let size: Vec<f64> = bc.size.iter().chain(&fc.size).copied().collect();
            let dens = base_dens[bi] * grid.fiber.density(&q);
            Ok(refel.local_matrix(&size, &gy, dens, v))
        })
        .collect::<Result<_>>()?;
    let nl = refel.n_local;
    let bmask = (1 << l) - 1;
    let mut triplets = Vec::with_capacity(n_cells * nl * nl);
    for (k, local) in locals.iter().enumerate() {
        let (bi, fi) = (k / nfc, k % nfc);
        let bc = &grid.base.cells[bi];
        let fc = &grid.fiber.cells[fi];
        let map: Vec<Option<usize>> = (0..nl)
            .map(|a| {
                let b = bc.corners[a & bmask];
                grid.fiber_interior[fc.corners[a >> l]].map(|f| grid.index(b, f))
            })
            .collect();
        scatter_local(&mut triplets, local, &map);
    }
    Ok(CsrMatrix::from_triplets(grid.n_unknowns(), &triplets))
}

fn check_epsilon(geom: &Geometry, eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= geom.eps_max() + 1e-15) {
        return Err(Error::Domain(format!("ε = {eps} outside (0, {}]", geom.eps_max())));
    }
    Ok(())
}

fn check_mass(mass: &CsrMatrix) -> Result<()> {
    let d = mass.diagonal();
    let rows = mass.matvec(&vec![1.0; mass.n()]);
    if d.iter().chain(&rows).any(|v| !(*v > 0.0)) {
        return Err(Error::Assembly("mass matrix has a non-positive diagonal or row sum".into()));
    }
    Ok(())
}

/// Mass matrix of L²(m₀) on the grid interior.
pub fn assemble_mass(geom: &Geometry, grid: &FermiGrid) -> Result<CsrMatrix> {
    let zero = DMatrix::zeros(geom.m(), geom.m());
    let mass = assemble_tube(geom, grid, &|_, _, _| Ok((zero.clone(), 1.0)))?;
    check_mass(&mass)?;
    Ok(mass)
}

/// Mass weighted by W_L(x) at the base cell centers (the ⟨u, W̄_L u⟩ form).
pub fn assemble_potential_mass(geom: &Geometry, grid: &FermiGrid) -> Result<CsrMatrix> {
    let curv = base_curvature(geom, &grid.base)?;
    let zero = DMatrix::zeros(geom.m(), geom.m());
    assemble_tube(geom, grid, &|b, _, _| Ok((zero.clone(), effective_potential_from(&curv[b]))))
}

/// Vertical form q_V(u) = ∫ |∂_w u|² − λ₀ʰ u² with the discrete fiber eigenvalue.
pub fn assemble_vertical(geom: &Geometry, grid: &FermiGrid, lambda0_h: f64) -> Result<CsrMatrix> {
    let (l, m) = (geom.l(), geom.m());
    let g = DMatrix::from_fn(m, m, |r, s| if r == s && r >= l { 1.0 } else { 0.0 });
    assemble_tube(geom, grid, &|_, _, _| Ok((g.clone(), -lambda0_h)))
}

/// Horizontal form qH(u) = ∫ |∂ₓu − c(w) ∂_w u|²_{g_L}; independent of ε.
pub fn assemble_horizontal(geom: &Geometry, grid: &FermiGrid) -> Result<CsrMatrix> {
    let curv = base_curvature(geom, &grid.base)?;
    assemble_tube(geom, grid, &|b, _, w| {
        let cd = &curv[b];
        let p = horizontal_projector(cd, w);
        let g_inv = cd.g_l.clone().try_inverse().expect("g_L invertible");
        Ok((p.transpose() * g_inv * p, 0.0))
    })
}

/// ∫ |∂ₓu|²_{g_L}, the horizontal form without the fiber rotation terms.
pub fn assemble_horizontal_flat(geom: &Geometry, grid: &FermiGrid) -> Result<CsrMatrix> {
    let curv = base_curvature(geom, &grid.base)?;
    let (l, m) = (geom.l(), geom.m());
    assemble_tube(geom, grid, &|b, _, _| {
        let g_inv = curv[b].g_l.clone().try_inverse().expect("g_L invertible");
        let mut g = DMatrix::zeros(m, m);
        g.view_mut((0, 0), (l, l)).copy_from(&g_inv);
        Ok((g, 0.0))
    })
}

/// q₀(u) = ∫ |du|²_{g₀} with the inverse of the reference metric computed pointwise.
pub fn assemble_sobolev(geom: &Geometry, grid: &FermiGrid) -> Result<CsrMatrix> {
    let curv = base_curvature(geom, &grid.base)?;
    assemble_tube(geom, grid, &|b, _, w| {
        let g0 = reference_metric(&curv[b], w);
        let inv = g0.try_inverse().ok_or_else(|| Error::Assembly("singular reference metric".into()))?;
        Ok((inv, 0.0))
    })
}

/// Rescaled and renormalized form F_{ε,α}: dual metric D⁻¹g*(x, εw)D⁻¹ with
/// D = diag(Id, ε Id) and potential W(x, εw) + α − λ₀ʰ/ε².
pub fn assemble_rescaled_form(
    geom: &Geometry,
    grid: &FermiGrid,
    eps: f64,
    alpha: f64,
    pencil: &FiberPencil,
) -> Result<FormPair> {
    check_epsilon(geom, eps)?;
    let l = geom.l();
    let lambda0_h = pencil.lambda0_h;
    let stiffness = assemble_tube(geom, grid, &|_, x, w| {
        let ws: Vec<f64> = w.iter().map(|v| eps * v).collect();
        let g = geom.exact_tube_metric(x, &ws)?.g;
        let mut inv = g.try_inverse().ok_or_else(|| Error::Assembly("singular tube metric".into()))?;
        let m = inv.nrows();
        for r in 0..m {
            for s in 0..m {
                let f = if r >= l { 1.0 / eps } else { 1.0 } * if s >= l { 1.0 / eps } else { 1.0 };
                inv[(r, s)] *= f;
            }
        }
        let pot = potential_w(geom, x, &ws)?;
        Ok((inv, pot + alpha - lambda0_h / (eps * eps)))
    })?;
    let mass = assemble_mass(geom, grid)?;
    Ok(FormPair {
        stiffness,
        mass,
        meta: FormMeta { kind: FormKind::Rescaled, epsilon: Some(eps), alpha: Some(alpha), lambda0_h: Some(lambda0_h) },
    })
}

/// The ε-independent pieces of the reference form.
#[derive(Debug, Clone)]
pub struct ReferenceParts {
    pub vertical: CsrMatrix,
    pub horizontal: CsrMatrix,
    pub mass: CsrMatrix,
    pub lambda0_h: f64,
}

impl ReferenceParts {
    pub fn new(geom: &Geometry, grid: &FermiGrid, pencil: &FiberPencil) -> Result<Self> {
        Ok(ReferenceParts {
            vertical: assemble_vertical(geom, grid, pencil.lambda0_h)?,
            horizontal: assemble_horizontal(geom, grid)?,
            mass: assemble_mass(geom, grid)?,
            lambda0_h: pencil.lambda0_h,
        })
    }

    /// F⁰_{ε,α} = ½{ε⁻² q_V + qH + α‖·‖²}.
    pub fn form(&self, eps: f64, alpha: f64) -> Result<FormPair> {
        let stiffness = CsrMatrix::combine(&[
            (1.0 / (eps * eps), &self.vertical),
            (1.0, &self.horizontal),
            (alpha, &self.mass),
        ])?;
        Ok(FormPair {
            stiffness,
            mass: self.mass.clone(),
            meta: FormMeta {
                kind: FormKind::Reference,
                epsilon: Some(eps),
                alpha: Some(alpha),
                lambda0_h: Some(self.lambda0_h),
            },
        })
    }

    /// q₀ʰ = q_V + qH + λ₀ʰ‖·‖².
    pub fn sobolev(&self) -> Result<CsrMatrix> {
        CsrMatrix::combine(&[(1.0, &self.vertical), (1.0, &self.horizontal), (self.lambda0_h, &self.mass)])
    }
}

pub fn assemble_reference_form(
    geom: &Geometry,
    grid: &FermiGrid,
    eps: f64,
    alpha: f64,
    pencil: &FiberPencil,
) -> Result<FormPair> {
    check_epsilon(geom, eps)?;
    ReferenceParts::new(geom, grid, pencil)?.form(eps, alpha)
}

/// Limit form ½∫_L (|dv|² + (W_L + α) v²) on a base mesh.
pub fn assemble_limit_form_on(geom: &Geometry, base: &BaseMesh, alpha: f64) -> Result<FormPair> {
    let refel = ReferenceElement::new(base.dim);
    let curv = base_curvature(geom, base)?;
    let mut kt = Vec::new();
    let mut mt = Vec::new();
    for (cell, cd) in base.cells.iter().zip(&curv) {
        let g_inv = cd.g_l.clone().try_inverse().expect("g_L invertible");
        let dens = cd.g_l.determinant().sqrt();
        let map: Vec<Option<usize>> = cell.corners.iter().map(|&c| Some(c)).collect();
        let v = effective_potential_from(cd) + alpha;
        scatter_local(&mut kt, &refel.local_matrix(&cell.size, &g_inv, dens, v), &map);
        scatter_local(&mut mt, &refel.local_mass(&cell.size, dens), &map);
    }
    let mass = CsrMatrix::from_triplets(base.n_dofs, &mt);
    check_mass(&mass)?;
    Ok(FormPair {
        stiffness: CsrMatrix::from_triplets(base.n_dofs, &kt),
        mass,
        meta: FormMeta { kind: FormKind::Limit, epsilon: None, alpha: Some(alpha), lambda0_h: None },
    })
}

pub fn assemble_limit_form(geom: &Geometry, n_x: usize, alpha: f64) -> Result<FormPair> {
    assemble_limit_form_on(geom, &BaseMesh::new(geom, n_x)?, alpha)
}

/// Orthogonal projection onto {u₀ʰ ⊗ v} in the grid mass inner product.
#[derive(Debug, Clone)]
pub struct E0Projector {
    n_base: usize,
    ground: Vec<f64>,
    /// M_f u₀ʰ.
    dual: Vec<f64>,
}

impl E0Projector {
    pub fn new(grid: &FermiGrid, pencil: &FiberPencil) -> Result<Self> {
        if pencil.ground.len() != grid.n_fiber_interior {
            return Err(Error::Shape("fiber pencil does not match the grid".into()));
        }
        let g = nalgebra::DVector::from_column_slice(&pencil.ground);
        let dual = (&pencil.mass * g).iter().copied().collect();
        Ok(E0Projector { n_base: grid.base.n_dofs, ground: pencil.ground.clone(), dual })
    }

    fn check(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.n_base * self.ground.len() {
            return Err(Error::Shape(format!(
                "vector of length {} on a grid with {} unknowns",
                u.len(),
                self.n_base * self.ground.len()
            )));
        }
        Ok(())
    }

    /// Fiberwise ground-state coefficients v(x) = ⟨u₀ʰ, u(x, ·)⟩.
    pub fn restrict(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check(u)?;
        let nf = self.ground.len();
        Ok(u.chunks(nf).map(|s| sparse::dot(s, &self.dual)).collect())
    }

    /// u₀ʰ ⊗ v.
    pub fn lift(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.n_base {
            return Err(Error::Shape(format!("base vector of length {}, expected {}", v.len(), self.n_base)));
        }
        Ok(v.iter().flat_map(|c| self.ground.iter().map(move |g| c * g)).collect())
    }

    pub fn project(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.lift(&self.restrict(u)?)
    }
}

pub fn project_e0(grid: &FermiGrid, pencil: &FiberPencil, u: &[f64]) -> Result<Vec<f64>> {
    E0Projector::new(grid, pencil)?.project(u)
}
