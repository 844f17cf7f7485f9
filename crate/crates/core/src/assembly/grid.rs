//! Tensor-product meshes of the unit tube: a periodic mesh of L times a mesh of the unit ball.

use std::f64::consts::{PI, TAU};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Geometry, GeometryKind};

/// An axis-aligned cell in parameter coordinates with corners ordered by bit k ↔ axis k.
#[derive(Debug, Clone, Serialize)]
pub struct BoxCell {
    pub lo: Vec<f64>,
    pub size: Vec<f64>,
    pub corners: Vec<usize>,
}

impl BoxCell {
    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.size).map(|(a, h)| a + 0.5 * h).collect()
    }
}

/// Multilinear mesh of L. For the sphere the pole rows collapse to a single node each.
#[derive(Debug, Clone, Serialize)]
pub struct BaseMesh {
    pub dim: usize,
    pub n_dofs: usize,
    pub coords: Vec<Vec<f64>>,
    pub cells: Vec<BoxCell>,
    pub n_x: usize,
}

impl BaseMesh {
    pub fn new(geom: &Geometry, n_x: usize) -> Result<Self> {
        if n_x < 16 {
            return Err(Error::Validation(format!("n_x = {n_x} below the minimum of 16")));
        }
        let axes = geom.param_axes();
        if geom.kind() == GeometryKind::SphereInR3 {
            if !n_x.is_multiple_of(2) {
                return Err(Error::Validation("sphere meshes need an even n_x".into()));
            }
            return Ok(Self::sphere(n_x));
        }
        let period = axes[0].hi - axes[0].lo;
        let h = period / n_x as f64;
        let coords = (0..n_x).map(|j| vec![axes[0].lo + j as f64 * h]).collect();
        let cells = (0..n_x)
            .map(|j| BoxCell { lo: vec![axes[0].lo + j as f64 * h], size: vec![h], corners: vec![j, (j + 1) % n_x] })
            .collect();
        Ok(BaseMesh { dim: 1, n_dofs: n_x, coords, cells, n_x })
    }

    fn sphere(n_x: usize) -> Self {
        let n_phi = n_x;
        let n_theta = n_x / 2;
        let ht = PI / n_theta as f64;
        let hp = TAU / n_phi as f64;
        let south = 1 + (n_theta - 1) * n_phi;
        let dof = |j: usize, k: usize| -> usize {
            if j == 0 {
                0
            } else if j == n_theta {
                south
            } else {
                1 + (j - 1) * n_phi + (k % n_phi)
            }
        };
        let mut coords = vec![vec![0.0, 0.0]];
        for j in 1..n_theta {
            for k in 0..n_phi {
                coords.push(vec![j as f64 * ht, k as f64 * hp]);
            }
        }
        coords.push(vec![PI, 0.0]);
        let mut cells = Vec::with_capacity(n_theta * n_phi);
        for j in 0..n_theta {
            for k in 0..n_phi {
                cells.push(BoxCell {
                    lo: vec![j as f64 * ht, k as f64 * hp],
                    size: vec![ht, hp],
                    corners: vec![dof(j, k), dof(j + 1, k), dof(j, k + 1), dof(j + 1, k + 1)],
                });
            }
        }
        BaseMesh { dim: 2, n_dofs: south + 1, coords, cells, n_x }
    }

    pub fn cell_centers(&self) -> Vec<Vec<f64>> {
        self.cells.iter().map(BoxCell::center).collect()
    }
}

/// Mesh of the unit ball: uniform on (−1, 1), or polar (r, ϑ) on the disk with
/// the innermost ring at r = Δr/2.
#[derive(Debug, Clone, Serialize)]
pub struct FiberMesh {
    pub codim: usize,
    pub n_fiber: usize,
    /// Parameter coordinates: w for the interval, (r, ϑ) for the disk.
    pub coords: Vec<Vec<f64>>,
    pub boundary: Vec<bool>,
    pub cells: Vec<BoxCell>,
}

impl FiberMesh {
    pub fn new(codim: usize, n_fiber: usize) -> Result<Self> {
        if n_fiber < 8 {
            return Err(Error::Validation(format!("n_fiber = {n_fiber} below the minimum of 8")));
        }
        match codim {
            1 => Ok(Self::interval(n_fiber)),
            2 => {
                if !n_fiber.is_multiple_of(2) {
                    return Err(Error::Validation("disk meshes need an even n_fiber".into()));
                }
                Ok(Self::disk(n_fiber))
            }
            _ => Err(Error::Unsupported(format!("fiber dimension {codim}"))),
        }
    }

    fn interval(n: usize) -> Self {
        let h = 2.0 / n as f64;
        let coords = (0..=n).map(|j| vec![-1.0 + j as f64 * h]).collect();
        let boundary = (0..=n).map(|j| j == 0 || j == n).collect();
        let cells = (0..n).map(|j| BoxCell { lo: vec![-1.0 + j as f64 * h], size: vec![h], corners: vec![j, j + 1] }).collect();
        FiberMesh { codim: 1, n_fiber: n, coords, boundary, cells }
    }

    fn disk(n: usize) -> Self {
        let n_r = n / 2;
        let n_t = n;
        let dr = 1.0 / (n_r as f64 + 0.5);
        let dt = TAU / n_t as f64;
        let node = |k: usize, q: usize| k * n_t + (q % n_t);
        let mut coords = Vec::with_capacity((n_r + 1) * n_t);
        let mut boundary = Vec::with_capacity((n_r + 1) * n_t);
        for k in 0..=n_r {
            for q in 0..n_t {
                let r = if k == n_r { 1.0 } else { (k as f64 + 0.5) * dr };
                coords.push(vec![r, q as f64 * dt]);
                boundary.push(k == n_r);
            }
        }
        let mut cells = Vec::with_capacity(n_r * n_t);
        for k in 0..n_r {
            for q in 0..n_t {
                cells.push(BoxCell {
                    lo: vec![(k as f64 + 0.5) * dr, q as f64 * dt],
                    size: vec![dr, dt],
                    corners: vec![node(k, q), node(k + 1, q), node(k, q + 1), node(k + 1, q + 1)],
                });
            }
        }
        FiberMesh { codim: 2, n_fiber: n, coords, boundary, cells }
    }

    pub fn is_polar(&self) -> bool {
        self.codim == 2
    }

    /// Normal coordinates w of a parameter point.
    pub fn to_normal(&self, q: &[f64]) -> Vec<f64> {
        if self.is_polar() {
            vec![q[0] * q[1].cos(), q[0] * q[1].sin()]
        } else {
            q.to_vec()
        }
    }

    /// Jacobian ∂q/∂w at a parameter point (identity on the interval).
    pub fn jacobian(&self, q: &[f64]) -> [[f64; 2]; 2] {
        if self.is_polar() {
            let (s, c) = q[1].sin_cos();
            [[c, s], [-s / q[0], c / q[0]]]
        } else {
            [[1.0, 0.0], [0.0, 1.0]]
        }
    }

    /// Volume density of the parameter coordinates (r on the disk).
    pub fn density(&self, q: &[f64]) -> f64 {
        if self.is_polar() {
            q[0]
        } else {
            1.0
        }
    }
}

/// Tube grid: base mesh × fiber mesh, unknowns ordered x-major over interior fiber nodes.
#[derive(Debug, Clone, Serialize)]
pub struct FermiGrid {
    pub base: BaseMesh,
    pub fiber: FiberMesh,
    /// Interior index of each fiber node, `None` on the Dirichlet boundary.
    pub fiber_interior: Vec<Option<usize>>,
    pub n_fiber_interior: usize,
    /// Lumped m₀ weight of every tube node (base dof × fiber node, x-major).
    pub weights: Vec<f64>,
    /// True on the outer boundary |w| = 1, same indexing as `weights`.
    pub dirichlet_mask: Vec<bool>,
}

pub fn build_grid(geom: &Geometry, n_x: usize, n_fiber: usize) -> Result<FermiGrid> {
    let base = BaseMesh::new(geom, n_x)?;
    let fiber = FiberMesh::new(geom.codim(), n_fiber)?;
    let mut fiber_interior = Vec::with_capacity(fiber.coords.len());
    let mut count = 0;
    for &b in &fiber.boundary {
        if b {
            fiber_interior.push(None);
        } else {
            fiber_interior.push(Some(count));
            count += 1;
        }
    }
    let base_w = lumped_base_weights(geom, &base)?;
    let fiber_w = lumped_fiber_weights(&fiber);
    let nf = fiber.coords.len();
    let mut weights = Vec::with_capacity(base.n_dofs * nf);
    let mut dirichlet_mask = Vec::with_capacity(base.n_dofs * nf);
    for bw in &base_w {
        for (fw, &bd) in fiber_w.iter().zip(&fiber.boundary) {
            weights.push(bw * fw);
            dirichlet_mask.push(bd);
        }
    }
    Ok(FermiGrid { base, fiber, fiber_interior, n_fiber_interior: count, weights, dirichlet_mask })
}

/// √det g_L at the center of each base cell.
pub fn base_cell_density(geom: &Geometry, base: &BaseMesh) -> Result<Vec<f64>> {
    base.cells
        .iter()
        .map(|c| Ok(geom.induced_metric(&c.center())?.determinant().sqrt()))
        .collect()
}

fn lumped_base_weights(geom: &Geometry, base: &BaseMesh) -> Result<Vec<f64>> {
    let dens = base_cell_density(geom, base)?;
    let mut w = vec![0.0; base.n_dofs];
    for (cell, d) in base.cells.iter().zip(dens) {
        let vol: f64 = cell.size.iter().product::<f64>() * d;
        let share = vol / cell.corners.len() as f64;
        for &c in &cell.corners {
            w[c] += share;
        }
    }
    Ok(w)
}

fn lumped_fiber_weights(fiber: &FiberMesh) -> Vec<f64> {
    let mut w = vec![0.0; fiber.coords.len()];
    for cell in &fiber.cells {
        let vol: f64 = cell.size.iter().product::<f64>() * fiber.density(&cell.center());
        let share = vol / cell.corners.len() as f64;
        for &c in &cell.corners {
            w[c] += share;
        }
    }
    w
}

impl FermiGrid {
    pub fn n_x(&self) -> usize {
        self.base.n_x
    }

    pub fn n_fiber(&self) -> usize {
        self.fiber.n_fiber
    }

    pub fn n_unknowns(&self) -> usize {
        self.base.n_dofs * self.n_fiber_interior
    }

    pub fn index(&self, base_dof: usize, fiber_interior: usize) -> usize {
        base_dof * self.n_fiber_interior + fiber_interior
    }

    /// Interior fiber nodes in interior order, as parameter coordinates.
    pub fn interior_fiber_coords(&self) -> Vec<Vec<f64>> {
        self.fiber
            .coords
            .iter()
            .zip(&self.fiber.boundary)
            .filter(|(_, b)| !**b)
            .map(|(c, _)| c.clone())
            .collect()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Sample a function of (x, w) at the interior unknowns.
    pub fn sample(&self, f: impl Fn(&[f64], &[f64]) -> f64) -> Vec<f64> {
        let fc = self.interior_fiber_coords();
        let ws: Vec<Vec<f64>> = fc.iter().map(|q| self.fiber.to_normal(q)).collect();
        let mut out = Vec::with_capacity(self.n_unknowns());
        for x in &self.base.coords {
            for w in &ws {
                out.push(f(x, w));
            }
        }
        out
    }
}
