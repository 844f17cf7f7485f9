use std::f64::consts::{FRAC_PI_2, PI, TAU};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tubelab::assembly::sparse::dot;
use tubelab::assembly::{
    assemble_horizontal, assemble_limit_form, assemble_mass, assemble_reference_form, assemble_rescaled_form,
    assemble_sobolev, assemble_vertical, build_grid, fiber_pencil, E0Projector, FermiGrid, FiberPencil,
};
use tubelab::eigen::dense_eigenpairs;
use tubelab::error::Error;
use tubelab::geometry::{Geometry, GeometrySpec};

fn setup(spec: GeometrySpec, n_x: usize, n_fiber: usize) -> (Geometry, FermiGrid, FiberPencil) {
    let g = Geometry::new(spec).unwrap();
    let grid = build_grid(&g, n_x, n_fiber).unwrap();
    let pencil = fiber_pencil(&grid.fiber).unwrap();
    (g, grid, pencil)
}

fn random_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

#[test]
fn grid_counts() {
    let (_, grid, _) = setup(GeometrySpec::circle(1.0), 16, 8);
    assert_eq!(grid.base.n_dofs, 16);
    assert_eq!(grid.n_fiber_interior, 7);
    assert_eq!(grid.n_unknowns(), 112);
    let (_, grid, _) = setup(GeometrySpec::sphere(1.0), 16, 8);
    assert_eq!(grid.base.n_dofs, 2 + 7 * 16);
    assert!(build_grid(&Geometry::new(GeometrySpec::circle(1.0)).unwrap(), 8, 8).is_err());
}

#[test]
fn total_weight_is_reference_volume() {
    let (_, grid, _) = setup(GeometrySpec::circle(1.0), 16, 8);
    assert!((grid.total_weight() - 4.0 * PI).abs() < 1e-12);
    let (_, grid, _) = setup(GeometrySpec::sphere(1.0), 32, 8);
    assert!((grid.total_weight() / (8.0 * PI) - 1.0).abs() < 0.02);
}

#[test]
fn forms_are_symmetric() {
    for spec in [GeometrySpec::circle(1.0), GeometrySpec::space_curve(1.0, 0.3, 2), GeometrySpec::sphere(1.0)] {
        let (g, grid, pencil) = setup(spec, 16, 8);
        let f = assemble_rescaled_form(&g, &grid, 0.1, 1.0, &pencil).unwrap();
        assert!(f.stiffness.asymmetry() < 1e-12);
        assert!(f.mass.asymmetry() < 1e-14);
        assert!(assemble_horizontal(&g, &grid).unwrap().asymmetry() < 1e-12);
    }
}

#[test]
fn reference_form_depends_on_eps_only_through_vertical() {
    let (g, grid, pencil) = setup(GeometrySpec::space_curve(1.0, 0.3, 2), 16, 8);
    let a = assemble_reference_form(&g, &grid, 0.1, 0.5, &pencil).unwrap();
    let b = assemble_reference_form(&g, &grid, 0.2, 0.5, &pencil).unwrap();
    let v = assemble_vertical(&g, &grid, pencil.lambda0_h).unwrap();
    for seed in 0..5 {
        let u = random_vector(grid.n_unknowns(), seed);
        let diff = a.stiffness.quad_form(&u) - b.stiffness.quad_form(&u);
        let expect = (100.0 - 25.0) * v.quad_form(&u);
        assert!((diff - expect).abs() < 1e-10 * expect.abs().max(1.0));
    }
}

#[test]
fn flat_strip_ground_fiber_energy_is_alpha() {
    let (g, grid, pencil) = setup(GeometrySpec::flat_strip(5.0), 32, 16);
    assert!(g.is_flat_strip());
    let e0 = E0Projector::new(&grid, &pencil).unwrap();
    let u = e0.lift(&vec![1.0; grid.base.n_dofs]).unwrap();
    for (eps, alpha) in [(0.2, 0.0), (0.05, 1.5)] {
        let f = assemble_rescaled_form(&g, &grid, eps, alpha, &pencil).unwrap();
        assert!((f.energy(&u) - 0.5 * alpha * f.norm_sq(&u)).abs() < 1e-10);
    }
}

#[test]
fn sobolev_form_splits_into_vertical_and_horizontal() {
    for spec in [GeometrySpec::circle(1.0), GeometrySpec::space_curve(1.0, 0.3, 2), GeometrySpec::latitude(1.0)] {
        let (g, grid, pencil) = setup(spec, 16, 8);
        let q0 = assemble_sobolev(&g, &grid).unwrap();
        let v = assemble_vertical(&g, &grid, pencil.lambda0_h).unwrap();
        let h = assemble_horizontal(&g, &grid).unwrap();
        let m = assemble_mass(&g, &grid).unwrap();
        for seed in 0..100 {
            let u = random_vector(grid.n_unknowns(), seed);
            let lhs = q0.quad_form(&u);
            let rhs = v.quad_form(&u) + h.quad_form(&u) + pencil.lambda0_h * m.quad_form(&u);
            assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
        }
    }
}

#[test]
fn circle_ground_fiber_energy_sees_the_potential() {
    let (g, grid, pencil) = setup(GeometrySpec::circle(1.0), 32, 16);
    let e0 = E0Projector::new(&grid, &pencil).unwrap();
    let u = e0.lift(&vec![1.0; grid.base.n_dofs]).unwrap();
    let alpha = 1.0;
    let f = assemble_rescaled_form(&g, &grid, 0.1, alpha, &pencil).unwrap();
    let norm = f.norm_sq(&u);
    let reduced = (2.0 * f.energy(&u) - alpha * norm) / norm;
    assert!((reduced + 0.25).abs() < 0.05, "{reduced}");
}

#[test]
fn rescaled_form_rejects_eps_above_bound() {
    let (g, grid, pencil) = setup(GeometrySpec::circle(1.0), 16, 8);
    let top = g.eps_max();
    assert!(matches!(assemble_rescaled_form(&g, &grid, 1.01 * top, 1.0, &pencil), Err(Error::Domain(_))));
    assert!(matches!(assemble_rescaled_form(&g, &grid, 0.0, 1.0, &pencil), Err(Error::Domain(_))));
}

#[test]
fn limit_spectra() {
    let circle = Geometry::new(GeometrySpec::circle(1.0)).unwrap();
    let vals = dense_eigenpairs(&assemble_limit_form(&circle, 128, 0.0).unwrap(), 5).unwrap().eigenvalues;
    for (v, e) in vals.iter().zip([-0.25, 0.75, 0.75, 3.75, 3.75]) {
        assert!((v - e).abs() < 5e-3, "{vals:?}");
    }
    let equator = Geometry::new(GeometrySpec::latitude(FRAC_PI_2)).unwrap();
    let vals = dense_eigenpairs(&assemble_limit_form(&equator, 128, 0.0).unwrap(), 3).unwrap().eigenvalues;
    for (v, e) in vals.iter().zip([-0.5, 0.5, 0.5]) {
        assert!((v - e).abs() < 5e-3, "{vals:?}");
    }
    let sphere = Geometry::new(GeometrySpec::sphere(1.0)).unwrap();
    let vals = dense_eigenpairs(&assemble_limit_form(&sphere, 32, 0.0).unwrap(), 4).unwrap().eigenvalues;
    for (v, e) in vals.iter().zip([0.0, 2.0, 2.0, 2.0]) {
        assert!((v - e).abs() < 0.05, "{vals:?}");
    }
    let strip = Geometry::new(GeometrySpec::flat_strip(TAU)).unwrap();
    let vals = dense_eigenpairs(&assemble_limit_form(&strip, 64, 0.0).unwrap(), 3).unwrap().eigenvalues;
    assert!(vals[0].abs() < 1e-10);
    assert!((vals[1] - 1.0).abs() < 5e-3);
}

#[test]
fn e0_of_odd_functions_vanishes() {
    let (_, grid, pencil) = setup(GeometrySpec::circle(1.0), 16, 8);
    let e0 = E0Projector::new(&grid, &pencil).unwrap();
    let odd = grid.sample(|x, w| (1.0 + x[0].sin()) * w[0] * (1.0 - w[0] * w[0]));
    assert!(e0.project(&odd).unwrap().iter().all(|v| v.abs() < 1e-13));
    let (_, grid, pencil) = setup(GeometrySpec::space_curve(1.0, 0.3, 2), 16, 8);
    let e0 = E0Projector::new(&grid, &pencil).unwrap();
    let odd = grid.sample(|x, w| x[0].cos() * w[1]);
    assert!(e0.project(&odd).unwrap().iter().all(|v| v.abs() < 1e-12));
    assert!(matches!(e0.project(&odd[1..]), Err(Error::Shape(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn e0_is_an_orthogonal_projection(seed in any::<u64>(), other in any::<u64>()) {
        let (g, grid, pencil) = setup(GeometrySpec::circle(1.0), 16, 8);
        let m = assemble_mass(&g, &grid).unwrap();
        let e0 = E0Projector::new(&grid, &pencil).unwrap();
        let u = random_vector(grid.n_unknowns(), seed);
        let v = random_vector(grid.n_unknowns(), other);
        let pu = e0.project(&u).unwrap();
        let ppu = e0.project(&pu).unwrap();
        prop_assert!(pu.iter().zip(&ppu).all(|(a, b)| (a - b).abs() < 1e-12));
        prop_assert!(m.quad_form(&pu) <= m.quad_form(&u) * (1.0 + 1e-12));
        let pv = e0.project(&v).unwrap();
        let lhs = dot(&pu, &m.matvec(&v));
        let rhs = dot(&u, &m.matvec(&pv));
        prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
    }
}
