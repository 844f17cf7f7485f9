use std::f64::consts::PI;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tubelab::assembly::sparse::dot;
use tubelab::assembly::{
    assemble_rescaled_form, build_grid, fiber_pencil, CsrMatrix, FiberMesh, FormKind, FormMeta, FormPair,
};
use tubelab::eigen::{
    dense_eigenpairs, heat_apply, lowest_eigenpairs, lowest_eigenpairs_with, LobpcgOptions, SpectrumResult,
    DEFAULT_SEED,
};
use tubelab::error::Error;
use tubelab::geometry::{Geometry, GeometrySpec};
use tubelab::lab::oracle::tube_spectrum_oracle;

fn pair(a: CsrMatrix, m: CsrMatrix) -> FormPair {
    FormPair {
        stiffness: a,
        mass: m,
        meta: FormMeta { kind: FormKind::Fiber, epsilon: None, alpha: None, lambda0_h: None },
    }
}

/// Random tridiagonal SPD stiffness with a lumped-plus-consistent tridiagonal mass.
fn random_pencil(n: usize, seed: u64) -> FormPair {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut at = Vec::new();
    let mut mt = Vec::new();
    for i in 0..n {
        let c: f64 = rng.gen_range(0.5..2.0);
        at.push((i, i, 2.0 * c + rng.gen_range(0.0..0.5)));
        mt.push((i, i, 4.0 * c));
        if i + 1 < n {
            at.push((i, i + 1, -c));
            at.push((i + 1, i, -c));
            mt.push((i, i + 1, c));
            mt.push((i + 1, i, c));
        }
    }
    pair(CsrMatrix::from_triplets(n, &at), CsrMatrix::from_triplets(n, &mt))
}

fn check_pairs(p: &FormPair, s: &SpectrumResult, tol: f64) {
    for j in 0..s.len() {
        let v = s.vector(j);
        let rq = p.stiffness.quad_form(v) / p.mass.quad_form(v);
        assert!((rq - s.eigenvalues[j]).abs() < 1e-8 * (1.0 + rq.abs()));
        assert!(s.residuals[j] <= tol);
        for i in 0..s.len() {
            let g = dot(s.vector(i), &p.mass.matvec(v));
            assert!((g - if i == j { 1.0 } else { 0.0 }).abs() < 1e-8);
        }
    }
}

#[test]
fn identity_pencil() {
    let n = 60;
    let p = pair(CsrMatrix::identity(n), CsrMatrix::identity(n));
    let s = lowest_eigenpairs(&p, 4, 1e-8, DEFAULT_SEED).unwrap();
    assert_eq!(s.meta.method, "lobpcg");
    assert!(s.eigenvalues.iter().all(|v| (v - 1.0).abs() < 1e-12));
    check_pairs(&p, &s, 1e-8);
}

#[test]
fn interval_fiber_eigenvalue() {
    let fp = fiber_pencil(&FiberMesh::new(1, 200).unwrap()).unwrap();
    let p = pair(CsrMatrix::from_dense(&fp.stiffness), CsrMatrix::from_dense(&fp.mass));
    let s = lowest_eigenpairs(&p, 1, 1e-9, DEFAULT_SEED).unwrap();
    let exact = PI * PI / 4.0;
    assert!((s.eigenvalues[0] - exact).abs() < 1e-4 * exact);
    assert!((s.eigenvalues[0] - fp.lambda0_h).abs() < 1e-9);
    check_pairs(&p, &s, 1e-9);
}

#[test]
fn annulus_lobpcg_matches_dense() {
    let g = Geometry::new(GeometrySpec::circle(1.0)).unwrap();
    let grid = build_grid(&g, 64, 32).unwrap();
    let fp = fiber_pencil(&grid.fiber).unwrap();
    let eps = 0.2;
    let form = assemble_rescaled_form(&g, &grid, eps, 1.0, &fp).unwrap();
    let opts = LobpcgOptions { tol: 1e-9, precond_block: grid.n_fiber_interior, ..LobpcgOptions::default() };
    let it = lowest_eigenpairs_with(&form, 4, &opts).unwrap();
    let dense = dense_eigenpairs(&form, 4).unwrap();
    for (a, b) in it.eigenvalues.iter().zip(&dense.eigenvalues) {
        assert!((a - b).abs() < 1e-8, "{:?} vs {:?}", it.eigenvalues, dense.eigenvalues);
    }
    check_pairs(&form, &it, 1e-9);
    // Same tube, exact Dirichlet spectrum of the annulus.
    let exact = tube_spectrum_oracle(&g, eps, 4).unwrap().unwrap();
    for (a, b) in it.shifted(1.0).eigenvalues.iter().zip(&exact.primary) {
        assert!((a - b).abs() < 0.05, "{a} vs {b}");
    }
}

#[test]
fn same_seed_same_answer() {
    let p = random_pencil(120, 7);
    let a = lowest_eigenpairs(&p, 3, 1e-9, 11).unwrap();
    let b = lowest_eigenpairs(&p, 3, 1e-9, 11).unwrap();
    assert_eq!(a.eigenvalues, b.eigenvalues);
    assert_eq!(a.eigenvectors, b.eigenvectors);
}

#[test]
fn request_validation() {
    let p = random_pencil(50, 1);
    assert!(matches!(lowest_eigenpairs(&p, 0, 1e-8, 1), Err(Error::Validation(_))));
    assert!(matches!(lowest_eigenpairs(&p, 21, 1e-8, 1), Err(Error::Validation(_))));
    assert!(matches!(lowest_eigenpairs(&p, 2, 1e-12, 1), Err(Error::Validation(_))));
}

#[test]
fn iteration_cap_reports_non_convergence() {
    let p = random_pencil(400, 3);
    let opts = LobpcgOptions { tol: 1e-10, max_iter: 2, ..LobpcgOptions::default() };
    let err = lowest_eigenpairs_with(&p, 4, &opts).unwrap_err();
    assert!(matches!(err, Error::Convergence { .. }));
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn heat_semigroup() {
    let p = random_pencil(80, 5);
    let s = dense_eigenpairs(&p, 10).unwrap();
    let v = s.vector(2).to_vec();
    let h = heat_apply(&s, 0.7, &v, &p.mass).unwrap();
    let f = (-0.35 * s.eigenvalues[2]).exp();
    assert!(h.value.iter().zip(&v).all(|(a, b)| (a - f * b).abs() < 1e-12));

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let u: Vec<f64> = (0..80).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let both = heat_apply(&s, 1.5, &u, &p.mass).unwrap().value;
    let first = heat_apply(&s, 0.5, &u, &p.mass).unwrap().value;
    let twice = heat_apply(&s, 1.0, &first, &p.mass).unwrap().value;
    assert!(both.iter().zip(&twice).all(|(a, b)| (a - b).abs() < 1e-10));

    assert!(matches!(heat_apply(&s, 0.0, &u, &p.mass), Err(Error::Domain(_))));
    assert!(matches!(heat_apply(&s, -1.0, &u, &p.mass), Err(Error::Domain(_))));

    let mut w = u.clone();
    for j in 0..s.len() {
        let c = dot(s.vector(j), &p.mass.matvec(&u));
        for (x, y) in w.iter_mut().zip(s.vector(j)) {
            *x -= c * y;
        }
    }
    let h = heat_apply(&s, 1.0, &w, &p.mass).unwrap();
    assert!(h.value.iter().all(|x| x.abs() < 1e-12));
    assert!(h.truncation_bound > 0.0);
}

#[test]
fn dense_solver_on_a_diagonal_pencil() {
    let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 1.0, 2.0, 5.0]));
    let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 1.0, 2.0, 1.0]));
    let (vals, _) = tubelab::eigen::dense::generalized_lowest(&a, &m, 3).unwrap();
    assert_eq!(vals.len(), 3);
    for (v, e) in vals.iter().zip([1.0, 1.0, 3.0]) {
        assert!((v - e).abs() < 1e-14);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn lobpcg_agrees_with_dense(n in 60usize..160, k in 1usize..5, seed in any::<u64>()) {
        let p = random_pencil(n, seed);
        let it = lowest_eigenpairs(&p, k, 1e-9, seed).unwrap();
        let dense = dense_eigenpairs(&p, k).unwrap();
        for (a, b) in it.eigenvalues.iter().zip(&dense.eigenvalues) {
            prop_assert!((a - b).abs() < 1e-8 * (1.0 + b.abs()));
        }
        check_pairs(&p, &it, 1e-9);
    }
}
