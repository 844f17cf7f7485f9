use std::f64::consts::PI;

use proptest::prelude::*;
use tubelab::assembly::{fiber_pencil, FiberMesh};
use tubelab::ball::{ball_eigenvalue, fiber_project, ground_state, BallSpectrum, FiberQuadrature};
use tubelab::error::Error;
use tubelab::fermi::loglog_slope;

/// J₀ by its power series, adequate for |x| < 10.
fn j0_series(x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        term *= q / (k * k) as f64;
        sum += term;
    }
    sum
}

fn first_j0_zero() -> f64 {
    let (mut lo, mut hi) = (2.0, 3.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if j0_series(lo) * j0_series(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn interval_ground_eigenvalue() {
    assert!((ball_eigenvalue(1, 0).unwrap() - PI * PI / 4.0).abs() < 1e-10);
    for k in 0..5 {
        let expect = ((k + 1) as f64 * PI / 2.0).powi(2);
        assert!((ball_eigenvalue(1, k).unwrap() - expect).abs() < 1e-10 * expect);
    }
}

#[test]
fn disk_ground_eigenvalue() {
    let j = first_j0_zero();
    assert!((ball_eigenvalue(2, 0).unwrap() - j * j).abs() < 1e-9);
}

#[test]
fn eps_star_values() {
    let interval = BallSpectrum::new(1, 2).unwrap();
    assert!((interval.eps_star - 0.75f64.sqrt()).abs() < 1e-12);
    let disk = BallSpectrum::new(2, 2).unwrap();
    let j01: f64 = 2.404_825_557_695_773;
    let j11: f64 = 3.831_705_970_207_512;
    assert!((disk.eps_star - (1.0 - (j01 / j11).powi(2)).sqrt()).abs() < 1e-9);
}

#[test]
fn ground_state_values() {
    assert!((ground_state(1, 0.0).unwrap() - 1.0).abs() < 1e-15);
    assert!(ground_state(1, 1.0).unwrap().abs() < 1e-15);
    assert!(ground_state(2, 1.0).unwrap().abs() < 1e-12);
    assert!(matches!(ground_state(1, 1.5), Err(Error::Domain(_))));
    let (r, w) = tubelab::ball::gauss_legendre(40);
    let norm: f64 = r
        .iter()
        .zip(&w)
        .map(|(x, w)| {
            let rho = 0.5 * (x + 1.0);
            0.5 * w * 2.0 * PI * rho * ground_state(2, rho).unwrap().powi(2)
        })
        .sum();
    assert!((norm - 1.0).abs() < 1e-10);
}

#[test]
fn fiber_projection_examples() {
    let quad = FiberQuadrature::gauss(1, 32, 0.0).unwrap();
    let u0 = quad.sample(|w| ground_state(1, w[0].abs()).unwrap());
    assert!((fiber_project(&u0, &quad).unwrap().0 - 1.0).abs() < 1e-12);
    let odd = quad.sample(|w| (PI * w[0]).sin());
    assert!(fiber_project(&odd, &quad).unwrap().0.abs() < 1e-12);
    let one = quad.sample(|_| 1.0);
    assert!((fiber_project(&one, &quad).unwrap().0 - 4.0 / PI).abs() < 1e-12);
    assert!(matches!(fiber_project(&one[1..], &quad), Err(Error::Shape(_))));
}

#[test]
fn discrete_fiber_pencil_converges_quadratically() {
    for codim in [1, 2] {
        let exact = ball_eigenvalue(codim, 0).unwrap();
        let sizes: &[usize] = if codim == 1 { &[8, 16, 32, 64] } else { &[16, 24, 32, 48] };
        let errs: Vec<f64> = sizes
            .iter()
            .map(|&n| (fiber_pencil(&FiberMesh::new(codim, n).unwrap()).unwrap().lambda0_h - exact).abs())
            .collect();
        let h: Vec<f64> = sizes.iter().map(|&n| 1.0 / n as f64).collect();
        let slope = loglog_slope(&h, &errs);
        assert!(slope >= 1.9, "codim {codim}: slope {slope}, errors {errs:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn disk_projection_is_rotation_invariant(angle in 0.0..(2.0 * PI), k in 1u32..4, c in -2.0f64..2.0) {
        let f = move |w: &[f64]| {
            let r = (w[0] * w[0] + w[1] * w[1]).sqrt();
            c * (1.0 - r * r) + r.powi(k as i32) * (k as f64 * w[1].atan2(w[0])).cos()
        };
        let a = FiberQuadrature::gauss(2, 24, 0.0).unwrap();
        let b = FiberQuadrature::gauss(2, 24, angle).unwrap();
        let pa = fiber_project(&a.sample(f), &a).unwrap().0;
        let pb = fiber_project(&b.sample(f), &b).unwrap().0;
        prop_assert!((pa - pb).abs() < 1e-10 * (1.0 + pa.abs()));
    }
}
