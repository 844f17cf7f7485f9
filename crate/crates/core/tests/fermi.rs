use std::f64::consts::FRAC_PI_2;

use tubelab::assembly::build_grid;
use tubelab::fermi::{
    effective_potential, jet_remainder_slope, log_rho_gradient, metric_jet, potential_field, potential_w, JetQuantity,
};
use tubelab::geometry::{Geometry, GeometrySpec};

#[test]
fn closed_form_effective_potentials() {
    for r in [0.5, 1.0, 3.0] {
        let g = Geometry::new(GeometrySpec::circle(r)).unwrap();
        assert!((effective_potential(&g, &[0.4]).unwrap() + 0.25 / (r * r)).abs() < 1e-10);
        let g = Geometry::new(GeometrySpec::sphere(r)).unwrap();
        assert!(effective_potential(&g, &[0.9, 2.0]).unwrap().abs() < 1e-10);
    }
    let g = Geometry::new(GeometrySpec::latitude(FRAC_PI_2)).unwrap();
    assert!((effective_potential(&g, &[1.0]).unwrap() + 0.5).abs() < 1e-10);
    let g = Geometry::new(GeometrySpec::flat_strip(4.0)).unwrap();
    assert_eq!(effective_potential(&g, &[1.0]).unwrap(), 0.0);
}

#[test]
fn latitude_potential_matches_general_formula() {
    // Scal_L = 0, |τ|² = cot²θ₀, Scal_M + Ric̄ + R̄ = 2 + 1 + 0.
    for th in [0.7, 1.0, 2.2] {
        let g = Geometry::new(GeometrySpec::latitude(th)).unwrap();
        let want = -0.25 / th.tan().powi(2) - 0.5;
        assert!((effective_potential(&g, &[0.3]).unwrap() - want).abs() < 1e-10);
    }
}

#[test]
fn finite_difference_potential_on_the_zero_section() {
    for (spec, want) in [
        (GeometrySpec::circle(1.0), -0.25),
        (GeometrySpec::sphere(1.0), 0.0),
        (GeometrySpec::latitude(FRAC_PI_2), -0.5),
    ] {
        let g = Geometry::new(spec).unwrap();
        let x = vec![0.8; g.l()];
        let w = potential_w(&g, &x, &vec![0.0; g.codim()]).unwrap();
        assert!((w - want).abs() < 1e-6, "{w} vs {want}");
    }
    let g = Geometry::new(GeometrySpec::space_curve(1.0, 0.3, 1)).unwrap();
    for s in [0.3, 2.0] {
        let w = potential_w(&g, &[s], &[0.0, 0.0]).unwrap();
        let wl = effective_potential(&g, &[s]).unwrap();
        assert!((w - wl).abs() < 1e-6, "{w} vs {wl}");
    }
}

#[test]
fn circle_potential_off_the_section() {
    // log ρ = log(1 − wκ) gives W = −κ²/(4ρ²) in the normal direction.
    let g = Geometry::new(GeometrySpec::circle(1.0)).unwrap();
    let cd = g.curvature_at(&[0.0]).unwrap();
    let kappa = cd.weingarten[0][(0, 0)];
    for w in [-0.3, 0.1, 0.35] {
        let rho = 1.0 - w * kappa;
        let want = -kappa * kappa / (4.0 * rho * rho);
        assert!((potential_w(&g, &[0.0], &[w]).unwrap() - want).abs() < 1e-6);
    }
}

#[test]
fn log_density_gradient_is_minus_tension() {
    for spec in [
        GeometrySpec::circle(1.3),
        GeometrySpec::sphere(0.9),
        GeometrySpec::latitude(1.0),
        GeometrySpec::space_curve(1.0, 0.3, 2),
    ] {
        let g = Geometry::new(spec.clone()).unwrap();
        let x = vec![0.6; g.l()];
        let cd = g.curvature_at(&x).unwrap();
        let grad = log_rho_gradient(&g, &x, &vec![0.0; g.codim()]).unwrap();
        for a in 0..g.codim() {
            let got = grad[g.l() + a];
            assert!((got + cd.trace_weingarten(a)).abs() < 1e-6, "{spec:?}: {got}");
        }
        for i in 0..g.l() {
            assert!(grad[i].abs() < 1e-6);
        }
    }
}

#[test]
fn jet_examples() {
    let g = Geometry::new(GeometrySpec::circle(2.0)).unwrap();
    let jet = metric_jet(&g, &[0.1]).unwrap();
    let cd = g.curvature_at(&[0.1]).unwrap();
    let kappa = cd.weingarten[0][(0, 0)];
    for w in [-0.4, 0.2] {
        let exact = (1.0 - w * kappa).powi(2);
        assert!((jet.a_at(&[w])[(0, 0)] - exact).abs() < 1e-14);
    }
    let g = Geometry::new(GeometrySpec::latitude(1.0)).unwrap();
    let jet = metric_jet(&g, &[0.1]).unwrap();
    assert_eq!(jet.b_at(&[0.3])[(0, 0)], 1.0);
}

#[test]
fn jet_remainders() {
    for spec in [GeometrySpec::circle(1.0), GeometrySpec::sphere(1.0)] {
        let g = Geometry::new(spec).unwrap();
        let x = vec![0.5; g.l()];
        let fit = jet_remainder_slope(&g, &x, JetQuantity::Metric).unwrap();
        assert!(fit.is_exact(), "{fit:?}");
    }
    for spec in [GeometrySpec::latitude(1.0), GeometrySpec::space_curve(1.0, 0.3, 2), GeometrySpec::circle(1.0)] {
        let g = Geometry::new(spec.clone()).unwrap();
        for q in [JetQuantity::Metric, JetQuantity::LogRho] {
            let fit = jet_remainder_slope(&g, &[0.4], q).unwrap();
            assert!(fit.slope >= 2.7, "{spec:?} {q:?}: {fit:?}");
        }
    }
}

#[test]
fn density_jet_matches_block_determinant() {
    for spec in [GeometrySpec::latitude(1.0), GeometrySpec::space_curve(1.0, 0.3, 2), GeometrySpec::sphere(1.0)] {
        let g = Geometry::new(spec).unwrap();
        let jet = metric_jet(&g, &vec![0.7; g.l()]).unwrap();
        let (first, second) = jet.logrho_from_blocks();
        for a in 0..g.codim() {
            assert!((first[a] - jet.logrho1[a]).abs() < 1e-10);
            for b in 0..g.codim() {
                assert!((second[a][b] - jet.logrho2[a][b]).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn potential_field_floor() {
    let g = Geometry::new(GeometrySpec::circle(1.0)).unwrap();
    let grid = build_grid(&g, 16, 8).unwrap();
    let field = potential_field(&g, &grid).unwrap();
    assert_eq!(field.points.len(), 16);
    assert!(field.wl.iter().all(|w| (w + 0.25).abs() < 1e-10));
    assert!((field.alpha_floor - (field.lambda0 + 0.25)).abs() < 1e-10);
    let w = field.w_full(&[0.0], &[0.0], 0.1).unwrap();
    assert!((w + 0.25).abs() < 1e-6);
}
