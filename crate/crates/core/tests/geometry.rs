use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::DMatrix;
use proptest::prelude::*;
use tubelab::fermi::{effective_potential, effective_potential_from, effective_potential_gauss};
use tubelab::geometry::{CurvatureData, Geometry, GeometrySpec};

fn oval() -> GeometrySpec {
    let n = 16;
    let kappa: Vec<f64> = (0..n).map(|i| 1.0 + 0.3 * (2.0 * TAU * i as f64 / n as f64).cos()).collect();
    GeometrySpec::plane_curve(TAU, &kappa)
}

fn catalog() -> Vec<GeometrySpec> {
    vec![
        GeometrySpec::circle(1.0),
        GeometrySpec::circle(2.5),
        oval(),
        GeometrySpec::flat_strip(5.0),
        GeometrySpec::space_curve(1.0, 0.3, 2),
        GeometrySpec::sphere(1.0),
        GeometrySpec::sphere(0.7),
        GeometrySpec::latitude(FRAC_PI_2),
        GeometrySpec::latitude(1.0),
    ]
}

fn point(g: &Geometry, s: f64) -> Vec<f64> {
    // Kept off the ends of each axis so sphere charts stay away from the poles.
    let s = 0.05 + 0.9 * s;
    g.param_axes().iter().map(|a| a.lo + s * (a.hi - a.lo)).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn orthogonal(n: usize, angles: &[f64]) -> DMatrix<f64> {
    match n {
        1 => DMatrix::from_element(1, 1, if angles[0] > 0.0 { 1.0 } else { -1.0 }),
        _ => {
            let (s, c) = angles[0].sin_cos();
            let flip = if angles[1] > 0.0 { 1.0 } else { -1.0 };
            DMatrix::from_row_slice(2, 2, &[c, -s * flip, s, c * flip])
        }
    }
}

#[test]
fn circle_curvature_from_embedding() {
    let g = Geometry::new(GeometrySpec::circle(2.0)).unwrap();
    let h = 1e-3;
    let s = 0.4;
    let p = |t: f64| g.embed(&[t], &[0.0]).unwrap();
    let (a, b, c) = (p(s - h), p(s), p(s + h));
    let acc: Vec<f64> = (0..2).map(|i| (a[i] - 2.0 * b[i] + c[i]) / (h * h)).collect();
    let kappa = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
    let cd = g.curvature_at(&[s]).unwrap();
    assert!((kappa - 0.5).abs() < 1e-6);
    assert!((cd.weingarten[0][(0, 0)].abs() - kappa).abs() < 1e-6);
    assert!((cd.tension_norm_sq - 0.25).abs() < 1e-12);
    assert_eq!(cd.scal_l, 0.0);
}

#[test]
fn sphere_shape_operator_from_normal_derivative() {
    let g = Geometry::new(GeometrySpec::sphere(1.0)).unwrap();
    let x = [1.1, 0.4];
    let cd = g.curvature_at(&x).unwrap();
    assert!((cd.trace_weingarten(0).abs() - 2.0).abs() < 1e-12);
    assert!((cd.scal_l - 2.0).abs() < 1e-12);
    assert!(cd.scal_m.abs() < 1e-12);
    // The point at normal distance w sits at radius 1 + w.
    let p = g.embed(&x, &[0.1]).unwrap();
    let r = p.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!((r - 1.1).abs() < 1e-12);
}

#[test]
fn equator_is_a_geodesic() {
    let g = Geometry::new(GeometrySpec::latitude(FRAC_PI_2)).unwrap();
    let cd = g.curvature_at(&[0.2]).unwrap();
    assert!(cd.tension_norm_sq < 1e-24);
    assert!((cd.scal_m - 2.0).abs() < 1e-12);
    assert!((cd.ric_bar - 1.0).abs() < 1e-12);
    assert!(cd.r_bar.abs() < 1e-12);
}

#[test]
fn catalog_data_is_structurally_valid() {
    for spec in catalog() {
        let g = Geometry::new(spec.clone()).unwrap();
        for s in [0.0, 0.13, 0.5, 0.77] {
            let cd = g.curvature_at(&point(&g, s)).unwrap();
            cd.validate().unwrap_or_else(|e| panic!("{spec:?}: {e}"));
        }
    }
}

#[test]
fn gauss_equation_on_catalog() {
    for spec in catalog() {
        let g = Geometry::new(spec.clone()).unwrap();
        for s in [0.1, 0.45, 0.9] {
            let cd = g.curvature_at(&point(&g, s)).unwrap();
            let lhs = cd.gauss_extrinsic();
            let rhs = cd.scal_l - cd.r_bar;
            assert!(rel(lhs, rhs) < 1e-10, "{spec:?}: {lhs} vs {rhs}");
            let a = effective_potential_from(&cd);
            let b = effective_potential_gauss(&cd);
            assert!(rel(a, b) < 1e-10, "{spec:?}: {a} vs {b}");
        }
    }
}

#[test]
fn effective_potential_is_orientation_independent() {
    for spec in catalog() {
        let g = Geometry::new(spec.clone()).unwrap();
        let f = g.flipped();
        for s in [0.2, 0.6] {
            let x = point(&g, s);
            let a = effective_potential(&g, &x).unwrap();
            let b = effective_potential(&f, &x).unwrap();
            assert!((a - b).abs() < 1e-12, "{spec:?}: {a} vs {b}");
        }
    }
}

#[test]
fn density_positive_up_to_eps_max() {
    for spec in catalog() {
        let g = Geometry::new(spec.clone()).unwrap();
        let e = g.eps_max();
        assert!(e > 0.0 && e <= 0.5);
        for s in [0.0, 0.3, 0.65] {
            let x = point(&g, s);
            let dirs: Vec<Vec<f64>> = if g.codim() == 1 {
                vec![vec![e], vec![-e]]
            } else {
                (0..8).map(|k| {
                    let a = TAU * k as f64 / 8.0;
                    vec![e * a.cos(), e * a.sin()]
                }).collect()
            };
            for w in dirs {
                let t = g.exact_tube_metric(&x, &w).unwrap();
                assert!(t.rho > 0.0, "{spec:?} at {x:?}, {w:?}");
            }
        }
    }
}

#[test]
fn planar_space_curve_has_flat_normal_connection() {
    let g = Geometry::new(GeometrySpec::space_curve(1.0, 0.0, 1)).unwrap();
    for s in [0.1, 1.7, 4.0] {
        let cd = g.curvature_at(&[s]).unwrap();
        assert!(cd.conn_coeff.iter().all(|c| c.abs() < 1e-12), "{:?}", cd.conn_coeff);
    }
    let g = Geometry::new(GeometrySpec::space_curve(1.0, 0.2, 2)).unwrap();
    let samples: Vec<Vec<f64>> = (0..16).map(|k| vec![TAU * k as f64 / 16.0]).collect();
    let field = g.frame_transport(&samples).unwrap();
    assert!(field.closure_defect < 1e-8);
    let rate = -field.holonomy_angle / TAU;
    for x in &samples {
        let cd = g.curvature_at(x).unwrap();
        assert!((cd.conn(0, 0, 1) - rate).abs() < 1e-10);
        assert!((cd.conn(0, 0, 1) + cd.conn(0, 1, 0)).abs() < 1e-10);
    }
    for (x, frame) in samples.iter().zip(&field.frames) {
        let h = 1e-5;
        let a = g.embed(&[x[0] - h], &[0.0, 0.0]).unwrap();
        let b = g.embed(&[x[0] + h], &[0.0, 0.0]).unwrap();
        let tangent: Vec<f64> = a.iter().zip(&b).map(|(p, q)| q - p).collect();
        let tn = tangent.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (i, n) in frame.iter().enumerate() {
            let dt: f64 = n.iter().zip(&tangent).map(|(p, q)| p * q).sum();
            assert!(dt.abs() / tn < 1e-8);
            for (j, m) in frame.iter().enumerate() {
                let d: f64 = n.iter().zip(m).map(|(p, q)| p * q).sum();
                assert!((d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn volumes() {
    let circle = Geometry::new(GeometrySpec::circle(1.5)).unwrap();
    assert!((circle.volume() - TAU * 1.5).abs() < 1e-10);
    let sphere = Geometry::new(GeometrySpec::sphere(1.0)).unwrap();
    assert!((sphere.volume() - 4.0 * PI).abs() < 1e-6);
}

fn check_covariance(cd: &CurvatureData, t: &DMatrix<f64>, o: &DMatrix<f64>) {
    let r = cd.reframe(t, o).unwrap();
    for (a, b) in [
        (cd.scal_l, r.scal_l),
        (cd.scal_m, r.scal_m),
        (cd.ric_bar, r.ric_bar),
        (cd.r_bar, r.r_bar),
        (cd.tension_norm_sq, r.tension_norm_sq),
        (effective_potential_from(cd), effective_potential_from(&r)),
    ] {
        assert!(rel(a, b) < 1e-10, "{a} vs {b}");
    }
    // The spectra of the A_α pencils, as an unordered set over rotated normals.
    let spectrum = |d: &CurvatureData| -> Vec<f64> {
        let mut s: Vec<f64> = d.weingarten.iter().map(|a| (a * a).trace()).collect();
        s.push(d.weingarten.iter().map(|a| a.trace().powi(2)).sum());
        s.sort_by(f64::total_cmp);
        s
    };
    let (sa, sb) = (spectrum(cd), spectrum(&r));
    assert!(rel(sa.iter().sum(), sb.iter().sum()) < 1e-10);
    r.validate().unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn contractions_are_frame_covariant(
        which in 0usize..9,
        s in 0.0f64..1.0,
        a1 in -3.0f64..3.0,
        a2 in -1.0f64..1.0,
        b1 in -3.0f64..3.0,
        b2 in -1.0f64..1.0,
    ) {
        let g = Geometry::new(catalog()[which].clone()).unwrap();
        let cd = g.curvature_at(&point(&g, s)).unwrap();
        let t = orthogonal(g.l(), &[a1, a2]);
        let o = orthogonal(g.codim(), &[b1, b2]);
        check_covariance(&cd, &t, &o);
    }

    #[test]
    fn zero_section_density_is_one(which in 0usize..9, s in 0.0f64..1.0) {
        let g = Geometry::new(catalog()[which].clone()).unwrap();
        let t = g.exact_tube_metric(&point(&g, s), &vec![0.0; g.codim()]).unwrap();
        prop_assert_eq!(t.rho, 1.0);
    }
}
