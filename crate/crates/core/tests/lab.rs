use std::f64::consts::FRAC_PI_2;

use tubelab::cli::config::FileConfig;
use tubelab::error::Error;
use tubelab::geometry::{Geometry, GeometryKind, GeometrySpec};
use tubelab::lab::oracle::{fourier_limit_spectrum, limit_oracle, limit_spectrum_exact, tube_spectrum_oracle};
use tubelab::lab::output::{csv_string, CSV_HEADER};
use tubelab::lab::{
    asymptotics_check, coercivity_check, eigenvalue_convergence_study, kato_check, semigroup_convergence_study,
    AlphaSetting, Datum, GridPolicy, StudyConfig, ORACLE_TOL,
};

fn small(spec: GeometrySpec) -> StudyConfig {
    let mut cfg = StudyConfig::new(spec);
    cfg.grid = GridPolicy { n_x: 32, n_fiber: 8, refine: false };
    cfg.epsilons = vec![0.2, 0.1, 0.05];
    cfg.samples = 12;
    cfg
}

#[test]
fn config_validation() {
    let g = Geometry::new(GeometrySpec::circle(1.0)).unwrap();
    let base = StudyConfig::new(GeometrySpec::circle(1.0));
    assert!(base.validate(&g).is_ok());
    let bad: Vec<Box<dyn Fn(&mut StudyConfig)>> = vec![
        Box::new(|c| c.epsilons.clear()),
        Box::new(|c| c.epsilons = vec![0.1, 0.2]),
        Box::new(|c| c.epsilons = vec![0.1, 0.1]),
        Box::new(|c| c.epsilons = vec![5.0, 0.1]),
        Box::new(|c| c.epsilons = vec![0.1, -0.1]),
        Box::new(|c| c.k = 0),
        Box::new(|c| c.k = 21),
        Box::new(|c| c.tol = 1e-11),
        Box::new(|c| c.samples = 0),
        Box::new(|c| c.times = vec![1.0, 0.0]),
        Box::new(|c| c.alpha = AlphaSetting::Named("big".into())),
        Box::new(|c| c.alpha = AlphaSetting::Fixed(f64::NAN)),
    ];
    for (i, f) in bad.iter().enumerate() {
        let mut c = base.clone();
        f(&mut c);
        assert!(matches!(c.validate(&g), Err(Error::Validation(_))), "case {i}");
    }
}

#[test]
fn grid_policy() {
    let p = GridPolicy::default_for(GeometryKind::CircleInPlane);
    assert_eq!((p.n_x, p.n_fiber), (64, 16));
    assert_eq!(p.refined(), (96, 24));
    assert_eq!(GridPolicy::default_for(GeometryKind::SphereInR3).refined(), (48, 24));
}

#[test]
fn shipped_config_parses() {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/circle.toml")).unwrap();
    let cfg = FileConfig::parse(&text).unwrap().study_config();
    assert_eq!(cfg.geometry.kind, GeometryKind::CircleInPlane);
    assert_eq!(cfg.epsilons, vec![0.2, 0.141, 0.1, 0.071, 0.05]);
    assert_eq!(cfg.seed, 24301);
    assert!(cfg.validate(&Geometry::new(cfg.geometry.clone()).unwrap()).is_ok());
}

#[test]
fn config_errors() {
    let unknown = "[geometry]\nkind = \"CircleInPlane\"\nparams = [1.0]\n[study]\nepsilon_ladder = [0.1]\n";
    assert!(matches!(FileConfig::parse(unknown), Err(Error::Config(_))));
    let missing = "[study]\nk = 2\n";
    let err = FileConfig::parse(missing).unwrap_err();
    assert!(err.to_string().contains("[geometry]"));
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn csv_is_deterministic() {
    let cfg = small(GeometrySpec::circle(1.0));
    let a = csv_string(&eigenvalue_convergence_study(&cfg).unwrap()).unwrap();
    let b = csv_string(&eigenvalue_convergence_study(&cfg).unwrap()).unwrap();
    assert_eq!(a, b);
    let mut lines = a.lines();
    assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
    assert_eq!(lines.count(), 3 * 4);
}

#[test]
fn small_circle_study_contract() {
    let report = eigenvalue_convergence_study(&small(GeometrySpec::circle(1.0))).unwrap();
    assert!(report.contract.passed, "{:?}", report.contract);
    for s in report.slopes.iter().flatten() {
        assert!(*s > 1.5, "{:?}", report.slopes);
    }
    assert!(report.tube_oracles.iter().all(|o| o.max_gap <= ORACLE_TOL));
}

#[test]
fn tube_oracles_agree() {
    for spec in [GeometrySpec::circle(1.0), GeometrySpec::circle(2.0), GeometrySpec::sphere(1.0)] {
        let g = Geometry::new(spec).unwrap();
        for eps in [0.2, 0.05] {
            let o = tube_spectrum_oracle(&g, eps, 6).unwrap().unwrap();
            assert!(o.max_gap <= ORACLE_TOL, "{o:?}");
            assert!(o.primary.windows(2).all(|w| w[0] <= w[1]));
        }
    }
    let curve = Geometry::new(GeometrySpec::space_curve(1.0, 0.3, 2)).unwrap();
    assert!(tube_spectrum_oracle(&curve, 0.1, 4).unwrap().is_none());
}

#[test]
fn limit_oracles_agree() {
    for spec in [
        GeometrySpec::circle(1.0),
        GeometrySpec::circle(1.7),
        GeometrySpec::latitude(FRAC_PI_2),
        GeometrySpec::latitude(1.0),
        GeometrySpec::flat_strip(5.0),
        GeometrySpec::sphere(1.0),
    ] {
        let g = Geometry::new(spec).unwrap();
        let o = limit_oracle(&g, 4).unwrap().unwrap();
        assert!(o.max_gap <= ORACLE_TOL, "{o:?}");
    }
    let lat = Geometry::new(GeometrySpec::latitude(1.0)).unwrap();
    let (s, c) = 1.0f64.sin_cos();
    let exact = limit_spectrum_exact(&lat, 3).unwrap();
    assert!((exact[0] - (-0.25 * (c / s).powi(2) - 0.5)).abs() < 1e-14);
    assert!((exact[1] - (1.0 / (s * s) - 0.25 * (c / s).powi(2) - 0.5)).abs() < 1e-14);
}

#[test]
fn fourier_limit_on_a_general_curve_matches_elements() {
    let kappa: Vec<f64> = (0..16).map(|i| 1.0 + 0.3 * (2.0 * std::f64::consts::TAU * i as f64 / 16.0).cos()).collect();
    let g = Geometry::new(GeometrySpec::plane_curve(std::f64::consts::TAU, &kappa)).unwrap();
    assert!(limit_spectrum_exact(&g, 3).is_none());
    let fourier = fourier_limit_spectrum(&g, 3, 24).unwrap();
    let form = tubelab::assembly::assemble_limit_form(&g, 256, 0.0).unwrap();
    let fe = tubelab::eigen::dense_eigenpairs(&form, 3).unwrap().eigenvalues;
    for (a, b) in fourier.iter().zip(&fe) {
        assert!((a - b).abs() < 2e-3, "{fourier:?} vs {fe:?}");
    }
}

#[test]
fn inequality_checks_on_a_small_grid() {
    let cfg = small(GeometrySpec::circle(1.0));
    let kato = kato_check(&cfg).unwrap();
    assert!(kato.contract.passed, "{:?}", kato.contract);
    assert!(kato.k_fit.is_finite() && kato.k_fit > 0.0);
    let coerc = coercivity_check(&cfg, Some(kato.k_fit)).unwrap();
    assert!(coerc.contract.passed, "{:?}", coerc.contract);
    assert!(coerc.rows.iter().all(|r| r.margin >= 0.0 && r.reference_margin >= 0.0));
}

#[test]
fn semigroup_on_a_small_grid() {
    let cfg = small(GeometrySpec::circle(1.0));
    let r = semigroup_convergence_study(&cfg, &[0.5, 1.0], Datum::GroundFiber).unwrap();
    assert!(r.contract.passed, "{:?}", r.contract);
    assert!(r.sup_err.windows(2).all(|w| w[1].1 < w[0].1));
    assert!(matches!(semigroup_convergence_study(&cfg, &[0.0], Datum::Generic), Err(Error::Domain(_))));
}

#[test]
fn flat_strip_asymptotics_vanish() {
    let g = Geometry::new(GeometrySpec::flat_strip(5.0)).unwrap();
    let r = asymptotics_check(&g, &[0.2, 0.1, 0.05]).unwrap();
    assert_eq!(r.identically_zero, [true; 4]);
    assert!(r.contract.passed);
    assert!(matches!(asymptotics_check(&g, &[0.1]), Err(Error::Validation(_))));
}
