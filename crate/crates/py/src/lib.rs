//! Python bindings: geometry queries, fiber and tube spectra, and the lab studies.
//! Study reports are returned as JSON strings.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use tubelab::assembly::assemble_rescaled_form;
use tubelab::ball::{ball_eigenvalue as ball_eig, BallSpectrum};
use tubelab::cli::FileConfig;
use tubelab::eigen::SpectrumResult;
use tubelab::fermi::effective_potential;
use tubelab::geometry::{Geometry, GeometryKind, GeometrySpec};
use tubelab::lab::{self, output, Discretization, StudyConfig, StudyContext};
use tubelab::Error;

fn py_err(e: Error) -> PyErr {
    match e.exit_code() {
        2 => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_json(value: &impl serde::Serialize) -> PyResult<String> {
    serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pyclass(name = "Geometry", frozen)]
struct PyGeometry {
    inner: Geometry,
}

#[pymethods]
impl PyGeometry {
    #[new]
    fn new(kind: &str, params: Vec<f64>) -> PyResult<Self> {
        let kind: GeometryKind = kind.parse().map_err(py_err)?;
        let inner = Geometry::new(GeometrySpec { kind, params }).map_err(py_err)?;
        Ok(PyGeometry { inner })
    }

    #[getter]
    fn kind(&self) -> String {
        format!("{:?}", self.inner.kind())
    }

    #[getter]
    fn params(&self) -> Vec<f64> {
        self.inner.spec().params.clone()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.l()
    }

    #[getter]
    fn codim(&self) -> usize {
        self.inner.codim()
    }

    #[getter]
    fn eps_max(&self) -> f64 {
        self.inner.eps_max()
    }

    #[getter]
    fn volume(&self) -> f64 {
        self.inner.volume()
    }

    fn effective_potential(&self, x: Vec<f64>) -> PyResult<f64> {
        effective_potential(&self.inner, &x).map_err(py_err)
    }

    /// (scal_l, scal_m, ric_bar, r_bar, tension_norm_sq) at x.
    fn curvature_scalars(&self, x: Vec<f64>) -> PyResult<(f64, f64, f64, f64, f64)> {
        let cd = self.inner.curvature_at(&x).map_err(py_err)?;
        Ok((cd.scal_l, cd.scal_m, cd.ric_bar, cd.r_bar, cd.tension_norm_sq))
    }

    fn embed(&self, x: Vec<f64>, w: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.embed(&x, &w).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("Geometry({:?}, {:?})", self.inner.kind(), self.inner.spec().params)
    }
}

#[pyclass(name = "Spectrum", frozen, get_all)]
struct PySpectrum {
    eigenvalues: Vec<f64>,
    residuals: Vec<f64>,
    iterations: usize,
    method: String,
    /// α subtracted from the pencil eigenvalues.
    shift: f64,
}

impl From<SpectrumResult> for PySpectrum {
    fn from(s: SpectrumResult) -> Self {
        PySpectrum {
            eigenvalues: s.eigenvalues,
            residuals: s.residuals,
            iterations: s.iterations,
            method: s.meta.method.to_string(),
            shift: s.meta.shift,
        }
    }
}

#[pymethods]
impl PySpectrum {
    fn __len__(&self) -> usize {
        self.eigenvalues.len()
    }

    fn __repr__(&self) -> String {
        format!("Spectrum({:?}, method={})", self.eigenvalues, self.method)
    }
}

#[pyfunction]
fn ball_eigenvalue(codim: usize, k: usize) -> PyResult<f64> {
    ball_eig(codim, k).map_err(py_err)
}

#[pyfunction]
fn eps_star(codim: usize) -> PyResult<f64> {
    Ok(BallSpectrum::new(codim, 2).map_err(py_err)?.eps_star)
}

/// Lowest eigenvalues of Δ(ε) on the unit tube, α already subtracted.
#[pyfunction]
#[pyo3(signature = (geometry, epsilon, k = 4, n_x = 64, n_fiber = 16, seed = None, tol = 1e-8))]
fn tube_spectrum(
    py: Python<'_>,
    geometry: &PyGeometry,
    epsilon: f64,
    k: usize,
    n_x: usize,
    n_fiber: usize,
    seed: Option<u64>,
    tol: f64,
) -> PyResult<PySpectrum> {
    let geom = geometry.inner.clone();
    py.detach(move || {
        let mut cfg = StudyConfig::new(geom.spec().clone());
        cfg.k = k;
        cfg.tol = tol;
        if let Some(s) = seed {
            cfg.seed = s;
        }
        let disc = Discretization::new(&geom, n_x, n_fiber)?;
        let ctx = StudyContext::new(&geom, &disc, &cfg)?;
        let form = assemble_rescaled_form(&geom, &disc.grid, epsilon, ctx.alpha, &disc.pencil)?;
        Ok(disc.solve(&form, k, &cfg)?.shifted(ctx.alpha).into())
    })
    .map_err(py_err)
}

/// Lowest eigenvalues of Δ_L + W_L on the base mesh.
#[pyfunction]
#[pyo3(signature = (geometry, k = 4, n_x = 64))]
fn limit_spectrum(py: Python<'_>, geometry: &PyGeometry, k: usize, n_x: usize) -> PyResult<PySpectrum> {
    let geom = geometry.inner.clone();
    py.detach(move || {
        let cfg = StudyConfig::new(geom.spec().clone());
        let disc = Discretization::new(&geom, n_x, 8)?;
        Ok(disc.limit_spectrum(&geom, k, &cfg)?.into())
    })
    .map_err(py_err)
}

/// Closed-form limit spectrum where one is known.
#[pyfunction]
fn exact_limit_spectrum(geometry: &PyGeometry, k: usize) -> Option<Vec<f64>> {
    lab::oracle::limit_spectrum_exact(&geometry.inner, k)
}

fn study_config(config: &str) -> Result<StudyConfig, Error> {
    FileConfig::parse(config).map(|f| f.study_config())
}

/// Eigenvalue convergence study from TOML text; returns (report JSON, table CSV).
#[pyfunction]
fn convergence_study(py: Python<'_>, config: &str) -> PyResult<(String, String)> {
    let report = py
        .detach(|| study_config(config).and_then(|cfg| lab::eigenvalue_convergence_study(&cfg)))
        .map_err(py_err)?;
    let table = output::csv_string(&report).map_err(py_err)?;
    Ok((to_json(&report)?, table))
}

#[pyfunction]
fn kato_check(py: Python<'_>, config: &str) -> PyResult<String> {
    let report = py.detach(|| study_config(config).and_then(|cfg| lab::kato_check(&cfg))).map_err(py_err)?;
    to_json(&report)
}

#[pyfunction]
fn asymptotics_check(py: Python<'_>, geometry: &PyGeometry, epsilons: Vec<f64>) -> PyResult<String> {
    let geom = geometry.inner.clone();
    let report = py.detach(move || lab::asymptotics_check(&geom, &epsilons)).map_err(py_err)?;
    to_json(&report)
}

#[pymodule]
#[pyo3(name = "tubelab")]
fn tubelab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGeometry>()?;
    m.add_class::<PySpectrum>()?;
    m.add_function(wrap_pyfunction!(ball_eigenvalue, m)?)?;
    m.add_function(wrap_pyfunction!(eps_star, m)?)?;
    m.add_function(wrap_pyfunction!(tube_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(limit_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(exact_limit_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(convergence_study, m)?)?;
    m.add_function(wrap_pyfunction!(kato_check, m)?)?;
    m.add_function(wrap_pyfunction!(asymptotics_check, m)?)?;
    Ok(())
}
