//! Python bindings. Structured inputs (bodies, distributions, families,
//! experiment configs) are accepted as dicts or JSON strings using the same
//! schema as the command-line tool; structured results come back as dicts.

use std::sync::Arc;

use mdev_core::confidence::{self, IntervalMethod};
use mdev_core::efficiency::{self, ExperimentConfig};
use mdev_core::exit::{self, ExitOptions, Method, DEFAULT_REGIME_GUARD};
use mdev_core::geometry::{self, BodySpec};
use mdev_core::models::{self, FamilySpec};
use mdev_core::numerics::RngStream;
use mdev_core::tilting::{self, DistSpec};
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyString;
use serde::de::DeserializeOwned;
use serde::Serialize;

create_exception!(mdev, NoSolutionError, PyValueError, "The requested tilt or estimate does not exist.");
create_exception!(mdev, ConvergenceError, PyRuntimeError, "An iterative routine did not converge.");

fn to_py_err(e: mdev_core::Error) -> PyErr {
    match e {
        mdev_core::Error::NoSolution(_) => NoSolutionError::new_err(e.to_string()),
        mdev_core::Error::NonConvergence { .. } | mdev_core::Error::Quadrature(_) => {
            ConvergenceError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Deserializes a dict (via `json.dumps`) or a JSON string.
fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = if obj.is_instance_of::<PyString>() {
        obj.extract()?
    } else {
        obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?
    };
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn family_from_py(obj: &Bound<'_, PyAny>) -> PyResult<FamilySpec> {
    if let Ok(name) = obj.extract::<String>() {
        if !name.trim_start().starts_with('{') {
            return serde_json::from_value(serde_json::json!({ "family": name }))
                .map_err(|_| PyValueError::new_err(format!("unknown family `{name}`")));
        }
    }
    from_py(obj)
}

fn parse_method(name: &str) -> PyResult<Method> {
    serde_json::from_value(serde_json::Value::String(name.to_string()))
        .map_err(|_| PyValueError::new_err(format!("unknown method `{name}`")))
}

#[pyfunction]
fn md_quantile(alpha: f64) -> PyResult<f64> {
    confidence::md_quantile(alpha).map_err(to_py_err)
}

#[pyfunction]
fn normal_quantile(alpha: f64) -> PyResult<f64> {
    confidence::normal_two_sided_quantile(alpha).map_err(to_py_err)
}

#[pyfunction]
fn sample_size_ratio(alpha: f64) -> PyResult<f64> {
    confidence::sample_size_ratio(alpha).map_err(to_py_err)
}

/// Half-width of the `method` interval ("md" or "normal").
#[pyfunction]
#[pyo3(signature = (sigma, n, alpha, method = "md"))]
fn half_width(sigma: f64, n: u64, alpha: f64, method: &str) -> PyResult<f64> {
    let m: IntervalMethod = method.parse().map_err(to_py_err)?;
    confidence::half_width(m, sigma, n, alpha).map_err(to_py_err)
}

/// A convex body: ball, axis-aligned ellipsoid.
#[pyclass(module = "mdev", frozen)]
struct ConvexBody {
    inner: geometry::ConvexBody,
}

#[pymethods]
impl ConvexBody {
    #[new]
    fn new(spec: &Bound<'_, PyAny>) -> PyResult<Self> {
        let spec: BodySpec = from_py(spec)?;
        Ok(ConvexBody {
            inner: geometry::ConvexBody::from_spec(&spec).map_err(to_py_err)?,
        })
    }

    #[staticmethod]
    fn ball(dim: usize, r: f64) -> PyResult<Self> {
        Ok(ConvexBody {
            inner: geometry::ConvexBody::ball(dim, r).map_err(to_py_err)?,
        })
    }

    #[staticmethod]
    fn ellipsoid(sigma: Vec<f64>, r: f64) -> PyResult<Self> {
        Ok(ConvexBody {
            inner: geometry::ConvexBody::ellipsoid(sigma, r).map_err(to_py_err)?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn contains(&self, x: Vec<f64>) -> PyResult<bool> {
        self.inner.contains(&x).map_err(to_py_err)
    }

    /// Nearest boundary points (the dominating set) as a dict.
    fn nearest_boundary<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &geometry::nearest_boundary(&self.inner).map_err(to_py_err)?)
    }

    fn check_assumptions<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &geometry::validate_b_assumptions(&self.inner))
    }

    /// `P(ζ ∉ tΩ)` for a standard Gaussian `ζ`.
    #[pyo3(signature = (t, method = "exact", samples = 1_000_000, seed = 0, regime_guard = DEFAULT_REGIME_GUARD))]
    fn exit_probability<'py>(
        &self,
        py: Python<'py>,
        t: f64,
        method: &str,
        samples: usize,
        seed: u64,
        regime_guard: f64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let opts = ExitOptions {
            n_samples: samples,
            seed,
            regime_guard,
        };
        let method = parse_method(method)?;
        let est = py
            .detach(|| exit::exit_probability(&self.inner, t, method, &opts))
            .map_err(to_py_err)?;
        to_py(py, &est)
    }

    fn __repr__(&self) -> String {
        match self.inner.to_spec() {
            Some(spec) => format!("ConvexBody({})", serde_json::to_string(&spec).unwrap_or_default()),
            None => "ConvexBody(<generic>)".into(),
        }
    }
}

/// A distribution that supports exponential tilting (centered at construction).
#[pyclass(module = "mdev", frozen)]
struct TiltableDistribution {
    inner: tilting::TiltableDistribution,
}

#[pymethods]
impl TiltableDistribution {
    #[new]
    fn new(spec: &Bound<'_, PyAny>) -> PyResult<Self> {
        let spec: DistSpec = from_py(spec)?;
        Ok(TiltableDistribution {
            inner: tilting::TiltableDistribution::from_spec(&spec).map_err(to_py_err)?,
        })
    }

    #[staticmethod]
    fn standard_gaussian(dim: usize) -> Self {
        TiltableDistribution {
            inner: tilting::TiltableDistribution::standard_gaussian(dim),
        }
    }

    #[staticmethod]
    fn discrete(points: Vec<Vec<f64>>, probs: Vec<f64>) -> PyResult<Self> {
        Ok(TiltableDistribution {
            inner: tilting::TiltableDistribution::discrete(points, probs).map_err(to_py_err)?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn center(&self) -> Vec<f64> {
        self.inner.center().to_vec()
    }

    fn ln_mgf(&self, h: Vec<f64>) -> PyResult<f64> {
        self.inner.ln_mgf(&h).map_err(to_py_err)
    }

    fn tilted_mean(&self, h: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.tilted_mean(&h).map_err(to_py_err)
    }

    fn tilted_cov(&self, h: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        Ok(self.inner.tilted_cov(&h).map_err(to_py_err)?.rows())
    }

    /// Solves `m(h) = v`; returns a dict with `h`, `phi`, `rate`, `lambda`, ….
    fn solve_tilt<'py>(&self, py: Python<'py>, v: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
        let sol = self.inner.solve_tilt(&v).map_err(to_py_err)?;
        let out = serde_json::json!({
            "v": sol.v,
            "h": sol.h,
            "phi": sol.phi,
            "ln_phi": sol.ln_phi,
            "rate": sol.rate,
            "lambda": sol.lambda(),
            "iterations": sol.iterations,
            "tilted_cov": sol.tilted_cov.rows(),
        });
        to_py(py, &out)
    }

    /// `n` draws from the tilted law with their log likelihood ratios.
    #[pyo3(signature = (h, n, seed = 0))]
    fn sample_tilted(&self, py: Python<'_>, h: Vec<f64>, n: usize, seed: u64) -> PyResult<(Vec<Vec<f64>>, Vec<f64>)> {
        let ws = py
            .detach(|| self.inner.sample_tilted(&h, n, &RngStream::new(seed, 0)))
            .map_err(to_py_err)?;
        let points = (0..n).map(|i| ws.point(i).to_vec()).collect();
        Ok((points, ws.log_weights))
    }
}

/// A built-in parametric family, by name or spec dict.
#[pyclass(module = "mdev", frozen)]
struct Family {
    spec: FamilySpec,
    inner: Arc<dyn models::Family>,
}

#[pymethods]
impl Family {
    #[new]
    fn new(spec: &Bound<'_, PyAny>) -> PyResult<Self> {
        let spec = family_from_py(spec)?;
        let inner = spec.build().map_err(to_py_err)?;
        Ok(Family { spec, inner })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    #[getter]
    fn param_dim(&self) -> usize {
        self.inner.param_dim()
    }

    fn log_density(&self, theta: Vec<f64>, x: Vec<f64>) -> PyResult<f64> {
        if theta.len() != self.inner.param_dim() || x.len() != self.inner.obs_dim() {
            return Err(PyValueError::new_err("theta or x has the wrong dimension"));
        }
        Ok(self.inner.log_density(&x, &theta))
    }

    fn fisher(&self, theta: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        Ok(self.inner.fisher(&theta).map_err(to_py_err)?.rows())
    }

    fn hellinger_sq(&self, theta1: Vec<f64>, theta2: Vec<f64>) -> PyResult<f64> {
        self.inner.hellinger_sq(&theta1, &theta2).map_err(to_py_err)
    }

    /// Maximum-likelihood estimate from a list of observations.
    fn mle(&self, samples: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        let flat: Vec<f64> = samples.concat();
        Ok(self.inner.mle(&flat).map_err(to_py_err)?.theta)
    }

    /// Local regularity report around `theta0`.
    #[pyo3(signature = (theta0, grid = None, seed = 0))]
    fn check_a2<'py>(
        &self,
        py: Python<'py>,
        theta0: Vec<f64>,
        grid: Option<Vec<Vec<f64>>>,
        seed: u64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let grid = grid.unwrap_or_else(|| models::default_u_grid(self.inner.as_ref(), &theta0));
        let rep = py
            .detach(|| models::check_a2(self.inner.as_ref(), &theta0, &grid, &RngStream::new(seed, 0)))
            .map_err(to_py_err)?;
        to_py(py, &rep)
    }

    /// Simulated coverage of the `method` interval at `theta`.
    #[pyo3(signature = (theta, n, alpha, method = "md", trials = 100_000, seed = 0))]
    #[allow(clippy::too_many_arguments)]
    fn coverage<'py>(
        &self,
        py: Python<'py>,
        theta: f64,
        n: u64,
        alpha: f64,
        method: &str,
        trials: u64,
        seed: u64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let m: IntervalMethod = method.parse().map_err(to_py_err)?;
        let res = py
            .detach(|| confidence::coverage_sim(self.inner.as_ref(), theta, n, alpha, m, trials, &RngStream::new(seed, 0)))
            .map_err(to_py_err)?;
        to_py(py, &res)
    }

    fn __repr__(&self) -> String {
        format!("Family({})", serde_json::to_string(&self.spec).unwrap_or_default())
    }
}

/// Runs an efficiency experiment; `config` uses the experiment-config schema.
#[pyfunction]
#[pyo3(signature = (config, seed = None))]
fn efficiency_sweep<'py>(py: Python<'py>, config: &Bound<'py, PyAny>, seed: Option<u64>) -> PyResult<Bound<'py, PyAny>> {
    let mut cfg: ExperimentConfig = from_py(config)?;
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    let rep = py.detach(|| efficiency::efficiency_sweep(&cfg)).map_err(to_py_err)?;
    to_py(py, &rep)
}

/// Stable digest of a configuration (hex sha256 of its canonical JSON).
#[pyfunction]
fn config_hash(config: &Bound<'_, PyAny>) -> PyResult<String> {
    let cfg: ExperimentConfig = from_py(config)?;
    efficiency::canonical_hash(&cfg).map_err(to_py_err)
}

#[pymodule]
fn mdev(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("NoSolutionError", m.py().get_type::<NoSolutionError>())?;
    m.add("ConvergenceError", m.py().get_type::<ConvergenceError>())?;
    m.add_function(wrap_pyfunction!(md_quantile, m)?)?;
    m.add_function(wrap_pyfunction!(normal_quantile, m)?)?;
    m.add_function(wrap_pyfunction!(sample_size_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(half_width, m)?)?;
    m.add_function(wrap_pyfunction!(efficiency_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(config_hash, m)?)?;
    m.add_class::<ConvexBody>()?;
    m.add_class::<TiltableDistribution>()?;
    m.add_class::<Family>()?;
    Ok(())
}
