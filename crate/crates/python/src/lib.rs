//! Python bindings: the model type plus the main solver entry points.
//!
//! Build with `cargo build --release -p multibethe-python`; the cdylib at
//! `target/release/libmultibethe_py.so` imports as `multibethe_py` once
//! renamed onto the Python path (see python/smoke_test.py).

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use multibethe::cavity::{self, CavityVector};
use multibethe::error::Error;
use multibethe::exact::{tree_recursion_oracle, TreeVariant};
use multibethe::graphgen;
use multibethe::mcmc::{estimate_observables, McmcConfig};
use multibethe::model::{class_edge_set, validate_spec};
use multibethe::observables::ObservableReport;
use multibethe::spectral;

fn to_py_err(err: Error) -> PyErr {
    match err {
        Error::InvalidInput(_) | Error::Structural(_) | Error::Infeasible { .. } => {
            PyValueError::new_err(err.to_string())
        }
        _ => PyRuntimeError::new_err(err.to_string()),
    }
}

/// serde_json -> Python objects, so reports come back as plain dicts/lists.
fn json_to_py(py: Python<'_>, value: &serde_json::Value) -> PyResult<PyObject> {
    Ok(match value {
        serde_json::Value::Null => py.None(),
        serde_json::Value::Bool(b) => b.into_py(py),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_py(py)
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_py(py)
            }
        }
        serde_json::Value::String(s) => s.into_py(py),
        serde_json::Value::Array(items) => {
            let list = PyList::empty_bound(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_py(py)
        }
        serde_json::Value::Object(map) => {
            let dict = PyDict::new_bound(py);
            for (k, v) in map {
                dict.set_item(k, json_to_py(py, v)?)?;
            }
            dict.into_py(py)
        }
    })
}

fn json_str_to_py(py: Python<'_>, text: &str) -> PyResult<PyObject> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    json_to_py(py, &value)
}

fn parse_boundary(text: &str, dim: usize) -> PyResult<CavityVector> {
    match text {
        "zero" => Ok(CavityVector::zeros(dim)),
        "plus" => Ok(CavityVector::homogeneous(dim, f64::INFINITY)),
        "minus" => Ok(CavityVector::homogeneous(dim, f64::NEG_INFINITY)),
        other => Err(PyValueError::new_err(format!(
            "boundary must be zero/plus/minus, got {other:?}"
        ))),
    }
}

/// A multispecies Ising model instance (classes, degrees, ratios, couplings,
/// fields).
#[pyclass(name = "ModelSpec")]
struct PyModelSpec {
    inner: multibethe::ModelSpec,
}

#[pymethods]
impl PyModelSpec {
    /// Parses the JSON document format used by the CLI.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: multibethe::ModelSpec::from_json(text).map_err(to_py_err)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn spec_hash(&self) -> String {
        self.inner.hash()
    }

    /// Feasibility report as a dict (conditions i/ii/irreducibility, the
    /// smallest feasible N, and structural flags).
    fn validate(&self, py: Python<'_>) -> PyResult<PyObject> {
        let report = validate_spec(&self.inner);
        let text =
            serde_json::to_string(&report).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        json_str_to_py(py, &text)
    }

    fn feasible_sizes(&self, n_max: u64) -> Vec<u64> {
        multibethe::model::feasible_sizes(&self.inner, n_max)
    }

    /// Directed class pairs of the edge set, 1-based.
    fn class_edges(&self) -> Vec<(usize, usize)> {
        class_edge_set(&self.inner)
            .edges()
            .iter()
            .map(|&(a, b)| (a + 1, b + 1))
            .collect()
    }

    fn is_simply_cyclic(&self) -> bool {
        multibethe::model::is_simply_cyclic(&self.inner)
    }

    /// Weighted (or unweighted) non-backtracking matrix as nested lists.
    #[pyo3(signature = (weighted = true))]
    fn nonbacktracking_matrix(&self, weighted: bool) -> Vec<Vec<f64>> {
        let m = if weighted {
            spectral::build_m(&self.inner)
        } else {
            spectral::build_mbar(&self.inner)
        };
        (0..m.dim())
            .map(|i| (0..m.dim()).map(|j| m.matrix[(i, j)]).collect())
            .collect()
    }

    fn spectral_radius(&self) -> PyResult<f64> {
        spectral::build_m(&self.inner)
            .spectral_radius(1e-12)
            .map_err(to_py_err)
    }

    fn critical_beta(&self) -> PyResult<f64> {
        spectral::critical_beta(&self.inner).map_err(to_py_err)
    }

    fn critical_beta_bounds(&self) -> (f64, f64) {
        spectral::critical_beta_bounds(&self.inner)
    }

    /// Runs the cavity recursion from the chosen boundary and returns the
    /// fixed point together with its observables.
    #[pyo3(signature = (boundary = "zero", tol = 1e-12, max_iter = 1_000_000))]
    fn solve(
        &self,
        py: Python<'_>,
        boundary: &str,
        tol: f64,
        max_iter: usize,
    ) -> PyResult<PyObject> {
        let edges = class_edge_set(&self.inner);
        let h_star = parse_boundary(boundary, edges.len())?;
        let fp = cavity::iterate(&self.inner, &h_star, tol, max_iter).map_err(to_py_err)?;
        let observables = ObservableReport::compute(&self.inner, &fp.z).map_err(to_py_err)?;
        let dict = PyDict::new_bound(py);
        dict.set_item("fixed_point", json_str_to_py(py, &fp.to_json(&edges))?)?;
        dict.set_item("observables", json_str_to_py(py, &observables.to_json())?)?;
        Ok(dict.into_py(py))
    }

    /// Samples a k-regular realization; returns (classes, edges) with
    /// 0-based vertices and 1-based class labels.
    fn generate_graph(&self, n: u64, seed: u64) -> PyResult<(Vec<usize>, Vec<(u32, u32)>)> {
        let graph = graphgen::generate(&self.inner, n, seed).map_err(to_py_err)?;
        let classes = graph.classes().iter().map(|&c| c + 1).collect();
        Ok((classes, graph.edges()))
    }

    /// Compares the depth-t recursion against exact enumeration on the
    /// explicit tree (free boundary when pinned=False, plus boundary when
    /// True). Returns (recursion_value, exact_value, gap).
    #[pyo3(signature = (root_class, depth, pinned = false))]
    fn tree_oracle(
        &self,
        root_class: usize,
        depth: usize,
        pinned: bool,
    ) -> PyResult<(f64, f64, f64)> {
        if root_class == 0 || root_class > self.inner.n() {
            return Err(PyValueError::new_err("root_class is 1-based"));
        }
        let dim = class_edge_set(&self.inner).len();
        let h_star = if pinned {
            CavityVector::homogeneous(dim, f64::INFINITY)
        } else {
            CavityVector::zeros(dim)
        };
        let record = tree_recursion_oracle(
            &self.inner,
            root_class - 1,
            depth,
            TreeVariant::Full,
            &h_star,
        )
        .map_err(to_py_err)?;
        Ok((record.recursion_value, record.exact_value, record.gap))
    }

    /// Glauber-dynamics estimates on a fresh graph realization. Returns a
    /// dict with per-class magnetization and per-pair edge correlation
    /// (mean, std_error).
    #[pyo3(signature = (n, seed, sweeps = 1000, burn_in = 200, replicas = 2))]
    fn mcmc_estimate(
        &self,
        py: Python<'_>,
        n: u64,
        seed: u64,
        sweeps: u32,
        burn_in: u32,
        replicas: u32,
    ) -> PyResult<PyObject> {
        let graph = graphgen::generate(&self.inner, n, seed).map_err(to_py_err)?;
        let config = McmcConfig::new(sweeps, burn_in, replicas, seed).map_err(to_py_err)?;
        let obs = estimate_observables(&graph, &self.inner, &config).map_err(to_py_err)?;
        let dict = PyDict::new_bound(py);
        let mags: Vec<(f64, f64)> = obs
            .magnetization
            .iter()
            .map(|e| (e.mean, e.std_error))
            .collect();
        dict.set_item("magnetization", mags)?;
        let corr: Vec<((usize, usize), (f64, f64))> = obs
            .edge_correlation
            .iter()
            .map(|p| ((p.a + 1, p.b + 1), (p.estimate.mean, p.estimate.std_error)))
            .collect();
        dict.set_item("edge_correlation", corr)?;
        Ok(dict.into_py(py))
    }

    fn __repr__(&self) -> String {
        format!("ModelSpec(n={})", self.inner.n())
    }
}

/// F_beta(x) = atanh(tanh(beta) tanh(x)), the message update kernel.
#[pyfunction]
fn f_beta(beta: f64, x: f64) -> PyResult<f64> {
    cavity::f_beta(beta, x).map_err(to_py_err)
}

#[pymodule]
fn multibethe_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModelSpec>()?;
    m.add_function(wrap_pyfunction!(f_beta, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
