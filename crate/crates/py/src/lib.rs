//! Python bindings: instances, solutions, both solvers, validation, MIP
//! export, gap formulas and energy conversion.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use tcvrp_core::exact::{solve_exact_with, ExactConfig};
use tcvrp_core::its::{best_of_runs, ItsConfig};
use tcvrp_core::metrics::{self, EnergyParams};
use tcvrp_core::model::{self, build_mip};

fn err(e: tcvrp_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "Instance", module = "tcvrp_py", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct Instance {
    pub inner: tcvrp_core::TcvrpInstance,
}

#[pymethods]
impl Instance {
    /// Node 0 is the depot; `demand` and `service_min` include it with zeros.
    #[new]
    #[pyo3(signature = (demand, service_min, time_min, dist_mi, capacity, max_time_min, max_dist_mi=None))]
    fn new(
        demand: Vec<u32>,
        service_min: Vec<f64>,
        time_min: Vec<Vec<f64>>,
        dist_mi: Vec<Vec<f64>>,
        capacity: u32,
        max_time_min: f64,
        max_dist_mi: Option<f64>,
    ) -> PyResult<Self> {
        tcvrp_core::TcvrpInstance::new(demand, service_min, time_min, dist_mi, capacity, max_time_min, max_dist_mi)
            .map(|inner| Self { inner })
            .map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        tcvrp_core::TcvrpInstance::from_json_str(text)
            .map(|inner| Self { inner })
            .map_err(err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        tcvrp_core::TcvrpInstance::load(path)
            .map(|inner| Self { inner })
            .map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json_string().map_err(err)
    }

    #[pyo3(signature = (capacity, max_time_min, max_dist_mi=None))]
    fn with_limits(&self, capacity: u32, max_time_min: f64, max_dist_mi: Option<f64>) -> PyResult<Self> {
        self.inner
            .with_limits(capacity, max_time_min, max_dist_mi)
            .map(|inner| Self { inner })
            .map_err(err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn capacity(&self) -> u32 {
        self.inner.capacity()
    }

    #[getter]
    fn max_time_min(&self) -> f64 {
        self.inner.max_time()
    }

    #[getter]
    fn max_dist_mi(&self) -> Option<f64> {
        self.inner.max_dist()
    }

    #[getter]
    fn demand(&self) -> Vec<u32> {
        self.inner.demands().to_vec()
    }

    fn __repr__(&self) -> String {
        format!(
            "Instance(n={}, Q={}, Tbar_min={}, Dbar_mi={:?})",
            self.inner.n(),
            self.inner.capacity(),
            self.inner.max_time(),
            self.inner.max_dist()
        )
    }
}

#[pyclass(name = "Solution", module = "tcvrp_py", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct Solution {
    pub inner: tcvrp_core::Solution,
}

#[pymethods]
impl Solution {
    /// Routes as `[0, .., 0]` node lists; totals are recomputed.
    #[staticmethod]
    fn from_routes(inst: &Instance, routes: Vec<Vec<usize>>) -> PyResult<Self> {
        tcvrp_core::Solution::from_routes(&inst.inner, routes)
            .map(|inner| Self { inner })
            .map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        tcvrp_core::Solution::from_json_str(text)
            .map(|inner| Self { inner })
            .map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json_string().map_err(err)
    }

    #[getter]
    fn routes(&self) -> Vec<Vec<usize>> {
        self.inner.routes.clone()
    }

    #[getter]
    fn vehicles(&self) -> usize {
        self.inner.k
    }

    #[getter]
    fn vmt_mi(&self) -> f64 {
        self.inner.vmt_mi
    }

    #[getter]
    fn vht_min(&self) -> f64 {
        self.inner.vht_min
    }

    fn __repr__(&self) -> String {
        format!("Solution(vehicles={}, vmt_mi={:.4})", self.inner.k, self.inner.vmt_mi)
    }
}

#[pyclass(name = "ExactResult", module = "tcvrp_py", frozen)]
pub struct ExactResult {
    #[pyo3(get)]
    status: String,
    #[pyo3(get)]
    lower: f64,
    #[pyo3(get)]
    upper: Option<f64>,
    #[pyo3(get)]
    gap: Option<f64>,
    #[pyo3(get)]
    nodes: u64,
    #[pyo3(get)]
    elapsed_s: f64,
    #[pyo3(get)]
    solution: Option<Py<Solution>>,
}

#[pyfunction]
#[pyo3(signature = (inst, seed=0, time_budget_s=60.0, runs=1))]
fn solve_its(py: Python<'_>, inst: &Instance, seed: u64, time_budget_s: f64, runs: usize) -> PyResult<Solution> {
    let cfg = ItsConfig {
        seed,
        time_budget_s,
        ..Default::default()
    };
    let inner = &inst.inner;
    py.detach(|| best_of_runs(inner, &cfg, runs))
        .map(|r| Solution { inner: r.solution })
        .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (inst, time_limit_s=300.0, seed=0))]
fn solve_exact(py: Python<'_>, inst: &Instance, time_limit_s: f64, seed: u64) -> PyResult<ExactResult> {
    let cfg = ExactConfig {
        time_limit_s,
        seed,
        ..Default::default()
    };
    let inner = &inst.inner;
    let r = py.detach(|| solve_exact_with(inner, &cfg)).map_err(err)?;
    let gap = r.gap();
    Ok(ExactResult {
        status: r.status.to_string(),
        lower: r.lower,
        upper: r.upper,
        gap,
        nodes: r.nodes,
        elapsed_s: r.elapsed_s,
        solution: r
            .solution
            .map(|s| Py::new(py, Solution { inner: s }))
            .transpose()?,
    })
}

/// Returns `(feasible, [violation detail, ...])`.
#[pyfunction]
fn validate(inst: &Instance, sol: &Solution) -> PyResult<(bool, Vec<String>)> {
    let r = model::validate(&inst.inner, &sol.inner).map_err(err)?;
    Ok((r.feasible, r.violations.into_iter().map(|v| v.detail).collect()))
}

/// Variable and per-family constraint counts of the arc-flow MIP.
#[pyfunction]
fn mip_counts<'py>(py: Python<'py>, inst: &Instance) -> PyResult<Bound<'py, PyDict>> {
    let c = build_mip(&inst.inner).map_err(err)?.counts();
    let d = PyDict::new(py);
    d.set_item("variables", c.variables)?;
    d.set_item("constraints", c.constraints)?;
    d.set_item("routing", c.routing)?;
    d.set_item("capacity", c.capacity)?;
    d.set_item("time", c.time)?;
    d.set_item("distance", c.distance)?;
    Ok(d)
}

#[pyfunction]
fn mps_text(inst: &Instance) -> PyResult<String> {
    Ok(model::write_mps(&build_mip(&inst.inner).map_err(err)?))
}

#[pyfunction]
fn export_mps(inst: &Instance, path: &str) -> PyResult<()> {
    model::export_mps(&build_mip(&inst.inner).map_err(err)?, path).map_err(err)
}

/// Percent gap between lower bound ι and incumbent υ.
#[pyfunction]
fn mip_gap(lower: f64, upper: f64) -> PyResult<f64> {
    metrics::mip_gap(lower, upper).map_err(err)
}

/// Percent gap of best-found ω relative to ι.
#[pyfunction]
fn its_gap(best: f64, lower: f64) -> PyResult<f64> {
    metrics::its_gap(best, lower).map_err(err)
}

/// `(bev_kwh, cv_kwh)` for a VMT under the default energy constants.
#[pyfunction]
fn energy(vmt_mi: f64) -> (f64, f64) {
    metrics::energy(vmt_mi, &EnergyParams::default())
}

#[pymodule]
fn tcvrp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Instance>()?;
    m.add_class::<Solution>()?;
    m.add_class::<ExactResult>()?;
    m.add_function(wrap_pyfunction!(solve_its, m)?)?;
    m.add_function(wrap_pyfunction!(solve_exact, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(mip_counts, m)?)?;
    m.add_function(wrap_pyfunction!(mps_text, m)?)?;
    m.add_function(wrap_pyfunction!(export_mps, m)?)?;
    m.add_function(wrap_pyfunction!(mip_gap, m)?)?;
    m.add_function(wrap_pyfunction!(its_gap, m)?)?;
    m.add_function(wrap_pyfunction!(energy, m)?)?;
    Ok(())
}
