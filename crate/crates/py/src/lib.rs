//! Python bindings. Exact quantities come back as `fractions.Fraction` in
//! seconds, bits and bits per second.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use tsnbound::bounds;
use tsnbound::network::{Class, NetworkSpec};
use tsnbound::rational::{Exact, Rational};
use tsnbound::sim::{self, Metric};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn frac(py: Python<'_>, v: &Rational) -> PyResult<PyObject> {
    let cls = py.import_bound("fractions")?.getattr("Fraction")?;
    Ok(cls.call1((Exact(v.clone()).to_string(),))?.unbind())
}

fn class(x: &str) -> PyResult<Class> {
    match x {
        "A" | "a" => Ok(Class::A),
        "B" | "b" => Ok(Class::B),
        _ => Err(PyValueError::new_err(format!("unknown class {x:?}"))),
    }
}

fn metric(m: &str) -> PyResult<Metric> {
    match m {
        "S" => Ok(Metric::S),
        "H" => Ok(Metric::H),
        "C" => Ok(Metric::C),
        "e2e" => Ok(Metric::E2e),
        _ => Err(PyValueError::new_err(format!("unknown metric {m:?}: use S, H, C or e2e"))),
    }
}

/// A validated network description.
#[pyclass(name = "Spec", module = "tsnbound")]
#[derive(Clone)]
struct PySpec {
    inner: NetworkSpec,
}

#[pymethods]
impl PySpec {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let loaded = NetworkSpec::from_json(text).map_err(err)?;
        Ok(PySpec { inner: loaded.spec })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Self::from_json(&std::fs::read_to_string(path).map_err(err)?)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }

    #[getter]
    fn flows(&self) -> Vec<String> {
        self.inner.flows.iter().map(|f| f.id.clone()).collect()
    }

    /// `(severity, code, message)` for every finding.
    fn validate(&self) -> Vec<(String, String, String)> {
        bounds::validate(&self.inner)
            .into_iter()
            .map(|d| (format!("{:?}", d.severity).to_lowercase(), d.code, d.message))
            .collect()
    }

    /// `(rate, latency)` of the CBS service curve of `cls` on `(i, j)`.
    fn service_curve(&self, py: Python<'_>, i: &str, j: &str, cls: &str) -> PyResult<(PyObject, PyObject)> {
        let rl = bounds::cbs_service_curve(&self.inner, i, j, class(cls)?).map_err(err)?;
        Ok((frac(py, &rl.rate)?, frac(py, &rl.latency)?))
    }

    fn cbfs_response_bound(&self, py: Python<'_>, flow: &str, i: &str, j: &str) -> PyResult<PyObject> {
        frac(py, &bounds::cbfs_response_bound(&self.inner, flow, i, j).map_err(err)?)
    }

    fn combined_bound(&self, py: Python<'_>, i: &str, j: &str, k: &str, cls: &str) -> PyResult<PyObject> {
        frac(py, &bounds::combined_bound(&self.inner, i, j, k, class(cls)?).map_err(err)?)
    }

    fn ir_response_bound(&self, py: Python<'_>, flow: &str, i: &str, j: &str, k: &str) -> PyResult<PyObject> {
        frac(py, &bounds::ir_response_bound(&self.inner, flow, i, j, k).map_err(err)?)
    }

    fn e2e_bound(&self, py: Python<'_>, flow: &str) -> PyResult<PyObject> {
        frac(py, &bounds::e2e_bound(&self.inner, flow).map_err(err)?)
    }

    fn additive_e2e(&self, py: Python<'_>, flow: &str) -> PyResult<PyObject> {
        frac(py, &bounds::additive_e2e(&self.inner, flow).map_err(err)?)
    }

    fn ir_backlog(&self, py: Python<'_>, i: &str, j: &str, k: &str, cls: &str) -> PyResult<PyObject> {
        frac(py, &bounds::ir_backlog(&self.inner, i, j, k, class(cls)?).map_err(err)?)
    }

    fn cbfs_backlog(&self, py: Python<'_>, i: &str, j: &str, cls: &str) -> PyResult<PyObject> {
        frac(py, &bounds::cbfs_backlog(&self.inner, i, j, class(cls)?).map_err(err)?)
    }

    fn report(&self) -> PyResult<Report> {
        Ok(Report { inner: bounds::full_report(&self.inner).map_err(err)? })
    }

    fn __repr__(&self) -> String {
        format!("Spec({} flows, {} links)", self.inner.flows.len(), self.inner.links.len())
    }
}

/// Every bound of a spec.
#[pyclass(module = "tsnbound")]
struct Report {
    inner: bounds::BoundsReport,
}

#[pymethods]
impl Report {
    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn table(&self) -> String {
        bounds::render_table(&self.inner)
    }

    fn csv(&self) -> String {
        bounds::render_csv(&self.inner)
    }

    fn e2e(&self, py: Python<'_>, flow: &str) -> PyResult<PyObject> {
        let f = self.inner.flow(flow).ok_or_else(|| PyValueError::new_err(format!("unknown flow {flow}")))?;
        frac(py, &f.e2e.0)
    }
}

/// Traffic to inject into a simulation.
#[pyclass(name = "Scenario", module = "tsnbound")]
#[derive(Clone)]
struct PyScenario {
    inner: sim::Scenario,
}

#[pymethods]
impl PyScenario {
    #[new]
    fn new() -> Self {
        PyScenario { inner: sim::Scenario::empty() }
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyScenario { inner: sim::Scenario::from_json(text).map_err(err)? })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    /// Worst case for `flow` at path hop `hop`.
    #[staticmethod]
    fn adversarial(spec: &PySpec, flow: &str, hop: usize) -> PyResult<Self> {
        let adv = sim::adversarial_scenario(&spec.inner, flow, hop).map_err(err)?;
        Ok(PyScenario { inner: adv.scenario })
    }

    /// Worst case for the end-to-end delay of `flow`.
    #[staticmethod]
    fn adversarial_path(spec: &PySpec, flow: &str) -> PyResult<Self> {
        let adv = sim::adversarial_path_scenario(&spec.inner, flow).map_err(err)?;
        Ok(PyScenario { inner: adv.scenario })
    }

    /// Seeded conforming traffic over about `span_ps` picoseconds.
    #[staticmethod]
    fn random(spec: &PySpec, seed: u64, span_ps: u64) -> Self {
        PyScenario { inner: sim::random::random_scenario(&spec.inner, seed, span_ps) }
    }

    #[getter]
    fn packet_count(&self) -> usize {
        self.inner.packets.len()
    }
}

/// Result of a simulation run.
#[pyclass(module = "tsnbound")]
struct Trace {
    inner: sim::SimTrace,
}

#[pymethods]
impl Trace {
    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn complete(&self) -> bool {
        self.inner.complete
    }

    #[getter]
    fn packet_count(&self) -> usize {
        self.inner.packets.len()
    }

    /// Largest backlog of the CBFS class queue on `(i, j)`, in bits.
    fn cbfs_backlog(&self, i: &str, j: &str, cls: &str) -> PyResult<u64> {
        let name = sim::cbfs_queue_name(&tsnbound::LinkId::new(i, j), class(cls)?);
        Ok(self.inner.max_backlog(&name).unwrap_or(0))
    }

    /// Largest backlog of the regulator at `j` for `(j, k)` fed by `(i, j)`.
    fn ir_backlog(&self, i: &str, j: &str, k: &str, cls: &str) -> PyResult<u64> {
        let name = sim::ir_queue_name(&tsnbound::LinkId::new(i, j), k, class(cls)?);
        Ok(self.inner.max_backlog(&name).unwrap_or(0))
    }

    /// Worst observed `metric` (S, H, C or e2e) of `flow` at path hop `hop`.
    fn worst(&self, py: Python<'_>, spec: &PySpec, flow: &str, hop: usize, metric_name: &str) -> PyResult<PyObject> {
        let v = sim::worst_observed(&spec.inner, &self.inner, flow, hop, metric(metric_name)?).map_err(err)?;
        frac(py, &v)
    }
}

#[pyfunction]
#[pyo3(signature = (spec, scenario, horizon_ps=None))]
fn simulate(spec: &PySpec, scenario: &PyScenario, horizon_ps: Option<u64>) -> PyResult<Trace> {
    scenario.inner.validate(&spec.inner).map_err(err)?;
    Ok(Trace { inner: sim::run(&spec.inner, &scenario.inner, horizon_ps).map_err(err)? })
}

/// Bounds next to observations.
#[pyclass(module = "tsnbound")]
struct Comparison {
    inner: sim::Comparison,
}

#[pymethods]
impl Comparison {
    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn table(&self) -> String {
        sim::render_comparison_table(&self.inner)
    }

    #[getter]
    fn violations(&self) -> Vec<String> {
        self.inner.violations.iter().map(|v| format!("{} {}", v.check, v.subject)).collect()
    }

    /// `(bound, observed)` of the row with this kind and subject.
    fn row(&self, py: Python<'_>, kind: &str, subject: &str) -> PyResult<(PyObject, PyObject)> {
        let r = self
            .inner
            .row(kind, subject)
            .ok_or_else(|| PyValueError::new_err(format!("no row {kind} {subject}")))?;
        Ok((frac(py, &r.bound.0)?, frac(py, &r.observed.0)?))
    }
}

#[pyfunction]
fn compare(spec: &PySpec, trace: &Trace) -> PyResult<Comparison> {
    let report = bounds::full_report(&spec.inner).map_err(err)?;
    Ok(Comparison { inner: sim::compare(&spec.inner, &trace.inner, &report).map_err(err)? })
}

#[pymodule]
#[pyo3(name = "tsnbound")]
fn tsnbound_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpec>()?;
    m.add_class::<Report>()?;
    m.add_class::<PyScenario>()?;
    m.add_class::<Trace>()?;
    m.add_class::<Comparison>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    Ok(())
}
