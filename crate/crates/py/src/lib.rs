//! Python bindings for the decision engine, scenario generator, threshold
//! sweep and protocol codec.

use std::num::NonZeroU64;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use bridge_core::engine::{
    self, classify_action, decide_activation, DecisionConfig, TaskName, Threshold,
    DEFAULT_REFRACTORY_SECONDS,
};
use bridge_core::protocol::{self, Inbound, Method, RpcRequest};
use bridge_core::simulator::{self, Scenario};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn threshold(value: i64) -> PyResult<Threshold> {
    Threshold::new(value).map_err(value_error)
}

/// Ten most recent labels, oldest first, pre-filled with neutral.
#[pyclass(name = "EvidenceWindow")]
struct PyEvidenceWindow {
    inner: engine::EvidenceWindow,
    target: TaskName,
}

#[pymethods]
impl PyEvidenceWindow {
    #[new]
    #[pyo3(signature = (target = "push"))]
    fn new(target: &str) -> PyResult<Self> {
        Ok(Self {
            inner: engine::EvidenceWindow::new(),
            target: TaskName::new(target).map_err(value_error)?,
        })
    }

    /// Pushes a classifier action; anything but the target counts as neutral.
    fn push(&mut self, action: &str) {
        self.inner.push(classify_action(&self.target, action));
    }

    /// `(n_positive, n_negative)`.
    fn counts(&self) -> (u8, u8) {
        let c = self.inner.counts();
        (c.n_positive, c.n_negative)
    }

    fn mask(&self) -> Vec<bool> {
        self.inner.mask().to_vec()
    }

    fn decide(&self, threshold_value: i64) -> PyResult<bool> {
        let config = DecisionConfig::new(threshold(threshold_value)?, self.target.clone());
        Ok(decide_activation(&self.inner, &config))
    }
}

/// Decision for a window given as ten booleans (True = target task).
#[pyfunction]
fn decide(mask: Vec<bool>, threshold_value: i64) -> PyResult<bool> {
    if mask.len() != engine::WINDOW_CAPACITY {
        return Err(value_error(format!("mask must have {} entries", engine::WINDOW_CAPACITY)));
    }
    let mut window = PyEvidenceWindow::new("push")?;
    for positive in mask {
        window.push(if positive { "push" } else { "neutral" });
    }
    window.decide(threshold_value)
}

/// Edge-triggered activation emitter with a refractory period.
#[pyclass(name = "Emitter")]
struct PyEmitter(engine::Emitter);

#[pymethods]
impl PyEmitter {
    #[new]
    #[pyo3(signature = (refractory_seconds = DEFAULT_REFRACTORY_SECONDS))]
    fn new(refractory_seconds: f64) -> PyResult<Self> {
        engine::Emitter::new(refractory_seconds).map(Self).map_err(value_error)
    }

    /// Returns the activation time when this step emits, else None.
    fn step(&mut self, decision: bool, now: f64) -> PyResult<Option<f64>> {
        let ev = self.0.step(decision, now).map_err(value_error)?;
        Ok(ev.map(|e| e.time))
    }

    #[getter]
    fn active(&self) -> bool {
        self.0.is_active()
    }
}

fn scenario(json: &str) -> PyResult<Scenario> {
    Scenario::from_json(json).map_err(value_error)
}

/// `[(time, action, power), ...]` for a scenario given as JSON.
#[pyfunction]
fn generate_stream(scenario_json: &str) -> PyResult<Vec<(f64, String, f64)>> {
    let s = scenario(scenario_json)?;
    Ok(simulator::generate_stream(&s)
        .iter()
        .map(|x| (x.time(), x.label().action().to_string(), x.power()))
        .collect())
}

/// Dispatch times for one threshold over the scenario's generated stream.
#[pyfunction]
#[pyo3(signature = (scenario_json, threshold_value, refractory_seconds = DEFAULT_REFRACTORY_SECONDS))]
fn run_engine(scenario_json: &str, threshold_value: i64, refractory_seconds: f64) -> PyResult<Vec<f64>> {
    let s = scenario(scenario_json)?;
    let samples = simulator::generate_stream(&s);
    let log = simulator::run_engine(&s, &samples, threshold(threshold_value)?, refractory_seconds)
        .map_err(value_error)?;
    Ok(log.iter().map(|r| r.time).collect())
}

/// Metrics CSV for thresholds 1..=10.
#[pyfunction]
#[pyo3(signature = (scenario_json, refractory_seconds = DEFAULT_REFRACTORY_SECONDS))]
fn sweep(scenario_json: &str, refractory_seconds: f64) -> PyResult<String> {
    let s = scenario(scenario_json)?;
    let reports = simulator::sweep_thresholds_with(&s, refractory_seconds).map_err(value_error)?;
    Ok(simulator::metrics_csv(&reports))
}

#[pyfunction]
#[pyo3(signature = (id, method, params_json = "{}"))]
fn encode_request(id: u64, method: &str, params_json: &str) -> PyResult<String> {
    let id = NonZeroU64::new(id).ok_or_else(|| value_error("id must be positive"))?;
    let method = Method::parse(method).ok_or_else(|| value_error(format!("unknown method {method:?}")))?;
    let params: serde_json::Value = serde_json::from_str(params_json).map_err(value_error)?;
    if !params.is_object() {
        return Err(value_error("params must be a JSON object"));
    }
    Ok(protocol::encode_request(&RpcRequest::with_params(id, method, params)))
}

/// Classifies a server frame into a dict with a `kind` key of
/// `"stream"`, `"response"` or `"warning"`. Raises ValueError otherwise.
#[pyfunction]
fn decode_message<'py>(py: Python<'py>, frame: &[u8]) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    match protocol::decode_message(frame).map_err(value_error)? {
        Inbound::Stream(ev) => {
            d.set_item("kind", "stream")?;
            d.set_item("sid", ev.sid)?;
            d.set_item("time", ev.time)?;
            d.set_item("action", ev.action)?;
            d.set_item("power", ev.power)?;
        }
        Inbound::Response(resp) => {
            d.set_item("kind", "response")?;
            d.set_item("id", resp.id)?;
            match resp.outcome {
                Ok(v) => d.set_item("result", v.to_string())?,
                Err(e) => {
                    d.set_item("error_code", e.code)?;
                    d.set_item("error_message", e.message)?;
                }
            }
        }
        Inbound::Warning(w) => {
            d.set_item("kind", "warning")?;
            d.set_item("code", w.code)?;
            d.set_item("message", w.message)?;
        }
    }
    Ok(d)
}

#[pymodule]
fn bridge_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEvidenceWindow>()?;
    m.add_class::<PyEmitter>()?;
    m.add_function(wrap_pyfunction!(decide, m)?)?;
    m.add_function(wrap_pyfunction!(generate_stream, m)?)?;
    m.add_function(wrap_pyfunction!(run_engine, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(encode_request, m)?)?;
    m.add_function(wrap_pyfunction!(decode_message, m)?)?;
    m.add("WINDOW_CAPACITY", engine::WINDOW_CAPACITY)?;
    Ok(())
}
