//! Python bindings for the `aerocmd` toolkit.
//!
//! Structured results (poses, GPS reports, translation candidates, reports)
//! come back as plain dicts and lists.

use aerocmd::corpus::{self, Corpus, DatasetExample};
use aerocmd::dsl::{self, ImageType};
use aerocmd::eval;
use aerocmd::nl::{self, TranslateError, TranslatorConfig};
use aerocmd::sim::{self, SimConfig, Submitted};
use aerocmd::wire::{self, query_json};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyKeyError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};
use serde_json::{json, Value};
use std::time::Duration;

create_exception!(aerocmd, DslParseError, PyValueError);
create_exception!(aerocmd, ValidationError, PyValueError);
create_exception!(aerocmd, NoConfidentCandidate, PyException);
create_exception!(aerocmd, WireError, PyException);

fn to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (v.to_string(),))
}

fn from_py(obj: &Bound<'_, PyAny>) -> PyResult<Value> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn ser<T: serde::Serialize + ?Sized>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn parse_err(e: dsl::ParseError) -> PyErr {
    DslParseError::new_err(e.to_string())
}

fn parse(text: &str) -> PyResult<dsl::Program> {
    dsl::parse_program(text).map_err(parse_err)
}

fn sim_config(config: Option<&Bound<'_, PyAny>>, auto_takeoff: Option<bool>) -> PyResult<SimConfig> {
    let mut cfg: SimConfig = match config {
        Some(obj) => serde_json::from_value(from_py(obj)?).map_err(|e| PyValueError::new_err(e.to_string()))?,
        None => SimConfig::default(),
    };
    if let Some(flag) = auto_takeoff {
        cfg.motion.auto_takeoff = flag;
    }
    Ok(cfg)
}

/// A parsed command program.
#[pyclass(name = "Program", module = "aerocmd", frozen)]
struct PyProgram {
    inner: dsl::Program,
}

#[pymethods]
impl PyProgram {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        Ok(Self { inner: parse(text)? })
    }

    fn render(&self) -> String {
        dsl::render_program(&self.inner)
    }

    /// Statements as dicts tagged with `op`.
    fn statements<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &serde_json::to_value(&self.inner).expect("serializable"))
    }

    fn is_skill(&self) -> bool {
        self.inner.is_skill()
    }

    fn ast_equiv(&self, other: &PyProgram) -> bool {
        dsl::ast_equiv(&self.inner, &other.inner)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __eq__(&self, other: &PyProgram) -> bool {
        self.inner == other.inner
    }

    fn __str__(&self) -> String {
        self.render()
    }

    fn __repr__(&self) -> String {
        format!("Program({:?})", self.render())
    }
}

/// Parse program text.
#[pyfunction]
fn parse_program(text: &str) -> PyResult<PyProgram> {
    PyProgram::new(text)
}

/// Canonical rendering of program text.
#[pyfunction]
fn render(text: &str) -> PyResult<String> {
    Ok(dsl::render_program(&parse(text)?))
}

#[pyfunction]
fn ast_equiv(a: &str, b: &str) -> PyResult<bool> {
    Ok(dsl::ast_equiv(&parse(a)?, &parse(b)?))
}

/// Check a program against the safety envelope from a grounded start.
/// Returns the violations as strings; empty means the program is accepted.
#[pyfunction]
#[pyo3(signature = (text, config=None, auto_takeoff=None))]
fn validate(text: &str, config: Option<&Bound<'_, PyAny>>, auto_takeoff: Option<bool>) -> PyResult<Vec<String>> {
    let cfg = sim_config(config, auto_takeoff)?;
    let program = parse(text)?;
    let start = sim::Pose::grounded_origin();
    Ok(match dsl::validate_with_model(&program, &cfg.envelope, start, &cfg.motion) {
        Ok(_) => Vec::new(),
        Err(v) => v.iter().map(ToString::to_string).collect(),
    })
}

#[pyfunction]
fn normalize_and_slot<'py>(py: Python<'py>, utterance: &str) -> PyResult<(Vec<String>, Bound<'py, PyAny>)> {
    let (tokens, slots) = nl::normalize_and_slot(utterance);
    let slots = Value::Array(slots.iter().map(ser).collect());
    Ok((tokens, to_py(py, &slots)?))
}

/// A retrieval corpus of (pattern, program) entries.
#[pyclass(name = "Corpus", module = "aerocmd", frozen)]
struct PyCorpus {
    inner: Corpus,
}

#[pymethods]
impl PyCorpus {
    /// The corpus bundled with the library.
    #[staticmethod]
    fn shipped() -> Self {
        Self {
            inner: corpus::shipped_corpus(),
        }
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        corpus::load_corpus(path)
            .map(|inner| Self { inner })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Corpus::from_json(text)
            .map(|inner| Self { inner })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn ids(&self) -> Vec<String> {
        self.inner.entries().iter().map(|e| e.id.clone()).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Utterance to program translation.
#[pyclass(name = "Translator", module = "aerocmd", frozen)]
struct PyTranslator {
    inner: nl::Translator,
}

#[pymethods]
impl PyTranslator {
    #[new]
    #[pyo3(signature = (corpus=None, top_k=nl::DEFAULT_TOP_K, min_score=nl::DEFAULT_MIN_SCORE))]
    fn new(corpus: Option<&PyCorpus>, top_k: usize, min_score: f64) -> PyResult<Self> {
        if top_k == 0 {
            return Err(PyValueError::new_err("top_k must be at least 1"));
        }
        let corpus = corpus.map(|c| c.inner.clone()).unwrap_or_else(corpus::shipped_corpus);
        let config = TranslatorConfig {
            top_k,
            min_score,
            ..TranslatorConfig::default()
        };
        Ok(Self {
            inner: nl::Translator::new(corpus, config),
        })
    }

    /// Ranked candidates. Raises `NoConfidentCandidate` when nothing clears
    /// the score threshold.
    fn translate<'py>(&self, py: Python<'py>, utterance: &str) -> PyResult<Bound<'py, PyAny>> {
        match py.detach(|| self.inner.translate(utterance)) {
            Ok(c) => to_py(py, &Value::Array(c.iter().map(ser).collect())),
            Err(TranslateError::NoConfidentCandidate { best_score, nearest }) => {
                let nearest = to_py(py, &Value::Array(nearest.iter().map(ser).collect()))?;
                Err(NoConfidentCandidate::new_err((
                    format!("no confident candidate (best score {best_score:.3})"),
                    best_score,
                    nearest.unbind(),
                )))
            }
            Err(e) => Err(PyValueError::new_err(e.to_string())),
        }
    }

    #[pyo3(signature = (utterance, k=3))]
    fn nearest<'py>(&self, py: Python<'py>, utterance: &str, k: usize) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &Value::Array(self.inner.nearest(utterance, k).iter().map(ser).collect()))
    }
}

fn query_or_task(py: Python<'_>, s: Submitted) -> PyResult<Bound<'_, PyAny>> {
    let v = match s {
        Submitted::Task(h) => json!({"task_id": h.task_id, "status": h.status.as_str()}),
        Submitted::Query(q) => json!({"result": query_json(&q)}),
        Submitted::Reset(state) => json!({"reset": true, "state": ser(&state)}),
    };
    to_py(py, &v)
}

/// Single-vehicle kinematic simulator driven by explicit steps.
#[pyclass(name = "Simulator", module = "aerocmd")]
struct PySimulator {
    inner: sim::Simulator,
}

#[pymethods]
impl PySimulator {
    /// `config` is a dict in the `SimConfig` layout; missing keys take defaults.
    #[new]
    #[pyo3(signature = (config=None, auto_takeoff=None))]
    fn new(config: Option<&Bound<'_, PyAny>>, auto_takeoff: Option<bool>) -> PyResult<Self> {
        let cfg = sim_config(config, auto_takeoff)?;
        Ok(Self {
            inner: sim::Simulator::new(cfg),
        })
    }

    /// Submit program text. Returns `{task_id, status}` for motion,
    /// `{result}` for a query or `{reset, state}` for a reset.
    fn submit<'py>(&mut self, py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
        let program = parse(text)?;
        match self.inner.submit_program(&program) {
            Ok(s) => query_or_task(py, s),
            Err(e) => Err(ValidationError::new_err(e.to_string())),
        }
    }

    #[pyo3(signature = (n=1))]
    fn step(&mut self, n: usize) {
        for _ in 0..n {
            self.inner.step();
        }
    }

    #[pyo3(signature = (max_sim_seconds=eval::EXECUTION_TIMEOUT))]
    fn run_until_idle(&mut self, max_sim_seconds: f64) -> PyResult<()> {
        self.inner
            .run_until_idle(max_sim_seconds)
            .map_err(|e| PyException::new_err(e.to_string()))
    }

    fn task<'py>(&self, py: Python<'py>, task_id: &str) -> PyResult<Bound<'py, PyAny>> {
        let record = self
            .inner
            .task(task_id)
            .ok_or_else(|| PyKeyError::new_err(task_id.to_string()))?;
        let mut v = ser(record);
        v["results"] = Value::Array(record.results.iter().map(query_json).collect());
        to_py(py, &v)
    }

    fn reset<'py>(&mut self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let state = self.inner.reset();
        to_py(py, &ser(&state))
    }

    fn state<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &ser(&self.inner.state_report()))
    }

    fn pose<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &ser(&self.inner.pose()))
    }

    fn gps<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &ser(&self.inner.gps()))
    }

    /// PNG bytes and metadata for one camera frame.
    #[pyo3(signature = (camera=0, image_type="scene"))]
    fn image<'py>(&self, py: Python<'py>, camera: u32, image_type: &str) -> PyResult<(Bound<'py, PyBytes>, Bound<'py, PyAny>)> {
        let kind: ImageType = image_type.parse().map_err(|e: dsl::UnknownImageType| PyValueError::new_err(e.to_string()))?;
        let img = self
            .inner
            .image(camera, kind)
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        let meta = serde_json::to_value(&img.metadata).expect("serializable");
        Ok((PyBytes::new(py, &img.png), to_py(py, &meta)?))
    }

    #[getter]
    fn sim_time(&self) -> f64 {
        self.inner.sim_time()
    }

    #[getter]
    fn busy(&self) -> bool {
        self.inner.is_busy()
    }
}

/// Config used for scoring: defaults with automatic takeoff.
#[pyfunction]
fn scoring_config(py: Python<'_>) -> PyResult<Bound<'_, PyAny>> {
    to_py(py, &serde_json::to_value(eval::scoring_config()).expect("serializable"))
}

#[pyfunction]
fn exact_match(pred: &str, gold: &str) -> bool {
    eval::exact_match(pred, gold)
}

#[pyfunction]
fn ast_match(pred: &str, gold: &str) -> bool {
    eval::ast_match(pred, gold)
}

#[pyfunction]
#[pyo3(signature = (pred, gold, config=None))]
fn execution_match(py: Python<'_>, pred: &str, gold: &str, config: Option<&Bound<'_, PyAny>>) -> PyResult<bool> {
    let cfg = match config {
        Some(_) => sim_config(config, None)?,
        None => eval::scoring_config(),
    };
    Ok(py.detach(|| eval::execution_match(pred, gold, &cfg)))
}

/// All three metrics for one prediction, with the nesting enforced.
#[pyfunction]
#[pyo3(signature = (pred, gold))]
fn score<'py>(py: Python<'py>, pred: Option<&str>, gold: &str) -> PyResult<Bound<'py, PyAny>> {
    let cfg = eval::scoring_config();
    let gold = parse(gold)?;
    let result = py.detach(|| {
        let outcome = eval::run_program(&gold, &cfg);
        eval::score_prediction(pred, &gold, &outcome, &cfg)
    });
    to_py(py, &ser(&result))
}

fn examples_from_py(obj: &Bound<'_, PyAny>) -> PyResult<Vec<DatasetExample>> {
    serde_json::from_value(from_py(obj)?).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Score a translator over a list of example dicts. Returns the report dict.
#[pyfunction]
#[pyo3(signature = (dataset, translator=None))]
fn evaluate<'py>(py: Python<'py>, dataset: &Bound<'py, PyAny>, translator: Option<&PyTranslator>) -> PyResult<Bound<'py, PyAny>> {
    let examples = examples_from_py(dataset)?;
    let shipped;
    let translator = match translator {
        Some(t) => &t.inner,
        None => {
            shipped = nl::Translator::new(corpus::shipped_corpus(), TranslatorConfig::default());
            &shipped
        }
    };
    let report = py.detach(|| eval::evaluate(&examples, translator, &eval::scoring_config()));
    let v: Value = serde_json::from_str(&report.to_json()).expect("report json");
    to_py(py, &v)
}

/// Expand paraphrase families (JSON text; the bundled set when omitted).
#[pyfunction]
#[pyo3(signature = (templates_json=None, seed=42, per_family=50))]
fn expand_templates<'py>(
    py: Python<'py>,
    templates_json: Option<&str>,
    seed: u64,
    per_family: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let families = match templates_json {
        Some(text) => corpus::parse_templates(text).map_err(|e| PyValueError::new_err(e.to_string()))?,
        None => corpus::shipped_templates(),
    };
    let examples =
        corpus::expand_templates(&families, seed, per_family).map_err(|e| PyValueError::new_err(e.to_string()))?;
    to_py(py, &ser(&examples))
}

/// Split examples by held-out paraphrase variant. Returns `(train, heldout)`.
#[pyfunction]
#[pyo3(signature = (examples, fraction=0.25, seed=42))]
fn split_by_family<'py>(
    py: Python<'py>,
    examples: &Bound<'py, PyAny>,
    fraction: f64,
    seed: u64,
) -> PyResult<(Bound<'py, PyAny>, Bound<'py, PyAny>)> {
    let examples = examples_from_py(examples)?;
    let split = corpus::split_by_family(&examples, fraction, seed).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok((to_py(py, &ser(&split.train))?, to_py(py, &ser(&split.heldout))?))
}

/// Blocking connection to a running `aerocmd serve`.
#[pyclass(name = "Client", module = "aerocmd")]
struct PyClient {
    inner: wire::Client,
}

fn wire_err(e: wire::ClientError) -> PyErr {
    WireError::new_err(e.to_string())
}

#[pymethods]
impl PyClient {
    #[new]
    #[pyo3(signature = (endpoint="127.0.0.1:41451", timeout=5.0))]
    fn new(endpoint: &str, timeout: f64) -> PyResult<Self> {
        let inner = wire::Client::connect(endpoint, Duration::from_secs_f64(timeout)).map_err(wire_err)?;
        Ok(Self { inner })
    }

    /// Returns `(server_version, min_client_version)`.
    fn ping(&mut self) -> PyResult<(u32, u32)> {
        let v = self.inner.ping().map_err(wire_err)?;
        Ok((v.server_version, v.min_client_version))
    }

    #[pyo3(signature = (method, params=None))]
    fn call<'py>(
        &mut self,
        py: Python<'py>,
        method: &str,
        params: Option<&Bound<'py, PyDict>>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let params = match params {
            Some(p) => from_py(p.as_any())?,
            None => json!({}),
        };
        let result = self.inner.call(method, params).map_err(wire_err)?;
        to_py(py, &result)
    }
}

#[pymodule]
#[pyo3(name = "aerocmd")]
fn aerocmd_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("DslParseError", py.get_type::<DslParseError>())?;
    m.add("ValidationError", py.get_type::<ValidationError>())?;
    m.add("NoConfidentCandidate", py.get_type::<NoConfidentCandidate>())?;
    m.add("WireError", py.get_type::<WireError>())?;
    m.add_class::<PyProgram>()?;
    m.add_class::<PyCorpus>()?;
    m.add_class::<PyTranslator>()?;
    m.add_class::<PySimulator>()?;
    m.add_class::<PyClient>()?;
    m.add_function(wrap_pyfunction!(parse_program, m)?)?;
    m.add_function(wrap_pyfunction!(render, m)?)?;
    m.add_function(wrap_pyfunction!(ast_equiv, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_and_slot, m)?)?;
    m.add_function(wrap_pyfunction!(scoring_config, m)?)?;
    m.add_function(wrap_pyfunction!(exact_match, m)?)?;
    m.add_function(wrap_pyfunction!(ast_match, m)?)?;
    m.add_function(wrap_pyfunction!(execution_match, m)?)?;
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(expand_templates, m)?)?;
    m.add_function(wrap_pyfunction!(split_by_family, m)?)?;
    m.add("DEFAULT_HOME_LATITUDE", sim::DEFAULT_HOME_LATITUDE)?;
    m.add("DEFAULT_HOME_LONGITUDE", sim::DEFAULT_HOME_LONGITUDE)?;
    m.add("PROTOCOL_VERSION", wire::PROTOCOL_VERSION)?;
    Ok(())
}
