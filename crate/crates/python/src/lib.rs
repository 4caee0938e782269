//! Python bindings: parsing, detection, metrics, ensembles and the
//! end-to-end pipeline.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use rigor_core::adapters::{import_tool_output, AdapterSpec};
use rigor_core::corpus::{self, Document};
use rigor_core::curation::{self, CurationItem, DEFAULT_LINK_TEMPLATE};
use rigor_core::detectors::{self, Criterion, Entity, RegistryHit, ToolVerdict};
use rigor_core::ensemble::{self, EnsembleModel, ModelFamily, StabilityConfig, TrainConfig};
use rigor_core::matrix::{self, DetectionMatrix, RowStatus};
use rigor_core::metrics::{self, AdjustedEvaluation, ConfusionCounts, RateEstimates};
use rigor_core::pipeline::{self, PipelineConfig};
use rigor_core::report::{render_report, ReportFormat};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn criterion(raw: &str) -> PyResult<Criterion> {
    Criterion::from_str(raw).map_err(value_err)
}

#[pyclass(name = "Section", frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
struct PySection {
    title: String,
    text: String,
    depth: usize,
    span: (usize, usize),
}

#[pyclass(name = "Document", frozen)]
struct PyDocument(Document);

#[pymethods]
impl PyDocument {
    #[getter]
    fn pmcid(&self) -> &str {
        &self.0.pmcid
    }
    #[getter]
    fn full_text(&self) -> &str {
        &self.0.full_text
    }
    #[getter]
    fn methods_text(&self) -> &str {
        &self.0.methods_text
    }
    #[getter]
    fn abstract_text(&self) -> &str {
        &self.0.abstract_text
    }
    #[getter]
    fn sections(&self) -> Vec<PySection> {
        self.0
            .sections
            .iter()
            .map(|s| PySection {
                title: s.title.clone(),
                text: s.text.clone(),
                depth: s.depth,
                span: s.span,
            })
            .collect()
    }
    fn __repr__(&self) -> String {
        format!("Document({}, {} sections)", self.0.pmcid, self.0.sections.len())
    }
}

#[pyclass(name = "RegistryHit", frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
struct PyRegistryHit {
    registry: String,
    identifier: String,
    span: (usize, usize),
    location: String,
}

impl From<&RegistryHit> for PyRegistryHit {
    fn from(h: &RegistryHit) -> Self {
        let location = serde_json::to_value(h.location).expect("location serializes");
        Self {
            registry: h.registry.as_str().to_string(),
            identifier: h.identifier.clone(),
            span: h.char_span,
            location: location.as_str().unwrap_or_default().to_string(),
        }
    }
}

#[pymethods]
impl PyRegistryHit {
    fn __repr__(&self) -> String {
        format!("RegistryHit({}, {:?}, {})", self.registry, self.identifier, self.location)
    }
}

/// One tool's call on one criterion for one paper.
#[pyclass(name = "ToolVerdict", from_py_object)]
#[derive(Clone)]
struct PyToolVerdict(ToolVerdict);

#[pymethods]
impl PyToolVerdict {
    #[new]
    #[pyo3(signature = (pmcid, tool, criterion, present, evidence = Vec::new(), score = None))]
    fn new(
        pmcid: &str,
        tool: &str,
        criterion: &str,
        present: bool,
        evidence: Vec<String>,
        score: Option<f64>,
    ) -> PyResult<Self> {
        let mut v = ToolVerdict::new(pmcid, tool, self::criterion(criterion)?, present);
        v.evidence = evidence;
        v.score = score;
        v.validate().map_err(value_err)?;
        Ok(Self(v))
    }
    #[getter]
    fn pmcid(&self) -> &str {
        &self.0.pmcid
    }
    #[getter]
    fn tool(&self) -> &str {
        &self.0.tool
    }
    #[getter]
    fn criterion(&self) -> &str {
        self.0.criterion.as_str()
    }
    #[getter]
    fn present(&self) -> bool {
        self.0.present
    }
    #[getter]
    fn evidence(&self) -> Vec<String> {
        self.0.evidence.clone()
    }
    #[getter]
    fn score(&self) -> Option<f64> {
        self.0.score
    }
    #[getter]
    fn identifiers(&self) -> Vec<String> {
        self.0
            .entities
            .iter()
            .flatten()
            .map(Entity::identifier)
            .map(String::from)
            .collect()
    }
    fn to_json(&self) -> String {
        serde_json::to_string(&self.0).expect("verdict serializes")
    }
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        serde_json::from_str(text).map(Self).map_err(value_err)
    }
    fn __repr__(&self) -> String {
        format!(
            "ToolVerdict({}, {}, {}, present={})",
            self.0.pmcid, self.0.tool, self.0.criterion, self.0.present
        )
    }
}

#[pyfunction]
fn parse_document(xml: &str) -> PyResult<PyDocument> {
    corpus::parse_document(xml).map(PyDocument).map_err(value_err)
}

#[pyfunction]
fn sample_corpus(candidates: Vec<String>, n: usize, seed: u64) -> PyResult<Vec<String>> {
    corpus::sample_corpus(&candidates, n, seed).map_err(value_err)
}

#[pyfunction]
fn scan_registration_identifiers(text: &str) -> Vec<PyRegistryHit> {
    detectors::scan_registration_identifiers(text).iter().map(Into::into).collect()
}

/// Located hits for a parsed document (abstract, methods or other).
#[pyfunction]
fn scan_document(doc: PyRef<'_, PyDocument>) -> Vec<PyRegistryHit> {
    detectors::scan_document(&doc.0).iter().map(Into::into).collect()
}

#[pyfunction]
fn detect_nct_naive(text: &str) -> bool {
    detectors::detect_nct_naive(text)
}

#[pyfunction]
fn split_sentences(text: &str) -> Vec<String> {
    detectors::split_sentences(text).into_iter().map(String::from).collect()
}

#[pyfunction]
fn detect_open_code(doc: PyRef<'_, PyDocument>) -> PyToolVerdict {
    PyToolVerdict(detectors::detect_open_code(&doc.0))
}

/// Runs a built-in detector by id.
#[pyfunction]
fn run_detector(id: &str, doc: PyRef<'_, PyDocument>) -> PyResult<PyToolVerdict> {
    let d = detectors::builtin(id, &detectors::OpenCodeConfig::default()).map_err(value_err)?;
    Ok(PyToolVerdict(d.detect(&doc.0)))
}

#[pyfunction]
fn criteria() -> Vec<(String, String)> {
    Criterion::ALL
        .iter()
        .map(|c| (c.as_str().to_string(), c.description().to_string()))
        .collect()
}

/// Reads a tool's output file with an adapter spec (JSON file).
#[pyfunction]
fn import_tool(spec_path: PathBuf, source_path: PathBuf) -> PyResult<Vec<PyToolVerdict>> {
    let spec = AdapterSpec::from_json_file(&spec_path).map_err(value_err)?;
    Ok(import_tool_output(&spec, &source_path)
        .map_err(value_err)?
        .into_iter()
        .map(PyToolVerdict)
        .collect())
}

#[pyclass(name = "DetectionMatrix", frozen)]
struct PyMatrix(DetectionMatrix);

#[pymethods]
impl PyMatrix {
    #[new]
    fn new(verdicts: Vec<PyToolVerdict>, criterion: &str) -> PyResult<Self> {
        let vs: Vec<ToolVerdict> = verdicts.into_iter().map(|v| v.0).collect();
        matrix::merge_into_matrix(&vs, self::criterion(criterion)?)
            .map(Self)
            .map_err(value_err)
    }
    #[getter]
    fn papers(&self) -> Vec<String> {
        self.0.papers.clone()
    }
    #[getter]
    fn tools(&self) -> Vec<String> {
        self.0.tools.clone()
    }
    #[getter]
    fn cells(&self) -> Vec<Vec<Option<bool>>> {
        self.0.cells.clone()
    }
    fn disagreements(&self) -> Vec<String> {
        self.0.disagreements().into_iter().map(String::from).collect()
    }
    fn unanimous(&self) -> Vec<(String, bool)> {
        self.0.unanimous().into_iter().map(|(p, v)| (p.to_string(), v)).collect()
    }
    /// "unanimous_true", "unanimous_false", "disagreement" or "incomplete".
    fn status(&self, pmcid: &str) -> Option<&'static str> {
        self.0.status_of(pmcid).map(|s| match s {
            RowStatus::Unanimous(true) => "unanimous_true",
            RowStatus::Unanimous(false) => "unanimous_false",
            RowStatus::Disagreement => "disagreement",
            RowStatus::Incomplete => "incomplete",
        })
    }
    /// Blinded disagreement items as JSON strings, in seeded order.
    #[pyo3(signature = (seed, link_template = DEFAULT_LINK_TEMPLATE))]
    fn disagreement_queue(&self, seed: u64, link_template: &str) -> PyResult<Vec<String>> {
        let items = curation::build_disagreement_queue(&self.0, seed, link_template).map_err(value_err)?;
        Ok(items.iter().map(item_json).collect())
    }
    fn __repr__(&self) -> String {
        format!("DetectionMatrix({} papers x {} tools)", self.0.papers.len(), self.0.tools.len())
    }
}

fn item_json(item: &CurationItem) -> String {
    serde_json::to_string(&curation::ItemView::from(item)).expect("item serializes")
}

#[pyfunction]
fn control_composition(available_pos: usize, available_neg: usize, size: usize) -> (usize, usize) {
    curation::control_composition(available_pos, available_neg, size)
}

#[pyclass(name = "AdjustedEvaluation", frozen, get_all)]
struct PyEvaluation {
    adj_tp: f64,
    adj_fp: f64,
    adj_fn: f64,
    adj_tn: f64,
    accuracy: f64,
    precision: f64,
    recall: f64,
    f1: f64,
    /// Names of scores whose denominator was zero.
    undefined: Vec<&'static str>,
}

impl From<AdjustedEvaluation> for PyEvaluation {
    fn from(e: AdjustedEvaluation) -> Self {
        let f = e.flags;
        let undefined = [
            ("accuracy", f.accuracy_undefined),
            ("precision", f.precision_undefined),
            ("recall", f.recall_undefined),
            ("f1", f.f1_undefined),
        ]
        .into_iter()
        .filter_map(|(n, u)| u.then_some(n))
        .collect();
        Self {
            adj_tp: e.adj_tp,
            adj_fp: e.adj_fp,
            adj_fn: e.adj_fn,
            adj_tn: e.adj_tn,
            accuracy: e.accuracy,
            precision: e.precision,
            recall: e.recall,
            f1: e.f1,
            undefined,
        }
    }
}

#[pymethods]
impl PyEvaluation {
    fn __repr__(&self) -> String {
        format!(
            "AdjustedEvaluation(accuracy={:.4}, precision={:.4}, recall={:.4}, f1={:.4})",
            self.accuracy, self.precision, self.recall, self.f1
        )
    }
}

#[pyfunction]
#[pyo3(signature = (tp, fp, fn_, tn, ppr = 1.0, pnr = 1.0))]
fn adjusted_scores(tp: u64, fp: u64, fn_: u64, tn: u64, ppr: f64, pnr: f64) -> PyResult<PyEvaluation> {
    if !(0.0..=1.0).contains(&ppr) || !(0.0..=1.0).contains(&pnr) {
        return Err(PyValueError::new_err("ppr and pnr must lie in [0, 1]"));
    }
    let rates = RateEstimates {
        ppr,
        pnr,
        ..RateEstimates::identity()
    };
    Ok(metrics::adjusted_scores(ConfusionCounts { tp, fp, fn_, tn }, rates).into())
}

#[pyfunction]
fn gwet_ac1(r1: Vec<bool>, r2: Vec<bool>) -> PyResult<f64> {
    metrics::gwet_ac1(&r1, &r2).map(|r| r.ac1).map_err(value_err)
}

/// Returns (statistic, p_value).
#[pyfunction]
fn compare_accuracies(p1: f64, n1: u64, p2: f64, n2: u64) -> PyResult<(f64, f64)> {
    metrics::compare_accuracies(p1, n1, p2, n2)
        .map(|t| (t.statistic, t.p_value))
        .map_err(value_err)
}

/// Returns (mean_diff, sd_diff, loa_low, loa_high).
#[pyfunction]
fn bland_altman(pairs: Vec<(f64, f64)>) -> PyResult<(f64, f64, f64, f64)> {
    metrics::bland_altman(&pairs)
        .map(|b| (b.mean_diff, b.sd_diff, b.loa_low, b.loa_high))
        .map_err(value_err)
}

fn family(raw: &str) -> PyResult<ModelFamily> {
    match raw {
        "logistic" => Ok(ModelFamily::Logistic),
        "linear_margin" => Ok(ModelFamily::LinearMargin),
        other => Err(PyValueError::new_err(format!("unknown model family {other:?}"))),
    }
}

#[pyclass(name = "EnsembleModel", frozen)]
struct PyModel(EnsembleModel);

#[pymethods]
impl PyModel {
    #[getter]
    fn tools(&self) -> Vec<String> {
        self.0.tool_order.clone()
    }
    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.0.weights.clone()
    }
    #[getter]
    fn bias(&self) -> f64 {
        self.0.bias
    }
    fn predict(&self, inputs: Vec<bool>) -> PyResult<bool> {
        self.0.predict(&inputs).map_err(value_err)
    }
    /// The model's decision over every input combination, minimized to a
    /// rule string.
    fn rule(&self) -> PyResult<String> {
        ensemble::extract_boolean_rule(&self.0)
            .map(|r| r.expression)
            .map_err(value_err)
    }
    fn truth_table(&self) -> PyResult<Vec<bool>> {
        ensemble::truth_table(&self.0).map_err(value_err)
    }
}

#[pyfunction]
#[pyo3(signature = (features, labels, tools, seed = 0, family = "logistic", c = 1.0))]
fn train_ensemble(
    features: Vec<Vec<bool>>,
    labels: Vec<bool>,
    tools: Vec<String>,
    seed: u64,
    family: &str,
    c: f64,
) -> PyResult<PyModel> {
    let cfg = TrainConfig {
        family: self::family(family)?,
        c,
        ..TrainConfig::default()
    };
    ensemble::train(&features, &labels, &tools, seed, &cfg)
        .map(PyModel)
        .map_err(value_err)
}

/// Returns (percent_same or None, reference rule).
#[pyfunction]
#[pyo3(signature = (features, labels, tools, fraction = 0.8, trials = 100, seed = 0, family = "logistic"))]
fn stability(
    features: Vec<Vec<bool>>,
    labels: Vec<bool>,
    tools: Vec<String>,
    fraction: f64,
    trials: usize,
    seed: u64,
    family: &str,
) -> PyResult<(Option<f64>, String)> {
    let cfg = StabilityConfig {
        fraction,
        trials,
        seed,
        train: TrainConfig {
            family: self::family(family)?,
            ..TrainConfig::default()
        },
    };
    let r = ensemble::stability_analysis(&features, &labels, &tools, &cfg).map_err(value_err)?;
    Ok((r.percent_same, r.reference_rule.expression))
}

#[pyfunction]
fn parse_rule(expression: &str, tools: Vec<String>) -> PyResult<Vec<bool>> {
    ensemble::parse_rule(expression, &tools).map_err(value_err)
}

#[pyfunction]
fn minimize_table(table: Vec<bool>, tools: Vec<String>) -> PyResult<String> {
    ensemble::BooleanRule::from_table(table, &tools)
        .map(|r| r.expression)
        .map_err(value_err)
}

/// Runs every stage from a JSON config; returns criterion → report in
/// `format`. Raises RuntimeError listing open items if curation is
/// incomplete.
#[pyfunction]
#[pyo3(signature = (config_path, format = "md"))]
fn run_pipeline(py: Python<'_>, config_path: PathBuf, format: &str) -> PyResult<BTreeMap<String, String>> {
    let format = ReportFormat::from_str(format).map_err(value_err)?;
    let config = PipelineConfig::from_json_file(&config_path).map_err(value_err)?;
    let reports = py
        .detach(|| pipeline::run_pipeline(&config))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    reports
        .iter()
        .map(|r| {
            render_report(r, format)
                .map(|text| (r.criterion.to_string(), text))
                .map_err(value_err)
        })
        .collect()
}

#[pymodule]
fn rigor(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyDocument>()?;
    m.add_class::<PySection>()?;
    m.add_class::<PyRegistryHit>()?;
    m.add_class::<PyToolVerdict>()?;
    m.add_class::<PyMatrix>()?;
    m.add_class::<PyEvaluation>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(parse_document, m)?)?;
    m.add_function(wrap_pyfunction!(sample_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(scan_registration_identifiers, m)?)?;
    m.add_function(wrap_pyfunction!(scan_document, m)?)?;
    m.add_function(wrap_pyfunction!(detect_nct_naive, m)?)?;
    m.add_function(wrap_pyfunction!(split_sentences, m)?)?;
    m.add_function(wrap_pyfunction!(detect_open_code, m)?)?;
    m.add_function(wrap_pyfunction!(run_detector, m)?)?;
    m.add_function(wrap_pyfunction!(criteria, m)?)?;
    m.add_function(wrap_pyfunction!(import_tool, m)?)?;
    m.add_function(wrap_pyfunction!(control_composition, m)?)?;
    m.add_function(wrap_pyfunction!(adjusted_scores, m)?)?;
    m.add_function(wrap_pyfunction!(gwet_ac1, m)?)?;
    m.add_function(wrap_pyfunction!(compare_accuracies, m)?)?;
    m.add_function(wrap_pyfunction!(bland_altman, m)?)?;
    m.add_function(wrap_pyfunction!(train_ensemble, m)?)?;
    m.add_function(wrap_pyfunction!(stability, m)?)?;
    m.add_function(wrap_pyfunction!(parse_rule, m)?)?;
    m.add_function(wrap_pyfunction!(minimize_table, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    Ok(())
}
