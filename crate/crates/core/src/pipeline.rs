//! Stage functions over a state directory, and the end-to-end run.
//!
//! Layout under the state directory:
//! `corpus.ndjson`, `results/{criterion}.ndjson`, `queue/{criterion}.ndjson`,
//! `labels.ndjson`, `gold/{criterion}.ndjson`, `models/{criterion}.json`,
//! `reports/{criterion}.{md,csv,json}`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapters::{import_tool_output, AdapterSpec};
use crate::corpus::{parse_document_with_fallback, read_manifest, select_by_prefix, Corpus};
use crate::curation::{
    assemble_gold_standard, build_control_set, build_disagreement_queue, interleave, read_ndjson, write_ndjson,
    CurationItem, CurationStore, GoldStandard, ItemOrigin, Provenance, CONTROL_SET_SIZE, DEFAULT_LINK_TEMPLATE,
};
use crate::detectors::{builtin, Criterion, Detector, OpenCodeConfig, ToolVerdict};
use crate::ensemble::{
    extract_boolean_rule, stability_analysis, train, EnsembleError, EnsembleModel, ModelFamily, StabilityConfig,
    TrainConfig,
};
use crate::matrix::{merge_into_matrix, DetectionMatrix};
use crate::metrics::{adjusted_scores, compare_accuracies, confusion_counts, AgreementMatrix};
use crate::report::{
    registry_breakdown, render_report, AccuracyComparison, CriterionReport, PaperCounts, ReportFormat, ToolScore,
    ENSEMBLE_NAME, TRUTH_NAME,
};

type BoxError = Box<dyn std::error::Error + Send + Sync>;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: BoxError,
    },
    #[error("curation incomplete: {}", summarize(.remaining))]
    CurationIncomplete {
        remaining: BTreeMap<Criterion, Vec<String>>,
    },
    #[error("no tool results for {0}")]
    NoResults(Criterion),
    #[error("config: {0}")]
    Config(String),
}

fn summarize(remaining: &BTreeMap<Criterion, Vec<String>>) -> String {
    remaining
        .iter()
        .map(|(c, ids)| format!("{c}: {} item(s) remaining ({})", ids.len(), ids.join(", ")))
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, PipelineError>;

fn stage<E: Into<BoxError>>(name: &'static str) -> impl FnOnce(E) -> PipelineError {
    move |e| PipelineError::Stage {
        stage: name,
        source: e.into(),
    }
}

#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }
    pub fn corpus(&self) -> PathBuf {
        self.root.join("corpus.ndjson")
    }
    pub fn results(&self, c: Criterion) -> PathBuf {
        self.root.join("results").join(format!("{c}.ndjson"))
    }
    pub fn queue(&self, c: Criterion) -> PathBuf {
        self.root.join("queue").join(format!("{c}.ndjson"))
    }
    pub fn labels(&self) -> PathBuf {
        self.root.join("labels.ndjson")
    }
    pub fn gold(&self, c: Criterion) -> PathBuf {
        self.root.join("gold").join(format!("{c}.ndjson"))
    }
    pub fn model(&self, c: Criterion) -> PathBuf {
        self.root.join("models").join(format!("{c}.json"))
    }
    pub fn report(&self, c: Criterion, format: ReportFormat) -> PathBuf {
        self.root.join("reports").join(format!("{c}.{}", format.extension()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Seeds {
    pub sample: u64,
    pub queue: u64,
    pub controls: u64,
    pub ensemble: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self {
            sample: 8,
            queue: 1,
            controls: 2,
            ensemble: 3,
        }
    }
}

impl Seeds {
    pub fn as_map(&self) -> BTreeMap<String, u64> {
        [
            ("sample", self.sample),
            ("queue", self.queue),
            ("controls", self.controls),
            ("ensemble", self.ensemble),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluationMode {
    /// Train and score the ensemble on the same papers.
    #[default]
    SameSet,
    /// Score the ensemble on a seeded held-out share of the papers.
    HeldOut,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleSettings {
    pub family: ModelFamily,
    pub fraction: f64,
    pub trials: usize,
    pub c: f64,
    pub mode: EvaluationMode,
    /// Share of papers held out when `mode` is `held_out`.
    pub holdout: f64,
}

impl Default for EnsembleSettings {
    fn default() -> Self {
        Self {
            family: ModelFamily::Logistic,
            fraction: 0.8,
            trials: 100,
            c: 1.0,
            mode: EvaluationMode::SameSet,
            holdout: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSettings {
    pub n: usize,
    #[serde(default)]
    pub prefix: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdapterImport {
    pub spec: PathBuf,
    pub source: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub corpus_dir: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub criteria: Vec<Criterion>,
    pub detectors: Vec<String>,
    pub adapters: Vec<AdapterImport>,
    pub open_code: Option<PathBuf>,
    pub sample: Option<SampleSettings>,
    pub seeds: Seeds,
    pub ensemble: EnsembleSettings,
    pub control_size: usize,
    pub link_template: String,
    /// Per-criterion tool order for rules and tables; defaults to sorted ids.
    pub tool_order: BTreeMap<Criterion, Vec<String>>,
    pub port: u16,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            corpus_dir: None,
            output_dir: PathBuf::from("state"),
            criteria: Vec::new(),
            detectors: Vec::new(),
            adapters: Vec::new(),
            open_code: None,
            sample: None,
            seeds: Seeds::default(),
            ensemble: EnsembleSettings::default(),
            control_size: CONTROL_SET_SIZE,
            link_template: DEFAULT_LINK_TEMPLATE.to_string(),
            tool_order: BTreeMap::new(),
            port: 8080,
        }
    }
}

impl PipelineConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
    }

    /// Every referenced input path must exist.
    pub fn validate(&self) -> Result<()> {
        let referenced = self
            .corpus_dir
            .iter()
            .chain(&self.open_code)
            .chain(self.adapters.iter().flat_map(|a| [&a.spec, &a.source]));
        let missing: Vec<&PathBuf> = referenced.filter(|p| !p.exists()).collect();
        if !missing.is_empty() {
            let list: Vec<String> = missing.iter().map(|p| p.display().to_string()).collect();
            return Err(PipelineError::Config(format!("missing paths: {}", list.join(", "))));
        }
        if !(self.ensemble.fraction > 0.0 && self.ensemble.fraction <= 1.0) {
            return Err(PipelineError::Config("ensemble.fraction must lie in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn open_code_config(&self) -> Result<OpenCodeConfig> {
        match &self.open_code {
            Some(p) => OpenCodeConfig::from_json_file(p).map_err(stage("detect")),
            None => Ok(OpenCodeConfig::default()),
        }
    }

    pub fn detector_set(&self) -> Result<Vec<Box<dyn Detector>>> {
        let oc = self.open_code_config()?;
        self.detectors
            .iter()
            .map(|id| builtin(id, &oc).map_err(stage("detect")))
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IngestSummary {
    pub documents: usize,
    pub excluded: Vec<(PathBuf, String)>,
}

pub fn ingest(layout: &Layout, corpus_dir: &Path, sample: Option<&SampleSettings>, seed: u64) -> Result<IngestSummary> {
    let mut result = Corpus::ingest_dir(corpus_dir).map_err(stage("ingest"))?;
    if let Some(s) = sample {
        if let Some(prefix) = &s.prefix {
            let keep: BTreeSet<String> =
                select_by_prefix(result.corpus.documents.iter().map(|d| &d.pmcid), prefix).into_iter().collect();
            result.corpus.documents.retain(|d| keep.contains(&d.pmcid));
        }
        result.corpus.sample(s.n, seed).map_err(stage("ingest"))?;
    }
    result.corpus.write_manifest(&layout.corpus()).map_err(stage("ingest"))?;
    Ok(IngestSummary {
        documents: result.corpus.documents.len(),
        excluded: result.excluded,
    })
}

pub fn load_verdicts(layout: &Layout, criterion: Criterion) -> Result<Vec<ToolVerdict>> {
    let path = layout.results(criterion);
    if !path.exists() {
        return Ok(Vec::new());
    }
    read_ndjson(&path).map_err(stage("results"))
}

/// Replaces every row from the tools in `verdicts` and keeps the rest,
/// sorted by (pmcid, tool).
pub fn upsert_results(layout: &Layout, criterion: Criterion, verdicts: Vec<ToolVerdict>) -> Result<usize> {
    for v in &verdicts {
        v.validate().map_err(stage("results"))?;
    }
    let tools: BTreeSet<&str> = verdicts.iter().map(|v| v.tool.as_str()).collect();
    let mut rows: Vec<ToolVerdict> = load_verdicts(layout, criterion)?
        .into_iter()
        .filter(|v| !tools.contains(v.tool.as_str()))
        .collect();
    let n = verdicts.len();
    rows.extend(verdicts);
    rows.sort_by(|a, b| (&a.pmcid, &a.tool).cmp(&(&b.pmcid, &b.tool)));
    write_ndjson(&layout.results(criterion), &rows).map_err(stage("results"))?;
    Ok(n)
}

/// Runs detectors over every manifest document; returns verdicts written
/// per criterion.
pub fn detect(layout: &Layout, detectors: &[Box<dyn Detector>]) -> Result<BTreeMap<Criterion, usize>> {
    let manifest = read_manifest(&layout.corpus()).map_err(stage("detect"))?;
    let per_doc: Vec<Vec<ToolVerdict>> = manifest
        .par_iter()
        .map(|entry| -> Result<Vec<ToolVerdict>> {
            let xml = std::fs::read_to_string(&entry.source_path)
                .map_err(|e| format!("{}: {e}", entry.source_path.display()))
                .map_err(stage("detect"))?;
            let doc = parse_document_with_fallback(&xml, Some(&entry.pmcid)).map_err(stage("detect"))?;
            Ok(detectors.iter().map(|d| d.detect(&doc)).collect())
        })
        .collect::<Result<_>>()?;
    let mut grouped: BTreeMap<Criterion, Vec<ToolVerdict>> = BTreeMap::new();
    for v in per_doc.into_iter().flatten() {
        grouped.entry(v.criterion).or_default().push(v);
    }
    let mut written = BTreeMap::new();
    for (c, vs) in grouped {
        written.insert(c, upsert_results(layout, c, vs)?);
    }
    Ok(written)
}

pub fn import(layout: &Layout, spec: &AdapterSpec, source: &Path) -> Result<usize> {
    let verdicts = import_tool_output(spec, source).map_err(stage("import"))?;
    upsert_results(layout, spec.criterion, verdicts)
}

pub fn load_matrix(layout: &Layout, criterion: Criterion) -> Result<DetectionMatrix> {
    let verdicts = load_verdicts(layout, criterion)?;
    if verdicts.is_empty() {
        return Err(PipelineError::NoResults(criterion));
    }
    merge_into_matrix(&verdicts, criterion).map_err(stage("matrix"))
}

fn read_queue(layout: &Layout, criterion: Criterion) -> Result<Vec<CurationItem>> {
    let path = layout.queue(criterion);
    if !path.exists() {
        return Ok(Vec::new());
    }
    read_ndjson(&path).map_err(stage("queue"))
}

/// Writes the disagreement queue, replacing any earlier queue file.
pub fn build_queue(layout: &Layout, criterion: Criterion, seed: u64, link_template: &str) -> Result<Vec<CurationItem>> {
    let matrix = load_matrix(layout, criterion)?;
    let items = build_disagreement_queue(&matrix, seed, link_template).map_err(stage("queue"))?;
    write_ndjson(&layout.queue(criterion), &items).map_err(stage("queue"))?;
    Ok(items)
}

#[derive(Debug, Clone, Serialize)]
pub struct ControlSummary {
    pub positives: usize,
    pub negatives: usize,
    pub short: bool,
}

/// Draws a control set and shuffles it into the queue file; earlier control
/// items are replaced.
pub fn add_controls(
    layout: &Layout,
    criterion: Criterion,
    seed: u64,
    size: usize,
    link_template: &str,
) -> Result<ControlSummary> {
    let matrix = load_matrix(layout, criterion)?;
    let queue: Vec<CurationItem> = read_queue(layout, criterion)?
        .into_iter()
        .filter(|i| i.origin == ItemOrigin::Disagreement)
        .collect();
    let exclude: BTreeSet<String> = queue.iter().map(|i| i.pmcid.clone()).collect();
    let set = build_control_set(&matrix, &exclude, seed, size, link_template);
    if set.short {
        tracing::warn!(%criterion, "fewer unanimous papers than the requested control set size");
    }
    let summary = ControlSummary {
        positives: set.positives,
        negatives: set.negatives,
        short: set.short,
    };
    let all = interleave(queue, set.items, seed);
    write_ndjson(&layout.queue(criterion), &all).map_err(stage("controls"))?;
    Ok(summary)
}

pub fn gold_standard(layout: &Layout, criterion: Criterion) -> Result<GoldStandard> {
    let matrix = load_matrix(layout, criterion)?;
    let store = CurationStore::load(&layout.root).map_err(stage("gold"))?;
    let gold = assemble_gold_standard(&matrix, &store).map_err(stage("gold"))?;
    write_ndjson(&layout.gold(criterion), &gold.labels).map_err(stage("gold"))?;
    Ok(gold)
}

fn resolve_tool_order(matrix: &DetectionMatrix, preferred: Option<&Vec<String>>) -> Vec<String> {
    let mut order: Vec<String> = preferred
        .map(|p| p.iter().filter(|t| matrix.tool_index(t).is_some()).cloned().collect())
        .unwrap_or_default();
    for t in &matrix.tools {
        if !order.contains(t) {
            order.push(t.clone());
        }
    }
    order
}

#[derive(Debug, Clone, Default)]
pub struct EvaluateOptions {
    pub ensemble: EnsembleSettings,
    pub seeds: Seeds,
    pub tool_order: Option<Vec<String>>,
}

/// Builds the criterion report from results, queue and labels, and writes
/// gold, model and all report formats.
pub fn evaluate(layout: &Layout, criterion: Criterion, opts: &EvaluateOptions) -> Result<CriterionReport> {
    let verdicts = load_verdicts(layout, criterion)?;
    if verdicts.is_empty() {
        return Err(PipelineError::NoResults(criterion));
    }
    let matrix = merge_into_matrix(&verdicts, criterion).map_err(stage("matrix"))?;
    let gold = gold_standard(layout, criterion)?;
    let truth = gold.truth();
    let tools = resolve_tool_order(&matrix, opts.tool_order.as_ref());
    let mut warnings = Vec::new();

    let mut columns: Vec<BTreeMap<String, bool>> = Vec::new();
    let mut scores = Vec::new();
    for t in &tools {
        let col = matrix.column(t).map_err(stage("evaluate"))?;
        match confusion_counts(&truth, &col) {
            Ok(tally) => scores.push(ToolScore {
                tool: t.clone(),
                evaluation: adjusted_scores(tally.counts, gold.rates),
            }),
            Err(e) => warnings.push(format!("{t}: {e}")),
        }
        columns.push(col);
    }

    let rows: Vec<(String, Vec<bool>)> = matrix
        .complete_rows()
        .into_iter()
        .filter(|(p, _)| truth.contains_key(*p))
        .map(|(p, cells)| {
            let ordered = tools
                .iter()
                .map(|t| cells[matrix.tool_index(t).expect("tool from matrix")])
                .collect();
            (p.to_string(), ordered)
        })
        .collect();

    let mut ensemble = None;
    let mut rule = None;
    let mut percent_same = None;
    let mut ensemble_column = BTreeMap::new();
    if rows.is_empty() {
        warnings.push("no paper has a verdict from every tool; ensemble skipped".into());
    } else {
        let features: Vec<Vec<bool>> = rows.iter().map(|(_, x)| x.clone()).collect();
        let labels: Vec<bool> = rows.iter().map(|(p, _)| truth[p]).collect();
        let train_cfg = TrainConfig {
            family: opts.ensemble.family,
            c: opts.ensemble.c,
            ..TrainConfig::default()
        };
        let (train_idx, test_idx) = split_rows(rows.len(), &opts.ensemble, opts.seeds.ensemble);
        let pick = |idx: &[usize]| -> (Vec<Vec<bool>>, Vec<bool>) {
            (
                idx.iter().map(|&i| features[i].clone()).collect(),
                idx.iter().map(|&i| labels[i]).collect(),
            )
        };
        let (xs, ys) = pick(&train_idx);
        let model: EnsembleModel =
            train(&xs, &ys, &tools, opts.seeds.ensemble, &train_cfg).map_err(stage("ensemble"))?;
        if let Some(w) = &model.warning {
            warnings.push(format!("ensemble: {w}"));
        }
        let extracted = extract_boolean_rule(&model).map_err(stage("ensemble"))?;
        rule = Some(extracted.expression.clone());
        for &i in &test_idx {
            let pred = model.predict(&features[i]).map_err(stage("ensemble"))?;
            ensemble_column.insert(rows[i].0.clone(), pred);
        }
        match stability_analysis(
            &xs,
            &ys,
            &tools,
            &StabilityConfig {
                fraction: opts.ensemble.fraction,
                trials: opts.ensemble.trials,
                seed: opts.seeds.ensemble,
                train: train_cfg,
            },
        ) {
            Ok(s) => percent_same = s.percent_same,
            Err(e @ EnsembleError::InsufficientData { .. }) => warnings.push(format!("stability: {e}")),
            Err(e) => return Err(stage("ensemble")(e)),
        }
        let mut model_json = serde_json::to_string_pretty(&model).map_err(stage("ensemble"))?;
        model_json.push('\n');
        write_file(&layout.model(criterion), &model_json, "ensemble")?;
        if let Ok(tally) = confusion_counts(&truth, &ensemble_column) {
            ensemble = Some(ToolScore {
                tool: ENSEMBLE_NAME.to_string(),
                evaluation: adjusted_scores(tally.counts, gold.rates),
            });
        }
    }

    let mut raters = tools.clone();
    let mut ratings = columns;
    if ensemble.is_some() {
        raters.push(ENSEMBLE_NAME.to_string());
        ratings.push(ensemble_column);
    }
    raters.push(TRUTH_NAME.to_string());
    ratings.push(truth.clone());
    let agreement = AgreementMatrix::compute(&raters, &ratings);

    let comparisons = match &ensemble {
        Some(ens) => scores
            .iter()
            .filter_map(|s| {
                let (a, b) = (&ens.evaluation, &s.evaluation);
                compare_accuracies(a.accuracy, a.raw.total(), b.accuracy, b.raw.total())
                    .ok()
                    .map(|t| AccuracyComparison {
                        tool: ENSEMBLE_NAME.to_string(),
                        other: s.tool.clone(),
                        statistic: t.statistic,
                        p_value: t.p_value,
                    })
            })
            .collect(),
        None => Vec::new(),
    };

    let report = CriterionReport {
        criterion,
        tools: scores,
        ensemble,
        rule,
        rule_tools: tools,
        percent_same,
        stability_trials: opts.ensemble.trials,
        stability_fraction: opts.ensemble.fraction,
        agreement,
        comparisons,
        rates: gold.rates,
        papers: PaperCounts {
            curated: gold.count(Provenance::Curated),
            presumed: gold.count(Provenance::PresumedAgreement),
            excluded_complicated: gold.excluded_complicated.len(),
            excluded_absent: gold.excluded_absent.len(),
        },
        registry_breakdown: (criterion == Criterion::Registration).then(|| registry_breakdown(&verdicts, &truth)),
        seeds: opts.seeds.as_map(),
        warnings,
    };
    write_reports(layout, &report)?;
    Ok(report)
}

fn split_rows(n: usize, settings: &EnsembleSettings, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let all: Vec<usize> = (0..n).collect();
    if settings.mode == EvaluationMode::SameSet || n < 2 {
        return (all.clone(), all);
    }
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n_test = ((settings.holdout * n as f64).round() as usize).clamp(1, n - 1);
    let test: BTreeSet<usize> = rand::seq::index::sample(&mut rng, n, n_test).into_iter().collect();
    let train = all.iter().copied().filter(|i| !test.contains(i)).collect();
    (train, test.into_iter().collect())
}

fn write_file(path: &Path, content: &str, stage_name: &'static str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(stage(stage_name))?;
    }
    std::fs::write(path, content).map_err(stage(stage_name))
}

pub fn write_reports(layout: &Layout, report: &CriterionReport) -> Result<()> {
    for format in [ReportFormat::Json, ReportFormat::Md, ReportFormat::Csv] {
        let text = render_report(report, format).map_err(stage("report"))?;
        write_file(&layout.report(report.criterion, format), &text, "report")?;
    }
    Ok(())
}

/// Reads the stored report and renders it in `format`; `None` if the
/// criterion has not been evaluated yet.
pub fn stored_report(layout: &Layout, criterion: Criterion, format: ReportFormat) -> Result<Option<String>> {
    let path = layout.report(criterion, ReportFormat::Json);
    if !path.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&path).map_err(stage("report"))?;
    let report = crate::report::parse_report_json(&text).map_err(stage("report"))?;
    render_report(&report, format).map(Some).map_err(stage("report"))
}

/// Criteria with tool results in the state directory.
pub fn criteria_with_results(layout: &Layout) -> Vec<Criterion> {
    Criterion::ALL
        .into_iter()
        .filter(|c| layout.results(*c).exists())
        .collect()
}

/// ingest → detect → import → queue and controls (once) → require complete
/// curation → gold → evaluation → reports.
pub fn run_pipeline(config: &PipelineConfig) -> Result<Vec<CriterionReport>> {
    config.validate()?;
    let layout = Layout::new(&config.output_dir);
    if let Some(dir) = &config.corpus_dir {
        ingest(&layout, dir, config.sample.as_ref(), config.seeds.sample)?;
    }
    if !config.detectors.is_empty() {
        detect(&layout, &config.detector_set()?)?;
    }
    for a in &config.adapters {
        let spec = AdapterSpec::from_json_file(&a.spec).map_err(stage("import"))?;
        import(&layout, &spec, &a.source)?;
    }
    let criteria = if config.criteria.is_empty() {
        criteria_with_results(&layout)
    } else {
        config.criteria.clone()
    };
    for &c in &criteria {
        if !layout.queue(c).exists() {
            build_queue(&layout, c, config.seeds.queue, &config.link_template)?;
            add_controls(&layout, c, config.seeds.controls, config.control_size, &config.link_template)?;
        }
    }
    let store = CurationStore::load(&layout.root).map_err(stage("curation"))?;
    let remaining: BTreeMap<Criterion, Vec<String>> = criteria
        .iter()
        .map(|&c| (c, store.open_items(c)))
        .filter(|(_, ids)| !ids.is_empty())
        .collect();
    if !remaining.is_empty() {
        return Err(PipelineError::CurationIncomplete { remaining });
    }
    criteria
        .iter()
        .map(|&c| {
            evaluate(
                &layout,
                c,
                &EvaluateOptions {
                    ensemble: config.ensemble.clone(),
                    seeds: config.seeds,
                    tool_order: config.tool_order.get(&c).cloned(),
                },
            )
        })
        .collect()
}
