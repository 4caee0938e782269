//! Per-criterion evaluation reports and their markdown / CSV / JSON forms.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detectors::{Criterion, Entity, Registry, ToolVerdict};
use crate::metrics::{AdjustedEvaluation, AgreementMatrix, RateEstimates};

pub const ENSEMBLE_NAME: &str = "Ensemble";
pub const TRUTH_NAME: &str = "True";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("unknown report format {0:?} (expected md, csv or json)")]
    Format(String),
    #[error("report json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Md,
    Csv,
    Json,
}

impl ReportFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            ReportFormat::Md => "md",
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        }
    }

    pub fn content_type(&self) -> &'static str {
        match self {
            ReportFormat::Md => "text/markdown; charset=utf-8",
            ReportFormat::Csv => "text/csv; charset=utf-8",
            ReportFormat::Json => "application/json",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "md" | "markdown" => Ok(ReportFormat::Md),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(ReportError::Format(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolScore {
    pub tool: String,
    pub evaluation: AdjustedEvaluation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyComparison {
    pub tool: String,
    pub other: String,
    pub statistic: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperCounts {
    pub curated: usize,
    pub presumed: usize,
    pub excluded_complicated: usize,
    pub excluded_absent: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryRow {
    pub registry: String,
    pub true_positives: usize,
    /// Tool → identifiers of this registry it found among the true
    /// positives. Tools that report no identifiers are absent.
    pub found: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryBreakdown {
    pub tools: Vec<String>,
    pub total: RegistryRow,
    pub rows: Vec<RegistryRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub criterion: Criterion,
    pub tools: Vec<ToolScore>,
    pub ensemble: Option<ToolScore>,
    pub rule: Option<String>,
    pub rule_tools: Vec<String>,
    pub percent_same: Option<f64>,
    pub stability_trials: usize,
    pub stability_fraction: f64,
    pub agreement: AgreementMatrix,
    pub comparisons: Vec<AccuracyComparison>,
    pub rates: RateEstimates,
    pub papers: PaperCounts,
    pub registry_breakdown: Option<RegistryBreakdown>,
    pub seeds: BTreeMap<String, u64>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// Counts validated identifiers per registry: an identifier is a true
/// positive when it was found by some tool in a paper whose gold label is
/// positive. Tools contributing no identifiers get empty cells.
pub fn registry_breakdown(verdicts: &[ToolVerdict], truth: &BTreeMap<String, bool>) -> RegistryBreakdown {
    let mut by_tool: BTreeMap<String, BTreeMap<(String, String), Registry>> = BTreeMap::new();
    for v in verdicts {
        let Some(entities) = &v.entities else { continue };
        let slot = by_tool.entry(v.tool.clone()).or_default();
        if !truth.get(&v.pmcid).copied().unwrap_or(false) {
            continue;
        }
        for e in entities {
            let registry = match e {
                Entity::Registry(h) => Some(h.registry),
                Entity::Text(s) => Registry::classify(s),
            };
            if let Some(r) = registry {
                slot.insert((v.pmcid.clone(), e.identifier().to_string()), r);
            }
        }
    }
    let mut union: BTreeMap<(String, String), Registry> = BTreeMap::new();
    for found in by_tool.values() {
        union.extend(found.iter().map(|(k, r)| (k.clone(), *r)));
    }
    let row = |label: String, filter: &dyn Fn(Registry) -> bool| RegistryRow {
        registry: label,
        true_positives: union.values().filter(|r| filter(**r)).count(),
        found: by_tool
            .iter()
            .map(|(t, f)| (t.clone(), f.values().filter(|r| filter(**r)).count()))
            .collect(),
    };
    let rows = Registry::ALL
        .into_iter()
        .map(|reg| row(reg.as_str().to_string(), &|r| r == reg))
        .filter(|r| r.true_positives > 0)
        .collect();
    RegistryBreakdown {
        tools: by_tool.keys().cloned().collect(),
        total: row("TRN (total)".to_string(), &|_| true),
        rows,
    }
}

fn two(x: f64) -> String {
    format!("{x:.2}")
}

fn score_rows(report: &CriterionReport) -> Vec<&ToolScore> {
    report.tools.iter().chain(report.ensemble.as_ref()).collect()
}

pub fn render_report(report: &CriterionReport, format: ReportFormat) -> Result<String, ReportError> {
    Ok(match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report)?;
            s.push('\n');
            s
        }
        ReportFormat::Csv => render_csv(report),
        ReportFormat::Md => render_markdown(report),
    })
}

pub fn parse_report_json(text: &str) -> Result<CriterionReport, ReportError> {
    Ok(serde_json::from_str(text)?)
}

fn render_csv(report: &CriterionReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "tool", "accuracy", "precision", "recall", "f1", "tp", "fp", "fn", "tn", "adj_tp", "adj_fp", "adj_fn",
        "adj_tn", "ppr", "pnr",
    ])
    .expect("in-memory csv");
    for s in score_rows(report) {
        let e = &s.evaluation;
        let f = |x: f64| format!("{x:.6}");
        w.write_record([
            s.tool.clone(),
            f(e.accuracy),
            f(e.precision),
            f(e.recall),
            f(e.f1),
            e.raw.tp.to_string(),
            e.raw.fp.to_string(),
            e.raw.fn_.to_string(),
            e.raw.tn.to_string(),
            f(e.adj_tp),
            f(e.adj_fp),
            f(e.adj_fn),
            f(e.adj_tn),
            f(e.rates.ppr),
            f(e.rates.pnr),
        ])
        .expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
}

fn render_markdown(report: &CriterionReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {}\n", report.criterion);
    let _ = writeln!(out, "{}\n", report.criterion.description());

    out.push_str("| Tool | Accuracy | Precision | Recall | F1 |\n");
    out.push_str("|---|---|---|---|---|\n");
    for s in score_rows(report) {
        let e = &s.evaluation;
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} |",
            s.tool,
            two(e.accuracy),
            two(e.precision),
            two(e.recall),
            two(e.f1)
        );
    }
    out.push('\n');

    if let Some(rule) = &report.rule {
        let _ = writeln!(out, "Function learned: {rule}");
    }
    match report.percent_same {
        Some(p) => {
            let _ = writeln!(
                out,
                "Percent same with {:.0}% data splits: {:.0}%",
                report.stability_fraction * 100.0,
                p
            );
        }
        None if report.rule.is_some() => {
            let _ = writeln!(out, "Percent same with {:.0}% data splits: n/a", report.stability_fraction * 100.0);
        }
        None => {}
    }
    out.push('\n');

    let raters = &report.agreement.raters;
    if !raters.is_empty() {
        out.push_str("## Agreement (Gwet's AC1)\n\n|   |");
        for r in raters {
            let _ = write!(out, " {r} |");
        }
        out.push_str("\n|---|");
        out.push_str(&"---|".repeat(raters.len()));
        out.push('\n');
        for (i, r) in raters.iter().enumerate() {
            let _ = write!(out, "| {r} |");
            for v in &report.agreement.values[i] {
                match v {
                    Some(x) => {
                        let _ = write!(out, " {} |", two(*x));
                    }
                    None => out.push_str("   |"),
                }
            }
            out.push('\n');
        }
        out.push('\n');
    }

    if !report.comparisons.is_empty() {
        out.push_str("## Accuracy comparisons (two-tailed proportion test)\n\n");
        out.push_str("| Tool | Compared with | Statistic | p-value |\n|---|---|---|---|\n");
        for c in &report.comparisons {
            let _ = writeln!(out, "| {} | {} | {:.3} | {:.3e} |", c.tool, c.other, c.statistic, c.p_value);
        }
        out.push('\n');
    }

    let r = &report.rates;
    let p = &report.papers;
    out.push_str("## Papers\n\n");
    let _ = writeln!(out, "- curated: {}", p.curated);
    let _ = writeln!(out, "- presumed by agreement: {}", p.presumed);
    let _ = writeln!(out, "- excluded as complicated: {}", p.excluded_complicated);
    let _ = writeln!(out, "- excluded for missing verdicts: {}", p.excluded_absent);
    let _ = writeln!(
        out,
        "- PPR {:.4} ({}/{} control positives confirmed{})",
        r.ppr,
        r.n_pos_confirmed,
        r.n_pos_checked,
        if r.ppr_undefined { ", undefined" } else { "" }
    );
    let _ = writeln!(
        out,
        "- PNR {:.4} ({}/{} control negatives confirmed{})",
        r.pnr,
        r.n_neg_confirmed,
        r.n_neg_checked,
        if r.pnr_undefined { ", undefined" } else { "" }
    );
    out.push('\n');

    if let Some(b) = &report.registry_breakdown {
        out.push_str("## Registration identifiers\n\n| Registry | True positives |");
        for t in &b.tools {
            let _ = write!(out, " {t} n | {t} % |");
        }
        out.push_str("\n|---|---|");
        out.push_str(&"---|---|".repeat(b.tools.len()));
        out.push('\n');
        for row in std::iter::once(&b.total).chain(&b.rows) {
            let _ = write!(out, "| {} | {} |", row.registry, row.true_positives);
            for t in &b.tools {
                match row.found.get(t) {
                    Some(&n) if row.true_positives > 0 => {
                        let pct = n as f64 / row.true_positives as f64 * 100.0;
                        let _ = write!(out, " {n} | {pct:.0}% |");
                    }
                    _ => out.push_str("   |   |"),
                }
            }
            out.push('\n');
        }
        out.push('\n');
    }

    if !report.seeds.is_empty() {
        let seeds: Vec<String> = report.seeds.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let _ = writeln!(out, "Seeds: {}", seeds.join(", "));
    }
    for w in &report.warnings {
        let _ = writeln!(out, "Warning: {w}");
    }
    out
}
