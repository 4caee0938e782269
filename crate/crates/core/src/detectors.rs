//! Built-in detectors and the verdict contract every tool (built-in or
//! imported) satisfies.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{methods_section_indices, Document};

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("span {start}..{end} outside text of length {len}")]
    Range { start: usize, end: usize, len: usize },
    #[error("unknown criterion {0:?}")]
    UnknownCriterion(String),
    #[error("unknown built-in detector {0:?}")]
    UnknownDetector(String),
    #[error("invalid verdict for {tool}/{pmcid}: {reason}")]
    InvalidVerdict {
        tool: String,
        pmcid: String,
        reason: String,
    },
    #[error("invalid open-code configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Registration,
    InclusionExclusion,
    Blinding,
    Randomization,
    Power,
    Software,
    OpenCode,
    CellLines,
    BaselineTable,
}

impl Criterion {
    pub const ALL: [Criterion; 9] = [
        Criterion::Registration,
        Criterion::InclusionExclusion,
        Criterion::Blinding,
        Criterion::Randomization,
        Criterion::Power,
        Criterion::Software,
        Criterion::OpenCode,
        Criterion::CellLines,
        Criterion::BaselineTable,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Criterion::Registration => "registration",
            Criterion::InclusionExclusion => "inclusion_exclusion",
            Criterion::Blinding => "blinding",
            Criterion::Randomization => "randomization",
            Criterion::Power => "power",
            Criterion::Software => "software",
            Criterion::OpenCode => "open_code",
            Criterion::CellLines => "cell_lines",
            Criterion::BaselineTable => "baseline_table",
        }
    }

    /// Curator-facing definition of what counts as present.
    pub fn description(&self) -> &'static str {
        match self {
            Criterion::Registration => {
                "The paper reports a trial registration number from a clinical trial registry."
            }
            Criterion::InclusionExclusion => {
                "The paper states inclusion or exclusion criteria for its subjects, in text or as a flow diagram. \
                 Exclusion of experimental variables (not subjects) does not count."
            }
            Criterion::Blinding => "Any form of blinding is reported (conduct, assessment or scoring).",
            Criterion::Randomization => {
                "Randomization was used to allocate subjects into groups. Random effects, imputation or \
                 cross-validation do not count."
            }
            Criterion::Power => {
                "An a priori power or sample size calculation is reported. Post hoc power and statements \
                 that no calculation was done do not count."
            }
            Criterion::Software => "The paper mentions at least one piece of software with associated code.",
            Criterion::OpenCode => {
                "Code written at least in part by the authors is deposited in an open repository stated in \
                 the body text. Availability on request and third-party repositories do not count."
            }
            Criterion::CellLines => "The paper uses a cell line listed as problematic or misidentified.",
            Criterion::BaselineTable => "The paper contains a table of participant characteristics at baseline.",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Criterion {
    type Err = DetectorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Criterion::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| DetectorError::UnknownCriterion(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Registry {
    Ctgov,
    Umin,
    Drks,
    Irct,
    Chictr,
    Isrctn,
    Ctri,
    Eudract,
    Actrn,
    Jrct,
    Kct,
    Ntr,
    Pactr,
}

impl Registry {
    pub const ALL: [Registry; 13] = [
        Registry::Ctgov,
        Registry::Umin,
        Registry::Drks,
        Registry::Irct,
        Registry::Chictr,
        Registry::Isrctn,
        Registry::Ctri,
        Registry::Eudract,
        Registry::Actrn,
        Registry::Jrct,
        Registry::Kct,
        Registry::Ntr,
        Registry::Pactr,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Registry::Ctgov => "ctgov",
            Registry::Umin => "umin",
            Registry::Drks => "drks",
            Registry::Irct => "irct",
            Registry::Chictr => "chictr",
            Registry::Isrctn => "isrctn",
            Registry::Ctri => "ctri",
            Registry::Eudract => "eudract",
            Registry::Actrn => "actrn",
            Registry::Jrct => "jrct",
            Registry::Kct => "kct",
            Registry::Ntr => "ntr",
            Registry::Pactr => "pactr",
        }
    }

    /// Identifier format, without anchors.
    fn pattern(&self) -> &'static str {
        match self {
            Registry::Ctgov => r"NCT\d{8}",
            Registry::Umin => r"UMIN\d{9}",
            Registry::Drks => r"DRKS\d{8}",
            Registry::Irct => r"IRCT\d{6,14}N\d{1,3}",
            Registry::Chictr => r"ChiCTR(?:-[A-Z]{2,4}-|-)?\d{8,10}",
            Registry::Isrctn => r"ISRCTN\d{8}",
            Registry::Ctri => r"CTRI/\d{4}/\d{2,3}/\d{6}",
            Registry::Eudract => r"(?:19|20)\d{2}-\d{6}-\d{2}",
            Registry::Actrn => r"ACTRN\d{14}",
            Registry::Jrct => r"jRCT[a-z]?\d{9,10}",
            Registry::Kct => r"KCT\d{7}",
            Registry::Ntr => r"NTR\d{3,5}",
            Registry::Pactr => r"PACTR\d{15}",
        }
    }

    /// The registry whose format `identifier` matches exactly, if any.
    pub fn classify(identifier: &str) -> Option<Registry> {
        Registry::ALL
            .into_iter()
            .find(|r| EXACT_PATTERNS[*r as usize].is_match(identifier.trim()))
    }
}

impl fmt::Display for Registry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

// Word characters may not touch an identifier on either side, which keeps
// grant and catalogue numbers from bleeding into a match.
static SCAN_PATTERNS: LazyLock<Vec<Regex>> = LazyLock::new(|| {
    Registry::ALL
        .iter()
        .map(|r| Regex::new(&format!(r"\b{}\b", r.pattern())).expect("registry pattern"))
        .collect()
});

static EXACT_PATTERNS: LazyLock<Vec<Regex>> = LazyLock::new(|| {
    Registry::ALL
        .iter()
        .map(|r| Regex::new(&format!(r"^{}$", r.pattern())).expect("registry pattern"))
        .collect()
});

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HitLocation {
    Abstract,
    Methods,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RegistryHit {
    pub registry: Registry,
    pub identifier: String,
    /// Byte offsets into the scanned text.
    pub char_span: (usize, usize),
    pub location: HitLocation,
}

/// Curated reasons a scanner hit was not a registration number. Never emitted
/// by the scanner itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FalsePositiveCategory {
    FundingId,
    DrugId,
    Datapoint,
    CatalogId,
    MedicalAcronym,
    MedicalDevice,
}

/// Finds every registry identifier in `text`.
///
/// Overlapping matches keep the earliest (then longest) one. Repeated
/// identifiers are reported once, at their first occurrence, and the result
/// is sorted alphabetically by identifier. All hits carry location
/// [`HitLocation::Other`]; see [`scan_document`] for located hits.
pub fn scan_registration_identifiers(text: &str) -> Vec<RegistryHit> {
    let mut raw: Vec<RegistryHit> = Vec::new();
    for (registry, re) in Registry::ALL.iter().zip(SCAN_PATTERNS.iter()) {
        for m in re.find_iter(text) {
            raw.push(RegistryHit {
                registry: *registry,
                identifier: m.as_str().to_string(),
                char_span: (m.start(), m.end()),
                location: HitLocation::Other,
            });
        }
    }
    raw.sort_by_key(|h| (h.char_span.0, std::cmp::Reverse(h.char_span.1)));

    let mut kept: Vec<RegistryHit> = Vec::new();
    let mut last_end = 0;
    for hit in raw {
        if !kept.is_empty() && hit.char_span.0 < last_end {
            continue;
        }
        last_end = hit.char_span.1;
        if !kept.iter().any(|k| k.identifier == hit.identifier) {
            kept.push(hit);
        }
    }
    kept.sort_by(|a, b| a.identifier.cmp(&b.identifier));
    kept
}

fn is_abstract_title(title: &str) -> bool {
    let t = title.to_lowercase();
    t.contains("abstract") || t.trim() == "summary"
}

/// Where a hit with a span into `doc.full_text` sits: inside a methods
/// section (or one nested in it), inside a body section titled as an
/// abstract, or elsewhere.
pub fn classify_hit_location(doc: &Document, hit: &RegistryHit) -> Result<HitLocation, DetectorError> {
    let (start, end) = hit.char_span;
    if start > end || end > doc.full_text.len() {
        return Err(DetectorError::Range {
            start,
            end,
            len: doc.full_text.len(),
        });
    }
    let inside = |i: usize| {
        let (s, e) = doc.sections[i].span;
        s <= start && end <= e
    };
    if methods_section_indices(doc).into_iter().any(inside) {
        return Ok(HitLocation::Methods);
    }
    let in_abstract = doc
        .sections
        .iter()
        .enumerate()
        .any(|(i, s)| is_abstract_title(&s.title) && inside(i));
    Ok(if in_abstract {
        HitLocation::Abstract
    } else {
        HitLocation::Other
    })
}

/// Scans the front-matter abstract and the body. Hits are unique per
/// (identifier, location) and sorted by identifier; abstract hits carry spans
/// into `doc.abstract_text`, all others into `doc.full_text`.
pub fn scan_document(doc: &Document) -> Vec<RegistryHit> {
    let mut hits: Vec<RegistryHit> = scan_registration_identifiers(&doc.abstract_text)
        .into_iter()
        .map(|mut h| {
            h.location = HitLocation::Abstract;
            h
        })
        .collect();
    for mut h in scan_all_occurrences(&doc.full_text) {
        h.location = classify_hit_location(doc, &h).unwrap_or(HitLocation::Other);
        if !hits
            .iter()
            .any(|k| k.identifier == h.identifier && k.location == h.location)
        {
            hits.push(h);
        }
    }
    hits.sort_by(|a, b| (&a.identifier, a.location).cmp(&(&b.identifier, b.location)));
    hits
}

// Every non-overlapping occurrence, in text order, without identifier dedup.
fn scan_all_occurrences(text: &str) -> Vec<RegistryHit> {
    let mut raw: Vec<RegistryHit> = Vec::new();
    for (registry, re) in Registry::ALL.iter().zip(SCAN_PATTERNS.iter()) {
        for m in re.find_iter(text) {
            raw.push(RegistryHit {
                registry: *registry,
                identifier: m.as_str().to_string(),
                char_span: (m.start(), m.end()),
                location: HitLocation::Other,
            });
        }
    }
    raw.sort_by_key(|h| (h.char_span.0, std::cmp::Reverse(h.char_span.1)));
    let mut out: Vec<RegistryHit> = Vec::new();
    for h in raw {
        if out.last().is_some_and(|l| h.char_span.0 < l.char_span.1) {
            continue;
        }
        out.push(h);
    }
    out
}

/// Bare substring test for "NCT". Flags cell-line names such as "NCTC" too.
pub fn detect_nct_naive(text: &str) -> bool {
    text.contains("NCT")
}

/// Splits on `.`, `?` or `!` followed by whitespace and an uppercase letter.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if matches!(c, '.' | '?' | '!') {
            let mut j = i + 1;
            while j < chars.len() && chars[j].1.is_whitespace() {
                j += 1;
            }
            if j > i + 1 && j < chars.len() && chars[j].1.is_uppercase() {
                let end = pos + c.len_utf8();
                let s = text[start..end].trim();
                if !s.is_empty() {
                    out.push(s);
                }
                start = chars[j].0;
                i = j;
                continue;
            }
        }
        i += 1;
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail);
    }
    out
}

/// Keyword lists used by the open-code detector. All matching is
/// case-insensitive; entries are literal phrases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OpenCodeConfig {
    /// Words that mark a statement about code. Matched as whole words.
    pub code_terms: Vec<String>,
    /// Repositories or resolvable locations.
    pub repository_terms: Vec<String>,
    /// Phrases that make a statement one of restricted or absent availability.
    pub restriction_phrases: Vec<String>,
    /// Phrases that mark use of someone else's code.
    pub reuse_phrases: Vec<String>,
    /// Phrases that mark the authors' own code; they override reuse phrases.
    pub own_code_phrases: Vec<String>,
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

impl Default for OpenCodeConfig {
    fn default() -> Self {
        Self {
            code_terms: strings(&[
                "code",
                "codes",
                "source code",
                "script",
                "scripts",
                "software",
                "notebook",
                "notebooks",
                "pipeline",
                "implementation",
            ]),
            repository_terms: strings(&[
                "github",
                "gitlab",
                "bitbucket",
                "zenodo",
                "figshare",
                "osf.io",
                "open science framework",
                "code ocean",
                "codeocean",
                "sourceforge",
                "software heritage",
                "dryad",
                "doi.org",
                "http://",
                "https://",
            ]),
            restriction_phrases: strings(&[
                "upon request",
                "on request",
                "upon reasonable request",
                "on reasonable request",
                "from the corresponding author",
                "from the authors",
                "no custom code",
                "no original code",
                "no new code",
                "not publicly available",
                "not available",
                "not be shared",
                "cannot be shared",
            ]),
            reuse_phrases: strings(&[
                "we used",
                "was used",
                "were used",
                "using the",
                "package",
                "library",
                "toolbox",
                "previously published",
                "previously described",
                "third-party",
                "developed by",
            ]),
            own_code_phrases: strings(&[
                "our code",
                "our analysis",
                "our scripts",
                "our software",
                "our pipeline",
                "all code",
                "analysis code",
                "custom code",
                "custom scripts",
                "code used in this study",
                "code for this study",
                "code for this paper",
                "code for this article",
                "code used to",
                "code generated",
                "code written",
                "we wrote",
                "we developed",
                "we have developed",
                "we provide",
                "we share",
                "we make",
                "this study",
                "this paper",
                "this article",
            ]),
        }
    }
}

impl OpenCodeConfig {
    pub fn from_json_file(path: &Path) -> Result<Self, DetectorError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DetectorError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| DetectorError::Config(e.to_string()))
    }

    fn compile(&self) -> CompiledOpenCode {
        let words = |terms: &[String]| {
            let alt = terms
                .iter()
                .map(|t| regex::escape(t))
                .collect::<Vec<_>>()
                .join("|");
            Regex::new(&format!(r"(?i)\b(?:{alt})\b")).expect("escaped alternation")
        };
        let lower = |terms: &[String]| terms.iter().map(|t| t.to_lowercase()).collect();
        CompiledOpenCode {
            code: words(&self.code_terms),
            repository: lower(&self.repository_terms),
            restriction: lower(&self.restriction_phrases),
            reuse: lower(&self.reuse_phrases),
            own: lower(&self.own_code_phrases),
        }
    }
}

struct CompiledOpenCode {
    code: Regex,
    repository: Vec<String>,
    restriction: Vec<String>,
    reuse: Vec<String>,
    own: Vec<String>,
}

impl CompiledOpenCode {
    fn is_open_code_statement(&self, sentence: &str) -> bool {
        let lower = sentence.to_lowercase();
        let any = |list: &[String]| list.iter().any(|p| lower.contains(p.as_str()));
        let mentions_code = self.code.is_match(sentence);
        let open_location = any(&self.repository);
        let restricted = any(&self.restriction);
        let authored = any(&self.own) || !any(&self.reuse);
        mentions_code && open_location && authored && !restricted
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputScope {
    FullText,
    MethodsText,
}

impl InputScope {
    pub fn select<'a>(&self, doc: &'a Document) -> &'a str {
        match self {
            InputScope::FullText => &doc.full_text,
            InputScope::MethodsText => &doc.methods_text,
        }
    }
}

/// Something a detector attached to a verdict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entity {
    Registry(RegistryHit),
    Text(String),
}

impl Entity {
    pub fn identifier(&self) -> &str {
        match self {
            Entity::Registry(h) => &h.identifier,
            Entity::Text(s) => s,
        }
    }
}

/// One tool's call on one criterion for one paper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolVerdict {
    pub pmcid: String,
    pub tool: String,
    pub criterion: Criterion,
    pub present: bool,
    #[serde(default)]
    pub evidence: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entities: Option<Vec<Entity>>,
}

impl ToolVerdict {
    pub fn new(pmcid: &str, tool: &str, criterion: Criterion, present: bool) -> Self {
        Self {
            pmcid: pmcid.to_string(),
            tool: tool.to_string(),
            criterion,
            present,
            evidence: Vec::new(),
            score: None,
            entities: None,
        }
    }

    /// Negative verdicts carry no evidence; scores lie in [0, 1].
    pub fn validate(&self) -> Result<(), DetectorError> {
        let fail = |reason: &str| DetectorError::InvalidVerdict {
            tool: self.tool.clone(),
            pmcid: self.pmcid.clone(),
            reason: reason.to_string(),
        };
        if !self.present && !self.evidence.is_empty() {
            return Err(fail("negative verdict with evidence"));
        }
        if let Some(s) = self.score {
            if !(0.0..=1.0).contains(&s) {
                return Err(fail("score outside [0, 1]"));
            }
        }
        Ok(())
    }
}

/// A tool that runs in-process over parsed documents.
pub trait Detector: Send + Sync {
    fn tool_id(&self) -> &str;
    fn criterion(&self) -> Criterion;
    fn input(&self) -> InputScope;
    fn detect(&self, doc: &Document) -> ToolVerdict;
}

/// Sentences of `text` that contain `needle`.
fn sentences_containing<'a>(text: &'a str, needles: &[&str]) -> Vec<&'a str> {
    split_sentences(text)
        .into_iter()
        .filter(|s| needles.iter().any(|n| s.contains(n)))
        .collect()
}

pub struct RegistryScanner;

impl RegistryScanner {
    pub const ID: &'static str = "registry_scanner";
}

impl Detector for RegistryScanner {
    fn tool_id(&self) -> &str {
        Self::ID
    }
    fn criterion(&self) -> Criterion {
        Criterion::Registration
    }
    fn input(&self) -> InputScope {
        InputScope::FullText
    }
    fn detect(&self, doc: &Document) -> ToolVerdict {
        let text = self.input().select(doc);
        let mut hits = scan_registration_identifiers(text);
        for h in &mut hits {
            h.location = classify_hit_location(doc, h).unwrap_or(HitLocation::Other);
        }
        let mut v = ToolVerdict::new(&doc.pmcid, self.tool_id(), self.criterion(), !hits.is_empty());
        if v.present {
            let ids: Vec<&str> = hits.iter().map(|h| h.identifier.as_str()).collect();
            v.evidence = sentences_containing(text, &ids)
                .into_iter()
                .map(String::from)
                .collect();
            v.entities = Some(hits.into_iter().map(Entity::Registry).collect());
        }
        v
    }
}

pub struct NctPresence;

impl NctPresence {
    pub const ID: &'static str = "nct_presence";
}

impl Detector for NctPresence {
    fn tool_id(&self) -> &str {
        Self::ID
    }
    fn criterion(&self) -> Criterion {
        Criterion::Registration
    }
    fn input(&self) -> InputScope {
        InputScope::FullText
    }
    fn detect(&self, doc: &Document) -> ToolVerdict {
        let text = self.input().select(doc);
        let mut v = ToolVerdict::new(&doc.pmcid, self.tool_id(), self.criterion(), detect_nct_naive(text));
        if v.present {
            v.evidence = sentences_containing(text, &["NCT"])
                .into_iter()
                .take(1)
                .map(String::from)
                .collect();
        }
        v
    }
}

pub struct OpenCodeDetector {
    compiled: CompiledOpenCode,
}

impl OpenCodeDetector {
    pub const ID: &'static str = "open_code_scanner";

    pub fn new(config: &OpenCodeConfig) -> Self {
        Self {
            compiled: config.compile(),
        }
    }

    /// Sentences that state the authors' code is openly deposited.
    pub fn statements<'a>(&self, text: &'a str) -> Vec<&'a str> {
        split_sentences(text)
            .into_iter()
            .filter(|s| self.compiled.is_open_code_statement(s))
            .collect()
    }
}

impl Default for OpenCodeDetector {
    fn default() -> Self {
        Self::new(&OpenCodeConfig::default())
    }
}

impl Detector for OpenCodeDetector {
    fn tool_id(&self) -> &str {
        Self::ID
    }
    fn criterion(&self) -> Criterion {
        Criterion::OpenCode
    }
    fn input(&self) -> InputScope {
        InputScope::FullText
    }
    fn detect(&self, doc: &Document) -> ToolVerdict {
        let evidence: Vec<String> = self
            .statements(self.input().select(doc))
            .into_iter()
            .map(String::from)
            .collect();
        let mut v = ToolVerdict::new(&doc.pmcid, self.tool_id(), self.criterion(), !evidence.is_empty());
        v.evidence = evidence;
        v
    }
}

/// Open-code verdict with the default keyword lists.
pub fn detect_open_code(doc: &Document) -> ToolVerdict {
    OpenCodeDetector::default().detect(doc)
}

/// Built-in detector by tool id.
pub fn builtin(id: &str, open_code: &OpenCodeConfig) -> Result<Box<dyn Detector>, DetectorError> {
    match id {
        RegistryScanner::ID => Ok(Box::new(RegistryScanner)),
        NctPresence::ID => Ok(Box::new(NctPresence)),
        OpenCodeDetector::ID => Ok(Box::new(OpenCodeDetector::new(open_code))),
        other => Err(DetectorError::UnknownDetector(other.to_string())),
    }
}

pub const BUILTIN_IDS: [&str; 3] = [RegistryScanner::ID, NctPresence::ID, OpenCodeDetector::ID];
