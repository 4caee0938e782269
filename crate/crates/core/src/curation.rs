//! Blinded curation queues, control sets, the append-only label log and
//! gold-standard assembly.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detectors::{Criterion, ToolVerdict};
use crate::matrix::{DetectionMatrix, RowStatus};
use crate::metrics::{estimate_rates, ControlOutcome, RateEstimates};

pub const DEFAULT_LINK_TEMPLATE: &str = "https://www.ncbi.nlm.nih.gov/pmc/articles/{pmcid}/";
pub const DEFAULT_LEASE: Duration = Duration::from_secs(15 * 60);
pub const CONTROL_SET_SIZE: usize = 100;
const PASS2_SUFFIX: &str = "-p2";

#[derive(Debug, Error)]
pub enum CurationError {
    #[error("a disagreement queue needs at least two tools, found {0}")]
    TooFewTools(usize),
    #[error("unknown item {0:?}")]
    NotFound(String),
    #[error("item {item} already labeled by {curator}")]
    Duplicate { item: String, curator: String },
    #[error("item {item} is leased to another curator")]
    LeaseConflict { item: String },
    #[error("invalid label: {}", .fields.join(", "))]
    Invalid { fields: Vec<String> },
    #[error("curation incomplete; {} item(s) unresolved: {}", .items.len(), .items.join(", "))]
    Incomplete { items: Vec<String> },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: {source}")]
    Json {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, CurationError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CurationError + '_ {
    move |source| CurationError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemOrigin {
    Disagreement,
    ControlPositive,
    ControlNegative,
}

/// One paper to label. The id carries criterion and paper only, so neither
/// the id nor the displayed sentence tells a curator why it was queued.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurationItem {
    pub item_id: String,
    pub pmcid: String,
    pub criterion: Criterion,
    pub displayed_evidence: Option<String>,
    pub paper_link: String,
    pub origin: ItemOrigin,
    pub pass: u8,
}

/// What a curator is shown: the item without its origin.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemView {
    pub item_id: String,
    pub pmcid: String,
    pub criterion: Criterion,
    pub criterion_description: String,
    pub displayed_evidence: Option<String>,
    pub paper_link: String,
    pub pass: u8,
}

impl From<&CurationItem> for ItemView {
    fn from(item: &CurationItem) -> Self {
        Self {
            item_id: item.item_id.clone(),
            pmcid: item.pmcid.clone(),
            criterion: item.criterion,
            criterion_description: item.criterion.description().to_string(),
            displayed_evidence: item.displayed_evidence.clone(),
            paper_link: item.paper_link.clone(),
            pass: item.pass,
        }
    }
}

pub fn item_id(criterion: Criterion, pmcid: &str) -> String {
    format!("{criterion}-{pmcid}")
}

pub fn paper_link(template: &str, pmcid: &str) -> String {
    template.replace("{pmcid}", pmcid)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Yes,
    No,
    Complicated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurationLabel {
    pub item_id: String,
    pub decision: Decision,
    #[serde(default)]
    pub notes: String,
    #[serde(default)]
    pub notes_2: String,
    pub curator: String,
    /// RFC 3339.
    pub timestamp: String,
}

impl CurationLabel {
    /// Parses a label from loosely typed input, naming every bad field.
    /// A missing timestamp is filled from `now`.
    pub fn from_json(value: &serde_json::Value, now: &str) -> Result<Self> {
        let mut bad = Vec::new();
        let text = |key: &str, required: bool, bad: &mut Vec<String>| match value.get(key) {
            Some(serde_json::Value::String(s)) if !required || !s.trim().is_empty() => Some(s.trim().to_string()),
            None | Some(serde_json::Value::Null) if !required => Some(String::new()),
            _ => {
                bad.push(key.to_string());
                None
            }
        };
        let item_id = text("item_id", true, &mut bad);
        let curator = text("curator", true, &mut bad);
        let notes = text("notes", false, &mut bad);
        let notes_2 = text("notes_2", false, &mut bad);
        let timestamp = text("timestamp", false, &mut bad);
        let decision = value
            .get("decision")
            .and_then(|d| serde_json::from_value::<Decision>(d.clone()).ok());
        if decision.is_none() {
            bad.push("decision".to_string());
        }
        if !bad.is_empty() {
            bad.sort();
            return Err(CurationError::Invalid { fields: bad });
        }
        let timestamp = timestamp.filter(|t| !t.is_empty()).unwrap_or_else(|| now.to_string());
        Ok(Self {
            item_id: item_id.unwrap_or_default(),
            decision: decision.unwrap_or(Decision::Complicated),
            notes: notes.unwrap_or_default(),
            notes_2: notes_2.unwrap_or_default(),
            curator: curator.unwrap_or_default(),
            timestamp,
        })
    }
}

/// Replaces every tool id in `text` (case-insensitively) with `[tool]`.
pub fn redact_tools(text: &str, tools: &[String]) -> String {
    let mut names: Vec<&String> = tools.iter().filter(|t| !t.is_empty()).collect();
    names.sort_by_key(|t| std::cmp::Reverse(t.len()));
    if names.is_empty() {
        return text.to_string();
    }
    let alt = names.iter().map(|t| regex::escape(t)).collect::<Vec<_>>().join("|");
    let re = Regex::new(&format!("(?i){alt}")).expect("escaped alternation");
    re.replace_all(text, "[tool]").into_owned()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvidenceDraw {
    /// Index into the verdict slice of the tool drawn.
    pub tool: usize,
    pub sentence: Option<String>,
}

fn draw_evidence<R: Rng>(verdicts: &[ToolVerdict], rng: &mut R) -> Option<EvidenceDraw> {
    if verdicts.is_empty() {
        return None;
    }
    let tool = rng.random_range(0..verdicts.len());
    let v = &verdicts[tool];
    let sentence = if v.present { v.evidence.first().cloned() } else { None };
    Some(EvidenceDraw { tool, sentence })
}

/// Draws one tool uniformly and returns its first evidence sentence if it
/// called the criterion present.
pub fn select_display_evidence(verdicts: &[ToolVerdict], seed: u64) -> Option<EvidenceDraw> {
    draw_evidence(verdicts, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn make_item<R: Rng>(
    matrix: &DetectionMatrix,
    pmcid: &str,
    origin: ItemOrigin,
    link_template: &str,
    rng: &mut R,
) -> CurationItem {
    let verdicts = matrix.verdicts_for(pmcid);
    let sentence = draw_evidence(&verdicts, rng).and_then(|d| d.sentence);
    CurationItem {
        item_id: item_id(matrix.criterion, pmcid),
        pmcid: pmcid.to_string(),
        criterion: matrix.criterion,
        displayed_evidence: sentence.map(|s| redact_tools(&s, &matrix.tools)),
        paper_link: paper_link(link_template, pmcid),
        origin,
        pass: 1,
    }
}

/// One item per paper on which tools disagree, in seeded random order.
pub fn build_disagreement_queue(
    matrix: &DetectionMatrix,
    seed: u64,
    link_template: &str,
) -> Result<Vec<CurationItem>> {
    if matrix.tools.len() < 2 {
        return Err(CurationError::TooFewTools(matrix.tools.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut items: Vec<CurationItem> = matrix
        .disagreements()
        .into_iter()
        .map(|p| make_item(matrix, p, ItemOrigin::Disagreement, link_template, &mut rng))
        .collect();
    items.shuffle(&mut rng);
    Ok(items)
}

/// Positives and negatives to draw: half each, with a short stratum made up
/// from the other.
pub fn control_composition(available_pos: usize, available_neg: usize, size: usize) -> (usize, usize) {
    let pos = available_pos.min(size / 2);
    let neg = available_neg.min(size - pos);
    let pos = available_pos.min(size - neg);
    (pos, neg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSet {
    pub items: Vec<CurationItem>,
    pub positives: usize,
    pub negatives: usize,
    /// Fewer unanimous papers were available than requested.
    pub short: bool,
}

/// Samples unanimous papers for rate estimation, skipping `exclude`.
pub fn build_control_set(
    matrix: &DetectionMatrix,
    exclude: &BTreeSet<String>,
    seed: u64,
    size: usize,
    link_template: &str,
) -> ControlSet {
    let (pos, neg): (Vec<&str>, Vec<&str>) = {
        let agreed: Vec<(&str, bool)> = matrix
            .unanimous()
            .into_iter()
            .filter(|(p, _)| !exclude.contains(*p))
            .collect();
        (
            agreed.iter().filter(|(_, v)| *v).map(|(p, _)| *p).collect(),
            agreed.iter().filter(|(_, v)| !*v).map(|(p, _)| *p).collect(),
        )
    };
    let (n_pos, n_neg) = control_composition(pos.len(), neg.len(), size);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick = |pool: &[&str], n: usize, rng: &mut ChaCha8Rng| -> Vec<String> {
        let mut idx = index::sample(rng, pool.len(), n).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| pool[i].to_string()).collect()
    };
    let chosen_pos = pick(&pos, n_pos, &mut rng);
    let chosen_neg = pick(&neg, n_neg, &mut rng);
    let mut items = Vec::with_capacity(n_pos + n_neg);
    for (chosen, origin) in [
        (&chosen_pos, ItemOrigin::ControlPositive),
        (&chosen_neg, ItemOrigin::ControlNegative),
    ] {
        for p in chosen {
            items.push(make_item(matrix, p, origin, link_template, &mut rng));
        }
    }
    items.shuffle(&mut rng);
    ControlSet {
        items,
        positives: n_pos,
        negatives: n_neg,
        short: pos.len() + neg.len() < size,
    }
}

/// Merges control items into a queue and reshuffles, so controls cannot be
/// told apart by position.
pub fn interleave(queue: Vec<CurationItem>, controls: Vec<CurationItem>, seed: u64) -> Vec<CurationItem> {
    let mut all: Vec<CurationItem> = queue;
    let known: BTreeSet<String> = all.iter().map(|i| i.item_id.clone()).collect();
    all.extend(controls.into_iter().filter(|c| !known.contains(&c.item_id)));
    all.sort_by(|a, b| a.item_id.cmp(&b.item_id));
    all.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    all
}

pub fn write_ndjson<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut out = String::new();
    for r in rows {
        out.push_str(&serde_json::to_string(r).expect("serializable row"));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(io_err(path))
}

pub fn read_ndjson<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(serde_json::from_str(&line).map_err(|source| CurationError::Json {
            path: path.display().to_string(),
            line: i + 1,
            source,
        })?);
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Count {
    pub labeled: usize,
    pub total: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub criterion: Option<Criterion>,
    pub disagreement: Count,
    pub control: Count,
    pub pass2: Count,
    /// Items whose final decision is still "complicated" after pass 2.
    pub unresolved_complicated: usize,
    pub remaining: usize,
}

pub enum NextItem {
    Item(CurationItem),
    /// Unlabeled items remain but all are leased to other curators.
    Waiting { leased: usize },
    Done,
}

struct Lease {
    curator: String,
    expires: Instant,
}

/// Items and labels for every criterion. Labels are appended to the log
/// and synced before they count; pass-2 items and progress are derived
/// from the labels, so replaying the log restores the same state.
pub struct CurationStore {
    items: BTreeMap<String, CurationItem>,
    order: BTreeMap<Criterion, Vec<String>>,
    labels: Vec<CurationLabel>,
    labeled_by: BTreeSet<(String, String)>,
    latest: HashMap<String, Decision>,
    leases: HashMap<String, Lease>,
    lease_ttl: Duration,
    log: Option<(PathBuf, File)>,
}

impl Default for CurationStore {
    fn default() -> Self {
        Self::new()
    }
}

impl CurationStore {
    pub fn new() -> Self {
        Self {
            items: BTreeMap::new(),
            order: BTreeMap::new(),
            labels: Vec::new(),
            labeled_by: BTreeSet::new(),
            latest: HashMap::new(),
            leases: HashMap::new(),
            lease_ttl: DEFAULT_LEASE,
            log: None,
        }
    }

    pub fn with_lease(mut self, ttl: Duration) -> Self {
        self.lease_ttl = ttl;
        self
    }

    /// Loads `queue/*.ndjson` under `state_dir` and replays
    /// `labels.ndjson`, which later labels are appended to.
    pub fn open(state_dir: &Path) -> Result<Self> {
        let mut store = Self::load(state_dir)?;
        let log_path = state_dir.join("labels.ndjson");
        std::fs::create_dir_all(state_dir).map_err(io_err(state_dir))?;
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&log_path)
            .map_err(io_err(&log_path))?;
        store.log = Some((log_path, file));
        Ok(store)
    }

    /// As [`CurationStore::open`] but read-only: new labels are not persisted.
    pub fn load(state_dir: &Path) -> Result<Self> {
        let mut store = Self::new();
        for c in Criterion::ALL {
            let path = state_dir.join("queue").join(format!("{c}.ndjson"));
            if path.exists() {
                store.add_items(read_ndjson(&path)?);
            }
        }
        let log_path = state_dir.join("labels.ndjson");
        if log_path.exists() {
            for label in read_ndjson::<CurationLabel>(&log_path)? {
                store.apply(label);
            }
        }
        Ok(store)
    }

    /// Ids of items still waiting for a label, in dispatch order.
    pub fn open_items(&self, criterion: Criterion) -> Vec<String> {
        self.items_for(criterion)
            .into_iter()
            .filter(|i| self.is_open(&i.item_id))
            .map(|i| i.item_id.clone())
            .collect()
    }

    /// Adds pass-1 items in dispatch order. Known ids are ignored.
    pub fn add_items(&mut self, items: impl IntoIterator<Item = CurationItem>) {
        for item in items {
            if self.items.contains_key(&item.item_id) {
                continue;
            }
            self.order
                .entry(item.criterion)
                .or_default()
                .push(item.item_id.clone());
            self.items.insert(item.item_id.clone(), item);
        }
    }

    pub fn item(&self, id: &str) -> Option<&CurationItem> {
        self.items.get(id)
    }

    pub fn labels(&self) -> &[CurationLabel] {
        &self.labels
    }

    /// Pass-1 items of one criterion in dispatch order, followed by any
    /// pass-2 items.
    pub fn items_for(&self, criterion: Criterion) -> Vec<&CurationItem> {
        let first: Vec<&CurationItem> = self
            .order
            .get(&criterion)
            .into_iter()
            .flatten()
            .filter_map(|id| self.items.get(id))
            .collect();
        let second: Vec<&CurationItem> = first
            .iter()
            .filter_map(|i| self.items.get(&format!("{}{PASS2_SUFFIX}", i.item_id)))
            .collect();
        first.into_iter().chain(second).collect()
    }

    /// Decision of the most recent label on the item, if any.
    pub fn final_decision(&self, item_id: &str) -> Option<Decision> {
        self.latest.get(item_id).copied()
    }

    fn apply(&mut self, label: CurationLabel) {
        self.labeled_by
            .insert((label.item_id.clone(), label.curator.clone()));
        self.latest.insert(label.item_id.clone(), label.decision);
        self.leases.remove(&label.item_id);
        if let Some(item) = self.items.get(&label.item_id).filter(|i| i.pass == 1).cloned() {
            let p2 = format!("{}{PASS2_SUFFIX}", item.item_id);
            if label.decision == Decision::Complicated {
                self.items.entry(p2.clone()).or_insert_with(|| CurationItem {
                    item_id: p2,
                    pass: 2,
                    ..item
                });
            } else if !self.latest.contains_key(&p2) {
                self.items.remove(&p2);
            }
        }
        self.labels.push(label);
    }

    /// Validates, persists, then applies a label.
    pub fn record_label(&mut self, label: CurationLabel, now: Instant) -> Result<()> {
        if !self.items.contains_key(&label.item_id) {
            return Err(CurationError::NotFound(label.item_id));
        }
        if self
            .labeled_by
            .contains(&(label.item_id.clone(), label.curator.clone()))
        {
            return Err(CurationError::Duplicate {
                item: label.item_id,
                curator: label.curator,
            });
        }
        if let Some(lease) = self.leases.get(&label.item_id) {
            if lease.curator != label.curator && lease.expires > now {
                return Err(CurationError::LeaseConflict { item: label.item_id });
            }
        }
        if let Some((path, file)) = &mut self.log {
            let mut line = serde_json::to_string(&label).expect("serializable label");
            line.push('\n');
            file.write_all(line.as_bytes())
                .and_then(|_| file.sync_data())
                .map_err(io_err(path))?;
        }
        self.apply(label);
        Ok(())
    }

    fn is_open(&self, id: &str) -> bool {
        !self.latest.contains_key(id)
    }

    /// Leases the next unlabeled item to `curator`. A curator holding an
    /// unexpired lease gets the same item back.
    pub fn next_item(&mut self, criterion: Criterion, curator: &str, now: Instant) -> NextItem {
        let candidates: Vec<String> = self
            .items_for(criterion)
            .into_iter()
            .filter(|i| self.is_open(&i.item_id))
            .map(|i| i.item_id.clone())
            .collect();
        if let Some(id) = candidates.iter().find(|id| {
            self.leases
                .get(*id)
                .is_some_and(|l| l.curator == curator && l.expires > now)
        }) {
            return NextItem::Item(self.items[id].clone());
        }
        let mut leased = 0;
        for id in &candidates {
            match self.leases.get(id) {
                Some(l) if l.expires > now => leased += 1,
                _ => {
                    self.leases.insert(
                        id.clone(),
                        Lease {
                            curator: curator.to_string(),
                            expires: now + self.lease_ttl,
                        },
                    );
                    return NextItem::Item(self.items[id].clone());
                }
            }
        }
        if leased > 0 {
            NextItem::Waiting { leased }
        } else {
            NextItem::Done
        }
    }

    pub fn progress(&self, criterion: Criterion) -> Progress {
        let mut p = Progress {
            criterion: Some(criterion),
            ..Progress::default()
        };
        for item in self.items_for(criterion) {
            let labeled = self.latest.contains_key(&item.item_id);
            let slot = match (item.pass, item.origin) {
                (2, _) => &mut p.pass2,
                (_, ItemOrigin::Disagreement) => &mut p.disagreement,
                _ => &mut p.control,
            };
            slot.total += 1;
            if labeled {
                slot.labeled += 1;
            } else {
                p.remaining += 1;
            }
            if item.pass == 2 && self.final_decision(&item.item_id) == Some(Decision::Complicated) {
                p.unresolved_complicated += 1;
            }
        }
        p
    }

    /// Resolved decision of a pass-1 item after any second pass:
    /// `Ok(Some(true/false))`, `Ok(None)` if still complicated, or the id of
    /// the item awaiting a label.
    pub fn resolution(&self, item_id: &str) -> std::result::Result<Option<bool>, String> {
        match self.final_decision(item_id) {
            None => Err(item_id.to_string()),
            Some(Decision::Yes) => Ok(Some(true)),
            Some(Decision::No) => Ok(Some(false)),
            Some(Decision::Complicated) => {
                let p2 = format!("{item_id}{PASS2_SUFFIX}");
                match self.final_decision(&p2) {
                    None => Err(p2),
                    Some(Decision::Yes) => Ok(Some(true)),
                    Some(Decision::No) => Ok(Some(false)),
                    Some(Decision::Complicated) => Ok(None),
                }
            }
        }
    }

    /// Curation sheet: item_id, paper_link, displayed_evidence, decision,
    /// notes, notes_2 (latest label per item).
    pub fn export_sheet(&self, criterion: Criterion) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["item_id", "paper_link", "displayed_evidence", "decision", "notes", "notes_2"])
            .expect("in-memory csv");
        for item in self.items_for(criterion) {
            let last = self.labels.iter().rev().find(|l| l.item_id == item.item_id);
            let decision = last
                .map(|l| serde_json::to_value(l.decision).expect("decision").as_str().unwrap_or("").to_string())
                .unwrap_or_default();
            w.write_record([
                item.item_id.as_str(),
                item.paper_link.as_str(),
                item.displayed_evidence.as_deref().unwrap_or(""),
                decision.as_str(),
                last.map_or("", |l| l.notes.as_str()),
                last.map_or("", |l| l.notes_2.as_str()),
            ])
            .expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Curated,
    PresumedAgreement,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldLabel {
    pub pmcid: String,
    pub criterion: Criterion,
    pub truth: bool,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldStandard {
    pub criterion: Criterion,
    pub labels: Vec<GoldLabel>,
    /// Disagreement papers still "complicated" after the second pass.
    pub excluded_complicated: Vec<String>,
    /// Papers where some tool produced no verdict.
    pub excluded_absent: Vec<String>,
    pub rates: RateEstimates,
}

impl GoldStandard {
    pub fn truth(&self) -> BTreeMap<String, bool> {
        self.labels.iter().map(|g| (g.pmcid.clone(), g.truth)).collect()
    }

    pub fn count(&self, provenance: Provenance) -> usize {
        self.labels.iter().filter(|g| g.provenance == provenance).count()
    }
}

/// Curated labels for disagreement papers, presumed labels for unanimous
/// ones. Control labels feed only the PPR/PNR estimate.
pub fn assemble_gold_standard(matrix: &DetectionMatrix, store: &CurationStore) -> Result<GoldStandard> {
    let mut labels = Vec::new();
    let mut excluded_complicated = Vec::new();
    let mut excluded_absent = Vec::new();
    let mut missing = Vec::new();
    for (i, pmcid) in matrix.papers.iter().enumerate() {
        match matrix.row_status(i) {
            RowStatus::Unanimous(v) => labels.push(GoldLabel {
                pmcid: pmcid.clone(),
                criterion: matrix.criterion,
                truth: v,
                provenance: Provenance::PresumedAgreement,
            }),
            RowStatus::Incomplete => excluded_absent.push(pmcid.clone()),
            RowStatus::Disagreement => {
                let id = item_id(matrix.criterion, pmcid);
                if store.item(&id).is_none() {
                    missing.push(id);
                    continue;
                }
                match store.resolution(&id) {
                    Ok(Some(truth)) => labels.push(GoldLabel {
                        pmcid: pmcid.clone(),
                        criterion: matrix.criterion,
                        truth,
                        provenance: Provenance::Curated,
                    }),
                    Ok(None) => excluded_complicated.push(pmcid.clone()),
                    Err(open) => missing.push(open),
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(CurationError::Incomplete { items: missing });
    }
    let controls = store
        .items_for(matrix.criterion)
        .into_iter()
        .filter(|i| i.pass == 1 && i.origin != ItemOrigin::Disagreement)
        .filter_map(|i| {
            store.resolution(&i.item_id).ok().flatten().map(|yes| {
                let presumed_positive = i.origin == ItemOrigin::ControlPositive;
                ControlOutcome {
                    presumed_positive,
                    confirmed: yes == presumed_positive,
                }
            })
        })
        .collect::<Vec<_>>();
    Ok(GoldStandard {
        criterion: matrix.criterion,
        labels,
        excluded_complicated,
        excluded_absent,
        rates: estimate_rates(controls),
    })
}
