//! JATS full-text ingestion: body and methods extraction, corpus manifests
//! and reproducible sampling of paper ids.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed XML at byte {offset}: {message}")]
    Xml { offset: u64, message: String },
    #[error("document has no body element")]
    NoBody,
    #[error("no PMC article id found")]
    MissingPmcid,
    #[error("invalid PMC id {0:?}")]
    InvalidPmcid(String),
    #[error("sample of {requested} requested from {available} candidates")]
    SampleSize { requested: usize, available: usize },
    #[error("duplicate PMC id {0} in corpus")]
    DuplicatePmcid(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("bad manifest line {line}: {source}")]
    Manifest {
        line: usize,
        source: serde_json::Error,
    },
}

/// The kind of container a [`Section`] was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionKind {
    Sec,
    Table,
    Figure,
    Boxed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub title: String,
    /// The section's own text: excludes its title and any nested sections.
    pub text: String,
    /// Number of enclosing sections; top-level sections have depth 0.
    pub depth: usize,
    pub kind: SectionKind,
    /// Index of the enclosing section in [`Document::sections`].
    pub parent: Option<usize>,
    /// Byte range of the whole container (title and nested sections
    /// included) within [`Document::full_text`].
    pub span: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub pmcid: String,
    /// All text under `<body>`, in reading order, whitespace collapsed.
    pub full_text: String,
    pub methods_text: String,
    /// Front-matter abstract text. Not part of `full_text`.
    pub abstract_text: String,
    pub sections: Vec<Section>,
    pub source_path: Option<PathBuf>,
    pub pdf_path: Option<PathBuf>,
}

const INLINE_ELEMENTS: &[&[u8]] = &[
    b"italic",
    b"bold",
    b"sup",
    b"sub",
    b"underline",
    b"sc",
    b"monospace",
    b"xref",
    b"ext-link",
    b"uri",
    b"inline-formula",
    b"named-content",
    b"styled-content",
    b"email",
    b"abbrev",
    b"roman",
    b"sans-serif",
    b"strike",
    b"overline",
    b"inline-graphic",
    b"private-char",
    b"x",
];

fn container_kind(name: &[u8]) -> Option<SectionKind> {
    match name {
        b"sec" | b"app" | b"ack" => Some(SectionKind::Sec),
        b"table-wrap" => Some(SectionKind::Table),
        b"fig" => Some(SectionKind::Figure),
        b"boxed-text" => Some(SectionKind::Boxed),
        _ => None,
    }
}

fn local(name: &[u8]) -> &[u8] {
    match name.iter().rposition(|b| *b == b':') {
        Some(i) => &name[i + 1..],
        None => name,
    }
}

/// Appends text with runs of whitespace collapsed to one space and no
/// leading or trailing whitespace.
#[derive(Debug, Default)]
struct Collapser {
    out: String,
    pending_space: bool,
}

impl Collapser {
    fn push(&mut self, text: &str) {
        for c in text.chars() {
            if c.is_whitespace() {
                self.pending_space = !self.out.is_empty();
            } else {
                if self.pending_space {
                    self.out.push(' ');
                    self.pending_space = false;
                }
                self.out.push(c);
            }
        }
    }

    fn boundary(&mut self) {
        self.pending_space = !self.out.is_empty();
    }

    /// Offset at which the next non-space character will land.
    fn next_offset(&self) -> usize {
        self.out.len() + usize::from(self.pending_space)
    }
}

struct OpenSection {
    index: usize,
    text: Collapser,
    title: Collapser,
    in_title: usize,
    start: usize,
    seen_title: bool,
}

fn xml_err(reader: &Reader<&[u8]>, e: impl std::fmt::Display) -> CorpusError {
    CorpusError::Xml {
        offset: reader.error_position(),
        message: e.to_string(),
    }
}

/// Normalizes "PMC123", "pmc123" or "123" to "PMC123".
pub fn normalize_pmcid(raw: &str) -> Result<String, CorpusError> {
    let t = raw.trim();
    let digits = t
        .strip_prefix("PMC")
        .or_else(|| t.strip_prefix("pmc"))
        .unwrap_or(t);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(CorpusError::InvalidPmcid(raw.to_string()));
    }
    Ok(format!("PMC{digits}"))
}

/// Parses a JATS article. The PMC id is read from
/// `<article-id pub-id-type="pmc">` (or `pmcid`).
pub fn parse_document(xml: &str) -> Result<Document, CorpusError> {
    parse_document_with_fallback(xml, None)
}

/// As [`parse_document`], falling back to `fallback_id` (e.g. the file stem)
/// when the XML carries no PMC id.
pub fn parse_document_with_fallback(
    xml: &str,
    fallback_id: Option<&str>,
) -> Result<Document, CorpusError> {
    let mut reader = Reader::from_str(xml);
    reader.config_mut().check_end_names = true;

    let mut full = Collapser::default();
    let mut abstract_text = Collapser::default();
    let mut sections: Vec<Section> = Vec::new();
    let mut open: Vec<OpenSection> = Vec::new();
    // Element stack depth at which body / abstract started.
    let mut depth = 0usize;
    let mut body_depth: Option<usize> = None;
    let mut abstract_depth: Option<usize> = None;
    let mut seen_body = false;
    let mut article_id: Option<String> = None;
    let mut in_pmc_id = false;
    let mut pmc_id_buf = String::new();
    // Open-element stack for sections and titles: (depth, is_container, is_title)
    let mut marks: Vec<(usize, bool, bool)> = Vec::new();

    let push_text = |text: &str,
                         body: bool,
                         abs: bool,
                         full: &mut Collapser,
                         abstract_text: &mut Collapser,
                         open: &mut Vec<OpenSection>| {
        if body {
            full.push(text);
            if let Some(sec) = open.last_mut() {
                if sec.in_title > 0 {
                    sec.title.push(text);
                } else {
                    sec.text.push(text);
                }
            }
        } else if abs {
            abstract_text.push(text);
        }
    };

    loop {
        let event = reader.read_event().map_err(|e| xml_err(&reader, e))?;
        match event {
            Event::Start(e) => {
                depth += 1;
                let name = e.name();
                let name = local(name.as_ref());
                handle_open(
                    name,
                    &e,
                    depth,
                    &mut body_depth,
                    &mut abstract_depth,
                    &mut seen_body,
                    &mut in_pmc_id,
                    article_id.is_some(),
                    &mut full,
                    &mut abstract_text,
                    &mut sections,
                    &mut open,
                    &mut marks,
                );
            }
            Event::Empty(e) => {
                let name = e.name();
                let name = local(name.as_ref());
                if body_depth.is_some() && !INLINE_ELEMENTS.contains(&name) {
                    full.boundary();
                    if let Some(sec) = open.last_mut() {
                        sec.text.boundary();
                    }
                }
                if name == b"body" && body_depth.is_none() {
                    seen_body = true;
                }
            }
            Event::End(e) => {
                let name = e.name();
                let name = local(name.as_ref());
                if in_pmc_id && name == b"article-id" {
                    in_pmc_id = false;
                    article_id = Some(pmc_id_buf.trim().to_string());
                }
                let in_body = body_depth.is_some();
                if in_body && !INLINE_ELEMENTS.contains(&name) {
                    full.boundary();
                    if let Some(sec) = open.last_mut() {
                        if sec.in_title > 0 {
                            sec.title.boundary();
                        } else {
                            sec.text.boundary();
                        }
                    }
                }
                if abstract_depth.is_some() && !INLINE_ELEMENTS.contains(&name) {
                    abstract_text.boundary();
                }
                while let Some(&(d, is_container, is_title)) = marks.last() {
                    if d != depth {
                        break;
                    }
                    marks.pop();
                    if is_title {
                        if let Some(sec) = open.last_mut() {
                            sec.in_title -= 1;
                        }
                    }
                    if is_container {
                        if let Some(sec) = open.pop() {
                            let end = full.out.len();
                            let start = sec.start.min(end);
                            let s = &mut sections[sec.index];
                            s.title = sec.title.out;
                            s.text = sec.text.out;
                            s.span = (start, end);
                        }
                    }
                }
                if body_depth == Some(depth) {
                    body_depth = None;
                }
                if abstract_depth == Some(depth) {
                    abstract_depth = None;
                }
                depth = depth.saturating_sub(1);
            }
            Event::Text(t) => {
                let text = t.xml10_content().map_err(|e| xml_err(&reader, e))?;
                if in_pmc_id {
                    pmc_id_buf.push_str(&text);
                }
                push_text(
                    &text,
                    body_depth.is_some(),
                    abstract_depth.is_some(),
                    &mut full,
                    &mut abstract_text,
                    &mut open,
                );
            }
            Event::CData(t) => {
                let text = String::from_utf8_lossy(&t).into_owned();
                push_text(
                    &text,
                    body_depth.is_some(),
                    abstract_depth.is_some(),
                    &mut full,
                    &mut abstract_text,
                    &mut open,
                );
            }
            Event::GeneralRef(r) => {
                let resolved: Option<String> = if r.is_char_ref() {
                    r.resolve_char_ref()
                        .map_err(|e| xml_err(&reader, e))?
                        .map(String::from)
                } else {
                    let name = r.decode().map_err(|e| xml_err(&reader, e))?;
                    quick_xml::escape::resolve_predefined_entity(&name).map(String::from)
                };
                if let Some(text) = resolved {
                    if in_pmc_id {
                        pmc_id_buf.push_str(&text);
                    }
                    push_text(
                        &text,
                        body_depth.is_some(),
                        abstract_depth.is_some(),
                        &mut full,
                        &mut abstract_text,
                        &mut open,
                    );
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if depth != 0 {
        return Err(CorpusError::Xml {
            offset: xml.len() as u64,
            message: "unexpected end of input inside an open element".into(),
        });
    }
    if !seen_body {
        return Err(CorpusError::NoBody);
    }

    let pmcid = match (article_id, fallback_id) {
        (Some(id), _) => normalize_pmcid(&id)?,
        (None, Some(f)) => normalize_pmcid(f)?,
        (None, None) => return Err(CorpusError::MissingPmcid),
    };

    // spans were recorded against the un-trimmed builder; trailing pending
    // space never lands in `out`, so spans are already within bounds.
    let full_text = full.out;
    for s in &mut sections {
        s.span.1 = s.span.1.min(full_text.len());
        s.span.0 = s.span.0.min(s.span.1);
    }
    let mut doc = Document {
        pmcid,
        full_text,
        methods_text: String::new(),
        abstract_text: abstract_text.out,
        sections,
        source_path: None,
        pdf_path: None,
    };
    doc.methods_text = extract_methods_text(&doc);
    Ok(doc)
}

#[allow(clippy::too_many_arguments)]
fn handle_open(
    name: &[u8],
    e: &BytesStart<'_>,
    depth: usize,
    body_depth: &mut Option<usize>,
    abstract_depth: &mut Option<usize>,
    seen_body: &mut bool,
    in_pmc_id: &mut bool,
    have_id: bool,
    full: &mut Collapser,
    abstract_text: &mut Collapser,
    sections: &mut Vec<Section>,
    open: &mut Vec<OpenSection>,
    marks: &mut Vec<(usize, bool, bool)>,
) {
    match name {
        b"body" if body_depth.is_none() && abstract_depth.is_none() => {
            *body_depth = Some(depth);
            *seen_body = true;
            return;
        }
        b"abstract" if body_depth.is_none() && abstract_depth.is_none() => {
            *abstract_depth = Some(depth);
            abstract_text.boundary();
            return;
        }
        b"article-id" if !have_id => {
            let is_pmc = e.attributes().flatten().any(|a| {
                local(a.key.as_ref()) == b"pub-id-type"
                    && matches!(a.value.as_ref(), b"pmc" | b"pmcid")
            });
            *in_pmc_id = is_pmc;
            return;
        }
        _ => {}
    }
    if abstract_depth.is_some() && !INLINE_ELEMENTS.contains(&name) {
        abstract_text.boundary();
    }
    if body_depth.is_none() {
        return;
    }
    if !INLINE_ELEMENTS.contains(&name) {
        full.boundary();
        if let Some(sec) = open.last_mut() {
            if sec.in_title > 0 {
                sec.title.boundary();
            } else {
                sec.text.boundary();
            }
        }
    }
    if let Some(kind) = container_kind(name) {
        let index = sections.len();
        sections.push(Section {
            title: String::new(),
            text: String::new(),
            depth: open.len(),
            kind,
            parent: open.last().map(|s| s.index),
            span: (0, 0),
        });
        open.push(OpenSection {
            index,
            text: Collapser::default(),
            title: Collapser::default(),
            in_title: 0,
            start: full.next_offset(),
            seen_title: false,
        });
        marks.push((depth, true, false));
        return;
    }
    // The first <title> (or <label> of a table/figure) directly inside a
    // container names it.
    if let Some(sec) = open.last_mut() {
        let direct_child = marks.last().is_some_and(|m| m.0 + 1 == depth && m.1);
        let names_container = match name {
            b"title" => true,
            b"label" => sections[sec.index].kind != SectionKind::Sec,
            _ => false,
        };
        if direct_child && names_container && !sec.seen_title {
            sec.seen_title = true;
            sec.in_title += 1;
            marks.push((depth, false, true));
        }
    }
}

const METHOD_TITLE_WORDS: &[&str] = &["method", "procedure"];

/// True when a section title marks a methods section.
pub fn is_methods_title(title: &str) -> bool {
    let lower = title.to_lowercase();
    METHOD_TITLE_WORDS.iter().any(|w| lower.contains(w))
}

/// Indices of sections whose title names a methods section, together with
/// every section nested under one.
pub fn methods_section_indices(doc: &Document) -> Vec<usize> {
    let mut selected = vec![false; doc.sections.len()];
    for (i, s) in doc.sections.iter().enumerate() {
        let parent_selected = s.parent.is_some_and(|p| selected[p]);
        selected[i] = parent_selected || is_methods_title(&s.title);
    }
    selected
        .iter()
        .enumerate()
        .filter_map(|(i, &s)| s.then_some(i))
        .collect()
}

/// Concatenated text of every methods section and its subsections, in
/// document order. Empty when no title matches.
pub fn extract_methods_text(doc: &Document) -> String {
    methods_section_indices(doc)
        .into_iter()
        .map(|i| doc.sections[i].text.as_str())
        .filter(|t| !t.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Draws `n` distinct ids uniformly without replacement. The same seed always
/// yields the same selection in the same order.
pub fn sample_corpus(candidates: &[String], n: usize, seed: u64) -> Result<Vec<String>, CorpusError> {
    if n > candidates.len() {
        return Err(CorpusError::SampleSize {
            requested: n,
            available: candidates.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(rand::seq::index::sample(&mut rng, candidates.len(), n)
        .into_iter()
        .map(|i| candidates[i].clone())
        .collect())
}

/// Keeps ids starting with `prefix` (e.g. `"PMC008"`).
pub fn select_by_prefix<'a>(ids: impl IntoIterator<Item = &'a String>, prefix: &str) -> Vec<String> {
    ids.into_iter()
        .filter(|id| id.starts_with(prefix))
        .cloned()
        .collect()
}

/// One line of `corpus.ndjson`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub pmcid: String,
    pub source_path: PathBuf,
    pub has_methods: bool,
    pub n_sections: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pdf_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Corpus {
    pub documents: Vec<Document>,
    pub sample_seed: Option<u64>,
    pub selection_rule: String,
}

/// Result of ingesting a directory.
#[derive(Debug, Default)]
pub struct Ingest {
    pub corpus: Corpus,
    /// Files that failed to parse, with the reason. They are excluded.
    pub excluded: Vec<(PathBuf, String)>,
}

impl Corpus {
    /// Parses every `.xml` file in `dir` (not recursive), in parallel.
    /// Failing files are reported in [`Ingest::excluded`]; a `.pdf` with the
    /// same stem is recorded as the document's PDF path.
    pub fn ingest_dir(dir: &Path) -> Result<Ingest, CorpusError> {
        let io = |source| CorpusError::Io {
            path: dir.to_path_buf(),
            source,
        };
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("xml")))
            .collect();
        paths.sort();

        let parsed: Vec<(PathBuf, Result<Document, String>)> = paths
            .into_par_iter()
            .map(|path| {
                let res = fs::read_to_string(&path)
                    .map_err(|e| e.to_string())
                    .and_then(|xml| {
                        let stem = path.file_stem().and_then(|s| s.to_str());
                        parse_document_with_fallback(&xml, stem).map_err(|e| e.to_string())
                    })
                    .map(|mut doc| {
                        let pdf = path.with_extension("pdf");
                        doc.pdf_path = pdf.exists().then_some(pdf);
                        doc.source_path = Some(path.clone());
                        doc
                    });
                (path, res)
            })
            .collect();

        let mut ingest = Ingest::default();
        let mut seen = BTreeSet::new();
        for (path, res) in parsed {
            match res {
                Ok(doc) => {
                    if !seen.insert(doc.pmcid.clone()) {
                        return Err(CorpusError::DuplicatePmcid(doc.pmcid));
                    }
                    ingest.corpus.documents.push(doc);
                }
                Err(e) => {
                    tracing::warn!(path = %path.display(), error = %e, "excluding document");
                    ingest.excluded.push((path, e));
                }
            }
        }
        ingest.corpus.documents.sort_by(|a, b| a.pmcid.cmp(&b.pmcid));
        ingest.corpus.selection_rule = format!("all .xml files in {}", dir.display());
        Ok(ingest)
    }

    /// Keeps a seeded random sample of `n` documents.
    pub fn sample(&mut self, n: usize, seed: u64) -> Result<(), CorpusError> {
        let ids: Vec<String> = self.documents.iter().map(|d| d.pmcid.clone()).collect();
        let chosen: BTreeSet<String> = sample_corpus(&ids, n, seed)?.into_iter().collect();
        self.documents.retain(|d| chosen.contains(&d.pmcid));
        self.sample_seed = Some(seed);
        self.selection_rule = format!("{}; simple random sample of {n}", self.selection_rule);
        Ok(())
    }

    pub fn get(&self, pmcid: &str) -> Option<&Document> {
        self.documents
            .binary_search_by(|d| d.pmcid.as_str().cmp(pmcid))
            .ok()
            .map(|i| &self.documents[i])
    }

    pub fn manifest(&self) -> Vec<ManifestEntry> {
        self.documents
            .iter()
            .map(|d| ManifestEntry {
                pmcid: d.pmcid.clone(),
                source_path: d.source_path.clone().unwrap_or_default(),
                has_methods: !d.methods_text.is_empty(),
                n_sections: d.sections.len(),
                pdf_path: d.pdf_path.clone(),
            })
            .collect()
    }

    pub fn write_manifest(&self, path: &Path) -> Result<(), CorpusError> {
        let io = |source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut out = Vec::new();
        for entry in self.manifest() {
            serde_json::to_writer(&mut out, &entry).expect("manifest entries serialize");
            out.push(b'\n');
        }
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io)?;
        }
        fs::File::create(path)
            .and_then(|mut f| f.write_all(&out))
            .map_err(io)
    }
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>, CorpusError> {
    let file = fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut entries = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        entries.push(
            serde_json::from_str(&line).map_err(|source| CorpusError::Manifest { line: i + 1, source })?,
        );
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn article(body: &str) -> String {
        format!(
            r#"<?xml version="1.0"?><article><front><article-meta><article-id pub-id-type="pmc">8000001</article-id><abstract><p>Short abstract.</p></abstract></article-meta></front><body>{body}</body></article>"#
        )
    }

    #[test]
    fn paragraphs_join_with_single_space() {
        let doc = parse_document(&article("<p>A.</p><p>B.</p>")).unwrap();
        assert_eq!(doc.full_text, "A. B.");
        assert_eq!(doc.pmcid, "PMC8000001");
        assert_eq!(doc.abstract_text, "Short abstract.");
    }

    #[test]
    fn inline_markup_does_not_split_words() {
        let doc = parse_document(&article("<p>gene <italic>Tp</italic>53 and   x<sup>2</sup>\n</p>")).unwrap();
        assert_eq!(doc.full_text, "gene Tp53 and x2");
    }

    #[test]
    fn entities_are_resolved() {
        let doc = parse_document(&article("<p>A &amp; B &#x2013; C&#8805;1</p>")).unwrap();
        assert_eq!(doc.full_text, "A & B \u{2013} C\u{2265}1");
    }

    #[test]
    fn missing_body_is_an_error() {
        let xml = r#"<article><front><article-meta><article-id pub-id-type="pmc">1</article-id></article-meta></front></article>"#;
        assert!(matches!(parse_document(xml), Err(CorpusError::NoBody)));
    }

    #[test]
    fn malformed_xml_reports_offset() {
        let err = parse_document("<article><body><p>open</body></article>").unwrap_err();
        match err {
            CorpusError::Xml { offset, .. } => assert!(offset > 0),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_document("<article><body><p>x</p>"),
            Err(CorpusError::Xml { .. })
        ));
    }

    #[test]
    fn pmcid_fallback_and_validation() {
        let xml = "<article><body><p>x</p></body></article>";
        assert!(matches!(parse_document(xml), Err(CorpusError::MissingPmcid)));
        assert_eq!(parse_document_with_fallback(xml, Some("PMC0080001")).unwrap().pmcid, "PMC0080001");
        assert!(parse_document_with_fallback(xml, Some("paper-7")).is_err());
        assert_eq!(normalize_pmcid("pmc42").unwrap(), "PMC42");
    }

    #[test]
    fn sections_nest_with_depth() {
        let doc = parse_document(&article(
            "<sec><title>Introduction</title><p>Intro text.</p></sec>\
             <sec><title>Materials and Methods</title><p>We did X.</p>\
               <sec><title>Statistics</title><p>We used R.</p></sec><p>After.</p></sec>\
             <sec><title>Results</title><p>It worked.</p></sec>",
        ))
        .unwrap();
        let titles: Vec<_> = doc.sections.iter().map(|s| (s.title.as_str(), s.depth)).collect();
        assert_eq!(
            titles,
            [("Introduction", 0), ("Materials and Methods", 0), ("Statistics", 1), ("Results", 0)]
        );
        assert_eq!(doc.sections[1].text, "We did X. After.");
        assert_eq!(doc.sections[2].parent, Some(1));
        assert_eq!(doc.methods_text, "We did X. After. We used R.");
        let (s, e) = doc.sections[1].span;
        assert_eq!(&doc.full_text[s..e], "Materials and Methods We did X. Statistics We used R. After.");
    }

    #[test]
    fn methods_title_matching() {
        let doc = parse_document(&article(
            "<sec><title>Methodology</title><p>one</p></sec>\
             <sec><title>METHODS</title><p>two</p></sec>\
             <sec><title>Experimental Procedures</title><p>three</p></sec>\
             <sec><title>Results</title><p>four</p></sec>",
        ))
        .unwrap();
        assert_eq!(doc.methods_text, "one two three");
        let none = parse_document(&article("<sec><title>Results</title><p>x</p></sec>")).unwrap();
        assert_eq!(none.methods_text, "");
    }

    #[test]
    fn tables_are_sections_with_labels() {
        let doc = parse_document(&article(
            "<sec><title>Methods</title><p>See table.</p>\
             <table-wrap><label>Table 1</label><caption><p>Trials</p></caption>\
             <table><tr><td>NCT01234567</td></tr></table></table-wrap></sec>",
        ))
        .unwrap();
        let t = &doc.sections[1];
        assert_eq!((t.kind, t.depth, t.title.as_str()), (SectionKind::Table, 1, "Table 1"));
        assert!(doc.methods_text.contains("NCT01234567"));
        assert!(doc.full_text.contains("Trials NCT01234567"));
    }

    #[test]
    fn exhaustive_sample_is_the_candidate_set() {
        let c: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
        let mut s = sample_corpus(&c, 3, 17).unwrap();
        s.sort();
        assert_eq!(s, c);
        assert!(matches!(sample_corpus(&c, 4, 0), Err(CorpusError::SampleSize { .. })));
    }
}
