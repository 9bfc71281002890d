//! Annotated-record data model, stand-off record ingest/serialization,
//! corpus statistics, and the synthetic-corpus generator.
//!
//! ## Record file format
//!
//! A record file (`*.rec`, UTF-8) is:
//!
//! ```text
//! ID <record id>
//! TEXT <byte length of the raw text>
//! <exactly that many bytes of raw text>
//! SPAN <start> <end> <CATEGORY> <SUBCATEGORY>
//! ...
//! ```
//!
//! A single newline separates the text block from the span lines. Span
//! offsets are **character** offsets over Unicode scalar values (the byte
//! length on the `TEXT` line is a byte count; the two differ for non-ASCII
//! text). Spans are sorted by start and may not overlap. Lines starting
//! with `#` before the `ID` line are ignored, which lets system outputs
//! carry provenance headers. System span files use `SYS` in place of
//! `SPAN`; the loader accepts either.

mod synth;

pub use synth::{generate_synthetic, SynthConfig, DEFAULT_TEMPLATE_SET};

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::errors::{DeidError, Result};
use crate::preprocess::{self, AbbrevList, Sentence, Token};

/// The seven main PHI categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PhiCategory {
    Name,
    Profession,
    Location,
    Age,
    Date,
    Contact,
    Id,
}

impl PhiCategory {
    pub const ALL: [PhiCategory; 7] = [
        PhiCategory::Name,
        PhiCategory::Profession,
        PhiCategory::Location,
        PhiCategory::Age,
        PhiCategory::Date,
        PhiCategory::Contact,
        PhiCategory::Id,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PhiCategory::Name => "NAME",
            PhiCategory::Profession => "PROFESSION",
            PhiCategory::Location => "LOCATION",
            PhiCategory::Age => "AGE",
            PhiCategory::Date => "DATE",
            PhiCategory::Contact => "CONTACT",
            PhiCategory::Id => "ID",
        }
    }
}

impl fmt::Display for PhiCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PhiCategory {
    type Err = DeidError;
    fn from_str(s: &str) -> Result<Self> {
        PhiCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| DeidError::InvalidArgument(format!("unknown category `{s}`")))
    }
}

/// The 22 PHI sub-categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Subcategory {
    Patient,
    Doctor,
    Username,
    Profession,
    Hospital,
    Organization,
    Street,
    City,
    State,
    Country,
    Zip,
    LocationOther,
    Age,
    Date,
    Phone,
    Fax,
    Email,
    Url,
    MedicalRecord,
    HealthPlan,
    License,
    IdNum,
}

impl Subcategory {
    pub const ALL: [Subcategory; 22] = [
        Subcategory::Patient,
        Subcategory::Doctor,
        Subcategory::Username,
        Subcategory::Profession,
        Subcategory::Hospital,
        Subcategory::Organization,
        Subcategory::Street,
        Subcategory::City,
        Subcategory::State,
        Subcategory::Country,
        Subcategory::Zip,
        Subcategory::LocationOther,
        Subcategory::Age,
        Subcategory::Date,
        Subcategory::Phone,
        Subcategory::Fax,
        Subcategory::Email,
        Subcategory::Url,
        Subcategory::MedicalRecord,
        Subcategory::HealthPlan,
        Subcategory::License,
        Subcategory::IdNum,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Subcategory::Patient => "PATIENT",
            Subcategory::Doctor => "DOCTOR",
            Subcategory::Username => "USERNAME",
            Subcategory::Profession => "PROFESSION",
            Subcategory::Hospital => "HOSPITAL",
            Subcategory::Organization => "ORGANIZATION",
            Subcategory::Street => "STREET",
            Subcategory::City => "CITY",
            Subcategory::State => "STATE",
            Subcategory::Country => "COUNTRY",
            Subcategory::Zip => "ZIP",
            Subcategory::LocationOther => "LOCATION-OTHER",
            Subcategory::Age => "AGE",
            Subcategory::Date => "DATE",
            Subcategory::Phone => "PHONE",
            Subcategory::Fax => "FAX",
            Subcategory::Email => "EMAIL",
            Subcategory::Url => "URL",
            Subcategory::MedicalRecord => "MEDICALRECORD",
            Subcategory::HealthPlan => "HEALTHPLAN",
            Subcategory::License => "LICENSE",
            Subcategory::IdNum => "IDNUM",
        }
    }

    /// The main category each sub-category belongs to.
    pub fn category(self) -> PhiCategory {
        use Subcategory::*;
        match self {
            Patient | Doctor | Username => PhiCategory::Name,
            Profession => PhiCategory::Profession,
            Hospital | Organization | Street | City | State | Country | Zip | LocationOther => {
                PhiCategory::Location
            }
            Age => PhiCategory::Age,
            Date => PhiCategory::Date,
            Phone | Fax | Email => PhiCategory::Contact,
            Url | MedicalRecord | HealthPlan | License | IdNum => PhiCategory::Id,
        }
    }

    /// Stable index in [`Subcategory::ALL`] order.
    pub fn index(self) -> usize {
        Subcategory::ALL.iter().position(|&s| s == self).unwrap()
    }
}

impl fmt::Display for Subcategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Subcategory {
    type Err = DeidError;
    fn from_str(s: &str) -> Result<Self> {
        Subcategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| DeidError::InvalidArgument(format!("unknown subcategory `{s}`")))
    }
}

/// A stand-off PHI annotation: character offsets `[start, end)` plus the
/// sub-category (the main category is derived).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PhiSpan {
    pub start: usize,
    pub end: usize,
    pub subcategory: Subcategory,
}

impl PhiSpan {
    pub fn new(start: usize, end: usize, subcategory: Subcategory) -> Self {
        PhiSpan {
            start,
            end,
            subcategory,
        }
    }

    pub fn category(&self) -> PhiCategory {
        self.subcategory.category()
    }

    pub fn overlaps(&self, other: &PhiSpan) -> bool {
        self.start < other.end && other.start < self.end
    }
}

/// One clinical record: raw text, gold spans, and (after pre-processing)
/// tokens and sentences.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub gold: Vec<PhiSpan>,
    pub tokens: Vec<Token>,
    pub sentences: Vec<Sentence>,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>, gold: Vec<PhiSpan>) -> Result<Self> {
        let mut doc = Document {
            id: id.into(),
            text: text.into(),
            gold,
            tokens: Vec::new(),
            sentences: Vec::new(),
        };
        doc.gold.sort_by_key(|s| (s.start, s.end));
        doc.validate_spans()?;
        Ok(doc)
    }

    fn validate_spans(&self) -> Result<()> {
        let len = self.text.chars().count();
        for s in &self.gold {
            if s.start >= s.end || s.end > len {
                return Err(DeidError::SpanOutOfBounds {
                    doc: self.id.clone(),
                    start: s.start,
                    end: s.end,
                    len,
                });
            }
        }
        for w in self.gold.windows(2) {
            if w[0].overlaps(&w[1]) {
                return Err(DeidError::SpanOverlap {
                    doc: self.id.clone(),
                    a_start: w[0].start,
                    a_end: w[0].end,
                    b_start: w[1].start,
                    b_end: w[1].end,
                });
            }
        }
        Ok(())
    }

    /// Slice of the text covered by a span (character offsets).
    pub fn slice(&self, start: usize, end: usize) -> String {
        self.text.chars().skip(start).take(end - start).collect()
    }

    /// Tokenizes and sentence-splits the document in place with the
    /// rule-based splitter.
    pub fn preprocess(&mut self, abbrevs: &AbbrevList, max_sentence_tokens: usize) {
        self.preprocess_with(&preprocess::RuleSplitter {
            abbrevs: abbrevs.clone(),
            max_tokens: max_sentence_tokens,
        });
    }

    /// Tokenizes, then sentence-splits with any [`SentenceSplitter`].
    pub fn preprocess_with(&mut self, splitter: &impl preprocess::SentenceSplitter) {
        self.tokens = preprocess::tokenize(&self.text);
        self.sentences = splitter.split(&mut self.tokens, &self.text);
    }

    /// Tokens belonging to one sentence.
    pub fn sentence_tokens(&self, sentence: &Sentence) -> &[Token] {
        &self.tokens[sentence.first_token..=sentence.last_token]
    }
}

/// Which keyword span lines carry in a record file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpanKind {
    Gold,
    System,
}

impl SpanKind {
    fn keyword(self) -> &'static str {
        match self {
            SpanKind::Gold => "SPAN",
            SpanKind::System => "SYS",
        }
    }
}

/// Parses a record from raw bytes. `name` is used in error messages.
pub fn parse_record(bytes: &[u8], name: &str) -> Result<Document> {
    let mut pos = 0usize;
    let mut line_no = 0usize;
    let next_line = |pos: &mut usize, line_no: &mut usize| -> Result<String> {
        if *pos >= bytes.len() {
            return Err(DeidError::parse(name, *line_no + 1, "unexpected end of file"));
        }
        let rest = &bytes[*pos..];
        let nl = rest.iter().position(|&b| b == b'\n');
        let (line, consumed) = match nl {
            Some(i) => (&rest[..i], i + 1),
            None => (rest, rest.len()),
        };
        *pos += consumed;
        *line_no += 1;
        String::from_utf8(line.to_vec())
            .map_err(|_| DeidError::parse(name, *line_no, "line is not valid UTF-8"))
    };

    // Header comment lines before ID are ignored.
    let id_line = loop {
        let line = next_line(&mut pos, &mut line_no)?;
        if !line.starts_with('#') {
            break line;
        }
    };
    let id = id_line
        .strip_prefix("ID ")
        .ok_or_else(|| DeidError::parse(name, line_no, "expected `ID <id>`"))?
        .to_string();
    if id.is_empty() {
        return Err(DeidError::parse(name, line_no, "empty record id"));
    }

    let text_line = next_line(&mut pos, &mut line_no)?;
    let byte_len: usize = text_line
        .strip_prefix("TEXT ")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| DeidError::parse(name, line_no, "expected `TEXT <byte length>`"))?;
    if pos + byte_len > bytes.len() {
        return Err(DeidError::parse(
            name,
            line_no,
            format!("text block of {byte_len} bytes runs past end of file"),
        ));
    }
    let text = String::from_utf8(bytes[pos..pos + byte_len].to_vec())
        .map_err(|_| DeidError::parse(name, line_no, "text block is not valid UTF-8"))?;
    pos += byte_len;
    if pos < bytes.len() {
        if bytes[pos] != b'\n' {
            return Err(DeidError::parse(
                name,
                line_no,
                "expected newline after text block",
            ));
        }
        pos += 1;
    }

    let mut spans = Vec::new();
    while pos < bytes.len() {
        let line = next_line(&mut pos, &mut line_no)?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split(' ');
        let kw = parts.next().unwrap_or_default();
        if kw != "SPAN" && kw != "SYS" {
            return Err(DeidError::parse(
                name,
                line_no,
                format!("expected `SPAN`/`SYS` line, got `{line}`"),
            ));
        }
        let parse_usize = |s: Option<&str>| -> Result<usize> {
            s.and_then(|v| v.parse().ok())
                .ok_or_else(|| DeidError::parse(name, line_no, "bad span offsets"))
        };
        let start = parse_usize(parts.next())?;
        let end = parse_usize(parts.next())?;
        let cat: PhiCategory = parts
            .next()
            .ok_or_else(|| DeidError::parse(name, line_no, "missing category"))?
            .parse()?;
        let sub: Subcategory = parts
            .next()
            .ok_or_else(|| DeidError::parse(name, line_no, "missing subcategory"))?
            .parse()?;
        if parts.next().is_some() {
            return Err(DeidError::parse(name, line_no, "trailing fields on span line"));
        }
        if sub.category() != cat {
            return Err(DeidError::parse(
                name,
                line_no,
                format!("subcategory {sub} does not belong to category {cat}"),
            ));
        }
        spans.push(PhiSpan::new(start, end, sub));
    }

    for w in spans.windows(2) {
        if w[1].start < w[0].start {
            return Err(DeidError::parse(name, line_no, "span lines not sorted by start"));
        }
    }
    Document::new(id, text, spans)
}

/// Serializes a record in canonical form. `headers` become `#` lines
/// before `ID` (system outputs record provenance there).
pub fn serialize_record(doc: &Document, kind: SpanKind, headers: &[String]) -> Vec<u8> {
    let mut out = Vec::new();
    for h in headers {
        out.extend_from_slice(format!("# {h}\n").as_bytes());
    }
    out.extend_from_slice(format!("ID {}\n", doc.id).as_bytes());
    out.extend_from_slice(format!("TEXT {}\n", doc.text.len()).as_bytes());
    out.extend_from_slice(doc.text.as_bytes());
    out.push(b'\n');
    for s in &doc.gold {
        out.extend_from_slice(
            format!(
                "{} {} {} {} {}\n",
                kind.keyword(),
                s.start,
                s.end,
                s.category(),
                s.subcategory
            )
            .as_bytes(),
        );
    }
    out
}

/// Loads one record file.
pub fn load_record(path: &Path) -> Result<Document> {
    let bytes =
        std::fs::read(path).map_err(|e| DeidError::io(path.display().to_string(), e))?;
    parse_record(&bytes, &path.display().to_string())
}

/// Loads every `*.rec` file in a directory, sorted by file name so corpus
/// order (and everything derived from it) is deterministic.
pub fn load_dir(dir: &Path) -> Result<Vec<Document>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| DeidError::io(dir.display().to_string(), e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "rec"))
        .collect();
    paths.sort();
    paths.iter().map(|p| load_record(p)).collect()
}

/// Writes a corpus as one `<id>.rec` file per document.
pub fn write_dir(dir: &Path, docs: &[Document], kind: SpanKind, headers: &[String]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| DeidError::io(dir.display().to_string(), e))?;
    for doc in docs {
        let path = dir.join(format!("{}.rec", doc.id));
        std::fs::write(&path, serialize_record(doc, kind, headers))
            .map_err(|e| DeidError::io(path.display().to_string(), e))?;
    }
    Ok(())
}

/// Whole-corpus count summary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorpusStats {
    pub note_count: usize,
    pub token_count: usize,
    pub phi_count: usize,
    /// Distinct PHI surface strings (exact, case-sensitive).
    pub unique_phi_count: usize,
    /// Distinct lowercased token strings.
    pub vocabulary_size: usize,
}

/// Computes corpus statistics. Token-derived counts require every
/// document to be pre-processed.
pub fn corpus_stats(docs: &[Document]) -> Result<CorpusStats> {
    let mut token_count = 0;
    let mut phi_count = 0;
    let mut unique_phi = HashSet::new();
    let mut vocab = HashSet::new();
    for doc in docs {
        if doc.tokens.is_empty() && !doc.text.trim().is_empty() {
            return Err(DeidError::NotPreprocessed(doc.id.clone()));
        }
        token_count += doc.tokens.len();
        for t in &doc.tokens {
            vocab.insert(t.text.to_lowercase());
        }
        phi_count += doc.gold.len();
        for s in &doc.gold {
            unique_phi.insert(doc.slice(s.start, s.end));
        }
    }
    Ok(CorpusStats {
        note_count: docs.len(),
        token_count,
        phi_count,
        unique_phi_count: unique_phi.len(),
        vocabulary_size: vocab.len(),
    })
}
