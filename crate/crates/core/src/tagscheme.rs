//! BIOEU label codec: aligning character-offset spans to per-token labels
//! and decoding label sequences back to spans.
//!
//! Encoding is strict — a span whose boundaries do not coincide with token
//! boundaries raises a misalignment error (the signal that the tokenizer
//! left an entity glued to its neighbors). Decoding is lenient: well-formed
//! `U` and `B (I)* E` runs become spans, and anything ill-formed is
//! repaired by merging maximal same-subcategory runs. Repair favors recall,
//! which is the right trade for de-identification.

use std::fmt;
use std::str::FromStr;

use crate::corpus::{Document, PhiSpan, Subcategory};
use crate::errors::{DeidError, Result};
use crate::preprocess::Token;

/// Label prefix: position of a token within an entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Prefix {
    Begin,
    Inside,
    End,
    Unit,
}

impl Prefix {
    pub const ALL: [Prefix; 4] = [Prefix::Begin, Prefix::Inside, Prefix::End, Prefix::Unit];

    fn letter(self) -> char {
        match self {
            Prefix::Begin => 'B',
            Prefix::Inside => 'I',
            Prefix::End => 'E',
            Prefix::Unit => 'U',
        }
    }
}

/// A BIOEU label: `O`, or a prefix plus a subcategory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Outside,
    Tagged(Prefix, Subcategory),
}

impl Label {
    pub fn subcategory(self) -> Option<Subcategory> {
        match self {
            Label::Outside => None,
            Label::Tagged(_, sub) => Some(sub),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Outside => f.write_str("O"),
            Label::Tagged(p, sub) => write!(f, "{}-{}", p.letter(), sub),
        }
    }
}

impl FromStr for Label {
    type Err = DeidError;
    fn from_str(s: &str) -> Result<Self> {
        if s == "O" {
            return Ok(Label::Outside);
        }
        let (p, sub) = s
            .split_once('-')
            .ok_or_else(|| DeidError::InvalidArgument(format!("bad label `{s}`")))?;
        let prefix = match p {
            "B" => Prefix::Begin,
            "I" => Prefix::Inside,
            "E" => Prefix::End,
            "U" => Prefix::Unit,
            _ => return Err(DeidError::InvalidArgument(format!("bad label prefix `{s}`"))),
        };
        Ok(Label::Tagged(prefix, sub.parse()?))
    }
}

/// An ordered label set with id lookup. Id 0 is always `O` for the full
/// alphabet; tie-breaking in the decoders leans on label ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelAlphabet {
    labels: Vec<Label>,
}

impl LabelAlphabet {
    /// The full BIOEU alphabet over all 22 subcategories: 4 × 22 + 1 = 89.
    pub fn full() -> Self {
        let mut labels = vec![Label::Outside];
        for sub in Subcategory::ALL {
            for p in Prefix::ALL {
                labels.push(Label::Tagged(p, sub));
            }
        }
        LabelAlphabet { labels }
    }

    pub fn from_labels(labels: Vec<Label>) -> Self {
        LabelAlphabet { labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, id: usize) -> Label {
        self.labels[id]
    }

    pub fn id(&self, label: Label) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }
}

/// Encodes gold spans as per-token BIOEU labels for one sentence.
///
/// Every span must start and end exactly at token boundaries; otherwise a
/// misalignment error carrying the offending span is returned.
pub fn encode(tokens: &[Token], spans: &[PhiSpan]) -> Result<Vec<Label>> {
    let mut labels = vec![Label::Outside; tokens.len()];
    for span in spans {
        let covered: Vec<usize> = tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| t.start >= span.start && t.end <= span.end)
            .map(|(i, _)| i)
            .collect();
        let misalign = || DeidError::Misalignment {
            start: span.start,
            end: span.end,
            subcategory: span.subcategory.as_str().to_string(),
        };
        if covered.is_empty() {
            return Err(misalign());
        }
        let first = covered[0];
        let last = *covered.last().unwrap();
        if tokens[first].start != span.start || tokens[last].end != span.end {
            return Err(misalign());
        }
        // a token straddling the span boundary also means misalignment
        if tokens
            .iter()
            .any(|t| t.start < span.end && t.end > span.start && !(t.start >= span.start && t.end <= span.end))
        {
            return Err(misalign());
        }
        if first == last {
            labels[first] = Label::Tagged(Prefix::Unit, span.subcategory);
        } else {
            labels[first] = Label::Tagged(Prefix::Begin, span.subcategory);
            for &i in &covered[1..covered.len() - 1] {
                labels[i] = Label::Tagged(Prefix::Inside, span.subcategory);
            }
            labels[last] = Label::Tagged(Prefix::End, span.subcategory);
        }
    }
    Ok(labels)
}

/// Decodes per-token labels back to spans.
///
/// Well-formed `U` and `B (I)* E` runs become spans directly. Leftover
/// ill-formed positions are repaired: each maximal run of consecutive
/// unconsumed non-`O` labels sharing one subcategory becomes a single
/// span, splitting at every subcategory change.
pub fn decode(labels: &[Label], tokens: &[Token]) -> Result<Vec<PhiSpan>> {
    if labels.len() != tokens.len() {
        return Err(DeidError::LengthMismatch {
            what: "labels vs tokens",
            left: labels.len(),
            right: tokens.len(),
        });
    }
    let n = labels.len();
    // pass 1: well-formed units
    let mut well_formed: Vec<Option<(usize, Subcategory)>> = vec![None; n];
    let mut consumed = vec![false; n];
    let mut t = 0;
    while t < n {
        match labels[t] {
            Label::Tagged(Prefix::Unit, sub) => {
                well_formed[t] = Some((t, sub));
                consumed[t] = true;
                t += 1;
            }
            Label::Tagged(Prefix::Begin, sub) => {
                let mut j = t + 1;
                while j < n && labels[j] == Label::Tagged(Prefix::Inside, sub) {
                    j += 1;
                }
                if j < n && labels[j] == Label::Tagged(Prefix::End, sub) {
                    well_formed[t] = Some((j, sub));
                    for c in consumed.iter_mut().take(j + 1).skip(t) {
                        *c = true;
                    }
                    t = j + 1;
                } else {
                    t += 1;
                }
            }
            _ => t += 1,
        }
    }
    // pass 2: emit in positional order, repairing leftovers
    let mut out = Vec::new();
    let mut t = 0;
    while t < n {
        if let Some((end, sub)) = well_formed[t] {
            out.push(PhiSpan::new(tokens[t].start, tokens[end].end, sub));
            t = end + 1;
            continue;
        }
        match labels[t] {
            Label::Tagged(_, sub) if !consumed[t] => {
                let mut j = t;
                while j + 1 < n
                    && !consumed[j + 1]
                    && labels[j + 1].subcategory() == Some(sub)
                {
                    j += 1;
                }
                out.push(PhiSpan::new(tokens[t].start, tokens[j].end, sub));
                t = j + 1;
            }
            _ => t += 1,
        }
    }
    Ok(out)
}

/// Encodes every sentence of a pre-processed document.
pub fn encode_document(doc: &Document) -> Result<Vec<Vec<Label>>> {
    doc.sentences
        .iter()
        .map(|sent| {
            let tokens = doc.sentence_tokens(sent);
            let spans: Vec<PhiSpan> = doc
                .gold
                .iter()
                .filter(|s| s.start < sent.end && s.end > sent.start)
                .copied()
                .collect();
            encode(tokens, &spans)
        })
        .collect()
}

/// Decodes per-sentence label sequences and merges the spans.
pub fn decode_document(doc: &Document, labels: &[Vec<Label>]) -> Result<Vec<PhiSpan>> {
    let mut out = Vec::new();
    for (sent, sent_labels) in doc.sentences.iter().zip(labels) {
        out.extend(decode(sent_labels, doc.sentence_tokens(sent))?);
    }
    Ok(out)
}
