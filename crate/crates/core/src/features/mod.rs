//! Feature extraction for the CRF tagger, plus the 4-bit capital and
//! dictionary codes shared with the neural tagger.
//!
//! Five feature groups are extracted per token (lexical, letter,
//! digit-and-punctuation, morphological, dictionary), each rendered as a
//! string `<group>:<name>[<offset>]=<value>` over the ±2 context window.
//! POS and chunk features are emitted only when a sidecar file provides
//! them. Boolean features are always emitted with an explicit `0`/`1`
//! value.
//!
//! The long-shape mapping is uppercase→`A`, lowercase→`a`, digit→`0`,
//! anything else→`p`, one output character per input character.

mod gazetteer;
mod index;
mod select;

pub use gazetteer::{Gazetteer, GazetteerKind, GazetteerSet};
pub use index::{build_index, FeatureIndex};
pub use select::{greedy_select, GreedySelection, SelectionStep};

use std::collections::HashMap;
use std::path::Path;

use crate::corpus::Document;
use crate::errors::{DeidError, Result};
use crate::preprocess::Token;

/// The five feature groups; ablation drops one at a time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureGroup {
    Lexical,
    Letter,
    DigitPunct,
    Morph,
    Dictionary,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 5] = [
        FeatureGroup::Lexical,
        FeatureGroup::Letter,
        FeatureGroup::DigitPunct,
        FeatureGroup::Morph,
        FeatureGroup::Dictionary,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureGroup::Lexical => "lex",
            FeatureGroup::Letter => "letter",
            FeatureGroup::DigitPunct => "digitpunct",
            FeatureGroup::Morph => "morph",
            FeatureGroup::Dictionary => "gaz",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        FeatureGroup::ALL
            .into_iter()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| DeidError::InvalidArgument(format!("unknown feature group `{s}`")))
    }
}

/// Optional per-token POS/chunk attributes from a sidecar file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PosChunk {
    pub pos: String,
    pub chunk: String,
}

/// Sidecar store: `(document id, document-level token index)` → POS/chunk.
///
/// File format: one line per token, `<doc-id> <token-index> <POS> <CHUNK>`.
#[derive(Debug, Clone, Default)]
pub struct Sidecar {
    map: HashMap<(String, usize), PosChunk>,
}

impl Sidecar {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DeidError::io(path.display().to_string(), e))?;
        let mut map = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(' ').collect();
            if fields.len() != 4 {
                return Err(DeidError::parse(
                    path.display().to_string(),
                    i + 1,
                    "expected `<doc-id> <token-index> <POS> <CHUNK>`",
                ));
            }
            let idx: usize = fields[1].parse().map_err(|_| {
                DeidError::parse(path.display().to_string(), i + 1, "bad token index")
            })?;
            map.insert(
                (fields[0].to_string(), idx),
                PosChunk {
                    pos: fields[2].to_string(),
                    chunk: fields[3].to_string(),
                },
            );
        }
        Ok(Sidecar { map })
    }

    pub fn get(&self, doc_id: &str, token_index: usize) -> Option<&PosChunk> {
        self.map.get(&(doc_id.to_string(), token_index))
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// The four letter-group tests, in code-bit order.
fn letter_bits(token: &str) -> [bool; 4] {
    let has_letter = token.chars().any(|c| c.is_alphabetic());
    let has_capital = token.chars().any(|c| c.is_uppercase());
    let init_capital = token.chars().next().is_some_and(|c| c.is_uppercase());
    let all_capitals = !token.is_empty() && token.chars().all(|c| c.is_uppercase());
    [has_letter, has_capital, init_capital, all_capitals]
}

/// The four dictionary memberships, in code-bit order.
fn dict_bits(token: &str, gazetteers: &GazetteerSet) -> [bool; 4] {
    let lower = token.to_lowercase();
    [
        gazetteers.profession.contains(&lower),
        gazetteers.city.contains(&lower),
        gazetteers.country.contains(&lower),
        gazetteers.state.contains(&lower),
    ]
}

fn bits_to_code(bits: [bool; 4]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// 4-bit capital code, e.g. "Vincent" → `1110`.
pub fn capital_code(token: &str) -> String {
    bits_to_code(letter_bits(token))
}

/// 4-bit dictionary code, e.g. "Vincent" → `0010` with the fixture lists.
pub fn dict_code(token: &str, gazetteers: &GazetteerSet) -> String {
    bits_to_code(dict_bits(token, gazetteers))
}

/// Index of a 4-bit code string in a 16-entry embedding table
/// (first bit is the most significant).
pub fn code_index(code: &str) -> usize {
    code.chars()
        .fold(0, |acc, c| (acc << 1) | usize::from(c == '1'))
}

fn long_shape(token: &str) -> String {
    token
        .chars()
        .map(|c| {
            if c.is_uppercase() {
                'A'
            } else if c.is_lowercase() {
                'a'
            } else if c.is_ascii_digit() {
                '0'
            } else {
                'p'
            }
        })
        .collect()
}

/// Feature extractor configured with gazetteers and an enabled-group set.
pub struct FeatureExtractor<'a> {
    gazetteers: &'a GazetteerSet,
    enabled: Vec<FeatureGroup>,
}

impl<'a> FeatureExtractor<'a> {
    pub fn new(gazetteers: &'a GazetteerSet) -> Self {
        FeatureExtractor {
            gazetteers,
            enabled: FeatureGroup::ALL.to_vec(),
        }
    }

    pub fn with_groups(gazetteers: &'a GazetteerSet, groups: &[FeatureGroup]) -> Self {
        FeatureExtractor {
            gazetteers,
            enabled: groups.to_vec(),
        }
    }

    fn on(&self, g: FeatureGroup) -> bool {
        self.enabled.contains(&g)
    }

    /// `(head, value)` pairs for one token; the window renderer adds the
    /// offset annotation.
    fn pairs(&self, text: &str, attrs: Option<&PosChunk>) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let chars: Vec<char> = text.chars().collect();
        if self.on(FeatureGroup::Lexical) {
            let lower = text.to_lowercase();
            out.push(("lex:lower".into(), lower.clone()));
            // lemma is implemented as lowercase
            out.push(("lex:lemma".into(), lower));
            if let Some(a) = attrs {
                out.push(("lex:pos".into(), a.pos.clone()));
                out.push(("lex:chunk".into(), a.chunk.clone()));
            }
            out.push(("lex:shape".into(), long_shape(text)));
            out.push(("lex:len".into(), chars.len().to_string()));
        }
        if self.on(FeatureGroup::Letter) {
            let bits = letter_bits(text);
            for (name, bit) in [
                "letter:has_letter",
                "letter:has_capital",
                "letter:init_capital",
                "letter:all_capitals",
            ]
            .iter()
            .zip(bits)
            {
                out.push((name.to_string(), if bit { "1" } else { "0" }.into()));
            }
        }
        if self.on(FeatureGroup::DigitPunct) {
            let has_digit = chars.iter().any(|c| c.is_ascii_digit());
            let all_digit = !chars.is_empty() && chars.iter().all(|c| c.is_ascii_digit());
            let has_punct = chars.iter().any(|c| !c.is_alphanumeric());
            let has_alpha = chars.iter().any(|c| c.is_alphabetic());
            let letters_digits =
                has_alpha && has_digit && chars.iter().all(|c| c.is_alphanumeric());
            let digits_punct = has_digit
                && has_punct
                && chars.iter().all(|c| c.is_ascii_digit() || !c.is_alphanumeric());
            for (name, bit) in [
                ("digitpunct:has_digit", has_digit),
                ("digitpunct:all_digit", all_digit),
                ("digitpunct:has_punct", has_punct),
                ("digitpunct:letters_digits", letters_digits),
                ("digitpunct:digits_punct", digits_punct),
            ] {
                out.push((name.to_string(), if bit { "1" } else { "0" }.into()));
            }
        }
        if self.on(FeatureGroup::Morph) {
            for n in [2usize, 3, 4] {
                if chars.len() >= n {
                    let pre: String = chars[..n].iter().collect();
                    let suf: String = chars[chars.len() - n..].iter().collect();
                    out.push((format!("morph:pre{n}"), pre));
                    out.push((format!("morph:suf{n}"), suf));
                }
            }
        }
        if self.on(FeatureGroup::Dictionary) {
            let bits = dict_bits(text, self.gazetteers);
            for (kind, bit) in GazetteerKind::ALL.iter().zip(bits) {
                out.push((
                    format!("gaz:{}", kind.as_str()),
                    if bit { "1" } else { "0" }.into(),
                ));
            }
        }
        out
    }

    /// Offset-0 features of a single token.
    pub fn token_features(&self, text: &str, attrs: Option<&PosChunk>) -> Vec<String> {
        self.pairs(text, attrs)
            .into_iter()
            .map(|(head, value)| format!("{head}[0]={value}"))
            .collect()
    }

    /// Features of token `t` over the ±2 window. Out-of-range offsets emit
    /// a single `BOS`/`EOS` sentinel feature.
    pub fn window_features(
        &self,
        texts: &[&str],
        attrs: &[Option<&PosChunk>],
        t: usize,
    ) -> Vec<String> {
        let mut out = Vec::new();
        for off in -2i32..=2 {
            let pos = t as i64 + i64::from(off);
            let tag = render_offset(off);
            if pos < 0 {
                out.push(format!("bnd:sentinel[{tag}]=BOS"));
            } else if pos as usize >= texts.len() {
                out.push(format!("bnd:sentinel[{tag}]=EOS"));
            } else {
                let p = pos as usize;
                for (head, value) in self.pairs(texts[p], attrs.get(p).copied().flatten()) {
                    out.push(format!("{head}[{tag}]={value}"));
                }
            }
        }
        out
    }
}

fn render_offset(off: i32) -> String {
    if off > 0 {
        format!("+{off}")
    } else {
        off.to_string()
    }
}

/// Window features for every token of every sentence of a pre-processed
/// document: `out[sentence][token]` is that position's feature set.
pub fn document_features(
    doc: &Document,
    extractor: &FeatureExtractor,
    sidecar: Option<&Sidecar>,
) -> Vec<Vec<Vec<String>>> {
    doc.sentences
        .iter()
        .map(|sent| {
            let tokens: &[Token] = doc.sentence_tokens(sent);
            let texts: Vec<&str> = tokens.iter().map(|t| t.text.as_str()).collect();
            let attrs: Vec<Option<&PosChunk>> = (sent.first_token..=sent.last_token)
                .map(|doc_idx| sidecar.and_then(|s| s.get(&doc.id, doc_idx)))
                .collect();
            (0..texts.len())
                .map(|t| extractor.window_features(&texts, &attrs, t))
                .collect()
        })
        .collect()
}
