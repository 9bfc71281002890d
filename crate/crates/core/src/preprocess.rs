//! Tokenization and rule-based sentence detection.
//!
//! Clinical records glue entity tokens to ordinary tokens ("09/14/2067CPT"),
//! so the tokenizer first splits on whitespace and punctuation, then
//! recursively splits every candidate at the boundaries of five pattern
//! families: letter|digit, digit|letter, UPPER-run|TitleCase, lower|Upper,
//! and embedded DATE / PHONE / EMAIL patterns. Punctuation internal to a
//! DATE / PHONE / EMAIL match is protected so those entities survive as
//! single tokens.
//!
//! All offsets are character offsets over Unicode scalar values. The pattern
//! families themselves are ASCII (letters `[A-Za-z]`, digits `[0-9]`); the
//! base punctuation split uses Unicode alphanumeric classification.
//!
//! Splitting order is fixed: whitespace, then punctuation (with pattern
//! protection), then recursive family splits.

use std::collections::HashSet;

/// A token with exact character offsets into the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
    /// Index of the sentence this token belongs to; filled by
    /// [`split_sentences`], `usize::MAX` until then.
    pub sentence_index: usize,
}

/// A sentence: an inclusive token index range plus its character span.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub first_token: usize,
    pub last_token: usize,
    pub start: usize,
    pub end: usize,
}

/// Default cap on sentence length in tokens; longer runs are force-split.
pub const DEFAULT_MAX_SENTENCE_TOKENS: usize = 200;

const BUNDLED_ABBREVIATIONS: &str = include_str!("data/abbreviations.txt");

/// Abbreviation list used by the sentence splitter. Entries are matched
/// case-insensitively against `<previous token>.`.
#[derive(Debug, Clone)]
pub struct AbbrevList {
    entries: HashSet<String>,
}

impl AbbrevList {
    /// The list bundled with the toolkit (Dr., Mr., Mrs., Ms., St., vs.,
    /// e.g., i.e., and friends).
    pub fn bundled() -> Self {
        Self::from_text(BUNDLED_ABBREVIATIONS)
    }

    /// Parses a list: one entry per line, `#` comments and blanks ignored.
    pub fn from_text(text: &str) -> Self {
        let entries = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| l.to_lowercase())
            .collect();
        AbbrevList { entries }
    }

    fn contains(&self, word_with_period: &str) -> bool {
        self.entries.contains(&word_with_period.to_lowercase())
    }
}

/// A pattern match inside a candidate chunk, in chunk-relative char offsets.
#[derive(Debug, Clone, Copy)]
struct PatMatch {
    start: usize,
    end: usize,
}

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// DATE: `\d{1,2}([/-])(\d{1,2}\1)?\d{2,4}` with greedy backtracking.
fn match_date(chars: &[char], i: usize) -> Option<usize> {
    let digits_at = |p: usize, n: usize| -> bool {
        p + n <= chars.len() && chars[p..p + n].iter().all(|c| c.is_ascii_digit())
    };
    for l1 in [2usize, 1] {
        if !digits_at(i, l1) {
            continue;
        }
        let p = i + l1;
        if p >= chars.len() || (chars[p] != '/' && chars[p] != '-') {
            continue;
        }
        let sep = chars[p];
        let after_sep = p + 1;
        // Optional middle group `\d{1,2}\1`, greedy: present before absent.
        let mut group_choices = Vec::with_capacity(3);
        for l2 in [2usize, 1] {
            if digits_at(after_sep, l2)
                && after_sep + l2 < chars.len()
                && chars[after_sep + l2] == sep
            {
                group_choices.push(after_sep + l2 + 1);
            }
        }
        group_choices.push(after_sep);
        for tail_start in group_choices {
            for l3 in [4usize, 3, 2] {
                if digits_at(tail_start, l3) {
                    return Some(tail_start + l3);
                }
            }
        }
    }
    None
}

/// PHONE core: `\d{3}\D{0,2}\d{3}\D{0,2}\d{4}`. The pattern's leading `\D`
/// is treated as context: the char before `i` must be a non-digit. It is
/// also applied at string start (no prefix available), a documented
/// deviation from the literal pattern.
fn match_phone(chars: &[char], i: usize) -> Option<usize> {
    if i > 0 && chars[i - 1].is_ascii_digit() {
        return None;
    }
    let digits_at = |p: usize, n: usize| -> bool {
        p + n <= chars.len() && chars[p..p + n].iter().all(|c| c.is_ascii_digit())
    };
    let nondigits_at = |p: usize, n: usize| -> bool {
        p + n <= chars.len() && chars[p..p + n].iter().all(|c| !c.is_ascii_digit())
    };
    if !digits_at(i, 3) {
        return None;
    }
    for k1 in [2usize, 1, 0] {
        let p = i + 3;
        if !nondigits_at(p, k1) || !digits_at(p + k1, 3) {
            continue;
        }
        for k2 in [2usize, 1, 0] {
            let q = p + k1 + 3;
            if nondigits_at(q, k2) && digits_at(q + k2, 4) {
                return Some(q + k2 + 4);
            }
        }
    }
    None
}

/// EMAIL: `\w+@\w+\.[a-z]+` (ASCII word chars, greedy).
fn match_email(chars: &[char], i: usize) -> Option<usize> {
    let mut p = i;
    while p < chars.len() && is_word_char(chars[p]) {
        p += 1;
    }
    if p == i || p >= chars.len() || chars[p] != '@' {
        return None;
    }
    p += 1;
    let domain_start = p;
    while p < chars.len() && is_word_char(chars[p]) {
        p += 1;
    }
    if p == domain_start || p >= chars.len() || chars[p] != '.' {
        return None;
    }
    p += 1;
    let tld_start = p;
    while p < chars.len() && chars[p].is_ascii_lowercase() {
        p += 1;
    }
    if p == tld_start {
        return None;
    }
    Some(p)
}

/// Finds all non-overlapping DATE/PHONE/EMAIL matches in a chunk,
/// leftmost-first; at equal start the longest match wins (ties broken
/// DATE, PHONE, EMAIL).
fn protected_matches(chars: &[char]) -> Vec<PatMatch> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let candidates = [
            match_date(chars, i),
            match_phone(chars, i),
            match_email(chars, i),
        ];
        let best = candidates.iter().flatten().copied().max();
        if let Some(end) = best {
            out.push(PatMatch { start: i, end });
            i = end;
        } else {
            i += 1;
        }
    }
    out
}

fn inside_any(matches: &[PatMatch], p: usize) -> bool {
    matches.iter().any(|m| m.start < p && p < m.end)
}

/// Earliest family split point strictly inside `chars`, or None.
fn first_split_point(chars: &[char]) -> Option<usize> {
    let matches = protected_matches(chars);
    let mut best: Option<usize> = None;
    let mut consider = |p: usize| {
        if p > 0 && p < chars.len() && best.is_none_or(|b| p < b) {
            best = Some(p);
        }
    };
    for m in &matches {
        if m.start > 0 {
            consider(m.start);
        } else if m.end < chars.len() {
            consider(m.end);
        }
    }
    for p in 1..chars.len() {
        if inside_any(&matches, p) {
            continue;
        }
        let prev = chars[p - 1];
        let cur = chars[p];
        // letter|digit
        if prev.is_ascii_alphabetic() && cur.is_ascii_digit() {
            consider(p);
        }
        // digit|letter, at least two letters following
        if prev.is_ascii_digit()
            && cur.is_ascii_alphabetic()
            && p + 1 < chars.len()
            && chars[p + 1].is_ascii_alphabetic()
        {
            consider(p);
        }
        // lower|Upper
        if prev.is_ascii_lowercase() && cur.is_ascii_uppercase() {
            consider(p);
        }
    }
    // UPPER-run (>=3) followed by TitleCase word (>=2 lowercase): split
    // before the run's last uppercase letter.
    let mut q = 0;
    while q < chars.len() {
        if !chars[q].is_ascii_uppercase() {
            q += 1;
            continue;
        }
        let run_start = q;
        while q < chars.len() && chars[q].is_ascii_uppercase() {
            q += 1;
        }
        let run_len = q - run_start;
        let lower_len = chars[q..]
            .iter()
            .take_while(|c| c.is_ascii_lowercase())
            .count();
        if run_len >= 3 && lower_len >= 2 {
            let p = q - 1;
            if !inside_any(&matches, p) {
                consider(p);
            }
        }
    }
    best
}

fn split_candidate(chars: &[char], abs_start: usize, out: &mut Vec<Token>) {
    if chars.is_empty() {
        return;
    }
    match first_split_point(chars) {
        Some(p) => {
            split_candidate(&chars[..p], abs_start, out);
            split_candidate(&chars[p..], abs_start + p, out);
        }
        None => out.push(Token {
            text: chars.iter().collect(),
            start: abs_start,
            end: abs_start + chars.len(),
            sentence_index: usize::MAX,
        }),
    }
}

/// Splits a whitespace-free chunk on punctuation (protected pattern
/// regions kept whole), then hands each candidate to the family splitter.
fn tokenize_chunk(chars: &[char], abs_start: usize, out: &mut Vec<Token>) {
    let matches = protected_matches(chars);
    let mut cand_start: Option<usize> = None;
    let flush = |from: usize, to: usize, out: &mut Vec<Token>| {
        split_candidate(&chars[from..to], abs_start + from, out);
    };
    let mut p = 0;
    while p < chars.len() {
        let protected = inside_any(&matches, p)
            || matches.iter().any(|m| m.start == p && m.end > p);
        if chars[p].is_alphanumeric() || protected {
            if cand_start.is_none() {
                cand_start = Some(p);
            }
            p += 1;
        } else {
            if let Some(s) = cand_start.take() {
                flush(s, p, out);
            }
            // punctuation char becomes its own token
            out.push(Token {
                text: chars[p].to_string(),
                start: abs_start + p,
                end: abs_start + p + 1,
                sentence_index: usize::MAX,
            });
            p += 1;
        }
    }
    if let Some(s) = cand_start.take() {
        flush(s, chars.len(), out);
    }
}

/// Tokenizes text, preserving exact character offsets. Total function:
/// any input yields a (possibly empty) token list.
pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        tokenize_chunk(&chars[start..i], start, &mut out);
    }
    out
}

fn is_single_capital(s: &str) -> bool {
    let mut it = s.chars();
    matches!((it.next(), it.next()), (Some(c), None) if c.is_ascii_uppercase())
}

/// Sentence detection behind an interface so an alternative detector can
/// be plugged in where the rule-based one falls short.
pub trait SentenceSplitter {
    fn split(&self, tokens: &mut [Token], text: &str) -> Vec<Sentence>;
}

/// The bundled rule-based splitter: abbreviation list plus a sentence
/// length cap.
#[derive(Debug, Clone)]
pub struct RuleSplitter {
    pub abbrevs: AbbrevList,
    pub max_tokens: usize,
}

impl Default for RuleSplitter {
    fn default() -> Self {
        RuleSplitter {
            abbrevs: AbbrevList::bundled(),
            max_tokens: DEFAULT_MAX_SENTENCE_TOKENS,
        }
    }
}

impl SentenceSplitter for RuleSplitter {
    fn split(&self, tokens: &mut [Token], text: &str) -> Vec<Sentence> {
        split_sentences(tokens, text, &self.abbrevs, self.max_tokens)
    }
}

/// Splits a token stream into sentences and assigns each token its
/// sentence index.
///
/// Boundaries occur after `.`, `?`, `!` tokens and wherever the gap
/// between consecutive tokens contains a newline. A period does not end a
/// sentence when it belongs to a listed abbreviation, when the previous
/// token is a single capital-letter initial, or (any terminator) when the
/// next token starts lowercase. Sentences are force-split at `max_tokens`.
pub fn split_sentences(
    tokens: &mut [Token],
    text: &str,
    abbrevs: &AbbrevList,
    max_tokens: usize,
) -> Vec<Sentence> {
    let chars: Vec<char> = text.chars().collect();
    let max_tokens = max_tokens.max(1);
    let mut sentences = Vec::new();
    if tokens.is_empty() {
        return sentences;
    }
    let mut first = 0usize;
    for i in 0..tokens.len() {
        let last_of_stream = i + 1 == tokens.len();
        let mut boundary = last_of_stream;
        if !boundary {
            let gap_has_newline =
                chars[tokens[i].end..tokens[i + 1].start].contains(&'\n');
            boundary = gap_has_newline || is_terminator(tokens, i, abbrevs);
        }
        if i - first + 1 >= max_tokens {
            boundary = true;
        }
        if boundary {
            sentences.push(Sentence {
                first_token: first,
                last_token: i,
                start: tokens[first].start,
                end: tokens[i].end,
            });
            first = i + 1;
        }
    }
    for (idx, s) in sentences.iter().enumerate() {
        for t in &mut tokens[s.first_token..=s.last_token] {
            t.sentence_index = idx;
        }
    }
    sentences
}

fn is_terminator(tokens: &[Token], i: usize, abbrevs: &AbbrevList) -> bool {
    let t = &tokens[i];
    if t.text != "." && t.text != "?" && t.text != "!" {
        return false;
    }
    if t.text == "." && i > 0 {
        let prev = &tokens[i - 1];
        let adjacent = prev.end == t.start;
        if adjacent {
            if is_single_capital(&prev.text) {
                return false;
            }
            let with_period = format!("{}.", prev.text);
            if abbrevs.contains(&with_period) {
                return false;
            }
        }
    }
    if let Some(next) = tokens.get(i + 1) {
        if next.text.chars().next().is_some_and(|c| c.is_lowercase()) {
            return false;
        }
    }
    true
}
