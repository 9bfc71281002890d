//! Error taxonomy over strict entity-level discrepancies, the
//! confusion/error matrix, and per-subcategory document-frequency
//! summaries.
//!
//! Every system span is classified exactly once: exact offsets with the
//! right type → CORRECT, exact offsets with the wrong type → TYPE,
//! overlapping → EXTENT, no overlap → SPURIOUS. A system span overlapping
//! several gold spans pairs with the one of maximal character overlap
//! (ties to the earlier gold). The extent kind is SHORT when the system
//! span falls inside its paired gold, SHORT&LONG when it partially
//! overlaps any gold (straddles a gold boundary), and LONG otherwise —
//! i.e. when it covers every gold it touches. Gold spans no record pairs
//! with are MISSING — including a gold whose only overlapping system
//! span paired elsewhere, which keeps the partition exact.
//!
//! Matrix reconciliation: system-side column totals equal the system span
//! counts; gold-side row totals (confusion cells + extent-involved +
//! missing) equal the gold span counts. The extent rows themselves count
//! system spans, so the gold side carries its own extent-involvement
//! tally.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use crate::corpus::{Document, PhiSpan, Subcategory};

/// Outcome of classifying one system span (or an unmatched gold span).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Correct,
    Type,
    ExtentShort,
    ExtentLong,
    ExtentShortLong,
    Spurious,
    Missing,
}

impl ErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::Correct => "correct",
            ErrorKind::Type => "type",
            ErrorKind::ExtentShort => "short",
            ErrorKind::ExtentLong => "long",
            ErrorKind::ExtentShortLong => "short&long",
            ErrorKind::Spurious => "spurious",
            ErrorKind::Missing => "missing",
        }
    }
}

/// One classified discrepancy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorRecord {
    pub kind: ErrorKind,
    pub gold: Option<PhiSpan>,
    pub system: Option<PhiSpan>,
    pub doc_id: String,
}

fn overlap(a: &PhiSpan, b: &PhiSpan) -> usize {
    a.end.min(b.end).saturating_sub(a.start.max(b.start))
}

/// Classifies one document's system spans against its gold spans.
pub fn classify(doc_id: &str, gold: &[PhiSpan], system: &[PhiSpan]) -> Vec<ErrorRecord> {
    let mut records = Vec::new();
    let mut gold_paired = vec![false; gold.len()];
    for s in system {
        let exact = gold
            .iter()
            .position(|g| g.start == s.start && g.end == s.end);
        let record = if let Some(gi) = exact {
            gold_paired[gi] = true;
            ErrorRecord {
                kind: if gold[gi].subcategory == s.subcategory {
                    ErrorKind::Correct
                } else {
                    ErrorKind::Type
                },
                gold: Some(gold[gi]),
                system: Some(*s),
                doc_id: doc_id.to_string(),
            }
        } else {
            // maximal-overlap pairing, earlier gold wins ties
            let mut best: Option<(usize, usize)> = None;
            for (gi, g) in gold.iter().enumerate() {
                let ov = overlap(g, s);
                if ov > 0 && best.is_none_or(|(_, b)| ov > b) {
                    best = Some((gi, ov));
                }
            }
            match best {
                None => ErrorRecord {
                    kind: ErrorKind::Spurious,
                    gold: None,
                    system: Some(*s),
                    doc_id: doc_id.to_string(),
                },
                Some((gi, _)) => {
                    gold_paired[gi] = true;
                    let g = gold[gi];
                    let straddles = gold.iter().any(|o| {
                        overlap(o, s) > 0
                            && !(s.start >= o.start && s.end <= o.end)
                            && !(s.start <= o.start && s.end >= o.end)
                    });
                    let kind = if s.start >= g.start && s.end <= g.end {
                        ErrorKind::ExtentShort
                    } else if straddles {
                        ErrorKind::ExtentShortLong
                    } else {
                        ErrorKind::ExtentLong
                    };
                    ErrorRecord {
                        kind,
                        gold: Some(g),
                        system: Some(*s),
                        doc_id: doc_id.to_string(),
                    }
                }
            }
        };
        records.push(record);
    }
    for (g, paired) in gold.iter().zip(&gold_paired) {
        if !paired {
            records.push(ErrorRecord {
                kind: ErrorKind::Missing,
                gold: Some(*g),
                system: None,
                doc_id: doc_id.to_string(),
            });
        }
    }
    records
}

/// The aggregated error matrix.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ErrorMatrix {
    /// Exact-offset cells: `(gold subcategory, system subcategory)` →
    /// count. Diagonal entries are CORRECT, the rest TYPE errors.
    pub cells: BTreeMap<(Subcategory, Subcategory), usize>,
    pub spurious: BTreeMap<Subcategory, usize>,
    pub short: BTreeMap<Subcategory, usize>,
    pub long: BTreeMap<Subcategory, usize>,
    pub short_long: BTreeMap<Subcategory, usize>,
    pub missing: BTreeMap<Subcategory, usize>,
    /// Gold spans whose only pairings are extent records; the gold-side
    /// reconciliation column.
    pub extent_involved: BTreeMap<Subcategory, usize>,
}

impl ErrorMatrix {
    /// Gold-side row total: cells + extent-involved + missing.
    pub fn gold_row_total(&self, sub: Subcategory) -> usize {
        let cells: usize = self
            .cells
            .iter()
            .filter(|((g, _), _)| *g == sub)
            .map(|(_, c)| c)
            .sum();
        cells
            + self.extent_involved.get(&sub).copied().unwrap_or(0)
            + self.missing.get(&sub).copied().unwrap_or(0)
    }

    /// System-side column total: cells + spurious + extent rows.
    pub fn system_col_total(&self, sub: Subcategory) -> usize {
        let cells: usize = self
            .cells
            .iter()
            .filter(|((_, s), _)| *s == sub)
            .map(|(_, c)| c)
            .sum();
        cells
            + self.spurious.get(&sub).copied().unwrap_or(0)
            + self.short.get(&sub).copied().unwrap_or(0)
            + self.long.get(&sub).copied().unwrap_or(0)
            + self.short_long.get(&sub).copied().unwrap_or(0)
    }

    pub fn count(&self, kind: ErrorKind) -> usize {
        match kind {
            ErrorKind::Correct => self
                .cells
                .iter()
                .filter(|((g, s), _)| g == s)
                .map(|(_, c)| c)
                .sum(),
            ErrorKind::Type => self
                .cells
                .iter()
                .filter(|((g, s), _)| g != s)
                .map(|(_, c)| c)
                .sum(),
            ErrorKind::ExtentShort => self.short.values().sum(),
            ErrorKind::ExtentLong => self.long.values().sum(),
            ErrorKind::ExtentShortLong => self.short_long.values().sum(),
            ErrorKind::Spurious => self.spurious.values().sum(),
            ErrorKind::Missing => self.missing.values().sum(),
        }
    }
}

/// Accumulates classified records into the matrix.
pub fn error_matrix(records: &[ErrorRecord]) -> ErrorMatrix {
    let mut m = ErrorMatrix::default();
    // per-gold disposition for the reconciliation column
    let mut extent_only: HashMap<(String, usize, usize), Subcategory> = HashMap::new();
    let mut exact_paired: HashSet<(String, usize, usize)> = HashSet::new();
    for r in records {
        match r.kind {
            ErrorKind::Correct | ErrorKind::Type => {
                let g = r.gold.unwrap();
                let s = r.system.unwrap();
                *m.cells.entry((g.subcategory, s.subcategory)).or_default() += 1;
                exact_paired.insert((r.doc_id.clone(), g.start, g.end));
            }
            ErrorKind::ExtentShort | ErrorKind::ExtentLong | ErrorKind::ExtentShortLong => {
                let s = r.system.unwrap();
                let g = r.gold.unwrap();
                let row = match r.kind {
                    ErrorKind::ExtentShort => &mut m.short,
                    ErrorKind::ExtentLong => &mut m.long,
                    _ => &mut m.short_long,
                };
                *row.entry(s.subcategory).or_default() += 1;
                extent_only.insert((r.doc_id.clone(), g.start, g.end), g.subcategory);
            }
            ErrorKind::Spurious => {
                *m.spurious.entry(r.system.unwrap().subcategory).or_default() += 1;
            }
            ErrorKind::Missing => {
                *m.missing.entry(r.gold.unwrap().subcategory).or_default() += 1;
            }
        }
    }
    for (key, sub) in extent_only {
        if !exact_paired.contains(&key) {
            *m.extent_involved.entry(sub).or_default() += 1;
        }
    }
    m
}

fn active_subcategories(m: &ErrorMatrix) -> Vec<Subcategory> {
    let mut subs = BTreeSet::new();
    for (g, s) in m.cells.keys() {
        subs.insert(*g);
        subs.insert(*s);
    }
    for map in [&m.spurious, &m.short, &m.long, &m.short_long, &m.missing, &m.extent_involved] {
        subs.extend(map.keys().copied());
    }
    Subcategory::ALL
        .into_iter()
        .filter(|s| subs.contains(s))
        .collect()
}

/// Aligned text rendering of the matrix (gold rows × system columns,
/// then the spurious/extent rows and the missing column).
pub fn render_matrix_text(m: &ErrorMatrix) -> String {
    let subs = active_subcategories(m);
    let mut out = String::new();
    let short = |s: Subcategory| {
        let name = s.as_str();
        name.chars().take(5).collect::<String>()
    };
    let _ = write!(out, "{:<15}", "gold \\ system");
    for s in &subs {
        let _ = write!(out, "{:>7}", short(*s));
    }
    let _ = writeln!(out, "{:>9}{:>8}{:>7}", "missing", "extent", "total");
    for g in &subs {
        let _ = write!(out, "{:<15}", g.as_str());
        for s in &subs {
            let c = m.cells.get(&(*g, *s)).copied().unwrap_or(0);
            let _ = write!(out, "{c:>7}");
        }
        let _ = writeln!(
            out,
            "{:>9}{:>8}{:>7}",
            m.missing.get(g).copied().unwrap_or(0),
            m.extent_involved.get(g).copied().unwrap_or(0),
            m.gold_row_total(*g)
        );
    }
    for (name, map) in [
        ("spurious", &m.spurious),
        ("short", &m.short),
        ("long", &m.long),
        ("short&long", &m.short_long),
    ] {
        let _ = write!(out, "{name:<15}");
        for s in &subs {
            let _ = write!(out, "{:>7}", map.get(s).copied().unwrap_or(0));
        }
        let _ = writeln!(out);
    }
    let _ = write!(out, "{:<15}", "system total");
    for s in &subs {
        let _ = write!(out, "{:>7}", m.system_col_total(*s));
    }
    let _ = writeln!(out);
    out
}

/// Machine-readable comma-separated rows of the matrix.
pub fn render_matrix_csv(m: &ErrorMatrix) -> String {
    let mut out = String::new();
    out.push_str("kind,gold,system,count\n");
    for ((g, s), c) in &m.cells {
        let kind = if g == s { "correct" } else { "type" };
        let _ = writeln!(out, "{kind},{},{},{c}", g.as_str(), s.as_str());
    }
    for (name, map) in [
        ("spurious", &m.spurious),
        ("short", &m.short),
        ("long", &m.long),
        ("short&long", &m.short_long),
    ] {
        for (s, c) in map {
            let _ = writeln!(out, "{name},,{},{c}", s.as_str());
        }
    }
    for (g, c) in &m.missing {
        let _ = writeln!(out, "missing,{},,{c}", g.as_str());
    }
    for (g, c) in &m.extent_involved {
        let _ = writeln!(out, "extent-involved,{},,{c}", g.as_str());
    }
    out
}

/// Figure-7-style percentages: correct/type/extent/spurious rates
/// normalized by system-output counts per system subcategory; missing
/// rates normalized by gold counts per gold subcategory. Display-only.
pub fn render_matrix_percentages(m: &ErrorMatrix) -> String {
    let subs = active_subcategories(m);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<15}{:>9}{:>7}{:>7}{:>6}{:>6}{:>10}{:>9}",
        "subcategory", "correct", "type", "short", "long", "s&l", "spurious", "missing"
    );
    for sub in subs {
        let sys_total = m.system_col_total(sub);
        let pct = |n: usize, d: usize| {
            if d == 0 {
                0.0
            } else {
                100.0 * n as f64 / d as f64
            }
        };
        let correct = m.cells.get(&(sub, sub)).copied().unwrap_or(0);
        let type_err: usize = m
            .cells
            .iter()
            .filter(|((g, s), _)| *s == sub && g != s)
            .map(|(_, c)| c)
            .sum();
        let gold_total = m.gold_row_total(sub);
        let _ = writeln!(
            out,
            "{:<15}{:>8.0}%{:>6.0}%{:>6.0}%{:>5.0}%{:>5.0}%{:>9.0}%{:>8.0}%",
            sub.as_str(),
            pct(correct, sys_total),
            pct(type_err, sys_total),
            pct(m.short.get(&sub).copied().unwrap_or(0), sys_total),
            pct(m.long.get(&sub).copied().unwrap_or(0), sys_total),
            pct(m.short_long.get(&sub).copied().unwrap_or(0), sys_total),
            pct(m.spurious.get(&sub).copied().unwrap_or(0), sys_total),
            pct(m.missing.get(&sub).copied().unwrap_or(0), gold_total),
        );
    }
    out
}

/// Five-number summary of a distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub n: usize,
}

fn median_of(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if !n.is_multiple_of(2) {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

fn five_number(mut values: Vec<f64>) -> Option<FiveNumber> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    // Tukey hinges: medians of the lower/upper halves, middle element
    // shared when n is odd
    let half = n / 2;
    let (lower, upper) = if n.is_multiple_of(2) {
        (&values[..half], &values[half..])
    } else {
        (&values[..=half], &values[half..])
    };
    Some(FiveNumber {
        min: values[0],
        q1: median_of(lower),
        median: median_of(&values),
        q3: median_of(upper),
        max: values[n - 1],
        n,
    })
}

/// For each subcategory: the distribution, over distinct gold surface
/// strings, of the number of documents containing that string.
pub fn doc_frequency(docs: &[Document]) -> BTreeMap<Subcategory, Option<FiveNumber>> {
    let mut doc_sets: HashMap<(Subcategory, String), BTreeSet<&str>> = HashMap::new();
    for doc in docs {
        for span in &doc.gold {
            let surface = doc.slice(span.start, span.end);
            doc_sets
                .entry((span.subcategory, surface))
                .or_default()
                .insert(doc.id.as_str());
        }
    }
    let mut per_sub: BTreeMap<Subcategory, Vec<f64>> = BTreeMap::new();
    for ((sub, _), ids) in doc_sets {
        per_sub.entry(sub).or_default().push(ids.len() as f64);
    }
    Subcategory::ALL
        .into_iter()
        .map(|sub| (sub, per_sub.remove(&sub).and_then(five_number)))
        .collect()
}
