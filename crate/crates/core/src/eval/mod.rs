//! Evaluation: strict / relaxed / token-level matching, micro and macro
//! P/R/F1, category-set filtering, per-subcategory reports, and the
//! approximate-randomization significance test.
//!
//! Strict matching requires identical offsets and subcategory. Relaxed
//! matching keeps the start and subcategory fixed but lets the end offset
//! be off by up to 2 characters. Token-level matching credits every
//! gold-covered token that any same-subcategory system span overlaps.

mod report;
mod sigtest;

pub use report::{render_csv, render_text, subcategory_report, EvalReport, OverallRow, SubcategoryRow};
pub use sigtest::{approx_randomization, exhaustive_randomization, ALPHA_THRESHOLD};

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use crate::corpus::{Document, PhiSpan, Subcategory};
use crate::errors::{DeidError, Result};

/// Matching strictness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchLevel {
    Strict,
    Relaxed,
    Token,
}

impl MatchLevel {
    pub const ALL: [MatchLevel; 3] = [MatchLevel::Strict, MatchLevel::Relaxed, MatchLevel::Token];

    pub fn as_str(self) -> &'static str {
        match self {
            MatchLevel::Strict => "strict",
            MatchLevel::Relaxed => "relaxed",
            MatchLevel::Token => "token",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        MatchLevel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| DeidError::InvalidArgument(format!("unknown match level `{s}`")))
    }
}

/// Micro (pool counts) vs macro (average per-record scores) aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggMode {
    Micro,
    Macro,
}

impl AggMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "micro" => Ok(AggMode::Micro),
            "macro" => Ok(AggMode::Macro),
            _ => Err(DeidError::InvalidArgument(format!("unknown aggregation `{s}`"))),
        }
    }
}

/// Raw match counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counts {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

impl Counts {
    pub fn merge(&mut self, other: Counts) {
        self.true_positives += other.true_positives;
        self.false_positives += other.false_positives;
        self.false_negatives += other.false_negatives;
    }

    pub fn is_zero(&self) -> bool {
        self.true_positives == 0 && self.false_positives == 0 && self.false_negatives == 0
    }
}

/// Per-subcategory match counts for one document (or a pooled corpus).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MatchCounts {
    per_subcategory: BTreeMap<Subcategory, Counts>,
}

impl MatchCounts {
    fn entry(&mut self, sub: Subcategory) -> &mut Counts {
        self.per_subcategory.entry(sub).or_default()
    }

    pub fn get(&self, sub: Subcategory) -> Counts {
        self.per_subcategory.get(&sub).copied().unwrap_or_default()
    }

    pub fn total(&self) -> Counts {
        let mut t = Counts::default();
        for c in self.per_subcategory.values() {
            t.merge(*c);
        }
        t
    }

    pub fn merge(&mut self, other: &MatchCounts) {
        for (sub, c) in &other.per_subcategory {
            self.entry(*sub).merge(*c);
        }
    }

    /// Total counts restricted to a category set.
    pub fn total_in(&self, set: &CategorySet) -> Counts {
        let mut t = Counts::default();
        for (sub, c) in &self.per_subcategory {
            if set.contains(*sub) {
                t.merge(*c);
            }
        }
        t
    }
}

/// Strict matching: a true positive needs identical `(start, end,
/// subcategory)`.
pub fn match_strict(gold: &[PhiSpan], system: &[PhiSpan]) -> MatchCounts {
    let mut counts = MatchCounts::default();
    let gold_set: BTreeSet<(usize, usize, Subcategory)> = gold
        .iter()
        .map(|g| (g.start, g.end, g.subcategory))
        .collect();
    let mut matched_gold = vec![false; gold.len()];
    for s in system {
        let key = (s.start, s.end, s.subcategory);
        if gold_set.contains(&key) {
            counts.entry(s.subcategory).true_positives += 1;
            if let Some(i) = gold
                .iter()
                .position(|g| (g.start, g.end, g.subcategory) == key)
            {
                matched_gold[i] = true;
            }
        } else {
            counts.entry(s.subcategory).false_positives += 1;
        }
    }
    for (g, matched) in gold.iter().zip(&matched_gold) {
        if !matched {
            counts.entry(g.subcategory).false_negatives += 1;
        }
    }
    counts
}

/// Relaxed matching: same subcategory, identical start, and an end offset
/// off by at most 2 characters. Greedy one-to-one in document order.
pub fn match_relaxed(gold: &[PhiSpan], system: &[PhiSpan]) -> MatchCounts {
    let mut counts = MatchCounts::default();
    let mut sys_used = vec![false; system.len()];
    let mut gold_matched = vec![false; gold.len()];
    for (gi, g) in gold.iter().enumerate() {
        for (si, s) in system.iter().enumerate() {
            if sys_used[si] {
                continue;
            }
            let end_diff = s.end.abs_diff(g.end);
            if s.subcategory == g.subcategory && s.start == g.start && end_diff <= 2 {
                sys_used[si] = true;
                gold_matched[gi] = true;
                counts.entry(g.subcategory).true_positives += 1;
                break;
            }
        }
    }
    for (s, used) in system.iter().zip(&sys_used) {
        if !used {
            counts.entry(s.subcategory).false_positives += 1;
        }
    }
    for (g, matched) in gold.iter().zip(&gold_matched) {
        if !matched {
            counts.entry(g.subcategory).false_negatives += 1;
        }
    }
    counts
}

fn covering_sub(spans: &[PhiSpan], tok_start: usize, tok_end: usize) -> Option<Subcategory> {
    spans
        .iter()
        .find(|s| s.start < tok_end && tok_start < s.end)
        .map(|s| s.subcategory)
}

/// Token-level matching over a tokenized document: each gold-covered
/// token is a TP if some same-subcategory system span overlaps it, else
/// an FN; each system-covered token with no same-subcategory gold cover
/// is an FP.
pub fn match_token(doc: &Document, gold: &[PhiSpan], system: &[PhiSpan]) -> MatchCounts {
    let mut counts = MatchCounts::default();
    for t in &doc.tokens {
        let g = covering_sub(gold, t.start, t.end);
        let s = covering_sub(system, t.start, t.end);
        match (g, s) {
            (Some(gs), Some(ss)) if gs == ss => counts.entry(gs).true_positives += 1,
            (g, s) => {
                if let Some(gs) = g {
                    counts.entry(gs).false_negatives += 1;
                }
                if let Some(ss) = s {
                    counts.entry(ss).false_positives += 1;
                }
            }
        }
    }
    counts
}

/// Counts for one document at the given level.
pub fn match_at_level(
    level: MatchLevel,
    doc: &Document,
    gold: &[PhiSpan],
    system: &[PhiSpan],
) -> MatchCounts {
    match level {
        MatchLevel::Strict => match_strict(gold, system),
        MatchLevel::Relaxed => match_relaxed(gold, system),
        MatchLevel::Token => match_token(doc, gold, system),
    }
}

/// Precision, recall, F1 with the zero conventions: P = 0 when
/// TP + FP = 0, R = 0 when TP + FN = 0, F1 = 0 when P + R = 0.
pub fn prf(counts: Counts) -> (f64, f64, f64) {
    let tp = counts.true_positives as f64;
    let p_den = counts.true_positives + counts.false_positives;
    let r_den = counts.true_positives + counts.false_negatives;
    let p = if p_den == 0 { 0.0 } else { tp / p_den as f64 };
    let r = if r_den == 0 { 0.0 } else { tp / r_den as f64 };
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}

/// Micro or macro aggregation of per-document counts (restricted to a
/// category set). Macro excludes documents with no gold and no system
/// spans in the set.
pub fn aggregate(per_doc: &[MatchCounts], mode: AggMode, set: &CategorySet) -> (f64, f64, f64) {
    match mode {
        AggMode::Micro => {
            let mut t = Counts::default();
            for d in per_doc {
                t.merge(d.total_in(set));
            }
            prf(t)
        }
        AggMode::Macro => {
            let mut ps = Vec::new();
            let mut rs = Vec::new();
            let mut fs = Vec::new();
            for d in per_doc {
                let t = d.total_in(set);
                if t.is_zero() {
                    continue;
                }
                let (p, r, f) = prf(t);
                ps.push(p);
                rs.push(r);
                fs.push(f);
            }
            let mean = |v: &[f64]| {
                if v.is_empty() {
                    0.0
                } else {
                    v.iter().sum::<f64>() / v.len() as f64
                }
            };
            (mean(&ps), mean(&rs), mean(&fs))
        }
    }
}

/// A named set of included subcategories.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategorySet {
    pub name: String,
    included: BTreeSet<Subcategory>,
}

impl CategorySet {
    /// The full i2b2 set: all 22 subcategories.
    pub fn i2b2() -> Self {
        CategorySet {
            name: "i2b2".into(),
            included: Subcategory::ALL.into_iter().collect(),
        }
    }

    /// The default HIPAA subset. The exact shared-task membership is not
    /// public; this default excludes the i2b2 extensions (PROFESSION,
    /// COUNTRY) and the provider-side identifiers (DOCTOR, HOSPITAL,
    /// ORGANIZATION, STATE). Override it with a config file when a
    /// different mapping is needed.
    pub fn hipaa_default() -> Self {
        let excluded = [
            Subcategory::Profession,
            Subcategory::Country,
            Subcategory::Doctor,
            Subcategory::Hospital,
            Subcategory::Organization,
            Subcategory::State,
        ];
        CategorySet {
            name: "hipaa".into(),
            included: Subcategory::ALL
                .into_iter()
                .filter(|s| !excluded.contains(s))
                .collect(),
        }
    }

    /// Parses a config file: a `[NAME]` heading followed by one
    /// subcategory per line. Returns the set with the requested name.
    pub fn from_config(text: &str, name: &str) -> Result<Self> {
        let mut current: Option<String> = None;
        let mut sets: BTreeMap<String, BTreeSet<Subcategory>> = BTreeMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(heading) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                current = Some(heading.to_lowercase());
                sets.entry(heading.to_lowercase()).or_default();
            } else if let Some(cur) = &current {
                sets.get_mut(cur).unwrap().insert(line.parse()?);
            } else {
                return Err(DeidError::InvalidArgument(
                    "category-set config entry before any [NAME] heading".into(),
                ));
            }
        }
        sets.remove(&name.to_lowercase())
            .map(|included| CategorySet {
                name: name.to_lowercase(),
                included,
            })
            .ok_or_else(|| DeidError::UnknownCategorySet(name.to_string()))
    }

    /// Resolves a set by name: `i2b2` and `hipaa` are built in; a config
    /// file may define or override named sets.
    pub fn resolve(name: &str, config: Option<&str>) -> Result<Self> {
        if let Some(text) = config {
            if let Ok(set) = CategorySet::from_config(text, name) {
                return Ok(set);
            }
        }
        match name.to_lowercase().as_str() {
            "i2b2" => Ok(CategorySet::i2b2()),
            "hipaa" => Ok(CategorySet::hipaa_default()),
            other => Err(DeidError::UnknownCategorySet(other.to_string())),
        }
    }

    pub fn contains(&self, sub: Subcategory) -> bool {
        self.included.contains(&sub)
    }

    pub fn len(&self) -> usize {
        self.included.len()
    }

    pub fn is_empty(&self) -> bool {
        self.included.is_empty()
    }
}

/// Keeps only the spans whose subcategory belongs to the set.
pub fn filter_category_set(spans: &[PhiSpan], set: &CategorySet) -> Vec<PhiSpan> {
    spans
        .iter()
        .filter(|s| set.contains(s.subcategory))
        .copied()
        .collect()
}

/// Which per-record score feeds the significance test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Precision,
    Recall,
    F1,
}

impl Metric {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "p" | "precision" => Ok(Metric::Precision),
            "r" | "recall" => Ok(Metric::Recall),
            "f" | "f1" => Ok(Metric::F1),
            _ => Err(DeidError::InvalidArgument(format!("unknown metric `{s}`"))),
        }
    }

    pub fn pick(self, prf: (f64, f64, f64)) -> f64 {
        match self {
            Metric::Precision => prf.0,
            Metric::Recall => prf.1,
            Metric::F1 => prf.2,
        }
    }
}

/// Per-record metric values (documents with neither gold nor system
/// spans in the set score 0 across the board, matching the macro rule of
/// skipping them is left to callers — the significance test needs equal-
/// length lists, so every record contributes a value here).
pub fn per_record_scores(
    docs: &[Document],
    systems: &[Vec<PhiSpan>],
    level: MatchLevel,
    set: &CategorySet,
    metric: Metric,
) -> Result<Vec<f64>> {
    if docs.len() != systems.len() {
        return Err(DeidError::LengthMismatch {
            what: "documents vs system outputs",
            left: docs.len(),
            right: systems.len(),
        });
    }
    Ok(docs
        .iter()
        .zip(systems)
        .map(|(doc, sys)| {
            let gold = filter_category_set(&doc.gold, set);
            let sysf = filter_category_set(sys, set);
            let counts = match_at_level(level, doc, &gold, &sysf);
            metric.pick(prf(counts.total()))
        })
        .collect())
}

/// Random aligned (gold document, system spans) pairs over a token grid;
/// shared by the eval and error-analysis property tests.
#[cfg(test)]
pub(crate) fn random_aligned_pair(
    rng: &mut rand_chacha::ChaCha8Rng,
) -> (Document, Vec<PhiSpan>) {
    use crate::preprocess::AbbrevList;
    use rand::prelude::*;

    let n_tokens = rng.gen_range(3..15);
    let text: Vec<String> = (0..n_tokens).map(|i| format!("tok{i}")).collect();
    let text = text.join(" ");
    let mut doc = Document::new("r", text, vec![]).unwrap();
    doc.preprocess(&AbbrevList::bundled(), 200);
    let make_spans = |rng: &mut rand_chacha::ChaCha8Rng, doc: &Document| -> Vec<PhiSpan> {
        let mut spans = Vec::new();
        let mut used = vec![false; doc.tokens.len()];
        for _ in 0..rng.gen_range(0..4) {
            let a = rng.gen_range(0..doc.tokens.len());
            let len = rng.gen_range(1..3usize);
            let b = (a + len).min(doc.tokens.len());
            if used[a..b].iter().any(|&u| u) {
                continue;
            }
            for u in used.iter_mut().take(b).skip(a) {
                *u = true;
            }
            let sub = Subcategory::ALL[rng.gen_range(0..4)];
            spans.push(PhiSpan::new(doc.tokens[a].start, doc.tokens[b - 1].end, sub));
        }
        spans.sort_by_key(|s| s.start);
        spans
    };
    let gold = make_spans(rng, &doc);
    let sys = make_spans(rng, &doc);
    doc.gold = gold;
    (doc, sys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::AbbrevList;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn span(s: usize, e: usize, sub: Subcategory) -> PhiSpan {
        PhiSpan::new(s, e, sub)
    }

    #[test]
    fn strict_identical_lists() {
        let gold = vec![span(0, 5, Subcategory::Date), span(10, 12, Subcategory::Age)];
        let c = match_strict(&gold, &gold);
        let t = c.total();
        assert_eq!(t.true_positives, 2);
        assert_eq!(t.false_positives, 0);
        assert_eq!(t.false_negatives, 0);
    }

    #[test]
    fn strict_boundary_mismatch() {
        let gold = vec![span(10, 20, Subcategory::Date)];
        let sys = vec![span(10, 22, Subcategory::Date)];
        let c = match_strict(&gold, &sys);
        assert_eq!(c.get(Subcategory::Date).false_positives, 1);
        assert_eq!(c.get(Subcategory::Date).false_negatives, 1);
        assert_eq!(c.get(Subcategory::Date).true_positives, 0);
    }

    #[test]
    fn strict_type_mismatch_counts_both_sides() {
        let gold = vec![span(0, 7, Subcategory::Patient)];
        let sys = vec![span(0, 7, Subcategory::Doctor)];
        let c = match_strict(&gold, &sys);
        assert_eq!(c.get(Subcategory::Doctor).false_positives, 1);
        assert_eq!(c.get(Subcategory::Patient).false_negatives, 1);
    }

    #[test]
    fn relaxed_allows_end_off_by_two() {
        let gold = vec![span(10, 20, Subcategory::Date)];
        assert_eq!(
            match_relaxed(&gold, &[span(10, 22, Subcategory::Date)])
                .total()
                .true_positives,
            1
        );
        // off by 3 fails
        let c = match_relaxed(&gold, &[span(10, 23, Subcategory::Date)]);
        assert_eq!(c.total().true_positives, 0);
        assert_eq!(c.total().false_positives, 1);
        assert_eq!(c.total().false_negatives, 1);
        // start must match exactly
        let c = match_relaxed(&gold, &[span(11, 20, Subcategory::Date)]);
        assert_eq!(c.total().true_positives, 0);
    }

    fn winter_doc() -> Document {
        let mut doc = Document::new(
            "d",
            "admitted 2072 winter for care",
            vec![span(9, 20, Subcategory::Date)],
        )
        .unwrap();
        doc.preprocess(&AbbrevList::bundled(), 200);
        doc
    }

    #[test]
    fn token_level_credits_split_entities() {
        let doc = winter_doc();
        let sys = vec![span(9, 13, Subcategory::Date), span(14, 20, Subcategory::Date)];
        let token = match_token(&doc, &doc.gold, &sys);
        assert_eq!(token.get(Subcategory::Date).true_positives, 2);
        let strict = match_strict(&doc.gold, &sys);
        assert_eq!(strict.get(Subcategory::Date).true_positives, 0);
    }

    #[test]
    fn token_level_empty_system() {
        let doc = winter_doc();
        let token = match_token(&doc, &doc.gold, &[]);
        assert_eq!(token.get(Subcategory::Date).true_positives, 0);
        assert_eq!(token.get(Subcategory::Date).false_negatives, 2);
    }

    #[test]
    fn token_level_exact_match_counts_gold_tokens() {
        let doc = winter_doc();
        let token = match_token(&doc, &doc.gold, &doc.gold.clone());
        assert_eq!(token.get(Subcategory::Date).true_positives, 2);
        assert_eq!(token.total().false_positives, 0);
    }

    #[test]
    fn prf_matches_published_rows() {
        // PATIENT row: 597 agreed, 658 system, 837 gold
        let (p, r, f) = prf(Counts {
            true_positives: 597,
            false_positives: 658 - 597,
            false_negatives: 837 - 597,
        });
        assert!((p - 0.9073).abs() < 5e-5);
        assert!((r - 0.7133).abs() < 5e-5);
        assert!((f - 0.7987).abs() < 5e-5);
        // ZIP row: 17/17/17
        let (p, r, f) = prf(Counts {
            true_positives: 17,
            false_positives: 0,
            false_negatives: 0,
        });
        assert_eq!((p, r, f), (1.0, 1.0, 1.0));
        // all-zero convention
        assert_eq!(prf(Counts::default()), (0.0, 0.0, 0.0));
    }

    #[test]
    fn aggregate_micro_macro() {
        let set = CategorySet::i2b2();
        // doc A: TP=1 FP=1; doc B: TP=1 FN=1
        let mut a = MatchCounts::default();
        a.entry(Subcategory::Date).merge(Counts {
            true_positives: 1,
            false_positives: 1,
            false_negatives: 0,
        });
        let mut b = MatchCounts::default();
        b.entry(Subcategory::Date).merge(Counts {
            true_positives: 1,
            false_positives: 0,
            false_negatives: 1,
        });
        let micro = aggregate(&[a.clone(), b.clone()], AggMode::Micro, &set);
        assert!((micro.0 - 2.0 / 3.0).abs() < 1e-12);
        assert!((micro.1 - 2.0 / 3.0).abs() < 1e-12);
        assert!((micro.2 - 2.0 / 3.0).abs() < 1e-12);
        let macro_ = aggregate(&[a.clone(), b.clone()], AggMode::Macro, &set);
        assert!((macro_.2 - (2.0 / 3.0 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
        // single document: micro == macro
        let m1 = aggregate(std::slice::from_ref(&a), AggMode::Micro, &set);
        let m2 = aggregate(std::slice::from_ref(&a), AggMode::Macro, &set);
        assert_eq!(m1, m2);
        // perfect and empty docs: macro averages 1.0 and 0.0
        let mut perfect = MatchCounts::default();
        perfect.entry(Subcategory::Age).merge(Counts {
            true_positives: 2,
            ..Counts::default()
        });
        let mut zero = MatchCounts::default();
        zero.entry(Subcategory::Age).merge(Counts {
            false_negatives: 1,
            ..Counts::default()
        });
        let m = aggregate(&[perfect, zero], AggMode::Macro, &set);
        assert!((m.2 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn category_set_filtering() {
        let spans = vec![
            span(0, 2, Subcategory::Profession),
            span(3, 5, Subcategory::Country),
            span(6, 8, Subcategory::Patient),
        ];
        assert_eq!(filter_category_set(&spans, &CategorySet::i2b2()), spans);
        let hipaa = filter_category_set(&spans, &CategorySet::hipaa_default());
        assert_eq!(hipaa, vec![span(6, 8, Subcategory::Patient)]);
        let empty = CategorySet::from_config("[none]\n", "none").unwrap();
        assert!(filter_category_set(&spans, &empty).is_empty());
    }

    #[test]
    fn category_set_config_parsing() {
        let cfg = "# comment\n[HIPAA]\nPATIENT\nZIP\n\n[tiny]\nAGE\n";
        let set = CategorySet::from_config(cfg, "hipaa").unwrap();
        assert_eq!(set.len(), 2);
        assert!(set.contains(Subcategory::Patient));
        assert!(!set.contains(Subcategory::Age));
        let tiny = CategorySet::from_config(cfg, "tiny").unwrap();
        assert!(tiny.contains(Subcategory::Age));
        assert!(matches!(
            CategorySet::from_config(cfg, "missing"),
            Err(DeidError::UnknownCategorySet(_))
        ));
        assert!(matches!(
            CategorySet::resolve("nope", None),
            Err(DeidError::UnknownCategorySet(_))
        ));
    }

    #[test]
    fn prf_bounds_and_ordering() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..500 {
            let c = Counts {
                true_positives: rng.gen_range(0..20),
                false_positives: rng.gen_range(0..20),
                false_negatives: rng.gen_range(0..20),
            };
            let (p, r, f) = prf(c);
            assert!((0.0..=1.0).contains(&p));
            assert!((0.0..=1.0).contains(&r));
            assert!((0.0..=1.0).contains(&f));
            if p > 0.0 && r > 0.0 {
                assert!(f <= p.max(r) + 1e-12);
                assert!(f >= p.min(r) - 1e-12);
            }
        }
    }

    use super::random_aligned_pair;

    #[test]
    fn tp_monotonicity_across_levels() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..1000 {
            let (doc, sys) = random_aligned_pair(&mut rng);
            let strict = match_strict(&doc.gold, &sys).total().true_positives;
            let relaxed = match_relaxed(&doc.gold, &sys).total().true_positives;
            let token = match_token(&doc, &doc.gold, &sys).total().true_positives;
            assert!(strict <= relaxed, "strict {strict} > relaxed {relaxed}");
            assert!(relaxed <= token, "relaxed {relaxed} > token {token}");
        }
    }

    #[test]
    fn strict_counting_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..200 {
            let (doc, sys) = random_aligned_pair(&mut rng);
            let fwd = match_strict(&doc.gold, &sys);
            let rev = match_strict(&sys, &doc.gold);
            assert_eq!(fwd.total().false_positives, rev.total().false_negatives);
            assert_eq!(fwd.total().false_negatives, rev.total().false_positives);
            assert_eq!(fwd.total().true_positives, rev.total().true_positives);
        }
    }
}
