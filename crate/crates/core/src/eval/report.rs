//! Per-subcategory evaluation report plus the overall micro table over
//! both category sets and all three match levels.

use std::fmt::Write as _;

use crate::corpus::{Document, PhiSpan, Subcategory};

use super::{
    aggregate, filter_category_set, match_at_level, prf, AggMode, CategorySet, MatchCounts,
    MatchLevel,
};

/// One subcategory row: gold/system/agreement counts and P/R/F at the
/// report's level.
#[derive(Debug, Clone, PartialEq)]
pub struct SubcategoryRow {
    pub subcategory: Subcategory,
    pub n_gold: usize,
    pub n_system: usize,
    pub n_agree: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// One overall micro row for (category set × level).
#[derive(Debug, Clone, PartialEq)]
pub struct OverallRow {
    pub category_set: String,
    pub level: MatchLevel,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// The full report.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Level the subcategory rows were computed at.
    pub level: MatchLevel,
    pub rows: Vec<SubcategoryRow>,
    pub overall: Vec<OverallRow>,
    /// Macro scores per category set at the report level.
    pub macro_rows: Vec<OverallRow>,
}

/// Builds the report for matched (gold document, system spans) pairs.
/// Subcategory rows cover all subcategories that appear on either side;
/// the overall table covers every (category set × level) combination.
pub fn subcategory_report(
    docs: &[Document],
    systems: &[Vec<PhiSpan>],
    level: MatchLevel,
    catsets: &[CategorySet],
) -> EvalReport {
    let per_doc: Vec<MatchCounts> = docs
        .iter()
        .zip(systems)
        .map(|(doc, sys)| match_at_level(level, doc, &doc.gold, sys))
        .collect();
    let mut pooled = MatchCounts::default();
    for d in &per_doc {
        pooled.merge(d);
    }
    let mut rows = Vec::new();
    for sub in Subcategory::ALL {
        let n_gold: usize = docs
            .iter()
            .map(|d| d.gold.iter().filter(|s| s.subcategory == sub).count())
            .sum();
        let n_system: usize = systems
            .iter()
            .map(|v| v.iter().filter(|s| s.subcategory == sub).count())
            .sum();
        if n_gold == 0 && n_system == 0 {
            continue;
        }
        let counts = pooled.get(sub);
        let (precision, recall, f1) = prf(counts);
        rows.push(SubcategoryRow {
            subcategory: sub,
            n_gold,
            n_system,
            n_agree: counts.true_positives,
            precision,
            recall,
            f1,
        });
    }
    let mut overall = Vec::new();
    for set in catsets {
        for lvl in MatchLevel::ALL {
            let per_doc_lvl: Vec<MatchCounts> = docs
                .iter()
                .zip(systems)
                .map(|(doc, sys)| {
                    let gold = filter_category_set(&doc.gold, set);
                    let sysf = filter_category_set(sys, set);
                    match_at_level(lvl, doc, &gold, &sysf)
                })
                .collect();
            let (precision, recall, f1) = aggregate(&per_doc_lvl, AggMode::Micro, set);
            overall.push(OverallRow {
                category_set: set.name.clone(),
                level: lvl,
                precision,
                recall,
                f1,
            });
        }
    }
    let macro_rows = catsets
        .iter()
        .map(|set| {
            let (precision, recall, f1) = aggregate(&per_doc, AggMode::Macro, set);
            OverallRow {
                category_set: set.name.clone(),
                level,
                precision,
                recall,
                f1,
            }
        })
        .collect();
    EvalReport {
        level,
        rows,
        overall,
        macro_rows,
    }
}

/// Aligned plain-text rendering: the per-subcategory table, then the
/// overall micro/macro rows.
pub fn render_text(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<15} {:>7} {:>8} {:>7} {:>8} {:>8} {:>8}",
        "Sub-category", "#Gold", "#System", "#Agree", "P", "R", "F"
    );
    for row in &report.rows {
        let _ = writeln!(
            out,
            "{:<15} {:>7} {:>8} {:>7} {:>8.4} {:>8.4} {:>8.4}",
            row.subcategory.as_str(),
            row.n_gold,
            row.n_system,
            row.n_agree,
            row.precision,
            row.recall,
            row.f1
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:<8} {:<8} {:>8} {:>8} {:>8}",
        "Set", "Level", "P", "R", "F"
    );
    for row in &report.overall {
        let _ = writeln!(
            out,
            "{:<8} {:<8} {:>8.4} {:>8.4} {:>8.4}",
            row.category_set,
            row.level.as_str(),
            row.precision,
            row.recall,
            row.f1
        );
    }
    for row in &report.macro_rows {
        let _ = writeln!(
            out,
            "{:<8} {:<8} {:>8.4} {:>8.4} {:>8.4}",
            format!("{}*", row.category_set),
            format!("{} macro", row.level.as_str()),
            row.precision,
            row.recall,
            row.f1
        );
    }
    out
}

/// Machine-readable comma-separated rows.
pub fn render_csv(report: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str("section,name,level,gold,system,agree,precision,recall,f1\n");
    for row in &report.rows {
        let _ = writeln!(
            out,
            "subcategory,{},{},{},{},{},{},{},{}",
            row.subcategory.as_str(),
            report.level.as_str(),
            row.n_gold,
            row.n_system,
            row.n_agree,
            row.precision,
            row.recall,
            row.f1
        );
    }
    for row in &report.overall {
        let _ = writeln!(
            out,
            "overall-micro,{},{},,,,{},{},{}",
            row.category_set,
            row.level.as_str(),
            row.precision,
            row.recall,
            row.f1
        );
    }
    for row in &report.macro_rows {
        let _ = writeln!(
            out,
            "overall-macro,{},{},,,,{},{},{}",
            row.category_set,
            row.level.as_str(),
            row.precision,
            row.recall,
            row.f1
        );
    }
    out
}
