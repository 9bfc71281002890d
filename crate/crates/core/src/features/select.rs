//! Greedy feature-group selection: add candidate groups in order, keep a
//! group only if the validation score does not decrease. O(n) evaluations
//! instead of the 2^n exhaustive search.

use crate::errors::Result;

/// One selection step: the candidate group, the score with it added, and
/// whether it was kept.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionStep<G> {
    pub group: G,
    pub score: f64,
    pub kept: bool,
}

/// Outcome of [`greedy_select`].
#[derive(Debug, Clone, PartialEq)]
pub struct GreedySelection<G> {
    pub kept: Vec<G>,
    pub baseline: f64,
    pub steps: Vec<SelectionStep<G>>,
}

/// Runs the greedy procedure. `eval_fn` trains and scores on a validation
/// split given a candidate group set; its failures propagate.
pub fn greedy_select<G, E>(groups: &[G], mut eval_fn: E) -> Result<GreedySelection<G>>
where
    G: Copy,
    E: FnMut(&[G]) -> Result<f64>,
{
    let baseline = eval_fn(&[])?;
    let mut kept: Vec<G> = Vec::new();
    let mut best = baseline;
    let mut steps = Vec::with_capacity(groups.len());
    for &g in groups {
        let mut candidate = kept.clone();
        candidate.push(g);
        let score = eval_fn(&candidate)?;
        let keep = score >= best;
        if keep {
            kept = candidate;
            best = score;
        }
        steps.push(SelectionStep {
            group: g,
            score,
            kept: keep,
        });
    }
    Ok(GreedySelection {
        kept,
        baseline,
        steps,
    })
}
