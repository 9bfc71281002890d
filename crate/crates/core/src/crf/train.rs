//! Regularized maximum-likelihood training of the CRF.
//!
//! The objective is `−Σ log p(Y|X) + ‖θ‖²/(2c)`; its gradient is
//! (expected − empirical) feature counts plus `θ/c`, with expectations
//! from forward–backward. Minimization is quasi-Newton (L-BFGS) with a
//! backtracking line search, starting from θ = 0, which makes training
//! deterministic given corpus order.

use crate::corpus::Document;
use crate::errors::{DeidError, Result};
use crate::features::{
    build_index, document_features, FeatureExtractor, FeatureGroup, GazetteerSet, Sidecar,
};
use crate::tagscheme::{self, Label, LabelAlphabet};

use super::lbfgs::{minimize, IterationLog, LbfgsParams};
use super::{log_sum_exp, weight_count, CrfModel};

/// Hyperparameters. `c` is the CRF++-style regularization constant
/// (penalty ‖θ‖²/(2c)); `cutoff` is the feature-frequency threshold.
#[derive(Debug, Clone)]
pub struct CrfHyper {
    pub c: f64,
    pub cutoff: u32,
    pub max_iters: usize,
    pub tolerance: f64,
}

impl Default for CrfHyper {
    fn default() -> Self {
        CrfHyper {
            c: 10.0,
            cutoff: 4,
            max_iters: 100,
            tolerance: 1e-4,
        }
    }
}

/// A featurized, label-encoded sentence ready for training.
#[derive(Debug, Clone)]
pub struct EncodedSentence {
    /// Active indexed feature ids per position.
    pub features: Vec<Vec<u32>>,
    /// Gold label ids per position.
    pub labels: Vec<usize>,
}

struct Objective<'a> {
    n_features: usize,
    n_labels: usize,
    c: f64,
    batch: &'a [EncodedSentence],
}

impl Objective<'_> {
    /// Forward–backward with the transition exponentials `E[i][j] =
    /// exp(trans[i][j])` hoisted out of the per-position recursions:
    /// `α_t(y) = m + ln(Σ_i e^{α_{t-1}(i) − m} · E[i][y]) + obs_t(y)`
    /// turns the inner loops into plain multiply–adds. Shifting by the
    /// running max keeps every exponential ≤ max(1, E).
    fn eval(&self, w: &[f64]) -> (f64, Vec<f64>) {
        let l = self.n_labels;
        let trans_off = self.n_features * l;
        let trans = &w[trans_off..];
        let e_trans: Vec<f64> = trans[..l * l].iter().map(|v| v.exp()).collect();
        let mut value = 0.0;
        let mut grad = vec![0.0; w.len()];
        let mut scratch = vec![0.0; l];
        let mut ea = vec![0.0; l];
        let mut eb = vec![0.0; l];

        let max_of = |xs: &[f64]| xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

        for sent in self.batch {
            let t_len = sent.features.len();
            if t_len == 0 {
                continue;
            }
            // observation scores
            let mut obs = vec![0.0; t_len * l];
            for (t, feats) in sent.features.iter().enumerate() {
                for &f in feats {
                    let base = f as usize * l;
                    for y in 0..l {
                        obs[t * l + y] += w[base + y];
                    }
                }
            }
            // forward
            let mut alpha = vec![0.0; t_len * l];
            for y in 0..l {
                alpha[y] = trans[l * l + y] + obs[y];
            }
            for t in 1..t_len {
                let prev = &alpha[(t - 1) * l..t * l];
                let m = max_of(prev);
                for (e, a) in ea.iter_mut().zip(prev) {
                    *e = (a - m).exp();
                }
                scratch.iter_mut().for_each(|s| *s = 0.0);
                for i in 0..l {
                    let w_i = ea[i];
                    if w_i == 0.0 {
                        continue;
                    }
                    let row = &e_trans[i * l..(i + 1) * l];
                    for (s, e) in scratch.iter_mut().zip(row) {
                        *s += w_i * e;
                    }
                }
                for y in 0..l {
                    alpha[t * l + y] = m + scratch[y].ln() + obs[t * l + y];
                }
            }
            let logz = log_sum_exp(&alpha[(t_len - 1) * l..]);
            // backward
            let mut beta = vec![0.0; t_len * l];
            for t in (0..t_len - 1).rev() {
                let m = (0..l)
                    .map(|j| obs[(t + 1) * l + j] + beta[(t + 1) * l + j])
                    .fold(f64::NEG_INFINITY, f64::max);
                for j in 0..l {
                    eb[j] = (obs[(t + 1) * l + j] + beta[(t + 1) * l + j] - m).exp();
                }
                for y in 0..l {
                    let row = &e_trans[y * l..(y + 1) * l];
                    let s: f64 = row.iter().zip(&eb).map(|(e, b)| e * b).sum();
                    beta[t * l + y] = m + s.ln();
                }
            }
            // data term and empirical counts
            let mut gold_score = 0.0;
            let mut prev = l; // BOS row
            for (t, (&y, feats)) in sent.labels.iter().zip(&sent.features).enumerate() {
                gold_score += trans[prev * l + y] + obs[t * l + y];
                grad[trans_off + prev * l + y] -= 1.0;
                for &f in feats {
                    grad[f as usize * l + y] -= 1.0;
                }
                prev = y;
            }
            value += logz - gold_score;
            // expected observation counts
            for (t, feats) in sent.features.iter().enumerate() {
                for y in 0..l {
                    scratch[y] = (alpha[t * l + y] + beta[t * l + y] - logz).exp();
                }
                for &f in feats {
                    let base = f as usize * l;
                    for y in 0..l {
                        grad[base + y] += scratch[y];
                    }
                }
                if t == 0 {
                    for y in 0..l {
                        grad[trans_off + l * l + y] += scratch[y];
                    }
                }
            }
            // expected transition counts: p_t(i→j) = ea[i] · E[i][j] ·
            // eb[j] with the α max and log Z folded into eb
            for t in 1..t_len {
                let prev = &alpha[(t - 1) * l..t * l];
                let m = max_of(prev);
                for (e, a) in ea.iter_mut().zip(prev) {
                    *e = (a - m).exp();
                }
                for j in 0..l {
                    eb[j] = (obs[t * l + j] + beta[t * l + j] + m - logz).exp();
                }
                for i in 0..l {
                    let w_i = ea[i];
                    if w_i == 0.0 {
                        continue;
                    }
                    let row = &e_trans[i * l..(i + 1) * l];
                    let out = &mut grad[trans_off + i * l..trans_off + (i + 1) * l];
                    for ((g, e), b) in out.iter_mut().zip(row).zip(&eb) {
                        *g += w_i * e * b;
                    }
                }
            }
        }
        // L2 penalty
        let mut reg = 0.0;
        for (gi, wi) in grad.iter_mut().zip(w) {
            reg += wi * wi;
            *gi += wi / self.c;
        }
        value += reg / (2.0 * self.c);
        (value, grad)
    }
}

/// Objective value and gradient for a batch, at the model's current
/// weights.
pub fn neg_loglik_grad(model: &CrfModel, batch: &[EncodedSentence]) -> (f64, Vec<f64>) {
    Objective {
        n_features: model.index.len(),
        n_labels: model.n_labels(),
        c: model.c,
        batch,
    }
    .eval(&model.weights)
}

/// Featurizes and label-encodes a pre-processed corpus against an
/// existing index and alphabet.
pub fn encode_corpus(
    docs: &[Document],
    model_index: &crate::features::FeatureIndex,
    alphabet: &LabelAlphabet,
    extractor: &FeatureExtractor,
    sidecar: Option<&Sidecar>,
) -> Result<Vec<EncodedSentence>> {
    let mut out = Vec::new();
    for doc in docs {
        if doc.tokens.is_empty() && !doc.text.trim().is_empty() {
            return Err(DeidError::NotPreprocessed(doc.id.clone()));
        }
        let feats = document_features(doc, extractor, sidecar);
        let labels = tagscheme::encode_document(doc)?;
        for (sent_feats, sent_labels) in feats.into_iter().zip(labels) {
            let features = sent_feats.iter().map(|f| model_index.project(f)).collect();
            let labels = sent_labels
                .into_iter()
                .map(|lab| {
                    alphabet.id(lab).ok_or_else(|| {
                        DeidError::InvalidArgument(format!("label {lab} not in alphabet"))
                    })
                })
                .collect::<Result<Vec<usize>>>()?;
            out.push(EncodedSentence { features, labels });
        }
    }
    Ok(out)
}

/// Trains a CRF on a pre-processed corpus. Returns the model and the
/// optimizer's iteration log.
pub fn train(
    docs: &[Document],
    hyper: &CrfHyper,
    gazetteers: &GazetteerSet,
    sidecar: Option<&Sidecar>,
    groups: &[FeatureGroup],
) -> Result<(CrfModel, Vec<IterationLog>)> {
    if docs.is_empty() {
        return Err(DeidError::EmptyCorpus);
    }
    if hyper.c <= 0.0 {
        return Err(DeidError::InvalidArgument(format!(
            "regularization constant c must be positive, got {}",
            hyper.c
        )));
    }
    let extractor = FeatureExtractor::with_groups(gazetteers, groups);
    let index = build_index(docs, &extractor, sidecar, hyper.cutoff);
    let alphabet = LabelAlphabet::full();
    let batch = encode_corpus(docs, &index, &alphabet, &extractor, sidecar)?;
    let objective = Objective {
        n_features: index.len(),
        n_labels: alphabet.len(),
        c: hyper.c,
        batch: &batch,
    };
    let params = LbfgsParams {
        max_iters: hyper.max_iters,
        tolerance: hyper.tolerance,
        ..LbfgsParams::default()
    };
    let x0 = vec![0.0; weight_count(index.len(), alphabet.len())];
    let (weights, logs) = minimize(x0, &params, |w| objective.eval(w))?;
    Ok((
        CrfModel {
            index,
            alphabet,
            c: hyper.c,
            weights,
        },
        logs,
    ))
}

impl CrfModel {
    /// Viterbi labels for one featurized sentence.
    pub fn viterbi(&self, features: &[Vec<u32>]) -> Vec<Label> {
        self.lattice(features)
            .viterbi()
            .into_iter()
            .map(|id| self.alphabet.label(id))
            .collect()
    }

    /// Tags a pre-processed document: featurize, decode per sentence,
    /// convert labels back to spans.
    pub fn tag_document(
        &self,
        doc: &Document,
        gazetteers: &GazetteerSet,
        sidecar: Option<&Sidecar>,
        groups: &[FeatureGroup],
    ) -> Result<Vec<crate::corpus::PhiSpan>> {
        let extractor = FeatureExtractor::with_groups(gazetteers, groups);
        let feats = document_features(doc, &extractor, sidecar);
        let labels: Vec<Vec<Label>> = feats
            .iter()
            .map(|sent| {
                let projected: Vec<Vec<u32>> =
                    sent.iter().map(|f| self.index.project(f)).collect();
                self.viterbi(&projected)
            })
            .collect();
        tagscheme::decode_document(doc, &labels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{PhiSpan, Subcategory};
    use crate::features::FeatureIndex;
    use crate::preprocess::AbbrevList;
    use crate::tagscheme::Prefix;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn tiny_alphabet(n: usize) -> LabelAlphabet {
        let mut labels = vec![Label::Outside];
        for sub in Subcategory::ALL.iter().take(n - 1) {
            labels.push(Label::Tagged(Prefix::Unit, *sub));
        }
        LabelAlphabet::from_labels(labels)
    }

    fn tiny_model(n_features: usize, n_labels: usize, c: f64) -> CrfModel {
        let names = (0..n_features).map(|i| format!("f{i}")).collect();
        CrfModel::zeroed(FeatureIndex::from_names(names, 1), tiny_alphabet(n_labels), c)
    }

    fn random_batch(
        rng: &mut ChaCha8Rng,
        n_features: usize,
        n_labels: usize,
        n_sents: usize,
    ) -> Vec<EncodedSentence> {
        (0..n_sents)
            .map(|_| {
                let t_len = rng.gen_range(1..=4);
                let features = (0..t_len)
                    .map(|_| {
                        let k = rng.gen_range(1..=3.min(n_features));
                        let mut ids: Vec<u32> =
                            (0..k).map(|_| rng.gen_range(0..n_features) as u32).collect();
                        ids.sort_unstable();
                        ids.dedup();
                        ids
                    })
                    .collect();
                let labels = (0..t_len).map(|_| rng.gen_range(0..n_labels)).collect();
                EncodedSentence { features, labels }
            })
            .collect()
    }

    #[test]
    fn zero_weights_value_is_t_ln_l() {
        let model = tiny_model(4, 3, 10.0);
        let batch = vec![EncodedSentence {
            features: vec![vec![0], vec![1, 2]],
            labels: vec![0, 1],
        }];
        let (value, _) = neg_loglik_grad(&model, &batch);
        assert!((value - 2.0 * 3.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn duplicated_sentence_doubles_the_data_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut model = tiny_model(5, 3, 10.0);
        for w in &mut model.weights {
            *w = rng.gen_range(-0.5..0.5);
        }
        let sent = random_batch(&mut rng, 5, 3, 1);
        let reg: f64 =
            model.weights.iter().map(|w| w * w).sum::<f64>() / (2.0 * model.c);
        let (v1, _) = neg_loglik_grad(&model, &sent);
        let doubled = vec![sent[0].clone(), sent[0].clone()];
        let (v2, _) = neg_loglik_grad(&model, &doubled);
        assert!((v2 - (2.0 * (v1 - reg) + reg)).abs() < 1e-9);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for trial in 0..20 {
            let n_features = rng.gen_range(2..=6);
            let n_labels = rng.gen_range(2..=5);
            let mut model = tiny_model(n_features, n_labels, rng.gen_range(0.5..20.0));
            for w in &mut model.weights {
                *w = rng.gen_range(-1.0..1.0);
            }
            let batch = random_batch(&mut rng, n_features, n_labels, 3);
            let (_, grad) = neg_loglik_grad(&model, &batch);
            let eps = 1e-5;
            for _ in 0..20 {
                let k = rng.gen_range(0..model.weights.len());
                let mut plus = model.clone();
                plus.weights[k] += eps;
                let mut minus = model.clone();
                minus.weights[k] -= eps;
                let fd = (neg_loglik_grad(&plus, &batch).0
                    - neg_loglik_grad(&minus, &batch).0)
                    / (2.0 * eps);
                let rel = (grad[k] - fd).abs() / grad[k].abs().max(fd.abs()).max(1.0);
                assert!(
                    rel < 1e-4,
                    "trial {trial} coord {k}: analytic {} vs fd {fd}",
                    grad[k]
                );
            }
        }
    }

    #[test]
    fn memorizes_a_single_training_sentence() {
        let text = "Dr. Vincent saw ZIP 02138 in Boston";
        let mut doc = Document::new(
            "d0",
            text,
            vec![
                PhiSpan::new(4, 11, Subcategory::Doctor),
                PhiSpan::new(20, 25, Subcategory::Zip),
                PhiSpan::new(29, 35, Subcategory::City),
            ],
        )
        .unwrap();
        doc.preprocess(&AbbrevList::bundled(), 200);
        let gaz = GazetteerSet::bundled();
        let hyper = CrfHyper {
            c: 100.0,
            cutoff: 1,
            max_iters: 150,
            tolerance: 1e-6,
        };
        let docs = vec![doc];
        let (model, logs) = train(&docs, &hyper, &gaz, None, &FeatureGroup::ALL).unwrap();
        // objective is non-increasing over accepted steps
        for w in logs.windows(2) {
            assert!(w[1].value <= w[0].value + 1e-9);
        }
        let spans = model
            .tag_document(&docs[0], &gaz, None, &FeatureGroup::ALL)
            .unwrap();
        assert_eq!(spans, docs[0].gold);
    }

    #[test]
    fn empty_corpus_is_rejected() {
        let gaz = GazetteerSet::bundled();
        assert!(matches!(
            train(&[], &CrfHyper::default(), &gaz, None, &FeatureGroup::ALL),
            Err(DeidError::EmptyCorpus)
        ));
    }
}
