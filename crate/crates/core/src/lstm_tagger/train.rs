//! Per-sentence SGD training of the neural tagger.
//!
//! Batch size 1, seeded shuffle each epoch, gradient clipped to a global
//! norm, dropout on the BiLSTM output. After each epoch the tagger runs
//! over the held-out split and the best-epoch parameters are retained.
//! With the lattice enabled the loss is the sequence NLL; the no-lattice
//! ablation trains a per-token cross-entropy on the emission layer.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Document;
use crate::errors::{DeidError, Result};
use crate::eval::{aggregate, match_strict, AggMode, CategorySet, MatchCounts};
use crate::features::GazetteerSet;
use crate::mix_seed;
use crate::tagscheme::{self, LabelAlphabet};
use crate::tensorcore::Tape;

use super::lattice::{nll_node, BoundTrans};
use super::{
    build_char_vocab, Bound, EmbeddingTable, EmissionForm, LstmDims, LstmModel, RepConfig,
    SentenceInput,
};

/// Training hyperparameters.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub dropout: f64,
    pub epochs: usize,
    pub clip_norm: f64,
    pub seed: u64,
    pub dims: LstmDims,
    pub rep: RepConfig,
    pub use_lattice: bool,
    pub emission_form: EmissionForm,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.005,
            dropout: 0.5,
            epochs: 50,
            clip_norm: 5.0,
            seed: 1,
            dims: LstmDims::default(),
            rep: RepConfig::default(),
            use_lattice: true,
            emission_form: EmissionForm::Logits,
        }
    }
}

/// One epoch's log line.
#[derive(Debug, Clone)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub valid_f1: f64,
    pub best: bool,
}

struct TrainSentence {
    input: SentenceInput,
    labels: Vec<usize>,
}

fn collect_sentences(
    docs: &[Document],
    model: &LstmModel,
    gazetteers: &GazetteerSet,
    alphabet: &LabelAlphabet,
) -> Result<Vec<TrainSentence>> {
    let mut out = Vec::new();
    for doc in docs {
        if doc.tokens.is_empty() && !doc.text.trim().is_empty() {
            return Err(DeidError::NotPreprocessed(doc.id.clone()));
        }
        let label_seqs = tagscheme::encode_document(doc)?;
        for (sent, labels) in doc.sentences.iter().zip(label_seqs) {
            let texts: Vec<&str> = doc
                .sentence_tokens(sent)
                .iter()
                .map(|t| t.text.as_str())
                .collect();
            if texts.is_empty() {
                continue;
            }
            let ids = labels
                .into_iter()
                .map(|l| {
                    alphabet
                        .id(l)
                        .ok_or_else(|| DeidError::InvalidArgument(format!("label {l} not in alphabet")))
                })
                .collect::<Result<Vec<usize>>>()?;
            out.push(TrainSentence {
                input: model.prepare_sentence(&texts, gazetteers),
                labels: ids,
            });
        }
    }
    Ok(out)
}

/// Strict micro-F1 of the model over a document set.
pub fn strict_micro_f1(
    model: &LstmModel,
    docs: &[Document],
    gazetteers: &GazetteerSet,
) -> Result<f64> {
    let per_doc: Vec<MatchCounts> = docs
        .iter()
        .map(|doc| {
            let spans = model.tag_document(doc, gazetteers)?;
            Ok(match_strict(&doc.gold, &spans))
        })
        .collect::<Result<_>>()?;
    let (_, _, f1) = aggregate(&per_doc, AggMode::Micro, &CategorySet::i2b2());
    Ok(f1)
}

/// Trains on `train_docs`, validating on `valid_docs` after each epoch
/// and keeping the best-epoch parameters.
pub fn train(
    train_docs: &[Document],
    valid_docs: &[Document],
    embeddings: EmbeddingTable,
    config: &TrainConfig,
    gazetteers: &GazetteerSet,
) -> Result<(LstmModel, Vec<EpochLog>)> {
    if train_docs.is_empty() {
        return Err(DeidError::EmptyCorpus);
    }
    if config.learning_rate <= 0.0 {
        return Err(DeidError::InvalidArgument(format!(
            "learning rate must be positive, got {}",
            config.learning_rate
        )));
    }
    if !(0.0..1.0).contains(&config.dropout) {
        return Err(DeidError::InvalidArgument(format!(
            "dropout probability {} outside [0, 1)",
            config.dropout
        )));
    }
    if embeddings.dim() != config.dims.word_dim {
        return Err(DeidError::InvalidArgument(format!(
            "embedding dim {} does not match configured word dim {}",
            embeddings.dim(),
            config.dims.word_dim
        )));
    }
    let alphabet = LabelAlphabet::full();
    let char_vocab = build_char_vocab(train_docs);
    let mut model = LstmModel::init(
        alphabet.clone(),
        char_vocab,
        embeddings,
        config.dims,
        config.rep,
        config.use_lattice,
        config.emission_form,
        config.seed,
    );
    let sentences = collect_sentences(train_docs, &model, gazetteers, &alphabet)?;
    if sentences.is_empty() {
        return Err(DeidError::EmptyCorpus);
    }

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, 0x5f5f));
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, 0xd0d0));
    let mut order: Vec<usize> = (0..sentences.len()).collect();
    let mut logs = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, LstmModel)> = None;

    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for &si in &order {
            let sent = &sentences[si];
            let loss = sgd_step(&mut model, sent, config, &mut dropout_rng)?;
            if !loss.is_finite() {
                return Err(DeidError::Numerical(format!(
                    "non-finite loss at epoch {epoch}, sentence {si} (len {})",
                    sent.labels.len()
                )));
            }
            loss_sum += loss;
        }
        let valid_f1 = if valid_docs.is_empty() {
            0.0
        } else {
            strict_micro_f1(&model, valid_docs, gazetteers)?
        };
        let is_best = best.as_ref().is_none_or(|(f, _)| valid_f1 > *f);
        if is_best {
            best = Some((valid_f1, model.clone()));
        }
        logs.push(EpochLog {
            epoch,
            mean_loss: loss_sum / sentences.len() as f64,
            valid_f1,
            best: is_best,
        });
    }
    let final_model = if valid_docs.is_empty() {
        model
    } else {
        best.map(|(_, m)| m).unwrap_or(model)
    };
    Ok((final_model, logs))
}

fn sgd_step(
    model: &mut LstmModel,
    sent: &TrainSentence,
    config: &TrainConfig,
    dropout_rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let mut tape = Tape::new();
    let bound = Bound::bind(&mut tape, model);
    let dropout = if config.dropout > 0.0 {
        Some((config.dropout, &mut *dropout_rng))
    } else {
        None
    };
    let em = model.emissions(&mut tape, &bound, &sent.input, dropout)?;
    let loss_node = if config.use_lattice {
        let trans = BoundTrans {
            inner: bound.trans_inner,
            start: bound.trans_start,
            end: bound.trans_end,
        };
        let rows = match config.emission_form {
            EmissionForm::Probabilities => &em.p_rows,
            EmissionForm::Logits => &em.logit_rows,
        };
        nll_node(&mut tape, rows, &trans, &sent.labels)?
    } else {
        // per-token cross-entropy on the emission logits
        let mut terms = Vec::with_capacity(sent.labels.len());
        for (t, &y) in sent.labels.iter().enumerate() {
            let lse = tape.log_sum_exp(em.logit_rows[t])?;
            let gold = tape.pick(em.logit_rows[t], y)?;
            terms.push(tape.sub(lse, gold)?);
        }
        let stacked = tape.concat(&terms)?;
        tape.sum(stacked)
    };
    let loss = tape.value(loss_node).data[0];
    let grads = tape.backward(loss_node)?;
    let ids = bound.ids();

    // global-norm clip
    let mut sq = 0.0;
    for &id in &ids {
        sq += grads.get(id).iter().map(|g| g * g).sum::<f64>();
    }
    let norm = sq.sqrt();
    let scale = if norm > config.clip_norm && norm > 0.0 {
        config.clip_norm / norm
    } else {
        1.0
    };
    let lr = config.learning_rate * scale;
    for (tensor, &id) in model.trainable_mut().into_iter().zip(&ids) {
        for (w, g) in tensor.data.iter_mut().zip(grads.get(id)) {
            *w -= lr * g;
        }
    }
    Ok(loss)
}
