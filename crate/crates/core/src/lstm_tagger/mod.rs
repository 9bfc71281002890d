//! The neural tagger: enhanced word representations (pre-trained word
//! embedding + case-sensitive character-level BiLSTM + capital/dictionary
//! feature embeddings), a word-level BiLSTM with coupled input/forget
//! gates, a softmax emission layer, and a transition-matrix decoding
//! lattice with exact partition function.
//!
//! The emission probabilities themselves (not pre-softmax logits) feed
//! the lattice scores, which is the literal form of the classification +
//! transition score combination; the no-lattice ablation trains and
//! decodes on the per-token distribution alone.
//!
//! Pre-trained word vectors are frozen; out-of-vocabulary surfaces get a
//! vector drawn once per surface form from a seeded stream keyed by the
//! surface hash, so runs are reproducible regardless of document order.

mod embedding;
mod io;
mod lattice;
mod train;

pub use embedding::{
    load_embeddings, parse_embeddings, save_embeddings, train_skipgram, EmbeddingTable,
    SkipGramConfig,
};
pub use io::{load_model, save_model};
pub use lattice::{
    log_partition, log_partition_node, nll, nll_node, sequence_score, sequence_score_node,
    viterbi, BoundTrans, TransMatrix,
};
pub use train::{strict_micro_f1, train, EpochLog, TrainConfig};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Document, PhiSpan};
use crate::errors::{DeidError, Result};
use crate::features::{capital_code, code_index, dict_code, GazetteerSet};
use crate::tagscheme::{self, Label, LabelAlphabet};
use crate::tensorcore::{NodeId, Tape, Tensor};
use crate::{fnv1a64, mix_seed};

/// Layer dimensions (defaults follow the published setup).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmDims {
    pub char_dim: usize,
    pub char_hidden: usize,
    pub word_dim: usize,
    pub feat_dim: usize,
    pub word_hidden: usize,
}

impl Default for LstmDims {
    fn default() -> Self {
        LstmDims {
            char_dim: 25,
            char_hidden: 25,
            word_dim: 100,
            feat_dim: 6,
            word_hidden: 64,
        }
    }
}

/// What the lattice consumes as per-token scores: the softmax
/// probabilities (the literal written form) or the pre-softmax logits
/// (the conventional formulation). The probability form squeezes
/// emission gradients by a factor of ~1/d_l and caps each position's
/// score contribution at 1, so the logit form is the practical default;
/// the probability form stays one flag away.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmissionForm {
    Probabilities,
    Logits,
}

impl EmissionForm {
    pub fn as_str(self) -> &'static str {
        match self {
            EmissionForm::Probabilities => "prob",
            EmissionForm::Logits => "logit",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "prob" | "probabilities" => Ok(EmissionForm::Probabilities),
            "logit" | "logits" => Ok(EmissionForm::Logits),
            _ => Err(DeidError::InvalidArgument(format!(
                "unknown emission form `{s}`"
            ))),
        }
    }
}

/// Which parts of the enhanced word representation are active. Dropping
/// the pre-trained part keeps its width and substitutes the OOV random
/// scheme for every word; dropping the char or feature parts shrinks the
/// representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RepConfig {
    pub use_char: bool,
    pub use_pretrained: bool,
    pub use_feature: bool,
}

impl Default for RepConfig {
    fn default() -> Self {
        RepConfig {
            use_char: true,
            use_pretrained: true,
            use_feature: true,
        }
    }
}

/// Gate parameters of one coupled-gate LSTM direction.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCellParams {
    pub w_z: Tensor,
    pub u_z: Tensor,
    pub b_z: Tensor,
    pub w_i: Tensor,
    pub u_i: Tensor,
    pub v_i: Tensor,
    pub b_i: Tensor,
    pub w_o: Tensor,
    pub u_o: Tensor,
    pub v_o: Tensor,
    pub b_o: Tensor,
}

fn xavier(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Tensor::matrix(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect(),
    )
}

impl LstmCellParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        let mat = |r, c| Tensor::matrix(r, c, vec![0.0; r * c]);
        LstmCellParams {
            w_z: mat(hidden, input),
            u_z: mat(hidden, hidden),
            b_z: Tensor::zeros_vec(hidden),
            w_i: mat(hidden, input),
            u_i: mat(hidden, hidden),
            v_i: mat(hidden, hidden),
            b_i: Tensor::zeros_vec(hidden),
            w_o: mat(hidden, input),
            u_o: mat(hidden, hidden),
            v_o: mat(hidden, hidden),
            b_o: Tensor::zeros_vec(hidden),
        }
    }

    pub fn init(rng: &mut ChaCha8Rng, input: usize, hidden: usize) -> Self {
        LstmCellParams {
            w_z: xavier(rng, hidden, input),
            u_z: xavier(rng, hidden, hidden),
            b_z: Tensor::zeros_vec(hidden),
            w_i: xavier(rng, hidden, input),
            u_i: xavier(rng, hidden, hidden),
            v_i: xavier(rng, hidden, hidden),
            b_i: Tensor::zeros_vec(hidden),
            w_o: xavier(rng, hidden, input),
            u_o: xavier(rng, hidden, hidden),
            v_o: xavier(rng, hidden, hidden),
            b_o: Tensor::zeros_vec(hidden),
        }
    }

    pub fn hidden(&self) -> usize {
        self.b_z.len()
    }

    fn tensors(&self) -> [(&'static str, &Tensor); 11] {
        [
            ("w_z", &self.w_z),
            ("u_z", &self.u_z),
            ("b_z", &self.b_z),
            ("w_i", &self.w_i),
            ("u_i", &self.u_i),
            ("v_i", &self.v_i),
            ("b_i", &self.b_i),
            ("w_o", &self.w_o),
            ("u_o", &self.u_o),
            ("v_o", &self.v_o),
            ("b_o", &self.b_o),
        ]
    }

    fn tensors_mut(&mut self) -> [(&'static str, &mut Tensor); 11] {
        [
            ("w_z", &mut self.w_z),
            ("u_z", &mut self.u_z),
            ("b_z", &mut self.b_z),
            ("w_i", &mut self.w_i),
            ("u_i", &mut self.u_i),
            ("v_i", &mut self.v_i),
            ("b_i", &mut self.b_i),
            ("w_o", &mut self.w_o),
            ("u_o", &mut self.u_o),
            ("v_o", &mut self.v_o),
            ("b_o", &mut self.b_o),
        ]
    }
}

/// Gate node ids for one bound cell on a tape.
#[derive(Clone, Copy)]
pub struct BoundCell {
    w_z: NodeId,
    u_z: NodeId,
    b_z: NodeId,
    w_i: NodeId,
    u_i: NodeId,
    v_i: NodeId,
    b_i: NodeId,
    w_o: NodeId,
    u_o: NodeId,
    v_o: NodeId,
    b_o: NodeId,
}

impl BoundCell {
    fn bind(tape: &mut Tape, p: &LstmCellParams) -> Self {
        BoundCell {
            w_z: tape.leaf(p.w_z.clone()),
            u_z: tape.leaf(p.u_z.clone()),
            b_z: tape.leaf(p.b_z.clone()),
            w_i: tape.leaf(p.w_i.clone()),
            u_i: tape.leaf(p.u_i.clone()),
            v_i: tape.leaf(p.v_i.clone()),
            b_i: tape.leaf(p.b_i.clone()),
            w_o: tape.leaf(p.w_o.clone()),
            u_o: tape.leaf(p.u_o.clone()),
            v_o: tape.leaf(p.v_o.clone()),
            b_o: tape.leaf(p.b_o.clone()),
        }
    }

    fn ids(&self) -> [NodeId; 11] {
        [
            self.w_z, self.u_z, self.b_z, self.w_i, self.u_i, self.v_i, self.b_i, self.w_o,
            self.u_o, self.v_o, self.b_o,
        ]
    }
}

/// One coupled-gate LSTM step on a tape:
/// `z = tanh(Wz x + Uz h + bz)`, `i = σ(Wi x + Ui h + Vi c + bi)`,
/// `c' = (1 − i) ⊙ c + i ⊙ z`, `o = σ(Wo x + Uo h + Vo c + bo)`,
/// `h' = o ⊙ tanh(c')`.
pub fn lstm_cell(
    tape: &mut Tape,
    cell: &BoundCell,
    x: NodeId,
    h_prev: NodeId,
    c_prev: NodeId,
) -> Result<(NodeId, NodeId)> {
    let affine3 = |tape: &mut Tape, w, u, b| -> Result<NodeId> {
        let wx = tape.matvec(w, x)?;
        let uh = tape.matvec(u, h_prev)?;
        let s = tape.add(wx, uh)?;
        tape.add(s, b)
    };
    let affine4 = |tape: &mut Tape, w, u, v, b| -> Result<NodeId> {
        let base = affine3(tape, w, u, b)?;
        let vc = tape.matvec(v, c_prev)?;
        tape.add(base, vc)
    };
    let z_pre = affine3(tape, cell.w_z, cell.u_z, cell.b_z)?;
    let z = tape.tanh(z_pre);
    let i_pre = affine4(tape, cell.w_i, cell.u_i, cell.v_i, cell.b_i)?;
    let i = tape.sigmoid(i_pre);
    let forget = tape.one_minus(i);
    let keep = tape.mul(forget, c_prev)?;
    let write = tape.mul(i, z)?;
    let c = tape.add(keep, write)?;
    let o_pre = affine4(tape, cell.w_o, cell.u_o, cell.v_o, cell.b_o)?;
    let o = tape.sigmoid(o_pre);
    let c_tanh = tape.tanh(c);
    let h = tape.mul(o, c_tanh)?;
    Ok((h, c))
}

/// Value-level wrapper around [`lstm_cell`] for a single step.
pub fn lstm_cell_values(
    params: &LstmCellParams,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut tape = Tape::new();
    let cell = BoundCell::bind(&mut tape, params);
    let x = tape.leaf(Tensor::vector(x.to_vec()));
    let h = tape.leaf(Tensor::vector(h_prev.to_vec()));
    let c = tape.leaf(Tensor::vector(c_prev.to_vec()));
    let (h_out, c_out) = lstm_cell(&mut tape, &cell, x, h, c)?;
    Ok((tape.value(h_out).data.clone(), tape.value(c_out).data.clone()))
}

/// The full neural tagger model.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmModel {
    pub dims: LstmDims,
    pub rep: RepConfig,
    pub use_lattice: bool,
    pub emission_form: EmissionForm,
    pub alphabet: LabelAlphabet,
    /// Sorted case-sensitive character vocabulary; id 0 is UNK, chars
    /// map to `position + 1`.
    pub char_vocab: Vec<char>,
    pub char_table: Tensor,
    pub char_fwd: LstmCellParams,
    pub char_bwd: LstmCellParams,
    pub cap_table: Tensor,
    pub dict_table: Tensor,
    pub word_fwd: LstmCellParams,
    pub word_bwd: LstmCellParams,
    pub emit_w: Tensor,
    pub emit_b: Tensor,
    pub trans: TransMatrix,
    /// Frozen pre-trained embeddings (lowercased words).
    pub embeddings: EmbeddingTable,
    /// Seed of the OOV vector stream; persisted so tagging reproduces
    /// the training-time vectors.
    pub oov_seed: u64,
}

impl LstmModel {
    /// Width of the concatenated word representation.
    pub fn rep_width(&self) -> usize {
        rep_width(&self.dims, &self.rep)
    }

    pub fn n_labels(&self) -> usize {
        self.alphabet.len()
    }

    #[allow(clippy::too_many_arguments)]
    pub fn init(
        alphabet: LabelAlphabet,
        char_vocab: Vec<char>,
        embeddings: EmbeddingTable,
        dims: LstmDims,
        rep: RepConfig,
        use_lattice: bool,
        emission_form: EmissionForm,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x1417));
        let d_l = alphabet.len();
        let width = rep_width(&dims, &rep);
        let n_chars = char_vocab.len() + 1;
        LstmModel {
            dims,
            rep,
            use_lattice,
            emission_form,
            char_table: xavier(&mut rng, n_chars, dims.char_dim),
            char_fwd: LstmCellParams::init(&mut rng, dims.char_dim, dims.char_hidden),
            char_bwd: LstmCellParams::init(&mut rng, dims.char_dim, dims.char_hidden),
            cap_table: xavier(&mut rng, 16, dims.feat_dim),
            dict_table: xavier(&mut rng, 16, dims.feat_dim),
            word_fwd: LstmCellParams::init(&mut rng, width, dims.word_hidden),
            word_bwd: LstmCellParams::init(&mut rng, width, dims.word_hidden),
            emit_w: xavier(&mut rng, d_l, 2 * dims.word_hidden),
            emit_b: Tensor::zeros_vec(d_l),
            trans: TransMatrix::zeros(d_l),
            alphabet,
            char_vocab,
            embeddings,
            oov_seed: seed,
        }
    }

    pub fn char_id(&self, c: char) -> usize {
        match self.char_vocab.binary_search(&c) {
            Ok(i) => i + 1,
            Err(_) => 0,
        }
    }

    /// The deterministic OOV vector for a surface form: uniform in
    /// [−√(3/d), √(3/d)], keyed by (run seed, surface hash).
    pub fn oov_vector(&self, surface: &str) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(
            self.oov_seed,
            fnv1a64(surface.as_bytes()),
        ));
        let bound = (3.0 / self.dims.word_dim as f64).sqrt();
        (0..self.dims.word_dim)
            .map(|_| rng.gen_range(-bound..bound))
            .collect()
    }

    /// Resolves the frozen (non-trained) pieces of each token's
    /// representation: word vector, capital-code row, dictionary-code
    /// row.
    pub fn prepare_sentence(&self, texts: &[&str], gazetteers: &GazetteerSet) -> SentenceInput {
        let word_vecs = texts
            .iter()
            .map(|t| {
                if self.rep.use_pretrained {
                    self.embeddings
                        .get(t)
                        .map(|v| v.to_vec())
                        .unwrap_or_else(|| self.oov_vector(t))
                } else {
                    self.oov_vector(t)
                }
            })
            .collect();
        SentenceInput {
            texts: texts.iter().map(|t| t.to_string()).collect(),
            word_vecs,
            cap_idx: texts.iter().map(|t| code_index(&capital_code(t))).collect(),
            dict_idx: texts
                .iter()
                .map(|t| code_index(&dict_code(t, gazetteers)))
                .collect(),
        }
    }
}

fn rep_width(dims: &LstmDims, rep: &RepConfig) -> usize {
    let mut w = dims.word_dim;
    if rep.use_char {
        w += 2 * dims.char_hidden;
    }
    if rep.use_feature {
        w += 2 * dims.feat_dim;
    }
    w
}

/// Frozen per-token inputs of one sentence.
#[derive(Debug, Clone)]
pub struct SentenceInput {
    pub texts: Vec<String>,
    pub word_vecs: Vec<Vec<f64>>,
    pub cap_idx: Vec<usize>,
    pub dict_idx: Vec<usize>,
}

/// All model parameters bound as leaves on one tape, in a fixed order
/// shared with [`LstmModel::trainable_mut`].
pub struct Bound {
    pub char_table: NodeId,
    pub char_fwd: BoundCell,
    pub char_bwd: BoundCell,
    pub cap_table: NodeId,
    pub dict_table: NodeId,
    pub word_fwd: BoundCell,
    pub word_bwd: BoundCell,
    pub emit_w: NodeId,
    pub emit_b: NodeId,
    pub trans_inner: NodeId,
    pub trans_start: NodeId,
    pub trans_end: NodeId,
}

impl Bound {
    pub fn bind(tape: &mut Tape, model: &LstmModel) -> Self {
        Bound {
            char_table: tape.leaf(model.char_table.clone()),
            char_fwd: BoundCell::bind(tape, &model.char_fwd),
            char_bwd: BoundCell::bind(tape, &model.char_bwd),
            cap_table: tape.leaf(model.cap_table.clone()),
            dict_table: tape.leaf(model.dict_table.clone()),
            word_fwd: BoundCell::bind(tape, &model.word_fwd),
            word_bwd: BoundCell::bind(tape, &model.word_bwd),
            emit_w: tape.leaf(model.emit_w.clone()),
            emit_b: tape.leaf(model.emit_b.clone()),
            trans_inner: tape.leaf(model.trans.inner.clone()),
            trans_start: tape.leaf(model.trans.start.clone()),
            trans_end: tape.leaf(model.trans.end.clone()),
        }
    }

    /// Node ids in trainable order.
    pub fn ids(&self) -> Vec<NodeId> {
        let mut out = vec![self.char_table];
        out.extend(self.char_fwd.ids());
        out.extend(self.char_bwd.ids());
        out.push(self.cap_table);
        out.push(self.dict_table);
        out.extend(self.word_fwd.ids());
        out.extend(self.word_bwd.ids());
        out.push(self.emit_w);
        out.push(self.emit_b);
        out.push(self.trans_inner);
        out.push(self.trans_start);
        out.push(self.trans_end);
        out
    }
}

impl LstmModel {
    /// Named trainable tensors, in the order [`Bound::ids`] uses.
    pub fn trainable(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> = vec![("char_table".into(), &self.char_table)];
        for (prefix, cell) in [("char_fwd", &self.char_fwd), ("char_bwd", &self.char_bwd)] {
            out.extend(
                cell.tensors()
                    .into_iter()
                    .map(|(n, t)| (format!("{prefix}.{n}"), t)),
            );
        }
        out.push(("cap_table".into(), &self.cap_table));
        out.push(("dict_table".into(), &self.dict_table));
        for (prefix, cell) in [("word_fwd", &self.word_fwd), ("word_bwd", &self.word_bwd)] {
            out.extend(
                cell.tensors()
                    .into_iter()
                    .map(|(n, t)| (format!("{prefix}.{n}"), t)),
            );
        }
        out.push(("emit_w".into(), &self.emit_w));
        out.push(("emit_b".into(), &self.emit_b));
        out.push(("trans.inner".into(), &self.trans.inner));
        out.push(("trans.start".into(), &self.trans.start));
        out.push(("trans.end".into(), &self.trans.end));
        out
    }

    pub fn trainable_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = vec![&mut self.char_table];
        out.extend(self.char_fwd.tensors_mut().map(|(_, t)| t));
        out.extend(self.char_bwd.tensors_mut().map(|(_, t)| t));
        out.push(&mut self.cap_table);
        out.push(&mut self.dict_table);
        out.extend(self.word_fwd.tensors_mut().map(|(_, t)| t));
        out.extend(self.word_bwd.tensors_mut().map(|(_, t)| t));
        out.push(&mut self.emit_w);
        out.push(&mut self.emit_b);
        out.push(&mut self.trans.inner);
        out.push(&mut self.trans.start);
        out.push(&mut self.trans.end);
        out
    }

    /// Character-level word embedding: final forward and backward hidden
    /// states of the char BiLSTM, concatenated (2 × char_hidden wide).
    pub fn char_embed(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        word: &str,
    ) -> Result<NodeId> {
        if word.is_empty() {
            return Err(DeidError::InvalidArgument("char_embed of empty word".into()));
        }
        let ids: Vec<usize> = word.chars().map(|c| self.char_id(c)).collect();
        let run = |tape: &mut Tape, cell: &BoundCell, order: &[usize]| -> Result<NodeId> {
            let mut h = tape.leaf(Tensor::zeros_vec(self.dims.char_hidden));
            let mut c = tape.leaf(Tensor::zeros_vec(self.dims.char_hidden));
            for &id in order {
                let x = tape.row(bound.char_table, id)?;
                let (h2, c2) = lstm_cell(tape, cell, x, h, c)?;
                h = h2;
                c = c2;
            }
            Ok(h)
        };
        let fwd = run(tape, &bound.char_fwd, &ids)?;
        let rev: Vec<usize> = ids.iter().rev().copied().collect();
        let bwd = run(tape, &bound.char_bwd, &rev)?;
        tape.concat(&[fwd, bwd])
    }

    /// Enhanced representation of one token: char embedding ⊕ word vector
    /// ⊕ capital-code embedding ⊕ dictionary-code embedding.
    pub fn represent(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        input: &SentenceInput,
        t: usize,
    ) -> Result<NodeId> {
        let mut parts = Vec::new();
        if self.rep.use_char {
            parts.push(self.char_embed(tape, bound, &input.texts[t])?);
        }
        parts.push(tape.leaf(Tensor::vector(input.word_vecs[t].clone())));
        if self.rep.use_feature {
            parts.push(tape.row(bound.cap_table, input.cap_idx[t])?);
            parts.push(tape.row(bound.dict_table, input.dict_idx[t])?);
        }
        tape.concat(&parts)
    }

    /// Runs the word BiLSTM and emission layer over a sentence. Returns
    /// per-token softmax rows and the pre-softmax logits. Dropout (train
    /// mode only) applies to the BiLSTM output before the affine map.
    pub fn emissions(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        input: &SentenceInput,
        dropout: Option<(f64, &mut ChaCha8Rng)>,
    ) -> Result<EmissionNodes> {
        let t_len = input.texts.len();
        if t_len == 0 {
            return Err(DeidError::InvalidArgument("emissions of empty sentence".into()));
        }
        let reps: Vec<NodeId> = (0..t_len)
            .map(|t| self.represent(tape, bound, input, t))
            .collect::<Result<_>>()?;
        let run = |tape: &mut Tape, cell: &BoundCell, order: &[usize]| -> Result<Vec<NodeId>> {
            let mut h = tape.leaf(Tensor::zeros_vec(self.dims.word_hidden));
            let mut c = tape.leaf(Tensor::zeros_vec(self.dims.word_hidden));
            let mut out = vec![h; order.len()];
            for &t in order {
                let (h2, c2) = lstm_cell(tape, cell, reps[t], h, c)?;
                h = h2;
                c = c2;
                out[t] = h;
            }
            Ok(out)
        };
        let fwd_order: Vec<usize> = (0..t_len).collect();
        let bwd_order: Vec<usize> = (0..t_len).rev().collect();
        let fwd = run(tape, &bound.word_fwd, &fwd_order)?;
        let bwd = run(tape, &bound.word_bwd, &bwd_order)?;
        let mut drop = dropout;
        let mut p_rows = Vec::with_capacity(t_len);
        let mut logit_rows = Vec::with_capacity(t_len);
        for t in 0..t_len {
            let mut h = tape.concat(&[fwd[t], bwd[t]])?;
            if let Some((p, rng)) = drop.as_mut() {
                h = tape.dropout(h, *p, rng, true)?;
            }
            let wh = tape.matvec(bound.emit_w, h)?;
            let logits = tape.add(wh, bound.emit_b)?;
            logit_rows.push(logits);
            p_rows.push(tape.softmax(logits)?);
        }
        Ok(EmissionNodes { p_rows, logit_rows })
    }

    /// Decodes one prepared sentence (inference mode): Viterbi over the
    /// lattice, or per-token argmax when the lattice is disabled. The
    /// lattice consumes the same emission form the model was trained
    /// with.
    pub fn decode_sentence(
        &self,
        input: &SentenceInput,
        _gazetteers: &GazetteerSet,
    ) -> Result<Vec<Label>> {
        let mut tape = Tape::new();
        let bound = Bound::bind(&mut tape, self);
        let em = self.emissions(&mut tape, &bound, input, None)?;
        let rows = match self.emission_form {
            EmissionForm::Probabilities => &em.p_rows,
            EmissionForm::Logits => &em.logit_rows,
        };
        let scores: Vec<Vec<f64>> = rows
            .iter()
            .map(|&id| tape.value(id).data.clone())
            .collect();
        let ids = if self.use_lattice {
            lattice::viterbi(&scores, &self.trans)
        } else {
            scores
                .iter()
                .map(|row| {
                    row.iter()
                        .enumerate()
                        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(&a.0)))
                        .map(|(i, _)| i)
                        .unwrap_or(0)
                })
                .collect()
        };
        Ok(ids.into_iter().map(|i| self.alphabet.label(i)).collect())
    }

    /// Tags a pre-processed document end to end: represent → emissions →
    /// decode → spans, merged across sentences.
    pub fn tag_document(
        &self,
        doc: &Document,
        gazetteers: &GazetteerSet,
    ) -> Result<Vec<PhiSpan>> {
        let mut labels = Vec::with_capacity(doc.sentences.len());
        for sent in &doc.sentences {
            let texts: Vec<&str> = doc
                .sentence_tokens(sent)
                .iter()
                .map(|t| t.text.as_str())
                .collect();
            if texts.is_empty() {
                labels.push(Vec::new());
                continue;
            }
            let input = self.prepare_sentence(&texts, gazetteers);
            labels.push(self.decode_sentence(&input, gazetteers)?);
        }
        tagscheme::decode_document(doc, &labels)
    }
}

/// Emission-layer outputs for one sentence.
pub struct EmissionNodes {
    pub p_rows: Vec<NodeId>,
    pub logit_rows: Vec<NodeId>,
}

/// Builds the sorted case-sensitive character vocabulary of a corpus.
pub fn build_char_vocab(docs: &[Document]) -> Vec<char> {
    let mut chars: Vec<char> = docs
        .iter()
        .flat_map(|d| d.tokens.iter().flat_map(|t| t.text.chars()))
        .collect();
    chars.sort_unstable();
    chars.dedup();
    chars
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tagscheme::Prefix;
    use crate::corpus::Subcategory;

    fn tiny_alphabet() -> LabelAlphabet {
        LabelAlphabet::from_labels(vec![
            Label::Outside,
            Label::Tagged(Prefix::Unit, Subcategory::Zip),
            Label::Tagged(Prefix::Unit, Subcategory::City),
        ])
    }

    fn tiny_model(seed: u64) -> LstmModel {
        let dims = LstmDims {
            char_dim: 4,
            char_hidden: 3,
            word_dim: 5,
            feat_dim: 2,
            word_hidden: 4,
        };
        let mut emb = EmbeddingTable::new(5);
        emb.insert("boston", vec![0.1, 0.2, 0.3, 0.4, 0.5]);
        LstmModel::init(
            tiny_alphabet(),
            vec!['B', 'R', 'e', 'n', 'o', 'r', 's', 't'],
            emb,
            dims,
            RepConfig::default(),
            true,
            EmissionForm::Logits,
            seed,
        )
    }

    #[test]
    fn zero_cell_gives_half_gates_and_zero_state() {
        let params = LstmCellParams::zeros(3, 2);
        let (h, c) = lstm_cell_values(&params, &[0.0; 3], &[0.0; 2], &[0.0; 2]).unwrap();
        assert_eq!(c, vec![0.0, 0.0]);
        assert_eq!(h, vec![0.0, 0.0]);
        // gates themselves sit at 0.5: check via a nonzero cell state
        let (_, c2) = lstm_cell_values(&params, &[0.0; 3], &[0.0; 2], &[1.0, 1.0]).unwrap();
        // c' = (1 - 0.5) * 1 + 0.5 * 0 = 0.5
        assert!((c2[0] - 0.5).abs() < 1e-12 && (c2[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn scalar_cell_matches_hand_evaluation() {
        let mut params = LstmCellParams::zeros(1, 1);
        params.w_z = Tensor::matrix(1, 1, vec![1.0]);
        let (h, c) = lstm_cell_values(&params, &[1.0], &[0.0], &[0.0]).unwrap();
        let z = 1.0f64.tanh();
        assert!((z - 0.7615941559557649).abs() < 1e-12);
        assert!((c[0] - 0.3807970779778824).abs() < 1e-5);
        assert!((h[0] - 0.18169974219452625).abs() < 1e-5);
    }

    #[test]
    fn gate_outputs_stay_in_unit_interval() {
        // check the gates themselves via a probe: with c_prev = 1 and
        // z = tanh(w_z x) known, c' = (1-i) + i·z pins down i
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = LstmCellParams::init(&mut rng, 3, 2);
        for _ in 0..100 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-8.0..8.0)).collect();
            let h: Vec<f64> = (0..2).map(|_| rng.gen_range(-8.0..8.0)).collect();
            let c: Vec<f64> = (0..2).map(|_| rng.gen_range(-8.0..8.0)).collect();
            let (h2, c2) = lstm_cell_values(&params, &x, &h, &c).unwrap();
            for (v, cv) in h2.iter().zip(&c2) {
                // h = o ⊙ tanh(c') with o ∈ (0,1)
                assert!(v.abs() < cv.tanh().abs().max(f64::MIN_POSITIVE));
                assert!(v.is_finite() && cv.is_finite());
            }
            // c' is a convex combination of c_prev and z ∈ (-1,1)
            for (cv, cp) in c2.iter().zip(&c) {
                assert!(cv.abs() <= cp.abs().max(1.0) + 1e-12);
            }
        }
    }

    #[test]
    fn coupled_gate_extremes() {
        // drive i toward 1: c' -> z; toward 0: c' -> c_prev
        let mut params = LstmCellParams::zeros(1, 1);
        params.w_z = Tensor::matrix(1, 1, vec![1.0]);
        params.b_i = Tensor::vector(vec![500.0]);
        let (_, c) = lstm_cell_values(&params, &[1.0], &[0.0], &[0.7]).unwrap();
        assert!((c[0] - 1.0f64.tanh()).abs() < 1e-9);
        params.b_i = Tensor::vector(vec![-500.0]);
        let (_, c) = lstm_cell_values(&params, &[1.0], &[0.0], &[0.7]).unwrap();
        assert!((c[0] - 0.7).abs() < 1e-9);
    }

    #[test]
    fn char_embed_dimension_and_case_sensitivity() {
        let model = tiny_model(3);
        let mut tape = Tape::new();
        let bound = Bound::bind(&mut tape, &model);
        let upper = model.char_embed(&mut tape, &bound, "Rone").unwrap();
        let lower = model.char_embed(&mut tape, &bound, "rone").unwrap();
        assert_eq!(tape.value(upper).len(), 2 * model.dims.char_hidden);
        assert_ne!(tape.value(upper).data, tape.value(lower).data);
        assert!(model.char_embed(&mut tape, &bound, "").is_err());
    }

    #[test]
    fn single_char_embed_equals_direct_cell() {
        let model = tiny_model(4);
        let mut tape = Tape::new();
        let bound = Bound::bind(&mut tape, &model);
        let emb = model.char_embed(&mut tape, &bound, "R").unwrap();
        let got = tape.value(emb).data.clone();
        let id = model.char_id('R');
        let x: Vec<f64> = model.char_table.data
            [id * model.dims.char_dim..(id + 1) * model.dims.char_dim]
            .to_vec();
        let zeros = vec![0.0; model.dims.char_hidden];
        let (h_f, _) = lstm_cell_values(&model.char_fwd, &x, &zeros, &zeros).unwrap();
        let (h_b, _) = lstm_cell_values(&model.char_bwd, &x, &zeros, &zeros).unwrap();
        let expect: Vec<f64> = h_f.into_iter().chain(h_b).collect();
        for (a, b) in got.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn represent_width_and_invocab_middle() {
        let model = tiny_model(5);
        let gaz = GazetteerSet::bundled();
        let input = model.prepare_sentence(&["Boston", "Rone"], &gaz);
        let mut tape = Tape::new();
        let bound = Bound::bind(&mut tape, &model);
        let r0 = model.represent(&mut tape, &bound, &input, 0).unwrap();
        assert_eq!(tape.value(r0).len(), model.rep_width());
        assert_eq!(model.rep_width(), 2 * 3 + 5 + 2 * 2);
        // in-vocabulary token: the word slice equals the table vector
        let data = &tape.value(r0).data;
        let off = 2 * model.dims.char_hidden;
        assert_eq!(&data[off..off + 5], model.embeddings.get("boston").unwrap());
    }

    #[test]
    fn identical_codes_share_feature_dims() {
        let model = tiny_model(6);
        let gaz = GazetteerSet::bundled();
        // same casing pattern, no gazetteer hits for either
        let input = model.prepare_sentence(&["Qqqq", "Wwww"], &gaz);
        assert_eq!(input.cap_idx[0], input.cap_idx[1]);
        assert_eq!(input.dict_idx[0], input.dict_idx[1]);
        let mut tape = Tape::new();
        let bound = Bound::bind(&mut tape, &model);
        let a = model.represent(&mut tape, &bound, &input, 0).unwrap();
        let b = model.represent(&mut tape, &bound, &input, 1).unwrap();
        let w = model.rep_width();
        let feat = 2 * model.dims.feat_dim;
        assert_eq!(
            tape.value(a).data[w - feat..],
            tape.value(b).data[w - feat..]
        );
    }

    #[test]
    fn oov_vector_is_cached_per_surface() {
        let model = tiny_model(7);
        let a = model.oov_vector("Zzzgloff");
        let b = model.oov_vector("Zzzgloff");
        assert_eq!(a, b);
        let c = model.oov_vector("Zzzgloof");
        assert_ne!(a, c);
        let bound = (3.0 / model.dims.word_dim as f64).sqrt();
        assert!(a.iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn emission_rows_sum_to_one_and_inference_is_stable() {
        let model = tiny_model(8);
        let gaz = GazetteerSet::bundled();
        let input = model.prepare_sentence(&["Boston", "sent", "Rone"], &gaz);
        let run = || -> Vec<Vec<f64>> {
            let mut tape = Tape::new();
            let bound = Bound::bind(&mut tape, &model);
            let em = model.emissions(&mut tape, &bound, &input, None).unwrap();
            em.p_rows
                .iter()
                .map(|&id| tape.value(id).data.clone())
                .collect()
        };
        let p1 = run();
        let p2 = run();
        assert_eq!(p1, p2);
        for row in &p1 {
            let s: f64 = row.iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_model_emissions_are_uniform() {
        let mut model = tiny_model(9);
        for t in model.trainable_mut() {
            t.data.iter_mut().for_each(|v| *v = 0.0);
        }
        let gaz = GazetteerSet::bundled();
        let input = model.prepare_sentence(&["one", "two"], &gaz);
        let mut tape = Tape::new();
        let bound = Bound::bind(&mut tape, &model);
        let em = model.emissions(&mut tape, &bound, &input, None).unwrap();
        let d_l = model.n_labels() as f64;
        for &id in &em.p_rows {
            for v in &tape.value(id).data {
                assert!((v - 1.0 / d_l).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn empty_sentence_is_rejected() {
        let model = tiny_model(10);
        let gaz = GazetteerSet::bundled();
        let input = model.prepare_sentence(&[], &gaz);
        let mut tape = Tape::new();
        let bound = Bound::bind(&mut tape, &model);
        assert!(model.emissions(&mut tape, &bound, &input, None).is_err());
    }

    #[test]
    fn tag_empty_document_is_empty() {
        let model = tiny_model(11);
        let gaz = GazetteerSet::bundled();
        let mut doc = Document::new("d", "", vec![]).unwrap();
        doc.preprocess(&crate::preprocess::AbbrevList::bundled(), 200);
        assert!(model.tag_document(&doc, &gaz).unwrap().is_empty());
    }

    #[test]
    fn tag_equals_manual_stage_composition() {
        let model = tiny_model(12);
        let gaz = GazetteerSet::bundled();
        let mut doc = Document::new("d", "Boston 02138\nRone sent this", vec![]).unwrap();
        doc.preprocess(&crate::preprocess::AbbrevList::bundled(), 200);
        let auto = model.tag_document(&doc, &gaz).unwrap();
        // manual: represent -> emissions -> viterbi -> decode, per sentence
        let mut manual_labels = Vec::new();
        for sent in &doc.sentences {
            let texts: Vec<&str> = doc
                .sentence_tokens(sent)
                .iter()
                .map(|t| t.text.as_str())
                .collect();
            let input = model.prepare_sentence(&texts, &gaz);
            let mut tape = Tape::new();
            let bound = Bound::bind(&mut tape, &model);
            let em = model.emissions(&mut tape, &bound, &input, None).unwrap();
            let p: Vec<Vec<f64>> = em
                .p_rows
                .iter()
                .map(|&id| tape.value(id).data.clone())
                .collect();
            let ids = lattice::viterbi(&p, &model.trans);
            manual_labels.push(
                ids.into_iter()
                    .map(|i| model.alphabet.label(i))
                    .collect::<Vec<_>>(),
            );
        }
        let manual = tagscheme::decode_document(&doc, &manual_labels).unwrap();
        assert_eq!(auto, manual);
    }
}
