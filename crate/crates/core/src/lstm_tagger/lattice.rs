//! The transition-matrix decoding lattice.
//!
//! A sequence's score combines per-token classification scores with
//! time-invariant transition scores:
//! `s = M[START, y₁] + Σ M[y_t, y_{t+1}] + M[y_T, END] + Σ P[t, y_t]`.
//! The partition function uses the forward-style recursion
//! `δ_t(k) = LSE_i(δ_{t−1}(i) + M[i, k]) + P[t, k]` with
//! `log Z = LSE_k(δ_T(k) + M[k, END])`, running in `O(T · d_l²)`.
//! Decoding is the max-sum analogue; ties break toward the lower label
//! id.

use crate::errors::{DeidError, Result};
use crate::tensorcore::{NodeId, Shape, Tape, Tensor};

/// Transition scores including the START and END states, stored as the
/// inner `d_l × d_l` block plus the START row and END column. (The full
/// `(d_l + 2)²` matrix form has no other live entries.)
#[derive(Debug, Clone, PartialEq)]
pub struct TransMatrix {
    /// `inner[i · d_l + j]` = score of label i → label j.
    pub inner: Tensor,
    /// `start[k]` = score of START → label k.
    pub start: Tensor,
    /// `end[k]` = score of label k → END.
    pub end: Tensor,
}

impl TransMatrix {
    pub fn zeros(d_l: usize) -> Self {
        TransMatrix {
            inner: Tensor::matrix(d_l, d_l, vec![0.0; d_l * d_l]),
            start: Tensor::zeros_vec(d_l),
            end: Tensor::zeros_vec(d_l),
        }
    }

    pub fn n_labels(&self) -> usize {
        self.start.len()
    }

    /// Builds from a full `(d_l + 2) × (d_l + 2)` matrix with START at
    /// row/column `d_l` and END at `d_l + 1`.
    pub fn from_full(full: &Tensor) -> Result<Self> {
        let n = match full.shape {
            Shape::Mat(r, c) if r == c && r >= 2 => r,
            _ => {
                return Err(DeidError::ShapeMismatch {
                    op: "trans_from_full",
                    detail: "expected square matrix with START and END".into(),
                })
            }
        };
        let d_l = n - 2;
        let start_row = d_l;
        let end_col = d_l + 1;
        let mut inner = vec![0.0; d_l * d_l];
        for i in 0..d_l {
            for j in 0..d_l {
                inner[i * d_l + j] = full.data[i * n + j];
            }
        }
        Ok(TransMatrix {
            inner: Tensor::matrix(d_l, d_l, inner),
            start: Tensor::vector((0..d_l).map(|k| full.data[start_row * n + k]).collect()),
            end: Tensor::vector((0..d_l).map(|k| full.data[k * n + end_col]).collect()),
        })
    }

    pub fn inner_at(&self, from: usize, to: usize) -> f64 {
        self.inner.data[from * self.n_labels() + to]
    }
}

/// Bound lattice parameters on a tape.
#[derive(Clone, Copy)]
pub struct BoundTrans {
    pub inner: NodeId,
    pub start: NodeId,
    pub end: NodeId,
}

impl BoundTrans {
    pub fn bind(tape: &mut Tape, trans: &TransMatrix) -> Self {
        BoundTrans {
            inner: tape.leaf(trans.inner.clone()),
            start: tape.leaf(trans.start.clone()),
            end: tape.leaf(trans.end.clone()),
        }
    }
}

fn check_sentence(p_rows: &[NodeId]) -> Result<()> {
    if p_rows.is_empty() {
        return Err(DeidError::InvalidArgument("empty sentence lattice".into()));
    }
    Ok(())
}

/// Tape node for the score of one label sequence.
pub fn sequence_score_node(
    tape: &mut Tape,
    p_rows: &[NodeId],
    trans: &BoundTrans,
    labels: &[usize],
) -> Result<NodeId> {
    check_sentence(p_rows)?;
    if labels.len() != p_rows.len() {
        return Err(DeidError::LengthMismatch {
            what: "labels vs emission rows",
            left: labels.len(),
            right: p_rows.len(),
        });
    }
    let t_len = labels.len();
    let mut terms = Vec::with_capacity(2 * t_len + 1);
    terms.push(tape.pick(trans.start, labels[0])?);
    for t in 0..t_len - 1 {
        let row = tape.row(trans.inner, labels[t])?;
        terms.push(tape.pick(row, labels[t + 1])?);
    }
    terms.push(tape.pick(trans.end, labels[t_len - 1])?);
    for (t, &y) in labels.iter().enumerate() {
        terms.push(tape.pick(p_rows[t], y)?);
    }
    let stacked = tape.concat(&terms)?;
    Ok(tape.sum(stacked))
}

/// Tape node for `log Σ exp(s(X, y))` over all label sequences.
pub fn log_partition_node(
    tape: &mut Tape,
    p_rows: &[NodeId],
    trans: &BoundTrans,
) -> Result<NodeId> {
    check_sentence(p_rows)?;
    let d_l = tape.value(p_rows[0]).len();
    let mut delta = tape.add(trans.start, p_rows[0])?;
    for &p_row in &p_rows[1..] {
        let mut entries = Vec::with_capacity(d_l);
        for k in 0..d_l {
            let col = tape.col(trans.inner, k)?;
            let sums = tape.add(delta, col)?;
            entries.push(tape.log_sum_exp(sums)?);
        }
        let stacked = tape.concat(&entries)?;
        delta = tape.add(stacked, p_row)?;
    }
    let final_scores = tape.add(delta, trans.end)?;
    tape.log_sum_exp(final_scores)
}

/// Tape node for the negative log-likelihood of the gold sequence:
/// `log Z − s(X, gold)`, which is ≥ 0 and drives all parameters.
pub fn nll_node(
    tape: &mut Tape,
    p_rows: &[NodeId],
    trans: &BoundTrans,
    gold: &[usize],
) -> Result<NodeId> {
    let logz = log_partition_node(tape, p_rows, trans)?;
    let score = sequence_score_node(tape, p_rows, trans, gold)?;
    tape.sub(logz, score)
}

fn bind_values(tape: &mut Tape, p: &[Vec<f64>], trans: &TransMatrix) -> (Vec<NodeId>, BoundTrans) {
    let p_rows: Vec<NodeId> = p
        .iter()
        .map(|row| tape.leaf(Tensor::vector(row.clone())))
        .collect();
    let bound = BoundTrans::bind(tape, trans);
    (p_rows, bound)
}

/// Value-level sequence score.
pub fn sequence_score(p: &[Vec<f64>], trans: &TransMatrix, labels: &[usize]) -> Result<f64> {
    let mut tape = Tape::new();
    let (p_rows, bound) = bind_values(&mut tape, p, trans);
    let node = sequence_score_node(&mut tape, &p_rows, &bound, labels)?;
    Ok(tape.value(node).data[0])
}

/// Value-level log partition function.
pub fn log_partition(p: &[Vec<f64>], trans: &TransMatrix) -> Result<f64> {
    let mut tape = Tape::new();
    let (p_rows, bound) = bind_values(&mut tape, p, trans);
    let node = log_partition_node(&mut tape, &p_rows, &bound)?;
    Ok(tape.value(node).data[0])
}

/// Value-level negative log-likelihood.
pub fn nll(p: &[Vec<f64>], trans: &TransMatrix, gold: &[usize]) -> Result<f64> {
    let mut tape = Tape::new();
    let (p_rows, bound) = bind_values(&mut tape, p, trans);
    let node = nll_node(&mut tape, &p_rows, &bound, gold)?;
    Ok(tape.value(node).data[0])
}

/// Max-sum decoding over the lattice; ties break toward the lower label
/// id. Returns an empty sequence for an empty sentence.
pub fn viterbi(p: &[Vec<f64>], trans: &TransMatrix) -> Vec<usize> {
    let t_len = p.len();
    if t_len == 0 {
        return Vec::new();
    }
    let d_l = p[0].len();
    let mut delta: Vec<f64> = (0..d_l).map(|k| trans.start.data[k] + p[0][k]).collect();
    let mut back = vec![0usize; t_len * d_l];
    for t in 1..t_len {
        let mut next = vec![f64::NEG_INFINITY; d_l];
        for (k, slot) in next.iter_mut().enumerate() {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0usize;
            for (i, d) in delta.iter().enumerate() {
                let s = d + trans.inner_at(i, k);
                if s > best {
                    best = s;
                    arg = i;
                }
            }
            *slot = best + p[t][k];
            back[t * d_l + k] = arg;
        }
        delta = next;
    }
    let mut best = f64::NEG_INFINITY;
    let mut y = 0usize;
    for (k, d) in delta.iter().enumerate() {
        let s = d + trans.end.data[k];
        if s > best {
            best = s;
            y = k;
        }
    }
    let mut path = vec![0usize; t_len];
    path[t_len - 1] = y;
    for t in (1..t_len).rev() {
        y = back[t * d_l + y];
        path[t - 1] = y;
    }
    path
}

#[cfg(test)]
pub(crate) mod test_util {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    pub fn random_instance(
        rng: &mut ChaCha8Rng,
        t_len: usize,
        d_l: usize,
    ) -> (Vec<Vec<f64>>, TransMatrix) {
        let p = (0..t_len)
            .map(|_| (0..d_l).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let trans = TransMatrix {
            inner: Tensor::matrix(
                d_l,
                d_l,
                (0..d_l * d_l).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            ),
            start: Tensor::vector((0..d_l).map(|_| rng.gen_range(-2.0..2.0)).collect()),
            end: Tensor::vector((0..d_l).map(|_| rng.gen_range(-2.0..2.0)).collect()),
        };
        (p, trans)
    }

    /// Enumerates all d_l^T sequences: (log-sum-exp of scores, argmax).
    pub fn brute_force(p: &[Vec<f64>], trans: &TransMatrix) -> (f64, Vec<usize>) {
        let (t_len, d_l) = (p.len(), p[0].len());
        let mut scores = Vec::new();
        let mut best = f64::NEG_INFINITY;
        let mut best_seq = vec![0; t_len];
        for code in 0..d_l.pow(t_len as u32) {
            let mut seq = vec![0usize; t_len];
            let mut c = code;
            for t in (0..t_len).rev() {
                seq[t] = c % d_l;
                c /= d_l;
            }
            let s = sequence_score(p, trans, &seq).unwrap();
            scores.push(s);
            if s > best {
                best = s;
                best_seq = seq;
            }
        }
        let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + scores.iter().map(|s| (s - m).exp()).sum::<f64>().ln();
        (lse, best_seq)
    }
}

#[cfg(test)]
mod tests {
    use super::test_util::*;
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_transitions_score_is_emission_sum() {
        let p = vec![vec![0.1, 0.2, 0.3], vec![0.5, 0.4, 0.1]];
        let trans = TransMatrix::zeros(3);
        let s = sequence_score(&p, &trans, &[2, 0]).unwrap();
        assert!((s - (0.3 + 0.5)).abs() < 1e-12);
    }

    #[test]
    fn single_token_score() {
        let p = vec![vec![0.7, 0.3]];
        let mut trans = TransMatrix::zeros(2);
        trans.start.data = vec![0.1, -0.1];
        trans.end.data = vec![0.05, 0.2];
        let s = sequence_score(&p, &trans, &[1]).unwrap();
        assert!((s - (-0.1 + 0.3 + 0.2)).abs() < 1e-12);
    }

    #[test]
    fn three_token_hand_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (p, trans) = random_instance(&mut rng, 3, 4);
        let y = [2usize, 0, 3];
        let hand = trans.start.data[2]
            + trans.inner_at(2, 0)
            + trans.inner_at(0, 3)
            + trans.end.data[3]
            + p[0][2]
            + p[1][0]
            + p[2][3];
        let s = sequence_score(&p, &trans, &y).unwrap();
        assert!((s - hand).abs() < 1e-12);
    }

    #[test]
    fn partition_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let t_len = rng.gen_range(1..=6);
            let d_l = rng.gen_range(1..=5);
            let (p, trans) = random_instance(&mut rng, t_len, d_l);
            let (bf, _) = brute_force(&p, &trans);
            let lz = log_partition(&p, &trans).unwrap();
            assert!((lz - bf).abs() < 1e-8, "T={t_len} L={d_l}: {lz} vs {bf}");
        }
    }

    #[test]
    fn viterbi_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let t_len = rng.gen_range(1..=6);
            let d_l = rng.gen_range(1..=5);
            let (p, trans) = random_instance(&mut rng, t_len, d_l);
            let (_, bf_seq) = brute_force(&p, &trans);
            assert_eq!(viterbi(&p, &trans), bf_seq);
        }
    }

    #[test]
    fn row_shift_moves_partition_by_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (mut p, trans) = random_instance(&mut rng, 4, 3);
        let base = log_partition(&p, &trans).unwrap();
        let k = 2.5;
        for v in &mut p[2] {
            *v += k;
        }
        let shifted = log_partition(&p, &trans).unwrap();
        assert!((shifted - base - k).abs() < 1e-10);
    }

    #[test]
    fn zero_transitions_constant_rows_closed_form() {
        // with M = 0 and row t constant c_t: log Z = Σ c_t + T · ln d_l
        let d_l = 4;
        let rows = [0.7, -0.3, 1.1];
        let p: Vec<Vec<f64>> = rows.iter().map(|&c| vec![c; d_l]).collect();
        let trans = TransMatrix::zeros(d_l);
        let expect = rows.iter().sum::<f64>() + 3.0 * (d_l as f64).ln();
        let lz = log_partition(&p, &trans).unwrap();
        assert!((lz - expect).abs() < 1e-10);
    }

    #[test]
    fn zero_transitions_viterbi_is_per_position_argmax() {
        let p = vec![vec![0.1, 0.9, 0.0], vec![0.8, 0.1, 0.1], vec![0.2, 0.2, 0.6]];
        let trans = TransMatrix::zeros(3);
        assert_eq!(viterbi(&p, &trans), vec![1, 0, 2]);
    }

    #[test]
    fn nll_is_nonnegative_and_partition_dominates() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let t_len = rng.gen_range(1..=5);
            let d_l = rng.gen_range(2..=5);
            let (p, trans) = random_instance(&mut rng, t_len, d_l);
            let lz = log_partition(&p, &trans).unwrap();
            for _ in 0..20 {
                let y: Vec<usize> = (0..t_len).map(|_| rng.gen_range(0..d_l)).collect();
                let s = sequence_score(&p, &trans, &y).unwrap();
                assert!(lz >= s - 1e-10);
                assert!(nll(&p, &trans, &y).unwrap() >= -1e-10);
            }
        }
    }

    #[test]
    fn viterbi_beats_random_sequences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (p, trans) = random_instance(&mut rng, 5, 4);
        let best = viterbi(&p, &trans);
        let best_score = sequence_score(&p, &trans, &best).unwrap();
        for _ in 0..1000 {
            let y: Vec<usize> = (0..5).map(|_| rng.gen_range(0..4)).collect();
            let s = sequence_score(&p, &trans, &y).unwrap();
            assert!(best_score >= s - 1e-12);
        }
    }

    #[test]
    fn saturating_one_sequence_drives_nll_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (mut p, trans) = random_instance(&mut rng, 3, 3);
        let y = [1usize, 2, 0];
        for (t, &label) in y.iter().enumerate() {
            p[t][label] += 50.0;
        }
        let loss = nll(&p, &trans, &y).unwrap();
        assert!(loss < 1e-3, "loss {loss}");
    }

    #[test]
    fn nll_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (p, trans) = random_instance(&mut rng, 4, 3);
        let gold = [0usize, 2, 1, 1];
        // analytic gradients
        let mut tape = Tape::new();
        let p_rows: Vec<NodeId> = p
            .iter()
            .map(|row| tape.leaf(Tensor::vector(row.clone())))
            .collect();
        let bound = BoundTrans::bind(&mut tape, &trans);
        let loss = nll_node(&mut tape, &p_rows, &bound, &gold).unwrap();
        let grads = tape.backward(loss).unwrap();
        let eps = 1e-5;
        // p entries
        for t in 0..4 {
            for k in 0..3 {
                let mut plus = p.clone();
                plus[t][k] += eps;
                let mut minus = p.clone();
                minus[t][k] -= eps;
                let fd = (nll(&plus, &trans, &gold).unwrap()
                    - nll(&minus, &trans, &gold).unwrap())
                    / (2.0 * eps);
                let an = grads.get(p_rows[t])[k];
                assert!(
                    (an - fd).abs() / an.abs().max(fd.abs()).max(1.0) < 1e-4,
                    "p[{t}][{k}]: {an} vs {fd}"
                );
            }
        }
        // transition entries
        for idx in 0..9 {
            let mut plus = trans.clone();
            plus.inner.data[idx] += eps;
            let mut minus = trans.clone();
            minus.inner.data[idx] -= eps;
            let fd = (nll(&p, &plus, &gold).unwrap() - nll(&p, &minus, &gold).unwrap())
                / (2.0 * eps);
            let an = grads.get(bound.inner)[idx];
            assert!(
                (an - fd).abs() / an.abs().max(fd.abs()).max(1.0) < 1e-4,
                "inner[{idx}]: {an} vs {fd}"
            );
        }
    }

    #[test]
    #[allow(clippy::identity_op, clippy::erasing_op)]
    fn from_full_matrix_layout() {
        // d_l = 2, full 4×4 with START row 2, END column 3
        let mut data = vec![0.0; 16];
        data[0 * 4 + 0] = 1.0; // 0 -> 0
        data[0 * 4 + 1] = 2.0; // 0 -> 1
        data[1 * 4 + 0] = 3.0;
        data[1 * 4 + 1] = 4.0;
        data[2 * 4 + 0] = 5.0; // START -> 0
        data[2 * 4 + 1] = 6.0;
        data[0 * 4 + 3] = 7.0; // 0 -> END
        data[1 * 4 + 3] = 8.0;
        let full = Tensor::matrix(4, 4, data);
        let trans = TransMatrix::from_full(&full).unwrap();
        assert_eq!(trans.inner.data, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(trans.start.data, vec![5.0, 6.0]);
        assert_eq!(trans.end.data, vec![7.0, 8.0]);
    }

    #[test]
    fn empty_sentence_is_rejected() {
        let trans = TransMatrix::zeros(3);
        assert!(log_partition(&[], &trans).is_err());
        assert!(viterbi(&[], &trans).is_empty());
    }
}
