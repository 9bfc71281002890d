//! Linear-chain CRF: log-linear potentials over indexed features, exact
//! inference by forward–backward and Viterbi, L2-regularized maximum
//! likelihood training.
//!
//! The model scores position `t` with label `y` (previous label `y_prev`)
//! as the sum of observation weights `θ[f, y]` over the active features
//! plus a transition weight `θ_trans[y_prev, y]`. A distinguished BOS
//! state with its own transition row replaces `y_prev` at `t = 0`; there
//! are no EOS transitions. All dynamic programming runs in log space.

mod io;
mod lbfgs;
mod train;

pub use io::{load_model, save_model};
pub use lbfgs::{minimize, IterationLog, LbfgsParams};
pub use train::{neg_loglik_grad, train, CrfHyper, EncodedSentence};

use crate::features::FeatureIndex;
use crate::tagscheme::LabelAlphabet;

/// Index of the BOS pseudo-state in the transition table: row `n_labels`.
pub const BOS: usize = usize::MAX;

/// A trained (or in-training) CRF model.
#[derive(Debug, Clone)]
pub struct CrfModel {
    pub index: FeatureIndex,
    pub alphabet: LabelAlphabet,
    /// CRF++-style regularization constant; the penalty is ‖θ‖²/(2c).
    pub c: f64,
    /// Flat weights: observation block `f * L + y` for `f <
    /// index.len()`, then transition block of `(L + 1) × L` (row `L` is
    /// BOS → y).
    pub weights: Vec<f64>,
}

impl CrfModel {
    pub fn zeroed(index: FeatureIndex, alphabet: LabelAlphabet, c: f64) -> Self {
        let n = weight_count(index.len(), alphabet.len());
        CrfModel {
            index,
            alphabet,
            c,
            weights: vec![0.0; n],
        }
    }

    pub fn n_labels(&self) -> usize {
        self.alphabet.len()
    }

    fn trans_offset(&self) -> usize {
        self.index.len() * self.n_labels()
    }

    pub fn obs_weight(&self, feature: u32, label: usize) -> f64 {
        self.weights[feature as usize * self.n_labels() + label]
    }

    pub fn trans_weight(&self, from: usize, to: usize) -> f64 {
        let l = self.n_labels();
        let row = if from == BOS { l } else { from };
        self.weights[self.trans_offset() + row * l + to]
    }

    /// Log-potential of `(y_prev, y)` at a position with the given active
    /// feature ids (`BOS` for the start state). Unindexed features were
    /// already dropped when the ids were produced.
    pub fn score_position(&self, features: &[u32], y_prev: usize, y: usize) -> f64 {
        let obs: f64 = features.iter().map(|&f| self.obs_weight(f, y)).sum();
        obs + self.trans_weight(y_prev, y)
    }

    /// Builds the inference lattice for one featurized sentence.
    pub fn lattice(&self, features: &[Vec<u32>]) -> Lattice {
        let l = self.n_labels();
        let mut obs = vec![0.0; features.len() * l];
        for (t, feats) in features.iter().enumerate() {
            for y in 0..l {
                obs[t * l + y] = feats.iter().map(|&f| self.obs_weight(f, y)).sum();
            }
        }
        let trans = self.weights[self.trans_offset()..].to_vec();
        Lattice {
            obs,
            trans,
            n_labels: l,
        }
    }
}

/// Total number of weights: one per (feature, label), one per (label,
/// label) transition, plus the BOS transition row.
pub fn weight_count(n_features: usize, n_labels: usize) -> usize {
    n_features * n_labels + (n_labels + 1) * n_labels
}

/// Per-sentence log-potential sums: `obs[t * L + y]` plus the
/// `(L + 1) × L` transition block (row `L` = BOS).
#[derive(Debug, Clone)]
pub struct Lattice {
    pub obs: Vec<f64>,
    pub trans: Vec<f64>,
    pub n_labels: usize,
}

/// Log-sum-exp of a slice, shifted by the max for overflow safety.
pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

impl Lattice {
    pub fn len(&self) -> usize {
        self.obs.len().checked_div(self.n_labels).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    pub fn obs_at(&self, t: usize, y: usize) -> f64 {
        self.obs[t * self.n_labels + y]
    }

    pub fn trans_at(&self, from: usize, to: usize) -> f64 {
        let row = if from == BOS { self.n_labels } else { from };
        self.trans[row * self.n_labels + to]
    }

    /// Total score of a full label sequence.
    pub fn sequence_score(&self, labels: &[usize]) -> f64 {
        let mut s = 0.0;
        let mut prev = BOS;
        for (t, &y) in labels.iter().enumerate() {
            s += self.trans_at(prev, y) + self.obs_at(t, y);
            prev = y;
        }
        s
    }

    /// Forward pass: `alpha[t][y]` = log-sum of all prefixes ending in
    /// `y` at `t`.
    pub fn forward(&self) -> Vec<f64> {
        let (t_len, l) = (self.len(), self.n_labels);
        let mut alpha = vec![0.0; t_len * l];
        let mut scratch = vec![0.0; l];
        for t in 0..t_len {
            for y in 0..l {
                alpha[t * l + y] = if t == 0 {
                    self.trans_at(BOS, y) + self.obs_at(0, y)
                } else {
                    for i in 0..l {
                        scratch[i] = alpha[(t - 1) * l + i] + self.trans_at(i, y);
                    }
                    log_sum_exp(&scratch) + self.obs_at(t, y)
                };
            }
        }
        alpha
    }

    /// Backward pass: `beta[t][y]` = log-sum of all suffixes after taking
    /// label `y` at `t`.
    pub fn backward(&self) -> Vec<f64> {
        let (t_len, l) = (self.len(), self.n_labels);
        let mut beta = vec![0.0; t_len * l];
        let mut scratch = vec![0.0; l];
        for t in (0..t_len.saturating_sub(1)).rev() {
            for y in 0..l {
                for j in 0..l {
                    scratch[j] = self.trans_at(y, j) + self.obs_at(t + 1, j) + beta[(t + 1) * l + j];
                }
                beta[t * l + y] = log_sum_exp(&scratch);
            }
        }
        beta
    }

    /// log Z: the log-sum over all `L^T` label sequences.
    pub fn log_partition(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let l = self.n_labels;
        let alpha = self.forward();
        log_sum_exp(&alpha[(self.len() - 1) * l..])
    }

    /// Position marginals `p_t(y)` and pairwise marginals
    /// `p_t(i → j)` for `t = 1..T`, from forward–backward.
    pub fn marginals(&self) -> (Vec<f64>, Vec<f64>) {
        let (t_len, l) = (self.len(), self.n_labels);
        let alpha = self.forward();
        let beta = self.backward();
        let logz = log_sum_exp(&alpha[(t_len - 1) * l..]);
        let mut unary = vec![0.0; t_len * l];
        for t in 0..t_len {
            for y in 0..l {
                unary[t * l + y] = (alpha[t * l + y] + beta[t * l + y] - logz).exp();
            }
        }
        let mut pair = vec![0.0; t_len.saturating_sub(1) * l * l];
        for t in 1..t_len {
            for i in 0..l {
                for j in 0..l {
                    pair[(t - 1) * l * l + i * l + j] = (alpha[(t - 1) * l + i]
                        + self.trans_at(i, j)
                        + self.obs_at(t, j)
                        + beta[t * l + j]
                        - logz)
                        .exp();
                }
            }
        }
        (unary, pair)
    }

    /// Max-sum decoding. Ties break toward the lower label id.
    pub fn viterbi(&self) -> Vec<usize> {
        let (t_len, l) = (self.len(), self.n_labels);
        if t_len == 0 {
            return Vec::new();
        }
        let mut delta = vec![f64::NEG_INFINITY; t_len * l];
        let mut back = vec![0usize; t_len * l];
        for (y, d) in delta.iter_mut().take(l).enumerate() {
            *d = self.trans_at(BOS, y) + self.obs_at(0, y);
        }
        for t in 1..t_len {
            for y in 0..l {
                let mut best = f64::NEG_INFINITY;
                let mut arg = 0;
                for i in 0..l {
                    let s = delta[(t - 1) * l + i] + self.trans_at(i, y);
                    if s > best {
                        best = s;
                        arg = i;
                    }
                }
                delta[t * l + y] = best + self.obs_at(t, y);
                back[t * l + y] = arg;
            }
        }
        let mut best = f64::NEG_INFINITY;
        let mut y = 0;
        for (cand, d) in delta[(t_len - 1) * l..].iter().enumerate() {
            if *d > best {
                best = *d;
                y = cand;
            }
        }
        let mut path = vec![0usize; t_len];
        path[t_len - 1] = y;
        for t in (1..t_len).rev() {
            y = back[t * l + y];
            path[t - 1] = y;
        }
        path
    }
}
