//! Word embedding table: word2vec-format text I/O and a built-in
//! skip-gram trainer with negative sampling.
//!
//! Lookups are case-insensitive (the table stores lowercased words).
//! Out-of-vocabulary handling lives in the tagger, not here.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Document;
use crate::errors::{DeidError, Result};
use crate::mix_seed;

/// Lowercased word → dense vector, fixed dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    words: Vec<String>,
    ids: HashMap<String, usize>,
    vectors: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            words: Vec::new(),
            ids: HashMap::new(),
            vectors: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Inserts or replaces a word's vector. The word is lowercased.
    /// Returns true when the word replaced an existing entry.
    pub fn insert(&mut self, word: &str, vector: Vec<f64>) -> bool {
        assert_eq!(vector.len(), self.dim, "embedding dimension");
        let key = word.to_lowercase();
        match self.ids.get(&key) {
            Some(&id) => {
                self.vectors[id * self.dim..(id + 1) * self.dim].copy_from_slice(&vector);
                true
            }
            None => {
                let id = self.words.len();
                self.ids.insert(key.clone(), id);
                self.words.push(key);
                self.vectors.extend_from_slice(&vector);
                false
            }
        }
    }

    /// Case-insensitive lookup.
    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.ids
            .get(&word.to_lowercase())
            .map(|&id| &self.vectors[id * self.dim..(id + 1) * self.dim])
    }

    fn vector_of(&self, id: usize) -> &[f64] {
        &self.vectors[id * self.dim..(id + 1) * self.dim]
    }

    /// Cosine similarity between two words, if both are present.
    pub fn cosine(&self, a: &str, b: &str) -> Option<f64> {
        let va = self.get(a)?;
        let vb = self.get(b)?;
        let dot: f64 = va.iter().zip(vb).map(|(x, y)| x * y).sum();
        let na: f64 = va.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = vb.iter().map(|x| x * x).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            None
        } else {
            Some(dot / (na * nb))
        }
    }
}

/// Loads the word2vec text format: header `<count> <dim>`, then one
/// `word v1 … vdim` line per word. Duplicate words: last wins, with a
/// warning.
pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable> {
    let file = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| DeidError::io(file.clone(), e))?;
    parse_embeddings(&text, &file)
}

pub fn parse_embeddings(text: &str, file: &str) -> Result<EmbeddingTable> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| DeidError::parse(file, 1, "empty embedding file"))?;
    let mut parts = header.split(' ');
    let count: usize = parts
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| DeidError::parse(file, 1, "bad header count"))?;
    let dim: usize = parts
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| DeidError::parse(file, 1, "bad header dim"))?;
    let mut table = EmbeddingTable::new(dim);
    let mut rows = 0usize;
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(' ');
        let word = fields
            .next()
            .ok_or_else(|| DeidError::parse(file, i + 1, "missing word"))?;
        let vector: Vec<f64> = fields
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| DeidError::parse(file, i + 1, "bad vector value"))?;
        if vector.len() != dim {
            return Err(DeidError::parse(
                file,
                i + 1,
                format!("row has {} values, header says {dim}", vector.len()),
            ));
        }
        if table.insert(word, vector) {
            log::warn!("{file}: duplicate embedding for `{word}`, keeping the last");
        }
        rows += 1;
    }
    if rows != count {
        return Err(DeidError::parse(
            file,
            1,
            format!("header claims {count} rows, file has {rows}"),
        ));
    }
    Ok(table)
}

/// Writes the word2vec text format with round-trip-exact floats.
pub fn save_embeddings(table: &EmbeddingTable, path: &Path) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", table.len(), table.dim());
    for (id, word) in table.words.iter().enumerate() {
        out.push_str(word);
        for v in table.vector_of(id) {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| DeidError::io(path.display().to_string(), e))
}

/// Skip-gram trainer settings.
#[derive(Debug, Clone)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        SkipGramConfig {
            dim: 100,
            window: 5,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            seed: 1,
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Trains skip-gram embeddings with negative sampling over the
/// lowercased tokens of a pre-processed corpus. Deterministic under the
/// config seed (single-threaded, fixed iteration order).
pub fn train_skipgram(docs: &[Document], config: &SkipGramConfig) -> Result<EmbeddingTable> {
    // vocabulary in deterministic order: by count desc, then word asc
    let mut counts: HashMap<String, usize> = HashMap::new();
    let mut sentences: Vec<Vec<String>> = Vec::new();
    for doc in docs {
        if doc.tokens.is_empty() && !doc.text.trim().is_empty() {
            return Err(DeidError::NotPreprocessed(doc.id.clone()));
        }
        for sent in &doc.sentences {
            let words: Vec<String> = doc.sentence_tokens(sent)
                .iter()
                .map(|t| t.text.to_lowercase())
                .collect();
            for w in &words {
                *counts.entry(w.clone()).or_default() += 1;
            }
            sentences.push(words);
        }
    }
    if counts.is_empty() {
        return Err(DeidError::EmptyCorpus);
    }
    let mut vocab: Vec<(String, usize)> = counts.into_iter().collect();
    vocab.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let word_ids: HashMap<&str, usize> = vocab
        .iter()
        .enumerate()
        .map(|(i, (w, _))| (w.as_str(), i))
        .collect();
    let n_words = vocab.len();
    let dim = config.dim;

    // unigram^0.75 cumulative table for negative sampling
    let mut cumulative = Vec::with_capacity(n_words);
    let mut acc = 0.0;
    for (_, c) in &vocab {
        acc += (*c as f64).powf(0.75);
        cumulative.push(acc);
    }
    let total = acc;

    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, 0x5b1b));
    let mut input: Vec<f64> = (0..n_words * dim)
        .map(|_| rng.gen_range(-0.5..0.5) / dim as f64)
        .collect();
    let mut output = vec![0.0; n_words * dim];

    let ids: Vec<Vec<usize>> = sentences
        .iter()
        .map(|s| s.iter().map(|w| word_ids[w.as_str()]).collect())
        .collect();
    let total_centers: usize = ids.iter().map(|s| s.len()).sum::<usize>() * config.epochs;
    let mut processed = 0usize;
    let mut grad = vec![0.0; dim];

    for _epoch in 0..config.epochs {
        for sent in &ids {
            for (pos, &center) in sent.iter().enumerate() {
                let lr = (config.learning_rate
                    * (1.0 - processed as f64 / total_centers.max(1) as f64))
                    .max(config.learning_rate * 1e-4);
                processed += 1;
                // shrunken window, word2vec style
                let b = rng.gen_range(0..config.window.max(1));
                let lo = pos.saturating_sub(config.window - b);
                let hi = (pos + config.window - b + 1).min(sent.len());
                #[allow(clippy::needless_range_loop)]
                for ctx_pos in lo..hi {
                    if ctx_pos == pos {
                        continue;
                    }
                    let context = sent[ctx_pos];
                    let v = &input[center * dim..(center + 1) * dim];
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    // positive example plus k negatives
                    for k in 0..=config.negatives {
                        let (target, label) = if k == 0 {
                            (context, 1.0)
                        } else {
                            let x = rng.gen_range(0.0..total);
                            let t = cumulative.partition_point(|&c| c < x).min(n_words - 1);
                            if t == context {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let u = &output[target * dim..(target + 1) * dim];
                        let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                        let err = (label - sigmoid(dot)) * lr;
                        for (g, ui) in grad.iter_mut().zip(u) {
                            *g += err * ui;
                        }
                        let us = &mut output[target * dim..(target + 1) * dim];
                        for (ui, vi) in us.iter_mut().zip(v) {
                            *ui += err * vi;
                        }
                    }
                    let vs = &mut input[center * dim..(center + 1) * dim];
                    for (vi, g) in vs.iter_mut().zip(&grad) {
                        *vi += g;
                    }
                }
            }
        }
    }

    let mut table = EmbeddingTable::new(dim);
    for (i, (word, _)) in vocab.iter().enumerate() {
        table.insert(word, input[i * dim..(i + 1) * dim].to_vec());
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::AbbrevList;

    fn docs_from(texts: &[&str]) -> Vec<Document> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let mut d = Document::new(format!("d{i}"), *t, vec![]).unwrap();
                d.preprocess(&AbbrevList::bundled(), 200);
                d
            })
            .collect()
    }

    #[test]
    fn loader_minimal_file() {
        let table = parse_embeddings("2 3\nfoo 1 2 3\nbar 0.5 0 -1\n", "t").unwrap();
        assert_eq!(table.len(), 2);
        assert_eq!(table.dim(), 3);
        assert_eq!(table.get("FOO").unwrap(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn loader_rejects_arity_mismatch() {
        assert!(parse_embeddings("1 3\nfoo 1 2\n", "t").is_err());
        assert!(parse_embeddings("2 3\nfoo 1 2 3\n", "t").is_err());
        assert!(parse_embeddings("", "t").is_err());
    }

    #[test]
    fn duplicate_words_last_wins() {
        let table = parse_embeddings("2 2\nfoo 1 1\nfoo 2 2\n", "t").unwrap();
        assert_eq!(table.len(), 1);
        assert_eq!(table.get("foo").unwrap(), &[2.0, 2.0]);
    }

    #[test]
    fn save_load_round_trips_bit_exactly() {
        let docs = docs_from(&["alpha beta gamma alpha", "beta gamma delta"]);
        let config = SkipGramConfig {
            dim: 7,
            epochs: 2,
            ..SkipGramConfig::default()
        };
        let table = train_skipgram(&docs, &config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vec.txt");
        save_embeddings(&table, &path).unwrap();
        let loaded = load_embeddings(&path).unwrap();
        assert_eq!(loaded, table);
    }

    #[test]
    fn skipgram_dimensions_and_determinism() {
        let docs = docs_from(&["the patient moved to boston today", "he moved to denver today"]);
        let config = SkipGramConfig {
            dim: 100,
            epochs: 2,
            ..SkipGramConfig::default()
        };
        let a = train_skipgram(&docs, &config).unwrap();
        let b = train_skipgram(&docs, &config).unwrap();
        assert_eq!(a, b);
        for w in a.words() {
            assert_eq!(a.get(w).unwrap().len(), 100);
        }
        // different seed, different vectors
        let c = train_skipgram(
            &docs,
            &SkipGramConfig {
                seed: 2,
                dim: 100,
                epochs: 2,
                ..SkipGramConfig::default()
            },
        )
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn empty_corpus_is_rejected() {
        assert!(matches!(
            train_skipgram(&[], &SkipGramConfig::default()),
            Err(DeidError::EmptyCorpus)
        ));
    }

    #[test]
    fn shared_context_words_end_up_close() {
        // "boston" and "denver" share contexts; unrelated fillers do not
        let mut texts = Vec::new();
        for _ in 0..30 {
            texts.push("the patient moved to boston last spring for work");
            texts.push("the patient moved to denver last spring for work");
            texts.push("she flew to boston in winter for care");
            texts.push("she flew to denver in winter for care");
            texts.push("labs were drawn quietly before breakfast rounds");
            texts.push("vitals stayed flat during the long evening shift");
            texts.push("medication doses were held pending review notes");
        }
        let docs = docs_from(&texts);
        let config = SkipGramConfig {
            dim: 30,
            window: 4,
            epochs: 8,
            ..SkipGramConfig::default()
        };
        let table = train_skipgram(&docs, &config).unwrap();
        let target = table.cosine("boston", "denver").unwrap();
        // 95th percentile of cosines over random word pairs
        let words = table.words();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut cosines: Vec<f64> = (0..1000)
            .map(|_| {
                let a = &words[rng.gen_range(0..words.len())];
                let b = &words[rng.gen_range(0..words.len())];
                if a == b {
                    return -1.0;
                }
                table.cosine(a, b).unwrap_or(-1.0)
            })
            .collect();
        cosines.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let p95 = cosines[950];
        assert!(
            target > p95,
            "cos(boston, denver) = {target:.4} not above 95th percentile {p95:.4}"
        );
    }
}
