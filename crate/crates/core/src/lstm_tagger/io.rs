//! Neural-tagger model file: a versioned flat binary layout.
//!
//! ```text
//! magic "DEIDLSTM v1\n"
//! u64  oov seed
//! u32  flags: bit0 use_char, bit1 use_pretrained, bit2 use_feature,
//!      bit3 use_lattice
//! u32×5 dims: char_dim, char_hidden, word_dim, feat_dim, word_hidden
//! labels:     u32 count, then (u32 len, utf-8 bytes) per label
//! char vocab: u32 count, then u32 code point per char
//! embeddings: u32 count, u32 dim, (u32 len, bytes) per word,
//!             then count × dim f64 little-endian
//! blocks:     u32 count, then per block: (u32 len, bytes) name,
//!             u32 rows, u32 cols (0 = vector), f64 LE values
//! ```
//!
//! All integers are little-endian. Parameter blocks are written in the
//! model's canonical trainable order, so identical models serialize to
//! identical bytes.

use std::collections::HashMap;
use std::path::Path;

use crate::errors::{DeidError, Result};
use crate::tagscheme::{Label, LabelAlphabet};
use crate::tensorcore::{Shape, Tensor};

use super::embedding::EmbeddingTable;
use super::{EmissionForm, LstmDims, LstmModel, RepConfig};

const MAGIC: &[u8] = b"DEIDLSTM v1\n";

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u32(&mut self, v: usize) {
        self.buf.extend_from_slice(&(v as u32).to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len());
        self.buf.extend_from_slice(s.as_bytes());
    }
    fn floats(&mut self, data: &[f64]) {
        for v in data {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
    }
}

pub fn save_model(model: &LstmModel, path: &Path) -> Result<()> {
    let mut w = Writer { buf: MAGIC.to_vec() };
    w.u64(model.oov_seed);
    let flags = u32::from(model.rep.use_char)
        | u32::from(model.rep.use_pretrained) << 1
        | u32::from(model.rep.use_feature) << 2
        | u32::from(model.use_lattice) << 3
        | u32::from(model.emission_form == EmissionForm::Logits) << 4;
    w.buf.extend_from_slice(&flags.to_le_bytes());
    for d in [
        model.dims.char_dim,
        model.dims.char_hidden,
        model.dims.word_dim,
        model.dims.feat_dim,
        model.dims.word_hidden,
    ] {
        w.u32(d);
    }
    w.u32(model.alphabet.len());
    for &label in model.alphabet.labels() {
        w.str(&label.to_string());
    }
    w.u32(model.char_vocab.len());
    for &c in &model.char_vocab {
        w.u32(c as usize);
    }
    w.u32(model.embeddings.len());
    w.u32(model.embeddings.dim());
    for word in model.embeddings.words() {
        w.str(word);
    }
    for word in model.embeddings.words() {
        w.floats(model.embeddings.get(word).unwrap());
    }
    let blocks = model.trainable();
    w.u32(blocks.len());
    for (name, tensor) in blocks {
        w.str(&name);
        match tensor.shape {
            Shape::Mat(r, c) => {
                w.u32(r);
                w.u32(c);
            }
            Shape::Vec(n) => {
                w.u32(n);
                w.u32(0);
            }
        }
        w.floats(&tensor.data);
    }
    std::fs::write(path, w.buf).map_err(|e| DeidError::io(path.display().to_string(), e))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    file: String,
}

impl Reader<'_> {
    fn err(&self, msg: &str) -> DeidError {
        DeidError::parse(&self.file, 0, format!("{msg} (offset {})", self.pos))
    }
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.buf.len() {
            return Err(self.err("truncated model file"));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }
    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()) as usize)
    }
    fn u64(&mut self) -> Result<u64> {
        let b = self.take(8)?;
        Ok(u64::from_le_bytes(b.try_into().unwrap()))
    }
    fn str(&mut self) -> Result<String> {
        let n = self.u32()?;
        let b = self.take(n)?;
        String::from_utf8(b.to_vec()).map_err(|_| self.err("bad utf-8 string"))
    }
    fn floats(&mut self, n: usize) -> Result<Vec<f64>> {
        let b = self.take(n * 8)?;
        Ok(b.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn load_model(path: &Path) -> Result<LstmModel> {
    let buf = std::fs::read(path).map_err(|e| DeidError::io(path.display().to_string(), e))?;
    let mut r = Reader {
        buf: &buf,
        pos: 0,
        file: path.display().to_string(),
    };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(DeidError::parse(&r.file, 0, "not a tagger model file"));
    }
    let oov_seed = r.u64()?;
    let flags = r.u32()?;
    let rep = RepConfig {
        use_char: flags & 1 != 0,
        use_pretrained: flags & 2 != 0,
        use_feature: flags & 4 != 0,
    };
    let use_lattice = flags & 8 != 0;
    let emission_form = if flags & 16 != 0 {
        EmissionForm::Logits
    } else {
        EmissionForm::Probabilities
    };
    let dims = LstmDims {
        char_dim: r.u32()?,
        char_hidden: r.u32()?,
        word_dim: r.u32()?,
        feat_dim: r.u32()?,
        word_hidden: r.u32()?,
    };
    let n_labels = r.u32()?;
    let mut labels = Vec::with_capacity(n_labels);
    for _ in 0..n_labels {
        let s = r.str()?;
        labels.push(s.parse::<Label>()?);
    }
    let alphabet = LabelAlphabet::from_labels(labels);
    let n_chars = r.u32()?;
    let mut char_vocab = Vec::with_capacity(n_chars);
    for _ in 0..n_chars {
        let cp = r.u32()?;
        char_vocab.push(
            char::from_u32(cp as u32).ok_or_else(|| r.err("bad character code point"))?,
        );
    }
    let n_words = r.u32()?;
    let emb_dim = r.u32()?;
    let mut words = Vec::with_capacity(n_words);
    for _ in 0..n_words {
        words.push(r.str()?);
    }
    let mut embeddings = EmbeddingTable::new(emb_dim);
    for word in words {
        let v = r.floats(emb_dim)?;
        embeddings.insert(&word, v);
    }
    let n_blocks = r.u32()?;
    let mut blocks: HashMap<String, Tensor> = HashMap::new();
    for _ in 0..n_blocks {
        let name = r.str()?;
        let rows = r.u32()?;
        let cols = r.u32()?;
        let tensor = if cols == 0 {
            Tensor::vector(r.floats(rows)?)
        } else {
            Tensor::matrix(rows, cols, r.floats(rows * cols)?)
        };
        blocks.insert(name, tensor);
    }
    if r.pos != buf.len() {
        return Err(r.err("trailing bytes after model blocks"));
    }

    let mut model = LstmModel::init(
        alphabet,
        char_vocab,
        embeddings,
        dims,
        rep,
        use_lattice,
        emission_form,
        oov_seed,
    );
    let names: Vec<String> = model.trainable().into_iter().map(|(n, _)| n).collect();
    for (name, slot) in names.iter().zip(model.trainable_mut()) {
        let tensor = blocks
            .remove(name)
            .ok_or_else(|| DeidError::parse(path.display().to_string(), 0, format!("missing block `{name}`")))?;
        if tensor.shape != slot.shape {
            return Err(DeidError::ShapeMismatch {
                op: "load_model",
                detail: format!("block `{name}`: {:?} vs {:?}", tensor.shape, slot.shape),
            });
        }
        *slot = tensor;
    }
    if let Some(extra) = blocks.keys().next() {
        return Err(DeidError::parse(
            path.display().to_string(),
            0,
            format!("unknown block `{extra}`"),
        ));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn save_load_round_trips_exactly() {
        let mut emb = EmbeddingTable::new(5);
        emb.insert("boston", vec![0.25, -1.5, 3.0, 0.0, 1e-17]);
        emb.insert("denver", vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        let dims = LstmDims {
            char_dim: 3,
            char_hidden: 2,
            word_dim: 5,
            feat_dim: 2,
            word_hidden: 4,
        };
        let mut model = LstmModel::init(
            LabelAlphabet::full(),
            vec!['a', 'b', 'é'],
            emb,
            dims,
            RepConfig::default(),
            true,
            EmissionForm::Logits,
            42,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for t in model.trainable_mut() {
            for v in &mut t.data {
                *v = rng.gen_range(-2.0..2.0);
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.lstm");
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded, model);
        // byte-identical re-serialization
        let path2 = dir.path().join("model2.lstm");
        save_model(&loaded, &path2).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn rejects_foreign_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk");
        std::fs::write(&path, b"CRF-MODEL v1\n").unwrap();
        assert!(load_model(&path).is_err());
    }
}
