//! CRF model file: a plain-text format that diffs cleanly.
//!
//! ```text
//! CRF-MODEL v1
//! c <float>
//! cutoff <int>
//! labels <count>
//! <label>            × count, id order
//! features <count>
//! <feature>\t<w_0> … <w_{L-1}>   × count, id order
//! transitions
//! <from>\t<w_0> … <w_{L-1}>      × (L + 1) rows, BOS last
//! ```
//!
//! Weights are written with Rust's shortest round-trip float formatting,
//! so saving and re-loading reproduces them bit for bit.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::errors::{DeidError, Result};
use crate::features::FeatureIndex;
use crate::tagscheme::{Label, LabelAlphabet};

use super::{weight_count, CrfModel};

const MAGIC: &str = "CRF-MODEL v1";

pub fn save_model(model: &CrfModel, path: &Path) -> Result<()> {
    let l = model.n_labels();
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    let _ = writeln!(out, "c {}", model.c);
    let _ = writeln!(out, "cutoff {}", model.index.cutoff());
    let _ = writeln!(out, "labels {}", l);
    for &label in model.alphabet.labels() {
        let _ = writeln!(out, "{label}");
    }
    let _ = writeln!(out, "features {}", model.index.len());
    for (f, name) in model.index.names().iter().enumerate() {
        out.push_str(name);
        out.push('\t');
        for y in 0..l {
            if y > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{}", model.obs_weight(f as u32, y));
        }
        out.push('\n');
    }
    out.push_str("transitions\n");
    let trans_off = model.index.len() * l;
    for row in 0..=l {
        let name = if row == l {
            "BOS".to_string()
        } else {
            model.alphabet.label(row).to_string()
        };
        out.push_str(&name);
        out.push('\t');
        for y in 0..l {
            if y > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{}", model.weights[trans_off + row * l + y]);
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| DeidError::io(path.display().to_string(), e))
}

pub fn load_model(path: &Path) -> Result<CrfModel> {
    let file = path.display().to_string();
    let text =
        std::fs::read_to_string(path).map_err(|e| DeidError::io(file.clone(), e))?;
    let mut lines = text.lines().enumerate();
    let mut next = |expect: &str| -> Result<(usize, String)> {
        lines
            .next()
            .map(|(i, l)| (i + 1, l.to_string()))
            .ok_or_else(|| DeidError::parse(&file, 0, format!("missing {expect}")))
    };

    let (ln, magic) = next("header")?;
    if magic != MAGIC {
        return Err(DeidError::parse(&file, ln, "not a CRF model file"));
    }
    let field = |line: (usize, String), key: &str| -> Result<String> {
        line.1
            .strip_prefix(&format!("{key} "))
            .map(str::to_string)
            .ok_or_else(|| DeidError::parse(&file, line.0, format!("expected `{key} …`")))
    };
    let c: f64 = field(next("c")?, "c")?
        .parse()
        .map_err(|_| DeidError::parse(&file, 2, "bad c"))?;
    let cutoff: u32 = field(next("cutoff")?, "cutoff")?
        .parse()
        .map_err(|_| DeidError::parse(&file, 3, "bad cutoff"))?;
    let n_labels: usize = field(next("labels")?, "labels")?
        .parse()
        .map_err(|_| DeidError::parse(&file, 4, "bad label count"))?;
    let mut labels = Vec::with_capacity(n_labels);
    for _ in 0..n_labels {
        let (ln, s) = next("label")?;
        labels.push(
            Label::from_str(&s).map_err(|e| DeidError::parse(&file, ln, e.to_string()))?,
        );
    }
    let alphabet = LabelAlphabet::from_labels(labels);
    let n_features: usize = field(next("features")?, "features")?
        .parse()
        .map_err(|_| DeidError::parse(&file, 0, "bad feature count"))?;

    let mut names = Vec::with_capacity(n_features);
    let mut weights = vec![0.0; weight_count(n_features, n_labels)];
    let parse_row = |ln: usize, s: &str| -> Result<(String, Vec<f64>)> {
        let (name, rest) = s
            .split_once('\t')
            .ok_or_else(|| DeidError::parse(&file, ln, "expected `<name>\\t<weights>`"))?;
        let row: Vec<f64> = rest
            .split(' ')
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| DeidError::parse(&file, ln, "bad weight"))?;
        if row.len() != n_labels {
            return Err(DeidError::parse(&file, ln, "wrong weight row arity"));
        }
        Ok((name.to_string(), row))
    };
    for f in 0..n_features {
        let (ln, s) = next("feature row")?;
        let (name, row) = parse_row(ln, &s)?;
        names.push(name);
        weights[f * n_labels..(f + 1) * n_labels].copy_from_slice(&row);
    }
    let (ln, s) = next("transitions")?;
    if s != "transitions" {
        return Err(DeidError::parse(&file, ln, "expected `transitions`"));
    }
    let trans_off = n_features * n_labels;
    for row_idx in 0..=n_labels {
        let (ln, s) = next("transition row")?;
        let (_, row) = parse_row(ln, &s)?;
        weights[trans_off + row_idx * n_labels..trans_off + (row_idx + 1) * n_labels]
            .copy_from_slice(&row);
    }
    Ok(CrfModel {
        index: FeatureIndex::from_names(names, cutoff),
        alphabet,
        c,
        weights,
    })
}
