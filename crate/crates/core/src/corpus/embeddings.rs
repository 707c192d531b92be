use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::Vocabulary;
use crate::error::{Error, Result};
use crate::numcore::{SeededRng, Tensor};

/// Range of the uniform fill for words missing from an embedding file.
pub const MISSING_RANGE: f64 = 0.1;

/// Reads a word2vec text file into a `[dim, vocab.len()]` matrix whose
/// column `i` is the vector of `vocab.token(i)`.
///
/// Words absent from the file get a uniform `[-0.1, 0.1]` vector drawn from
/// a stream seeded by `seed`, so the fill is reproducible.
pub fn load_embeddings(path: impl AsRef<Path>, dim: usize, vocab: &Vocabulary, seed: u64) -> Result<Tensor> {
    let path = path.as_ref();
    parse_embeddings(&fs::read_to_string(path)?, dim, vocab, seed, path)
}

pub fn parse_embeddings(text: &str, dim: usize, vocab: &Vocabulary, seed: u64, origin: &Path) -> Result<Tensor> {
    let err = |line: usize, msg: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty embedding file".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (count, file_dim) = match fields.as_slice() {
        [c, d] => (
            c.parse::<usize>().map_err(|e| err(1, format!("bad count: {e}")))?,
            d.parse::<usize>().map_err(|e| err(1, format!("bad dimension: {e}")))?,
        ),
        _ => return Err(err(1, "header must be `<count> <dim>`".into())),
    };
    if file_dim != dim {
        return Err(err(1, format!("file dimension {file_dim} != expected {dim}")));
    }

    let mut found: HashMap<usize, Vec<f64>> = HashMap::new();
    let mut rows = 0;
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        rows += 1;
        let mut parts = line.split_whitespace();
        let word = parts.next().unwrap_or_default();
        let values: Vec<f64> = parts
            .map(|p| p.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| err(i + 1, format!("bad value: {e}")))?;
        if values.len() != dim {
            return Err(err(i + 1, format!("row has {} values, header says {dim}", values.len())));
        }
        if let Some(idx) = vocab.get(&word.to_lowercase()) {
            found.entry(idx).or_insert(values);
        }
    }
    if rows != count {
        log::warn!("embedding header count={count} but file has {rows} rows");
    }

    let z = vocab.len();
    let mut rng = SeededRng::new(seed);
    let mut out = Tensor::zeros(&[dim, z]);
    let data = out.data_mut();
    for col in 0..z {
        match found.get(&col) {
            Some(v) => {
                for (d, x) in v.iter().enumerate() {
                    data[d * z + col] = *x;
                }
            }
            None => {
                for d in 0..dim {
                    data[d * z + col] = rng.uniform(-MISSING_RANGE, MISSING_RANGE);
                }
            }
        }
    }
    Ok(out)
}

/// Seeded uniform `[-0.1, 0.1]` matrix for when no embedding file is given.
pub fn random_embeddings(dim: usize, size: usize, seed: u64) -> Tensor {
    SeededRng::new(seed).uniform_tensor(&[dim, size], -MISSING_RANGE, MISSING_RANGE)
}
