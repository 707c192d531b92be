//! Binary checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "NCLM"  u32 version  u64 header_len  header (compact JSON)
//! u32 tensor_count
//! per tensor: u32 name_len, name (UTF-8), u8 dtype (0 = f64, 1 = f32),
//!             u32 ndim, ndim × u64 dims, payload
//! ```

use std::fs;
use std::io::{Cursor, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{Precision, TrainConfig};
use crate::corpus::DualVocab;
use crate::error::{Error, Result};
use crate::model::{ModelConfig, NclmModel};
use crate::numcore::{RngState, SeededRng, Tensor};

pub const MAGIC: &[u8; 4] = b"NCLM";
pub const FORMAT_VERSION: u32 = 1;

/// Token lists of both vocabularies plus their hashes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VocabSnapshot {
    pub nlm_hash: String,
    pub ntm_hash: String,
    pub nlm: Vec<String>,
    pub ntm: Vec<String>,
    pub stopwords: Vec<String>,
}

impl VocabSnapshot {
    pub fn of(vocab: &DualVocab) -> Self {
        VocabSnapshot {
            nlm_hash: vocab.nlm.hash(),
            ntm_hash: vocab.ntm.hash(),
            nlm: vocab.nlm.tokens().to_vec(),
            ntm: vocab.ntm.tokens().to_vec(),
            stopwords: vocab.stopwords.iter().cloned().collect(),
        }
    }

    /// Rebuilds the vocabularies, checking the stored hashes.
    pub fn restore(&self) -> Result<DualVocab> {
        let vocab = DualVocab::from_parts(
            self.nlm.clone(),
            self.ntm.clone(),
            self.stopwords.iter().cloned().collect(),
        )?;
        if vocab.nlm.hash() != self.nlm_hash {
            return Err(Error::VocabMismatch { which: "nlm" });
        }
        if vocab.ntm.hash() != self.ntm_hash {
            return Err(Error::VocabMismatch { which: "ntm" });
        }
        Ok(vocab)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpochRecord {
    pub phase: String,
    pub epoch: usize,
    pub train_loss: Option<f64>,
    /// Topic-model perplexity for the NTM phase, language-model perplexity
    /// otherwise.
    pub valid_perplexity: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Progress {
    pub ntm_epochs: usize,
    pub nlm_epochs: usize,
    pub joint_epochs: usize,
    pub best_epoch: usize,
    pub best_valid_perplexity: Option<f64>,
    pub history: Vec<EpochRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub config: TrainConfig,
    pub model: ModelConfig,
    pub vocab: VocabSnapshot,
    pub rng: RngState,
    pub progress: Progress,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub model: NclmModel,
}

impl Checkpoint {
    pub fn vocab(&self) -> Result<DualVocab> {
        self.header.vocab.restore()
    }

    /// Errors unless `vocab` is the vocabulary this checkpoint was trained on.
    pub fn verify_vocab(&self, vocab: &DualVocab) -> Result<()> {
        if vocab.nlm.hash() != self.header.vocab.nlm_hash {
            return Err(Error::VocabMismatch { which: "nlm" });
        }
        if vocab.ntm.hash() != self.header.vocab.ntm_hash {
            return Err(Error::VocabMismatch { which: "ntm" });
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header)?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        let tensors = self.model.named_tensors();
        out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
        let precision = self.header.config.precision;
        for (name, t) in tensors {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(match precision {
                Precision::F64 => 0,
                Precision::F32 => 1,
            });
            out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &x in t.data() {
                match precision {
                    Precision::F64 => out.extend_from_slice(&x.to_le_bytes()),
                    Precision::F32 => out.extend_from_slice(&(x as f32).to_le_bytes()),
                }
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Cursor::new(bytes);
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic, "magic")?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file (bad magic bytes)".into()));
        }
        let version = read_u32(&mut r, "version")?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {version}, expected {FORMAT_VERSION}"
            )));
        }
        let header_len = read_u64(&mut r, "header length")? as usize;
        if header_len > bytes.len() {
            return Err(Error::Checkpoint("header length exceeds file size".into()));
        }
        let mut header = vec![0u8; header_len];
        read_exact(&mut r, &mut header, "header")?;
        let header: CheckpointHeader =
            serde_json::from_slice(&header).map_err(|e| Error::Checkpoint(format!("corrupted header: {e}")))?;
        let vocab = header.vocab.restore()?;

        let mut model = NclmModel::init(
            header.model.clone(),
            vocab.nlm.len(),
            vocab.ntm.len(),
            Tensor::zeros(&[header.model.embed_dim, vocab.ntm.len()]),
            &mut SeededRng::new(0),
        )?;
        let expected: Vec<(String, Vec<usize>)> = model
            .named_tensors()
            .into_iter()
            .map(|(n, t)| (n, t.shape().to_vec()))
            .collect();
        let count = read_u32(&mut r, "tensor count")? as usize;
        if count != expected.len() {
            return Err(Error::Checkpoint(format!(
                "{count} tensors stored, model needs {}",
                expected.len()
            )));
        }
        let slots = model.tensors_mut();
        for ((name, shape), slot) in expected.into_iter().zip(slots) {
            let name_len = read_u32(&mut r, "tensor name")? as usize;
            let mut stored = vec![0u8; name_len.min(bytes.len())];
            read_exact(&mut r, &mut stored, "tensor name")?;
            if stored != name.as_bytes() {
                return Err(Error::Checkpoint(format!(
                    "expected tensor {name}, found {}",
                    String::from_utf8_lossy(&stored)
                )));
            }
            let mut dtype = [0u8; 1];
            read_exact(&mut r, &mut dtype, "dtype")?;
            let ndim = read_u32(&mut r, "ndim")? as usize;
            let mut dims = Vec::with_capacity(ndim.min(8));
            for _ in 0..ndim {
                dims.push(read_u64(&mut r, "dims")? as usize);
            }
            if dims != shape {
                return Err(Error::Checkpoint(format!("tensor {name}: shape {dims:?}, expected {shape:?}")));
            }
            let n: usize = shape.iter().product();
            let mut data = Vec::with_capacity(n);
            match dtype[0] {
                0 => {
                    for _ in 0..n {
                        let mut b = [0u8; 8];
                        read_exact(&mut r, &mut b, &name)?;
                        data.push(f64::from_le_bytes(b));
                    }
                }
                1 => {
                    for _ in 0..n {
                        let mut b = [0u8; 4];
                        read_exact(&mut r, &mut b, &name)?;
                        data.push(f32::from_le_bytes(b) as f64);
                    }
                }
                other => return Err(Error::Checkpoint(format!("tensor {name}: unknown dtype {other}"))),
            }
            *slot = Tensor::new(shape, data)?;
        }
        if (r.position() as usize) != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes after last tensor".into()));
        }
        Ok(Checkpoint { header, model })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

fn read_exact(r: &mut Cursor<&[u8]>, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| Error::Checkpoint(format!("truncated file while reading {what}")))
}

fn read_u32(r: &mut Cursor<&[u8]>, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut Cursor<&[u8]>, what: &str) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, what)?;
    Ok(u64::from_le_bytes(b))
}
