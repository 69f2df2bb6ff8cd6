//! Binary checkpoint format (all integers little-endian):
//!
//! ```text
//! magic        8 bytes   "LSRCKPT\0"
//! version      u32       currently 1
//! meta_len     u64
//! meta         meta_len bytes of UTF-8 JSON:
//!              {config, relations, vocab, epoch, dev_f1_history, threshold}
//! count        u32       number of tensors
//! per tensor:
//!   name_len   u32
//!   name       name_len bytes of UTF-8
//!   ndim       u32
//!   dims       ndim × u64
//!   data       product(dims) × f64
//! ```
//!
//! Tensors are written in parameter registration order.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{HarnessError, RunConfig};
use crate::encoder::Vocab;
use crate::model::LsrModel;
use crate::numerics::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"LSRCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Meta {
    config: RunConfig,
    relations: usize,
    vocab: Vec<String>,
    epoch: usize,
    dev_f1_history: Vec<f64>,
    threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: RunConfig,
    pub relations: usize,
    /// Vocabulary rows in order, `<unk>` first.
    pub vocab: Vec<String>,
    pub epoch: usize,
    pub dev_f1_history: Vec<f64>,
    pub threshold: f64,
    pub params: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn from_model(model: &LsrModel, config: &RunConfig, epoch: usize, history: &[f64], threshold: f64) -> Self {
        Self {
            config: config.clone(),
            relations: model.config.relations,
            vocab: model.vocab.tokens().to_vec(),
            epoch,
            dev_f1_history: history.to_vec(),
            threshold,
            params: model.store.iter().map(|(_, n, t)| (n.to_string(), t.clone())).collect(),
        }
    }

    /// Rebuilds the model: same architecture, every tensor overwritten.
    pub fn to_model(&self) -> Result<LsrModel, HarnessError> {
        let bad = |message: String| HarnessError::Checkpoint {
            path: "<memory>".into(),
            message,
        };
        let vocab = Vocab::from_tokens(self.vocab.iter().skip(1).cloned());
        if vocab.tokens() != self.vocab.as_slice() {
            return Err(bad("vocabulary does not start with the unknown token or has duplicates".into()));
        }
        let mut model = LsrModel::new(self.config.model_config(self.relations), vocab, self.config.seed);
        if model.store.len() != self.params.len() {
            return Err(bad(format!(
                "expected {} tensors for this architecture, found {}",
                model.store.len(),
                self.params.len()
            )));
        }
        for (name, t) in &self.params {
            let id = model.store.id(name).ok_or_else(|| bad(format!("unexpected tensor {name}")))?;
            model.store.set(id, t.clone()).map_err(|e| bad(format!("{name}: {e}")))?;
        }
        Ok(model)
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        let meta = Meta {
            config: self.config.clone(),
            relations: self.relations,
            vocab: self.vocab.clone(),
            epoch: self.epoch,
            dev_f1_history: self.dev_f1_history.clone(),
            threshold: self.threshold,
        };
        let meta = serde_json::to_vec(&meta).expect("metadata serializes");
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&(meta.len() as u64).to_le_bytes())?;
        w.write_all(&meta)?;
        w.write_all(&(self.params.len() as u32).to_le_bytes())?;
        for (name, t) in &self.params {
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
            for &d in t.shape() {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            for &v in t.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self, String> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|e| e.to_string())?;
        if &magic != CHECKPOINT_MAGIC {
            return Err("not a checkpoint file".into());
        }
        let version = read_u32(r)?;
        if version != CHECKPOINT_VERSION {
            return Err(format!("unsupported version {version}"));
        }
        let meta_len = read_u64(r)? as usize;
        let meta: Meta = serde_json::from_slice(&read_bytes(r, meta_len)?).map_err(|e| e.to_string())?;
        let count = read_u32(r)? as usize;
        let mut params = Vec::with_capacity(count);
        for _ in 0..count {
            let name_len = read_u32(r)? as usize;
            let name = String::from_utf8(read_bytes(r, name_len)?).map_err(|e| e.to_string())?;
            let ndim = read_u32(r)? as usize;
            let shape = (0..ndim).map(|_| read_u64(r).map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
            let n: usize = shape.iter().product();
            let raw = read_bytes(r, n * 8)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            params.push((name, Tensor::new(shape, data).map_err(|e| e.to_string())?));
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest).map_err(|e| e.to_string())?;
        if !rest.is_empty() {
            return Err(format!("{} trailing bytes", rest.len()));
        }
        Ok(Self {
            config: meta.config,
            relations: meta.relations,
            vocab: meta.vocab,
            epoch: meta.epoch,
            dev_f1_history: meta.dev_f1_history,
            threshold: meta.threshold,
            params,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        let mut f = std::io::BufWriter::new(fs::File::create(path).map_err(HarnessError::io(path))?);
        self.write_to(&mut f)
            .and_then(|_| f.flush())
            .map_err(HarnessError::io(path))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let f = fs::File::open(path).map_err(HarnessError::io(path))?;
        Self::read_from(&mut std::io::BufReader::new(f)).map_err(|message| HarnessError::Checkpoint {
            path: path.display().to_string(),
            message,
        })
    }
}

fn read_bytes(r: &mut impl Read, n: usize) -> Result<Vec<u8>, String> {
    let mut buf = Vec::new();
    r.take(n as u64).read_to_end(&mut buf).map_err(|e| e.to_string())?;
    if buf.len() != n {
        return Err("unexpected end of file".into());
    }
    Ok(buf)
}

fn read_u32(r: &mut impl Read) -> Result<u32, String> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|e| e.to_string())?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64, String> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|e| e.to_string())?;
    Ok(u64::from_le_bytes(b))
}
