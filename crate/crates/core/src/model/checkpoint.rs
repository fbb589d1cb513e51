//! Checkpoint files.
//!
//! The parameter file is a flat binary container (little-endian):
//!
//! ```text
//! "CKP1"                      4 ASCII bytes
//! tensor_count                u32
//! per tensor:
//!   name                      UTF-8, terminated by 0x00
//!   ndim                      u32
//!   ndim × extent             u32
//!   Π extents × value         IEEE-754 binary32, row-major
//! ```
//!
//! Next to it, `<file>.json` records the head shape, label orderings and the
//! training configuration.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{init_parameters, Classifier, HeadShape, Parameters};
use crate::dataio::LabelSpace;
use crate::{Error, Result};

pub const CKPT_MAGIC: &[u8; 4] = b"CKP1";

#[derive(Debug, Clone, PartialEq)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub shape: HeadShape,
    pub labels: LabelSpace,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub genus_labels: Option<LabelSpace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub species_labels: Option<LabelSpace>,
    #[serde(default)]
    pub config: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_epoch: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub val_top5: Option<f64>,
}

impl CheckpointMeta {
    pub fn new(shape: HeadShape, labels: LabelSpace) -> Self {
        Self {
            shape,
            labels,
            genus_labels: None,
            species_labels: None,
            config: serde_json::Value::Null,
            best_epoch: None,
            val_top5: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub model: Classifier,
}

impl Checkpoint {
    pub fn records(&self) -> Vec<TensorRecord> {
        self.model
            .tensors()
            .into_iter()
            .map(|t| TensorRecord {
                name: t.name.to_string(),
                shape: t.shape.to_vec(),
                data: t.data.to_vec(),
            })
            .collect()
    }

    /// Rebuilds the model from `meta.shape` and fills it from `records`,
    /// which must match by name, order and shape.
    pub fn from_records(meta: CheckpointMeta, records: Vec<TensorRecord>) -> Result<Self> {
        if meta.shape.classes() != meta.labels.len() {
            return Err(Error::Checkpoint(format!(
                "head has {} classes but the label space has {}",
                meta.shape.classes(),
                meta.labels.len()
            )));
        }
        let mut model = init_parameters(meta.shape, 0);
        let expected: Vec<(String, Vec<usize>)> = model
            .tensors()
            .iter()
            .map(|t| (t.name.to_string(), t.shape.to_vec()))
            .collect();
        if expected.len() != records.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                expected.len(),
                records.len()
            )));
        }
        for ((slot, (name, shape)), rec) in
            model.tensors_mut().into_iter().zip(expected).zip(records)
        {
            if rec.name != name || rec.shape != shape {
                return Err(Error::Checkpoint(format!(
                    "tensor {} {:?} does not match expected {name} {shape:?}",
                    rec.name, rec.shape
                )));
            }
            if let Some(v) = rec.data.iter().find(|v| !v.is_finite()) {
                return Err(Error::Checkpoint(format!("tensor {name} holds {v}")));
            }
            slot.copy_from_slice(&rec.data);
        }
        Ok(Self { meta, model })
    }
}

pub fn encode_tensors(records: &[TensorRecord]) -> Vec<u8> {
    let mut out = CKPT_MAGIC.to_vec();
    out.extend((records.len() as u32).to_le_bytes());
    for r in records {
        out.extend(r.name.as_bytes());
        out.push(0);
        out.extend((r.shape.len() as u32).to_le_bytes());
        for &e in &r.shape {
            out.extend((e as u32).to_le_bytes());
        }
        for v in &r.data {
            out.extend(v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Truncated(format!("checkpoint ends inside {what}")))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    }
}

pub fn decode_tensors(bytes: &[u8]) -> Result<Vec<TensorRecord>> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4, "magic")? != CKPT_MAGIC {
        return Err(Error::Checkpoint("not a CKP1 file".into()));
    }
    let count = c.u32("tensor count")?;
    let mut records = Vec::with_capacity(count.min(64));
    for i in 0..count {
        let rest = &bytes[c.pos..];
        let nul = rest
            .iter()
            .position(|&b| b == 0)
            .ok_or_else(|| Error::Truncated(format!("tensor {i} name is not NUL-terminated")))?;
        let name = std::str::from_utf8(&rest[..nul])
            .map_err(|_| Error::Checkpoint(format!("tensor {i} name is not UTF-8")))?
            .to_string();
        c.pos += nul + 1;
        let ndim = c.u32("tensor rank")?;
        let shape = (0..ndim)
            .map(|_| c.u32("tensor shape"))
            .collect::<Result<Vec<_>>>()?;
        let len = shape
            .iter()
            .try_fold(1usize, |a, &e| a.checked_mul(e))
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::Checkpoint(format!("tensor {name} is too large")))?;
        let data = c
            .take(len, "tensor payload")?
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
            .collect();
        records.push(TensorRecord { name, shape, data });
    }
    if c.pos != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes",
            bytes.len() - c.pos
        )));
    }
    Ok(records)
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_checkpoint(checkpoint: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_tensors(&checkpoint.records())).map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(&checkpoint.meta)?;
    fs::write(&side, json).map_err(|e| Error::io(side, e))
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    let json = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let meta: CheckpointMeta = serde_json::from_str(&json)?;
    Checkpoint::from_records(meta, decode_tensors(&bytes)?)
}
