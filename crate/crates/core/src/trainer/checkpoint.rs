//! Binary checkpoint container.
//!
//! Layout (little-endian): the magic `MLTC1`, a `u32` section count, then per
//! section: `u32` name length, UTF-8 name, `u8` dtype (0 = f64, 1 = bytes,
//! 2 = i64), `u32` rank, `u64` per dimension, the payload, and a CRC32 of
//! everything in the section before it. Metadata sections come first, then
//! tensors sorted by name.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{ArrayD, IxDyn};
use serde::{Deserialize, Serialize};

use crate::tensor::ParamStore;
use crate::transfer::LabelScaler;

pub const MAGIC: &[u8; 5] = b"MLTC1";

const ARCH: &str = "__architecture__";
const SCALER: &str = "__scaler__";
const SCALER_UNIT: &str = "__scaler_unit__";
const PROVENANCE: &str = "__provenance__";

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("checksum mismatch in section '{0}'")]
    Checksum(String),
    #[error("checkpoint is truncated")]
    Truncated,
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
    #[error("architecture mismatch: {0}")]
    ArchitectureMismatch(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F64(Vec<f64>),
    Bytes(Vec<u8>),
    I64(Vec<i64>),
}

impl TensorData {
    fn tag(&self) -> u8 {
        match self {
            TensorData::F64(_) => 0,
            TensorData::Bytes(_) => 1,
            TensorData::I64(_) => 2,
        }
    }

    fn len(&self) -> usize {
        match self {
            TensorData::F64(v) => v.len(),
            TensorData::Bytes(v) => v.len(),
            TensorData::I64(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub shape: Vec<usize>,
    pub data: TensorData,
}

impl NamedTensor {
    pub fn f64(shape: Vec<usize>, values: Vec<f64>) -> Self {
        NamedTensor {
            shape,
            data: TensorData::F64(values),
        }
    }

    pub fn i64(shape: Vec<usize>, values: Vec<i64>) -> Self {
        NamedTensor {
            shape,
            data: TensorData::I64(values),
        }
    }

    pub fn from_array(a: &ArrayD<f64>) -> Self {
        NamedTensor::f64(a.shape().to_vec(), a.iter().copied().collect())
    }

    pub fn as_f64(&self) -> Option<&[f64]> {
        match &self.data {
            TensorData::F64(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<&[i64]> {
        match &self.data {
            TensorData::I64(v) => Some(v),
            _ => None,
        }
    }

    pub fn to_array(&self) -> Option<ArrayD<f64>> {
        ArrayD::from_shape_vec(IxDyn(&self.shape), self.as_f64()?.to_vec()).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub epochs: usize,
    pub dataset_hash: String,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelCheckpoint {
    /// JSON text, kept verbatim so that load → save reproduces the bytes.
    pub architecture: String,
    pub scaler: LabelScaler,
    pub provenance: Provenance,
    pub tensors: BTreeMap<String, NamedTensor>,
}

impl ModelCheckpoint {
    pub fn new(
        architecture: &serde_json::Value,
        scaler: LabelScaler,
        provenance: Provenance,
    ) -> Self {
        ModelCheckpoint {
            architecture: architecture.to_string(),
            scaler,
            provenance,
            tensors: BTreeMap::new(),
        }
    }

    pub fn with_params(mut self, store: &ParamStore) -> Self {
        for (name, p) in store.iter() {
            self.tensors
                .insert(name.to_string(), NamedTensor::from_array(&p.value));
        }
        self
    }

    pub fn architecture_json(&self) -> Result<serde_json::Value, CheckpointError> {
        serde_json::from_str(&self.architecture)
            .map_err(|e| CheckpointError::Malformed(format!("architecture: {e}")))
    }

    /// Name of the model family recorded in the architecture blob.
    pub fn model_kind(&self) -> Option<String> {
        self.architecture_json()
            .ok()?
            .get("model")?
            .as_str()
            .map(String::from)
    }

    /// Copies stored values into `store`, which must hold exactly the same names and shapes.
    pub fn load_params(&self, store: &mut ParamStore) -> Result<(), CheckpointError> {
        let mut other = ParamStore::new();
        for (name, t) in &self.tensors {
            let a = t.to_array().ok_or_else(|| {
                CheckpointError::ArchitectureMismatch(format!(
                    "tensor '{name}' is not a real tensor"
                ))
            })?;
            other.insert(name.clone(), a, false);
        }
        store
            .load_values(&other)
            .map_err(CheckpointError::ArchitectureMismatch)
    }

    pub fn tensor(&self, name: &str) -> Result<&NamedTensor, CheckpointError> {
        self.tensors
            .get(name)
            .ok_or_else(|| CheckpointError::Malformed(format!("missing tensor '{name}'")))
    }
}

fn put_section(out: &mut Vec<u8>, name: &str, shape: &[usize], data: &TensorData) {
    let start = out.len();
    out.extend((name.len() as u32).to_le_bytes());
    out.extend(name.as_bytes());
    out.push(data.tag());
    out.extend((shape.len() as u32).to_le_bytes());
    for &d in shape {
        out.extend((d as u64).to_le_bytes());
    }
    match data {
        TensorData::F64(v) => v.iter().for_each(|x| out.extend(x.to_le_bytes())),
        TensorData::Bytes(v) => out.extend(v),
        TensorData::I64(v) => v.iter().for_each(|x| out.extend(x.to_le_bytes())),
    }
    let crc = crc32fast::hash(&out[start..]);
    out.extend(crc.to_le_bytes());
}

pub fn write_checkpoint(c: &ModelCheckpoint) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend(MAGIC);
    out.extend(((4 + c.tensors.len()) as u32).to_le_bytes());
    let bytes = |s: &str| TensorData::Bytes(s.as_bytes().to_vec());
    put_section(
        &mut out,
        ARCH,
        &[c.architecture.len()],
        &bytes(&c.architecture),
    );
    put_section(
        &mut out,
        SCALER,
        &[2],
        &TensorData::F64(vec![c.scaler.mu, c.scaler.sigma]),
    );
    put_section(
        &mut out,
        SCALER_UNIT,
        &[c.scaler.unit.len()],
        &bytes(&c.scaler.unit),
    );
    let prov = serde_json::to_string(&c.provenance).expect("provenance serializes");
    put_section(&mut out, PROVENANCE, &[prov.len()], &bytes(&prov));
    for (name, t) in &c.tensors {
        put_section(&mut out, name, &t.shape, &t.data);
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).ok_or(CheckpointError::Truncated)?;
        let s = self
            .buf
            .get(self.pos..end)
            .ok_or(CheckpointError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn read_checkpoint(buf: &[u8]) -> Result<ModelCheckpoint, CheckpointError> {
    if buf.len() < MAGIC.len() || &buf[..MAGIC.len()] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let mut r = Reader {
        buf,
        pos: MAGIC.len(),
    };
    let count = r.u32()?;
    let mut sections: Vec<(String, NamedTensor)> = Vec::new();
    for _ in 0..count {
        let start = r.pos;
        let name_len = r.u32()? as usize;
        let name_bytes = r.take(name_len)?;
        let name = String::from_utf8_lossy(name_bytes).into_owned();
        let tag = r.take(1)?[0];
        let rank = r.u32()? as usize;
        let mut shape = Vec::with_capacity(rank.min(16));
        for _ in 0..rank {
            shape.push(r.u64()? as usize);
        }
        let n: usize = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or(CheckpointError::Truncated)?;
        let width = match tag {
            0 | 2 => 8,
            1 => 1,
            // writers only emit the three tags above
            _ => return Err(CheckpointError::Checksum(name)),
        };
        let payload = r.take(n.checked_mul(width).ok_or(CheckpointError::Truncated)?)?;
        let end = r.pos;
        let crc = r.u32()?;
        if crc32fast::hash(&buf[start..end]) != crc {
            return Err(CheckpointError::Checksum(name));
        }
        let data = match tag {
            0 => TensorData::F64(
                payload
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            ),
            1 => TensorData::Bytes(payload.to_vec()),
            _ => TensorData::I64(
                payload
                    .chunks_exact(8)
                    .map(|c| i64::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            ),
        };
        sections.push((name, NamedTensor { shape, data }));
    }
    if r.pos != buf.len() {
        return Err(CheckpointError::Malformed(
            "trailing bytes after last section".into(),
        ));
    }

    let mut meta: BTreeMap<String, NamedTensor> = BTreeMap::new();
    let mut tensors = BTreeMap::new();
    for (name, t) in sections {
        debug_assert_eq!(t.data.len(), t.shape.iter().product::<usize>());
        if name.starts_with("__") {
            meta.insert(name, t);
        } else if tensors.insert(name.clone(), t).is_some() {
            return Err(CheckpointError::Malformed(format!(
                "duplicate tensor '{name}'"
            )));
        }
    }
    let text = |key: &str| -> Result<String, CheckpointError> {
        match meta.get(key).map(|t| &t.data) {
            Some(TensorData::Bytes(b)) => String::from_utf8(b.clone())
                .map_err(|_| CheckpointError::Malformed(format!("{key} is not UTF-8"))),
            _ => Err(CheckpointError::Malformed(format!("missing section {key}"))),
        }
    };
    let architecture = text(ARCH)?;
    let unit = text(SCALER_UNIT)?;
    let provenance: Provenance = serde_json::from_str(&text(PROVENANCE)?)
        .map_err(|e| CheckpointError::Malformed(format!("provenance: {e}")))?;
    let scaler = match meta.get(SCALER).and_then(|t| t.as_f64()) {
        Some([mu, sigma]) => LabelScaler {
            mu: *mu,
            sigma: *sigma,
            unit,
        },
        _ => {
            return Err(CheckpointError::Malformed(
                "missing or malformed scaler".into(),
            ))
        }
    };
    Ok(ModelCheckpoint {
        architecture,
        scaler,
        provenance,
        tensors,
    })
}

pub fn save_checkpoint(c: &ModelCheckpoint, path: &Path) -> Result<(), CheckpointError> {
    std::fs::write(path, write_checkpoint(c)).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<ModelCheckpoint, CheckpointError> {
    let buf = std::fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_checkpoint(&buf)
}
