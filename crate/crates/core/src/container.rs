//! Binary container shared by dataset archives and model files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "GDUF" | version: u32 | manifest_len: u64 | manifest (UTF-8 JSON)
//!        | payload (f64 LE, row-major, manifest order) | crc32(payload): u32
//! ```
//!
//! The manifest carries a `tensors` array of `{name, shape, offset}` with
//! byte offsets relative to the start of the payload.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, FormatError, Result};

pub const MAGIC: [u8; 4] = *b"GDUF";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl NamedTensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            shape,
            data,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: u64,
}

pub fn encode(manifest: &Value, tensors: &[NamedTensor]) -> std::result::Result<Vec<u8>, FormatError> {
    let mut obj: Map<String, Value> = match manifest {
        Value::Object(m) => m.clone(),
        _ => return Err(FormatError::Manifest("manifest must be a JSON object".into())),
    };
    let mut entries = Vec::with_capacity(tensors.len());
    let mut offset = 0u64;
    for t in tensors {
        if t.shape.iter().product::<usize>() != t.data.len() {
            return Err(FormatError::Manifest(format!(
                "tensor {} has shape {:?} but {} values",
                t.name,
                t.shape,
                t.data.len()
            )));
        }
        entries.push(TensorEntry {
            name: t.name.clone(),
            shape: t.shape.clone(),
            offset,
        });
        offset += 8 * t.data.len() as u64;
    }
    obj.insert(
        "tensors".into(),
        serde_json::to_value(&entries).expect("entries serialize"),
    );
    let manifest = serde_json::to_vec(&Value::Object(obj)).expect("manifest serializes");

    let mut out = Vec::with_capacity(20 + manifest.len() + offset as usize);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
    out.extend_from_slice(&manifest);
    let payload_start = out.len();
    for t in tensors {
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out[payload_start..]);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

fn take(bytes: &[u8], at: usize, n: usize) -> std::result::Result<&[u8], FormatError> {
    bytes.get(at..at + n).ok_or(FormatError::Truncated {
        needed: (at + n) as u64,
        found: bytes.len() as u64,
    })
}

/// Decodes a container; the returned manifest has its `tensors` key removed.
pub fn decode(bytes: &[u8]) -> std::result::Result<(Value, Vec<NamedTensor>), FormatError> {
    let magic: [u8; 4] = take(bytes, 0, 4)?.try_into().expect("4 bytes");
    if magic != MAGIC {
        return Err(FormatError::BadMagic(magic));
    }
    let version = u32::from_le_bytes(take(bytes, 4, 4)?.try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(FormatError::Version {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let mlen = u64::from_le_bytes(take(bytes, 8, 8)?.try_into().expect("8 bytes"));
    let mlen = usize::try_from(mlen).map_err(|_| FormatError::Manifest("manifest too large".into()))?;
    let manifest: Value = serde_json::from_slice(take(bytes, 16, mlen)?)
        .map_err(|e| FormatError::Manifest(e.to_string()))?;
    let Value::Object(mut obj) = manifest else {
        return Err(FormatError::Manifest("manifest is not an object".into()));
    };
    let entries: Vec<TensorEntry> = serde_json::from_value(obj.remove("tensors").unwrap_or(Value::Null))
        .map_err(|e| FormatError::Manifest(format!("tensors: {e}")))?;

    let payload_start = 16 + mlen;
    let mut payload_len = 0usize;
    for e in &entries {
        if e.offset as usize != payload_len {
            return Err(FormatError::Manifest(format!("tensor {} has offset {}", e.name, e.offset)));
        }
        payload_len += 8 * e.shape.iter().product::<usize>();
    }
    let payload = take(bytes, payload_start, payload_len)?;
    let stored = u32::from_le_bytes(take(bytes, payload_start + payload_len, 4)?.try_into().expect("4 bytes"));
    let computed = crc32fast::hash(payload);
    if stored != computed {
        return Err(FormatError::Checksum { stored, computed });
    }
    if bytes.len() != payload_start + payload_len + 4 {
        return Err(FormatError::Manifest(format!(
            "{} trailing bytes after checksum",
            bytes.len() - payload_start - payload_len - 4
        )));
    }

    let tensors = entries
        .into_iter()
        .map(|e| {
            let n: usize = e.shape.iter().product();
            let start = e.offset as usize;
            let data = payload[start..start + 8 * n]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            NamedTensor {
                name: e.name,
                shape: e.shape,
                data,
            }
        })
        .collect();
    Ok((Value::Object(obj), tensors))
}

pub fn write_file(path: &Path, manifest: &Value, tensors: &[NamedTensor]) -> Result<()> {
    let bytes = encode(manifest, tensors).map_err(|kind| Error::Format {
        path: path.to_path_buf(),
        kind,
    })?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_file(path: &Path) -> Result<(Value, Vec<NamedTensor>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|kind| Error::Format {
        path: path.to_path_buf(),
        kind,
    })
}

/// Pulls a tensor out of a decoded list by name, checking its shape.
pub fn take_tensor(tensors: &mut Vec<NamedTensor>, name: &str, shape: &[usize]) -> std::result::Result<Vec<f64>, FormatError> {
    let idx = tensors
        .iter()
        .position(|t| t.name == name)
        .ok_or_else(|| FormatError::Manifest(format!("missing tensor {name}")))?;
    let t = tensors.remove(idx);
    if t.shape != shape {
        return Err(FormatError::Manifest(format!(
            "tensor {name} has shape {:?}, expected {shape:?}",
            t.shape
        )));
    }
    Ok(t.data)
}
