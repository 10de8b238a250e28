//! Binary model container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    8 bytes  "GSALMDL\0"
//! version  u32
//! kind     str      (u32 length + UTF-8 bytes)
//! meta     u32 count, then (key str, value str) pairs
//! blocks   u32 count, then per block:
//!          name str, u32 ndim, ndim x u64 dims, prod(dims) x f64
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::diffcore::{DiffError, ParamStore};

pub const MAGIC: &[u8; 8] = b"GSALMDL\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("unsupported model file version {0}")]
    Version(u32),
    #[error("model file truncated")]
    Truncated,
    #[error("expected a `{expected}` model, found `{found}`")]
    WrongKind { expected: String, found: String },
    #[error("malformed model file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Diff(#[from] DiffError),
}

/// Decoded container: model kind, string metadata, and parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelFile {
    pub kind: String,
    pub meta: BTreeMap<String, String>,
    pub params: ParamStore,
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

impl ModelFile {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        put_str(&mut out, &self.kind);
        out.extend_from_slice(&(self.meta.len() as u32).to_le_bytes());
        for (k, v) in &self.meta {
            put_str(&mut out, k);
            put_str(&mut out, v);
        }
        out.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        for (name, t) in self.params.iter() {
            put_str(&mut out, name);
            out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in t.values() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelIoError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(ModelIoError::BadMagic);
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(ModelIoError::Version(version));
        }
        let kind = r.string()?;
        let mut meta = BTreeMap::new();
        for _ in 0..r.u32()? {
            let k = r.string()?;
            let v = r.string()?;
            meta.insert(k, v);
        }
        let mut params = ParamStore::new();
        for _ in 0..r.u32()? {
            let name = r.string()?;
            let ndim = r.u32()? as usize;
            let shape = (0..ndim).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
            let n = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or(ModelIoError::Truncated)?;
            if n.checked_mul(8).is_none_or(|b| b > r.remaining()) {
                return Err(ModelIoError::Truncated);
            }
            let values = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
            params.add(name, &shape, values)?;
        }
        if r.remaining() != 0 {
            return Err(ModelIoError::Malformed(format!("{} trailing bytes", r.remaining())));
        }
        Ok(ModelFile { kind, meta, params })
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelIoError> {
        fs::write(path, self.to_bytes()).map_err(|e| ModelIoError::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ModelIoError> {
        let bytes = fs::read(path).map_err(|e| ModelIoError::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        Self::from_bytes(&bytes)
    }

    pub fn expect_kind(&self, kind: &str) -> Result<(), ModelIoError> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(ModelIoError::WrongKind {
                expected: kind.to_string(),
                found: self.kind.clone(),
            })
        }
    }

    pub fn meta_parse<T: std::str::FromStr>(&self, key: &str) -> Result<T, ModelIoError> {
        self.meta
            .get(key)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| ModelIoError::Malformed(format!("missing or invalid metadata `{key}`")))
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelIoError> {
        if n > self.remaining() {
            return Err(ModelIoError::Truncated);
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, ModelIoError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, ModelIoError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, ModelIoError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String, ModelIoError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| ModelIoError::Malformed(e.to_string()))
    }
}
