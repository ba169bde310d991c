//! Versioned binary container shared by every model type.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "CWSM"                      magic
//! u32                         format version
//! str                         component tag ("bilm", "sgns", "tagger")
//! u32, (str, str)*            metadata key/value pairs
//! u32, (str, u32, u32*, u64)* manifest: name, rank, dims, element count
//! f32*                        payloads in manifest order
//! u32, str*                   vocabulary in id order
//! ```
//!
//! `str` is a `u32` byte length followed by UTF-8 bytes.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::ParamTensor;

pub const MAGIC: &[u8; 4] = b"CWSM";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f32>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ModelContainer {
    pub component: String,
    pub metadata: Vec<(String, String)>,
    pub tensors: Vec<TensorEntry>,
    pub vocab: Vec<String>,
}

impl ModelContainer {
    pub fn new(component: impl Into<String>) -> Self {
        Self {
            component: component.into(),
            ..Default::default()
        }
    }

    pub fn set_meta(&mut self, key: impl Into<String>, value: impl ToString) {
        self.metadata.push((key.into(), value.to_string()));
    }

    pub fn meta(&self, key: &str) -> Result<&str> {
        self.metadata
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::Format(format!("missing metadata key {key:?}")))
    }

    pub fn meta_parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.meta(key)?;
        raw.parse()
            .map_err(|_| Error::Format(format!("bad value {raw:?} for metadata key {key:?}")))
    }

    pub fn expect_component(&self, component: &str) -> Result<()> {
        if self.component != component {
            return Err(Error::Format(format!(
                "expected a {component:?} model, found {:?}",
                self.component
            )));
        }
        Ok(())
    }

    /// Appends parameter tensors, rounding to single precision.
    pub fn push_params<'a>(&mut self, params: impl IntoIterator<Item = &'a ParamTensor>) {
        for p in params {
            self.tensors.push(TensorEntry {
                name: p.name().to_string(),
                shape: p.shape().to_vec(),
                values: p.values.iter().map(|&v| v as f32).collect(),
            });
        }
    }

    pub fn tensor(&self, name: &str) -> Result<&TensorEntry> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::Format(format!("missing tensor {name:?}")))
    }

    /// Copies stored tensors into `params`, matching by name and shape.
    pub fn load_params<'a>(&self, params: impl IntoIterator<Item = &'a mut ParamTensor>) -> Result<()> {
        for p in params {
            let t = self.tensor(p.name())?;
            if t.shape != p.shape() {
                return Err(Error::Format(format!(
                    "tensor {:?} has shape {:?}, expected {:?}",
                    t.name,
                    t.shape,
                    p.shape()
                )));
            }
            for (dst, &src) in p.values.iter_mut().zip(&t.values) {
                *dst = f64::from(src);
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        put_str(&mut out, &self.component);
        put_u32(&mut out, self.metadata.len());
        for (k, v) in &self.metadata {
            put_str(&mut out, k);
            put_str(&mut out, v);
        }
        put_u32(&mut out, self.tensors.len());
        for t in &self.tensors {
            put_str(&mut out, &t.name);
            put_u32(&mut out, t.shape.len());
            for &d in &t.shape {
                put_u32(&mut out, d);
            }
            out.extend_from_slice(&(t.values.len() as u64).to_le_bytes());
        }
        for t in &self.tensors {
            for v in &t.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        put_u32(&mut out, self.vocab.len());
        for s in &self.vocab {
            put_str(&mut out, s);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Format("bad magic bytes".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported format version {version}")));
        }
        let component = r.string()?;
        let n_meta = r.u32()?;
        let mut metadata = Vec::with_capacity(n_meta.min(1024) as usize);
        for _ in 0..n_meta {
            let k = r.string()?;
            let v = r.string()?;
            metadata.push((k, v));
        }
        let n_tensors = r.u32()?;
        let mut manifest = Vec::with_capacity(n_tensors.min(1024) as usize);
        for _ in 0..n_tensors {
            let name = r.string()?;
            let rank = r.u32()?;
            let shape = (0..rank)
                .map(|_| r.u32().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let count = r.u64()?;
            let expected = shape.iter().try_fold(1u64, |acc, &d| acc.checked_mul(d as u64));
            if expected != Some(count) {
                return Err(Error::Format(format!(
                    "tensor {name:?}: element count {count} does not match shape {shape:?}"
                )));
            }
            manifest.push((name, shape, count as usize));
        }
        let mut tensors = Vec::with_capacity(manifest.len());
        for (name, shape, count) in manifest {
            let raw = r.take(count.checked_mul(4).ok_or_else(|| Error::Format("tensor too large".into()))?)?;
            let values = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            tensors.push(TensorEntry { name, shape, values });
        }
        let n_vocab = r.u32()?;
        let vocab = (0..n_vocab).map(|_| r.string()).collect::<Result<Vec<_>>>()?;
        if r.pos != bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after vocabulary",
                bytes.len() - r.pos
            )));
        }
        Ok(Self {
            component,
            metadata,
            tensors,
            vocab,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Content hash of the serialized form, as 32 hex digits.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_bytes());
        digest[..16].iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    let v = u32::try_from(v).expect("length exceeds u32");
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("truncated model at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self) -> Result<u64> {
        let b = self.take(8)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        Ok(u64::from_le_bytes(a))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let at = self.pos;
        let b = self.take(n)?;
        String::from_utf8(b.to_vec())
            .map_err(|_| Error::Format(format!("invalid UTF-8 string at byte {at}")))
    }
}
