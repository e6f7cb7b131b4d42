//! Binary checkpoint format.
//!
//! ```text
//! "SRTT"                       magic
//! u32 LE                       format version
//! u32 LE + UTF-8 JSON          architecture descriptor
//! per parameter, lexicographic name order:
//!   u32 LE + UTF-8             name
//!   u8                         rank
//!   rank x u32 LE              dims
//!   prod(dims) x f32 LE        values
//! ```
//!
//! Values are always stored as `f32`; models in other precisions are cast.

use std::fs;
use std::path::Path;

use super::{Param, ParamStore, Real, SrArch, SrModel};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SRTT";
pub const CHECKPOINT_VERSION: u32 = 1;

/// One decoded parameter record.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointEntry {
    pub name: String,
    pub dims: Vec<usize>,
    pub values: Vec<f32>,
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len());
    out.extend_from_slice(s.as_bytes());
}

pub fn encode_checkpoint<T: Real>(descriptor: &serde_json::Value, params: &ParamStore<T>) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    put_str(&mut out, &serde_json::to_string(descriptor)?);
    for (name, p) in params.iter() {
        put_str(&mut out, name);
        out.push(u8::try_from(p.dims.len()).map_err(|_| Error::Checkpoint(format!("`{name}` rank too large")))?);
        for &d in &p.dims {
            put_u32(&mut out, d);
        }
        for v in &p.value {
            out.extend_from_slice(&v.to_f32().to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Checkpoint(format!(
                "truncated file: needed {n} bytes for {what} at offset {}",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let n = self.u32(what)?;
        let b = self.take(n, what)?;
        String::from_utf8(b.to_vec()).map_err(|_| Error::Checkpoint(format!("{what} is not UTF-8")))
    }

    fn done(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(serde_json::Value, Vec<CheckpointEntry>)> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4, "magic")?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(magic),
            std::str::from_utf8(CHECKPOINT_MAGIC).expect("ascii")
        )));
    }
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION as usize {
        return Err(Error::Checkpoint(format!(
            "unsupported version {version}, expected {CHECKPOINT_VERSION}"
        )));
    }
    let descriptor: serde_json::Value = serde_json::from_str(&r.string("descriptor")?)?;
    let mut entries = Vec::new();
    while !r.done() {
        let name = r.string("parameter name")?;
        let rank = r.take(1, "rank")?[0] as usize;
        let dims = (0..rank).map(|_| r.u32("dims")).collect::<Result<Vec<_>>>()?;
        let n: usize = dims.iter().product();
        let raw = r.take(n * 4, &format!("values of `{name}`"))?;
        let values = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        entries.push(CheckpointEntry { name, dims, values });
    }
    Ok((descriptor, entries))
}

/// Rebuilds a parameter store, requiring exactly the names in `expected`.
pub(crate) fn store_from_entries<T: Real>(entries: Vec<CheckpointEntry>, expected: &ParamStore<T>) -> Result<ParamStore<T>> {
    let mut store = ParamStore::new();
    for e in entries {
        let want = expected
            .get(&e.name)
            .ok_or_else(|| Error::Checkpoint(format!("unknown tensor name `{}`", e.name)))?;
        if want.dims != e.dims {
            return Err(Error::Checkpoint(format!(
                "tensor `{}` has dims {:?}, expected {:?}",
                e.name, e.dims, want.dims
            )));
        }
        let values = e.values.into_iter().map(T::from_f32).collect();
        store
            .insert(e.name.clone(), Param::new(e.dims, values)?)
            .map_err(|_| Error::Checkpoint(format!("tensor `{}` appears twice", e.name)))?;
    }
    if let Some(missing) = expected.names().find(|n| store.get(n).is_none()) {
        return Err(Error::Checkpoint(format!("missing tensor `{missing}`")));
    }
    Ok(store)
}

pub fn sr_model_to_bytes<T: Real>(model: &SrModel<T>) -> Result<Vec<u8>> {
    encode_checkpoint(&serde_json::to_value(model.arch())?, model.params())
}

pub fn sr_model_from_bytes<T: Real>(bytes: &[u8]) -> Result<SrModel<T>> {
    let (descriptor, entries) = decode_checkpoint(bytes)?;
    let arch: SrArch = serde_json::from_value(descriptor)
        .map_err(|e| Error::Checkpoint(format!("not an SR model descriptor: {e}")))?;
    let reference = SrModel::<T>::new(arch, 0)?;
    let store = store_from_entries(entries, reference.params())?;
    SrModel::from_params(arch, store)
}

pub fn save_sr_model<T: Real>(model: &SrModel<T>, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &sr_model_to_bytes(model)?)
}

pub fn load_sr_model<T: Real>(path: impl AsRef<Path>) -> Result<SrModel<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    sr_model_from_bytes(&bytes)
}
