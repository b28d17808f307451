//! Parameter checkpoints.
//!
//! Binary container, all integers little-endian:
//!
//! ```text
//! magic      4 bytes  "AJPS"
//! version    u32      1
//! count      u32      number of tensors
//! count times:
//!   name_len u32
//!   name     name_len bytes, UTF-8
//!   rank     u32
//!   dims     rank x u64
//!   data     prod(dims) x f64 (IEEE-754 binary64)
//! ```
//!
//! Next to `<file>` a text manifest `<file>.manifest` lists one tensor per
//! line as `name<TAB>d0xd1x..<TAB>element count`.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use super::params::ParameterSet;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"AJPS";
const VERSION: u32 = 1;

pub fn manifest_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest");
    PathBuf::from(s)
}

pub fn encode(params: &ParameterSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + params.scalar_count() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for id in params.ids() {
        let name = params.name(id).as_bytes();
        let t = params.value(id);
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name);
        out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn manifest(params: &ParameterSet) -> String {
    let mut s = format!("# antijam parameter checkpoint v{VERSION}\n");
    for id in params.ids() {
        let t = params.value(id);
        let dims: Vec<String> = t.shape().iter().map(usize::to_string).collect();
        s.push_str(&format!(
            "{}\t{}\t{}\n",
            params.name(id),
            dims.join("x"),
            t.len()
        ));
    }
    s
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.buf.len() < n {
            return Err(Error::Checkpoint("truncated".into()));
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.take(4)?.read_exact(&mut b).expect("sized");
        Ok(u32::from_le_bytes(b))
    }

    fn u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.take(8)?.read_exact(&mut b).expect("sized");
        Ok(u64::from_le_bytes(b))
    }
}

pub fn decode(bytes: &[u8]) -> Result<ParameterSet> {
    let mut r = Reader { buf: bytes };
    if r.take(4)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let count = r.u32()? as usize;
    let mut params = ParameterSet::new();
    for _ in 0..count {
        let n = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(n)?)
            .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?
            .to_string();
        if params.id(&name).is_some() {
            return Err(Error::Checkpoint(format!("duplicate tensor `{name}`")));
        }
        let rank = r.u32()? as usize;
        let dims = (0..rank)
            .map(|_| r.u64().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let id = params.add(name, &dims);
        for v in params.value_mut(id).data_mut() {
            *v = f64::from_bits(r.u64()?);
        }
    }
    if !r.buf.is_empty() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    Ok(params)
}

/// Writes the binary container and its manifest.
pub fn save(params: &ParameterSet, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode(params))
        .map_err(|e| Error::io(path, e))?;
    let mpath = manifest_path(path);
    fs::write(&mpath, manifest(params)).map_err(|e| Error::io(mpath, e))
}

pub fn load(path: &Path) -> Result<ParameterSet> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

/// Overwrites the values of `params` with a checkpoint of identical layout.
pub fn load_into(params: &mut ParameterSet, path: &Path) -> Result<()> {
    let loaded = load(path)?;
    let same = loaded.len() == params.len()
        && params.ids().zip(loaded.ids()).all(|(a, b)| {
            params.name(a) == loaded.name(b) && params.value(a).shape() == loaded.value(b).shape()
        });
    if !same {
        return Err(Error::Checkpoint(
            "layout does not match the network".into(),
        ));
    }
    params.copy_values_from(&loaded);
    Ok(())
}
