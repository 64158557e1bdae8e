//! Weight file: little-endian binary with a text config header and named
//! f32 parameter blobs, closed by a CRC-32. Layout in `docs/checkpoint.md`.

use std::io::Write;
use std::path::Path;

use super::{Model, ModelConfig};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"FDCK";
pub const CHECKPOINT_VERSION: u16 = 1;
const FLAG_FINALIZED: u16 = 1;

fn err(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

pub fn encode_checkpoint(model: &Model) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    let flags = if model.is_finalized() { FLAG_FINALIZED } else { 0 };
    out.extend_from_slice(&flags.to_le_bytes());
    out.extend_from_slice(&model.lambda.to_le_bytes());
    let cfg = model.config().to_kv();
    out.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
    out.extend_from_slice(cfg.as_bytes());
    out.extend_from_slice(&(model.store.len() as u32).to_le_bytes());
    for (_, name, t) in model.store.iter() {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(t.rank() as u8);
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    b: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let s = self
            .b
            .get(self.pos..self.pos + n)
            .ok_or_else(|| err(format!("file ends at byte {} (needed {n} more)", self.b.len())))?;
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn str(&mut self, n: usize) -> Result<&'a str> {
        std::str::from_utf8(self.take(n)?).map_err(|_| err("non-UTF-8 text"))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Model> {
    if bytes.len() < 8 || bytes[..4] != CHECKPOINT_MAGIC {
        return Err(err("not a checkpoint (bad magic)"));
    }
    let body = &bytes[..bytes.len() - 4];
    let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
    if crc32fast::hash(body) != stored {
        return Err(err("checksum mismatch"));
    }
    let mut r = Reader { b: body, pos: 4 };
    let version = r.u16()?;
    if version != CHECKPOINT_VERSION {
        return Err(err(format!("unsupported checkpoint version {version}")));
    }
    let flags = r.u16()?;
    let lambda = r.f64()?;
    let cfg_len = r.u32()? as usize;
    let cfg = ModelConfig::from_kv(r.str(cfg_len)?)?;
    let mut model = Model::new(&cfg, 0, lambda)?;
    let count = r.u32()? as usize;
    if count != model.store.len() {
        return Err(err(format!(
            "checkpoint holds {count} tensors, configuration expects {}",
            model.store.len()
        )));
    }
    let mut seen = vec![false; count];
    for _ in 0..count {
        let nlen = r.u16()? as usize;
        let name = r.str(nlen)?.to_string();
        let id = model
            .store
            .find(&name)
            .ok_or_else(|| err(format!("unknown parameter {name}")))?;
        if std::mem::replace(&mut seen[id.index()], true) {
            return Err(err(format!("duplicate parameter {name}")));
        }
        let rank = r.u8()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32()? as usize);
        }
        if shape != model.store.get(id).shape() {
            return Err(err(format!(
                "{name}: stored shape {shape:?}, expected {:?}",
                model.store.get(id).shape()
            )));
        }
        let n: usize = shape.iter().product();
        let raw = r.take(4 * n)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        *model.store.get_mut(id) = Tensor::new(&shape, data);
    }
    if r.pos != body.len() {
        return Err(err("trailing bytes after the last tensor"));
    }
    if flags & FLAG_FINALIZED != 0 {
        model.finalize();
    }
    Ok(model)
}

pub fn save_checkpoint(model: &Model, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode_checkpoint(model))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Model> {
    decode_checkpoint(&std::fs::read(path)?)
}
