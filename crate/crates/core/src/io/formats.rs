//! Binary tensor ("SEDT") and mesh-sequence ("SEDM") files.
//!
//! Both are little-endian with an f32 payload. Writing rejects values that do
//! not fit in f32; reading rejects truncated, oversized or non-finite data.

use std::io::Write;
use std::path::Path;

use crate::animator::VertexSequence;
use crate::error::{Error, Result};
use crate::numeric::Tensor;

pub const TENSOR_MAGIC: [u8; 4] = *b"SEDT";
pub const MESH_MAGIC: [u8; 4] = *b"SEDM";
pub const BINARY_VERSION: u32 = 1;

/// Writes to a sibling temp file and renames it into place, so readers never
/// see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::file(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::file(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| Error::file(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::file(path, e.error))?;
    Ok(())
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::file(path, e))
}

fn to_f32(v: f64, path: &Path) -> Result<f32> {
    let f = v as f32;
    if !f.is_finite() {
        return Err(Error::format(path, format!("value {v} does not fit in f32")));
    }
    Ok(f)
}

/// Cursor over a byte buffer that reports truncation as a format error.
struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::format(self.path, format!("truncated: needed {n} bytes at offset {}", self.pos))
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn header(&mut self, magic: [u8; 4]) -> Result<()> {
        let m = self.take(4)?;
        if m != magic {
            return Err(Error::format(
                self.path,
                format!("bad magic {:?}, expected {:?}", String::from_utf8_lossy(m), String::from_utf8_lossy(&magic)),
            ));
        }
        let v = self.u32()?;
        if v != BINARY_VERSION {
            return Err(Error::format(self.path, format!("unsupported version {v}")));
        }
        Ok(())
    }

    fn payload(&mut self, count: usize) -> Result<Vec<f64>> {
        let bytes = self.take(count.checked_mul(4).ok_or_else(|| Error::format(self.path, "size overflow"))?)?;
        let data: Vec<f64> = bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64).collect();
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::format(self.path, format!("non-finite value at element {i}")));
        }
        Ok(data)
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::format(self.path, format!("{} trailing bytes", self.bytes.len() - self.pos)));
        }
        Ok(())
    }
}

pub fn encode_tensor(t: &Tensor, path: &Path) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(12 + 4 * t.shape().len() + 4 * t.len());
    out.extend_from_slice(&TENSOR_MAGIC);
    out.extend_from_slice(&BINARY_VERSION.to_le_bytes());
    out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
    for &d in t.shape() {
        let d = u32::try_from(d).map_err(|_| Error::format(path, format!("dimension {d} exceeds u32")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    for &v in t.data() {
        out.extend_from_slice(&to_f32(v, path)?.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_tensor(bytes: &[u8], path: &Path) -> Result<Tensor> {
    let mut r = Reader { bytes, pos: 0, path };
    r.header(TENSOR_MAGIC)?;
    let rank = r.u32()? as usize;
    if rank == 0 || rank > 8 {
        return Err(Error::format(path, format!("unsupported rank {rank}")));
    }
    let shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
    let count = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or_else(|| Error::format(path, "size overflow"))?;
    let data = r.payload(count)?;
    r.finish()?;
    Tensor::new(shape, data)
}

pub fn write_tensor_file(path: &Path, t: &Tensor) -> Result<()> {
    write_atomic(path, &encode_tensor(t, path)?)
}

pub fn read_tensor_file(path: &Path) -> Result<Tensor> {
    decode_tensor(&read_bytes(path)?, path)
}

pub fn encode_mesh(seq: &VertexSequence, path: &Path) -> Result<Vec<u8>> {
    let (t_len, n) = (seq.len(), seq.vertex_count());
    let mut out = Vec::with_capacity(20 + 12 * t_len * n);
    out.extend_from_slice(&MESH_MAGIC);
    out.extend_from_slice(&BINARY_VERSION.to_le_bytes());
    for d in [t_len, n] {
        let d = u32::try_from(d).map_err(|_| Error::format(path, format!("size {d} exceeds u32")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    out.extend_from_slice(&to_f32(seq.fps, path)?.to_le_bytes());
    for &v in seq.frames.data() {
        out.extend_from_slice(&to_f32(v, path)?.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_mesh(bytes: &[u8], path: &Path) -> Result<VertexSequence> {
    let mut r = Reader { bytes, pos: 0, path };
    r.header(MESH_MAGIC)?;
    let t_len = r.u32()? as usize;
    let n = r.u32()? as usize;
    let fps = r.f32()? as f64;
    if !(fps > 0.0 && fps.is_finite()) {
        return Err(Error::format(path, format!("invalid fps {fps}")));
    }
    let count = t_len.checked_mul(n).and_then(|x| x.checked_mul(3)).ok_or_else(|| Error::format(path, "size overflow"))?;
    let data = r.payload(count)?;
    r.finish()?;
    VertexSequence::new(fps, Tensor::new(vec![t_len, n, 3], data)?)
}

pub fn write_mesh_file(path: &Path, seq: &VertexSequence) -> Result<()> {
    write_atomic(path, &encode_mesh(seq, path)?)
}

pub fn read_mesh_file(path: &Path) -> Result<VertexSequence> {
    decode_mesh(&read_bytes(path)?, path)
}
