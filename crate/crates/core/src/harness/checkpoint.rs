//! Binary model checkpoints.
//!
//! Layout (all integers little-endian `u32`): magic `MFPU`, version,
//! architecture tag (length-prefixed UTF-8), N, B, d, parameter count, then per
//! parameter its length-prefixed name, rank, extents and `f32` values.

use std::fs;
use std::path::Path;

use crate::arch::{Architecture, Model, ModelConfig};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MFPU";
pub const VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len());
    out.extend_from_slice(s.as_bytes());
}

pub fn to_bytes(model: &Model<f32>) -> Vec<u8> {
    let cfg = model.config();
    let mut out = Vec::with_capacity(64 + 4 * model.param_count());
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION as usize);
    put_str(&mut out, cfg.arch.tag());
    put_u32(&mut out, cfg.input_extent);
    put_u32(&mut out, cfg.base_width);
    put_u32(&mut out, cfg.dilation);
    put_u32(&mut out, model.params.len());
    for (_, p) in model.params.iter() {
        put_str(&mut out, &p.name);
        put_u32(&mut out, p.tensor.shape().len());
        for &e in p.tensor.shape() {
            put_u32(&mut out, e);
        }
        for v in p.tensor.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn err(&self, msg: String) -> Error {
        Error::format(self.path, format!("byte {}: {msg}", self.pos))
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let left = self.bytes.len() - self.pos;
        if left < n {
            return Err(self.err(format!(
                "truncated {what}: expected {n} bytes, found {left}"
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let n = self.u32(what)?;
        let b = self.take(n, what)?;
        String::from_utf8(b.to_vec()).map_err(|_| self.err(format!("{what} is not UTF-8")))
    }
}

/// Parses a checkpoint and validates it against a freshly built model of the
/// recorded architecture and configuration.
pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Model<f32>> {
    let mut r = Reader { bytes, pos: 0, path };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::format(path, "bad magic: not a model checkpoint"));
    }
    let version = r.u32("version")?;
    if version != VERSION as usize {
        return Err(r.err(format!("unsupported version {version}, expected {VERSION}")));
    }
    let tag = r.string("architecture tag")?;
    let arch: Architecture = tag
        .parse()
        .map_err(|_| r.err(format!("unknown architecture tag {tag:?}")))?;
    let (n, b, d) = (r.u32("N")?, r.u32("B")?, r.u32("d")?);
    let config = ModelConfig::new(arch, n, b, d);
    config
        .validate()
        .map_err(|e| r.err(format!("invalid configuration: {e}")))?;
    let mut model = Model::<f32>::build(config, 0)?;
    let count = r.u32("parameter count")?;
    if count != model.params.len() {
        return Err(r.err(format!(
            "{arch} with N={n}, B={b}, d={d} has {} parameters, file has {count}",
            model.params.len()
        )));
    }
    for p in model.params.iter_mut() {
        let name = r.string("parameter name")?;
        if name != p.name {
            return Err(r.err(format!("expected parameter {:?}, found {name:?}", p.name)));
        }
        let rank = r.u32("rank")?;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32("extent")?);
        }
        if shape != p.tensor.shape() {
            return Err(r.err(format!(
                "shape mismatch for {name}: model {:?}, file {shape:?}",
                p.tensor.shape()
            )));
        }
        let raw = r.take(4 * p.tensor.len(), &format!("values of {name}"))?;
        for (dst, chunk) in p.tensor.data_mut().iter_mut().zip(raw.chunks_exact(4)) {
            *dst = f32::from_le_bytes(chunk.try_into().expect("4 bytes"));
        }
    }
    if r.pos != bytes.len() {
        return Err(r.err(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(model)
}

pub fn write(model: &Model<f32>, path: &Path) -> Result<()> {
    fs::write(path, to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn read(path: &Path) -> Result<Model<f32>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes, path)
}

/// Reads a checkpoint that must hold the given architecture.
pub fn read_expecting(path: &Path, arch: Architecture) -> Result<Model<f32>> {
    let model = read(path)?;
    if model.arch() != arch {
        return Err(Error::format(
            path,
            format!("architecture tag mismatch: expected {arch}, file holds {}", model.arch()),
        ));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::build_unet;

    #[test]
    fn round_trip_is_exact() {
        let m = build_unet::<f32>(16, 2, 3).unwrap();
        let bytes = to_bytes(&m);
        let back = from_bytes(&bytes, Path::new("mem")).unwrap();
        assert_eq!(to_bytes(&back), bytes);
        for ((_, a), (_, b)) in m.params.iter().zip(back.params.iter()) {
            let bits = |t: &[f32]| t.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(a.tensor.data()), bits(b.tensor.data()));
        }
    }

    #[test]
    fn truncation_names_byte_counts() {
        let bytes = to_bytes(&build_unet::<f32>(16, 2, 3).unwrap());
        let err = from_bytes(&bytes[..bytes.len() - 10], Path::new("x.ckpt")).unwrap_err();
        let msg = err.to_string();
        assert_eq!(err.exit_code(), 3);
        assert!(msg.contains("expected") && msg.contains("found"), "{msg}");
    }

    #[test]
    fn bad_magic_and_version() {
        assert!(from_bytes(b"NOPE\x01\0\0\0", Path::new("x")).is_err());
        let mut bytes = to_bytes(&build_unet::<f32>(16, 2, 3).unwrap());
        bytes[4] = 9;
        assert!(from_bytes(&bytes, Path::new("x")).unwrap_err().to_string().contains("version"));
    }

    #[test]
    fn architecture_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("u.ckpt");
        write(&build_unet::<f32>(16, 2, 3).unwrap(), &p).unwrap();
        let err = read_expecting(&p, Architecture::MfpUnet).unwrap_err();
        assert!(err.to_string().contains("architecture tag"));
    }
}
