//! Binary (P5) PGM with maxval 255.

use std::fs;
use std::path::Path;

use crate::data::image::GrayImage;
use crate::error::{Error, Result};

pub fn encode(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    out
}

/// Parses a P5 byte stream. `origin` names the source in error messages.
pub fn decode(bytes: &[u8], origin: &Path) -> Result<GrayImage> {
    let fail = |offset: usize, msg: String| Error::format(origin, format!("byte {offset}: {msg}"));
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        let found = String::from_utf8_lossy(&bytes[..bytes.len().min(2)]).into_owned();
        return Err(fail(0, format!("expected magic \"P5\", found {found:?}")));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for (k, field) in fields.iter_mut().enumerate() {
        // whitespace and comments before each header field
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            let name = ["width", "height", "maxval"][k];
            return Err(fail(start, format!("expected ASCII {name}")));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .expect("digits are ASCII")
            .parse()
            .map_err(|_| fail(start, "header number out of range".into()))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(fail(pos, format!("unsupported maxval {maxval}, expected 255")));
    }
    if width == 0 || height == 0 {
        return Err(fail(pos, format!("empty raster {width}×{height}")));
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(fail(pos, "expected a single whitespace byte after maxval".into())),
    }
    let need = width * height;
    let have = bytes.len() - pos;
    if have < need {
        return Err(fail(
            pos,
            format!("truncated raster: expected {need} bytes, found {have}"),
        ));
    }
    GrayImage::new(width, height, bytes[pos..pos + need].to_vec())
}

pub fn read(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

pub fn write(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(img)).map_err(|e| Error::io(path, e))
}
