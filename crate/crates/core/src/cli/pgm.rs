//! 8-bit binary PGM (P5) reading and writing.

use std::path::Path;

use crate::error::{Error, Result};

pub fn quantize(p: f32) -> u8 {
    (p.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn encode_pgm(width: usize, height: usize, pixels: &[f32]) -> Vec<u8> {
    assert_eq!(pixels.len(), width * height, "pixel count must match dimensions");
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(pixels.iter().map(|&p| quantize(p)));
    out
}

pub fn write_pgm(path: &Path, width: usize, height: usize, pixels: &[f32]) -> Result<()> {
    std::fs::write(path, encode_pgm(width, height, pixels)).map_err(|e| Error::io(path, e))
}

/// Parses a P5 image with maxval 255 into values in `[0, 1]`.
pub fn decode_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<f32>)> {
    let mut pos = 0usize;
    let mut token = |bytes: &[u8]| -> Result<String> {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => {
                    return Err(Error::Format {
                        offset: pos as u64,
                        message: "truncated PGM header".into(),
                    })
                }
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| !b.is_ascii_whitespace()) {
            pos += 1;
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let bad = |offset: usize, message: &str| Error::Format {
        offset: offset as u64,
        message: message.into(),
    };
    if token(bytes)? != "P5" {
        return Err(bad(0, "not a binary PGM (P5)"));
    }
    let mut num = |what: &str| -> Result<usize> { token(bytes)?.parse().map_err(|_| bad(0, &format!("bad PGM {what}"))) };
    let (width, height, maxval) = (num("width")?, num("height")?, num("maxval")?);
    if maxval != 255 {
        return Err(bad(0, "only 8-bit PGM (maxval 255) is supported"));
    }
    let start = pos + 1;
    let end = start + width * height;
    if bytes.len() < end {
        return Err(bad(bytes.len(), "truncated PGM payload"));
    }
    Ok((width, height, bytes[start..end].iter().map(|&b| b as f32 / 255.0).collect()))
}

pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<f32>)> {
    decode_pgm(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}

/// Places equally sized square tiles side by side.
pub fn hstack(side: usize, tiles: &[&[f32]]) -> Vec<f32> {
    let width = side * tiles.len();
    let mut out = vec![0.0; width * side];
    for (t, tile) in tiles.iter().enumerate() {
        for r in 0..side {
            out[r * width + t * side..r * width + (t + 1) * side].copy_from_slice(&tile[r * side..(r + 1) * side]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_quantized() {
        let px = [0.0, 0.5, 1.0, 0.2];
        let (w, h, back) = decode_pgm(&encode_pgm(2, 2, &px)).unwrap();
        assert_eq!((w, h), (2, 2));
        for (a, b) in px.iter().zip(back) {
            assert_eq!(quantize(*a), quantize(b));
        }
        assert_eq!(quantize(0.5), 128);
    }

    #[test]
    fn hstack_layout() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [5.0, 6.0, 7.0, 8.0];
        assert_eq!(hstack(2, &[&a, &b]), vec![1.0, 2.0, 5.0, 6.0, 3.0, 4.0, 7.0, 8.0]);
    }

    #[test]
    fn rejects_ascii_pgm() {
        assert!(decode_pgm(b"P2\n1 1\n255\n0").is_err());
    }
}
