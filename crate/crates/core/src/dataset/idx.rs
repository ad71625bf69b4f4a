//! IDX container reader (the MNIST family format): big-endian header,
//! magic `0x00000803` for a 3-D unsigned-byte tensor.

use std::path::Path;

use super::{ObjectImage, ObjectKind};
use crate::error::{Error, Result};
use crate::image::Image;

pub const IDX_U8_3D: u32 = 0x0000_0803;

/// Images as stored (rows x cols, possibly non-square) scaled to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<Vec<f32>>,
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    let word = |i: usize| -> Result<u32> {
        let off = 4 * i;
        bytes
            .get(off..off + 4)
            .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
            .ok_or(Error::Format {
                offset: bytes.len() as u64,
                message: "truncated IDX header".into(),
            })
    };
    let magic = word(0)?;
    if magic != IDX_U8_3D {
        return Err(Error::Format {
            offset: 0,
            message: format!("bad IDX magic {magic:#010x}, expected {IDX_U8_3D:#010x}"),
        });
    }
    let (count, rows, cols) = (word(1)? as usize, word(2)? as usize, word(3)? as usize);
    let per = rows * cols;
    let need = 16 + count * per;
    if bytes.len() < need {
        return Err(Error::Format {
            offset: bytes.len() as u64,
            message: format!("truncated IDX payload: {count} images of {rows}x{cols} need {need} bytes"),
        });
    }
    let pixels = bytes[16..need]
        .chunks_exact(per.max(1))
        .take(count)
        .map(|img| img.iter().map(|&b| b as f32 / 255.0).collect())
        .collect();
    Ok(IdxImages { rows, cols, pixels })
}

/// Loads square IDX images as grayscale objects.
pub fn load_idx_images(path: &Path) -> Result<Vec<ObjectImage>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let parsed = parse_idx_images(&bytes)?;
    if parsed.rows != parsed.cols {
        return Err(Error::Format {
            offset: 8,
            message: format!("non-square IDX images {}x{}", parsed.rows, parsed.cols),
        });
    }
    parsed
        .pixels
        .into_iter()
        .map(|p| {
            Ok(ObjectImage {
                image: Image::new(parsed.rows, p)?,
                kind: ObjectKind::Grayscale,
            })
        })
        .collect()
}

/// Serializes images into an IDX byte stream (used to build fixtures).
pub fn encode_idx_images(side: usize, images: &[Vec<u8>]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.len() * side * side);
    for w in [IDX_U8_3D, images.len() as u32, side as u32, side as u32] {
        out.extend_from_slice(&w.to_be_bytes());
    }
    for img in images {
        out.extend_from_slice(img);
    }
    out
}
