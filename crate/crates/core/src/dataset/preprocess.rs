use super::{ObjectImage, ObjectKind};
use crate::error::{Error, Result};
use crate::image::Image;

/// Bilinear resize with half-pixel centers and edge clamping.
pub fn resize_bilinear(img: &Image, target: usize) -> Image {
    let src = img.side();
    if src == target {
        return img.clone();
    }
    let scale = src as f64 / target as f64;
    let coord = |i: usize| {
        let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
        let lo = s.floor() as usize;
        let hi = (lo + 1).min(src - 1);
        (lo, hi, s - lo as f64)
    };
    let mut out = Image::filled(target, 0.0);
    for r in 0..target {
        let (r0, r1, fr) = coord(r);
        for c in 0..target {
            let (c0, c1, fc) = coord(c);
            let top = img.get(r0, c0) as f64 * (1.0 - fc) + img.get(r0, c1) as f64 * fc;
            let bottom = img.get(r1, c0) as f64 * (1.0 - fc) + img.get(r1, c1) as f64 * fc;
            out.set(r, c, (top * (1.0 - fr) + bottom * fr) as f32);
        }
    }
    out
}

/// Resizes to `target_side` and optionally thresholds at 0.5.
pub fn preprocess(img: &ObjectImage, target_side: usize, binarize: bool) -> Result<ObjectImage> {
    if target_side == 0 || !target_side.is_power_of_two() {
        return Err(Error::invalid(format!("target side {target_side} is not a power of two")));
    }
    let mut image = resize_bilinear(&img.image, target_side);
    for p in image.pixels_mut() {
        *p = if binarize {
            if *p >= 0.5 {
                1.0
            } else {
                0.0
            }
        } else {
            p.clamp(0.0, 1.0)
        };
    }
    let kind = if binarize { ObjectKind::Binary } else { img.kind };
    Ok(ObjectImage { image, kind })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obj(image: Image) -> ObjectImage {
        ObjectImage {
            image,
            kind: ObjectKind::Grayscale,
        }
    }

    #[test]
    fn identity_resize() {
        let mut img = Image::filled(16, 0.25);
        img.set(3, 4, 0.9);
        let out = preprocess(&obj(img.clone()), 16, false).unwrap();
        assert_eq!(out.image, img);
    }

    #[test]
    fn binarize_thresholds_at_half() {
        let out = preprocess(&obj(Image::filled(8, 0.6)), 8, true).unwrap();
        assert!(out.image.pixels().iter().all(|&p| p == 1.0));
        assert_eq!(out.kind, ObjectKind::Binary);
    }

    #[test]
    fn checkerboard_downsample_averages() {
        let mut img = Image::filled(64, 0.0);
        for r in 0..64 {
            for c in 0..64 {
                img.set(r, c, ((r + c) % 2) as f32);
            }
        }
        let out = preprocess(&obj(img), 32, false).unwrap();
        assert!(out.image.pixels().iter().all(|&p| (p - 0.5).abs() < 1e-6));
    }

    #[test]
    fn rejects_bad_side() {
        assert!(preprocess(&obj(Image::filled(8, 0.0)), 12, false).is_err());
    }
}
