//! Seeded procedural stand-ins for the digit, doodle, and garment corpora.

use std::f64::consts::{PI, TAU};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{ObjectImage, ObjectKind};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::optics::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    Digits,
    Strokes,
    Garments,
}

impl SyntheticKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Digits => "digits",
            Self::Strokes => "strokes",
            Self::Garments => "garments",
        }
    }

    pub fn object_kind(self) -> ObjectKind {
        match self {
            Self::Garments => ObjectKind::Grayscale,
            _ => ObjectKind::Binary,
        }
    }
}

impl FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "digits" => Ok(Self::Digits),
            "strokes" => Ok(Self::Strokes),
            "garments" => Ok(Self::Garments),
            other => Err(Error::invalid(format!(
                "unsupported synthetic kind {other:?} (expected digits, strokes or garments)"
            ))),
        }
    }
}

/// Generates `n` objects; object `i` depends only on `(seed, i)`, so any
/// prefix of a longer run is identical to a shorter run.
pub fn gen_synthetic_objects(kind: SyntheticKind, n: usize, side: usize, seed: u64) -> Result<Vec<ObjectImage>> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    check_side(side)?;
    Ok((0..n).map(|i| gen_one(kind, side, derive_seed(seed, i as u64))).collect())
}

pub(crate) fn check_side(side: usize) -> Result<()> {
    if side < 2 || !side.is_power_of_two() {
        return Err(Error::invalid(format!("side {side} is not a power of two")));
    }
    Ok(())
}

pub(crate) fn gen_one(kind: SyntheticKind, side: usize, seed: u64) -> ObjectImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let image = match kind {
        SyntheticKind::Digits => digit(&mut rng, side),
        SyntheticKind::Strokes => doodle(&mut rng, side),
        SyntheticKind::Garments => garment(&mut rng, side),
    };
    ObjectImage {
        image,
        kind: kind.object_kind(),
    }
}

type Pt = (f64, f64);
type Path = Vec<Pt>;

fn arc(cx: f64, cy: f64, rx: f64, ry: f64, from_deg: f64, to_deg: f64) -> Path {
    let steps = (((to_deg - from_deg).abs() / 15.0).ceil() as usize).max(2);
    (0..=steps)
        .map(|k| {
            let t = (from_deg + (to_deg - from_deg) * k as f64 / steps as f64).to_radians();
            (cx + rx * t.cos(), cy + ry * t.sin())
        })
        .collect()
}

fn line(pts: &[Pt]) -> Path {
    pts.to_vec()
}

/// Numeral skeletons in the unit square (y grows downward). Each digit has
/// two hand-drawn styles.
fn glyph(digit: u32, style: bool) -> Vec<Path> {
    match (digit, style) {
        (0, false) => vec![arc(0.5, 0.5, 0.18, 0.3, 0.0, 360.0)],
        (0, true) => vec![arc(0.5, 0.5, 0.15, 0.3, 0.0, 360.0), line(&[(0.62, 0.3), (0.38, 0.7)])],
        (1, false) => vec![line(&[(0.52, 0.2), (0.5, 0.8)])],
        (1, true) => vec![line(&[(0.4, 0.3), (0.52, 0.2), (0.52, 0.8)]), line(&[(0.4, 0.8), (0.64, 0.8)])],
        (2, false) => {
            let mut p = arc(0.5, 0.36, 0.17, 0.16, 190.0, 400.0);
            p.extend([(0.32, 0.8), (0.7, 0.8)]);
            vec![p]
        }
        (2, true) => {
            let mut p = arc(0.5, 0.35, 0.16, 0.15, 180.0, 380.0);
            p.extend([(0.36, 0.72), (0.3, 0.8), (0.5, 0.76), (0.72, 0.8)]);
            vec![p]
        }
        (3, false) => vec![arc(0.5, 0.35, 0.15, 0.15, 200.0, 450.0), arc(0.5, 0.65, 0.17, 0.15, -90.0, 160.0)],
        (3, true) => vec![line(&[(0.32, 0.2), (0.68, 0.2), (0.48, 0.45)]), arc(0.5, 0.63, 0.17, 0.17, -100.0, 160.0)],
        (4, false) => vec![line(&[(0.62, 0.8), (0.62, 0.2), (0.3, 0.62), (0.72, 0.62)])],
        (4, true) => vec![line(&[(0.38, 0.2), (0.32, 0.55), (0.72, 0.55)]), line(&[(0.62, 0.3), (0.6, 0.8)])],
        (5, false) => {
            let mut p = line(&[(0.68, 0.2), (0.36, 0.2), (0.34, 0.47)]);
            p.extend(arc(0.5, 0.63, 0.17, 0.17, -130.0, 150.0));
            vec![p]
        }
        (5, true) => vec![
            line(&[(0.36, 0.2), (0.34, 0.46)]),
            line(&[(0.36, 0.2), (0.68, 0.2)]),
            arc(0.5, 0.62, 0.18, 0.18, -150.0, 140.0),
        ],
        (6, false) => vec![line(&[(0.64, 0.2), (0.36, 0.58)]), arc(0.5, 0.64, 0.16, 0.16, 0.0, 360.0)],
        (6, true) => vec![arc(0.62, 0.55, 0.28, 0.35, 190.0, 260.0), arc(0.5, 0.65, 0.15, 0.15, 0.0, 360.0)],
        (7, false) => vec![line(&[(0.3, 0.2), (0.7, 0.2), (0.45, 0.8)])],
        (7, true) => vec![line(&[(0.3, 0.24), (0.7, 0.2), (0.5, 0.8)]), line(&[(0.44, 0.5), (0.68, 0.5)])],
        (8, false) => vec![arc(0.5, 0.35, 0.13, 0.15, 0.0, 360.0), arc(0.5, 0.66, 0.16, 0.15, 0.0, 360.0)],
        (8, true) => vec![line(&[(0.34, 0.22), (0.66, 0.78), (0.34, 0.78), (0.66, 0.22), (0.34, 0.22)])],
        (9, false) => vec![arc(0.5, 0.36, 0.15, 0.15, 0.0, 360.0), line(&[(0.65, 0.36), (0.6, 0.8)])],
        (9, true) => vec![arc(0.48, 0.36, 0.15, 0.15, 0.0, 360.0), arc(0.28, 0.36, 0.35, 0.44, 0.0, 80.0)],
        _ => unreachable!("digit out of range"),
    }
}

fn regular(n: usize, r: f64, phase: f64, step: usize) -> Path {
    (0..=n).map(|k| {
        let t = phase + TAU * (k * step) as f64 / n as f64;
        (0.5 + r * t.cos(), 0.5 + r * t.sin())
    })
    .collect()
}

const DOODLES: usize = 12;

/// Quickdraw-like categories drawn as open or closed polylines.
fn doodle_template(category: usize) -> Vec<Path> {
    match category {
        0 => vec![arc(0.5, 0.5, 0.3, 0.3, 0.0, 360.0)],
        1 => vec![line(&[(0.25, 0.25), (0.75, 0.25), (0.75, 0.75), (0.25, 0.75), (0.25, 0.25)])],
        2 => vec![line(&[(0.5, 0.2), (0.8, 0.78), (0.2, 0.78), (0.5, 0.2)])],
        3 => vec![regular(5, 0.32, -PI / 2.0, 2)],
        4 => vec![line(&[(0.25, 0.45), (0.5, 0.2), (0.75, 0.45), (0.75, 0.8), (0.25, 0.8), (0.25, 0.45), (0.75, 0.45)])],
        5 => vec![line(&[(0.2, 0.35), (0.35, 0.65), (0.5, 0.35), (0.65, 0.65), (0.8, 0.35)])],
        6 => vec![(0..30)
            .map(|k| {
                let t = 4.0 * PI * k as f64 / 29.0;
                (0.5 + 0.03 * t * t.cos(), 0.5 + 0.03 * t * t.sin())
            })
            .collect()],
        7 => vec![line(&[(0.5, 0.2), (0.5, 0.8)]), line(&[(0.2, 0.5), (0.8, 0.5)])],
        8 => vec![line(&[(0.2, 0.5), (0.8, 0.5)]), line(&[(0.6, 0.3), (0.8, 0.5), (0.6, 0.7)])],
        9 => vec![arc(0.5, 0.5, 0.3, 0.3, 0.0, 360.0), arc(0.5, 0.52, 0.16, 0.12, 20.0, 160.0)],
        10 => vec![(0..24)
            .map(|k| {
                let u = k as f64 / 23.0;
                (0.18 + 0.64 * u, 0.5 + 0.18 * (TAU * 1.5 * u).sin())
            })
            .collect()],
        11 => {
            let mut cloud = arc(0.35, 0.55, 0.14, 0.14, 90.0, 270.0);
            cloud.extend(arc(0.5, 0.42, 0.16, 0.14, 180.0, 360.0));
            cloud.extend(arc(0.66, 0.55, 0.14, 0.14, 270.0, 450.0));
            cloud.push(cloud[0]);
            vec![cloud]
        }
        _ => unreachable!("doodle category out of range"),
    }
}

struct Affine {
    m: [[f64; 2]; 2],
    t: Pt,
}

impl Affine {
    fn random(rng: &mut ChaCha8Rng, rot_sd: f64, scale: (f64, f64), shear_sd: f64, shift_sd: f64) -> Self {
        let rot: f64 = Normal::new(0.0, rot_sd).unwrap().sample(rng);
        let shear: f64 = Normal::new(0.0, shear_sd).unwrap().sample(rng);
        let s = rng.random_range(scale.0..scale.1);
        let shift = Normal::new(0.0, shift_sd).unwrap();
        let (c, si) = (rot.cos(), rot.sin());
        Self {
            m: [[s * c, s * (c * shear - si)], [s * si, s * (si * shear + c)]],
            t: (0.5 + shift.sample(rng), 0.5 + shift.sample(rng)),
        }
    }

    fn apply(&self, (x, y): Pt) -> Pt {
        let (u, v) = (x - 0.5, y - 0.5);
        (self.m[0][0] * u + self.m[0][1] * v + self.t.0, self.m[1][0] * u + self.m[1][1] * v + self.t.1)
    }
}

fn jittered(paths: Vec<Path>, affine: &Affine, rng: &mut ChaCha8Rng, jitter: f64) -> Vec<Path> {
    let noise = Normal::new(0.0, jitter).unwrap();
    paths
        .into_iter()
        .map(|p| {
            p.into_iter()
                .map(|(x, y)| affine.apply((x + noise.sample(rng), y + noise.sample(rng))))
                .collect()
        })
        .collect()
}

/// Binary raster of all pixel centers within `half_width` of any segment.
fn rasterize(paths: &[Path], half_width: f64, side: usize) -> Image {
    let mut img = Image::filled(side, 0.0);
    let hw2 = half_width * half_width;
    for path in paths {
        for seg in path.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let (dx, dy) = (b.0 - a.0, b.1 - a.1);
            let len2 = dx * dx + dy * dy;
            let lo = |u: f64| (((u - half_width) * side as f64 - 0.5).floor().max(0.0)) as usize;
            let hi = |u: f64| (((u + half_width) * side as f64 + 0.5).ceil().max(0.0) as usize).min(side);
            for r in lo(a.1.min(b.1))..hi(a.1.max(b.1)) {
                let py = (r as f64 + 0.5) / side as f64;
                for c in lo(a.0.min(b.0))..hi(a.0.max(b.0)) {
                    let px = (c as f64 + 0.5) / side as f64;
                    let t = if len2 > 0.0 {
                        (((px - a.0) * dx + (py - a.1) * dy) / len2).clamp(0.0, 1.0)
                    } else {
                        0.0
                    };
                    let (ex, ey) = (px - a.0 - t * dx, py - a.1 - t * dy);
                    if ex * ex + ey * ey < hw2 {
                        img.set(r, c, 1.0);
                    }
                }
            }
        }
    }
    img
}

fn digit(rng: &mut ChaCha8Rng, side: usize) -> Image {
    let d = rng.random_range(0..10u32);
    let style = rng.random::<bool>();
    let affine = Affine::random(rng, 0.15, (0.8, 1.1), 0.15, 0.05);
    let paths = jittered(glyph(d, style), &affine, rng, 0.01);
    let half_width = rng.random_range(0.04..0.07);
    rasterize(&paths, half_width, side)
}

fn doodle(rng: &mut ChaCha8Rng, side: usize) -> Image {
    let category = rng.random_range(0..DOODLES);
    let affine = Affine::random(rng, 0.2, (0.75, 1.1), 0.0, 0.05);
    let paths = jittered(doodle_template(category), &affine, rng, 0.015);
    let half_width = rng.random_range(0.025..0.045);
    rasterize(&paths, half_width, side)
}

enum Shape {
    Polygon(Vec<Pt>),
    Ellipse { c: Pt, r: Pt },
}

impl Shape {
    fn contains(&self, p: Pt) -> bool {
        match self {
            Shape::Ellipse { c, r } => {
                let (u, v) = ((p.0 - c.0) / r.0, (p.1 - c.1) / r.1);
                u * u + v * v <= 1.0
            }
            Shape::Polygon(pts) => {
                let mut inside = false;
                let mut j = pts.len() - 1;
                for i in 0..pts.len() {
                    let (a, b) = (pts[i], pts[j]);
                    if (a.1 > p.1) != (b.1 > p.1) && p.0 < (b.0 - a.0) * (p.1 - a.1) / (b.1 - a.1) + a.0 {
                        inside = !inside;
                    }
                    j = i;
                }
                inside
            }
        }
    }
}

const GARMENTS: usize = 6;

fn garment_template(category: usize, rng: &mut ChaCha8Rng) -> Vec<Shape> {
    let mut v = |lo: f64, hi: f64| rng.random_range(lo..hi);
    match category {
        // t-shirt
        0 => {
            let w = v(0.18, 0.24);
            vec![
                Shape::Polygon(vec![(0.5 - w, 0.25), (0.5 + w, 0.25), (0.5 + w, 0.82), (0.5 - w, 0.82)]),
                Shape::Polygon(vec![(0.5 - w, 0.25), (0.12, 0.42), (0.2, 0.52), (0.5 - w, 0.42)]),
                Shape::Polygon(vec![(0.5 + w, 0.25), (0.88, 0.42), (0.8, 0.52), (0.5 + w, 0.42)]),
            ]
        }
        // trousers
        1 => {
            let gap = v(0.02, 0.05);
            vec![
                Shape::Polygon(vec![(0.3, 0.15), (0.7, 0.15), (0.7, 0.3), (0.3, 0.3)]),
                Shape::Polygon(vec![(0.3, 0.2), (0.5 - gap, 0.2), (0.46 - gap, 0.88), (0.32, 0.88)]),
                Shape::Polygon(vec![(0.5 + gap, 0.2), (0.7, 0.2), (0.68, 0.88), (0.54 + gap, 0.88)]),
            ]
        }
        // dress
        2 => {
            let hem = v(0.28, 0.36);
            vec![
                Shape::Polygon(vec![(0.4, 0.15), (0.6, 0.15), (0.62, 0.4), (0.5 + hem, 0.85), (0.5 - hem, 0.85), (0.38, 0.4)]),
            ]
        }
        // bag
        3 => {
            let h = v(0.3, 0.4);
            vec![
                Shape::Polygon(vec![(0.22, 0.88 - h), (0.78, 0.88 - h), (0.82, 0.88), (0.18, 0.88)]),
                Shape::Ellipse { c: (0.5, 0.88 - h), r: (0.18, 0.16) },
            ]
        }
        // sneaker
        4 => {
            let top = v(0.4, 0.5);
            vec![
                Shape::Polygon(vec![(0.12, 0.62), (0.88, 0.62), (0.9, 0.72), (0.12, 0.72)]),
                Shape::Ellipse { c: (0.4, 0.62), r: (0.26, 0.62 - top) },
                Shape::Ellipse { c: (0.68, 0.64), r: (0.2, 0.1) },
            ]
        }
        // pullover
        5 => {
            let w = v(0.16, 0.22);
            vec![
                Shape::Polygon(vec![(0.5 - w, 0.2), (0.5 + w, 0.2), (0.5 + w, 0.85), (0.5 - w, 0.85)]),
                Shape::Polygon(vec![(0.5 - w, 0.2), (0.14, 0.55), (0.14, 0.85), (0.24, 0.85), (0.5 - w, 0.45)]),
                Shape::Polygon(vec![(0.5 + w, 0.2), (0.86, 0.55), (0.86, 0.85), (0.76, 0.85), (0.5 + w, 0.45)]),
            ]
        }
        _ => unreachable!("garment category out of range"),
    }
}

/// Filled silhouette with a random linear shading ramp and stripe texture,
/// softened by a small Gaussian blur.
fn garment(rng: &mut ChaCha8Rng, side: usize) -> Image {
    let category = rng.random_range(0..GARMENTS);
    let shapes = garment_template(category, rng);
    let affine = Affine::random(rng, 0.08, (0.85, 1.05), 0.05, 0.03);
    let inv = {
        let [[a, b], [c, d]] = affine.m;
        let det = a * d - b * c;
        [[d / det, -b / det], [-c / det, a / det]]
    };
    let base = rng.random_range(0.35..0.9);
    let ramp_angle = rng.random_range(0.0..TAU);
    let ramp = rng.random_range(0.1..0.35);
    let stripe_amp = if rng.random::<f64>() < 0.4 { rng.random_range(0.05..0.15) } else { 0.0 };
    let stripe_freq = rng.random_range(6.0..14.0);
    let mut raw = vec![0.0f64; side * side];
    for r in 0..side {
        for c in 0..side {
            let (px, py) = ((c as f64 + 0.5) / side as f64, (r as f64 + 0.5) / side as f64);
            let (u, v) = (px - affine.t.0, py - affine.t.1);
            let p = (inv[0][0] * u + inv[0][1] * v + 0.5, inv[1][0] * u + inv[1][1] * v + 0.5);
            if shapes.iter().any(|s| s.contains(p)) {
                let along = (p.0 - 0.5) * ramp_angle.cos() + (p.1 - 0.5) * ramp_angle.sin();
                let stripes = stripe_amp * (TAU * stripe_freq * p.1).sin();
                raw[r * side + c] = (base + ramp * along + stripes).clamp(0.05, 1.0);
            }
        }
    }
    let blurred = blur(&raw, side, 0.012 * side as f64);
    let mut img = Image::filled(side, 0.0);
    for (dst, src) in img.pixels_mut().iter_mut().zip(blurred) {
        *dst = src.clamp(0.0, 1.0) as f32;
    }
    img
}

/// Separable Gaussian blur with zero padding.
fn blur(src: &[f64], side: usize, sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let taps: Vec<f64> = (-radius..=radius).map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp()).collect();
    let norm: f64 = taps.iter().sum();
    let pass = |input: &[f64], horizontal: bool| {
        let mut out = vec![0.0; side * side];
        for r in 0..side {
            for c in 0..side {
                let mut acc = 0.0;
                for (t, w) in taps.iter().enumerate() {
                    let k = t as isize - radius;
                    let (rr, cc) = if horizontal { (r as isize, c as isize + k) } else { (r as isize + k, c as isize) };
                    if (0..side as isize).contains(&rr) && (0..side as isize).contains(&cc) {
                        acc += w * input[rr as usize * side + cc as usize];
                    }
                }
                out[r * side + c] = acc / norm;
            }
        }
        out
    };
    pass(&pass(src, true), false)
}
