//! Object sourcing, preprocessing, speckle synthesis, and the on-disk
//! dataset format.

mod idx;
mod preprocess;
mod synth;

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use idx::{encode_idx_images, load_idx_images, parse_idx_images, IdxImages, IDX_U8_3D};
pub use preprocess::{preprocess, resize_bilinear};
pub use synth::{gen_synthetic_objects, SyntheticKind};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::nn::checkpoint::{read_f32_file, write_f32_file};
use crate::nn::Tensor;
use crate::optics::{derive_seed, Bench, BenchConfig, ScreenParams, SpecklePattern};

pub const DATASET_FORMAT_VERSION: u32 = 1;
pub const SPECKLE_NORMALIZATION: &str = "per_sample_max";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectKind {
    Binary,
    Grayscale,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectImage {
    pub image: Image,
    pub kind: ObjectKind,
}

impl ObjectImage {
    pub fn new(image: Image, kind: ObjectKind) -> Result<Self> {
        if !image.side().is_power_of_two() {
            return Err(Error::invalid(format!("object side {} is not a power of two", image.side())));
        }
        if !image.in_unit_range() {
            return Err(Error::invalid("object pixels must lie in [0, 1]"));
        }
        if kind == ObjectKind::Binary && !image.is_binary() {
            return Err(Error::invalid("binary object has pixels outside {0, 1}"));
        }
        Ok(Self { image, kind })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectPair {
    pub obj1: ObjectImage,
    pub obj2: ObjectImage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub speckle: SpecklePattern,
    pub y1: ObjectImage,
    pub y2: ObjectImage,
    pub sample_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    A,
    B1,
    B2,
    C,
}

impl Group {
    pub fn binary(self) -> bool {
        matches!(self, Group::A | Group::C)
    }
}

impl std::str::FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim_start_matches("group").to_ascii_uppercase().as_str() {
            "A" => Ok(Group::A),
            "B1" => Ok(Group::B1),
            "B2" => Ok(Group::B2),
            "C" => Ok(Group::C),
            _ => Err(Error::invalid(format!("unknown group {s:?}"))),
        }
    }
}

/// Where one object family comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    Synthetic {
        kind: SyntheticKind,
        seed: u64,
    },
    Idx {
        path: PathBuf,
        #[serde(default)]
        offset: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sources {
    pub obj1: SourceSpec,
    pub obj2: SourceSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub group: Group,
    pub n_total: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub image_side: usize,
    pub bench: BenchConfig,
    pub sources: Sources,
    pub binarize: bool,
    pub shuffle_seed: u64,
    #[serde(default = "default_normalization")]
    pub speckle_normalization: String,
}

fn default_normalization() -> String {
    SPECKLE_NORMALIZATION.to_string()
}

/// 9:1 train/test split of `n_total`.
pub fn split_counts(n_total: usize) -> (usize, usize) {
    let n_train = n_total * 9 / 10;
    (n_train, n_total - n_train)
}

impl DatasetManifest {
    /// Desk-scale analogue of one of the four experiment groups.
    pub fn desk(group: Group, n_total: usize, seed: u64) -> Self {
        let (n_train, n_test) = split_counts(n_total);
        let strong = |correlation_px| ScreenParams {
            correlation_px,
            strength: std::f64::consts::TAU,
        };
        let mut bench = BenchConfig {
            seed,
            ..BenchConfig::default()
        };
        let synthetic = |kind, stream| SourceSpec::Synthetic {
            kind,
            seed: derive_seed(seed, stream),
        };
        let binary_sources = Sources {
            obj1: synthetic(SyntheticKind::Digits, 101),
            obj2: synthetic(SyntheticKind::Strokes, 102),
        };
        let gray_sources = Sources {
            obj1: synthetic(SyntheticKind::Garments, 101),
            obj2: synthetic(SyntheticKind::Garments, 102),
        };
        let sources = match group {
            Group::A | Group::C => binary_sources,
            Group::B1 | Group::B2 => gray_sources,
        };
        match group {
            Group::A => bench.screen2 = strong(1),
            Group::B1 => bench.screen2 = strong(2),
            Group::B2 => {
                bench.screen2 = strong(2);
                bench.d_objects = 0.55;
            }
            Group::C => {
                bench.screen2 = strong(1);
                bench.screen1 = Some(strong(2));
            }
        }
        Self {
            format_version: DATASET_FORMAT_VERSION,
            group,
            n_total,
            n_train,
            n_test,
            image_side: bench.image_side,
            bench,
            sources,
            binarize: group.binary(),
            shuffle_seed: derive_seed(seed, 103),
            speckle_normalization: default_normalization(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != DATASET_FORMAT_VERSION {
            return Err(Error::config("/format_version", format!("unsupported version {}", self.format_version)));
        }
        if self.n_total == 0 {
            return Err(Error::config("/n_total", "must be >= 1"));
        }
        if self.n_train + self.n_test != self.n_total {
            return Err(Error::config(
                "/n_train",
                format!("n_train + n_test = {} differs from n_total = {}", self.n_train + self.n_test, self.n_total),
            ));
        }
        if self.n_train == 0 {
            return Err(Error::config("/n_train", "must be >= 1"));
        }
        if self.image_side != self.bench.image_side {
            return Err(Error::config("/image_side", "must equal bench.image_side"));
        }
        self.bench.validate()?;
        if self.speckle_normalization != SPECKLE_NORMALIZATION {
            return Err(Error::config("/speckle_normalization", format!("only {SPECKLE_NORMALIZATION:?} is supported")));
        }
        match (self.group, &self.bench.screen1) {
            (Group::C, None) => return Err(Error::config("/bench/screen1", "group C requires a screen between the objects")),
            (Group::A | Group::B1 | Group::B2, Some(_)) => {
                return Err(Error::config("/bench/screen1", "only group C has a screen between the objects"))
            }
            _ => {}
        }
        if self.group.binary() && !self.binarize {
            return Err(Error::config("/binarize", "groups A and C use binary objects"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    /// Hex SHA-256 of the canonical `manifest.json` bytes.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}

fn load_source(spec: &SourceSpec, n: usize, side: usize, binarize: bool) -> Result<Vec<ObjectImage>> {
    match spec {
        SourceSpec::Synthetic { kind, seed } => {
            let raw = gen_synthetic_objects(*kind, n, side, *seed)?;
            raw.into_iter().map(|o| preprocess(&o, side, binarize)).collect()
        }
        SourceSpec::Idx { path, offset } => {
            let all = load_idx_images(path)?;
            if all.len() < offset + n {
                return Err(Error::invalid(format!(
                    "source {} holds {} images but {} are needed from offset {offset}",
                    path.display(),
                    all.len(),
                    n
                )));
            }
            all[*offset..offset + n].par_iter().map(|o| preprocess(o, side, binarize)).collect()
        }
    }
}

/// Simulates one sample through a prepared bench.
pub fn make_sample(bench: &Bench, pair: &ObjectPair, sample_seed: u64) -> Result<SampleRecord> {
    let speckle = bench.synthesize(&pair.obj1.image, &pair.obj2.image, sample_seed)?;
    Ok(SampleRecord {
        speckle,
        y1: pair.obj1.clone(),
        y2: pair.obj2.clone(),
        sample_seed,
    })
}

/// Train/test index sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn shuffled(n_total: usize, n_train: usize, seed: u64) -> Self {
        let mut order: Vec<usize> = (0..n_total).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let test = order.split_off(n_train);
        Self { train: order, test }
    }

    fn validate(&self, n_total: usize, n_train: usize) -> Result<()> {
        let seen: HashSet<usize> = self.train.iter().chain(&self.test).copied().collect();
        if self.train.len() != n_train
            || self.train.len() + self.test.len() != n_total
            || seen.len() != n_total
            || seen.iter().any(|&i| i >= n_total)
        {
            return Err(Error::invalid("split.json does not partition 0..n_total"));
        }
        Ok(())
    }
}

/// Network-ready tensors for a set of sample indices.
pub struct Batch {
    pub x: Tensor<f32>,
    pub y1: Tensor<f32>,
    pub y2: Tensor<f32>,
}

/// A persisted or freshly built dataset held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    manifest: DatasetManifest,
    speckles: Vec<f32>,
    obj1: Vec<f32>,
    obj2: Vec<f32>,
    split: Split,
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SPLIT_FILE: &str = "split.json";
const ARRAYS: [&str; 3] = ["speckles.bin", "obj1.bin", "obj2.bin"];

impl Dataset {
    /// Synthesizes every sample described by the manifest (in memory).
    pub fn synthesize(manifest: &DatasetManifest) -> Result<Self> {
        manifest.validate()?;
        let (n, side) = (manifest.n_total, manifest.image_side);
        let obj1 = load_source(&manifest.sources.obj1, n, side, manifest.binarize)?;
        let obj2 = load_source(&manifest.sources.obj2, n, side, manifest.binarize)?;
        let bench = Bench::new(&manifest.bench)?;
        let speckles: Vec<Image> = (0..n)
            .into_par_iter()
            .map(|i| {
                bench
                    .synthesize(&obj1[i].image, &obj2[i].image, derive_seed(manifest.bench.seed, i as u64))?
                    .normalized()
            })
            .collect::<Result<_>>()?;
        let flatten = |imgs: Vec<Image>| imgs.into_iter().flat_map(Image::into_pixels).collect::<Vec<f32>>();
        Ok(Self {
            manifest: manifest.clone(),
            speckles: flatten(speckles),
            obj1: flatten(obj1.into_iter().map(|o| o.image).collect()),
            obj2: flatten(obj2.into_iter().map(|o| o.image).collect()),
            split: Split::shuffled(n, manifest.n_train, manifest.shuffle_seed),
        })
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let manifest_path = dir.join(MANIFEST_FILE);
        std::fs::write(&manifest_path, self.manifest.to_json()).map_err(|e| Error::io(&manifest_path, e))?;
        for (name, data) in ARRAYS.iter().zip([&self.speckles, &self.obj1, &self.obj2]) {
            write_f32_file(&dir.join(name), data)?;
        }
        let split_path = dir.join(SPLIT_FILE);
        let text = serde_json::to_string(&self.split)? + "\n";
        std::fs::write(&split_path, text).map_err(|e| Error::io(&split_path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: DatasetManifest = crate::json::read_json(&dir.join(MANIFEST_FILE))?;
        manifest.validate()?;
        let expected = manifest.n_total * manifest.image_side * manifest.image_side;
        let mut arrays = Vec::with_capacity(3);
        for name in ARRAYS {
            let path = dir.join(name);
            let data = read_f32_file(&path)?;
            if data.len() != expected {
                return Err(Error::Format {
                    offset: (data.len() * 4) as u64,
                    message: format!("{} holds {} floats, manifest implies {expected}", path.display(), data.len()),
                });
            }
            arrays.push(data);
        }
        let split: Split = crate::json::read_json(&dir.join(SPLIT_FILE))?;
        split.validate(manifest.n_total, manifest.n_train)?;
        let obj2 = arrays.pop().unwrap();
        let obj1 = arrays.pop().unwrap();
        let speckles = arrays.pop().unwrap();
        Ok(Self {
            manifest,
            speckles,
            obj1,
            obj2,
            split,
        })
    }

    pub fn manifest(&self) -> &DatasetManifest {
        &self.manifest
    }

    pub fn side(&self) -> usize {
        self.manifest.image_side
    }

    pub fn len(&self) -> usize {
        self.manifest.n_total
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn split(&self) -> &Split {
        &self.split
    }

    pub fn train_indices(&self) -> &[usize] {
        &self.split.train
    }

    pub fn test_indices(&self) -> &[usize] {
        &self.split.test
    }

    pub fn hash(&self) -> String {
        self.manifest.hash()
    }

    fn plane(data: &[f32], side: usize, i: usize) -> &[f32] {
        &data[i * side * side..(i + 1) * side * side]
    }

    pub fn speckle(&self, i: usize) -> &[f32] {
        Self::plane(&self.speckles, self.side(), i)
    }

    pub fn obj1(&self, i: usize) -> &[f32] {
        Self::plane(&self.obj1, self.side(), i)
    }

    pub fn obj2(&self, i: usize) -> &[f32] {
        Self::plane(&self.obj2, self.side(), i)
    }

    pub fn image(&self, which: usize, i: usize) -> Image {
        let px = match which {
            0 => self.speckle(i),
            1 => self.obj1(i),
            _ => self.obj2(i),
        };
        Image::new(self.side(), px.to_vec()).expect("stored planes are square")
    }

    pub fn batch(&self, indices: &[usize]) -> Batch {
        let side = self.side();
        let gather = |data: &[f32]| {
            let out: Vec<f32> = indices.iter().flat_map(|&i| Self::plane(data, side, i).iter().copied()).collect();
            Tensor::from_vec([indices.len(), side, side, 1], out).expect("gathered planes match shape")
        };
        Batch {
            x: gather(&self.speckles),
            y1: gather(&self.obj1),
            y2: gather(&self.obj2),
        }
    }

    /// Keeps only the first `n` samples of each split (for quick runs).
    pub fn truncated(mut self, n_train: usize, n_test: usize) -> Self {
        self.split.train.truncate(n_train);
        self.split.test.truncate(n_test);
        self
    }
}

/// Builds the dataset and persists it under `out_dir`.
pub fn build_dataset(manifest: &DatasetManifest, out_dir: &Path) -> Result<Dataset> {
    let ds = Dataset::synthesize(manifest)?;
    ds.save(out_dir)?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(group: Group) -> DatasetManifest {
        let mut m = DatasetManifest::desk(group, 10, 5);
        m.image_side = 32;
        m.bench.image_side = 32;
        m
    }

    #[test]
    fn nine_to_one_split() {
        assert_eq!(split_counts(10), (9, 1));
        assert_eq!(split_counts(2048), (1843, 205));
        let m = small(Group::A);
        assert_eq!((m.n_train, m.n_test), (9, 1));
    }

    #[test]
    fn split_sum_checked() {
        let mut m = small(Group::A);
        m.n_test = 3;
        assert!(matches!(m.validate(), Err(Error::Config { pointer, .. }) if pointer == "/n_train"));
    }

    #[test]
    fn records_satisfy_invariants() {
        let ds = Dataset::synthesize(&small(Group::A)).unwrap();
        for i in 0..ds.len() {
            let s = ds.speckle(i);
            assert!(s.iter().all(|&v| (0.0..=1.0).contains(&v)));
            assert_eq!(s.iter().copied().fold(0.0f32, f32::max), 1.0);
            assert!(ds.obj1(i).iter().chain(ds.obj2(i)).all(|&v| v == 0.0 || v == 1.0));
        }
        let mut all: Vec<usize> = ds.train_indices().iter().chain(ds.test_indices()).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn screen1_echoed_in_manifest() {
        let c: serde_json::Value = serde_json::from_str(&small(Group::C).to_json()).unwrap();
        assert!(c["bench"]["screen1"].is_object());
        let a: serde_json::Value = serde_json::from_str(&small(Group::A).to_json()).unwrap();
        assert!(a["bench"]["screen1"].is_null());
    }

    #[test]
    fn b2_is_farther() {
        assert_eq!(DatasetManifest::desk(Group::B2, 10, 0).bench.d_objects, 0.55);
        assert_eq!(DatasetManifest::desk(Group::B1, 10, 0).bench.d_objects, 0.45);
    }

    #[test]
    fn idx_source_exhaustion() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("few.idx");
        std::fs::write(&path, encode_idx_images(8, &vec![vec![0; 64]; 3])).unwrap();
        let mut m = small(Group::B1);
        m.sources.obj1 = SourceSpec::Idx { path, offset: 0 };
        let err = Dataset::synthesize(&m).unwrap_err();
        assert!(err.to_string().contains("holds 3 images"), "{err}");
    }
}
