use std::path::Path;

use serde::{Deserialize, Serialize};

use super::arch::{build_discriminator, build_generator, build_ynet1, DiscriminatorConfig, GeneratorConfig};
use super::loss::LossWeights;
use super::train::TrainConfig;
use crate::dataset::Batch;
use crate::error::{Error, Result};
use crate::metrics::Reconstructor;
use crate::nn::checkpoint::{export_network, import_network, read_checkpoint, write_checkpoint};
use crate::nn::{Network, Tensor};
use crate::optics::derive_seed;

const G_PREFIX: &str = "g.";
const D_PREFIX: &str = "d.";
pub(crate) const G_INIT_STREAM: u64 = 10;
pub(crate) const D_INIT_STREAM: u64 = 11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Y-Net generator trained against a patch discriminator.
    Ygan,
    /// Same generator, reconstruction loss only.
    Ynet,
    /// Stride-1 convolutions with max pooling, reconstruction loss only.
    Ynet1,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Ygan => "ygan",
            Self::Ynet => "ynet",
            Self::Ynet1 => "ynet1",
        }
    }

    pub fn adversarial(self) -> bool {
        self == Self::Ygan
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ygan" => Ok(Self::Ygan),
            "ynet" => Ok(Self::Ynet),
            "ynet1" => Ok(Self::Ynet1),
            _ => Err(Error::invalid(format!("unknown model {s:?}"))),
        }
    }
}

/// Everything needed to rebuild and retrain a model; stored in checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub model: ModelKind,
    pub generator: GeneratorConfig,
    #[serde(default)]
    pub discriminator: Option<DiscriminatorConfig>,
    pub loss: LossWeights,
    pub train: TrainConfig,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        self.loss.validate()?;
        self.train.validate()?;
        match (&self.discriminator, self.model.adversarial()) {
            (Some(d), true) => {
                d.validate()?;
                if d.input_side != self.generator.input_side {
                    return Err(Error::config("/discriminator/input_side", "must equal generator input_side"));
                }
            }
            (None, true) => return Err(Error::config("/discriminator", "ygan needs a discriminator")),
            (Some(_), false) => return Err(Error::config("/discriminator", "only ygan uses a discriminator")),
            (None, false) => {}
        }
        Ok(())
    }
}

/// Generator (and discriminator for YGAN) in training precision.
#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub generator: Network<f32>,
    pub discriminator: Option<Network<f32>>,
}

impl Model {
    /// Freshly initialized networks seeded from `config.train.seed`.
    pub fn new(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let seed = config.train.seed;
        let graph = match config.model {
            ModelKind::Ynet1 => build_ynet1(&config.generator)?,
            ModelKind::Ygan | ModelKind::Ynet => build_generator(&config.generator)?,
        };
        let generator = Network::new(graph, derive_seed(seed, G_INIT_STREAM));
        let discriminator = match &config.discriminator {
            Some(d) => Some(Network::new(build_discriminator(d)?, derive_seed(seed, D_INIT_STREAM))),
            None => None,
        };
        Ok(Self {
            config: config.clone(),
            generator,
            discriminator,
        })
    }

    pub fn side(&self) -> usize {
        self.config.generator.input_side
    }

    pub fn save(&self, dir: &Path, step: u64) -> Result<()> {
        let mut tensors = export_network(G_PREFIX, &self.generator);
        if let Some(d) = &self.discriminator {
            tensors.extend(export_network(D_PREFIX, d));
        }
        write_checkpoint(dir, step, serde_json::to_value(&self.config)?, &tensors)
    }

    /// Loads a checkpoint; returns the model and its step counter.
    pub fn load(dir: &Path) -> Result<(Self, u64)> {
        let (meta, tensors) = read_checkpoint(dir)?;
        let config: ModelConfig = crate::json::parse_json(&meta.config.to_string())?;
        let mut model = Self::new(&config)?;
        import_network(G_PREFIX, &mut model.generator, &tensors)?;
        if let Some(d) = &mut model.discriminator {
            import_network(D_PREFIX, d, &tensors)?;
        }
        Ok((model, meta.step))
    }

    /// Eval-mode reconstruction of a batch of speckles `[B, S, S, 1]`.
    pub fn reconstruct_tensor(&self, x: &Tensor<f32>) -> Result<[Tensor<f32>; 2]> {
        if x.height() != self.side() || x.width() != self.side() {
            return Err(Error::contract(
                "reconstruct",
                format!("speckle is {}x{}, model expects side {}", x.height(), x.width(), self.side()),
            ));
        }
        let mut out = self.generator.infer(&[x])?;
        let o2 = out.pop().expect("two heads");
        Ok([out.pop().expect("two heads"), o2])
    }
}

impl Reconstructor for Model {
    fn reconstruct(&self, batch: &Batch) -> Result<[Tensor<f32>; 2]> {
        self.reconstruct_tensor(&batch.x)
    }
}
