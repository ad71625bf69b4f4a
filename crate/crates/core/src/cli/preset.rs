//! Desk-scale experiment presets for the four groups and three models.

use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetManifest, Group, SourceSpec, SyntheticKind};
use crate::error::{Error, Result};
use crate::ygan::{DiscriminatorConfig, GeneratorConfig, LossWeights, ModelConfig, ModelKind, ReconKind, TrainConfig};

/// Samples per desk dataset.
pub const DESK_SAMPLES: usize = 2048;
/// Generator widths at desk scale (first stage, cap).
pub const DESK_BASE_CHANNELS: usize = 16;
pub const DESK_MAX_CHANNELS: usize = 128;
pub const DESK_DISC_CHANNELS: [usize; 4] = [16, 32, 64, 128];
pub const DESK_EPOCHS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPreset {
    pub name: String,
    pub dataset: DatasetManifest,
    pub model: ModelConfig,
}

fn group_name(g: Group) -> &'static str {
    match g {
        Group::A => "groupA",
        Group::B1 => "groupB1",
        Group::B2 => "groupB2",
        Group::C => "groupC",
    }
}

impl ExperimentPreset {
    pub fn desk(group: Group, model: ModelKind, seed: u64) -> Self {
        let dataset = DatasetManifest::desk(group, DESK_SAMPLES, seed);
        let side = dataset.image_side;
        let recon_kind = if group.binary() { ReconKind::Bce } else { ReconKind::L1 };
        let n_train = dataset.n_train;
        let model = ModelConfig {
            model,
            generator: GeneratorConfig {
                input_side: side,
                base_channels: DESK_BASE_CHANNELS,
                max_channels: DESK_MAX_CHANNELS,
            },
            discriminator: model.adversarial().then(|| DiscriminatorConfig {
                input_side: side,
                channels: DESK_DISC_CHANNELS.to_vec(),
            }),
            loss: LossWeights::new(recon_kind),
            train: TrainConfig {
                epochs: DESK_EPOCHS,
                seed,
                eval_every: (n_train / TrainConfig::default().batch_size) as u64,
                ..TrainConfig::default()
            },
        };
        Self {
            name: format!("{}_{}", group_name(group), model.model.name()),
            dataset,
            model,
        }
    }

    /// Checks the group/model consistency rules on top of the individual
    /// schemas.
    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        self.model.validate()?;
        let m = &self.dataset;
        let binary_source = |s: &SourceSpec| match s {
            SourceSpec::Synthetic { kind, .. } => *kind != SyntheticKind::Garments,
            SourceSpec::Idx { .. } => true,
        };
        if m.group.binary() {
            if !m.binarize || !binary_source(&m.sources.obj1) || !binary_source(&m.sources.obj2) {
                return Err(Error::config("/dataset/sources", "groups A and C need binary object sources"));
            }
            if self.model.loss.recon_kind != ReconKind::Bce {
                return Err(Error::config("/model/loss/recon_kind", "groups A and C train with bce"));
            }
        }
        match m.group {
            Group::B1 if m.bench.d_objects != 0.45 => {
                return Err(Error::config("/dataset/bench/d_objects", "group B1 places the objects 0.45 m apart"))
            }
            Group::B2 if m.bench.d_objects != 0.55 => {
                return Err(Error::config("/dataset/bench/d_objects", "group B2 places the objects 0.55 m apart"))
            }
            Group::C if m.bench.screen1.is_none() => {
                return Err(Error::config("/dataset/bench/screen1", "group C needs the extra screen"))
            }
            _ => {}
        }
        if self.model.generator.input_side != m.image_side {
            return Err(Error::config("/model/generator/input_side", "must equal the dataset image side"));
        }
        Ok(())
    }
}
