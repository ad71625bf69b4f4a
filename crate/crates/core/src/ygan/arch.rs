use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Graph, GraphBuilder, NodeId};

/// Y-Net generator shape: one encoder, two decoder heads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub input_side: usize,
    #[serde(default = "default_base")]
    pub base_channels: usize,
    #[serde(default = "default_max")]
    pub max_channels: usize,
}

fn default_base() -> usize {
    32
}

fn default_max() -> usize {
    512
}

impl GeneratorConfig {
    pub fn new(input_side: usize) -> Self {
        Self {
            input_side,
            base_channels: default_base(),
            max_channels: default_max(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_side < 16 || !self.input_side.is_power_of_two() {
            return Err(Error::config(
                "/generator/input_side",
                format!("{} is not a power of two >= 16", self.input_side),
            ));
        }
        if self.base_channels == 0 || self.max_channels < self.base_channels {
            return Err(Error::config("/generator", "need 0 < base_channels <= max_channels"));
        }
        Ok(())
    }

    /// Number of stride-2 stages; the bottleneck is 2x2.
    pub fn depth(&self) -> usize {
        self.input_side.trailing_zeros() as usize - 1
    }

    pub fn channels(&self) -> Vec<usize> {
        (0..self.depth())
            .map(|i| (self.base_channels << i).min(self.max_channels))
            .collect()
    }
}

/// PatchGAN discriminator shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscriminatorConfig {
    pub input_side: usize,
    #[serde(default = "default_disc_channels")]
    pub channels: Vec<usize>,
}

fn default_disc_channels() -> Vec<usize> {
    vec![64, 128, 256, 512]
}

impl DiscriminatorConfig {
    pub fn new(input_side: usize) -> Self {
        Self {
            input_side,
            channels: default_disc_channels(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.len() != 4 || self.channels.contains(&0) {
            return Err(Error::config("/discriminator/channels", "need four non-zero stage widths"));
        }
        if self.input_side < 16 || self.input_side % 16 != 0 {
            return Err(Error::config("/discriminator/input_side", "must be a positive multiple of 16"));
        }
        Ok(())
    }

    pub fn output_side(&self) -> usize {
        self.input_side / 16
    }
}

pub const INPUT: &str = "speckle";

/// Name of the bottleneck activation (last encoder stage output).
pub fn bottleneck_node(cfg: &GeneratorConfig) -> String {
    let last = cfg.depth() - 1;
    if last == 0 {
        format!("enc{last}.act")
    } else {
        format!("enc{last}.bn")
    }
}

#[derive(Clone, Copy)]
enum Downsample {
    StridedConv,
    ConvPool,
}

/// YGAN generator (Y-Net).
pub fn build_generator(cfg: &GeneratorConfig) -> Result<Graph> {
    build_y(cfg, Downsample::StridedConv)
}

/// Y-Net1 baseline: stride-1 convolutions followed by 2x2 max pooling.
pub fn build_ynet1(cfg: &GeneratorConfig) -> Result<Graph> {
    build_y(cfg, Downsample::ConvPool)
}

fn build_y(cfg: &GeneratorConfig, down: Downsample) -> Result<Graph> {
    cfg.validate()?;
    let depth = cfg.depth();
    let ch = cfg.channels();
    let mut g = GraphBuilder::new();
    let mut x = g.input(INPUT, 1);
    let mut skips: Vec<NodeId> = Vec::with_capacity(depth);
    for (i, &c) in ch.iter().enumerate() {
        x = match down {
            Downsample::StridedConv => g.conv(&format!("enc{i}.conv"), x, c, 2),
            Downsample::ConvPool => {
                let y = g.conv(&format!("enc{i}.conv"), x, c, 1);
                g.max_pool(&format!("enc{i}.pool"), y)
            }
        };
        x = g.leaky_relu(&format!("enc{i}.act"), x);
        if i > 0 {
            x = g.batch_norm(&format!("enc{i}.bn"), x);
        }
        skips.push(x);
    }
    let bottleneck = x;
    for head in 1..=2 {
        let mut h = bottleneck;
        for j in 0..depth - 1 {
            let level = depth - 2 - j;
            let p = format!("head{head}.dec{j}");
            h = g.upsample(&format!("{p}.up"), h);
            h = g.conv(&format!("{p}.conv"), h, ch[level], 1);
            h = g.leaky_relu(&format!("{p}.act"), h);
            h = g.batch_norm(&format!("{p}.bn"), h);
            h = g.concat(&format!("{p}.cat"), h, skips[level]);
        }
        h = g.upsample(&format!("head{head}.out.up"), h);
        h = g.conv(&format!("head{head}.out.conv"), h, 1, 1);
        h = g.sigmoid(&format!("head{head}.out.sigmoid"), h);
        g.output(h);
    }
    Ok(g.build())
}

/// PatchGAN discriminator on a channel-concatenated image pair.
pub fn build_discriminator(cfg: &DiscriminatorConfig) -> Result<Graph> {
    cfg.validate()?;
    let mut g = GraphBuilder::new();
    let mut x = g.input("pair", 2);
    for (i, &c) in cfg.channels.iter().enumerate() {
        x = g.conv(&format!("d{i}.conv"), x, c, 2);
        x = g.leaky_relu(&format!("d{i}.act"), x);
        if i > 0 {
            x = g.batch_norm(&format!("d{i}.bn"), x);
        }
    }
    x = g.conv("patch.conv", x, 1, 1);
    x = g.sigmoid("patch.sigmoid", x);
    g.output(x);
    Ok(g.build())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_and_channels() {
        let cfg = GeneratorConfig::new(64);
        assert_eq!(cfg.depth(), 5);
        assert_eq!(cfg.channels(), vec![32, 64, 128, 256, 512]);
        assert_eq!(GeneratorConfig::new(256).channels().last(), Some(&512));
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(matches!(build_generator(&GeneratorConfig::new(60)), Err(Error::Config { .. })));
        assert!(build_generator(&GeneratorConfig::new(8)).is_err());
        assert!(build_ynet1(&GeneratorConfig::new(60)).is_err());
    }

    #[test]
    fn bottleneck_shapes() {
        for side in [64, 256] {
            let cfg = GeneratorConfig::new(side);
            let graph = build_generator(&cfg).unwrap();
            let shapes = graph.infer_shapes(&[[1, side, side, 1]]).unwrap();
            let b = graph.node_id(&bottleneck_node(&cfg)).unwrap();
            assert_eq!(shapes[b], [1, 2, 2, 512]);
            assert_eq!(graph.output_shapes(&[[1, side, side, 1]]).unwrap(), vec![[1, side, side, 1]; 2]);
        }
    }

    #[test]
    fn ynet1_matches_generator_outputs_and_params() {
        let cfg = GeneratorConfig::new(64);
        let a = build_generator(&cfg).unwrap();
        let b = build_ynet1(&cfg).unwrap();
        let s = [[2, 64, 64, 1]];
        assert_eq!(a.output_shapes(&s).unwrap(), b.output_shapes(&s).unwrap());
        assert_eq!(a.params(), b.params());
    }

    #[test]
    fn discriminator_patch_side() {
        for (side, out) in [(256, 16), (64, 4)] {
            let g = build_discriminator(&DiscriminatorConfig::new(side)).unwrap();
            assert_eq!(g.output_shapes(&[[1, side, side, 2]]).unwrap(), vec![[1, out, out, 1]]);
        }
        let g = build_discriminator(&DiscriminatorConfig::new(64)).unwrap();
        assert!(matches!(g.output_shapes(&[[1, 64, 64, 1]]), Err(Error::Contract { .. })));
    }
}
