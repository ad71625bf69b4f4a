//! Batch front end: `simulate`, `train`, `eval`, `reconstruct`, plus
//! `preset` and `compare` helpers.

mod pgm;
mod preset;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use log::info;

pub use pgm::{decode_pgm, encode_pgm, hstack, quantize, read_pgm, write_pgm};
pub use preset::{
    ExperimentPreset, DESK_BASE_CHANNELS, DESK_DISC_CHANNELS, DESK_EPOCHS, DESK_MAX_CHANNELS, DESK_SAMPLES,
};

use crate::dataset::{build_dataset, Dataset, DatasetManifest};
use crate::error::{Error, Result};
use crate::json::read_json;
use crate::metrics::{comparison_table, evaluate_model, IdentityOracle, ReportSummary, SsimParams, SsimReport};
use crate::nn::Tensor;
use crate::ygan::{train, Model, ModelConfig, TrainOutcome, FINAL_DIR};

#[derive(Debug, Parser)]
#[command(name = "ygan", version, about = "Two-object reconstruction from a single simulated speckle pattern")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a dataset from a manifest config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the bench seed of the config.
        #[arg(long)]
        seed: Option<u64>,
        out_dir: PathBuf,
    },
    /// Train a model on a dataset.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the training seed of the config.
        #[arg(long)]
        seed: Option<u64>,
        dataset: PathBuf,
        out_dir: PathBuf,
    },
    /// Score a checkpoint on the test split.
    Eval {
        /// Optional SSIM constants (`dynamic_range`, `k1`, `k2`).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Checkpoint directory (a training run directory resolves to its `final/`).
        #[arg(long, required_unless_present = "oracle")]
        checkpoint: Option<PathBuf>,
        /// Score the ground truth itself instead of a checkpoint.
        #[arg(long, conflicts_with = "checkpoint")]
        oracle: bool,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Row label in reports; defaults to the model kind.
        #[arg(long)]
        tag: Option<String>,
    },
    /// Reconstruct objects from speckles and write PGM images.
    Reconstruct {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Speckle images (8-bit P5 PGM).
        speckles: Vec<PathBuf>,
        /// Take speckles (and ground truth) from a dataset instead.
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Sample indices within `--dataset`.
        #[arg(long = "index", requires = "dataset")]
        indices: Vec<usize>,
    },
    /// Write dataset and model configs for a desk-scale experiment.
    Preset {
        /// A, B1, B2 or C.
        #[arg(long)]
        group: String,
        /// ygan, ynet or ynet1.
        #[arg(long)]
        model: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        out_dir: PathBuf,
    },
    /// Print a comparison table from report summaries.
    Compare {
        #[arg(long, default_value = "obj1")]
        label1: String,
        #[arg(long, default_value = "obj2")]
        label2: String,
        reports: Vec<PathBuf>,
    },
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, seed, out_dir } => {
            let ds = cmd_simulate(&config, seed, &out_dir)?;
            println!("{}", ds.hash());
        }
        Command::Train {
            config,
            seed,
            dataset,
            out_dir,
        } => {
            let outcome = cmd_train(&config, seed, &dataset, &out_dir)?;
            if let Some(last) = outcome.history.last() {
                println!(
                    "trained {} steps; final val ssim {:.4} / {:.4}",
                    outcome.steps, last.val_ssim1, last.val_ssim2
                );
            }
        }
        Command::Eval {
            config,
            checkpoint,
            oracle,
            dataset,
            out,
            tag,
        } => {
            let params = match config {
                Some(p) => read_json(&p)?,
                None => SsimParams::default(),
            };
            let ckpt = if oracle { None } else { checkpoint };
            let report = cmd_eval(ckpt.as_deref(), &dataset, &out, &params, tag.as_deref())?;
            print!("{}", comparison_table(&[report.summary()], "obj1", "obj2"));
        }
        Command::Reconstruct {
            checkpoint,
            out,
            speckles,
            dataset,
            indices,
        } => {
            let written = cmd_reconstruct(&checkpoint, &speckles, dataset.as_deref(), &indices, &out)?;
            for p in written {
                println!("{}", p.display());
            }
        }
        Command::Preset {
            group,
            model,
            seed,
            out_dir,
        } => {
            let preset = ExperimentPreset::desk(group.parse()?, model.parse()?, seed);
            for p in cmd_preset(&preset, &out_dir)? {
                println!("{}", p.display());
            }
        }
        Command::Compare { label1, label2, reports } => {
            let summaries = reports.iter().map(|p| read_json(p)).collect::<Result<Vec<ReportSummary>>>()?;
            print!("{}", comparison_table(&summaries, &label1, &label2));
        }
    }
    Ok(())
}

pub fn cmd_simulate(config: &Path, seed: Option<u64>, out_dir: &Path) -> Result<Dataset> {
    let mut manifest: DatasetManifest = read_json(config)?;
    if let Some(s) = seed {
        manifest.bench.seed = s;
    }
    manifest.validate()?;
    info!("synthesizing {} samples into {}", manifest.n_total, out_dir.display());
    build_dataset(&manifest, out_dir)
}

pub fn cmd_train(config: &Path, seed: Option<u64>, dataset_dir: &Path, out_dir: &Path) -> Result<TrainOutcome> {
    let mut cfg: ModelConfig = read_json(config)?;
    if let Some(s) = seed {
        cfg.train.seed = s;
    }
    cfg.validate()?;
    let dataset = Dataset::load(dataset_dir)?;
    info!(
        "training {} on {} ({} train / {} test samples)",
        cfg.model.name(),
        dataset_dir.display(),
        dataset.train_indices().len(),
        dataset.test_indices().len()
    );
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    train(&cfg, &dataset, Some(out_dir), None)
}

/// Accepts either a checkpoint directory or a training run directory.
pub fn resolve_checkpoint(path: &Path) -> PathBuf {
    let nested = path.join(FINAL_DIR);
    if !path.join("meta.json").exists() && nested.join("meta.json").exists() {
        nested
    } else {
        path.to_path_buf()
    }
}

pub fn cmd_eval(
    checkpoint: Option<&Path>,
    dataset_dir: &Path,
    out_dir: &Path,
    params: &SsimParams,
    tag: Option<&str>,
) -> Result<SsimReport> {
    let dataset = Dataset::load(dataset_dir)?;
    let report = match checkpoint {
        Some(ckpt) => {
            let (model, _) = Model::load(&resolve_checkpoint(ckpt))?;
            if model.side() != dataset.side() {
                return Err(Error::contract("eval", "checkpoint side differs from dataset side"));
            }
            evaluate_model(&model, &dataset, params, tag.unwrap_or(model.config.model.name()))?
        }
        None => evaluate_model(&IdentityOracle, &dataset, params, tag.unwrap_or("identity"))?,
    };
    report.write(out_dir, "report")?;
    Ok(report)
}

struct Job {
    stem: String,
    speckle: Vec<f32>,
    truths: Option<(Vec<f32>, Vec<f32>)>,
}

pub fn cmd_reconstruct(
    checkpoint: &Path,
    speckles: &[PathBuf],
    dataset_dir: Option<&Path>,
    indices: &[usize],
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    let (model, _) = Model::load(&resolve_checkpoint(checkpoint))?;
    let side = model.side();
    let mut jobs = Vec::new();
    for path in speckles {
        let (w, h, px) = read_pgm(path)?;
        if w != side || h != side {
            return Err(Error::contract(
                "reconstruct",
                format!("{} is {w}x{h}, checkpoint expects {side}x{side}", path.display()),
            ));
        }
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "speckle".into());
        jobs.push(Job {
            stem,
            speckle: px,
            truths: None,
        });
    }
    if let Some(dir) = dataset_dir {
        let ds = Dataset::load(dir)?;
        if ds.side() != side {
            return Err(Error::contract("reconstruct", "dataset side differs from checkpoint side"));
        }
        for &i in indices {
            if i >= ds.len() {
                return Err(Error::invalid(format!("index {i} outside dataset of {} samples", ds.len())));
            }
            jobs.push(Job {
                stem: format!("sample{i:05}"),
                speckle: ds.speckle(i).to_vec(),
                truths: Some((ds.obj1(i).to_vec(), ds.obj2(i).to_vec())),
            });
        }
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    for job in jobs {
        let x = Tensor::from_vec([1, side, side, 1], job.speckle.clone())?;
        let [o1, o2] = model.reconstruct_tensor(&x)?;
        let (p1, p2) = (o1.item(0), o2.item(0));
        let panel = match &job.truths {
            Some((t1, t2)) => hstack(side, &[&job.speckle, t1, p1, t2, p2]),
            None => hstack(side, &[&job.speckle, p1, p2]),
        };
        for (suffix, width, px) in [("obj1", side, p1), ("obj2", side, p2), ("panel", panel.len() / side, &panel[..])] {
            let path = out_dir.join(format!("{}_{suffix}.pgm", job.stem));
            write_pgm(&path, width, side, px)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Writes `dataset.json` and `model.json` for a preset.
pub fn cmd_preset(preset: &ExperimentPreset, out_dir: &Path) -> Result<Vec<PathBuf>> {
    preset.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let files = [
        ("dataset.json", serde_json::to_string_pretty(&preset.dataset)?),
        ("model.json", serde_json::to_string_pretty(&preset.model)?),
    ];
    let mut out = Vec::new();
    for (name, body) in files {
        let path = out_dir.join(name);
        std::fs::write(&path, body + "\n").map_err(|e| Error::io(&path, e))?;
        out.push(path);
    }
    Ok(out)
}
