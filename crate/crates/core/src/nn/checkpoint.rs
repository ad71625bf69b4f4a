//! Checkpoint directories: `meta.json` plus one raw little-endian `f32`
//! file per named tensor, row-major, shapes recorded in the metadata.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Network;
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub format_version: u32,
    pub step: u64,
    /// Free-form model configuration (architecture, seeds, hyper-parameters).
    pub config: serde_json::Value,
    pub tensors: Vec<TensorEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

pub fn write_f32_file(path: &Path, data: &[f32]) -> Result<()> {
    let mut bytes = Vec::with_capacity(data.len() * 4);
    for v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_f32_file(path: &Path) -> Result<Vec<f32>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 4 != 0 {
        return Err(Error::Format {
            offset: bytes.len() as u64,
            message: format!("{} is not a whole number of f32 values", path.display()),
        });
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

pub fn write_checkpoint(dir: &Path, step: u64, config: serde_json::Value, tensors: &[NamedTensor]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(tensors.len());
    for t in tensors {
        let file = format!("{}.f32", t.name);
        write_f32_file(&dir.join(&file), &t.data)?;
        entries.push(TensorEntry {
            name: t.name.clone(),
            shape: t.shape.clone(),
            file,
        });
    }
    let meta = CheckpointMeta {
        format_version: FORMAT_VERSION,
        step,
        config,
        tensors: entries,
    };
    let path = dir.join("meta.json");
    let text = serde_json::to_string_pretty(&meta)?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

pub fn read_meta(dir: &Path) -> Result<CheckpointMeta> {
    let path = dir.join("meta.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let meta: CheckpointMeta = serde_json::from_str(&text)?;
    if meta.format_version != FORMAT_VERSION {
        return Err(Error::Format {
            offset: 0,
            message: format!("unsupported checkpoint format {}", meta.format_version),
        });
    }
    Ok(meta)
}

pub fn read_checkpoint(dir: &Path) -> Result<(CheckpointMeta, BTreeMap<String, NamedTensor>)> {
    let meta = read_meta(dir)?;
    let mut tensors = BTreeMap::new();
    for e in &meta.tensors {
        let data = read_f32_file(&dir.join(&e.file))?;
        let want: usize = e.shape.iter().product();
        if data.len() != want {
            return Err(Error::Format {
                offset: (data.len() * 4) as u64,
                message: format!("{}: expected {want} values, found {}", e.file, data.len()),
            });
        }
        tensors.insert(
            e.name.clone(),
            NamedTensor {
                name: e.name.clone(),
                shape: e.shape.clone(),
                data,
            },
        );
    }
    Ok((meta, tensors))
}

/// Parameters and batch-norm buffers of `net`, names prefixed with `prefix`.
pub fn export_network(prefix: &str, net: &Network<f32>) -> Vec<NamedTensor> {
    let mut out: Vec<NamedTensor> = net
        .graph()
        .params()
        .iter()
        .zip(net.params())
        .map(|(info, data)| NamedTensor {
            name: format!("{prefix}{}", info.name),
            shape: info.shape.clone(),
            data: data.clone(),
        })
        .collect();
    for (name, mean, var) in net.running_stats() {
        out.push(NamedTensor {
            name: format!("{prefix}{name}.running_mean"),
            shape: vec![mean.len()],
            data: mean.to_vec(),
        });
        out.push(NamedTensor {
            name: format!("{prefix}{name}.running_var"),
            shape: vec![var.len()],
            data: var.to_vec(),
        });
    }
    out
}

/// Inverse of [`export_network`]; every tensor of the graph must be present.
pub fn import_network(prefix: &str, net: &mut Network<f32>, tensors: &BTreeMap<String, NamedTensor>) -> Result<()> {
    let fetch = |name: String, shape: &[usize]| -> Result<Vec<f32>> {
        let t = tensors
            .get(&name)
            .ok_or_else(|| Error::invalid(format!("checkpoint lacks tensor {name}")))?;
        if t.shape != shape {
            return Err(Error::invalid(format!(
                "tensor {name} has shape {:?}, graph expects {shape:?}",
                t.shape
            )));
        }
        Ok(t.data.clone())
    };
    let infos = net.graph().params().to_vec();
    for (i, info) in infos.iter().enumerate() {
        net.params_mut()[i] = fetch(format!("{prefix}{}", info.name), &info.shape)?;
    }
    let stats: Vec<(String, usize)> = net.running_stats().map(|(n, m, _)| (n.to_string(), m.len())).collect();
    for (name, c) in stats {
        let mean = fetch(format!("{prefix}{name}.running_mean"), &[c])?;
        let var = fetch(format!("{prefix}{name}.running_var"), &[c])?;
        net.set_running_stats(&name, mean, var)?;
    }
    Ok(())
}
