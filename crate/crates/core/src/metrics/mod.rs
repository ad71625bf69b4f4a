//! Global SSIM, pixel accuracy, and test-set reports.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{Batch, Dataset};
use crate::error::{Error, Result};
use crate::nn::{Network, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SsimParams {
    pub dynamic_range: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            dynamic_range: 1.0,
            k1: 0.01,
            k2: 0.03,
        }
    }
}

impl SsimParams {
    pub fn c1(&self) -> f64 {
        (self.k1 * self.dynamic_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.dynamic_range).powi(2)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c1() > 0.0 && self.c2() > 0.0) {
            return Err(Error::invalid("ssim constants must be positive"));
        }
        Ok(())
    }
}

/// Pairwise (cascade) summation: the result does not depend on how the
/// input was produced, and rounding error grows only logarithmically.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn pairwise_mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}

/// SSIM with whole-image means, variances and covariance.
pub fn ssim(y: &[f32], y_hat: &[f32], p: &SsimParams) -> Result<f64> {
    if y.len() != y_hat.len() || y.is_empty() {
        return Err(Error::contract("ssim", format!("image sizes {} and {} differ", y.len(), y_hat.len())));
    }
    let n = y.len() as f64;
    let a: Vec<f64> = y.iter().map(|&v| v as f64).collect();
    let b: Vec<f64> = y_hat.iter().map(|&v| v as f64).collect();
    let (ma, mb) = (pairwise_sum(&a) / n, pairwise_sum(&b) / n);
    let da: Vec<f64> = a.iter().map(|v| v - ma).collect();
    let db: Vec<f64> = b.iter().map(|v| v - mb).collect();
    let va = pairwise_sum(&da.iter().map(|d| d * d).collect::<Vec<_>>()) / n;
    let vb = pairwise_sum(&db.iter().map(|d| d * d).collect::<Vec<_>>()) / n;
    let cov = pairwise_sum(&da.iter().zip(&db).map(|(x, y)| x * y).collect::<Vec<_>>()) / n;
    let (c1, c2) = (p.c1(), p.c2());
    Ok((2.0 * ma * mb + c1) * (2.0 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2)))
}

/// Fraction of pixels whose thresholded prediction matches the target.
pub fn pixel_accuracy(pred: &[f32], target: &[f32], threshold: f32) -> Result<f64> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::contract("pixel_accuracy", "image sizes differ"));
    }
    if target.iter().any(|&t| t != 0.0 && t != 1.0) {
        return Err(Error::invalid("pixel accuracy needs a binary target"));
    }
    let hits = pred.iter().zip(target).filter(|(&p, &t)| (p >= threshold) == (t == 1.0)).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Anything that maps a batch of speckles to the two object estimates.
pub trait Reconstructor {
    fn reconstruct(&self, batch: &Batch) -> Result<[Tensor<f32>; 2]>;
}

impl Reconstructor for Network<f32> {
    fn reconstruct(&self, batch: &Batch) -> Result<[Tensor<f32>; 2]> {
        let mut out = self.infer(&[&batch.x])?;
        if out.len() != 2 {
            return Err(Error::contract("reconstruct", "network must have two outputs"));
        }
        let o2 = out.pop().unwrap();
        Ok([out.pop().unwrap(), o2])
    }
}

/// Returns the ground truth; scores exactly 1.
pub struct IdentityOracle;

impl Reconstructor for IdentityOracle {
    fn reconstruct(&self, batch: &Batch) -> Result<[Tensor<f32>; 2]> {
        Ok([batch.y1.clone(), batch.y2.clone()])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimRow {
    pub index: usize,
    pub ssim1: f64,
    pub ssim2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsimReport {
    pub model_tag: String,
    pub dataset_hash: String,
    pub per_sample: Vec<SsimRow>,
    pub mean_obj1: f64,
    pub mean_obj2: f64,
    /// Mean pixel accuracy per head; present only for binary targets.
    pub mean_acc1: Option<f64>,
    pub mean_acc2: Option<f64>,
}

/// Contents of the JSON summary written next to the per-sample CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub model_tag: String,
    pub dataset_hash: String,
    pub n_samples: usize,
    pub mean_ssim1: f64,
    pub mean_ssim2: f64,
    pub mean_acc1: Option<f64>,
    pub mean_acc2: Option<f64>,
}

impl SsimReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,ssim1,ssim2\n");
        for r in &self.per_sample {
            let _ = writeln!(s, "{},{},{}", r.index, r.ssim1, r.ssim2);
        }
        s
    }

    pub fn summary(&self) -> ReportSummary {
        ReportSummary {
            model_tag: self.model_tag.clone(),
            dataset_hash: self.dataset_hash.clone(),
            n_samples: self.per_sample.len(),
            mean_ssim1: self.mean_obj1,
            mean_ssim2: self.mean_obj2,
            mean_acc1: self.mean_acc1,
            mean_acc2: self.mean_acc2,
        }
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary()).expect("summary serializes") + "\n"
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (ext, body) in [("csv", self.to_csv()), ("json", self.summary_json())] {
            let path = dir.join(format!("{stem}.{ext}"));
            std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        0.5 * (self.mean_obj1 + self.mean_obj2)
    }
}

const EVAL_CHUNK: usize = 32;

/// Scores a reconstructor on the given sample indices of `dataset`.
pub fn evaluate_on(
    model: &dyn Reconstructor,
    dataset: &Dataset,
    indices: &[usize],
    p: &SsimParams,
    model_tag: &str,
) -> Result<SsimReport> {
    if indices.is_empty() {
        return Err(Error::invalid("evaluation set is empty"));
    }
    p.validate()?;
    let binary = dataset.manifest().binarize;
    let mut rows = Vec::with_capacity(indices.len());
    let mut acc = (Vec::new(), Vec::new());
    for chunk in indices.chunks(EVAL_CHUNK) {
        let batch = dataset.batch(chunk);
        let [o1, o2] = model.reconstruct(&batch)?;
        for (k, &index) in chunk.iter().enumerate() {
            rows.push(SsimRow {
                index,
                ssim1: ssim(batch.y1.item(k), o1.item(k), p)?,
                ssim2: ssim(batch.y2.item(k), o2.item(k), p)?,
            });
            if binary {
                acc.0.push(pixel_accuracy(o1.item(k), batch.y1.item(k), 0.5)?);
                acc.1.push(pixel_accuracy(o2.item(k), batch.y2.item(k), 0.5)?);
            }
        }
    }
    let col = |f: fn(&SsimRow) -> f64| pairwise_mean(&rows.iter().map(f).collect::<Vec<_>>());
    Ok(SsimReport {
        model_tag: model_tag.to_string(),
        dataset_hash: dataset.hash(),
        mean_obj1: col(|r| r.ssim1),
        mean_obj2: col(|r| r.ssim2),
        mean_acc1: binary.then(|| pairwise_mean(&acc.0)),
        mean_acc2: binary.then(|| pairwise_mean(&acc.1)),
        per_sample: rows,
    })
}

/// Scores a reconstructor on the test split.
pub fn evaluate_model(model: &dyn Reconstructor, dataset: &Dataset, p: &SsimParams, model_tag: &str) -> Result<SsimReport> {
    evaluate_on(model, dataset, dataset.test_indices(), p, model_tag)
}

/// Plain-text table with one row per report and one column per object.
pub fn comparison_table(reports: &[ReportSummary], obj1_label: &str, obj2_label: &str) -> String {
    let width = reports.iter().map(|r| r.model_tag.len()).max().unwrap_or(0).max(5);
    let mut s = format!("{:<width$}  {:>10}  {:>10}\n", "model", obj1_label, obj2_label);
    for r in reports {
        let _ = writeln!(s, "{:<width$}  {:>10.4}  {:>10.4}", r.model_tag, r.mean_ssim1, r.mean_ssim2);
    }
    s
}
