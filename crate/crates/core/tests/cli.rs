use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ygan::dataset::{DatasetManifest, Group};
use ygan::metrics::ReportSummary;
use ygan::ygan::{DiscriminatorConfig, GeneratorConfig, LossWeights, ModelConfig, ModelKind, ReconKind, TrainConfig};

fn ygan(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ygan"));
    for a in args {
        cmd.arg(a);
    }
    cmd.env("RUST_LOG", "warn").env("RAYON_NUM_THREADS", "1");
    cmd.output().expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn tiny_model(kind: ModelKind) -> ModelConfig {
    let mut generator = GeneratorConfig::new(64);
    generator.base_channels = 4;
    generator.max_channels = 8;
    let discriminator = kind.adversarial().then(|| {
        let mut d = DiscriminatorConfig::new(64);
        d.channels = vec![4, 4, 8, 8];
        d
    });
    ModelConfig {
        model: kind,
        generator,
        discriminator,
        loss: LossWeights::new(ReconKind::Bce),
        train: TrainConfig {
            batch_size: 8,
            epochs: 1,
            eval_every: 2,
            ..TrainConfig::default()
        },
    }
}

fn write_json(path: &Path, v: &impl serde::Serialize) -> PathBuf {
    fs::write(path, serde_json::to_string_pretty(v).unwrap()).unwrap();
    path.to_path_buf()
}

fn tree_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn simulate_train_eval_reconstruct() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let ds_cfg = write_json(&t.join("dataset.json"), &DatasetManifest::desk(Group::A, 40, 5));
    let model_cfg = write_json(&t.join("model.json"), &tiny_model(ModelKind::Ygan));

    let hash = ok(&ygan(&[&"simulate", &"--config", &ds_cfg, &t.join("ds")]));
    assert_eq!(hash.trim().len(), 64);
    for f in ["manifest.json", "speckles.bin", "obj1.bin", "obj2.bin", "split.json"] {
        assert!(t.join("ds").join(f).exists(), "{f}");
    }

    let stdout = ok(&ygan(&[&"train", &"--config", &model_cfg, &t.join("ds"), &t.join("run")]));
    assert!(stdout.contains("trained 4 steps"), "{stdout}");
    let history = fs::read_to_string(t.join("run/history.csv")).unwrap();
    assert!(history.starts_with("step,d_loss,g_loss,val_ssim1,val_ssim2,val_acc1,val_acc2\n"));
    assert_eq!(history.lines().count(), 3);
    assert!(t.join("run/best/meta.json").exists() && t.join("run/final/meta.json").exists());

    let table = ok(&ygan(&[&"eval", &"--checkpoint", &t.join("run"), &"--dataset", &t.join("ds"), &"--out", &t.join("eval")]));
    assert!(table.contains("ygan"), "{table}");
    let summary: ReportSummary = serde_json::from_str(&fs::read_to_string(t.join("eval/report.json")).unwrap()).unwrap();
    assert_eq!(summary.n_samples, 4);
    assert_eq!(summary.dataset_hash, hash.trim());
    let csv = fs::read_to_string(t.join("eval/report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);

    ok(&ygan(&[&"eval", &"--oracle", &"--dataset", &t.join("ds"), &"--out", &t.join("oracle")]));
    let oracle: ReportSummary = serde_json::from_str(&fs::read_to_string(t.join("oracle/report.json")).unwrap()).unwrap();
    assert!((oracle.mean_ssim1 - 1.0).abs() < 1e-12 && (oracle.mean_ssim2 - 1.0).abs() < 1e-12);
    assert_eq!(oracle.mean_acc1, Some(1.0));

    let cmp = ok(&ygan(&[&"compare", &t.join("eval/report.json"), &t.join("oracle/report.json")]));
    assert!(cmp.contains("identity") && cmp.contains("ygan"), "{cmp}");

    let listed = ok(&ygan(&[
        &"reconstruct",
        &"--checkpoint",
        &t.join("run/best"),
        &"--out",
        &t.join("rec"),
        &"--dataset",
        &t.join("ds"),
        &"--index",
        &"3",
    ]));
    assert_eq!(listed.lines().count(), 3);
    let (w, h, _) = ygan::cli::read_pgm(&t.join("rec/sample00003_panel.pgm")).unwrap();
    assert_eq!((w, h), (5 * 64, 64));

    // A speckle supplied as an image file.
    let (_, _, px) = ygan::cli::read_pgm(&t.join("rec/sample00003_obj1.pgm")).unwrap();
    ygan::cli::write_pgm(&t.join("mine.pgm"), 64, 64, &px).unwrap();
    ok(&ygan(&[&"reconstruct", &"--checkpoint", &t.join("run"), &"--out", &t.join("rec2"), &t.join("mine.pgm")]));
    let (w, _, _) = ygan::cli::read_pgm(&t.join("rec2/mine_panel.pgm")).unwrap();
    assert_eq!(w, 3 * 64);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let ds_cfg = write_json(&t.join("dataset.json"), &DatasetManifest::desk(Group::C, 24, 9));
    let model_cfg = write_json(&t.join("model.json"), &tiny_model(ModelKind::Ynet1));
    for r in ["a", "b"] {
        let ds = t.join(format!("ds_{r}"));
        ok(&ygan(&[&"simulate", &"--config", &ds_cfg, &ds]));
        ok(&ygan(&[&"train", &"--config", &model_cfg, &ds, &t.join(format!("run_{r}"))]));
        ok(&ygan(&[&"eval", &"--checkpoint", &t.join(format!("run_{r}")), &"--dataset", &ds, &"--out", &t.join(format!("eval_{r}"))]));
    }
    for d in ["ds", "run", "eval"] {
        let (a, b) = (tree_bytes(&t.join(format!("{d}_a"))), tree_bytes(&t.join(format!("{d}_b"))));
        assert!(!a.is_empty());
        assert_eq!(a, b, "{d} differs between reruns");
    }
}

#[test]
fn seed_override_changes_the_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let ds_cfg = write_json(&t.join("dataset.json"), &DatasetManifest::desk(Group::B1, 20, 1));
    let a = ok(&ygan(&[&"simulate", &"--config", &ds_cfg, &t.join("a")]));
    let b = ok(&ygan(&[&"simulate", &"--config", &ds_cfg, &"--seed", &"77", &t.join("b")]));
    assert_ne!(a, b);
}

#[test]
fn config_errors_exit_with_code_two_and_a_pointer() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let mut m = serde_json::to_value(DatasetManifest::desk(Group::A, 40, 5)).unwrap();
    m["n_train"] = serde_json::json!(1);
    let bad = write_json(&t.join("bad.json"), &m);
    let out = ygan(&[&"simulate", &"--config", &bad, &t.join("ds")]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("/n_train"), "{err}");

    let mut m = serde_json::to_value(tiny_model(ModelKind::Ygan)).unwrap();
    m["train"]["lr"] = serde_json::json!(-1.0);
    let bad = write_json(&t.join("bad_model.json"), &m);
    let out = ygan(&[&"train", &"--config", &bad, &t.join("nowhere"), &t.join("run")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/train/lr"));
}

#[test]
fn missing_files_exit_with_code_one() {
    let out = ygan(&[&"eval", &"--oracle", &"--dataset", &"/nonexistent/ds", &"--out", &"/tmp/unused"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn preset_writes_consistent_configs() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    ok(&ygan(&[&"preset", &"--group", &"B2", &"--model", &"ynet", &t]));
    let ds: DatasetManifest = ygan::json::read_json(&t.join("dataset.json")).unwrap();
    let model: ModelConfig = ygan::json::read_json(&t.join("model.json")).unwrap();
    assert_eq!(ds.group, Group::B2);
    assert!((ds.bench.d_objects - 0.55).abs() < 1e-12);
    assert_eq!(model.model, ModelKind::Ynet);
    assert!(model.discriminator.is_none());
    assert_eq!(model.loss.recon_kind, ReconKind::L1);
    assert_eq!(model.generator.input_side, ds.image_side);
}
