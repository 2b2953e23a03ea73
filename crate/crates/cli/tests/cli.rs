use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use spectra_core::datacube::{Mask, RgbImage};
use spectra_select::manifest::Manifest;

fn bin(args: &[&str], config: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spectra-select")).args(args).arg("--config").arg(config).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn assert_ok(o: &Output) {
    assert!(o.status.success(), "stderr: {}", stderr(o));
}

/// Asserts a failure with exactly one `error[category]: ...` line.
fn assert_err(o: &Output, category: &str, code: i32) {
    assert_eq!(o.status.code(), Some(code), "stderr: {}", stderr(o));
    let err = stderr(o);
    let lines: Vec<&str> = err.lines().collect();
    assert_eq!(lines.len(), 1, "{err}");
    assert!(lines[0].starts_with(&format!("error[{category}]: ")), "{err}");
}

struct Fixture {
    dir: tempfile::TempDir,
    config: PathBuf,
}

impl Fixture {
    fn new(extra: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let config = dir.path().join("config.json");
        let out = dir.path().join("out");
        let text = format!(
            r#"{{
  "dataset.source": "planted",
  "dataset.class": "toy",
  "planted.train": 8,
  "planted.test": 6,
  "planted.height": 16,
  "planted.width": 16,
  "forest.trees": 10,
  "ranking.pixels_per_image": 40,
  "ranking.validation_pixels_per_image": 20,
  "train.epochs": 2,
  "bench.warmup": 0,
  "bench.reps": 1,
  "bench.max_cubes": 2,
  "out": {:?}{extra}
}}"#,
            out.to_str().unwrap()
        );
        fs::write(&config, text).unwrap();
        Self { dir, config }
    }

    fn out(&self) -> PathBuf {
        self.dir.path().join("out/toy")
    }

    fn run(&self, args: &[&str]) -> Output {
        bin(args, &self.config)
    }
}

#[test]
fn synth_is_idempotent() {
    let f = Fixture::new("");
    assert_ok(&f.run(&["synth"]));
    let a = Manifest::read(&f.out().join("cache/manifest.json")).unwrap();
    assert_ok(&f.run(&["synth"]));
    let b = Manifest::read(&f.out().join("cache/manifest.json")).unwrap();
    assert_eq!(a, b);
    assert!(a.artifacts.contains_key("index.json") && a.artifacts.contains_key("scaling.json"));
    assert_eq!(a.artifacts.keys().filter(|k| k.ends_with(".hsic") && !k.contains("mask")).count(), 14);
}

#[test]
fn staged_commands_produce_the_layout() {
    let f = Fixture::new("");
    assert_ok(&f.run(&["synth"]));
    let rank = f.run(&["rank", "--method", "fi"]);
    assert_ok(&rank);
    assert!(stdout(&rank).contains(" nm"), "{}", stdout(&rank));
    assert_ok(&f.run(&["train", "--method", "fi"]));
    let eval = f.run(&["eval", "--method", "fi"]);
    assert_ok(&eval);
    assert!(stdout(&eval).contains("class,method,auroc_percent,n"));
    assert_ok(&f.run(&["bench", "--method", "fi"]));
    assert_ok(&f.run(&["plot", "--method", "fi"]));
    let dir = f.out().join("fi");
    for file in ["ranking.json", "weights.bin", "loss.csv", "eval.csv", "eval.json", "bench.csv", "bench.json", "speedup.csv", "importance.svg", "manifest.json"] {
        assert!(dir.join(file).is_file(), "missing {file}");
    }
    let eval_csv = fs::read_to_string(dir.join("eval.csv")).unwrap();
    assert_eq!(eval_csv.lines().count(), 2);
    assert!(eval_csv.lines().nth(1).unwrap().starts_with("toy,FI,"));
    let bench = fs::read_to_string(dir.join("bench.csv")).unwrap();
    assert!(bench.starts_with("method,sec_per_sample,std,min,max\nOrigin,"));
    assert!(bench.lines().nth(2).unwrap().starts_with("FI,"));
    let loss = fs::read_to_string(dir.join("loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 3);
    let svg = fs::read_to_string(dir.join("importance.svg")).unwrap();
    assert_eq!(svg.matches("<rect ").count(), 300);
    assert_eq!(svg.matches(r#"class="top""#).count(), 6);

    let weights = fs::read(dir.join("weights.bin")).unwrap();
    assert_ok(&f.run(&["train", "--method", "fi"]));
    assert_eq!(fs::read(dir.join("weights.bin")).unwrap(), weights);
}

#[test]
fn pca_reports_descending_eigenvalues() {
    let f = Fixture::new("");
    assert_ok(&f.run(&["synth"]));
    let o = f.run(&["rank", "--method", "pca", "--top-n", "4"]);
    assert_ok(&o);
    let text = stdout(&o);
    let values: Vec<f64> =
        text.lines().skip(1).filter_map(|l| l.split_whitespace().nth(1)).map(|v| v.parse().unwrap()).collect();
    assert_eq!(values.len(), 4, "{text}");
    assert!(values.windows(2).all(|w| w[0] >= w[1]), "{values:?}");
    assert!(f.out().join("pca/pca.bin").is_file());
    assert_err(&f.run(&["plot", "--method", "pca"]), "usage", 2);
}

#[test]
fn origin_trains_on_every_channel() {
    let f = Fixture::new("");
    assert_ok(&f.run(&["synth"]));
    let o = f.run(&["train", "--method", "origin"]);
    assert_ok(&o);
    assert!(stdout(&o).contains("300 channels"), "{}", stdout(&o));
    assert_err(&f.run(&["rank", "--method", "origin"]), "usage", 2);
}

#[test]
fn missing_prerequisites_name_the_step() {
    let f = Fixture::new("");
    let o = f.run(&["rank"]);
    assert_err(&o, "artifact", 1);
    assert!(stderr(&o).contains("run `synth` first"));
    assert_ok(&f.run(&["synth"]));
    let o = f.run(&["train", "--method", "fi"]);
    assert_err(&o, "artifact", 1);
    assert!(stderr(&o).contains("run `rank` first"));
    let o = f.run(&["eval", "--method", "origin"]);
    assert_err(&o, "artifact", 1);
    assert!(stderr(&o).contains("run `train` first"));
}

#[test]
fn tampered_cache_is_rejected() {
    let f = Fixture::new("");
    assert_ok(&f.run(&["synth"]));
    let cube = f.out().join("cache/train_0000.hsic");
    let mut bytes = fs::read(&cube).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 1;
    fs::write(&cube, bytes).unwrap();
    let o = f.run(&["rank"]);
    assert_err(&o, "artifact", 1);
    assert!(stderr(&o).contains("checksum"));
}

#[test]
fn usage_errors() {
    let f = Fixture::new("");
    assert_err(&f.run(&["frobnicate"]), "usage", 2);
    assert_err(&f.run(&["rank", "--method", "umap"]), "usage", 2);
    assert_err(&bin(&["rank", "--bogus"], &f.config), "usage", 2);
    let o = Command::new(env!("CARGO_BIN_EXE_spectra-select")).arg("synth").output().unwrap();
    assert_err(&o, "usage", 2);
}

#[test]
fn config_errors() {
    let f = Fixture::new(r#", "train.lr": 1"#);
    assert_err(&f.run(&["synth"]), "config", 1);
    let f = Fixture::new("");
    assert_err(&f.run(&["synth", "--top-n", "301"]), "config", 1);
    let missing = f.dir.path().join("nope.json");
    assert_err(&bin(&["synth"], &missing), "io", 1);
}

#[test]
fn thread_override_must_be_numeric() {
    let f = Fixture::new("");
    let o = Command::new(env!("CARGO_BIN_EXE_spectra-select"))
        .args(["synth", "--config"])
        .arg(&f.config)
        .env("SPECTRA_THREADS", "many")
        .output()
        .unwrap();
    assert_err(&o, "config", 1);
}

fn write_png(path: &Path, v: u8) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    RgbImage::from_rgb8(8, 8, &[v; 8 * 8 * 3]).unwrap().save_png(path).unwrap();
}

fn mvtec_fixture(extra: &str) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("mvtec");
    write_png(&root.join("tile/train/good/000.png"), 100);
    write_png(&root.join("tile/train/good/001.png"), 110);
    write_png(&root.join("tile/test/good/000.png"), 105);
    write_png(&root.join("tile/test/crack/000.png"), 200);
    let mut mask = vec![0u8; 64];
    mask[10] = 255;
    fs::create_dir_all(root.join("tile/ground_truth/crack")).unwrap();
    Mask::new(8, 8, mask).unwrap().save_png(&root.join("tile/ground_truth/crack/000_mask.png")).unwrap();
    let config = dir.path().join("config.json");
    let text = format!(
        r#"{{"dataset.root": {:?}, "dataset.class": "tile", "dataset.size": 8, "out": {:?}{extra}}}"#,
        root.to_str().unwrap(),
        dir.path().join("out").to_str().unwrap()
    );
    fs::write(&config, text).unwrap();
    (dir, config)
}

#[test]
fn mvtec_fixture_caches_every_image() {
    let (dir, config) = mvtec_fixture("");
    assert_ok(&bin(&["synth"], &config));
    let m = Manifest::read(&dir.path().join("out/tile/cache/manifest.json")).unwrap();
    let cubes = m.artifacts.keys().filter(|k| k.ends_with(".hsic") && !k.contains("mask")).count();
    assert_eq!(cubes, 4);
    assert_eq!(m.artifacts.keys().filter(|k| k.contains("mask")).count(), 1);
}

#[test]
fn missing_dataset_root_is_a_data_error() {
    let (_dir, config) = mvtec_fixture("");
    let o = bin(&["synth", "--class", "carpet"], &config);
    assert_err(&o, "data", 1);
    assert!(stderr(&o).contains("directory not found"));
}

#[test]
fn single_class_test_set_cannot_be_evaluated() {
    // with every anomaly moved, the test split holds only normal images
    let (_dir, config) = mvtec_fixture(r#", "dataset.anomaly_split": 1.0, "train.epochs": 1"#);
    assert_ok(&bin(&["synth"], &config));
    assert_ok(&bin(&["train", "--method", "origin"], &config));
    assert_err(&bin(&["eval", "--method", "origin"], &config), "metric", 1);
}
