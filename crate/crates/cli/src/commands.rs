use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use spectra_core::bench::{speedup, write_csv, LatencyReport};
use spectra_core::datacube::{
    read_hsic, write_hsic, FeatureCube, LabeledDataset, LabeledItem, Mask, MinMaxStats, SpectralCube, Split, WavelengthGrid,
};
use spectra_core::evalmetrics::ScoreReport;
use spectra_core::reduction::{load_pca, load_ranking, save_pca, save_ranking};
use spectra_core::scorer::{load_weights, save_weights, ScorerNet};

use crate::config::{Method, RunConfig};
use crate::error::CliError;
use crate::manifest::{sha256_file, Manifest};
use crate::plot::importance_svg;
use crate::stages::{self, Artifact, Prepared};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Synth,
    Rank,
    Train,
    Eval,
    Bench,
    Plot,
    Pipeline,
}

impl Command {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        Ok(match s {
            "synth" => Command::Synth,
            "rank" => Command::Rank,
            "train" => Command::Train,
            "eval" => Command::Eval,
            "bench" => Command::Bench,
            "plot" => Command::Plot,
            "pipeline" => Command::Pipeline,
            other => return Err(CliError::Usage(format!("unknown command `{other}`"))),
        })
    }
}

/// Runs one command. `methods` is used only by `pipeline`.
pub fn run(cmd: Command, cfg: &RunConfig, methods: &[Method], out: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        Command::Synth => {
            let data = stages::prepare(cfg)?;
            write_cache(cfg, &data, out)
        }
        Command::Rank => {
            let data = read_cache(cfg)?;
            rank(cfg, cfg.method, &data, out)
        }
        Command::Train => {
            let data = read_cache(cfg)?;
            train(cfg, cfg.method, &data, out)
        }
        Command::Eval => {
            let data = read_cache(cfg)?;
            eval(cfg, cfg.method, &data, out).map(|_| ())
        }
        Command::Bench => {
            let data = read_cache(cfg)?;
            bench(cfg, cfg.method, &data, out).map(|_| ())
        }
        Command::Plot => plot(cfg, cfg.method, out),
        Command::Pipeline => pipeline(cfg, methods, out),
    }
}

fn say(out: &mut dyn Write, text: &str) {
    // progress output is best effort
    let _ = out.write_all(text.as_bytes());
    if !text.ends_with('\n') {
        let _ = out.write_all(b"\n");
    }
}

fn create_dir(p: &Path) -> Result<(), CliError> {
    fs::create_dir_all(p).map_err(CliError::io(p))
}

fn write_text(p: &Path, text: &str) -> Result<(), CliError> {
    fs::write(p, text).map_err(CliError::io(p))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CacheEntry {
    split: Split,
    name: String,
    label: u8,
    cube: String,
    mask: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CacheIndex {
    grid: WavelengthGrid,
    moved: Vec<String>,
    items: Vec<CacheEntry>,
}

const INDEX: &str = "index.json";
const SCALING: &str = "scaling.json";

fn write_cache(cfg: &RunConfig, data: &Prepared, out: &mut dyn Write) -> Result<(), CliError> {
    let dir = cfg.cache_dir();
    if dir.exists() {
        fs::remove_dir_all(&dir).map_err(CliError::io(&dir))?;
    }
    create_dir(&dir)?;
    let mut items = Vec::new();
    for (tag, ds) in [("train", &data.train), ("test", &data.test)] {
        for (i, item) in ds.items.iter().enumerate() {
            let cube = format!("{tag}_{i:04}.hsic");
            write_hsic(&dir.join(&cube), item.data.features())?;
            let mask = match &item.mask {
                Some(m) => {
                    let file = format!("{tag}_{i:04}_mask.hsic");
                    let values = m.values().iter().map(|&v| f32::from(v)).collect();
                    write_hsic(&dir.join(&file), &FeatureCube::new(1, m.height(), m.width(), values)?)?;
                    Some(file)
                }
                None => None,
            };
            items.push(CacheEntry { split: ds.split, name: item.name.clone(), label: item.label, cube, mask });
        }
    }
    let index = CacheIndex { grid: data.stats.grid.clone(), moved: data.moved.clone(), items };
    write_text(&dir.join(INDEX), &(serde_json::to_string_pretty(&index).expect("index serialises") + "\n"))?;
    data.stats.save(&dir.join(SCALING))?;
    let mut manifest = Manifest::new(cfg);
    manifest.hash_tree(&dir)?;
    manifest.write(&dir.join("manifest.json"))?;
    say(out, &format!("cached {} train and {} test cubes in {}", data.train.len(), data.test.len(), dir.display()));
    Ok(())
}

fn read_cache(cfg: &RunConfig) -> Result<Prepared, CliError> {
    let dir = cfg.cache_dir();
    let index_path = dir.join(INDEX);
    if !index_path.is_file() {
        return Err(CliError::MissingArtifact { path: index_path, step: "synth" });
    }
    let bad = |path: &Path, reason: String| CliError::BadArtifact { path: path.to_path_buf(), reason };
    let manifest = Manifest::read(&dir.join("manifest.json"))?;
    for (name, digest) in &manifest.artifacts {
        let p = dir.join(name);
        if !p.is_file() {
            return Err(CliError::MissingArtifact { path: p, step: "synth" });
        }
        if &sha256_file(&p)? != digest {
            return Err(bad(&p, "checksum mismatch; rerun `synth`".into()));
        }
    }
    let text = fs::read_to_string(&index_path).map_err(CliError::io(&index_path))?;
    let index: CacheIndex = serde_json::from_str(&text).map_err(|e| bad(&index_path, e.to_string()))?;
    let stats = MinMaxStats::load(&dir.join(SCALING))?;
    if stats.grid != index.grid {
        return Err(bad(&index_path, "grid differs from scaling stats".into()));
    }
    let config_grid = cfg.grid.build()?;
    if config_grid != index.grid {
        return Err(bad(&index_path, "cache was built with a different grid; rerun `synth`".into()));
    }
    let grid = Arc::new(index.grid);
    let mut train = LabeledDataset::new(Split::Train);
    let mut test = LabeledDataset::new(Split::Test);
    for e in index.items {
        let cube = SpectralCube::new(read_hsic(&dir.join(&e.cube))?, Arc::clone(&grid))?;
        let mask = match &e.mask {
            Some(f) => {
                let m = read_hsic(&dir.join(f))?;
                if m.channels() != 1 {
                    return Err(bad(&dir.join(f), "mask must have one channel".into()));
                }
                Some(Mask::new(m.height(), m.width(), m.values().iter().map(|&v| u8::from(v > 0.5)).collect())?)
            }
            None => None,
        };
        let item = LabeledItem { name: e.name, data: cube, label: e.label, mask };
        match e.split {
            Split::Train => train.items.push(item),
            Split::Test => test.items.push(item),
        }
    }
    Ok(Prepared { train, test, stats, moved: index.moved })
}

fn artifact_path(cfg: &RunConfig, method: Method) -> Option<PathBuf> {
    let dir = cfg.method_dir(method);
    match method {
        Method::Origin => None,
        Method::Fi | Method::Pi => Some(dir.join("ranking.json")),
        Method::Pca => Some(dir.join("pca.bin")),
    }
}

fn load_artifact(cfg: &RunConfig, method: Method) -> Result<Option<Artifact>, CliError> {
    let Some(path) = artifact_path(cfg, method) else {
        return Ok(None);
    };
    if !path.is_file() {
        return Err(CliError::MissingArtifact { path, step: "rank" });
    }
    let c = Some(cfg.grid.channels);
    Ok(Some(match method {
        Method::Pca => Artifact::Pca(load_pca(&path, c)?),
        _ => Artifact::Ranking(load_ranking(&path, c)?),
    }))
}

fn load_net(cfg: &RunConfig, method: Method, channels: usize) -> Result<ScorerNet<f32>, CliError> {
    let path = cfg.method_dir(method).join("weights.bin");
    if !path.is_file() {
        return Err(CliError::MissingArtifact { path, step: "train" });
    }
    Ok(load_weights(&path, Some(channels))?)
}

fn update_manifest(cfg: &RunConfig, method: Method) -> Result<(), CliError> {
    let dir = cfg.method_dir(method);
    let mut m = Manifest::new(cfg);
    m.config["method"] = serde_json::Value::String(method.key().into());
    m.hash_tree(&dir)?;
    let cache = cfg.cache_dir().join("manifest.json");
    if cache.is_file() {
        m.artifacts.insert("../cache/manifest.json".into(), sha256_file(&cache)?);
    }
    m.write(&dir.join("manifest.json"))
}

fn rank(cfg: &RunConfig, method: Method, data: &Prepared, out: &mut dyn Write) -> Result<(), CliError> {
    let artifact = stages::rank(cfg, method, &data.train)?;
    save_rank(cfg, method, data, &artifact, out)
}

fn save_rank(cfg: &RunConfig, method: Method, data: &Prepared, artifact: &Artifact, out: &mut dyn Write) -> Result<(), CliError> {
    let dir = cfg.method_dir(method);
    create_dir(&dir)?;
    let points = data.stats.grid.points();
    let mut msg = String::new();
    match artifact {
        Artifact::Ranking(r) => {
            save_ranking(&dir.join("ranking.json"), r)?;
            let _ = writeln!(msg, "{} top-{} channels:", method.label(), cfg.top_n);
            for (i, e) in r.entries().iter().take(cfg.top_n).enumerate() {
                let _ = writeln!(msg, "  {:>2}. channel {:>3} {:>8.2} nm  score {:.6}", i + 1, e.channel, points[e.channel], e.importance);
            }
        }
        Artifact::Pca(m) => {
            save_pca(&dir.join("pca.bin"), m)?;
            let ratio = m.explained_variance_ratio();
            let _ = writeln!(msg, "PCA eigenvalues (descending):");
            for (i, (ev, r)) in m.eigenvalues().iter().zip(&ratio).take(cfg.top_n).enumerate() {
                let _ = writeln!(msg, "  {:>2}. {:.6e}  explained {:.4}", i + 1, ev, r);
            }
        }
    }
    say(out, &msg);
    update_manifest(cfg, method)
}

fn train(cfg: &RunConfig, method: Method, data: &Prepared, out: &mut dyn Write) -> Result<(), CliError> {
    let artifact = load_artifact(cfg, method)?;
    let reducer = stages::build_reducer(cfg, method, artifact.as_ref())?;
    let reduced = stages::reduce_all(&reducer, &data.train)?;
    let (net, history) = stages::train_scorer(cfg, &reduced)?;
    let dir = cfg.method_dir(method);
    create_dir(&dir)?;
    save_weights(&dir.join("weights.bin"), &net)?;
    let mut csv = String::from("epoch,loss\n");
    for (e, l) in history.iter().enumerate() {
        let _ = writeln!(csv, "{},{}", e + 1, l);
    }
    write_text(&dir.join("loss.csv"), &csv)?;
    let last = history.last().map_or("n/a".to_string(), |l| format!("{l:.6}"));
    say(out, &format!("{}: trained on {} channels for {} epochs, final loss {last}", method.label(), net.n_channels(), history.len()));
    update_manifest(cfg, method)
}

fn eval(cfg: &RunConfig, method: Method, data: &Prepared, out: &mut dyn Write) -> Result<ScoreReport, CliError> {
    let artifact = load_artifact(cfg, method)?;
    let reducer = stages::build_reducer(cfg, method, artifact.as_ref())?;
    let net = load_net(cfg, method, reducer.output_channels(cfg.grid.channels))?;
    let report = stages::evaluate_scorer(cfg, method, &net, &reducer, &data.test)?;
    let dir = cfg.method_dir(method);
    report.write_csv(&dir.join("eval.csv"))?;
    report.write_json(&dir.join("eval.json"))?;
    say(out, &format!("{}\n{}", ScoreReport::CSV_HEADER, report.csv_row()));
    update_manifest(cfg, method)?;
    Ok(report)
}

/// Returns the method report and the Origin baseline it was compared with.
fn bench(cfg: &RunConfig, method: Method, data: &Prepared, out: &mut dyn Write) -> Result<(LatencyReport, LatencyReport), CliError> {
    let artifact = load_artifact(cfg, method)?;
    let reducer = stages::build_reducer(cfg, method, artifact.as_ref())?;
    let net = load_net(cfg, method, reducer.output_channels(cfg.grid.channels))?;
    let inputs = stages::bench_inputs(cfg, &data.test);
    let report = stages::bench_method(cfg, method.label(), &net, &reducer, &inputs)?;
    let baseline = if method == Method::Origin {
        report.clone()
    } else {
        let reference = stages::reference_net(cfg, cfg.grid.channels)?;
        stages::bench_method(cfg, Method::Origin.label(), &reference, &spectra_core::reduction::Reducer::Identity, &inputs)?
    };
    let ratio = speedup(&baseline, &report)?;
    let dir = cfg.method_dir(method);
    let rows = if method == Method::Origin { vec![report.clone()] } else { vec![baseline.clone(), report.clone()] };
    write_csv(&dir.join("bench.csv"), &rows)?;
    report.write_json(&dir.join("bench.json"))?;
    write_text(&dir.join("speedup.csv"), &format!("method,baseline,speedup\n{},{},{ratio:.4}\n", report.method, baseline.method))?;
    say(out, &format!("{} {:.6} s/sample (Origin {:.6}), speedup {ratio:.2}x", report.method, report.mean, baseline.mean));
    Ok((report, baseline))
}

fn plot(cfg: &RunConfig, method: Method, out: &mut dyn Write) -> Result<(), CliError> {
    if !method.is_selection() {
        return Err(CliError::Usage(format!("plot needs a channel ranking; method `{method}` has none")));
    }
    let Some(Artifact::Ranking(r)) = load_artifact(cfg, method)? else {
        unreachable!("selection methods load rankings")
    };
    let grid = cfg.grid.build()?;
    let svg = importance_svg(&r, &grid, cfg.top_n, &format!("{} channel importance, {}", method.label(), cfg.dataset.class))?;
    let path = cfg.method_dir(method).join("importance.svg");
    write_text(&path, &svg)?;
    say(out, &format!("wrote {}", path.display()));
    update_manifest(cfg, method)
}

/// synth, then rank, train, eval and bench for each method, then plots,
/// a summary table and a run manifest for the whole class directory.
fn pipeline(cfg: &RunConfig, methods: &[Method], out: &mut dyn Write) -> Result<(), CliError> {
    let data = stages::prepare(cfg)?;
    write_cache(cfg, &data, out)?;
    let mut summary = String::from("method,auroc_percent,sec_per_sample,speedup\n");
    for &m in methods {
        if m != Method::Origin {
            rank(cfg, m, &data, out)?;
        }
        train(cfg, m, &data, out)?;
        let report = eval(cfg, m, &data, out)?;
        let (lat, base) = bench(cfg, m, &data, out)?;
        if m.is_selection() {
            plot(cfg, m, out)?;
        }
        update_manifest(cfg, m)?;
        let _ = writeln!(summary, "{},{:.1},{:.9},{:.4}", m.label(), report.auroc_percent, lat.mean, speedup(&base, &lat)?);
    }
    let class_dir = cfg.class_dir();
    write_text(&class_dir.join("summary.csv"), &summary)?;
    let mut manifest = Manifest::new(cfg);
    manifest.config["method"] = serde_json::Value::String(methods.iter().map(|m| m.key()).collect::<Vec<_>>().join(","));
    manifest.hash_tree(&class_dir)?;
    manifest.write(&class_dir.join("manifest.json"))?;
    say(out, &format!("run manifest: {}", class_dir.join("manifest.json").display()));
    Ok(())
}
