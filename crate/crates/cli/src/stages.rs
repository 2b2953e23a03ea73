//! In-memory pipeline stages. Commands wrap these with artifact I/O.

use std::collections::BTreeMap;
use std::sync::Arc;

use spectra_core::bench::{time_pipeline, LatencyReport};
use spectra_core::datacube::{
    generate_planted, load_mvtec_class, minmax_apply, minmax_fit, move_anomalies_to_train, resize_bilinear, resize_mask,
    sample_pixels, synthesize_hsi, FeatureCube, LabeledDataset, MinMaxStats, SpectralCube,
};
use spectra_core::evalmetrics::{evaluate, ScoreReport};
use spectra_core::numeric::{Matrix, RngStream};
use spectra_core::reduction::{
    feature_importance, fit_pca, fit_random_forest, permutation_importance, selected_channel_set, ChannelRanking, Forest,
    PcaModel, Reducer,
};
use spectra_core::scorer::{init_model, train, ScorerNet};

use crate::config::{Method, RunConfig, Source};
use crate::error::CliError;

/// Independent randomness consumers. The discriminant is the substream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Split = 1,
    Planted = 2,
    Sample = 3,
    Validation = 4,
    Forest = 5,
    Permutation = 6,
    Init = 7,
    Shuffle = 8,
}

impl Stage {
    pub const ALL: [Stage; 8] =
        [Stage::Split, Stage::Planted, Stage::Sample, Stage::Validation, Stage::Forest, Stage::Permutation, Stage::Init, Stage::Shuffle];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Split => "split",
            Stage::Planted => "planted",
            Stage::Sample => "sample",
            Stage::Validation => "validation",
            Stage::Forest => "forest",
            Stage::Permutation => "permutation",
            Stage::Init => "init",
            Stage::Shuffle => "shuffle",
        }
    }
}

pub fn stage_seed(seed: u64, stage: Stage) -> u64 {
    RngStream::new(seed).substream(stage as u64).seed()
}

pub fn stage_seeds(seed: u64) -> BTreeMap<String, u64> {
    Stage::ALL.iter().map(|&s| (s.name().to_string(), stage_seed(seed, s))).collect()
}

/// Scaled train and test cubes plus what is needed to reproduce them.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: LabeledDataset<SpectralCube>,
    pub test: LabeledDataset<SpectralCube>,
    pub stats: MinMaxStats,
    /// Test items moved into training.
    pub moved: Vec<String>,
}

/// Loads or generates the dataset, synthesises cubes and min-max scales
/// them with statistics from the training split.
pub fn prepare(cfg: &RunConfig) -> Result<Prepared, CliError> {
    let grid = Arc::new(cfg.grid.build()?);
    let (train, test, moved) = match cfg.dataset.source {
        Source::Planted => {
            let planted = spectra_core::datacube::PlantedConfig { seed: stage_seed(cfg.seed, Stage::Planted), ..cfg.planted.clone() };
            let d = generate_planted(&planted, &grid)?;
            (d.train, d.test, Vec::new())
        }
        Source::Mvtec => {
            let (mut train, mut test) = load_mvtec_class(&cfg.dataset.root, &cfg.dataset.class)?;
            if train.is_empty() {
                return Err(spectra_core::datacube::DataError::EmptyTrainingSet.into());
            }
            let mut rng = RngStream::new(stage_seed(cfg.seed, Stage::Split));
            let moved = move_anomalies_to_train(&mut train, &mut test, cfg.dataset.anomaly_split, &mut rng);
            let size = cfg.dataset.size;
            let lift = |ds: LabeledDataset<_>| -> Result<LabeledDataset<SpectralCube>, CliError> {
                let mut out = LabeledDataset::new(ds.split);
                for mut item in ds.items {
                    let img = if size > 0 { resize_bilinear(&item.data, size, size)? } else { item.data.clone() };
                    if size > 0 {
                        item.mask = item.mask.map(|m| resize_mask(&m, size, size)).transpose()?;
                    }
                    out.items.push(spectra_core::datacube::LabeledItem {
                        name: item.name,
                        data: synthesize_hsi(&img, &grid)?,
                        label: item.label,
                        mask: item.mask,
                    });
                }
                Ok(out)
            };
            (lift(train)?, lift(test)?, moved)
        }
    };
    if train.is_empty() {
        return Err(spectra_core::datacube::DataError::EmptyTrainingSet.into());
    }
    let stats = minmax_fit(train.items.iter().map(|i| &i.data))?;
    let train = train.try_map(|c| minmax_apply(&c, &stats))?;
    let test = test.try_map(|c| minmax_apply(&c, &stats))?;
    Ok(Prepared { train, test, stats, moved })
}

/// The reduction artifact a method learns on the training split.
#[derive(Debug, Clone)]
pub enum Artifact {
    Ranking(ChannelRanking),
    Pca(PcaModel),
}

pub fn pixel_table(cfg: &RunConfig, train: &LabeledDataset<SpectralCube>) -> Result<(Matrix, Vec<u8>), CliError> {
    let rng = RngStream::new(stage_seed(cfg.seed, Stage::Sample));
    Ok(sample_pixels(train, cfg.ranking.pixels_per_image, cfg.ranking.balance, &rng)?)
}

pub fn fit_forest(cfg: &RunConfig, x: &Matrix, y: &[u8]) -> Result<Forest, CliError> {
    let fc = spectra_core::reduction::ForestConfig { seed: stage_seed(cfg.seed, Stage::Forest), ..cfg.forest.clone() };
    Ok(fit_random_forest(x, y, &fc)?)
}

/// FI or PI ranking from an already fitted forest.
pub fn rank_with_forest(
    cfg: &RunConfig,
    method: Method,
    forest: &Forest,
    train: &LabeledDataset<SpectralCube>,
) -> Result<ChannelRanking, CliError> {
    match method {
        Method::Fi => Ok(feature_importance(forest)),
        Method::Pi => {
            let vrng = RngStream::new(stage_seed(cfg.seed, Stage::Validation));
            let (xv, yv) = sample_pixels(train, cfg.ranking.validation_pixels_per_image, cfg.ranking.balance, &vrng)?;
            let prng = RngStream::new(stage_seed(cfg.seed, Stage::Permutation));
            Ok(permutation_importance(forest, &xv, &yv, cfg.ranking.pi_repeats, &prng)?)
        }
        other => Err(CliError::Usage(format!("method `{other}` does not produce a ranking"))),
    }
}

pub fn rank(cfg: &RunConfig, method: Method, train: &LabeledDataset<SpectralCube>) -> Result<Artifact, CliError> {
    if method == Method::Origin {
        return Err(CliError::Usage("method `origin` has nothing to rank".into()));
    }
    let (x, y) = pixel_table(cfg, train)?;
    if method == Method::Pca {
        return Ok(Artifact::Pca(fit_pca(&x)?));
    }
    let forest = fit_forest(cfg, &x, &y)?;
    Ok(Artifact::Ranking(rank_with_forest(cfg, method, &forest, train)?))
}

pub fn build_reducer(cfg: &RunConfig, method: Method, artifact: Option<&Artifact>) -> Result<Reducer, CliError> {
    match (method, artifact) {
        (Method::Origin, _) => Ok(Reducer::Identity),
        (Method::Fi | Method::Pi, Some(Artifact::Ranking(r))) => Ok(Reducer::Select(selected_channel_set(r, cfg.top_n)?)),
        (Method::Pca, Some(Artifact::Pca(m))) => {
            if cfg.top_n > m.channels() {
                return Err(CliError::Config(format!("top_n {} exceeds {} PCA components", cfg.top_n, m.channels())));
            }
            Ok(Reducer::Pca { model: m.clone(), components: cfg.top_n })
        }
        (m, _) => Err(CliError::Usage(format!("method `{m}` needs its rank artifact"))),
    }
}

pub fn reduce_all(reducer: &Reducer, ds: &LabeledDataset<SpectralCube>) -> Result<LabeledDataset<FeatureCube>, CliError> {
    let mut out = LabeledDataset::new(ds.split);
    for item in &ds.items {
        let reduced = reducer.apply(item.data.features())?;
        let v = reduced.view();
        let cube = FeatureCube::new(v.channels, v.height, v.width, v.data.to_vec())?;
        out.items.push(spectra_core::datacube::LabeledItem { name: item.name.clone(), data: cube, label: item.label, mask: None });
    }
    Ok(out)
}

/// Trains a fresh scorer on reduced training cubes. Returns the net and the
/// per-epoch mean loss.
pub fn train_scorer(cfg: &RunConfig, train_set: &LabeledDataset<FeatureCube>) -> Result<(ScorerNet<f32>, Vec<f64>), CliError> {
    let first = train_set.items.first().ok_or(spectra_core::datacube::DataError::EmptyTrainingSet)?;
    let net = init_model::<f32>(first.data.channels(), stage_seed(cfg.seed, Stage::Init))?;
    let views: Vec<_> = train_set.items.iter().map(|i| i.data.view()).collect();
    let labels = train_set.labels();
    let tc = spectra_core::scorer::TrainConfig { seed: stage_seed(cfg.seed, Stage::Shuffle), ..cfg.train.clone() };
    Ok(train(net, &views, &labels, &tc)?)
}

pub fn score_one(net: &ScorerNet<f32>, reducer: &Reducer, cube: &FeatureCube) -> Result<f64, CliError> {
    let reduced = reducer.apply(cube)?;
    Ok(net.predict(reduced.view())?)
}

pub fn evaluate_scorer(
    cfg: &RunConfig,
    method: Method,
    net: &ScorerNet<f32>,
    reducer: &Reducer,
    test: &LabeledDataset<SpectralCube>,
) -> Result<ScoreReport, CliError> {
    Ok(evaluate(&cfg.dataset.class, method.label(), test, |c: &SpectralCube| score_one(net, reducer, c.features()))?)
}

/// Timed reduce-then-score over the first `bench.max_cubes` test cubes.
pub fn bench_method(
    cfg: &RunConfig,
    label: &str,
    net: &ScorerNet<f32>,
    reducer: &Reducer,
    cubes: &[&FeatureCube],
) -> Result<LatencyReport, CliError> {
    let timed = time_pipeline(label, cubes, cfg.bench.warmup, cfg.bench.reps, |c: &&FeatureCube| score_one(net, reducer, c))?;
    Ok(timed.report)
}

pub fn bench_inputs<'a>(cfg: &RunConfig, test: &'a LabeledDataset<SpectralCube>) -> Vec<&'a FeatureCube> {
    let n = if cfg.bench.max_cubes == 0 { test.len() } else { cfg.bench.max_cubes.min(test.len()) };
    test.items[..n].iter().map(|i| i.data.features()).collect()
}

/// Untrained full-channel net used as the Origin latency baseline.
pub fn reference_net(cfg: &RunConfig, channels: usize) -> Result<ScorerNet<f32>, CliError> {
    Ok(init_model::<f32>(channels, stage_seed(cfg.seed, Stage::Init))?)
}
