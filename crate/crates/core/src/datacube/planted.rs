use std::ops::Range;
use std::sync::Arc;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{synthesize_hsi, DataError, FeatureCube, LabeledDataset, LabeledItem, Mask, RgbImage, SpectralCube, Split, WavelengthGrid};
use crate::numeric::RngStream;

/// Synthetic corpus whose anomaly signal lives only in a known channel band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantedConfig {
    pub train: usize,
    pub test: usize,
    pub height: usize,
    pub width: usize,
    pub band_start: usize,
    pub band_width: usize,
    /// Peak value added to band channels at a defect centre.
    pub signal: f32,
    /// Standard deviation of the per-value Gaussian noise.
    pub noise: f32,
    /// Amplitude of the smooth background texture.
    pub texture: f64,
    /// Fraction of images in each split that carry a defect.
    pub anomaly_fraction: f64,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            train: 60,
            test: 40,
            height: 64,
            width: 64,
            band_start: 120,
            band_width: 10,
            signal: 0.2,
            noise: 0.01,
            texture: 0.02,
            anomaly_fraction: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedDataset {
    pub train: LabeledDataset<SpectralCube>,
    pub test: LabeledDataset<SpectralCube>,
    pub band: Range<usize>,
}

/// Generates train and test cubes on `grid`.
///
/// Each image is a smooth low-frequency texture lifted to the grid by the
/// usual spline synthesis, plus i.i.d. noise. Defective images get one
/// ellipse in which every band channel is raised by `signal * (1 - d^2)`,
/// `d` being the normalised distance from the centre; the ellipse is the
/// ground-truth mask, so pixels near its rim carry almost no signal. Image `i` (train first, then test) draws from
/// substream `i` of the seed.
pub fn generate_planted(cfg: &PlantedConfig, grid: &Arc<WavelengthGrid>) -> Result<PlantedDataset, DataError> {
    if cfg.height == 0 || cfg.width == 0 {
        return Err(DataError::ZeroDimension(cfg.height, cfg.width));
    }
    let band = cfg.band_start..cfg.band_start + cfg.band_width;
    if cfg.band_width == 0 || band.end > grid.len() {
        return Err(DataError::InvalidGrid(format!("band {band:?} does not fit {} channels", grid.len())));
    }
    let root = RngStream::new(cfg.seed);
    let mut base_rng = root.substream(u64::MAX);
    let base = [0.42 + 0.06 * base_rng.next_f64(), 0.42 + 0.06 * base_rng.next_f64(), 0.42 + 0.06 * base_rng.next_f64()];

    let make = |split: Split, count: usize, offset: usize| -> Result<LabeledDataset<SpectralCube>, DataError> {
        let defects = (count as f64 * cfg.anomaly_fraction).round() as usize;
        let mut out = LabeledDataset::new(split);
        for i in 0..count {
            let id = offset + i;
            let mut rng = root.substream(id as u64);
            // spread defects evenly through the split
            let label = u8::from((i + 1) * defects / count > i * defects / count);
            let (cube, mask) = planted_image(cfg, grid, base, &band, label == 1, &mut rng)?;
            let name = format!("{}/{}/{id:03}", split_name(split), if label == 1 { "defect" } else { "good" });
            let mask = if label == 1 { Some(mask) } else { None };
            out.items.push(LabeledItem { name, data: cube, label, mask });
        }
        Ok(out)
    };
    let train = make(Split::Train, cfg.train, 0)?;
    let test = make(Split::Test, cfg.test, cfg.train)?;
    Ok(PlantedDataset { train, test, band })
}

fn split_name(s: Split) -> &'static str {
    match s {
        Split::Train => "train",
        Split::Test => "test",
    }
}

fn planted_image(
    cfg: &PlantedConfig,
    grid: &Arc<WavelengthGrid>,
    base: [f64; 3],
    band: &Range<usize>,
    defective: bool,
    rng: &mut RngStream,
) -> Result<(SpectralCube, Mask), DataError> {
    let (h, w) = (cfg.height, cfg.width);
    let fy = 1.0 + rng.index(3) as f64;
    let fx = 1.0 + rng.index(3) as f64;
    let phase = rng.uniform(0.0, std::f64::consts::TAU);
    let tint = [rng.uniform(0.5, 1.0), rng.uniform(0.5, 1.0), rng.uniform(0.5, 1.0)];
    let mut rgb = Vec::with_capacity(h * w * 3);
    for y in 0..h {
        for x in 0..w {
            let t = cfg.texture * (std::f64::consts::TAU * (fy * y as f64 / h as f64 + fx * x as f64 / w as f64) + phase).sin();
            for c in 0..3 {
                rgb.push((base[c] + t * tint[c]) as f32);
            }
        }
    }
    let cube = synthesize_hsi(&RgbImage::new(h, w, rgb)?, grid)?;

    let mut mask = vec![0u8; h * w];
    let mut gain = vec![0f32; h * w];
    if defective {
        let scale = h.min(w) as f64 / 64.0;
        let ry = rng.uniform(8.0, 16.0) * scale;
        let rx = rng.uniform(8.0, 16.0) * scale;
        let cy = rng.uniform(ry, h as f64 - ry);
        let cx = rng.uniform(rx, w as f64 - rx);
        for y in 0..h {
            for x in 0..w {
                let dy = (y as f64 + 0.5 - cy) / ry;
                let dx = (x as f64 + 0.5 - cx) / rx;
                let d2 = dy * dy + dx * dx;
                if d2 <= 1.0 {
                    mask[y * w + x] = 1;
                    gain[y * w + x] = (1.0 - d2) as f32;
                }
            }
        }
    }

    let noise = Normal::new(0.0f32, cfg.noise.max(0.0)).map_err(|e| DataError::Corrupt(e.to_string()))?;
    let pixels = h * w;
    let mut values = cube.into_features().into_values();
    for (c, plane) in values.chunks_exact_mut(pixels).enumerate() {
        let in_band = band.contains(&c);
        for (p, v) in plane.iter_mut().enumerate() {
            let mut x = *v + noise.sample(rng);
            if in_band {
                x += cfg.signal * gain[p];
            }
            *v = x.clamp(0.0, 1.0);
        }
    }
    let cube = SpectralCube::new(FeatureCube::new(grid.len(), h, w, values)?, grid.clone())?;
    Ok((cube, Mask::new(h, w, mask)?))
}
