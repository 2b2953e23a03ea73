use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{DataError, FeatureCube, SpectralCube, WavelengthGrid};

/// Per-channel minimum and maximum observed on the training cubes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxStats {
    pub grid: WavelengthGrid,
    pub min: Vec<f32>,
    pub max: Vec<f32>,
}

impl MinMaxStats {
    pub fn save(&self, path: &Path) -> Result<(), DataError> {
        fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, DataError> {
        let stats: Self = serde_json::from_slice(&fs::read(path)?)?;
        stats.grid.validate()?;
        if stats.min.len() != stats.grid.len() || stats.max.len() != stats.grid.len() {
            return Err(DataError::ChannelMismatch { expected: stats.grid.len(), got: stats.min.len() });
        }
        Ok(stats)
    }
}

pub fn minmax_fit<'a>(cubes: impl IntoIterator<Item = &'a SpectralCube>) -> Result<MinMaxStats, DataError> {
    let mut iter = cubes.into_iter();
    let first = iter.next().ok_or(DataError::EmptyTrainingSet)?;
    let grid = Arc::clone(first.grid());
    let c = first.channels();
    let mut min = vec![f32::INFINITY; c];
    let mut max = vec![f32::NEG_INFINITY; c];
    for cube in std::iter::once(first).chain(iter) {
        if **cube.grid() != *grid {
            return Err(DataError::GridMismatch);
        }
        for ch in 0..c {
            for &v in cube.plane(ch) {
                min[ch] = min[ch].min(v);
                max[ch] = max[ch].max(v);
            }
        }
    }
    Ok(MinMaxStats { grid: (*grid).clone(), min, max })
}

/// Scales each channel to `(v - min) / (max - min)`, clamped to `[0, 1]`.
/// Channels with `max == min` map to zero.
pub fn minmax_apply(cube: &SpectralCube, stats: &MinMaxStats) -> Result<SpectralCube, DataError> {
    if cube.channels() != stats.min.len() {
        return Err(DataError::ChannelMismatch { expected: stats.min.len(), got: cube.channels() });
    }
    let n = cube.height() * cube.width();
    let mut values = cube.values().to_vec();
    for (ch, plane) in values.chunks_mut(n).enumerate() {
        let (lo, hi) = (stats.min[ch] as f64, stats.max[ch] as f64);
        let span = hi - lo;
        for v in plane {
            *v = if span > 0.0 { ((*v as f64 - lo) / span).clamp(0.0, 1.0) as f32 } else { 0.0 };
        }
    }
    SpectralCube::new(FeatureCube::new(cube.channels(), cube.height(), cube.width(), values)?, Arc::clone(cube.grid()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(values: Vec<f32>, grid: &Arc<WavelengthGrid>, n: usize) -> SpectralCube {
        SpectralCube::new(FeatureCube::new(grid.len(), 1, n, values).unwrap(), Arc::clone(grid)).unwrap()
    }

    fn two_channel_grid() -> Arc<WavelengthGrid> {
        Arc::new(WavelengthGrid::new(vec![400.0, 700.0], [450.0, 550.0, 650.0]).unwrap())
    }

    #[test]
    fn scales_ramp_and_zeroes_constant_channel() {
        let g = two_channel_grid();
        // channel 0: {0, .5, 1} * 0.1 scale; channel 1 constant.
        let c = cube(vec![0.0, 0.05, 0.1, 0.3, 0.3, 0.3], &g, 3);
        let stats = minmax_fit([&c]).unwrap();
        let s = minmax_apply(&c, &stats).unwrap();
        assert_eq!(&s.values()[..3], &[0.0, 0.5, 1.0]);
        assert_eq!(&s.values()[3..], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn inference_values_clamp() {
        // 0.6 against a training range of (0, 0.5) scales to 1.2.
        let g = two_channel_grid();
        let train = cube(vec![0.0, 0.5, 0.2, 0.2], &g, 2);
        let stats = minmax_fit([&train]).unwrap();
        let probe = cube(vec![0.6, 0.0, 0.2, 0.2], &g, 2);
        assert_eq!(minmax_apply(&probe, &stats).unwrap().values()[0], 1.0);
    }

    #[test]
    fn empty_training_set() {
        assert!(matches!(minmax_fit(std::iter::empty()), Err(DataError::EmptyTrainingSet)));
    }

    #[test]
    fn stats_round_trip() {
        let g = two_channel_grid();
        let stats = minmax_fit([&cube(vec![0.1, 0.7, 0.2, 0.9], &g, 2)]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.json");
        stats.save(&p).unwrap();
        assert_eq!(MinMaxStats::load(&p).unwrap(), stats);
    }
}
