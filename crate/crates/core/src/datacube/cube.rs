use std::sync::Arc;

use super::{DataError, WavelengthGrid};

/// Borrowed channel-major `C x H x W` block of values.
#[derive(Debug, Clone, Copy)]
pub struct CubeView<'a, T> {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: &'a [T],
}

impl<'a, T> CubeView<'a, T> {
    pub fn new(channels: usize, height: usize, width: usize, data: &'a [T]) -> Result<Self, DataError> {
        if data.len() != channels * height * width {
            return Err(DataError::ShapeMismatch { channels, height, width, len: data.len() });
        }
        Ok(Self { channels, height, width, data })
    }

    pub fn plane(&self, c: usize) -> &'a [T] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }
}

/// Owned channel-major cube without wavelength metadata: the output of a
/// channel reduction, or a raw cache payload.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureCube {
    channels: usize,
    height: usize,
    width: usize,
    values: Vec<f32>,
}

impl FeatureCube {
    pub fn new(channels: usize, height: usize, width: usize, values: Vec<f32>) -> Result<Self, DataError> {
        if values.len() != channels * height * width {
            return Err(DataError::ShapeMismatch { channels, height, width, len: values.len() });
        }
        Ok(Self { channels, height, width, values })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f32] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.pixels();
        &self.values[c * n..(c + 1) * n]
    }

    /// Spectrum of one pixel (`y * width + x`), gathered across channels.
    pub fn spectrum(&self, pixel: usize) -> impl Iterator<Item = f32> + '_ {
        let n = self.pixels();
        (0..self.channels).map(move |c| self.values[c * n + pixel])
    }

    pub fn view(&self) -> CubeView<'_, f32> {
        CubeView { channels: self.channels, height: self.height, width: self.width, data: &self.values }
    }

    /// New cube whose channel `i` is channel `indices[i]` of `self`.
    pub fn gather(&self, indices: &[usize]) -> Result<FeatureCube, DataError> {
        let n = self.pixels();
        let mut values = Vec::with_capacity(indices.len() * n);
        for &c in indices {
            if c >= self.channels {
                return Err(DataError::ChannelMismatch { expected: self.channels, got: c + 1 });
            }
            values.extend_from_slice(self.plane(c));
        }
        Ok(FeatureCube { channels: indices.len(), height: self.height, width: self.width, values })
    }
}

/// Reflectance cube tied to its wavelength grid; channel `c` samples
/// `grid.points()[c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCube {
    cube: FeatureCube,
    grid: Arc<WavelengthGrid>,
}

impl SpectralCube {
    pub fn new(cube: FeatureCube, grid: Arc<WavelengthGrid>) -> Result<Self, DataError> {
        if cube.channels != grid.len() {
            return Err(DataError::ChannelMismatch { expected: grid.len(), got: cube.channels });
        }
        if let Some(v) = cube.values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(DataError::Corrupt(format!("reflectance {v} outside [0, 1]")));
        }
        Ok(Self { cube, grid })
    }

    pub fn grid(&self) -> &Arc<WavelengthGrid> {
        &self.grid
    }

    pub fn features(&self) -> &FeatureCube {
        &self.cube
    }

    pub fn into_features(self) -> FeatureCube {
        self.cube
    }

    pub fn channels(&self) -> usize {
        self.cube.channels
    }

    pub fn height(&self) -> usize {
        self.cube.height
    }

    pub fn width(&self) -> usize {
        self.cube.width
    }

    pub fn values(&self) -> &[f32] {
        &self.cube.values
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        self.cube.plane(c)
    }

    pub fn view(&self) -> CubeView<'_, f32> {
        self.cube.view()
    }
}
