use std::path::Path;

use super::DataError;

/// Interleaved `H x W x 3` RGB image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    height: usize,
    width: usize,
    values: Vec<f32>,
}

impl RgbImage {
    pub fn new(height: usize, width: usize, values: Vec<f32>) -> Result<Self, DataError> {
        if height == 0 || width == 0 {
            return Err(DataError::ZeroDimension(height, width));
        }
        if values.len() != height * width * 3 {
            return Err(DataError::ShapeMismatch { channels: 3, height, width, len: values.len() });
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(DataError::Corrupt(format!("RGB value {v} outside [0, 1]")));
        }
        Ok(Self { height, width, values })
    }

    pub fn from_rgb8(height: usize, width: usize, bytes: &[u8]) -> Result<Self, DataError> {
        Self::new(height, width, bytes.iter().map(|&b| b as f32 / 255.0).collect())
    }

    pub fn constant(height: usize, width: usize, rgb: [f32; 3]) -> Result<Self, DataError> {
        let values = (0..height * width).flat_map(|_| rgb).collect();
        Self::new(height, width, values)
    }

    /// Decodes an image file; grayscale inputs are replicated to three channels.
    pub fn open(path: &Path) -> Result<Self, DataError> {
        let decoded = ::image::ImageReader::open(path)
            .and_then(|r| r.with_guessed_format())
            .map_err(|e| DataError::Decode { path: path.to_path_buf(), reason: e.to_string() })?
            .decode()
            .map_err(|e| DataError::Decode { path: path.to_path_buf(), reason: e.to_string() })?;
        let rgb = decoded.to_rgb8();
        Self::from_rgb8(rgb.height() as usize, rgb.width() as usize, rgb.as_raw())
    }

    /// Writes an 8-bit PNG (values rounded to the nearest code).
    pub fn save_png(&self, path: &Path) -> Result<(), DataError> {
        let bytes: Vec<u8> = self.values.iter().map(|v| (v * 255.0).round() as u8).collect();
        ::image::save_buffer(path, &bytes, self.width as u32, self.height as u32, ::image::ColorType::Rgb8)
            .map_err(|e| DataError::Decode { path: path.to_path_buf(), reason: e.to_string() })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    #[inline]
    pub fn pixel(&self, y: usize, x: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.values[i], self.values[i + 1], self.values[i + 2]]
    }
}

/// Binary pixel mask (`1` = anomalous).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    height: usize,
    width: usize,
    values: Vec<u8>,
}

impl Mask {
    pub fn new(height: usize, width: usize, values: Vec<u8>) -> Result<Self, DataError> {
        if values.len() != height * width {
            return Err(DataError::ShapeMismatch { channels: 1, height, width, len: values.len() });
        }
        Ok(Self { height, width, values: values.into_iter().map(|v| u8::from(v != 0)).collect() })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self { height, width, values: vec![0; height * width] }
    }

    /// Decodes a ground-truth image; any luma above half scale is anomalous.
    pub fn open(path: &Path) -> Result<Self, DataError> {
        let decoded = ::image::ImageReader::open(path)
            .and_then(|r| r.with_guessed_format())
            .map_err(|e| DataError::Decode { path: path.to_path_buf(), reason: e.to_string() })?
            .decode()
            .map_err(|e| DataError::Decode { path: path.to_path_buf(), reason: e.to_string() })?;
        let luma = decoded.to_luma8();
        let values = luma.as_raw().iter().map(|&v| u8::from(v > 127)).collect();
        Ok(Self { height: luma.height() as usize, width: luma.width() as usize, values })
    }

    pub fn save_png(&self, path: &Path) -> Result<(), DataError> {
        let bytes: Vec<u8> = self.values.iter().map(|&v| v * 255).collect();
        ::image::save_buffer(path, &bytes, self.width as u32, self.height as u32, ::image::ColorType::L8)
            .map_err(|e| DataError::Decode { path: path.to_path_buf(), reason: e.to_string() })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn any(&self) -> bool {
        self.values.iter().any(|&v| v != 0)
    }

    pub fn count(&self) -> usize {
        self.values.iter().filter(|&&v| v != 0).count()
    }
}

// Half-pixel-centre source coordinate, clamped to the valid range, split into
// (lower index, upper index, fraction).
fn source_taps(dst: usize, src_len: usize, dst_len: usize) -> (usize, usize, f64) {
    let scale = src_len as f64 / dst_len as f64;
    let s = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (src_len - 1) as f64);
    let lo = s.floor() as usize;
    let hi = (lo + 1).min(src_len - 1);
    (lo, hi, s - lo as f64)
}

fn bilinear_plane(
    src: impl Fn(usize, usize) -> f64,
    (src_h, src_w): (usize, usize),
    (dst_h, dst_w): (usize, usize),
    mut emit: impl FnMut(usize, usize, f64),
) {
    let cols: Vec<_> = (0..dst_w).map(|x| source_taps(x, src_w, dst_w)).collect();
    for y in 0..dst_h {
        let (y0, y1, fy) = source_taps(y, src_h, dst_h);
        for (x, &(x0, x1, fx)) in cols.iter().enumerate() {
            let top = src(y0, x0) + (src(y0, x1) - src(y0, x0)) * fx;
            let bottom = src(y1, x0) + (src(y1, x1) - src(y1, x0)) * fx;
            emit(y, x, top + (bottom - top) * fy);
        }
    }
}

/// Bilinear resize with half-pixel-centre sampling and edge clamping.
pub fn resize_bilinear(img: &RgbImage, target_h: usize, target_w: usize) -> Result<RgbImage, DataError> {
    if target_h == 0 || target_w == 0 {
        return Err(DataError::ZeroDimension(target_h, target_w));
    }
    let mut values = vec![0.0f32; target_h * target_w * 3];
    for ch in 0..3 {
        bilinear_plane(
            |y, x| img.values[(y * img.width + x) * 3 + ch] as f64,
            (img.height, img.width),
            (target_h, target_w),
            |y, x, v| values[(y * target_w + x) * 3 + ch] = v.clamp(0.0, 1.0) as f32,
        );
    }
    RgbImage::new(target_h, target_w, values)
}

/// Resizes a mask bilinearly and re-binarises at 0.5.
pub fn resize_mask(mask: &Mask, target_h: usize, target_w: usize) -> Result<Mask, DataError> {
    if target_h == 0 || target_w == 0 {
        return Err(DataError::ZeroDimension(target_h, target_w));
    }
    let mut values = vec![0u8; target_h * target_w];
    bilinear_plane(
        |y, x| mask.values[y * mask.width + x] as f64,
        (mask.height, mask.width),
        (target_h, target_w),
        |y, x, v| values[y * target_w + x] = u8::from(v >= 0.5),
    );
    Mask::new(target_h, target_w, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grey_ramp(h: usize, w: usize, f: impl Fn(usize, usize) -> f32) -> RgbImage {
        let values = (0..h * w).flat_map(|i| [f(i / w, i % w); 3]).collect();
        RgbImage::new(h, w, values).unwrap()
    }

    #[test]
    fn same_size_is_identity() {
        let img = grey_ramp(5, 7, |y, x| ((y * 7 + x) as f32 / 34.0).min(1.0));
        assert_eq!(resize_bilinear(&img, 5, 7).unwrap(), img);
    }

    #[test]
    fn constant_stays_constant() {
        let img = RgbImage::constant(9, 13, [0.2, 0.6, 0.9]).unwrap();
        let out = resize_bilinear(&img, 4, 21).unwrap();
        for px in out.values().chunks(3) {
            assert_eq!(px, &[0.2, 0.6, 0.9]);
        }
    }

    #[test]
    fn ramp_downsample_matches_hand_evaluation() {
        // v(y, x) = (4y + x) / 15. Downsampling 4 -> 2 samples source
        // coordinate 0.5 and 2.5 on each axis, i.e. the mean of each 2x2 block.
        let img = grey_ramp(4, 4, |y, x| (4 * y + x) as f32 / 15.0);
        let out = resize_bilinear(&img, 2, 2).unwrap();
        let expect = |sy: f64, sx: f64| (4.0 * sy + sx) / 15.0;
        let want = [expect(0.5, 0.5), expect(0.5, 2.5), expect(2.5, 0.5), expect(2.5, 2.5)];
        for (i, w) in want.iter().enumerate() {
            assert!((out.values()[i * 3] as f64 - w).abs() < 1e-6, "{i}: {} vs {w}", out.values()[i * 3]);
        }
    }

    #[test]
    fn zero_target_rejected() {
        let img = RgbImage::constant(2, 2, [0.0; 3]).unwrap();
        assert!(matches!(resize_bilinear(&img, 0, 2), Err(DataError::ZeroDimension(0, 2))));
    }

    #[test]
    fn mask_resize_keeps_blocks() {
        let mut v = vec![0u8; 16];
        for y in 0..2 {
            for x in 0..2 {
                v[y * 4 + x] = 1;
            }
        }
        let m = resize_mask(&Mask::new(4, 4, v).unwrap(), 8, 8).unwrap();
        assert_eq!((m.height(), m.width()), (8, 8));
        assert_eq!(m.count(), 16);
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.png");
        let img = RgbImage::from_rgb8(2, 3, &[0, 51, 102, 153, 204, 255, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12]).unwrap();
        img.save_png(&path).unwrap();
        assert_eq!(RgbImage::open(&path).unwrap(), img);
    }
}
