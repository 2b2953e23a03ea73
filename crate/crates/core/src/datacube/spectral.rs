use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{DataError, FeatureCube, RgbImage, SpectralCube};

pub const DEFAULT_START_NM: f64 = 300.0;
pub const DEFAULT_END_NM: f64 = 1100.0;
pub const DEFAULT_CHANNELS: usize = 300;
/// Wavelengths (nm) assigned to the blue, green and red samples.
pub const DEFAULT_ANCHORS: [f64; 3] = [450.0, 550.0, 650.0];

/// Strictly increasing wavelength sample points plus the three RGB anchors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WavelengthGrid {
    points: Vec<f64>,
    /// Blue, green, red anchor wavelengths, strictly increasing.
    anchors: [f64; 3],
}

impl Default for WavelengthGrid {
    fn default() -> Self {
        Self::linear(DEFAULT_START_NM, DEFAULT_END_NM, DEFAULT_CHANNELS).expect("default grid is valid")
    }
}

impl WavelengthGrid {
    pub fn new(points: Vec<f64>, anchors: [f64; 3]) -> Result<Self, DataError> {
        let grid = Self { points, anchors };
        grid.validate()?;
        Ok(grid)
    }

    /// `count` points linearly spaced over `[start, end]` with default anchors.
    pub fn linear(start: f64, end: f64, count: usize) -> Result<Self, DataError> {
        Self::linear_with_anchors(start, end, count, DEFAULT_ANCHORS)
    }

    pub fn linear_with_anchors(start: f64, end: f64, count: usize, anchors: [f64; 3]) -> Result<Self, DataError> {
        if count < 2 {
            return Err(DataError::InvalidGrid(format!("need at least 2 points, got {count}")));
        }
        let step = (end - start) / (count - 1) as f64;
        let mut points: Vec<f64> = (0..count).map(|i| start + step * i as f64).collect();
        points[count - 1] = end;
        Self::new(points, anchors)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if self.points.len() < 2 {
            return Err(DataError::InvalidGrid("fewer than 2 points".into()));
        }
        if self.points.iter().chain(&self.anchors).any(|p| !p.is_finite()) {
            return Err(DataError::InvalidGrid("non-finite wavelength".into()));
        }
        if self.points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(DataError::InvalidGrid("points are not strictly increasing".into()));
        }
        if self.anchors.windows(2).any(|w| w[1] <= w[0]) {
            return Err(DataError::InvalidGrid("anchors must satisfy blue < green < red".into()));
        }
        let (lo, hi) = (self.points[0], self.points[self.points.len() - 1]);
        if self.anchors.iter().any(|a| *a < lo || *a > hi) {
            return Err(DataError::InvalidGrid(format!("anchors {:?} outside [{lo}, {hi}]", self.anchors)));
        }
        Ok(())
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn anchors(&self) -> [f64; 3] {
        self.anchors
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of the grid point closest to `nm` (lower index on ties).
    pub fn nearest(&self, nm: f64) -> usize {
        let mut best = 0;
        for (i, p) in self.points.iter().enumerate() {
            if (p - nm).abs() < (self.points[best] - nm).abs() {
                best = i;
            }
        }
        best
    }
}

// Where a grid point falls relative to the three knots, with the
// point-dependent spline factors precomputed.
#[derive(Debug, Clone, Copy)]
enum Stencil {
    Below { dx: f64 },
    Inside { segment: usize, b: f64, ca: f64, cb: f64 },
    Above { dx: f64 },
}

/// Natural cubic spline through three knots, evaluated on a fixed grid.
///
/// Inside the knots the segment form
/// `y_i + B (y_{i+1} - y_i) + h²/6 [(A³ - A) M_i + (B³ - B) M_{i+1}]`
/// is used, with `A = (x_{i+1} - x) / h`, `B = 1 - A`; this returns knot values
/// bit-exactly and keeps equal knot values exactly constant. Outside, the
/// curve continues along its end tangent.
#[derive(Debug, Clone)]
pub(crate) struct ThreeKnotSpline {
    h: [f64; 2],
    stencils: Vec<Stencil>,
}

impl ThreeKnotSpline {
    pub(crate) fn new(knots: [f64; 3], grid: &[f64]) -> Self {
        let h = [knots[1] - knots[0], knots[2] - knots[1]];
        let stencils = grid
            .iter()
            .map(|&x| {
                if x < knots[0] {
                    Stencil::Below { dx: x - knots[0] }
                } else if x >= knots[2] {
                    Stencil::Above { dx: x - knots[2] }
                } else {
                    let segment = usize::from(x >= knots[1]);
                    let hs = h[segment];
                    let a = (knots[segment + 1] - x) / hs;
                    let b = (x - knots[segment]) / hs;
                    let k = hs * hs / 6.0;
                    Stencil::Inside { segment, b, ca: k * (a * a * a - a), cb: k * (b * b * b - b) }
                }
            })
            .collect();
        Self { h, stencils }
    }

    /// Evaluates the spline through `y` at every grid point into `out`.
    pub(crate) fn eval_into(&self, y: [f64; 3], mut out: impl FnMut(usize, f64)) {
        let [h0, h1] = self.h;
        let d0 = (y[1] - y[0]) / h0;
        let d1 = (y[2] - y[1]) / h1;
        // Natural end conditions: M0 = M2 = 0.
        let m1 = 3.0 * (d1 - d0) / (h0 + h1);
        let m = [0.0, m1, 0.0];
        let slope_lo = d0 - h0 * m1 / 6.0;
        let slope_hi = d1 + h1 * m1 / 6.0;
        for (i, s) in self.stencils.iter().enumerate() {
            let v = match *s {
                Stencil::Below { dx } => y[0] + slope_lo * dx,
                Stencil::Above { dx } => y[2] + slope_hi * dx,
                Stencil::Inside { segment, b, ca, cb } => {
                    y[segment] + b * (y[segment + 1] - y[segment]) + ca * m[segment] + cb * m[segment + 1]
                }
            };
            out(i, v);
        }
    }
}

/// Lifts an RGB image to a reflectance cube on `grid`.
///
/// Per pixel the (B, G, R) values are placed at the grid's anchor
/// wavelengths, joined by a natural cubic spline, extended linearly past the
/// end anchors, and clamped to `[0, 1]`.
pub fn synthesize_hsi(img: &RgbImage, grid: &Arc<WavelengthGrid>) -> Result<SpectralCube, DataError> {
    grid.validate()?;
    let spline = ThreeKnotSpline::new(grid.anchors(), grid.points());
    let n = img.height() * img.width();
    let c = grid.len();
    let mut values = vec![0.0f32; c * n];
    for p in 0..n {
        let [r, g, b] = img.pixel(p / img.width(), p % img.width());
        spline.eval_into([b as f64, g as f64, r as f64], |ch, v| {
            values[ch * n + p] = v.clamp(0.0, 1.0) as f32;
        });
    }
    SpectralCube::new(FeatureCube::new(c, img.height(), img.width(), values)?, Arc::clone(grid))
}

#[cfg(test)]
mod tests {
    use super::*;

    // Grid with every anchor landing on a sample point: 300 + 2.5k.
    fn anchored_grid() -> Arc<WavelengthGrid> {
        Arc::new(WavelengthGrid::linear(300.0, 1047.5, 300).unwrap())
    }

    #[test]
    fn default_grid_shape() {
        let g = WavelengthGrid::default();
        assert_eq!(g.len(), 300);
        assert_eq!(g.points()[0], 300.0);
        assert_eq!(g.points()[299], 1100.0);
    }

    #[test]
    fn grid_validation() {
        assert!(WavelengthGrid::new(vec![400.0, 400.0, 700.0], DEFAULT_ANCHORS).is_err());
        assert!(WavelengthGrid::linear(500.0, 900.0, 10).is_err());
        assert!(WavelengthGrid::linear_with_anchors(300.0, 900.0, 10, [550.0, 450.0, 650.0]).is_err());
    }

    #[test]
    fn gray_pixel_gives_flat_spectrum() {
        let grid = Arc::new(WavelengthGrid::default());
        let img = RgbImage::constant(1, 1, [0.37, 0.37, 0.37]).unwrap();
        let cube = synthesize_hsi(&img, &grid).unwrap();
        assert_eq!(cube.channels(), 300);
        assert!(cube.values().iter().all(|&v| v == 0.37f32));
    }

    #[test]
    fn collinear_anchors_extrapolate_then_clamp() {
        // Collinear knots make the natural spline a straight line of slope
        // 0.003 / nm, so 750 nm lands at 0.8 + 0.3 = 1.1 before clamping.
        let grid = Arc::new(WavelengthGrid::new(vec![400.0, 450.0, 550.0, 650.0, 700.0, 750.0], DEFAULT_ANCHORS).unwrap());
        let spline = ThreeKnotSpline::new(grid.anchors(), grid.points());
        let mut raw = vec![0.0; grid.len()];
        spline.eval_into([0.2, 0.5, 0.8], |i, v| raw[i] = v);
        assert!((raw[5] - 1.1).abs() < 1e-12);
        assert!((raw[0] - 0.05).abs() < 1e-12);
        let img = RgbImage::new(1, 1, vec![0.8, 0.5, 0.2]).unwrap();
        let cube = synthesize_hsi(&img, &grid).unwrap();
        assert_eq!(cube.values()[5], 1.0);
    }

    #[test]
    fn pure_red_peaks_near_650() {
        let grid = Arc::new(WavelengthGrid::default());
        let img = RgbImage::new(1, 1, vec![1.0, 0.0, 0.0]).unwrap();
        let cube = synthesize_hsi(&img, &grid).unwrap();
        let at = grid.nearest(650.0);
        assert!((cube.values()[at] as f64 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn anchor_channels_reproduce_rgb() {
        let grid = anchored_grid();
        let idx: Vec<usize> = grid.anchors().iter().map(|a| grid.nearest(*a)).collect();
        assert_eq!(idx, vec![60, 100, 140]);
        let img = RgbImage::new(1, 1, vec![0.9, 0.1, 0.45]).unwrap();
        let cube = synthesize_hsi(&img, &grid).unwrap();
        assert_eq!(cube.values()[60], 0.45);
        assert_eq!(cube.values()[100], 0.1);
        assert_eq!(cube.values()[140], 0.9);
    }

    #[test]
    fn spline_matches_closed_form_middle() {
        // Independent check of the interior curvature and a midpoint value.
        let knots = [450.0, 550.0, 650.0];
        let y = [0.1, 0.7, 0.3];
        let spline = ThreeKnotSpline::new(knots, &[500.0]);
        let mut got = 0.0;
        spline.eval_into(y, |_, v| got = v);
        // With h = 100 on both sides: M1 = 3 (d1 - d0) / 200,
        // S(500) = (y0 + y1) / 2 - h² M1 / 16.
        let m1 = 3.0 * ((0.3 - 0.7) / 100.0 - (0.7 - 0.1) / 100.0) / 200.0;
        let want = 0.4 - 100.0f64 * 100.0 * m1 / 16.0;
        assert!((got - want).abs() < 1e-12);
    }
}
