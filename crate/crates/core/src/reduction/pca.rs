use super::ReductionError;
use crate::datacube::{CubeView, FeatureCube};
use crate::numeric::{column_means, covariance, sym_eig, Matrix};

/// Eigenvalues in `[-1e-10, 0)` are taken as round-off and set to zero.
const EIGEN_CLIP: f64 = -1e-10;

/// Fitted PCA basis: `cov = Q Λ Qᵀ`, components in columns of `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub(crate) mean: Vec<f64>,
    pub(crate) components: Matrix,
    pub(crate) eigenvalues: Vec<f64>,
}

impl PcaModel {
    pub fn new(mean: Vec<f64>, components: Matrix, eigenvalues: Vec<f64>) -> Result<Self, ReductionError> {
        let c = mean.len();
        if components.rows() != c || components.cols() != c || eigenvalues.len() != c {
            return Err(ReductionError::ChannelMismatch { expected: c, got: components.rows() });
        }
        Ok(Self { mean, components, eigenvalues })
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn components(&self) -> &Matrix {
        &self.components
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Fraction of total variance carried by each component.
    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        let total: f64 = self.eigenvalues.iter().sum();
        self.eigenvalues.iter().map(|l| if total > 0.0 { l / total } else { 0.0 }).collect()
    }

    /// Projects one centred row onto the first `n` components.
    pub fn project_row(&self, row: &[f64], n: usize) -> Vec<f64> {
        (0..n)
            .map(|k| row.iter().zip(&self.mean).enumerate().map(|(c, (x, m))| (x - m) * self.components.get(c, k)).sum())
            .collect()
    }
}

/// Eigendecomposition of the sample covariance of the rows of `x`.
pub fn fit_pca(x: &Matrix) -> Result<PcaModel, ReductionError> {
    if x.rows() < 2 {
        return Err(ReductionError::TooFewSamples(x.rows()));
    }
    let mean = column_means(x);
    let cov = covariance(x)?;
    let eig = sym_eig(&cov)?;
    let eigenvalues = eig.eigenvalues.into_iter().map(|l| if (EIGEN_CLIP..0.0).contains(&l) { 0.0 } else { l }).collect();
    Ok(PcaModel { mean, components: eig.q, eigenvalues })
}

/// Per pixel: subtract the mean spectrum and project onto the leading `n`
/// components. Output channel `k` holds the `k`-th coordinate.
pub fn pca_transform(model: &PcaModel, cube: CubeView<'_, f32>, n: usize) -> Result<FeatureCube, ReductionError> {
    let c = model.channels();
    if cube.channels != c {
        return Err(ReductionError::ChannelMismatch { expected: c, got: cube.channels });
    }
    if n > c {
        return Err(ReductionError::TooManyChannels { requested: n, available: c });
    }
    let pixels = cube.height * cube.width;
    let mut acc = vec![0.0f64; n * pixels];
    let mut centred = vec![0.0f64; pixels];
    for ch in 0..c {
        let mean = model.mean[ch];
        for (d, &v) in centred.iter_mut().zip(cube.plane(ch)) {
            *d = v as f64 - mean;
        }
        let weights = model.components.row(ch);
        for (k, out) in acc.chunks_exact_mut(pixels).enumerate() {
            let w = weights[k];
            for (o, &x) in out.iter_mut().zip(&centred) {
                *o += w * x;
            }
        }
    }
    Ok(FeatureCube::new(n, cube.height, cube.width, acc.into_iter().map(|v| v as f32).collect())?)
}

/// Maps PCA coordinates back to the channel space (`mean + Σ_k z_k q_k`).
pub fn pca_inverse_transform(model: &PcaModel, reduced: &FeatureCube) -> Result<FeatureCube, ReductionError> {
    let c = model.channels();
    let n = reduced.channels();
    if n > c {
        return Err(ReductionError::TooManyChannels { requested: n, available: c });
    }
    let pixels = reduced.pixels();
    let mut out = Vec::with_capacity(c * pixels);
    for ch in 0..c {
        let weights = model.components.row(ch);
        let mut plane = vec![model.mean[ch]; pixels];
        for (k, &w) in weights.iter().enumerate().take(n) {
            for (p, &z) in plane.iter_mut().zip(reduced.plane(k)) {
                *p += w * z as f64;
            }
        }
        out.extend(plane.into_iter().map(|v| v as f32));
    }
    Ok(FeatureCube::new(c, reduced.height(), reduced.width(), out)?)
}
