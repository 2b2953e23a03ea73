use super::{pca_transform, ChannelRanking, PcaModel, ReductionError};
use crate::datacube::{CubeView, FeatureCube};

/// Output channel `i` is input channel `ranking.entries()[i].channel`.
pub fn select_channels(cube: &FeatureCube, ranking: &ChannelRanking, n: usize) -> Result<FeatureCube, ReductionError> {
    if n > cube.channels() {
        return Err(ReductionError::TooManyChannels { requested: n, available: cube.channels() });
    }
    if ranking.channel_count() != cube.channels() {
        return Err(ReductionError::ChannelMismatch { expected: ranking.channel_count(), got: cube.channels() });
    }
    Ok(cube.gather(&ranking.top(n)?)?)
}

/// Top-`n` channels of `ranking` listed in ascending (wavelength) order.
///
/// This is the channel set a reduced camera would capture. It drives the
/// detector input, so keeping all channels reproduces the unreduced cube
/// bit for bit.
pub fn selected_channel_set(ranking: &ChannelRanking, n: usize) -> Result<Vec<usize>, ReductionError> {
    let mut set = ranking.top(n)?;
    set.sort_unstable();
    Ok(set)
}

/// An inference-time reduction: nothing, a channel gather, or a PCA projection.
#[derive(Debug, Clone)]
pub enum Reducer {
    Identity,
    Select(Vec<usize>),
    Pca { model: PcaModel, components: usize },
}

/// Either the input itself or an owned reduced cube.
pub enum Reduced<'a> {
    Borrowed(CubeView<'a, f32>),
    Owned(FeatureCube),
}

impl Reduced<'_> {
    pub fn view(&self) -> CubeView<'_, f32> {
        match self {
            Reduced::Borrowed(v) => *v,
            Reduced::Owned(c) => c.view(),
        }
    }
}

impl Reducer {
    pub fn output_channels(&self, input_channels: usize) -> usize {
        match self {
            Reducer::Identity => input_channels,
            Reducer::Select(idx) => idx.len(),
            Reducer::Pca { components, .. } => *components,
        }
    }

    pub fn apply<'a>(&self, cube: &'a FeatureCube) -> Result<Reduced<'a>, ReductionError> {
        match self {
            Reducer::Identity => Ok(Reduced::Borrowed(cube.view())),
            Reducer::Select(idx) => Ok(Reduced::Owned(cube.gather(idx)?)),
            Reducer::Pca { model, components } => Ok(Reduced::Owned(pca_transform(model, cube.view(), *components)?)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduction::RankingMethod;

    fn cube() -> FeatureCube {
        FeatureCube::new(4, 1, 2, vec![0.0, 0.1, 1.0, 1.1, 2.0, 2.1, 3.0, 3.1]).unwrap()
    }

    #[test]
    fn selects_in_ranking_order() {
        let r = ChannelRanking::from_scores(RankingMethod::FeatureImportance, &[0.1, 0.4, 0.2, 0.3]);
        let s = select_channels(&cube(), &r, 2).unwrap();
        assert_eq!(s.values(), &[1.0, 1.1, 3.0, 3.1]);
        assert_eq!(selected_channel_set(&r, 2).unwrap(), vec![1, 3]);
    }

    #[test]
    fn full_selection_is_a_permutation() {
        let r = ChannelRanking::from_scores(RankingMethod::PermutationImportance, &[0.1, 0.4, -0.2, 0.3]);
        let s = select_channels(&cube(), &r, 4).unwrap();
        let mut planes: Vec<Vec<f32>> = (0..4).map(|c| s.plane(c).to_vec()).collect();
        planes.sort_by(|a, b| a[0].total_cmp(&b[0]));
        let orig: Vec<Vec<f32>> = (0..4).map(|c| cube().plane(c).to_vec()).collect();
        assert_eq!(planes, orig);
        assert_eq!(selected_channel_set(&r, 4).unwrap(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn too_many_channels() {
        let r = ChannelRanking::from_scores(RankingMethod::FeatureImportance, &[0.1, 0.4, 0.2, 0.3]);
        assert!(matches!(select_channels(&cube(), &r, 5), Err(ReductionError::TooManyChannels { .. })));
    }
}
