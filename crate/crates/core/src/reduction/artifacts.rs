//! Ranking (JSON) and PCA (`PCAM` binary) artifact files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ChannelRanking, PcaModel, RankEntry, RankingMethod, ReductionError};
use crate::numeric::Matrix;

pub const RANKING_VERSION: u32 = 1;
pub const PCAM_MAGIC: &[u8; 4] = b"PCAM";
pub const PCAM_VERSION: u16 = 1;

#[derive(Serialize, Deserialize)]
struct RankingFile {
    version: u32,
    method: RankingMethod,
    channel_count: usize,
    entries: Vec<RankEntry>,
}

pub fn ranking_to_json(r: &ChannelRanking) -> Result<String, ReductionError> {
    let file = RankingFile {
        version: RANKING_VERSION,
        method: r.method(),
        channel_count: r.channel_count(),
        entries: r.entries().to_vec(),
    };
    serde_json::to_string_pretty(&file).map_err(|e| ReductionError::Corrupt(e.to_string()))
}

/// Parses a ranking file, optionally checking its channel count.
pub fn ranking_from_json(text: &str, expected_channels: Option<usize>) -> Result<ChannelRanking, ReductionError> {
    let file: RankingFile = serde_json::from_str(text).map_err(|e| ReductionError::Corrupt(e.to_string()))?;
    if file.version != RANKING_VERSION {
        return Err(ReductionError::Version { found: file.version as u64, supported: RANKING_VERSION as u64 });
    }
    if let Some(c) = expected_channels {
        if c != file.channel_count {
            return Err(ReductionError::ChannelMismatch { expected: c, got: file.channel_count });
        }
    }
    ChannelRanking::from_entries(file.method, file.channel_count, file.entries)
}

pub fn save_ranking(path: &Path, r: &ChannelRanking) -> Result<(), ReductionError> {
    fs::write(path, ranking_to_json(r)? + "\n")?;
    Ok(())
}

pub fn load_ranking(path: &Path, expected_channels: Option<usize>) -> Result<ChannelRanking, ReductionError> {
    ranking_from_json(&fs::read_to_string(path)?, expected_channels)
}

pub fn encode_pca(m: &PcaModel) -> Vec<u8> {
    let c = m.channels();
    let mut out = Vec::with_capacity(10 + 8 * (2 * c + c * c));
    out.extend_from_slice(PCAM_MAGIC);
    out.extend_from_slice(&PCAM_VERSION.to_le_bytes());
    out.extend_from_slice(&(c as u32).to_le_bytes());
    for v in m.mean().iter().chain(m.eigenvalues()).chain(m.components().values()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_pca(bytes: &[u8], expected_channels: Option<usize>) -> Result<PcaModel, ReductionError> {
    if bytes.len() < 10 || &bytes[..4] != PCAM_MAGIC {
        return Err(ReductionError::Corrupt("missing PCAM header".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != PCAM_VERSION {
        return Err(ReductionError::Version { found: version as u64, supported: PCAM_VERSION as u64 });
    }
    let c = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    if let Some(e) = expected_channels {
        if e != c {
            return Err(ReductionError::ChannelMismatch { expected: e, got: c });
        }
    }
    let body = &bytes[10..];
    let want = 8 * (2 * c + c * c);
    if body.len() != want {
        return Err(ReductionError::Corrupt(format!("expected {want} payload bytes, found {}", body.len())));
    }
    let mut floats = body.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap()));
    let mean: Vec<f64> = floats.by_ref().take(c).collect();
    let eigenvalues: Vec<f64> = floats.by_ref().take(c).collect();
    let q: Vec<f64> = floats.collect();
    PcaModel::new(mean, Matrix::from_vec(c, c, q)?, eigenvalues)
}

pub fn save_pca(path: &Path, m: &PcaModel) -> Result<(), ReductionError> {
    fs::write(path, encode_pca(m))?;
    Ok(())
}

pub fn load_pca(path: &Path, expected_channels: Option<usize>) -> Result<PcaModel, ReductionError> {
    decode_pca(&fs::read(path)?, expected_channels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::RngStream;
    use crate::reduction::fit_pca;

    #[test]
    fn ranking_round_trip_300() {
        let mut rng = RngStream::new(0);
        let scores: Vec<f64> = (0..300).map(|_| rng.next_f64()).collect();
        let r = ChannelRanking::from_scores(RankingMethod::FeatureImportance, &scores);
        let back = ranking_from_json(&ranking_to_json(&r).unwrap(), Some(300)).unwrap();
        assert_eq!(back, r);
        assert!(matches!(ranking_from_json(&ranking_to_json(&r).unwrap(), Some(6)), Err(ReductionError::ChannelMismatch { .. })));
    }

    #[test]
    fn ranking_json_shape() {
        let r = ChannelRanking::from_scores(RankingMethod::PermutationImportance, &[0.5, -0.1]);
        let v: serde_json::Value = serde_json::from_str(&ranking_to_json(&r).unwrap()).unwrap();
        assert_eq!(v["version"], 1);
        assert_eq!(v["method"], "PI");
        assert_eq!(v["channel_count"], 2);
        assert_eq!(v["entries"][1]["channel"], 1);
        assert_eq!(v["entries"][1]["importance"], -0.1);
    }

    #[test]
    fn pca_round_trip_is_bit_exact() {
        let mut rng = RngStream::new(1);
        let rows: Vec<Vec<f64>> = (0..20).map(|_| (0..5).map(|_| rng.next_f64()).collect()).collect();
        let m = fit_pca(&Matrix::from_rows(&rows).unwrap()).unwrap();
        let bytes = encode_pca(&m);
        assert_eq!(&bytes[..4], b"PCAM");
        let back = decode_pca(&bytes, Some(5)).unwrap();
        let bits = |m: &PcaModel| m.components().values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&m));
        assert_eq!(back, m);
    }

    #[test]
    fn truncated_pca_is_corrupt() {
        let m = PcaModel::new(vec![0.0; 2], Matrix::identity(2), vec![1.0, 0.5]).unwrap();
        let bytes = encode_pca(&m);
        assert!(matches!(decode_pca(&bytes[..bytes.len() - 3], None), Err(ReductionError::Corrupt(_))));
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(decode_pca(&bad, None), Err(ReductionError::Version { .. })));
        assert!(matches!(decode_pca(&bytes, Some(3)), Err(ReductionError::ChannelMismatch { .. })));
        assert!(matches!(ranking_from_json("{\"version\": 1", None), Err(ReductionError::Corrupt(_))));
    }
}
