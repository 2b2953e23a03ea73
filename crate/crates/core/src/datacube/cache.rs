//! `HSIC` binary cube cache: magic, `u16` version, `C, H, W` as `u32`, then
//! `C*H*W` `f32` values, all little-endian.

use std::fs;
use std::path::Path;

use super::{DataError, FeatureCube};

pub const HSIC_MAGIC: &[u8; 4] = b"HSIC";
pub const HSIC_VERSION: u16 = 1;

pub fn encode_hsic(cube: &FeatureCube) -> Vec<u8> {
    let mut out = Vec::with_capacity(18 + cube.values().len() * 4);
    out.extend_from_slice(HSIC_MAGIC);
    out.extend_from_slice(&HSIC_VERSION.to_le_bytes());
    for d in [cube.channels(), cube.height(), cube.width()] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in cube.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_hsic(bytes: &[u8]) -> Result<FeatureCube, DataError> {
    if bytes.len() < 18 || &bytes[..4] != HSIC_MAGIC {
        return Err(DataError::Corrupt("missing HSIC header".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != HSIC_VERSION {
        return Err(DataError::Corrupt(format!("unsupported HSIC version {version}")));
    }
    let dim = |i: usize| u32::from_le_bytes(bytes[6 + 4 * i..10 + 4 * i].try_into().unwrap()) as usize;
    let (c, h, w) = (dim(0), dim(1), dim(2));
    let body = &bytes[18..];
    if body.len() != c * h * w * 4 {
        return Err(DataError::Corrupt(format!("expected {} payload bytes, found {}", c * h * w * 4, body.len())));
    }
    let values = body.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect();
    FeatureCube::new(c, h, w, values)
}

pub fn write_hsic(path: &Path, cube: &FeatureCube) -> Result<(), DataError> {
    fs::write(path, encode_hsic(cube))?;
    Ok(())
}

pub fn read_hsic(path: &Path) -> Result<FeatureCube, DataError> {
    decode_hsic(&fs::read(path)?)
}
