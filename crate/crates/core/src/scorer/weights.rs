use std::fs;
use std::path::Path;

use super::net::{param_dims, Real, ScorerNet, Tensor, PARAM_NAMES};
use super::ScorerError;

pub const WEIGHTS_MAGIC: &[u8; 4] = b"SCNW";
pub const WEIGHTS_VERSION: u16 = 1;

/// Little-endian `SCNW` layout: magic, version u16, channels u32, then one
/// record per tensor: name length u16, name, rank u8, dims u32 each, f32 data.
pub fn encode_weights<T: Real>(net: &ScorerNet<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(10 + net.parameter_count() * 4 + 32 * PARAM_NAMES.len());
    out.extend_from_slice(WEIGHTS_MAGIC);
    out.extend_from_slice(&WEIGHTS_VERSION.to_le_bytes());
    out.extend_from_slice(&(net.n_channels() as u32).to_le_bytes());
    for t in net.tensors() {
        out.extend_from_slice(&(t.name.len() as u16).to_le_bytes());
        out.extend_from_slice(t.name.as_bytes());
        out.push(t.dims.len() as u8);
        for &d in &t.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &t.data {
            out.extend_from_slice(&v.to_f32().unwrap_or(f32::NAN).to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], ScorerError> {
        if self.buf.len() - self.pos < n {
            return Err(ScorerError::Corrupt(format!("truncated while reading {what}")));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16, ScorerError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self, what: &str) -> Result<u32, ScorerError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn done(&self) -> bool {
        self.pos == self.buf.len()
    }
}

/// Parses a weights file. With `expected_channels` set, a network built for
/// a different input width is rejected.
pub fn decode_weights(bytes: &[u8], expected_channels: Option<usize>) -> Result<ScorerNet<f32>, ScorerError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4, "magic")? != WEIGHTS_MAGIC {
        return Err(ScorerError::Corrupt("bad magic".into()));
    }
    let version = r.u16("version")?;
    if version != WEIGHTS_VERSION {
        return Err(ScorerError::Version { found: version, supported: WEIGHTS_VERSION });
    }
    let n = r.u32("channel count")? as usize;
    if n == 0 {
        return Err(ScorerError::ZeroChannels);
    }
    if let Some(e) = expected_channels {
        if e != n {
            return Err(ScorerError::ChannelMismatch { expected: e, got: n });
        }
    }
    let dims = param_dims(n);
    let mut slots: Vec<Option<Tensor<f32>>> = vec![None; PARAM_NAMES.len()];
    while !r.done() {
        let len = r.u16("name length")? as usize;
        let raw = r.take(len, "tensor name")?;
        let name = std::str::from_utf8(raw).map_err(|_| ScorerError::Corrupt("tensor name is not UTF-8".into()))?;
        let k = PARAM_NAMES
            .iter()
            .position(|p| *p == name)
            .ok_or_else(|| ScorerError::Corrupt(format!("unknown tensor {name}")))?;
        if slots[k].is_some() {
            return Err(ScorerError::Corrupt(format!("duplicate tensor {name}")));
        }
        let rank = r.take(1, "rank")?[0] as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32("dimension")? as usize);
        }
        if shape != dims[k] {
            return Err(ScorerError::ShapeMismatch(format!("{name} stored as {shape:?}, architecture needs {:?}", dims[k])));
        }
        let count: usize = shape.iter().product();
        let data: Vec<f32> = r
            .take(count * 4, name)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        slots[k] = Some(Tensor { name: PARAM_NAMES[k], dims: shape, data });
    }
    let mut tensors = Vec::with_capacity(slots.len());
    for (k, s) in slots.into_iter().enumerate() {
        tensors.push(s.ok_or_else(|| ScorerError::Corrupt(format!("missing tensor {}", PARAM_NAMES[k])))?);
    }
    ScorerNet::from_tensors(n, tensors)
}

pub fn save_weights<T: Real>(path: &Path, net: &ScorerNet<T>) -> Result<(), ScorerError> {
    fs::write(path, encode_weights(net))?;
    Ok(())
}

pub fn load_weights(path: &Path, expected_channels: Option<usize>) -> Result<ScorerNet<f32>, ScorerError> {
    decode_weights(&fs::read(path)?, expected_channels)
}
