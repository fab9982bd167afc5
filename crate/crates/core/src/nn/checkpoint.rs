//! Binary checkpoint layout (all integers little-endian):
//!
//! ```text
//! "EVFC" | version u32 | header_len u32 | header (UTF-8, usually JSON)
//! init_seed u64 | count u32 | count x tensor
//! step u64 | moment_count u32 | moment_count x tensor   ("m:<name>", "v:<name>")
//! tensor = name_len u32 | name | rank u32 | rank x dim u64 | values f64
//! ```

use super::{ModelParams, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"EVFC";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CheckpointError {
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("checkpoint truncated at byte {0}")]
    Truncated(usize),
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
}

fn put_tensor(out: &mut Vec<u8>, name: &str, t: &Tensor<f64>) {
    out.extend_from_slice(&(name.len() as u32).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
    for &d in t.shape() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_checkpoint(header: &str, params: &ModelParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + header.len() + params.value_count() * 24);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&params.init_seed.to_le_bytes());
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for e in params.entries() {
        put_tensor(&mut out, &e.name, &e.value);
    }
    out.extend_from_slice(&params.step.to_le_bytes());
    match &params.moments {
        None => out.extend_from_slice(&0u32.to_le_bytes()),
        Some(moments) => {
            out.extend_from_slice(&(2 * moments.len() as u32).to_le_bytes());
            for (e, (m, v)) in params.entries().iter().zip(moments) {
                let shape = e.value.shape().to_vec();
                put_tensor(&mut out, &format!("m:{}", e.name), &Tensor::new(shape.clone(), m.clone()).expect("sized"));
                put_tensor(&mut out, &format!("v:{}", e.name), &Tensor::new(shape, v.clone()).expect("sized"));
            }
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or(CheckpointError::Truncated(self.pos))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String, CheckpointError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| CheckpointError::Malformed(e.to_string()))
    }

    fn tensor(&mut self) -> Result<(String, Tensor<f64>), CheckpointError> {
        let name = self.string()?;
        let rank = self.u32()? as usize;
        if rank > 8 {
            return Err(CheckpointError::Malformed(format!("{name}: rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(usize::try_from(self.u64()?).map_err(|e| CheckpointError::Malformed(e.to_string()))?);
        }
        let count = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| CheckpointError::Malformed(format!("{name}: shape overflow")))?;
        let raw = self.take(count.checked_mul(8).ok_or(CheckpointError::Truncated(self.pos))?)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let t = Tensor::new(shape, data).map_err(|e| CheckpointError::Malformed(e.to_string()))?;
        Ok((name, t))
    }
}

/// Parses a checkpoint into its header text and parameters.
pub fn decode_checkpoint(bytes: &[u8]) -> Result<(String, ModelParams), CheckpointError> {
    if bytes.len() < 4 || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let mut r = Reader { bytes, pos: 4 };
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let header = r.string()?;
    let mut params = ModelParams::new(r.u64()?);
    let count = r.u32()?;
    for _ in 0..count {
        let (name, t) = r.tensor()?;
        params.push(name, t);
    }
    params.step = r.u64()?;
    let moment_count = r.u32()? as usize;
    if moment_count != 0 {
        if moment_count != 2 * params.len() {
            return Err(CheckpointError::Malformed(format!("{moment_count} moment tensors for {} parameters", params.len())));
        }
        let mut moments = Vec::with_capacity(params.len());
        for e in params.entries() {
            let (mn, m) = r.tensor()?;
            let (vn, v) = r.tensor()?;
            if mn != format!("m:{}", e.name) || vn != format!("v:{}", e.name) || m.shape() != e.value.shape() || v.shape() != e.value.shape() {
                return Err(CheckpointError::Malformed(format!("moments for {} do not match", e.name)));
            }
            moments.push((m.into_data(), v.into_data()));
        }
        params.moments = Some(moments);
    }
    if r.pos != bytes.len() {
        return Err(CheckpointError::Malformed(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok((header, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Adam;

    fn trained() -> ModelParams {
        let mut p = ModelParams::with_rng(11, |p, rng| {
            p.push_linear("a", 3, 4, rng);
            p.push_linear("b", 4, 2, rng);
        });
        let grads = p.entries().iter().map(|e| e.value.data().iter().map(|v| v * 0.5 - 0.1).collect()).collect();
        p.set_grads(grads).unwrap();
        Adam::default().step(&mut p).unwrap();
        p.clear_grads();
        p
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let p = trained();
        let bytes = encode_checkpoint("{\"k\":1}", &p);
        let (header, q) = decode_checkpoint(&bytes).unwrap();
        assert_eq!(header, "{\"k\":1}");
        assert_eq!(q, p);
        assert_eq!(encode_checkpoint(&header, &q), bytes);
    }

    #[test]
    fn fresh_params_have_no_moments() {
        let p = ModelParams::with_rng(1, |p, rng| p.push_linear("a", 2, 2, rng));
        let (_, q) = decode_checkpoint(&encode_checkpoint("", &p)).unwrap();
        assert_eq!(q, p);
        assert!(q.moments.is_none());
    }

    #[test]
    fn damaged_input_is_rejected() {
        let bytes = encode_checkpoint("h", &trained());
        assert_eq!(decode_checkpoint(b"EVF1rest"), Err(CheckpointError::BadMagic));
        for cut in [5, 13, 40, bytes.len() - 1] {
            assert!(decode_checkpoint(&bytes[..cut]).is_err());
        }
        let mut v = bytes.clone();
        v[4] = 9;
        assert_eq!(decode_checkpoint(&v), Err(CheckpointError::UnsupportedVersion(9)));
        let mut v = bytes;
        v.push(0);
        assert!(matches!(decode_checkpoint(&v), Err(CheckpointError::Malformed(_))));
    }
}
