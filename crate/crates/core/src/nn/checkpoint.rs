//! Binary checkpoint container.
//!
//! Layout: 8-byte magic `USDCKPT\0`, little-endian `u32` format version,
//! little-endian `u64` header length, a JSON header (model config, SFA
//! pattern, training metadata, tensor directory), then the raw
//! little-endian tensor payload in directory order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::real::Real;
use crate::sei::SeiPoint;
use crate::sfa::SfaPattern;

use super::model::{Model, ModelConfig};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"USDCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epoch: usize,
    pub step: usize,
    pub seed: u64,
    pub sei_history: Vec<SeiPoint>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<T> {
    pub model: Model<T>,
    pub pattern: SfaPattern,
    pub meta: TrainingMeta,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    count: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    dtype: String,
    config: ModelConfig,
    pattern: SfaPattern,
    meta: TrainingMeta,
    tensors: Vec<TensorEntry>,
}

impl<T: Real> Checkpoint<T> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let tensors = self.model.tensors();
        let header = Header {
            dtype: T::DTYPE.to_string(),
            config: self.model.config().clone(),
            pattern: self.pattern.clone(),
            meta: self.meta.clone(),
            tensors: tensors
                .iter()
                .map(|t| TensorEntry { name: t.name.clone(), shape: t.shape.clone(), count: t.data.len() })
                .collect(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for t in &tensors {
            for &v in t.data {
                v.write_le(&mut out);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let bad = |m: String| Error::format(origin, m);
        if bytes.len() < 20 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(bad("not a checkpoint (bad magic)".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(bad(format!("unsupported checkpoint version {version}")));
        }
        let len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        let body = &bytes[20..];
        if body.len() < len {
            return Err(bad("truncated header".into()));
        }
        let header: Header = serde_json::from_slice(&body[..len])?;
        if header.dtype != T::DTYPE {
            return Err(bad(format!("checkpoint holds {}, expected {}", header.dtype, T::DTYPE)));
        }
        header.config.check_pattern(&header.pattern)?;
        let mut model = Model::<T>::zeroed(header.config)?;
        let mut payload = &body[len..];
        let mut slots = model.tensors_mut();
        if slots.len() != header.tensors.len() {
            return Err(bad(format!("{} tensors stored, model has {}", header.tensors.len(), slots.len())));
        }
        for (entry, (name, data)) in header.tensors.iter().zip(slots.iter_mut()) {
            if entry.name != *name || entry.count != data.len() {
                return Err(bad(format!("tensor {} ({}) does not match model slot {name} ({})", entry.name, entry.count, data.len())));
            }
            let nbytes = entry.count * T::BYTES;
            if payload.len() < nbytes {
                return Err(bad(format!("payload truncated in tensor {}", entry.name)));
            }
            for (d, chunk) in data.iter_mut().zip(payload[..nbytes].chunks_exact(T::BYTES)) {
                *d = T::read_le(chunk);
            }
            payload = &payload[nbytes..];
        }
        if !payload.is_empty() {
            return Err(bad(format!("{} trailing payload bytes", payload.len())));
        }
        drop(slots);
        Ok(Checkpoint { model, pattern: header.pattern, meta: header.meta })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::from_bytes(&bytes, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::AttentionKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> Checkpoint<f32> {
        let pattern = SfaPattern::row_major(2, 2);
        let cfg = ModelConfig { channels: 4, blocks: 2, reduction: 2, attention: AttentionKind::Lsa, ..ModelConfig::for_pattern(&pattern) };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut model = Model::new(cfg, &mut rng).unwrap();
        model.tail_mut().weight_mut()[3] = f32::from_bits(0x3f80_0001);
        let meta = TrainingMeta {
            epoch: 12,
            step: 60,
            seed: 7,
            sei_history: vec![SeiPoint { epoch: 10, sei: 1.234_567_890_123e-7 }, SeiPoint { epoch: 12, sei: 0.1 + 0.2 }],
        };
        Checkpoint { model, pattern, meta }
    }

    #[test]
    fn bytes_round_trip_exactly() {
        let ck = sample();
        let bytes = ck.to_bytes();
        let back = Checkpoint::<f32>::from_bytes(&bytes, Path::new("mem")).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn rejects_corruption() {
        let bytes = sample().to_bytes();
        let p = Path::new("mem");
        assert!(Checkpoint::<f32>::from_bytes(&bytes[..bytes.len() - 1], p).is_err());
        assert!(Checkpoint::<f64>::from_bytes(&bytes, p).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Checkpoint::<f32>::from_bytes(&bad, p).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(Checkpoint::<f32>::from_bytes(&extra, p).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.usdc");
        let ck = sample();
        ck.save(&path).unwrap();
        assert_eq!(Checkpoint::<f32>::load(&path).unwrap(), ck);
    }
}
