//! Checkpoint file: `"CADC"`, version `u32`, metadata length `u32`, UTF-8
//! JSON metadata, tensor count `u32`, then per tensor: name length `u32`,
//! name bytes, `rows u32`, `cols u32`, `rows*cols` little-endian `f64`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TrainConfig;
use crate::binio::Reader;
use crate::error::{CadError, Result};
use crate::losses::LossConfig;
use crate::model::{ModelConfig, ModelParameters, PARAMETER_NAMES};
use crate::numerics::Tensor2;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"CADC";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParameters,
    pub train: TrainConfig,
    pub loss: LossConfig,
    /// Number of completed epochs.
    pub epoch: usize,
    pub rng_digest: String,
}

#[derive(Serialize, Deserialize)]
struct Metadata {
    model: ModelConfig,
    train: TrainConfig,
    loss: LossConfig,
    epoch: usize,
    rng_digest: String,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let meta = Metadata {
            model: self.params.config,
            train: self.train,
            loss: self.loss,
            epoch: self.epoch,
            rng_digest: self.rng_digest.clone(),
        };
        let json = serde_json::to_vec(&meta).expect("metadata serializes");
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        let tensors = self.params.tensors();
        out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
        for (name, t) in PARAMETER_NAMES.iter().zip(tensors) {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.rows() as u32).to_le_bytes());
            out.extend_from_slice(&(t.cols() as u32).to_le_bytes());
            for v in t.values() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(path: &Path, bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(path, bytes);
        r.magic(CHECKPOINT_MAGIC)?;
        r.version(CHECKPOINT_VERSION)?;
        let len = r.u32()? as usize;
        let meta_at = r.position();
        let raw = r.take(len)?;
        let meta: Metadata = serde_json::from_slice(raw).map_err(|e| CadError::Parse {
            path: path.to_path_buf(),
            offset: (meta_at + e.column().saturating_sub(1)) as u64,
            msg: format!("metadata: {e}"),
        })?;
        let count = r.u32()? as usize;
        if count != PARAMETER_NAMES.len() {
            return Err(r.err(format!(
                "{count} tensors, expected {}",
                PARAMETER_NAMES.len()
            )));
        }
        let mut tensors = Vec::with_capacity(count);
        for expected in PARAMETER_NAMES {
            let name_len = r.u32()? as usize;
            let name = r.take(name_len)?;
            if name != expected.as_bytes() {
                return Err(r.err(format!(
                    "tensor {:?} where {expected:?} was expected",
                    String::from_utf8_lossy(name)
                )));
            }
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            let raw = r.take(rows * cols * 8)?;
            let values = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            tensors.push(Tensor2::new(rows, cols, values)?);
        }
        r.finish()?;
        let params = ModelParameters::from_tensors(meta.model, tensors).map_err(|e| CadError::Data {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        Ok(Checkpoint {
            params,
            train: meta.train,
            loss: meta.loss,
            epoch: meta.epoch,
            rng_digest: meta.rng_digest,
        })
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CadError::io(parent, e))?;
    }
    fs::write(path, ckpt.to_bytes()).map_err(|e| CadError::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| CadError::io(path, e))?;
    Checkpoint::from_bytes(path, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use crate::rng;

    fn sample() -> Checkpoint {
        let cfg = ModelConfig::new(6, 5, 3);
        let params = ModelParameters::init(cfg, &mut rng::seeded(42)).unwrap();
        Checkpoint {
            params,
            train: TrainConfig::default(),
            loss: LossConfig::default(),
            epoch: 7,
            rng_digest: "00ff".into(),
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.cadc");
        let ck = sample();
        save_checkpoint(&ck, &p).unwrap();
        let back = load_checkpoint(&p).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_bytes(), ck.to_bytes());
    }

    #[test]
    fn truncated_file_is_rejected() {
        let bytes = sample().to_bytes();
        for cut in [3, 10, bytes.len() / 2, bytes.len() - 1] {
            let err = Checkpoint::from_bytes(Path::new("x"), &bytes[..cut]).unwrap_err();
            assert!(matches!(err, CadError::Parse { .. }), "{err}");
        }
    }

    #[test]
    fn version_mismatch_is_explicit() {
        let mut bytes = sample().to_bytes();
        bytes[4..8].copy_from_slice(&9u32.to_le_bytes());
        match Checkpoint::from_bytes(Path::new("x"), &bytes) {
            Err(CadError::Version { found: 9, expected: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_magic() {
        let mut bytes = sample().to_bytes();
        bytes[0] = b'Z';
        assert!(matches!(
            Checkpoint::from_bytes(Path::new("x"), &bytes),
            Err(CadError::Parse { offset: 0, .. })
        ));
    }
}
