//! Versioned binary checkpoints.
//!
//! Layout: magic `W2FM`, format version, JSON model-config block, the force
//! normalization bounds in effect at training time, then one named blob of
//! little-endian 64-bit values per parameter. Loading rebuilds the network
//! from the embedded config and fills every parameter by name, so a round
//! trip reproduces outputs bit for bit.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use model::{build, ModelConfig, PoseForceNet};
use pipeline::NormalizationSpec;

use crate::{Result, TrainError};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"W2FM";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn save_checkpoint(net: &PoseForceNet, norm: &NormalizationSpec, path: &Path) -> Result<()> {
    let config_json = serde_json::to_vec(net.config())
        .map_err(|e| TrainError::Config(format!("config not serializable: {e}")))?;
    let mut buf = Vec::with_capacity(64 + config_json.len() + net.param_count() * 8);
    buf.extend_from_slice(&CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(config_json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&config_json);
    buf.extend_from_slice(&norm.force_min.to_le_bytes());
    buf.extend_from_slice(&norm.force_max.to_le_bytes());
    buf.extend_from_slice(&(net.params().len() as u32).to_le_bytes());
    for entry in net.params().entries() {
        buf.extend_from_slice(&(entry.name.len() as u32).to_le_bytes());
        buf.extend_from_slice(entry.name.as_bytes());
        buf.extend_from_slice(&(entry.data.len() as u64).to_le_bytes());
        for v in entry.data.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(PoseForceNet, NormalizationSpec)> {
    let bytes = fs::read(path)?;
    let mut r = Reader { bytes: &bytes, at: 0 };

    let magic = r.take(4)?;
    if magic != CHECKPOINT_MAGIC {
        return Err(TrainError::Incompatible(format!(
            "bad magic {magic:02x?}, expected {CHECKPOINT_MAGIC:02x?}"
        )));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(TrainError::Incompatible(format!(
            "format version {version}, this build reads {CHECKPOINT_VERSION}"
        )));
    }
    let config_len = r.u32()? as usize;
    let config: ModelConfig = serde_json::from_slice(r.take(config_len)?)
        .map_err(|e| TrainError::Corrupt(format!("config block: {e}")))?;
    let norm = NormalizationSpec {
        force_min: r.f64()?,
        force_max: r.f64()?,
    };
    norm.validate()
        .map_err(|e| TrainError::Corrupt(format!("normalization bounds: {e}")))?;

    let mut net = build(config)?;
    let n_params = r.u32()? as usize;
    if n_params != net.params().len() {
        return Err(TrainError::Corrupt(format!(
            "{n_params} parameter blobs for a config with {}",
            net.params().len()
        )));
    }
    let mut seen = BTreeSet::new();
    for _ in 0..n_params {
        let name_len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| TrainError::Corrupt("parameter name is not UTF-8".into()))?
            .to_owned();
        let numel = r.u64()? as usize;
        let expected = net
            .params()
            .get(&name)
            .ok_or_else(|| TrainError::Corrupt(format!("unknown parameter {name}")))?
            .data
            .len();
        if numel != expected {
            return Err(TrainError::Corrupt(format!(
                "parameter {name} has {numel} values, config implies {expected}"
            )));
        }
        let mut data = Vec::with_capacity(numel);
        for _ in 0..numel {
            data.push(r.f64()?);
        }
        if !seen.insert(name.clone()) {
            return Err(TrainError::Corrupt(format!("duplicate parameter {name}")));
        }
        net.params_mut()
            .set_data(&name, data)
            .map_err(|e| TrainError::Corrupt(e.to_string()))?;
    }
    if r.at != bytes.len() {
        return Err(TrainError::Corrupt(format!(
            "{} trailing bytes after the last parameter",
            bytes.len() - r.at
        )));
    }
    Ok((net, norm))
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.at + n > self.bytes.len() {
            return Err(TrainError::Corrupt(format!(
                "truncated: wanted {n} bytes at offset {}, file has {}",
                self.at,
                self.bytes.len()
            )));
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
