//! Checkpoint container.
//!
//! Layout, little-endian:
//!
//! ```text
//! magic   b"PLDC"
//! version u32 = 1
//! hlen    u32, then hlen bytes of UTF-8 JSON header
//! count   u64, then count f32 parameters
//! ```
//!
//! The header carries the head and train configs, the epoch index and a
//! metric snapshot.

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use super::config::{HeadConfig, TrainConfig};
use super::head::PredictionHead;
use super::train::TaskMetrics;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"PLDC";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    head: HeadConfig,
    train: TrainConfig,
    epoch: usize,
    metrics: TaskMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub head: PredictionHead,
    pub train: TrainConfig,
    pub epoch: usize,
    pub metrics: TaskMetrics,
}

fn encode(ck: &Checkpoint) -> Result<Vec<u8>> {
    let header = Header {
        head: ck.head.config().clone(),
        train: ck.train.clone(),
        epoch: ck.epoch,
        metrics: ck.metrics.clone(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let params = ck.head.params();
    let mut out = Vec::with_capacity(16 + json.len() + 4 * params.len());
    out.extend_from_slice(MAGIC);
    out.write_u32::<LittleEndian>(VERSION).unwrap();
    out.write_u32::<LittleEndian>(json.len() as u32).unwrap();
    out.extend_from_slice(&json);
    out.write_u64::<LittleEndian>(params.len() as u64).unwrap();
    for &p in params {
        let v = p as f32;
        if f64::from(v) != p {
            return Err(Error::Checkpoint("parameter not representable as f32".into()));
        }
        out.write_f32::<LittleEndian>(v).unwrap();
    }
    Ok(out)
}

fn decode(mut r: impl Read) -> Result<Checkpoint> {
    let eof = |_| Error::Checkpoint("unexpected end of data".into());
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(eof)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.read_u32::<LittleEndian>().map_err(eof)?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let hlen = r.read_u32::<LittleEndian>().map_err(eof)? as usize;
    let mut json = vec![0u8; hlen];
    r.read_exact(&mut json).map_err(eof)?;
    let header: Header =
        serde_json::from_slice(&json).map_err(|e| Error::Checkpoint(format!("header: {e}")))?;
    header.train.validate(header.head.task_kind)?;
    let count = r.read_u64::<LittleEndian>().map_err(eof)? as usize;
    let mut params = Vec::with_capacity(count.min(1 << 26));
    for _ in 0..count {
        params.push(f64::from(r.read_f32::<LittleEndian>().map_err(eof)?));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(|e| Error::Checkpoint(e.to_string()))? != 0 {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    let head = PredictionHead::from_parts(header.head, params)?;
    Ok(Checkpoint {
        head,
        train: header.train,
        epoch: header.epoch,
        metrics: header.metrics,
    })
}

pub fn save_checkpoint(path: impl AsRef<Path>, ck: &Checkpoint) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(ck)?;
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&bytes))
        .map_err(|e| Error::io(path, e))
}

/// Load a checkpoint. When `expected` is given, the stored head config must
/// equal it.
pub fn load_checkpoint(path: impl AsRef<Path>, expected: Option<&HeadConfig>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let ck = decode(bytes.as_slice())?;
    if let Some(cfg) = expected {
        if cfg != ck.head.config() {
            return Err(Error::Checkpoint(format!(
                "config mismatch: stored {:?}, expected {:?}",
                ck.head.config(),
                cfg
            )));
        }
    }
    Ok(ck)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_head, TaskKind};

    fn sample() -> Checkpoint {
        let cfg = HeadConfig {
            conv1_channels: 2,
            conv2_channels: 2,
            attention_dim: 4,
            ..HeadConfig::new(16, 4, TaskKind::Rank)
        };
        let mut metrics = TaskMetrics::default();
        metrics.values.insert("accuracy".into(), 0.75);
        Checkpoint {
            head: build_head(&cfg, 9).unwrap(),
            train: TrainConfig::for_task(TaskKind::Rank),
            epoch: 3,
            metrics,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let ck = sample();
        let bytes = encode(&ck).unwrap();
        assert_eq!(decode(bytes.as_slice()).unwrap(), ck);
    }

    #[test]
    fn truncated_and_mismatched() {
        let ck = sample();
        let bytes = encode(&ck).unwrap();
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("head.ckpt");
        save_checkpoint(&path, &ck).unwrap();
        let mut other = ck.head.config().clone();
        other.output_classes = 2;
        assert!(load_checkpoint(&path, Some(&other)).is_err());
        assert!(load_checkpoint(&path, Some(ck.head.config())).is_ok());
    }
}
