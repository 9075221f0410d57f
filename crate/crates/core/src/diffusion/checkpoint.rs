use super::net::{DenoiserNet, NetConfig};
use super::schedule::ScheduleKind;
use crate::autodiff::Tensor;
use crate::{Error, Result};
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"RGD1";

/// Everything needed to rebuild the model and reproduce its training run.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CheckpointMeta {
    pub net: NetConfig,
    /// Forward-process step count the model was trained under.
    pub train_steps: usize,
    pub schedule: ScheduleKind,
    pub seed: u64,
    pub epochs: usize,
}

/// Layout: magic "RGD1", u32 LE metadata length, JSON metadata, then the
/// parameters in graph order as raw little-endian f32. Reload is bit-exact.
pub fn save_checkpoint(net: &DenoiserNet, meta: &CheckpointMeta, path: &Path) -> Result<()> {
    if meta.net != net.cfg {
        return Err(Error::Checkpoint("metadata config disagrees with the network".into()));
    }
    let json = serde_json::to_vec(meta)?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(json.len() as u32).to_le_bytes())?;
    w.write_all(&json)?;
    for p in &net.params {
        for v in p.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(DenoiserNet, CheckpointMeta)> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| Error::Checkpoint("truncated header".into()))?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint(format!("bad magic {magic:?}")));
    }
    let mut len = [0u8; 4];
    r.read_exact(&mut len).map_err(|_| Error::Checkpoint("truncated header".into()))?;
    let mut json = vec![0u8; u32::from_le_bytes(len) as usize];
    r.read_exact(&mut json).map_err(|_| Error::Checkpoint("truncated metadata".into()))?;
    let meta: CheckpointMeta = serde_json::from_slice(&json)?;
    // shapes come from the config; the raw tail must match them exactly
    let shapes = DenoiserNet::param_shapes_of(&meta.net);
    let mut params = Vec::with_capacity(shapes.len());
    for shape in shapes {
        let n: usize = shape.iter().product();
        let mut buf = vec![0u8; n * 4];
        r.read_exact(&mut buf)
            .map_err(|_| Error::Checkpoint("parameter payload shorter than config".into()))?;
        let data = buf.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        params.push(Tensor::from_vec(&shape, data)?);
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Checkpoint("trailing bytes after parameters".into()));
    }
    Ok((DenoiserNet::with_params(meta.net.clone(), params)?, meta))
}
