use std::path::Path;

use ndarray::Array2;

use super::JointGmmModel;
use crate::error::{format_err, Error, Result};

pub const GMM_MAGIC: &[u8; 4] = b"VCGM";
pub const GMM_VERSION: u32 = 1;

pub(crate) fn encode(model: &JointGmmModel) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(GMM_MAGIC);
    buf.extend_from_slice(&GMM_VERSION.to_le_bytes());
    buf.extend_from_slice(&(model.components() as u32).to_le_bytes());
    buf.extend_from_slice(&(model.dim() as u32).to_le_bytes());
    let values = model
        .weights()
        .iter()
        .chain(model.means().iter())
        .chain(model.covariances().iter().flat_map(|c| c.iter()));
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

pub(crate) fn decode(bytes: &[u8]) -> Result<JointGmmModel> {
    if bytes.len() < 16 || &bytes[..4] != GMM_MAGIC {
        return Err(format_err("not a VCGM model file"));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes")) as usize;
    if word(4) as u32 != GMM_VERSION {
        return Err(format_err(format!("unsupported VCGM version {}", word(4))));
    }
    let (k, d) = (word(8), word(12));
    let jd = 2 * d;
    let count = k + k * jd + k * jd * jd;
    if k == 0 || d == 0 || bytes.len() != 16 + 8 * count {
        return Err(format_err(format!("VCGM size mismatch for K={k}, d={d}")));
    }
    let vals: Vec<f64> = bytes[16..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let weights = vals[..k].to_vec();
    let means = Array2::from_shape_vec((k, jd), vals[k..k + k * jd].to_vec()).map_err(|e| format_err(e.to_string()))?;
    let off = k + k * jd;
    let covariances = (0..k)
        .map(|i| Array2::from_shape_vec((jd, jd), vals[off + i * jd * jd..off + (i + 1) * jd * jd].to_vec()).expect("sized"))
        .collect();
    JointGmmModel::new(d, weights, means, covariances).map_err(|e| format_err(e.to_string()))
}

pub fn write_gmm(model: &JointGmmModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode(model)).map_err(|e| Error::from(e).at_path(path))
}

pub fn read_gmm(path: impl AsRef<Path>) -> Result<JointGmmModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::from(e).at_path(path))?;
    decode(&bytes).map_err(|e| e.at_path(path))
}
