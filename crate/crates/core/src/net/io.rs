use std::path::Path;

use ndarray::{Array1, Array2};

use super::{Activation, FeedForwardNet, Layer, NetModel, Standardizer};
use crate::error::{format_err, Error, Result};

pub const NET_MAGIC: &[u8; 4] = b"VCNN";
pub const NET_VERSION: u32 = 1;

pub(crate) fn encode(model: &NetModel) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(NET_MAGIC);
    buf.extend_from_slice(&NET_VERSION.to_le_bytes());
    let layers = model.net.layers();
    buf.extend_from_slice(&(layers.len() as u32).to_le_bytes());
    let put = |buf: &mut Vec<u8>, vals: &mut dyn Iterator<Item = &f64>| vals.for_each(|v| buf.extend_from_slice(&v.to_le_bytes()));
    for l in layers {
        buf.extend_from_slice(&(l.input_dim() as u32).to_le_bytes());
        buf.extend_from_slice(&(l.output_dim() as u32).to_le_bytes());
        buf.extend_from_slice(&l.activation.tag().to_le_bytes());
        put(&mut buf, &mut l.weights.iter());
        put(&mut buf, &mut l.bias.iter());
    }
    for n in [&model.input_norm, &model.output_norm] {
        put(&mut buf, &mut n.mean.iter());
        put(&mut buf, &mut n.std.iter());
    }
    buf
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| format_err("VCNN file is truncated"))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn floats(&mut self, n: usize) -> Result<Vec<f64>> {
        let len = n.checked_mul(8).ok_or_else(|| format_err("VCNN dimensions overflow"))?;
        Ok(self
            .take(len)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

pub(crate) fn decode(bytes: &[u8]) -> Result<NetModel> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4).ok() != Some(&NET_MAGIC[..]) {
        return Err(format_err("not a VCNN model file"));
    }
    let version = cur.u32()?;
    if version != NET_VERSION {
        return Err(format_err(format!("unsupported VCNN version {version}")));
    }
    let count = cur.u32()? as usize;
    let mut layers = Vec::new();
    for _ in 0..count {
        let (n_in, n_out) = (cur.u32()? as usize, cur.u32()? as usize);
        let tag = cur.u32()?;
        let activation = Activation::from_tag(tag).ok_or_else(|| format_err(format!("unknown activation tag {tag}")))?;
        let w = cur.floats(n_in * n_out)?;
        let b = cur.floats(n_out)?;
        let weights = Array2::from_shape_vec((n_out, n_in), w).map_err(|e| format_err(e.to_string()))?;
        layers.push(Layer::new(weights, Array1::from(b), activation).map_err(|e| format_err(e.to_string()))?);
    }
    let net = FeedForwardNet::new(layers).map_err(|e| format_err(e.to_string()))?;
    let mut norm = |dim: usize| -> Result<Standardizer> {
        Ok(Standardizer {
            mean: Array1::from(cur.floats(dim)?),
            std: Array1::from(cur.floats(dim)?),
        })
    };
    let input_norm = norm(net.input_dim())?;
    let output_norm = norm(net.output_dim())?;
    if cur.pos != bytes.len() {
        return Err(format_err("trailing bytes after VCNN model"));
    }
    NetModel::new(net, input_norm, output_norm).map_err(|e| format_err(e.to_string()))
}

pub fn write_net(model: &NetModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode(model)).map_err(|e| Error::from(e).at_path(path))
}

pub fn read_net(path: impl AsRef<Path>) -> Result<NetModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::from(e).at_path(path))?;
    decode(&bytes).map_err(|e| e.at_path(path))
}
