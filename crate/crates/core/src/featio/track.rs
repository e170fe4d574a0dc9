use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use ndarray::{s, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{format_err, validation, Error, Result};

pub const TRACK_MAGIC: &[u8; 4] = b"VCFT";
pub const TRACK_VERSION: u32 = 1;
const HEADER_LEN: usize = 20;

/// Time-indexed matrix of per-frame feature vectors (frames × dims).
///
/// Values are finite, the dimension is at least one and the frame shift is
/// positive. Dimension labels are in-memory metadata only; the binary file
/// format does not carry them.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTrack {
    data: Array2<f64>,
    frame_shift_s: f64,
    dim_labels: Option<Vec<String>>,
}

impl FeatureTrack {
    pub fn new(data: Array2<f64>, frame_shift_s: f64) -> Result<Self> {
        if data.ncols() == 0 {
            return Err(validation("feature track needs at least one dimension"));
        }
        if !(frame_shift_s > 0.0 && frame_shift_s.is_finite()) {
            return Err(validation(format!("frame shift must be positive, got {frame_shift_s}")));
        }
        if let Some(((r, c), v)) = data.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(validation(format!("non-finite value {v} at frame {r}, dim {c}")));
        }
        Ok(Self {
            data,
            frame_shift_s,
            dim_labels: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], dim: usize, frame_shift_s: f64) -> Result<Self> {
        let mut data = Array2::zeros((rows.len(), dim));
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(validation(format!("row {i} has {} values, expected {dim}", row.len())));
            }
            data.row_mut(i).assign(&ArrayView1::from(row.as_slice()));
        }
        Self::new(data, frame_shift_s)
    }

    pub fn empty(dim: usize, frame_shift_s: f64) -> Result<Self> {
        Self::new(Array2::zeros((0, dim)), frame_shift_s)
    }

    pub fn with_labels<S: Into<String>>(mut self, labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() != self.dim() {
            return Err(validation(format!(
                "{} labels for a {}-dim track",
                labels.len(),
                self.dim()
            )));
        }
        self.dim_labels = Some(labels);
        Ok(self)
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }

    pub fn frames(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn frame_shift_s(&self) -> f64 {
        self.frame_shift_s
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.dim_labels.as_deref()
    }

    pub fn has_label(&self, label: &str) -> bool {
        self.labels().is_some_and(|l| l.iter().any(|x| x == label))
    }

    pub fn row(&self, frame: usize) -> ArrayView1<'_, f64> {
        self.data.row(frame)
    }

    pub fn column(&self, dim: usize) -> ArrayView1<'_, f64> {
        self.data.column(dim)
    }

    /// View of frames `start..end`.
    pub fn slice_frames(&self, start: usize, end: usize) -> ArrayView2<'_, f64> {
        self.data.slice(s![start..end, ..])
    }

    /// Leading `dims` columns as a new track.
    pub fn leading_dims(&self, dims: usize) -> Result<FeatureTrack> {
        if dims == 0 || dims > self.dim() {
            return Err(validation(format!("cannot take {dims} of {} dims", self.dim())));
        }
        let mut out = FeatureTrack::new(self.data.slice(s![.., ..dims]).to_owned(), self.frame_shift_s)?;
        if let Some(l) = &self.dim_labels {
            out.dim_labels = Some(l[..dims].to_vec());
        }
        Ok(out)
    }

    /// Replaces the data, keeping frame shift and labels. Same validation as [`FeatureTrack::new`].
    pub fn with_data(&self, data: Array2<f64>) -> Result<FeatureTrack> {
        let mut out = FeatureTrack::new(data, self.frame_shift_s)?;
        if out.dim() == self.dim() {
            out.dim_labels = self.dim_labels.clone();
        }
        Ok(out)
    }

    pub fn frame_to_seconds(&self, frame: usize) -> f64 {
        frame as f64 * self.frame_shift_s
    }

    pub fn seconds_to_frame(&self, seconds: f64) -> usize {
        super::seconds_to_frame(seconds, self.frame_shift_s)
    }
}

fn shift_micros(frame_shift_s: f64) -> Result<u32> {
    let us = frame_shift_s * 1e6;
    let rounded = us.round();
    if (us - rounded).abs() > 1e-6 || rounded < 1.0 || rounded > u32::MAX as f64 {
        return Err(validation(format!(
            "frame shift {frame_shift_s} s is not a whole number of microseconds"
        )));
    }
    Ok(rounded as u32)
}

fn encode(track: &FeatureTrack) -> Result<Vec<u8>> {
    let frames = u32::try_from(track.frames()).map_err(|_| validation("too many frames"))?;
    let dim = u32::try_from(track.dim()).map_err(|_| validation("too many dims"))?;
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * track.data.len());
    buf.extend_from_slice(TRACK_MAGIC);
    buf.extend_from_slice(&TRACK_VERSION.to_le_bytes());
    buf.extend_from_slice(&frames.to_le_bytes());
    buf.extend_from_slice(&dim.to_le_bytes());
    buf.extend_from_slice(&shift_micros(track.frame_shift_s)?.to_le_bytes());
    for row in track.data.axis_iter(Axis(0)) {
        for v in row {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(buf)
}

fn le_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4-byte slice"))
}

pub(crate) fn decode(bytes: &[u8]) -> Result<FeatureTrack> {
    if bytes.len() < HEADER_LEN {
        return Err(format_err(format!("feature file too short ({} bytes)", bytes.len())));
    }
    if &bytes[..4] != TRACK_MAGIC {
        return Err(format_err("bad magic, expected VCFT"));
    }
    let version = le_u32(bytes, 4);
    if version != TRACK_VERSION {
        return Err(format_err(format!("unsupported feature file version {version}")));
    }
    let frames = le_u32(bytes, 8) as usize;
    let dim = le_u32(bytes, 12) as usize;
    let shift_us = le_u32(bytes, 16);
    if dim == 0 {
        return Err(format_err("declared dimension is zero"));
    }
    if shift_us == 0 {
        return Err(format_err("declared frame shift is zero"));
    }
    let expected = frames
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| format_err("declared size overflows"))?;
    if bytes.len() != expected {
        return Err(format_err(format!(
            "declared {frames} frames x {dim} dims needs {expected} bytes, file has {}",
            bytes.len()
        )));
    }
    let values: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let data = Array2::from_shape_vec((frames, dim), values).map_err(|e| format_err(e.to_string()))?;
    FeatureTrack::new(data, shift_us as f64 / 1e6).map_err(|e| format_err(e.to_string()))
}

pub fn write_track(track: &FeatureTrack, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let buf = encode(track).map_err(|e| e.at_path(path))?;
    std::fs::write(path, buf).map_err(|e| Error::from(e).at_path(path))
}

pub fn read_track(path: impl AsRef<Path>) -> Result<FeatureTrack> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::from(e).at_path(path))?;
    decode(&bytes).map_err(|e| e.at_path(path))
}

/// Plain-text dump for debugging: a header comment, then one frame per line.
pub fn write_track_text(track: &FeatureTrack, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let write = || -> std::io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(
            w,
            "# frames={} dim={} frame_shift_s={}",
            track.frames(),
            track.dim(),
            track.frame_shift_s
        )?;
        if let Some(labels) = &track.dim_labels {
            writeln!(w, "# labels {}", labels.join(" "))?;
        }
        for row in track.data.axis_iter(Axis(0)) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        w.flush()
    };
    write().map_err(|e| Error::from(e).at_path(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rejects_non_finite_and_bad_shapes() {
        assert!(FeatureTrack::new(array![[1.0, f64::NAN]], 0.005).is_err());
        assert!(FeatureTrack::new(Array2::zeros((3, 0)), 0.005).is_err());
        assert!(FeatureTrack::new(array![[1.0]], 0.0).is_err());
    }

    #[test]
    fn small_round_trip() {
        let t = FeatureTrack::new(array![[1.0, -2.5], [3.25, 1e-300], [0.0, -0.0]], 0.005).unwrap();
        let back = decode(&encode(&t).unwrap()).unwrap();
        assert_eq!(back, t);
        for (a, b) in t.data().iter().zip(back.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn empty_track_round_trips() {
        let t = FeatureTrack::empty(4, 0.005).unwrap();
        let bytes = encode(&t).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN);
        let back = decode(&bytes).unwrap();
        assert_eq!(back.frames(), 0);
        assert_eq!(back.dim(), 4);
    }

    #[test]
    fn short_data_is_a_format_error() {
        let t = FeatureTrack::new(Array2::from_elem((10, 3), 0.5), 0.005).unwrap();
        let bytes = encode(&t).unwrap();
        let truncated = &bytes[..bytes.len() - 3 * 8];
        assert!(matches!(decode(truncated), Err(Error::Format(_))));
    }

    #[test]
    fn bad_magic_is_a_format_error() {
        let t = FeatureTrack::new(array![[1.0]], 0.005).unwrap();
        let mut bytes = encode(&t).unwrap();
        bytes[0] = b'X';
        assert!(matches!(decode(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn header_layout() {
        let t = FeatureTrack::new(array![[1.0, 2.0]], 0.005).unwrap();
        let bytes = encode(&t).unwrap();
        assert_eq!(&bytes[..4], b"VCFT");
        assert_eq!(le_u32(&bytes, 4), 1);
        assert_eq!(le_u32(&bytes, 8), 1);
        assert_eq!(le_u32(&bytes, 12), 2);
        assert_eq!(le_u32(&bytes, 16), 5000);
        assert_eq!(f64::from_le_bytes(bytes[20..28].try_into().unwrap()), 1.0);
    }
}
