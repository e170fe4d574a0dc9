//! Segment-level prosody: voiced-segment F0 and intensity trajectories,
//! the global mean-variance F0 baseline, and phone duration modelling.

mod duration;
mod meanvar;
mod pairing;

pub use duration::{apply_duration, build_duration_samples, duration_inputs, sample_indices, DurationSample, MAX_RATIO, MIN_RATIO};
pub use meanvar::{read_meanvar, write_meanvar, MeanVarStats};
pub use pairing::{build_f0_training_set, build_intensity_training_set, pair_segments, AlignedProsody, ProsodyTrainingSet};

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{s, Array2, ArrayView1};

use crate::analysis::implied_log_intensity;
use crate::error::{validation, Error, Result};
use crate::featio::FeatureTrack;

/// Default normalized segment length.
pub const DEFAULT_SEGMENT_LENGTH: usize = 55;

/// Whether F0 is modelled in Hz or in natural-log Hz.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum F0Scale {
    #[default]
    Hz,
    LogHz,
}

impl F0Scale {
    pub fn to_model(self, hz: f64) -> f64 {
        match self {
            F0Scale::Hz => hz,
            F0Scale::LogHz => hz.ln(),
        }
    }

    pub fn to_hz(self, value: f64) -> f64 {
        match self {
            F0Scale::Hz => value,
            F0Scale::LogHz => value.exp(),
        }
    }
}

/// A maximal run of voiced frames with its length-normalized trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct VoicedSegment {
    pub start: usize,
    /// Exclusive.
    pub end: usize,
    pub original_values: Vec<f64>,
    pub normalized: Vec<f64>,
    pub mean: f64,
}

impl VoicedSegment {
    pub fn from_values(start: usize, values: &[f64], length: usize) -> Result<Self> {
        if values.len() < 2 || length < 2 {
            return Err(validation("segments and their normalized length need at least two frames"));
        }
        Ok(Self {
            start,
            end: start + values.len(),
            original_values: values.to_vec(),
            normalized: resample_linear(values, length),
            mean: values.iter().sum::<f64>() / values.len() as f64,
        })
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// Linear interpolation of `values` onto `length` evenly spaced points that
/// include both endpoints.
pub fn resample_linear(values: &[f64], length: usize) -> Vec<f64> {
    let n = values.len();
    match (n, length) {
        (_, 0) | (0, _) => Vec::new(),
        (1, _) => vec![values[0]; length],
        (_, 1) => vec![values[0]],
        _ if n == length => values.to_vec(),
        _ => {
            let span = (n - 1) as f64 / (length - 1) as f64;
            (0..length)
                .map(|i| {
                    if i == length - 1 {
                        return values[n - 1];
                    }
                    let pos = i as f64 * span;
                    let lo = pos.floor() as usize;
                    let frac = pos - lo as f64;
                    if frac == 0.0 {
                        values[lo]
                    } else {
                        values[lo] + frac * (values[lo + 1] - values[lo])
                    }
                })
                .collect()
        }
    }
}

/// Maximal runs of voiced frames, `(start, end)` with `end` exclusive.
/// Runs shorter than two frames are dropped.
pub fn voiced_runs(vuv: ArrayView1<'_, f64>) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, &v) in vuv.iter().enumerate() {
        match (v > 0.5, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, vuv.len()));
    }
    runs.retain(|(a, b)| b - a >= 2);
    runs
}

/// Column index of `label`, falling back to `default` for unlabeled tracks.
pub(crate) fn column_of(track: &FeatureTrack, label: &str, default: usize) -> Result<usize> {
    let idx = match track.labels() {
        Some(labels) => labels.iter().position(|l| l == label),
        None => Some(default),
    };
    idx.filter(|&i| i < track.dim())
        .ok_or_else(|| validation(format!("track has no {label:?} dimension")))
}

/// Cuts a values column into segments along the given voiced runs.
pub fn segments_from_runs(values: ArrayView1<'_, f64>, runs: &[(usize, usize)], length: usize) -> Result<Vec<VoicedSegment>> {
    runs.iter()
        .map(|&(a, b)| {
            if b > values.len() {
                return Err(validation(format!("segment {a}..{b} exceeds {} frames", values.len())));
            }
            VoicedSegment::from_values(a, &values.slice(s![a..b]).to_vec(), length)
        })
        .collect()
}

/// Voiced segments of an `[f0, vuv]` track, normalized to `length` points.
pub fn extract_voiced_segments(f0vuv: &FeatureTrack, length: usize) -> Result<Vec<VoicedSegment>> {
    let f0 = column_of(f0vuv, "f0", 0)?;
    let vuv = column_of(f0vuv, "vuv", 1)?;
    let runs = voiced_runs(f0vuv.column(vuv));
    segments_from_runs(f0vuv.column(f0), &runs, length)
}

/// Differences of adjacent normalized values, with a leading zero.
pub fn f0_to_diff(segment: &VoicedSegment) -> Vec<f64> {
    diff(&segment.normalized)
}

pub(crate) fn diff(values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    if values.is_empty() {
        return out;
    }
    out.push(0.0);
    out.extend(values.windows(2).map(|w| w[1] - w[0]));
    out
}

/// Cumulative sum of the differences starting at zero, shifted so its mean
/// is `mean`, at the normalized length.
pub fn integrate_diff(diff: &[f64], mean: f64) -> Vec<f64> {
    let mut acc = 0.0;
    let mut traj: Vec<f64> = diff
        .iter()
        .enumerate()
        .map(|(i, d)| {
            if i > 0 {
                acc += d;
            }
            acc
        })
        .collect();
    let current = traj.iter().sum::<f64>() / traj.len().max(1) as f64;
    traj.iter_mut().for_each(|v| *v = *v - current + mean);
    traj
}

/// Rebuilds an F0 trajectory of `original_length` frames from its
/// difference feature and a segment mean.
pub fn reconstruct_f0(diff: &[f64], mean: f64, original_length: usize) -> Result<Vec<f64>> {
    if diff.len() < 2 || original_length < 2 {
        return Err(validation("reconstruction needs at least two values and two output frames"));
    }
    Ok(resample_linear(&integrate_diff(diff, mean), original_length))
}

/// Shifts each voiced segment's envelope frames so their implied log
/// intensity equals the per-frame predicted value. `predicted` holds
/// `(start_frame, values)` for each segment; other frames are untouched.
pub fn apply_intensity(envelope: &FeatureTrack, predicted: &[(usize, Vec<f64>)]) -> Result<FeatureTrack> {
    let mut data = envelope.data().clone();
    for (start, values) in predicted {
        let end = start + values.len();
        if end > data.nrows() {
            return Err(validation(format!(
                "intensity segment {start}..{end} exceeds {} frames",
                data.nrows()
            )));
        }
        for (t, target) in (*start..end).zip(values) {
            let offset = target - implied_log_intensity(data.row(t));
            data.row_mut(t).mapv_inplace(|v| v + offset);
        }
    }
    envelope.with_data(data)
}

/// Builds frame-level F0 model inputs: envelope features with deltas, a
/// seven-frame window of F0 values with deltas, and the voicing flag.
pub fn f0_frame_features(envelope_features: &FeatureTrack, f0vuv: &FeatureTrack, scale: F0Scale) -> Result<Array2<f64>> {
    if envelope_features.frames() != f0vuv.frames() {
        return Err(validation("envelope and F0 tracks differ in length"));
    }
    let n = f0vuv.frames();
    let f0c = column_of(f0vuv, "f0", 0)?;
    let vuvc = column_of(f0vuv, "vuv", 1)?;
    let f0: Vec<f64> = f0vuv
        .column(f0c)
        .iter()
        .map(|&v| if v > 0.0 { scale.to_model(v) } else { 0.0 })
        .collect();
    let env = crate::analysis::append_deltas(envelope_features)?;
    let ed = env.dim();
    let mut out = Array2::zeros((n, ed + 7 + 2 + 1));
    let at = |t: isize| f0[t.clamp(0, n as isize - 1) as usize];
    for t in 0..n {
        let mut row = out.row_mut(t);
        row.slice_mut(s![..ed]).assign(&env.row(t));
        let ti = t as isize;
        for k in 0..7 {
            row[ed + k] = at(ti + k as isize - 3);
        }
        row[ed + 7] = (at(ti + 1) - at(ti - 1)) / 2.0;
        row[ed + 8] = at(ti + 1) - 2.0 * at(ti) + at(ti - 1);
        row[ed + 9] = f0vuv.column(vuvc)[t];
    }
    Ok(out)
}

/// Writes `utt_id seg_idx start end mean` followed by the normalized values,
/// one segment per line.
pub fn write_segments(utt_id: &str, segments: &[VoicedSegment], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for (i, seg) in segments.iter().enumerate() {
        let _ = write!(out, "{utt_id} {i} {} {} {}", seg.start, seg.end, seg.mean);
        for v in &seg.normalized {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::from(e).at_path(path))
}
