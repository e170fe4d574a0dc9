use std::path::Path;

use super::{column_of, F0Scale};
use crate::error::{format_err, validation, Error, Result};
use crate::featio::FeatureTrack;

/// Global F0 statistics over voiced frames of the source and target
/// training data, in the modelling scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanVarStats {
    pub source_mean: f64,
    pub source_std: f64,
    pub target_mean: f64,
    pub target_std: f64,
}

fn voiced_moments<'a>(tracks: impl IntoIterator<Item = &'a FeatureTrack>, scale: F0Scale) -> Result<(f64, f64)> {
    let mut values = Vec::new();
    for t in tracks {
        let f0 = column_of(t, "f0", 0)?;
        let vuv = column_of(t, "vuv", 1)?;
        values.extend(
            t.column(f0)
                .iter()
                .zip(t.column(vuv))
                .filter(|(f, v)| **v > 0.5 && **f > 0.0)
                .map(|(f, _)| scale.to_model(*f)),
        );
    }
    if values.len() < 2 {
        return Err(Error::Training("too few voiced frames for F0 statistics".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

impl MeanVarStats {
    pub fn new(source_mean: f64, source_std: f64, target_mean: f64, target_std: f64) -> Result<Self> {
        let all = [source_mean, source_std, target_mean, target_std];
        if all.iter().any(|v| !v.is_finite()) || !(source_std > 0.0 && target_std > 0.0) {
            return Err(validation(format!("invalid mean-variance statistics {all:?}")));
        }
        Ok(Self {
            source_mean,
            source_std,
            target_mean,
            target_std,
        })
    }

    /// Statistics from `[f0, vuv]` tracks; the standard deviation is the
    /// population one.
    pub fn from_tracks<'a>(
        source: impl IntoIterator<Item = &'a FeatureTrack>,
        target: impl IntoIterator<Item = &'a FeatureTrack>,
        scale: F0Scale,
    ) -> Result<Self> {
        let (ms, ss) = voiced_moments(source, scale)?;
        let (mt, st) = voiced_moments(target, scale)?;
        Self::new(ms, ss, mt, st).map_err(|e| Error::Training(e.to_string()))
    }

    /// `μt + (σt/σs)(f − μs)`.
    pub fn transform(&self, f: f64) -> f64 {
        self.target_mean + (self.target_std / self.source_std) * (f - self.source_mean)
    }

    /// Predicted target segment mean for a source segment mean.
    pub fn predict_segment_mean(&self, source_mean: f64) -> f64 {
        self.transform(source_mean)
    }

    /// Converts every voiced frame of an `[f0, vuv]` track; unvoiced frames
    /// become zero.
    pub fn transform_track(&self, f0vuv: &FeatureTrack, scale: F0Scale) -> Result<FeatureTrack> {
        let f0 = column_of(f0vuv, "f0", 0)?;
        let vuv = column_of(f0vuv, "vuv", 1)?;
        let mut data = f0vuv.data().clone();
        for mut row in data.rows_mut() {
            row[f0] = if row[vuv] > 0.5 && row[f0] > 0.0 {
                scale.to_hz(self.transform(scale.to_model(row[f0])))
            } else {
                0.0
            };
        }
        f0vuv.with_data(data)
    }
}

/// Writes the four statistics as text: source mean, source std, target
/// mean, target std.
pub fn write_meanvar(stats: &MeanVarStats, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = format!(
        "{:?} {:?} {:?} {:?}\n",
        stats.source_mean, stats.source_std, stats.target_mean, stats.target_std
    );
    std::fs::write(path, text).map_err(|e| Error::from(e).at_path(path))
}

pub fn read_meanvar(path: impl AsRef<Path>) -> Result<MeanVarStats> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).at_path(path))?;
    let values = text
        .split_whitespace()
        .map(|w| w.parse::<f64>().map_err(|_| format_err(format!("bad number {w:?}"))))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.at_path(path))?;
    if values.len() != 4 {
        return Err(format_err(format!("expected four statistics, found {}", values.len())).at_path(path));
    }
    MeanVarStats::new(values[0], values[1], values[2], values[3]).map_err(|e| e.at_path(path))
}
