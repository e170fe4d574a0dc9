//! Objective evaluation: log spectral distortion ratio and F0 RMSE.

mod report;

pub use report::{EvalReport, UtteranceScores};

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::featio::FeatureTrack;

/// How envelope values are stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvelopeDomain {
    /// Natural-log magnitudes.
    #[default]
    Log,
    /// Linear magnitudes, logged before comparison.
    Linear,
}

/// Squared log-spectral distance between two frames.
pub fn frame_distortion(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>, domain: EnvelopeDomain) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(&x, &y)| {
            let d = match domain {
                EnvelopeDomain::Log => x - y,
                EnvelopeDomain::Linear => x.ln() - y.ln(),
            };
            d * d
        })
        .sum()
}

/// Running sums behind an LSD ratio.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LsdSums {
    pub numerator: f64,
    pub denominator: f64,
    pub frames: usize,
}

impl LsdSums {
    /// Adds one frame triple unless its source-to-target term is zero.
    pub fn add(&mut self, source: ArrayView1<'_, f64>, converted: ArrayView1<'_, f64>, target: ArrayView1<'_, f64>, domain: EnvelopeDomain) {
        let den = frame_distortion(source, target, domain);
        if den == 0.0 {
            return;
        }
        self.numerator += frame_distortion(converted, target, domain);
        self.denominator += den;
        self.frames += 1;
    }

    pub fn percent(&self) -> Result<f64> {
        if self.denominator == 0.0 {
            return Err(Error::UndefinedMetric("source and target coincide on every frame".into()));
        }
        let v = 100.0 * self.numerator / self.denominator;
        if !v.is_finite() {
            return Err(Error::UndefinedMetric("distortion is not finite".into()));
        }
        Ok(v)
    }
}

fn check_same_shape(views: &[ArrayView2<'_, f64>]) -> Result<()> {
    let dim = views[0].dim();
    if views.iter().any(|v| v.dim() != dim) {
        return Err(validation(format!(
            "LSD inputs differ in shape: {:?}",
            views.iter().map(|v| v.dim()).collect::<Vec<_>>()
        )));
    }
    Ok(())
}

/// LSD sums over frame-aligned matrices, restricted to frames where `mask`
/// is true when one is given.
pub fn lsd_sums(
    source: ArrayView2<'_, f64>,
    converted: ArrayView2<'_, f64>,
    target: ArrayView2<'_, f64>,
    domain: EnvelopeDomain,
    mask: Option<&[bool]>,
) -> Result<LsdSums> {
    check_same_shape(&[source, converted, target])?;
    if mask.is_some_and(|m| m.len() != source.nrows()) {
        return Err(validation("LSD frame mask has the wrong length"));
    }
    let mut sums = LsdSums::default();
    for k in 0..source.nrows() {
        if mask.is_none_or(|m| m[k]) {
            sums.add(source.row(k), converted.row(k), target.row(k), domain);
        }
    }
    Ok(sums)
}

/// `100 · Σ d(converted, target) / Σ d(source, target)` over frame-aligned
/// tracks.
pub fn lsd_ratio(source: &FeatureTrack, converted: &FeatureTrack, target: &FeatureTrack, domain: EnvelopeDomain) -> Result<f64> {
    lsd_sums(source.data().view(), converted.data().view(), target.data().view(), domain, None)?.percent()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F0Rmse {
    pub rmse_hz: f64,
    /// Frames voiced in both tracks.
    pub frames: usize,
    /// Frames voiced in exactly one track.
    pub mismatched: usize,
}

/// RMSE over paired `(converted, target)` F0 values, where zero means
/// unvoiced.
pub fn f0_rmse_pairs(pairs: impl IntoIterator<Item = (f64, f64)>) -> Result<F0Rmse> {
    let (mut sse, mut frames, mut mismatched) = (0.0, 0, 0);
    for (c, t) in pairs {
        match (c > 0.0, t > 0.0) {
            (true, true) => {
                sse += (c - t) * (c - t);
                frames += 1;
            }
            (false, false) => {}
            _ => mismatched += 1,
        }
    }
    if frames == 0 {
        return Err(Error::UndefinedMetric("no frame is voiced in both tracks".into()));
    }
    Ok(F0Rmse {
        rmse_hz: (sse / frames as f64).sqrt(),
        frames,
        mismatched,
    })
}

fn voiced_f0(track: &FeatureTrack) -> Result<Vec<f64>> {
    let f0 = crate::prosody::column_of(track, "f0", 0)?;
    let vuv = crate::prosody::column_of(track, "vuv", 1).ok();
    Ok((0..track.frames())
        .map(|t| {
            let voiced = vuv.is_none_or(|c| track.data()[[t, c]] > 0.5);
            if voiced {
                track.data()[[t, f0]]
            } else {
                0.0
            }
        })
        .collect())
}

/// RMSE between frame-aligned `[f0, vuv]` tracks over frames voiced in both.
pub fn f0_rmse(converted: &FeatureTrack, target: &FeatureTrack) -> Result<F0Rmse> {
    if converted.frames() != target.frames() {
        return Err(validation(format!(
            "F0 tracks differ in length: {} vs {}",
            converted.frames(),
            target.frames()
        )));
    }
    let c = voiced_f0(converted)?;
    let t = voiced_f0(target)?;
    f0_rmse_pairs(c.into_iter().zip(t))
}
