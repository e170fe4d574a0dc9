//! Simplified analysis/synthesis front end.
//!
//! Envelopes come from a Hann-windowed FFT followed by cepstral liftering,
//! F0 from normalized autocorrelation, intensity from windowed log RMS.
//! [`synthesize`] is a pulse/noise source-filter overlap-add vocoder that
//! inverts the envelope analysis closely enough for round-trip use.

mod deltas;
mod envelope;
mod intensity;
mod lowdim;
mod pitch;
mod synth;

pub use deltas::append_deltas;
pub use envelope::{extract_envelope, implied_log_intensity};
pub use intensity::extract_intensity;
pub use lowdim::{dct_coefficients, dct_reconstruct};
pub use pitch::extract_f0;
pub use synth::synthesize;

use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::featio::Audio;

pub const F0_LABELS: [&str; 2] = ["f0", "vuv"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub fft_size: usize,
    pub frame_shift_s: f64,
    pub envelope_order: usize,
    pub f0_floor_hz: f64,
    pub f0_ceil_hz: f64,
    /// Highest quefrency (in samples) kept when smoothing the log spectrum.
    pub cepstral_lifter_order: usize,
    /// Minimum normalized autocorrelation peak for a frame to count as voiced.
    pub voicing_threshold: f64,
    /// Natural-log floor for envelope and intensity values.
    pub log_floor: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            fft_size: 1024,
            frame_shift_s: 0.005,
            envelope_order: 512,
            f0_floor_hz: 60.0,
            f0_ceil_hz: 400.0,
            cepstral_lifter_order: 40,
            voicing_threshold: 0.3,
            log_floor: -20.0,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        if self.fft_size < 4 || self.fft_size % 2 != 0 {
            return Err(validation(format!("fft_size must be even and >= 4, got {}", self.fft_size)));
        }
        if self.envelope_order != self.fft_size / 2 {
            return Err(validation(format!(
                "envelope_order {} must equal fft_size/2 = {}",
                self.envelope_order,
                self.fft_size / 2
            )));
        }
        if !(self.f0_floor_hz > 0.0 && self.f0_floor_hz < self.f0_ceil_hz && self.f0_ceil_hz < sample_rate as f64 / 2.0) {
            return Err(validation(format!(
                "need 0 < f0_floor ({}) < f0_ceil ({}) < sample_rate/2 ({})",
                self.f0_floor_hz,
                self.f0_ceil_hz,
                sample_rate as f64 / 2.0
            )));
        }
        if self.cepstral_lifter_order == 0 || self.cepstral_lifter_order >= self.fft_size / 2 {
            return Err(validation("cepstral_lifter_order must be in 1..fft_size/2"));
        }
        if self.hop(sample_rate) == 0 {
            return Err(validation("frame shift is shorter than one sample"));
        }
        if !self.log_floor.is_finite() {
            return Err(validation("log_floor must be finite"));
        }
        Ok(())
    }

    /// Frame shift in samples.
    pub fn hop(&self, sample_rate: u32) -> usize {
        (self.frame_shift_s * sample_rate as f64).round() as usize
    }

    /// Number of analysis frames for a signal of `samples` samples.
    pub fn frame_count(&self, samples: usize, sample_rate: u32) -> usize {
        samples / self.hop(sample_rate)
    }

    fn check_audio(&self, audio: &Audio) -> Result<()> {
        self.validate(audio.sample_rate)?;
        if audio.samples.len() < self.fft_size {
            return Err(validation(format!(
                "audio has {} samples, shorter than one {}-sample window",
                audio.samples.len(),
                self.fft_size
            )));
        }
        Ok(())
    }
}

/// Periodic Hann window.
pub(crate) fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// Copies the `len`-sample frame centred on `center`, zero outside the signal.
pub(crate) fn frame_at(samples: &[f64], center: usize, len: usize, out: &mut [f64]) {
    let start = center as isize - (len / 2) as isize;
    for (i, o) in out.iter_mut().enumerate().take(len) {
        let idx = start + i as isize;
        *o = if idx >= 0 && (idx as usize) < samples.len() {
            samples[idx as usize]
        } else {
            0.0
        };
    }
}
