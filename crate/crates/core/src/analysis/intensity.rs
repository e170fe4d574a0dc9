use ndarray::Array2;

use super::{frame_at, hann, AnalysisConfig};
use crate::error::Result;
use crate::featio::{Audio, FeatureTrack};

/// Per-frame log RMS of the Hann-windowed signal, normalized by the window
/// energy so that a sinusoid of amplitude `a` reads `ln(a / sqrt 2)`.
pub fn extract_intensity(audio: &Audio, config: &AnalysisConfig) -> Result<FeatureTrack> {
    config.check_audio(audio)?;
    let n = config.fft_size;
    let hop = config.hop(audio.sample_rate);
    let frames = config.frame_count(audio.samples.len(), audio.sample_rate);
    let window = hann(n);
    let window_energy: f64 = window.iter().map(|w| w * w).sum();
    let mut raw = vec![0.0; n];
    let mut data = Array2::zeros((frames, 1));
    for t in 0..frames {
        frame_at(&audio.samples, t * hop, n, &mut raw);
        let energy: f64 = raw.iter().zip(&window).map(|(x, w)| (x * w) * (x * w)).sum();
        let level = if energy > 0.0 {
            0.5 * (energy / window_energy).ln()
        } else {
            config.log_floor
        };
        data[[t, 0]] = level.max(config.log_floor);
    }
    Ok(FeatureTrack::new(data, config.frame_shift_s)?.with_labels(["intensity"])?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(amp: f64) -> Audio {
        let samples = (0..16000)
            .map(|i| amp * (2.0 * std::f64::consts::PI * 440.0 * i as f64 / 16000.0).sin())
            .collect();
        Audio::new(samples, 16000)
    }

    #[test]
    fn sine_level_matches_closed_form() {
        let cfg = AnalysisConfig::default();
        let a = 0.3;
        let track = extract_intensity(&sine(a), &cfg).unwrap();
        // interior frames only; edge frames see zero padding
        for t in 20..track.frames() - 20 {
            assert!((track.data()[[t, 0]] - (a / 2f64.sqrt()).ln()).abs() < 1e-3);
        }
    }

    #[test]
    fn silence_is_floor() {
        let cfg = AnalysisConfig::default();
        let track = extract_intensity(&Audio::new(vec![0.0; 3000], 16000), &cfg).unwrap();
        assert!(track.data().iter().all(|&v| v == cfg.log_floor));
    }

    #[test]
    fn doubling_amplitude_adds_ln2() {
        let cfg = AnalysisConfig::default();
        let a = extract_intensity(&sine(0.2), &cfg).unwrap();
        let b = extract_intensity(&sine(0.4), &cfg).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((y - x - 2f64.ln()).abs() < 1e-12);
        }
    }
}
