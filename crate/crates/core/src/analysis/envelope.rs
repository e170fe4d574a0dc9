use std::sync::Arc;

use ndarray::{Array2, ArrayView1};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{frame_at, hann, AnalysisConfig};
use crate::error::Result;
use crate::featio::{Audio, FeatureTrack};

pub(crate) struct FftPair {
    pub forward: Arc<dyn Fft<f64>>,
    pub inverse: Arc<dyn Fft<f64>>,
}

impl FftPair {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }
}

/// Smooths a log-magnitude half spectrum (`n/2 + 1` bins) by keeping the
/// cepstral coefficients up to `order`. Writes `out.len()` bins.
pub(crate) fn lifter(log_half: &[f64], order: usize, ffts: &FftPair, buf: &mut [Complex<f64>], out: &mut [f64]) {
    let n = buf.len();
    let half = n / 2;
    for k in 0..=half {
        buf[k] = Complex::new(log_half[k], 0.0);
    }
    for k in 1..half {
        buf[n - k] = buf[k];
    }
    ffts.inverse.process(buf);
    let scale = 1.0 / n as f64;
    for (q, c) in buf.iter_mut().enumerate() {
        if q > order && q < n - order {
            *c = Complex::new(0.0, 0.0);
        } else {
            *c = Complex::new(c.re * scale, 0.0);
        }
    }
    ffts.forward.process(buf);
    for (o, c) in out.iter_mut().zip(buf.iter()) {
        *o = c.re;
    }
}

/// Natural-log magnitude envelope, one row of `envelope_order` bins per frame.
pub fn extract_envelope(audio: &Audio, config: &AnalysisConfig) -> Result<FeatureTrack> {
    config.check_audio(audio)?;
    let n = config.fft_size;
    let hop = config.hop(audio.sample_rate);
    let frames = config.frame_count(audio.samples.len(), audio.sample_rate);
    let window = hann(n);
    let ffts = FftPair::new(n);
    let mut raw = vec![0.0; n];
    let mut spec = vec![Complex::new(0.0, 0.0); n];
    let mut log_half = vec![0.0; n / 2 + 1];
    let mut smooth = vec![0.0; config.envelope_order];
    let mut data = Array2::zeros((frames, config.envelope_order));
    let floor = config.log_floor;
    let floor_mag = floor.exp();

    for t in 0..frames {
        frame_at(&audio.samples, t * hop, n, &mut raw);
        if raw.iter().all(|&v| v == 0.0) {
            data.row_mut(t).fill(floor);
            continue;
        }
        for i in 0..n {
            spec[i] = Complex::new(raw[i] * window[i], 0.0);
        }
        ffts.forward.process(&mut spec);
        for k in 0..=n / 2 {
            log_half[k] = spec[k].norm().max(floor_mag).ln();
        }
        lifter(&log_half, config.cepstral_lifter_order, &ffts, &mut spec, &mut smooth);
        for (d, &v) in data.row_mut(t).iter_mut().zip(&smooth) {
            *d = v.max(floor);
        }
    }
    Ok(FeatureTrack::new(data, config.frame_shift_s)?)
}

/// Log RMS level implied by one log-envelope frame: `0.5 ln(mean_k exp(2 e_k))`.
///
/// Shifting every bin by `c` shifts the result by exactly `c`.
pub fn implied_log_intensity(frame: ArrayView1<'_, f64>) -> f64 {
    let max = frame.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mean = frame.iter().map(|&e| (2.0 * (e - max)).exp()).sum::<f64>() / frame.len() as f64;
    max + 0.5 * mean.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn sine(freq: f64, amp: f64, sr: u32, len: usize) -> Audio {
        let samples = (0..len)
            .map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / sr as f64).sin())
            .collect();
        Audio::new(samples, sr)
    }

    #[test]
    fn sine_peak_at_expected_bin() {
        let cfg = AnalysisConfig::default();
        let env = extract_envelope(&sine(1000.0, 0.5, 16000, 16000), &cfg).unwrap();
        assert_eq!(env.dim(), 512);
        let expected = (1000.0 * 1024.0 / 16000.0_f64).round() as isize;
        for t in 10..env.frames() - 10 {
            let row = env.row(t);
            let peak = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0 as isize;
            assert!((peak - expected).abs() <= 1, "frame {t}: peak {peak}");
        }
    }

    #[test]
    fn silence_is_floor() {
        let cfg = AnalysisConfig::default();
        let env = extract_envelope(&Audio::new(vec![0.0; 4000], 16000), &cfg).unwrap();
        assert!(env.data().iter().all(|&v| v == cfg.log_floor));
    }

    #[test]
    fn white_noise_is_flat_within_10_db() {
        let cfg = AnalysisConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let samples: Vec<f64> = (0..16000).map(|_| 0.1 * rng.sample::<f64, _>(StandardNormal)).collect();
        let env = extract_envelope(&Audio::new(samples, 16000), &cfg).unwrap();
        let ten_db = 10.0 / (20.0 / std::f64::consts::LN_10);
        for t in [50, 150] {
            let row = env.row(t);
            let flat = row.mean().unwrap();
            let worst = row.iter().map(|v| (v - flat).abs()).fold(0.0, f64::max);
            assert!(worst <= ten_db, "frame {t}: deviation {worst} nepers from flat");
        }
    }

    #[test]
    fn amplitude_scaling_shifts_log_envelope() {
        let cfg = AnalysisConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let samples: Vec<f64> = (0..8000).map(|_| rng.sample::<f64, _>(StandardNormal) * 0.05).collect();
        let a = extract_envelope(&Audio::new(samples.clone(), 16000), &cfg).unwrap();
        let c = 3.0;
        let b = extract_envelope(&Audio::new(samples.iter().map(|v| v * c).collect(), 16000), &cfg).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((y - x - c.ln()).abs() < 1e-9);
        }
    }

    #[test]
    fn too_short_audio_rejected() {
        let cfg = AnalysisConfig::default();
        assert!(extract_envelope(&Audio::new(vec![0.1; 100], 16000), &cfg).is_err());
    }

    #[test]
    fn implied_intensity_is_shift_covariant() {
        let f = ndarray::array![-1.0, 0.5, 2.0, -3.0];
        let g = f.mapv(|v| v + 0.7);
        assert!((implied_log_intensity(g.view()) - implied_log_intensity(f.view()) - 0.7).abs() < 1e-12);
    }
}
