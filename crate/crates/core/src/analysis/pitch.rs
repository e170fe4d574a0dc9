use ndarray::Array2;
use rustfft::num_complex::Complex;

use super::envelope::{lifter, FftPair};
use super::{frame_at, hann, AnalysisConfig, F0_LABELS};
use crate::error::Result;
use crate::featio::{Audio, FeatureTrack};

/// Score bonus per octave of shorter lag. Breaks the near-ties between a
/// period and its multiples without favouring half-period peaks.
const OCTAVE_COST: f64 = 0.1;
const MIN_FRAME_RMS: f64 = 1e-7;
const PERIODS_PER_WINDOW: f64 = 2.0;
/// Deviation from the run median, in octaves, treated as a tracking error.
const OCTAVE_JUMP: f64 = 0.6;
/// Shorter voiced runs are almost always spurious.
const MIN_VOICED_RUN: usize = 3;
/// Minimum mean power of the central hop relative to the whole window.
const MIN_CENTRE_ENERGY: f64 = 0.1;

/// Autocorrelation of one frame after spectral whitening, normalized so a
/// perfectly periodic signal scores close to 1 at its period.
///
/// Dividing the spectrum by its cepstrally smoothed envelope keeps a strong
/// narrow formant from masquerading as the fundamental, and dividing by the
/// window's own autocorrelation removes the taper's decay over lag.
struct Correlator {
    window: Vec<f64>,
    window_acf: Vec<f64>,
    ffts: FftPair,
    buf: Vec<Complex<f64>>,
    log_half: Vec<f64>,
    smooth: Vec<f64>,
    whitening_order: usize,
}

impl Correlator {
    fn new(len: usize, whitening_order: usize) -> Self {
        let size = (2 * len).next_power_of_two();
        let window = hann(len);
        let ffts = FftPair::new(size);
        let mut buf = vec![Complex::new(0.0, 0.0); size];
        for (s, w) in buf.iter_mut().zip(&window) {
            *s = Complex::new(*w, 0.0);
        }
        ffts.forward.process(&mut buf);
        let window_acf = autocorrelation_of_spectrum(&ffts, &mut buf);
        Self {
            window,
            window_acf,
            ffts,
            buf,
            log_half: vec![0.0; size / 2 + 1],
            smooth: vec![0.0; size / 2 + 1],
            whitening_order,
        }
    }

    fn correlate(&mut self, frame: &[f64], out: &mut Vec<f64>) {
        let size = self.buf.len();
        let half = size / 2;
        self.buf.fill(Complex::new(0.0, 0.0));
        for ((s, x), w) in self.buf.iter_mut().zip(frame).zip(&self.window) {
            *s = Complex::new(x * w, 0.0);
        }
        self.ffts.forward.process(&mut self.buf);
        let peak = self.buf[..=half].iter().map(|c| c.norm()).fold(0.0, f64::max);
        let floor = (peak * 1e-6).max(f64::MIN_POSITIVE);
        for k in 0..=half {
            self.log_half[k] = self.buf[k].norm().max(floor).ln();
        }
        lifter(&self.log_half, self.whitening_order, &self.ffts, &mut self.buf, &mut self.smooth);
        for k in 0..=half {
            self.buf[k] = Complex::new((self.log_half[k] - self.smooth[k]).exp(), 0.0);
        }
        for k in 1..half {
            self.buf[size - k] = self.buf[k];
        }
        let acf = autocorrelation_of_spectrum(&self.ffts, &mut self.buf);
        out.clear();
        out.extend(acf.iter().zip(&self.window_acf).map(|(&a, &w)| if w > 0.0 { a / w } else { 0.0 }));
    }
}

/// `r[l] / r[0]` for the first half of the lags, given a spectrum in `buf`
/// (only magnitudes matter). `buf` is overwritten.
fn autocorrelation_of_spectrum(ffts: &FftPair, buf: &mut [Complex<f64>]) -> Vec<f64> {
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    ffts.inverse.process(buf);
    let r0 = buf[0].re;
    buf[..buf.len() / 2].iter().map(|c| if r0 > 0.0 { c.re / r0 } else { 0.0 }).collect()
}

/// Picks the period (in fractional samples) for one frame, or `None` if unvoiced.
fn pick_period(r: &[f64], lag_min: usize, lag_max: usize, threshold: f64) -> Option<f64> {
    let peaks: Vec<usize> = (lag_min.max(1)..=lag_max)
        .filter(|&l| r[l] >= r[l - 1] && r[l] >= r[l + 1])
        .collect();
    let best = peaks.iter().map(|&l| r[l]).fold(f64::NEG_INFINITY, f64::max);
    if !(best >= threshold) {
        return None;
    }
    let score = |l: usize| r[l] + OCTAVE_COST * (lag_max as f64 / l as f64).log2();
    let lag = peaks
        .iter()
        .copied()
        .filter(|&l| r[l] >= threshold)
        .max_by(|&a, &b| score(a).total_cmp(&score(b)))?;
    let (a, b, c) = (r[lag - 1], r[lag], r[lag + 1]);
    let denom = a - 2.0 * b + c;
    let offset = if denom.abs() > 1e-12 { 0.5 * (a - c) / denom } else { 0.0 };
    Some(lag as f64 + offset.clamp(-0.5, 0.5))
}

/// F0 in Hz and a 0/1 voicing flag per frame. F0 is exactly zero on
/// unvoiced frames and within `[f0_floor_hz, f0_ceil_hz]` on voiced ones.
pub fn extract_f0(audio: &Audio, config: &AnalysisConfig) -> Result<FeatureTrack> {
    config.check_audio(audio)?;
    let sr = audio.sample_rate as f64;
    let hop = config.hop(audio.sample_rate);
    let frames = config.frame_count(audio.samples.len(), audio.sample_rate);
    // two periods of the lowest F0 keep the window correction well conditioned
    let len = config.fft_size.max((PERIODS_PER_WINDOW * sr / config.f0_floor_hz).ceil() as usize);
    let lag_min = ((sr / config.f0_ceil_hz).floor() as usize).max(2);
    let lag_max = ((sr / config.f0_floor_hz).ceil() as usize).min(len / 2 - 2);
    let mut correlator = Correlator::new(len, (lag_min / 2).max(1));
    let mut raw = vec![0.0; len];
    let mut r = Vec::new();
    let mut data = Array2::zeros((frames, 2));
    for t in 0..frames {
        frame_at(&audio.samples, t * hop, len, &mut raw);
        let mean = raw.iter().sum::<f64>() / len as f64;
        raw.iter_mut().for_each(|v| *v -= mean);
        let rms = (raw.iter().map(|v| v * v).sum::<f64>() / len as f64).sqrt();
        if rms < MIN_FRAME_RMS {
            continue;
        }
        // a window that only reaches into voicing at its edge is not voiced here
        let centre = &raw[(len - hop) / 2..(len + hop) / 2];
        let centre_ms = centre.iter().map(|v| v * v).sum::<f64>() / centre.len() as f64;
        if centre_ms < MIN_CENTRE_ENERGY * rms * rms {
            continue;
        }
        correlator.correlate(&raw, &mut r);
        if let Some(period) = pick_period(&r, lag_min, lag_max, config.voicing_threshold) {
            data[[t, 0]] = (sr / period).clamp(config.f0_floor_hz, config.f0_ceil_hz);
            data[[t, 1]] = 1.0;
        }
    }
    clean_voicing(&mut data, config);
    Ok(FeatureTrack::new(data, config.frame_shift_s)?.with_labels(F0_LABELS)?)
}

/// Unvoices runs shorter than [`MIN_VOICED_RUN`] frames, then, within each
/// remaining run, moves frames more than ~half an octave from the
/// run's median by whole octaves towards it.
fn clean_voicing(data: &mut Array2<f64>, config: &AnalysisConfig) {
    let frames = data.nrows();
    let mut t = 0;
    while t < frames {
        if data[[t, 1]] == 0.0 {
            t += 1;
            continue;
        }
        let start = t;
        while t < frames && data[[t, 1]] != 0.0 {
            t += 1;
        }
        if t - start < MIN_VOICED_RUN {
            for i in start..t {
                data[[i, 0]] = 0.0;
                data[[i, 1]] = 0.0;
            }
            continue;
        }
        let mut logs: Vec<f64> = (start..t).map(|i| data[[i, 0]].log2()).collect();
        logs.sort_by(f64::total_cmp);
        let median = logs[logs.len() / 2];
        for i in start..t {
            let dev = data[[i, 0]].log2() - median;
            if dev.abs() > OCTAVE_JUMP {
                let fixed = data[[i, 0]] * (-dev.round()).exp2();
                if (config.f0_floor_hz..=config.f0_ceil_hz).contains(&fixed) {
                    data[[i, 0]] = fixed;
                }
            }
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    pub(crate) fn sawtooth(f0: f64, sr: u32, len: usize) -> Audio {
        let samples = (0..len)
            .map(|i| {
                let phase = (f0 * i as f64 / sr as f64).fract();
                0.5 * (2.0 * phase - 1.0)
            })
            .collect();
        Audio::new(samples, sr)
    }

    fn check_consistency(track: &FeatureTrack, cfg: &AnalysisConfig) {
        for row in track.data().rows() {
            if row[1] == 0.0 {
                assert_eq!(row[0], 0.0);
            } else {
                assert_eq!(row[1], 1.0);
                assert!(row[0] >= cfg.f0_floor_hz && row[0] <= cfg.f0_ceil_hz);
            }
        }
    }

    #[test]
    fn sawtooth_200hz() {
        let cfg = AnalysisConfig::default();
        let track = extract_f0(&sawtooth(200.0, 16000, 16000), &cfg).unwrap();
        check_consistency(&track, &cfg);
        let good = track
            .data()
            .rows()
            .into_iter()
            .filter(|r| r[1] == 1.0 && (r[0] - 200.0).abs() <= 3.0)
            .count();
        assert!(good as f64 >= 0.9 * track.frames() as f64, "{good}/{}", track.frames());
    }

    #[test]
    fn white_noise_mostly_unvoiced() {
        let cfg = AnalysisConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let samples: Vec<f64> = (0..16000).map(|_| 0.2 * rng.sample::<f64, _>(StandardNormal)).collect();
        let track = extract_f0(&Audio::new(samples, 16000), &cfg).unwrap();
        check_consistency(&track, &cfg);
        let unvoiced = track.column(1).iter().filter(|&&v| v == 0.0).count();
        assert!(unvoiced as f64 >= 0.9 * track.frames() as f64);
    }

    #[test]
    fn octave_errors_folded_and_short_runs_dropped() {
        let cfg = AnalysisConfig::default();
        let mut data = Array2::zeros((11, 2));
        let f0 = [0.0, 120.0, 121.0, 244.0, 122.0, 61.5, 123.0, 0.0, 300.0, 310.0, 0.0];
        for (t, &f) in f0.iter().enumerate() {
            data[[t, 0]] = f;
            data[[t, 1]] = if f > 0.0 { 1.0 } else { 0.0 };
        }
        clean_voicing(&mut data, &cfg);
        assert_eq!(data.column(0).to_vec(), vec![0.0, 120.0, 121.0, 122.0, 122.0, 123.0, 123.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(data[[8, 1]], 0.0);
    }

    #[test]
    fn silence_unvoiced() {
        let cfg = AnalysisConfig::default();
        let track = extract_f0(&Audio::new(vec![0.0; 5000], 16000), &cfg).unwrap();
        assert!(track.data().iter().all(|&v| v == 0.0));
    }
}
