use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;

use super::envelope::FftPair;
use super::{frame_at, hann, AnalysisConfig};
use crate::error::{validation, Result};
use crate::featio::{Audio, FeatureTrack};

const NOISE_SEED: u64 = 0x5EED_0F_A0D10;

/// Pulse train at the per-frame F0 (unit power) and unit-variance noise.
fn excitations(f0vuv: &FeatureTrack, hop: usize, sample_rate: u32) -> (Vec<f64>, Vec<f64>) {
    let len = f0vuv.frames() * hop;
    let sr = sample_rate as f64;
    let mut pulses = vec![0.0; len];
    let mut phase = 0.0;
    for (i, p) in pulses.iter_mut().enumerate() {
        let frame = ((i + hop / 2) / hop).min(f0vuv.frames() - 1);
        let (f0, vuv) = (f0vuv.data()[[frame, 0]], f0vuv.data()[[frame, 1]]);
        if vuv < 0.5 || f0 <= 0.0 {
            continue;
        }
        phase += f0 / sr;
        if phase >= 1.0 {
            phase -= 1.0;
            *p = (sr / f0).sqrt();
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(NOISE_SEED);
    let noise = (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    (pulses, noise)
}

/// Source-filter resynthesis from a log envelope and an F0/VUV track.
///
/// Each frame takes a Hann-windowed grain of pulse-train (voiced) or noise
/// (unvoiced) excitation, shapes its spectrum with the zero-phase envelope
/// and overlap-adds the result. The gain is chosen so that re-analysing the
/// output gives back roughly the input envelope. Output is scaled down only
/// if its peak would exceed 1.
pub fn synthesize(envelope: &FeatureTrack, f0vuv: &FeatureTrack, config: &AnalysisConfig, sample_rate: u32) -> Result<Audio> {
    config.validate(sample_rate)?;
    if envelope.frames() == 0 {
        return Err(validation("cannot synthesize a zero-length envelope"));
    }
    if envelope.frames() != f0vuv.frames() {
        return Err(validation(format!(
            "envelope has {} frames but F0 track has {}",
            envelope.frames(),
            f0vuv.frames()
        )));
    }
    if envelope.dim() != config.envelope_order || f0vuv.dim() != 2 {
        return Err(validation(format!(
            "expected {}-bin envelope and 2-dim F0 track, got {} and {}",
            config.envelope_order,
            envelope.dim(),
            f0vuv.dim()
        )));
    }
    let n = config.fft_size;
    let half = n / 2;
    let hop = config.hop(sample_rate);
    let window = hann(n);
    let gain = 1.0 / window.iter().map(|w| w * w).sum::<f64>().sqrt();
    let (pulses, noise) = excitations(f0vuv, hop, sample_rate);
    let len = pulses.len();
    let ffts = FftPair::new(n);

    let mut out = vec![0.0; len];
    let mut norm = vec![0.0; len];
    let mut grain = vec![0.0; n];
    let mut spec = vec![Complex::new(0.0, 0.0); n];
    for t in 0..envelope.frames() {
        let voiced = f0vuv.data()[[t, 1]] >= 0.5;
        let center = t * hop;
        frame_at(if voiced { &pulses } else { &noise }, center, n, &mut grain);
        for i in 0..n {
            spec[i] = Complex::new(grain[i] * window[i], 0.0);
        }
        ffts.forward.process(&mut spec);
        let env = envelope.row(t);
        for k in 0..=half {
            let h = gain * env[k.min(half - 1)].exp();
            spec[k] *= h;
            if k > 0 && k < half {
                spec[n - k] *= h;
            }
        }
        ffts.inverse.process(&mut spec);
        let start = center as isize - half as isize;
        for i in 0..n {
            let idx = start + i as isize;
            if idx >= 0 && (idx as usize) < len {
                out[idx as usize] += spec[i].re / n as f64;
                norm[idx as usize] += window[i];
            }
        }
    }
    for (o, w) in out.iter_mut().zip(&norm) {
        if *w > 1e-3 {
            *o /= w;
        }
    }
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 1.0 {
        out.iter_mut().for_each(|v| *v /= peak);
    }
    Ok(Audio::new(out, sample_rate))
}
