//! Seeded parallel corpus with a known source-to-target relation.
//!
//! Both speakers share a phone inventory described by formant bumps on a
//! sloped log spectrum. The target's formants are shifted and widened, its
//! phone durations scaled per phone, and its F0 is an affine map of the
//! source's per-segment mean plus an amplified within-segment contour and a
//! zero-mean final rise. Features are rendered to audio with the vocoder so
//! the corpus exercises the full extraction path.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::analysis::{synthesize, AnalysisConfig};
use crate::error::Result;
use crate::featio::{write_phone_labels, write_wav, FeatureTrack, PhoneSegment, PhoneSegmentList};
use crate::net::TrainConfig;

use super::config::{ExperimentConfig, GmmSection, ProsodySection, SpectralSection};
use super::layout::{create_dir, write_text};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticOptions {
    pub utterances: usize,
    pub train: usize,
    pub seed: u64,
    pub sample_rate: u32,
    pub min_phones: usize,
    pub max_phones: usize,
}

impl Default for SyntheticOptions {
    fn default() -> Self {
        Self {
            utterances: 40,
            train: 30,
            seed: 0,
            sample_rate: 16000,
            min_phones: 8,
            max_phones: 12,
        }
    }
}

const SILENCE_FRAMES: usize = 8;
const COARTICULATION: f64 = 0.25;
const SILENCE_LEVEL: f64 = -8.5;
const UNVOICED_PROBABILITY: f64 = 0.4;
/// Target F0 per voiced run: the run mean maps affinely with one gain, the
/// within-run movement with a larger one, and a zero-mean final rise is
/// added. A global mean/variance transform can only approximate this.
const TARGET_MEAN_GAIN: f64 = 1.3;
const TARGET_SHAPE_GAIN: f64 = 2.0;
const TARGET_RISE: f64 = 25.0;

#[derive(Debug, Clone, Copy)]
struct PhoneDef {
    label: &'static str,
    voiced: bool,
    /// Centre frequencies in Hz.
    formants: [f64; 4],
    /// Gaussian widths in Hz.
    widths: [f64; 4],
    /// Log-amplitude of each bump.
    amps: [f64; 4],
    /// Target duration over source duration.
    duration_scale: f64,
}

const fn vowel(label: &'static str, formants: [f64; 4], duration_scale: f64) -> PhoneDef {
    PhoneDef {
        label,
        voiced: true,
        formants,
        widths: [90.0, 110.0, 150.0, 200.0],
        amps: [3.0, 2.4, 1.8, 1.2],
        duration_scale,
    }
}

const INVENTORY: [PhoneDef; 10] = [
    vowel("aa", [730.0, 1090.0, 2440.0, 3400.0], 1.3),
    vowel("iy", [270.0, 2290.0, 3010.0, 3700.0], 0.8),
    vowel("uw", [300.0, 870.0, 2240.0, 3300.0], 1.2),
    vowel("eh", [530.0, 1840.0, 2480.0, 3500.0], 1.0),
    vowel("ao", [570.0, 840.0, 2410.0, 3300.0], 1.25),
    vowel("ae", [660.0, 1720.0, 2410.0, 3400.0], 0.85),
    PhoneDef {
        label: "m",
        voiced: true,
        formants: [280.0, 1300.0, 2500.0, 3300.0],
        widths: [80.0, 200.0, 250.0, 250.0],
        amps: [2.5, 0.8, 0.6, 0.4],
        duration_scale: 0.9,
    },
    PhoneDef {
        label: "s",
        voiced: false,
        formants: [5000.0, 6500.0, 7500.0, 4000.0],
        widths: [700.0, 600.0, 500.0, 400.0],
        amps: [2.2, 1.5, 1.0, 0.6],
        duration_scale: 1.2,
    },
    PhoneDef {
        label: "sh",
        voiced: false,
        formants: [2800.0, 3500.0, 5000.0, 6000.0],
        widths: [400.0, 500.0, 700.0, 800.0],
        amps: [2.4, 1.8, 1.0, 0.5],
        duration_scale: 0.8,
    },
    PhoneDef {
        label: "f",
        voiced: false,
        formants: [1500.0, 3500.0, 5500.0, 7000.0],
        widths: [1200.0, 1200.0, 1200.0, 1200.0],
        amps: [0.8, 0.8, 0.8, 0.8],
        duration_scale: 1.0,
    },
];

/// Per-speaker spectral shape parameters.
#[derive(Debug, Clone, Copy)]
struct Voice {
    formant_scale: [f64; 4],
    width_scale: f64,
    amp_scale: [f64; 4],
    base: f64,
    tilt_per_khz: f64,
}

const SOURCE_VOICE: Voice = Voice {
    formant_scale: [1.0; 4],
    width_scale: 1.0,
    amp_scale: [1.0; 4],
    base: -5.0,
    tilt_per_khz: -0.35,
};

const TARGET_VOICE: Voice = Voice {
    formant_scale: [1.10, 1.18, 1.12, 1.08],
    width_scale: 1.2,
    amp_scale: [1.1, 0.9, 1.2, 1.0],
    base: -4.7,
    tilt_per_khz: -0.25,
};

/// One phone as spoken in one utterance.
#[derive(Debug, Clone)]
struct PhoneToken {
    def: PhoneDef,
    source_len: usize,
    target_len: usize,
    /// Relative formant offsets applied with a `sin(πτ)` profile.
    jitter: [f64; 4],
}

#[derive(Debug, Clone)]
struct VoicedRun {
    /// Token indices, inclusive start, exclusive end.
    tokens: (usize, usize),
    mean: f64,
    amplitude: f64,
    cycles: f64,
    phase: f64,
    declination: f64,
}

impl VoicedRun {
    /// Within-segment excursion at relative position `tau`.
    fn excursion(&self, tau: f64) -> f64 {
        self.amplitude * (2.0 * std::f64::consts::PI * self.cycles * tau + self.phase).sin() + self.declination * (0.5 - tau)
    }

    fn source_f0(&self, tau: f64) -> f64 {
        self.mean + self.excursion(tau)
    }

    fn target_f0(&self, tau: f64) -> f64 {
        200.0 + TARGET_MEAN_GAIN * (self.mean - 115.0) + TARGET_SHAPE_GAIN * self.excursion(tau) + TARGET_RISE * (tau * tau - 1.0 / 3.0)
    }
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn make_tokens(rng: &mut ChaCha8Rng, opts: &SyntheticOptions) -> Vec<PhoneToken> {
    let count = rng.random_range(opts.min_phones..=opts.max_phones);
    let mut tokens: Vec<PhoneToken> = Vec::with_capacity(count);
    for i in 0..count {
        let prev_unvoiced = tokens.last().is_some_and(|t| !t.def.voiced);
        // first and last phones are vowels so every utterance has voicing
        let unvoiced = i > 0 && i + 1 < count && !prev_unvoiced && rng.random::<f64>() < UNVOICED_PROBABILITY;
        let def = if unvoiced {
            INVENTORY[7 + rng.random_range(0..3)]
        } else {
            INVENTORY[rng.random_range(0..7)]
        };
        let source_len = if def.voiced { rng.random_range(8..=20) } else { rng.random_range(6..=12) };
        let scale = def.duration_scale * (1.0 + 0.08 * (2.0 * rng.random::<f64>() - 1.0));
        let target_len = ((source_len as f64 * scale).round() as usize).max(2);
        let jitter = [0.0; 4].map(|_: f64| 0.03 * gauss(rng));
        tokens.push(PhoneToken {
            def,
            source_len,
            target_len,
            jitter,
        });
    }
    tokens
}

fn make_runs(rng: &mut ChaCha8Rng, tokens: &[PhoneToken]) -> Vec<VoicedRun> {
    let mut runs = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        if !tokens[i].def.voiced {
            i += 1;
            continue;
        }
        let start = i;
        while i < tokens.len() && tokens[i].def.voiced {
            i += 1;
        }
        runs.push(VoicedRun {
            tokens: (start, i),
            mean: rng.random_range(95.0..140.0),
            amplitude: rng.random_range(4.0..12.0),
            cycles: rng.random_range(0.3..1.0),
            phase: rng.random_range(0.0..std::f64::consts::TAU),
            declination: rng.random_range(-10.0..10.0),
        });
    }
    runs
}

fn phone_shape(def: &PhoneDef, voice: &Voice, jitter: &[f64; 4], weight: f64) -> [(f64, f64, f64); 4] {
    std::array::from_fn(|i| {
        let f = def.formants[i] * voice.formant_scale[i] * (1.0 + jitter[i] * weight);
        let w = def.widths[i] * voice.width_scale;
        let a = def.amps[i] * voice.amp_scale[i];
        (f, w, a)
    })
}

fn render_frame(row: &mut [f64], bumps: &[(f64, f64, f64); 4], voice: &Voice, bin_hz: f64) {
    for (k, v) in row.iter_mut().enumerate() {
        let f = k as f64 * bin_hz;
        let mut e = voice.base + voice.tilt_per_khz * f / 1000.0;
        for &(c, w, a) in bumps {
            let z = (f - c) / w;
            e += a * (-0.5 * z * z).exp();
        }
        *v = e;
    }
}

/// Envelope, F0/VUV and phone segments of one speaker's rendition.
fn render(tokens: &[PhoneToken], runs: &[VoicedRun], voice: &Voice, target: bool, bins: usize, bin_hz: f64, shift: f64) -> Result<(FeatureTrack, FeatureTrack, PhoneSegmentList)> {
    let lens: Vec<usize> = tokens.iter().map(|t| if target { t.target_len } else { t.source_len }).collect();
    let total = 2 * SILENCE_FRAMES + lens.iter().sum::<usize>();
    let mut env = Array2::from_elem((total, bins), SILENCE_LEVEL);
    let mut f0 = Array2::zeros((total, 2));
    let mut phones = Vec::with_capacity(tokens.len());
    let mut starts = Vec::with_capacity(tokens.len());
    let mut cursor = SILENCE_FRAMES;
    for (j, tok) in tokens.iter().enumerate() {
        let n = lens[j];
        starts.push(cursor);
        let here = phone_shape(&tok.def, voice, &tok.jitter, 1.0);
        let prev = (j > 0).then(|| phone_shape(&tokens[j - 1].def, voice, &tokens[j - 1].jitter, 0.0));
        for i in 0..n {
            let tau = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.5 };
            let prof = (std::f64::consts::PI * tau).sin();
            let mut bumps = phone_shape(&tok.def, voice, &tok.jitter, prof);
            if let (Some(p), true) = (prev, tau < COARTICULATION) {
                let mix = 0.5 * (1.0 - tau / COARTICULATION);
                for (b, q) in bumps.iter_mut().zip(p.iter()) {
                    b.0 += mix * (q.0 - b.0);
                    b.1 += mix * (q.1 - b.1);
                    b.2 += mix * (q.2 - b.2);
                }
            }
            let _ = here;
            let mut row = vec![0.0; bins];
            render_frame(&mut row, &bumps, voice, bin_hz);
            env.row_mut(cursor + i).assign(&ndarray::ArrayView1::from(&row));
        }
        phones.push(PhoneSegment {
            label: tok.def.label.to_string(),
            start: cursor,
            end: cursor + n,
        });
        cursor += n;
    }
    for run in runs {
        let a = starts[run.tokens.0];
        let b = starts[run.tokens.1 - 1] + lens[run.tokens.1 - 1];
        for t in a..b {
            let tau = (t - a) as f64 / (b - a - 1).max(1) as f64;
            f0[[t, 0]] = if target { run.target_f0(tau) } else { run.source_f0(tau) };
            f0[[t, 1]] = 1.0;
        }
    }
    let env = FeatureTrack::new(env, shift)?;
    let f0 = FeatureTrack::new(f0, shift)?.with_labels(crate::analysis::F0_LABELS)?;
    Ok((env, f0, PhoneSegmentList::new(phones)?))
}

/// Analysis settings used for the synthetic corpus.
pub fn synthetic_analysis() -> AnalysisConfig {
    AnalysisConfig {
        fft_size: 512,
        envelope_order: 256,
        ..AnalysisConfig::default()
    }
}

/// Experiment settings sized for the synthetic corpus.
pub fn synthetic_experiment() -> ExperimentConfig {
    // gradients are summed over the minibatch and 256 output bins, so the
    // spectral nets need a much smaller step than the prosody nets
    let spectral_step = TrainConfig {
        learning_rate: 3e-4,
        ..TrainConfig::default()
    };
    let prosody_train = TrainConfig {
        max_epochs: 60,
        batch_size: 8,
        learning_rate: 0.003,
        patience: Some(5),
        ..TrainConfig::default()
    };
    ExperimentConfig {
        analysis: synthetic_analysis(),
        gmm: GmmSection {
            components: 8,
            ..GmmSection::default()
        },
        spectral: SpectralSection {
            hidden: vec![256, 256],
            mcep_hidden: vec![50, 50],
            pretrain: TrainConfig {
                max_epochs: 40,
                l1_lambda: 1e-5,
                ..spectral_step.clone()
            },
            finetune: TrainConfig {
                max_epochs: 60,
                patience: Some(5),
                ..spectral_step
            },
            dlp_stage_epochs: 5,
        },
        prosody: ProsodySection {
            segment_length: 25,
            hidden: vec![64, 64],
            train: prosody_train.clone(),
            frame_hidden: vec![64, 64],
            frame_train: TrainConfig {
                max_epochs: 10,
                ..TrainConfig::default()
            },
            duration_hidden: vec![32],
            duration_train: prosody_train,
            ..ProsodySection::default()
        },
        ..ExperimentConfig::default()
    }
}

/// Paths written by [`make_synthetic`].
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub root: PathBuf,
    pub manifest: PathBuf,
    pub config: PathBuf,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

/// Writes a seeded parallel corpus under `dir`: WAV files, phone labels, a
/// manifest, train/test lists and an `experiment.toml` sized for it.
pub fn make_synthetic(dir: &Path, opts: &SyntheticOptions) -> Result<SyntheticCorpus> {
    if opts.train > opts.utterances || opts.min_phones == 0 || opts.min_phones > opts.max_phones {
        return Err(crate::error::Error::Config(format!("invalid synthetic corpus options {opts:?}")));
    }
    let analysis = synthetic_analysis();
    analysis.validate(opts.sample_rate)?;
    let bins = analysis.envelope_order;
    let bin_hz = opts.sample_rate as f64 / analysis.fft_size as f64;
    let shift = analysis.frame_shift_s;
    create_dir(&dir.join("wav"))?;
    create_dir(&dir.join("lab"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut manifest = String::new();
    let mut ids = Vec::with_capacity(opts.utterances);
    for u in 0..opts.utterances {
        let id = format!("utt{u:03}");
        let tokens = make_tokens(&mut rng, opts);
        let runs = make_runs(&mut rng, &tokens);
        for (prefix, voice, target) in [("src", &SOURCE_VOICE, false), ("tgt", &TARGET_VOICE, true)] {
            let (env, f0, phones) = render(&tokens, &runs, voice, target, bins, bin_hz, shift)?;
            let audio = synthesize(&env, &f0, &analysis, opts.sample_rate)?;
            write_wav(&audio, dir.join("wav").join(format!("{prefix}_{id}.wav")))?;
            write_phone_labels(&phones, shift, dir.join("lab").join(format!("{prefix}_{id}.lab")))?;
        }
        let _ = writeln!(manifest, "{id} wav/src_{id}.wav lab/src_{id}.lab wav/tgt_{id}.wav lab/tgt_{id}.lab");
        ids.push(id);
    }
    let manifest_path = dir.join("manifest.txt");
    write_text(&manifest_path, &manifest)?;
    let (train_ids, test_ids) = ids.split_at(opts.train);
    write_text(&dir.join("train.list"), &(train_ids.join("\n") + "\n"))?;
    write_text(&dir.join("test.list"), &(test_ids.join("\n") + "\n"))?;
    let config = ExperimentConfig {
        seed: opts.seed,
        ..synthetic_experiment()
    };
    let config_path = dir.join("experiment.toml");
    write_text(&config_path, &config.to_toml())?;
    Ok(SyntheticCorpus {
        root: dir.to_path_buf(),
        manifest: manifest_path,
        config: config_path,
        train_ids: train_ids.to_vec(),
        test_ids: test_ids.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::extract_f0;

    /// Extracted F0 against the generated contour on frames voiced in both.
    fn pitch_errors(seed: u64, target: bool) -> (usize, usize, f64, usize) {
        let analysis = synthetic_analysis();
        let opts = SyntheticOptions::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut gross, mut n, mut sq, mut vuv) = (0, 0, 0.0, 0);
        for _ in 0..5 {
            let tokens = make_tokens(&mut rng, &opts);
            let runs = make_runs(&mut rng, &tokens);
            let voice = if target { &TARGET_VOICE } else { &SOURCE_VOICE };
            let (env, f0, _) = render(&tokens, &runs, voice, target, 256, 16000.0 / 512.0, 0.005).unwrap();
            let audio = synthesize(&env, &f0, &analysis, 16000).unwrap();
            let est = extract_f0(&audio, &analysis).unwrap();
            for t in 0..f0.frames().min(est.frames()) {
                let (a, b) = (f0.data()[[t, 0]], est.data()[[t, 0]]);
                if (a > 0.0) != (b > 0.0) {
                    vuv += 1;
                }
                if a > 0.0 && b > 0.0 {
                    n += 1;
                    if (b / a - 1.0).abs() > 0.2 {
                        gross += 1;
                    } else {
                        sq += (a - b) * (a - b);
                    }
                }
            }
        }
        (gross, n, (sq / n as f64).sqrt(), vuv)
    }

    #[test]
    fn extracted_pitch_follows_generated_contour() {
        for target in [false, true] {
            let (gross, n, rmse, vuv) = pitch_errors(3, target);
            eprintln!("target={target} gross {gross}/{n} fine rmse {rmse:.2} voicing errors {vuv}");
            assert!((gross as f64) < 0.01 * n as f64, "{gross}/{n}");
            assert!(rmse < 2.0, "{rmse}");
        }
    }
}
