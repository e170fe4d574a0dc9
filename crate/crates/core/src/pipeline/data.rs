use ndarray::{concatenate, Array2, Axis};

use crate::align::{two_stage_align, write_alignment, DtwConfig};
use crate::analysis::{append_deltas, dct_coefficients};
use crate::error::{format_err, validation, Result};
use crate::featio::{FeatureTrack, PhoneSegmentList, UtterancePair};
use crate::prosody::column_of;

use super::config::ExperimentConfig;
use super::layout::{read_text, Speaker, TrackKind, Workspace};
use super::parallel_map;

/// All extracted features of one speaker's side of an utterance.
#[derive(Debug, Clone)]
pub struct UttFeatures {
    pub envelope: FeatureTrack,
    pub f0: FeatureTrack,
    pub intensity: FeatureTrack,
    pub phones: PhoneSegmentList,
}

impl UttFeatures {
    pub fn load(ws: &Workspace, utt: &str, speaker: Speaker, frame_shift_s: f64) -> Result<Self> {
        let envelope = ws.read(utt, speaker, TrackKind::Envelope)?;
        let f0 = ws.read(utt, speaker, TrackKind::F0)?;
        let intensity = ws.read(utt, speaker, TrackKind::Intensity)?;
        let phones = ws.read_phones(utt, speaker, frame_shift_s)?;
        if f0.frames() != envelope.frames() || intensity.frames() != envelope.frames() {
            return Err(validation(format!("{utt}: {} tracks differ in length", speaker.prefix())));
        }
        phones.check_within(envelope.frames())?;
        Ok(Self {
            envelope,
            f0,
            intensity,
            phones,
        })
    }

    pub fn vuv(&self) -> Vec<bool> {
        let c = column_of(&self.f0, "vuv", 1).expect("F0 tracks carry vuv");
        self.f0.column(c).iter().map(|&v| v > 0.5).collect()
    }
}

/// Source and target features with a frame alignment between them.
#[derive(Debug, Clone)]
pub struct AlignedUtt {
    pub id: String,
    pub source: UttFeatures,
    pub target: UttFeatures,
    pub path: Vec<(usize, usize)>,
}

/// Two-stage DTW between two utterances on cosine-transform features of
/// their envelopes.
pub fn align_envelopes(
    source: &FeatureTrack,
    source_phones: &PhoneSegmentList,
    target: &FeatureTrack,
    target_phones: &PhoneSegmentList,
    order: usize,
    dtw: &DtwConfig,
) -> Result<Vec<(usize, usize)>> {
    let pair = UtterancePair::new(
        dct_coefficients(source, order)?,
        dct_coefficients(target, order)?,
        source_phones.clone(),
        target_phones.clone(),
    )?;
    let aligned = two_stage_align(pair, dtw)?;
    Ok(aligned.alignment().expect("alignment just computed").to_vec())
}

pub(crate) fn parse_alignment(text: &str) -> Result<Vec<(usize, usize)>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let mut it = l.split_whitespace().map(str::parse::<usize>);
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(s)), Some(Ok(t)), None) => Ok((s, t)),
                _ => Err(format_err(format!("bad alignment line {l:?}"))),
            }
        })
        .collect()
}

impl AlignedUtt {
    /// Loads both sides and uses the stored alignment when present,
    /// computing it otherwise.
    pub fn load(ws: &Workspace, utt: &str, config: &ExperimentConfig) -> Result<Self> {
        let shift = config.analysis.frame_shift_s;
        let source = UttFeatures::load(ws, utt, Speaker::Source, shift)?;
        let target = UttFeatures::load(ws, utt, Speaker::Target, shift)?;
        let stored = ws.alignment_path(utt);
        let path = if stored.exists() {
            parse_alignment(&read_text(&stored)?).map_err(|e| e.at_path(&stored))?
        } else {
            align_envelopes(
                &source.envelope,
                &source.phones,
                &target.envelope,
                &target.phones,
                config.align.feature_order,
                &config.align.dtw(),
            )?
        };
        if path.iter().any(|&(s, t)| s >= source.envelope.frames() || t >= target.envelope.frames()) {
            return Err(validation(format!("{utt}: stored alignment does not fit the features")));
        }
        Ok(Self {
            id: utt.to_string(),
            source,
            target,
            path,
        })
    }

    pub fn source_indices(&self) -> Vec<usize> {
        self.path.iter().map(|p| p.0).collect()
    }

    pub fn target_indices(&self) -> Vec<usize> {
        self.path.iter().map(|p| p.1).collect()
    }
}

pub fn load_aligned(ws: &Workspace, ids: &[String], config: &ExperimentConfig) -> Result<Vec<AlignedUtt>> {
    parallel_map(ids, config.jobs, |id| AlignedUtt::load(ws, id, config).map_err(|e| e.in_stage(format!("utterance {id}"))))
        .into_iter()
        .collect()
}

/// Computes and stores the alignment of every listed utterance.
pub fn cmd_align(config: &ExperimentConfig, ids: &[String]) -> Result<usize> {
    let ws = Workspace::new(config.workdir());
    let results = parallel_map(ids, config.jobs, |id| -> Result<()> {
        let shift = config.analysis.frame_shift_s;
        let s = UttFeatures::load(&ws, id, Speaker::Source, shift)?;
        let t = UttFeatures::load(&ws, id, Speaker::Target, shift)?;
        let path = align_envelopes(&s.envelope, &s.phones, &t.envelope, &t.phones, config.align.feature_order, &config.align.dtw())?;
        write_alignment(&path, ws.alignment_path(id))
    });
    let mut done = 0;
    for (id, r) in ids.iter().zip(results) {
        r.map_err(|e| e.in_stage(format!("align {id}")))?;
        done += 1;
    }
    Ok(done)
}

/// Spectral network input: envelope with deltas plus the voicing flag.
pub fn spectral_input(envelope: &FeatureTrack, f0: &FeatureTrack) -> Result<Array2<f64>> {
    let vuv = column_of(f0, "vuv", 1)?;
    let env = append_deltas(envelope)?;
    let flag = f0.data().column(vuv).to_owned().insert_axis(Axis(1));
    Ok(concatenate(Axis(1), &[env.data().view(), flag.view()]).expect("equal frame counts"))
}

/// Low-dimensional network input: cosine-transform coefficients with deltas
/// plus the voicing flag.
pub fn mcep_input(envelope: &FeatureTrack, f0: &FeatureTrack, order: usize) -> Result<Array2<f64>> {
    spectral_input(&dct_coefficients(envelope, order)?, f0)
}
