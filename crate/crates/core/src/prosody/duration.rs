use ndarray::{Array1, Array2};

use crate::error::{validation, Result};
use crate::featio::{FeatureTrack, PhoneSegment, PhoneSegmentList};

pub const MIN_RATIO: f64 = 0.5;
pub const MAX_RATIO: f64 = 2.0;

/// One phone's duration training example.
#[derive(Debug, Clone, PartialEq)]
pub struct DurationSample {
    pub phone_index: usize,
    /// `n` sampled frames concatenated.
    pub input: Array1<f64>,
    /// Source phone length over target phone length.
    pub ratio: f64,
}

/// Frame indices `round(i·(len−1)/(n−1))`; a single sample takes the middle
/// frame.
pub fn sample_indices(len: usize, n: usize) -> Vec<usize> {
    if len == 0 || n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![((len - 1) as f64 / 2.0).round() as usize];
    }
    (0..n)
        .map(|i| ((i * (len - 1)) as f64 / (n - 1) as f64).round() as usize)
        .collect()
}

fn sampled_input(track: &FeatureTrack, phone: &PhoneSegment, n: usize) -> Array1<f64> {
    let mut out = Vec::with_capacity(n * track.dim());
    for i in sample_indices(phone.len(), n) {
        out.extend(track.row(phone.start + i).iter());
    }
    Array1::from(out)
}

/// Duration training examples for every phone at least two frames long on
/// both sides.
pub fn build_duration_samples(
    source: &FeatureTrack,
    source_phones: &PhoneSegmentList,
    target_phones: &PhoneSegmentList,
    n: usize,
) -> Result<Vec<DurationSample>> {
    if n == 0 {
        return Err(validation("duration sampling needs at least one frame"));
    }
    if source_phones.len() != target_phones.len() {
        return Err(validation("source and target phone lists differ in length"));
    }
    source_phones.check_within(source.frames())?;
    Ok(source_phones
        .iter()
        .zip(target_phones.iter())
        .enumerate()
        .filter(|(_, (s, t))| s.len() >= 2 && t.len() >= 2)
        .map(|(i, (s, t))| DurationSample {
            phone_index: i,
            input: sampled_input(source, s, n),
            ratio: s.len() as f64 / t.len() as f64,
        })
        .collect())
}

/// Sampled inputs for every phone of an utterance, for prediction.
pub fn duration_inputs(track: &FeatureTrack, phones: &PhoneSegmentList, n: usize) -> Result<Array2<f64>> {
    if n == 0 {
        return Err(validation("duration sampling needs at least one frame"));
    }
    phones.check_within(track.frames())?;
    let mut out = Array2::zeros((phones.len(), n * track.dim()));
    for (i, p) in phones.iter().enumerate() {
        out.row_mut(i).assign(&sampled_input(track, p, n));
    }
    Ok(out)
}

fn uses_nearest(label: &str) -> bool {
    label == "vuv" || label == "f0"
}

/// Retimes every track so each phone spans `round(len / r)` frames, with `r`
/// clamped to `[MIN_RATIO, MAX_RATIO]`; frames outside phones keep their
/// timing. Columns labeled `f0` or `vuv` use nearest-neighbour sampling,
/// all others linear interpolation.
pub fn apply_duration(tracks: &[FeatureTrack], phones: &PhoneSegmentList, ratios: &[f64]) -> Result<(Vec<FeatureTrack>, PhoneSegmentList)> {
    let frames = tracks.first().map(FeatureTrack::frames).ok_or_else(|| validation("no tracks to retime"))?;
    if tracks.iter().any(|t| t.frames() != frames) {
        return Err(validation("tracks to retime differ in length"));
    }
    if ratios.len() != phones.len() {
        return Err(validation(format!("{} ratios for {} phones", ratios.len(), phones.len())));
    }
    if let Some(r) = ratios.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
        return Err(validation(format!("duration ratio must be positive, got {r}")));
    }
    phones.check_within(frames)?;

    let mut positions: Vec<f64> = Vec::with_capacity(frames);
    let mut retimed = Vec::with_capacity(phones.len());
    let mut cursor = 0;
    for (phone, &r) in phones.iter().zip(ratios) {
        positions.extend((cursor..phone.start).map(|i| i as f64));
        let len = phone.len();
        let new_len = ((len as f64 / r.clamp(MIN_RATIO, MAX_RATIO)).round() as usize).max(1);
        let start = positions.len();
        if new_len == 1 {
            positions.push(phone.start as f64 + (len - 1) as f64 / 2.0);
        } else {
            let span = (len - 1) as f64;
            positions.extend((0..new_len).map(|j| phone.start as f64 + (j as f64 * span) / (new_len - 1) as f64));
        }
        retimed.push(PhoneSegment {
            label: phone.label.clone(),
            start,
            end: positions.len(),
        });
        cursor = phone.end;
    }
    positions.extend((cursor..frames).map(|i| i as f64));

    let out = tracks
        .iter()
        .map(|track| {
            let src = track.data();
            let nearest: Vec<bool> = (0..track.dim())
                .map(|d| track.labels().is_some_and(|l| uses_nearest(&l[d])))
                .collect();
            let mut data = Array2::zeros((positions.len(), track.dim()));
            for (t, &p) in positions.iter().enumerate() {
                let lo = p.floor() as usize;
                let frac = p - lo as f64;
                let hi = (lo + 1).min(frames - 1);
                let near = if frac >= 0.5 { hi } else { lo };
                for d in 0..track.dim() {
                    data[[t, d]] = if frac == 0.0 {
                        src[[lo, d]]
                    } else if nearest[d] {
                        src[[near, d]]
                    } else {
                        src[[lo, d]] + frac * (src[[hi, d]] - src[[lo, d]])
                    };
                }
            }
            track.with_data(data)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((out, PhoneSegmentList::new(retimed)?))
}
