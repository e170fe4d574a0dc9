use ndarray::{Array2, ArrayView1};

use super::{diff, segments_from_runs, voiced_runs, VoicedSegment};
use crate::error::{Error, Result};

/// Per-utterance inputs for building segment-level training data: voicing
/// masks and value columns for both speakers plus the frame alignment.
#[derive(Debug, Clone, Copy)]
pub struct AlignedProsody<'a> {
    pub source_vuv: ArrayView1<'a, f64>,
    pub target_vuv: ArrayView1<'a, f64>,
    pub source_values: ArrayView1<'a, f64>,
    pub target_values: ArrayView1<'a, f64>,
    pub path: &'a [(usize, usize)],
}

#[derive(Debug, Clone)]
pub struct ProsodyTrainingSet {
    pub inputs: Array2<f64>,
    pub targets: Array2<f64>,
    /// Source segments without a matching target segment.
    pub dropped: usize,
}

/// For each source run, the index of the target run that owns a strict
/// majority of the distinct target frames aligned to it.
pub fn pair_segments(source_runs: &[(usize, usize)], target_runs: &[(usize, usize)], path: &[(usize, usize)]) -> Vec<Option<usize>> {
    source_runs
        .iter()
        .map(|&(a, b)| {
            let mut frames: Vec<usize> = path.iter().filter(|(s, _)| (a..b).contains(s)).map(|p| p.1).collect();
            frames.sort_unstable();
            frames.dedup();
            if frames.is_empty() {
                return None;
            }
            let mut counts = vec![0usize; target_runs.len()];
            for f in &frames {
                if let Some(k) = target_runs.iter().position(|&(ta, tb)| (ta..tb).contains(f)) {
                    counts[k] += 1;
                }
            }
            counts
                .iter()
                .position(|&c| 2 * c > frames.len())
        })
        .collect()
}

fn build(items: &[AlignedProsody<'_>], length: usize, feature: impl Fn(&VoicedSegment) -> Vec<f64>) -> Result<ProsodyTrainingSet> {
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    let mut dropped = 0;
    for item in items {
        let src_runs = voiced_runs(item.source_vuv);
        let tgt_runs = voiced_runs(item.target_vuv);
        let src = segments_from_runs(item.source_values, &src_runs, length)?;
        let tgt = segments_from_runs(item.target_values, &tgt_runs, length)?;
        for (s, m) in src.iter().zip(pair_segments(&src_runs, &tgt_runs, item.path)) {
            match m {
                Some(k) => {
                    inputs.extend(feature(s));
                    targets.extend(feature(&tgt[k]));
                }
                None => dropped += 1,
            }
        }
    }
    if inputs.is_empty() {
        return Err(Error::Training("no source segment could be paired with a target segment".into()));
    }
    if dropped > 0 {
        log::info!("{dropped} source segments had no matching target segment");
    }
    let rows = inputs.len() / length;
    Ok(ProsodyTrainingSet {
        inputs: Array2::from_shape_vec((rows, length), inputs).expect("rows of equal length"),
        targets: Array2::from_shape_vec((rows, length), targets).expect("rows of equal length"),
        dropped,
    })
}

/// Paired difference features of matched source and target F0 segments.
pub fn build_f0_training_set(items: &[AlignedProsody<'_>], length: usize) -> Result<ProsodyTrainingSet> {
    build(items, length, |s| diff(&s.normalized))
}

/// Paired normalized intensity trajectories of matched segments.
pub fn build_intensity_training_set(items: &[AlignedProsody<'_>], length: usize) -> Result<ProsodyTrainingSet> {
    build(items, length, |s| s.normalized.clone())
}
