//! Dynamic time warping and the phone-constrained two-stage alignment.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{s, Array2, ArrayView2, Axis};

use crate::error::{validation, Error, Result};
use crate::featio::UtterancePair;

/// DTW settings. Steps are always `(1,0)`, `(0,1)` and `(1,1)`, the local
/// distance is squared Euclidean.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DtwConfig {
    /// Sakoe-Chiba half-width in frames around the (rescaled) diagonal.
    pub band_width: Option<usize>,
    /// Only the leading `distance_dims` dimensions enter the distance.
    pub distance_dims: Option<usize>,
}

impl DtwConfig {
    pub fn validate(&self) -> Result<()> {
        if self.band_width == Some(0) {
            return Err(validation("band width must be at least 1"));
        }
        if self.distance_dims == Some(0) {
            return Err(validation("distance_dims must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DtwPath {
    pub pairs: Vec<(usize, usize)>,
    pub cost: f64,
}

#[derive(Clone, Copy)]
enum Step {
    Start,
    Diagonal,
    Source,
    Target,
}

fn sq_dist(a: ndarray::ArrayView1<'_, f64>, b: ndarray::ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Optimal monotone alignment of two frame sequences.
///
/// Equal-cost predecessors are resolved diagonal first, then source
/// advance, then target advance.
pub fn dtw_align(src: ArrayView2<'_, f64>, tgt: ArrayView2<'_, f64>, config: &DtwConfig) -> Result<DtwPath> {
    config.validate()?;
    let (m, n) = (src.nrows(), tgt.nrows());
    if m == 0 || n == 0 {
        return Err(validation("DTW needs two non-empty sequences"));
    }
    if src.ncols() != tgt.ncols() {
        return Err(validation(format!(
            "DTW dimension mismatch: {} vs {}",
            src.ncols(),
            tgt.ncols()
        )));
    }
    let dims = config.distance_dims.unwrap_or(src.ncols());
    if dims > src.ncols() {
        return Err(validation(format!("distance_dims {dims} exceeds {}", src.ncols())));
    }
    let src = src.slice(s![.., ..dims]);
    let tgt = tgt.slice(s![.., ..dims]);

    let in_band: Box<dyn Fn(usize, usize) -> bool> = match config.band_width {
        None => Box::new(|_, _| true),
        Some(w) => {
            let slope = if m > 1 { (n - 1) as f64 / (m - 1) as f64 } else { 0.0 };
            let width = (w as f64).max(slope).max(if slope > 0.0 { 1.0 / slope } else { 0.0 });
            Box::new(move |i, j| {
                let center = if m > 1 { i as f64 * slope } else { j as f64 };
                (j as f64 - center).abs() <= width
            })
        }
    };

    let mut acc = Array2::from_elem((m, n), f64::INFINITY);
    let mut from = vec![Step::Start; m * n];
    for i in 0..m {
        for j in 0..n {
            if !in_band(i, j) && !(i == m - 1 && j == n - 1) && !(i == 0 && j == 0) {
                continue;
            }
            let d = sq_dist(src.row(i), tgt.row(j));
            if i == 0 && j == 0 {
                acc[[0, 0]] = d;
                continue;
            }
            let mut best = f64::INFINITY;
            let mut step = Step::Start;
            if i > 0 && j > 0 && acc[[i - 1, j - 1]] < best {
                best = acc[[i - 1, j - 1]];
                step = Step::Diagonal;
            }
            if i > 0 && acc[[i - 1, j]] < best {
                best = acc[[i - 1, j]];
                step = Step::Source;
            }
            if j > 0 && acc[[i, j - 1]] < best {
                best = acc[[i, j - 1]];
                step = Step::Target;
            }
            if best.is_finite() {
                acc[[i, j]] = best + d;
                from[i * n + j] = step;
            }
        }
    }
    let cost = acc[[m - 1, n - 1]];
    if !cost.is_finite() {
        return Err(Error::Numeric("no admissible DTW path within the band".into()));
    }
    let mut pairs = Vec::with_capacity(m + n);
    let (mut i, mut j) = (m - 1, n - 1);
    loop {
        pairs.push((i, j));
        match from[i * n + j] {
            Step::Start => break,
            Step::Diagonal => {
                i -= 1;
                j -= 1;
            }
            Step::Source => i -= 1,
            Step::Target => j -= 1,
        }
    }
    pairs.reverse();
    Ok(DtwPath { pairs, cost })
}

/// Accumulated squared distance along an explicit path.
pub fn path_cost(src: ArrayView2<'_, f64>, tgt: ArrayView2<'_, f64>, pairs: &[(usize, usize)]) -> f64 {
    pairs.iter().map(|&(i, j)| sq_dist(src.row(i), tgt.row(j))).sum()
}

/// Frame spans `(source, target)` covering both utterances in time order:
/// the gap before each phone, the phone itself, and the trailing gap.
fn blocks(pair: &UtterancePair) -> Vec<((usize, usize), (usize, usize))> {
    let mut out = Vec::new();
    let (mut s_prev, mut t_prev) = (0, 0);
    for (sp, tp) in pair.source_phones.iter().zip(pair.target_phones.iter()) {
        out.push(((s_prev, sp.start), (t_prev, tp.start)));
        out.push(((sp.start, sp.end), (tp.start, tp.end)));
        s_prev = sp.end;
        t_prev = tp.end;
    }
    out.push(((s_prev, pair.source.frames()), (t_prev, pair.target.frames())));
    out
}

/// Aligns each phone (and each inter-phone gap) separately and concatenates
/// the paths. A gap present on one side only is attached to the nearest
/// frame on the other side.
pub fn two_stage_align(pair: UtterancePair, config: &DtwConfig) -> Result<UtterancePair> {
    if pair.source_phones.len() != pair.target_phones.len()
        || pair
            .source_phones
            .iter()
            .zip(pair.target_phones.iter())
            .any(|(a, b)| a.label != b.label)
    {
        return Err(validation("source and target phone lists differ"));
    }
    let (sf, tf) = (pair.source.frames(), pair.target.frames());
    if sf == 0 || tf == 0 {
        return Err(validation("cannot align an empty utterance"));
    }
    let mut path: Vec<(usize, usize)> = Vec::with_capacity(sf.max(tf) * 2);
    for ((sa, sb), (ta, tb)) in blocks(&pair) {
        match (sb > sa, tb > ta) {
            (true, true) => {
                let p = dtw_align(
                    pair.source.slice_frames(sa, sb),
                    pair.target.slice_frames(ta, tb),
                    config,
                )?;
                path.extend(p.pairs.into_iter().map(|(i, j)| (i + sa, j + ta)));
            }
            (true, false) => {
                let anchor = if ta > 0 { ta - 1 } else { 0 };
                path.extend((sa..sb).map(|i| (i, anchor)));
            }
            (false, true) => {
                let anchor = if sa > 0 { sa - 1 } else { 0 };
                path.extend((ta..tb).map(|j| (anchor, j)));
            }
            (false, false) => {}
        }
    }
    pair.with_alignment(path)
}

/// Rows of the two matrices gathered along the path.
pub fn gather_pairs(
    src: ArrayView2<'_, f64>,
    tgt: ArrayView2<'_, f64>,
    path: &[(usize, usize)],
) -> (Array2<f64>, Array2<f64>) {
    let si: Vec<usize> = path.iter().map(|p| p.0).collect();
    let ti: Vec<usize> = path.iter().map(|p| p.1).collect();
    (src.select(Axis(0), &si), tgt.select(Axis(0), &ti))
}

/// Source and target frames paired along the stored alignment.
pub fn paired_frames(pair: &UtterancePair) -> Result<(Array2<f64>, Array2<f64>)> {
    let path = pair
        .alignment()
        .ok_or_else(|| Error::State("utterance pair has no alignment".into()))?;
    Ok(gather_pairs(pair.source.data().view(), pair.target.data().view(), path))
}

/// Writes `src_frame tgt_frame` lines.
pub fn write_alignment(path: &[(usize, usize)], file: impl AsRef<Path>) -> Result<()> {
    let file = file.as_ref();
    let mut out = String::with_capacity(path.len() * 10);
    for (s, t) in path {
        let _ = writeln!(out, "{s} {t}");
    }
    std::fs::write(file, out).map_err(|e| Error::from(e).at_path(file))
}
