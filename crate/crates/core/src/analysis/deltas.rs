use ndarray::{s, Array2};

use crate::error::Result;
use crate::featio::FeatureTrack;

/// Appends 3-point central deltas and second differences, with the edge
/// frames replicated, giving `[static, delta, delta-delta]`.
pub fn append_deltas(track: &FeatureTrack) -> Result<FeatureTrack> {
    let x = track.data();
    let (n, d) = x.dim();
    let mut out = Array2::zeros((n, 3 * d));
    out.slice_mut(s![.., ..d]).assign(x);
    for t in 0..n {
        let prev = x.row(t.saturating_sub(1));
        let next = x.row((t + 1).min(n - 1));
        let cur = x.row(t);
        for j in 0..d {
            out[[t, d + j]] = (next[j] - prev[j]) / 2.0;
            out[[t, 2 * d + j]] = next[j] - 2.0 * cur[j] + prev[j];
        }
    }
    let mut result = FeatureTrack::new(out, track.frame_shift_s())?;
    if let Some(labels) = track.labels() {
        let all = labels
            .iter()
            .cloned()
            .chain(labels.iter().map(|l| format!("delta:{l}")))
            .chain(labels.iter().map(|l| format!("delta2:{l}")));
        result = result.with_labels(all)?;
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn constant_track_has_zero_deltas() {
        let t = FeatureTrack::new(Array2::from_elem((5, 2), 3.5), 0.005).unwrap();
        let d = append_deltas(&t).unwrap();
        assert_eq!(d.dim(), 6);
        assert!(d.data().slice(s![.., 2..]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ramp_interior_frame() {
        let t = FeatureTrack::new(array![[0.0], [1.0], [2.0], [3.0]], 0.005).unwrap();
        let d = append_deltas(&t).unwrap();
        assert_eq!(d.row(1).to_vec(), vec![1.0, 1.0, 0.0]);
        assert_eq!(d.row(2).to_vec(), vec![2.0, 1.0, 0.0]);
        // edge replication halves the slope at the ends
        assert_eq!(d.row(0).to_vec(), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn single_frame_track() {
        let t = FeatureTrack::new(array![[4.0, -1.0]], 0.005).unwrap();
        let d = append_deltas(&t).unwrap();
        assert_eq!(d.row(0).to_vec(), vec![4.0, -1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn statics_preserved_bit_exactly() {
        let t = FeatureTrack::new(array![[0.1, 1e-17], [-3.3, 7.0], [2.0, 0.3]], 0.005).unwrap();
        let d = append_deltas(&t).unwrap();
        assert_eq!(d.data().slice(s![.., ..2]), t.data());
    }
}
