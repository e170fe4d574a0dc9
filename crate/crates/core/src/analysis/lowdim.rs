//! Truncated orthonormal DCT of log envelopes, the low-dimensional spectral
//! representation used by the mixture-model baseline.

use ndarray::Array2;

use crate::error::{validation, Result};
use crate::featio::FeatureTrack;

/// Orthonormal DCT-II basis, `order` rows by `bins` columns.
fn basis(order: usize, bins: usize) -> Array2<f64> {
    let mut b = Array2::zeros((order, bins));
    let n = bins as f64;
    for k in 0..order {
        let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
        for i in 0..bins {
            b[[k, i]] = scale * (std::f64::consts::PI * k as f64 * (i as f64 + 0.5) / n).cos();
        }
    }
    b
}

/// First `order` DCT-II coefficients of each frame.
pub fn dct_coefficients(track: &FeatureTrack, order: usize) -> Result<FeatureTrack> {
    if order == 0 || order > track.dim() {
        return Err(validation(format!("DCT order {order} outside 1..={}", track.dim())));
    }
    let b = basis(order, track.dim());
    FeatureTrack::new(track.data().dot(&b.t()), track.frame_shift_s())
}

/// Inverse transform back to `bins` bins with the missing coefficients zero.
pub fn dct_reconstruct(coeffs: &FeatureTrack, bins: usize) -> Result<FeatureTrack> {
    if coeffs.dim() > bins {
        return Err(validation(format!("{} coefficients exceed {bins} bins", coeffs.dim())));
    }
    let b = basis(coeffs.dim(), bins);
    FeatureTrack::new(coeffs.data().dot(&b), coeffs.frame_shift_s())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_order_is_lossless() {
        let data = Array2::from_shape_fn((3, 16), |(t, i)| ((t * 7 + i * 3) % 5) as f64 - 1.5);
        let track = FeatureTrack::new(data.clone(), 0.005).unwrap();
        let back = dct_reconstruct(&dct_coefficients(&track, 16).unwrap(), 16).unwrap();
        for (a, b) in data.iter().zip(back.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_frame_has_only_dc() {
        let track = FeatureTrack::new(Array2::from_elem((1, 32), 2.0), 0.005).unwrap();
        let c = dct_coefficients(&track, 5).unwrap();
        assert!((c.data()[[0, 0]] - 2.0 * 32f64.sqrt()).abs() < 1e-12);
        assert!(c.data().iter().skip(1).all(|v| v.abs() < 1e-12));
    }
}
