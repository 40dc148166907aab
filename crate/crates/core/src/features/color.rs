//! HSV color histogram over the non-background pixels.

use super::FeatureError;
use crate::num::Real;
use crate::projection::ViewImage;

/// Standard RGB → HSV with H in degrees [0, 360) and S, V in [0, 1].
pub fn rgb_to_hsv<T: Real>([r, g, b]: [T; 3]) -> (T, T, T) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let zero = T::zero();
    let sixty = T::of(60.0);
    let h = if delta == zero {
        zero
    } else if max == r {
        let h = sixty * ((g - b) / delta);
        if h < zero { h + T::of(360.0) } else { h }
    } else if max == g {
        sixty * ((b - r) / delta + T::of(2.0))
    } else {
        sixty * ((r - g) / delta + T::of(4.0))
    };
    let s = if max == zero { zero } else { delta / max };
    // guard against h rounding up to exactly 360
    let h = if h >= T::of(360.0) { zero } else { h };
    (h, s, max)
}

#[inline]
fn bin<T: Real>(x: T, bins: usize) -> usize {
    let b = (x * T::of_usize(bins)).floor();
    if b <= T::zero() {
        0
    } else {
        b.to_usize().unwrap_or(bins - 1).min(bins - 1)
    }
}

/// Histogram index of an (h, s, v) triple: `h_bin·B² + s_bin·B + v_bin`.
pub fn hsv_bin<T: Real>((h, s, v): (T, T, T), bins: usize) -> usize {
    let hb = bin(h / T::of(360.0), bins);
    (hb * bins + bin(s, bins)) * bins + bin(v, bins)
}

/// L1-normalized `B³` histogram of the pixels with V > 0. An image with no
/// foreground yields the all-zero vector.
pub fn hsv_histogram<T: Real>(img: &ViewImage<T>, bins: usize) -> Result<Vec<T>, FeatureError> {
    if bins == 0 {
        return Err(FeatureError::InvalidParameter("HSV bins must be positive"));
    }
    let mut counts = vec![0u64; bins * bins * bins];
    let mut total = 0u64;
    for &px in &img.pixels {
        let hsv = rgb_to_hsv(px);
        if hsv.2 > T::zero() {
            counts[hsv_bin(hsv, bins)] += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Ok(vec![T::zero(); counts.len()]);
    }
    let total = T::of(total as f64);
    Ok(counts.into_iter().map(|c| T::of(c as f64) / total).collect())
}
