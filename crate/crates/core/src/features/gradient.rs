//! Gradient-based descriptors: HOG and a Harris corner summary.

use super::GrayImage;
use crate::num::Real;

pub const HOG_CELL: usize = 8;
pub const HOG_BINS: usize = 9;
pub const HOG_BLOCK: usize = 2;
pub const HOG_EPS: f64 = 1e-5;
pub const HARRIS_K: f64 = 0.04;
pub const HARRIS_REL_THRESHOLD: f64 = 0.01;

/// Central differences `I(c+1) − I(c−1)` and `I(r+1) − I(r−1)`; zero on the
/// border rows/columns where a neighbour is missing.
pub fn gradients<T: Real>(img: &GrayImage<T>) -> (Vec<T>, Vec<T>) {
    let (w, h) = (img.width, img.height);
    let mut gx = vec![T::zero(); w * h];
    let mut gy = vec![T::zero(); w * h];
    for r in 0..h {
        for c in 0..w {
            if c > 0 && c + 1 < w {
                gx[r * w + c] = img.get(c + 1, r) - img.get(c - 1, r);
            }
            if r > 0 && r + 1 < h {
                gy[r * w + c] = img.get(c, r + 1) - img.get(c, r - 1);
            }
        }
    }
    (gx, gy)
}

/// Length of the HOG descriptor of a `width × height` image.
pub fn hog_len(width: usize, height: usize) -> usize {
    let (cx, cy) = (width / HOG_CELL, height / HOG_CELL);
    let bx = (cx + 1).saturating_sub(HOG_BLOCK);
    let by = (cy + 1).saturating_sub(HOG_BLOCK);
    bx * by * HOG_BLOCK * HOG_BLOCK * HOG_BINS
}

/// Histogram of oriented gradients: 9 unsigned orientation bins (20° each,
/// hard assignment weighted by magnitude) per 8×8 cell; overlapping 2×2-cell
/// blocks, each L2-normalized as `v / sqrt(|v|² + ε²)`. Pixels beyond the last
/// whole cell are ignored.
pub fn hog_descriptor<T: Real>(img: &GrayImage<T>) -> Vec<T> {
    let (gx, gy) = gradients(img);
    let (ncx, ncy) = (img.width / HOG_CELL, img.height / HOG_CELL);
    let mut cells = vec![[T::zero(); HOG_BINS]; ncx * ncy];
    let bin_width = T::of(180.0 / HOG_BINS as f64);
    for r in 0..ncy * HOG_CELL {
        for c in 0..ncx * HOG_CELL {
            let k = r * img.width + c;
            let mag = gx[k].hypot(gy[k]);
            if mag == T::zero() {
                continue;
            }
            let mut angle = gy[k].atan2(gx[k]).to_degrees();
            if angle < T::zero() {
                angle += T::of(180.0);
            }
            let b = (angle / bin_width).floor().to_usize().unwrap_or(0) % HOG_BINS;
            cells[(r / HOG_CELL) * ncx + c / HOG_CELL][b] += mag;
        }
    }
    let eps2 = T::of(HOG_EPS * HOG_EPS);
    let mut out = Vec::with_capacity(hog_len(img.width, img.height));
    for by in 0..(ncy + 1).saturating_sub(HOG_BLOCK) {
        for bx in 0..(ncx + 1).saturating_sub(HOG_BLOCK) {
            let start = out.len();
            for y in by..by + HOG_BLOCK {
                for x in bx..bx + HOG_BLOCK {
                    out.extend_from_slice(&cells[y * ncx + x]);
                }
            }
            let norm = (out[start..].iter().map(|&v| v * v).sum::<T>() + eps2).sqrt();
            out[start..].iter_mut().for_each(|v| *v /= norm);
        }
    }
    out
}

/// Harris response `det(M) − k·trace(M)²` with `M` summed over each pixel's
/// 3×3 neighbourhood (clipped at the border).
pub fn harris_response<T: Real>(img: &GrayImage<T>) -> Vec<T> {
    let (w, h) = (img.width, img.height);
    let (gx, gy) = gradients(img);
    let k = T::of(HARRIS_K);
    let mut out = vec![T::zero(); w * h];
    for r in 0..h {
        for c in 0..w {
            let (mut a, mut b, mut d) = (T::zero(), T::zero(), T::zero());
            for rr in r.saturating_sub(1)..(r + 2).min(h) {
                for cc in c.saturating_sub(1)..(c + 2).min(w) {
                    let (x, y) = (gx[rr * w + cc], gy[rr * w + cc]);
                    a += x * x;
                    b += x * y;
                    d += y * y;
                }
            }
            let tr = a + d;
            out[r * w + c] = a * d - b * b - k * tr * tr;
        }
    }
    out
}

/// Indices of strict local maxima of `resp` above `threshold` in the
/// 8-neighbourhood. On plateaus the first pixel in row-major order wins: a
/// pixel must beat earlier neighbours strictly and later ones weakly.
pub fn local_maxima<T: Real>(resp: &[T], width: usize, height: usize, threshold: T) -> Vec<usize> {
    let mut out = Vec::new();
    for r in 0..height {
        for c in 0..width {
            let k = r * width + c;
            let v = resp[k];
            if !(v > threshold) {
                continue;
            }
            let mut is_max = true;
            'scan: for rr in r.saturating_sub(1)..(r + 2).min(height) {
                for cc in c.saturating_sub(1)..(c + 2).min(width) {
                    let j = rr * width + cc;
                    if j == k {
                        continue;
                    }
                    if (j < k && resp[j] >= v) || (j > k && resp[j] > v) {
                        is_max = false;
                        break 'scan;
                    }
                }
            }
            if is_max {
                out.push(k);
            }
        }
    }
    out
}

/// (number of corner maxima above 1% of the peak response, mean positive
/// response, peak response clipped at 0).
pub fn harris_summary<T: Real>(img: &GrayImage<T>) -> [T; 3] {
    let resp = harris_response(img);
    let peak = resp.iter().copied().fold(T::zero(), T::max);
    if peak == T::zero() {
        return [T::zero(); 3];
    }
    let corners = local_maxima(&resp, img.width, img.height, T::of(HARRIS_REL_THRESHOLD) * peak);
    let positive: Vec<T> = resp.iter().copied().filter(|&v| v > T::zero()).collect();
    let mean = positive.iter().copied().sum::<T>() / T::of_usize(positive.len());
    [T::of_usize(corners.len()), mean, peak]
}
