//! Gray-level co-occurrence matrices and the thirteen Haralick statistics.

use super::{FeatureError, GrayImage};
use crate::num::Real;

/// Distance-1 offsets `(dx, dy)` for 0°, 45°, 90° and 135°; `dy` grows
/// downwards, and symmetrization makes each offset equivalent to its negation.
pub const DIRECTIONS: [(isize, isize); 4] = [(1, 0), (1, -1), (0, 1), (1, 1)];

pub const HARALICK_NAMES: [&str; 13] = [
    "asm",
    "contrast",
    "correlation",
    "sum_squares",
    "idm",
    "sum_average",
    "sum_variance",
    "sum_entropy",
    "entropy",
    "difference_variance",
    "difference_entropy",
    "imc1",
    "imc2",
];

/// Symmetric, normalized co-occurrence matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Glcm<T> {
    pub levels: usize,
    pub offset: (isize, isize),
    /// Row-major `levels × levels` probabilities summing to 1.
    pub p: Vec<T>,
}

impl<T: Real> Glcm<T> {
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        self.p[i * self.levels + j]
    }
}

/// Gray level of `g` on `levels` levels: `floor(g·levels)`, clamped to the range.
#[inline]
pub fn quantize<T: Real>(g: T, levels: usize) -> usize {
    let q = (g * T::of_usize(levels)).floor();
    if q <= T::zero() {
        0
    } else {
        q.to_usize().unwrap_or(levels - 1).min(levels - 1)
    }
}

pub fn glcm<T: Real>(img: &GrayImage<T>, levels: usize, offset: (isize, isize)) -> Result<Glcm<T>, FeatureError> {
    if levels < 2 {
        return Err(FeatureError::InvalidParameter("GLCM needs at least 2 levels"));
    }
    let (dx, dy) = offset;
    let (w, h) = (img.width as isize, img.height as isize);
    if dx.abs() >= w || dy.abs() >= h {
        return Err(FeatureError::ImageTooSmall);
    }
    let q: Vec<usize> = img.data.iter().map(|&g| quantize(g, levels)).collect();
    let mut counts = vec![0u64; levels * levels];
    let mut total = 0u64;
    for r in 0.max(-dy)..h.min(h - dy) {
        for c in 0.max(-dx)..w.min(w - dx) {
            let a = q[(r * w + c) as usize];
            let b = q[((r + dy) * w + c + dx) as usize];
            counts[a * levels + b] += 1;
            counts[b * levels + a] += 1;
            total += 2;
        }
    }
    let total = T::of(total as f64);
    Ok(Glcm {
        levels,
        offset,
        p: counts.into_iter().map(|n| T::of(n as f64) / total).collect(),
    })
}

fn entropy<T: Real>(ps: impl IntoIterator<Item = T>) -> T {
    ps.into_iter()
        .filter(|&p| p > T::zero())
        .map(|p| -p * p.log2())
        .sum()
}

/// The thirteen Haralick statistics of one GLCM, in [`HARALICK_NAMES`] order.
/// Entropies are in bits. Correlation is 0 when the marginal variance is 0.
/// IMC1 is 0 when the marginal entropy is 0.
pub fn haralick<T: Real>(m: &Glcm<T>) -> [T; 13] {
    let n = m.levels;
    let zero = T::zero();
    let idx = |i: usize| T::of_usize(i);

    // the matrix is symmetric, so the row and column marginals coincide
    let px: Vec<T> = (0..n).map(|i| (0..n).map(|j| m.at(i, j)).sum()).collect();
    let mut p_sum = vec![zero; 2 * n - 1];
    let mut p_diff = vec![zero; n];
    for i in 0..n {
        for j in 0..n {
            let v = m.at(i, j);
            p_sum[i + j] += v;
            p_diff[i.abs_diff(j)] += v;
        }
    }
    let mu: T = (0..n).map(|i| idx(i) * px[i]).sum();
    let var: T = (0..n).map(|i| (idx(i) - mu).powi(2) * px[i]).sum();

    let mut asm = zero;
    let mut idm = zero;
    let mut cross = zero;
    let mut sum_squares = zero;
    for i in 0..n {
        for j in 0..n {
            let v = m.at(i, j);
            asm += v * v;
            let d = idx(i) - idx(j);
            idm += v / (T::one() + d * d);
            cross += idx(i) * idx(j) * v;
            sum_squares += (idx(i) - mu).powi(2) * v;
        }
    }
    let contrast: T = p_diff.iter().enumerate().map(|(k, &p)| idx(k * k) * p).sum();
    let correlation = if var > zero { (cross - mu * mu) / var } else { zero };
    let sum_average: T = p_sum.iter().enumerate().map(|(k, &p)| idx(k) * p).sum();
    let sum_variance: T = p_sum.iter().enumerate().map(|(k, &p)| (idx(k) - sum_average).powi(2) * p).sum();
    let sum_entropy = entropy(p_sum.iter().copied());
    let hxy = entropy(m.p.iter().copied());
    let diff_mean: T = p_diff.iter().enumerate().map(|(k, &p)| idx(k) * p).sum();
    let diff_variance: T = p_diff.iter().enumerate().map(|(k, &p)| (idx(k) - diff_mean).powi(2) * p).sum();
    let diff_entropy = entropy(p_diff.iter().copied());

    let hx = entropy(px.iter().copied());
    let mut hxy1 = zero;
    let mut hxy2 = zero;
    for i in 0..n {
        for j in 0..n {
            let pp = px[i] * px[j];
            if pp > zero {
                hxy1 -= m.at(i, j) * pp.log2();
                hxy2 -= pp * pp.log2();
            }
        }
    }
    let imc1 = if hx > zero { (hxy - hxy1) / hx } else { zero };
    // exp(-2Δ) with Δ converted back to nats keeps IMC2 independent of the log base
    let gap = ((hxy2 - hxy) * T::LN_2()).max(zero);
    let imc2 = (T::one() - (T::of(-2.0) * gap).exp()).max(zero).sqrt();

    [
        asm,
        contrast,
        correlation,
        sum_squares,
        idm,
        sum_average,
        sum_variance,
        sum_entropy,
        hxy,
        diff_variance,
        diff_entropy,
        imc1,
        imc2,
    ]
}

/// Haralick statistics averaged over the four distance-1 directions.
pub fn haralick_features<T: Real>(img: &GrayImage<T>, levels: usize) -> Result<[T; 13], FeatureError> {
    if img.width < 2 || img.height < 2 {
        return Err(FeatureError::ImageTooSmall);
    }
    let mut acc = [T::zero(); 13];
    for offset in DIRECTIONS {
        let f = haralick(&glcm(img, levels, offset)?);
        for (a, v) in acc.iter_mut().zip(f) {
            *a += v;
        }
    }
    Ok(acc.map(|a| a / T::of(DIRECTIONS.len() as f64)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gray(w: usize, h: usize, data: Vec<f64>) -> GrayImage<f64> {
        GrayImage::new(w, h, data)
    }

    #[test]
    fn two_by_two_hand_example() {
        let img = gray(2, 2, vec![0.0, 0.0, 1.0, 1.0]);
        let m = glcm(&img, 2, (1, 0)).unwrap();
        assert_eq!(m.p, vec![0.5, 0.0, 0.0, 0.5]);
        let f = haralick(&m);
        assert_eq!(f[0], 0.5);
        assert_eq!(f[1], 0.0);
        assert_eq!(f[8], 1.0);
    }

    #[test]
    fn constant_image_extremes() {
        let img = gray(5, 4, vec![0.42; 20]);
        for offset in DIRECTIONS {
            let m = glcm(&img, 16, offset).unwrap();
            let q = quantize(0.42, 16);
            assert_eq!(q, 6);
            assert_eq!(m.at(q, q), 1.0);
            assert_eq!(m.p.iter().filter(|&&v| v != 0.0).count(), 1);
            let f = haralick(&m);
            assert_eq!((f[0], f[1], f[2], f[8]), (1.0, 0.0, 0.0, 0.0));
            assert!(f.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn checkerboard_contrast() {
        let data = (0..36).map(|k| ((k % 6 + k / 6) % 2) as f64).collect();
        let f = haralick(&glcm(&gray(6, 6, data), 2, (1, 0)).unwrap());
        assert_eq!(f[1], 1.0);
        assert_eq!(f[2], -1.0);
    }

    #[test]
    fn quantization_clamps() {
        assert_eq!(quantize(1.0f64, 16), 15);
        assert_eq!(quantize(0.0f64, 16), 0);
        assert_eq!(quantize(-0.1f64, 16), 0);
        assert_eq!(quantize(0.5f64, 16), 8);
    }

    #[test]
    fn offset_larger_than_image() {
        assert_eq!(glcm(&gray(1, 3, vec![0.0; 3]), 16, (1, 0)), Err(FeatureError::ImageTooSmall));
        assert!(haralick_features(&gray(1, 3, vec![0.0; 3]), 16).is_err());
    }

    /// Oracle for a textbook case: two equiprobable diagonal levels give
    /// marginals (½, ½), HXY = HXY1 = 1 bit and HXY2 = 2 bits.
    #[test]
    fn information_measures_by_hand() {
        let m = Glcm { levels: 2, offset: (1, 0), p: vec![0.5f64, 0.0, 0.0, 0.5] };
        let f = haralick(&m);
        assert!((f[11] - (1.0 - 2.0) / 1.0).abs() < 1e-15);
        let expect = (1.0 - (-2.0 * std::f64::consts::LN_2).exp()).sqrt();
        assert!((f[12] - expect).abs() < 1e-15);
        assert_eq!(f[2], 1.0);
    }

    fn image() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
        (2usize..10, 2usize..10).prop_flat_map(|(w, h)| {
            prop::collection::vec(0.0f64..1.0, w * h).prop_map(move |v| (w, h, v))
        })
    }

    proptest! {
        #[test]
        fn symmetric_and_normalized((w, h, v) in image(), d in 0usize..4) {
            let m = glcm(&gray(w, h, v), 16, DIRECTIONS[d]).unwrap();
            let total: f64 = m.p.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            for i in 0..16 {
                for j in 0..16 {
                    prop_assert_eq!(m.at(i, j), m.at(j, i));
                }
            }
        }

        #[test]
        fn transpose_swaps_offset((w, h, v) in image(), d in 0usize..4) {
            let (dx, dy) = DIRECTIONS[d];
            let t: Vec<f64> = (0..w * h).map(|k| v[(k % h) * w + k / h]).collect();
            let a = glcm(&gray(w, h, v), 16, (dx, dy)).unwrap();
            let b = glcm(&gray(h, w, t), 16, (dy, dx)).unwrap();
            prop_assert_eq!(a.p, b.p);
        }

        #[test]
        fn statistics_in_range((w, h, v) in image()) {
            let f = haralick_features(&gray(w, h, v), 16).unwrap();
            prop_assert!(f.iter().all(|x| x.is_finite()));
            prop_assert!(f[0] > 0.0 && f[0] <= 1.0 + 1e-12);
            prop_assert!(f[8] >= 0.0 && f[7] >= 0.0 && f[10] >= 0.0);
            prop_assert!(f[2] >= -1.0 - 1e-9 && f[2] <= 1.0 + 1e-9);
            prop_assert!(f[12] >= 0.0 && f[12] <= 1.0);
        }
    }
}
