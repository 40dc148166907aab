//! Hu's seven moment invariants.

use super::{FeatureError, GrayImage};
use crate::num::Real;

/// Normalized central moments η_pq for p + q ∈ {2, 3}, in the order
/// η20, η11, η02, η30, η21, η12, η03.
pub fn normalized_central_moments<T: Real>(img: &GrayImage<T>) -> Result<[T; 7], FeatureError> {
    let mut m00 = T::zero();
    let mut m10 = T::zero();
    let mut m01 = T::zero();
    for (row, line) in img.rows().enumerate() {
        let y = T::of_usize(row);
        for (col, &v) in line.iter().enumerate() {
            if v != T::zero() {
                m00 += v;
                m10 += T::of_usize(col) * v;
                m01 += y * v;
            }
        }
    }
    if !(m00 > T::zero()) {
        return Err(FeatureError::ZeroMass);
    }
    let (xc, yc) = (m10 / m00, m01 / m00);

    let mut mu = [T::zero(); 7];
    for (row, line) in img.rows().enumerate() {
        let dy = T::of_usize(row) - yc;
        for (col, &v) in line.iter().enumerate() {
            if v == T::zero() {
                continue;
            }
            let dx = T::of_usize(col) - xc;
            let (x2, y2) = (dx * dx, dy * dy);
            mu[0] += x2 * v;
            mu[1] += dx * dy * v;
            mu[2] += y2 * v;
            mu[3] += x2 * dx * v;
            mu[4] += x2 * dy * v;
            mu[5] += dx * y2 * v;
            mu[6] += y2 * dy * v;
        }
    }
    let s2 = m00 * m00;
    let s3 = s2 * m00.sqrt();
    Ok([
        mu[0] / s2,
        mu[1] / s2,
        mu[2] / s2,
        mu[3] / s3,
        mu[4] / s3,
        mu[5] / s3,
        mu[6] / s3,
    ])
}

/// The seven invariants φ1…φ7 from normalized central moments.
pub fn hu_from_eta<T: Real>(eta: [T; 7]) -> [T; 7] {
    let [n20, n11, n02, n30, n21, n12, n03] = eta;
    let c = |v: f64| T::of(v);
    let a = n30 + n12;
    let b = n21 + n03;
    let p = n30 - c(3.0) * n12;
    let q = c(3.0) * n21 - n03;
    let (a2, b2) = (a * a, b * b);
    [
        n20 + n02,
        (n20 - n02) * (n20 - n02) + c(4.0) * n11 * n11,
        p * p + q * q,
        a2 + b2,
        p * a * (a2 - c(3.0) * b2) + q * b * (c(3.0) * a2 - b2),
        (n20 - n02) * (a2 - b2) + c(4.0) * n11 * a * b,
        q * a * (a2 - c(3.0) * b2) - p * b * (c(3.0) * a2 - b2),
    ]
}

/// Raw Hu invariants.
pub fn hu_invariants<T: Real>(img: &GrayImage<T>) -> Result<[T; 7], FeatureError> {
    normalized_central_moments(img).map(hu_from_eta)
}

/// `sign(φ) · log10(|φ| + 1e-30)`, with sign(0) = 0.
pub fn signed_log<T: Real>(phi: T) -> T {
    if phi == T::zero() {
        return T::zero();
    }
    let mag = (phi.abs() + T::of(1e-30)).log10();
    if phi > T::zero() {
        mag
    } else {
        -mag
    }
}

/// Hu invariants with signed-log compression, as used in the feature vector.
pub fn hu_moments<T: Real>(img: &GrayImage<T>) -> Result<[T; 7], FeatureError> {
    hu_invariants(img).map(|phi| phi.map(signed_log))
}
