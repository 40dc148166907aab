//! Orientation and in-circle predicates with exact fallback.
//!
//! Each predicate first evaluates the determinant in `f64` against a forward
//! error bound; when the sign is not certified it recomputes the determinant
//! exactly over arbitrary-precision rationals.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

const EPS: f64 = f64::EPSILON * 0.5;
const CCW_ERR_BOUND: f64 = (3.0 + 16.0 * EPS) * EPS;
const ICC_ERR_BOUND: f64 = (10.0 + 96.0 * EPS) * EPS;

fn exact(v: f64) -> BigRational {
    BigRational::from_float(v).unwrap_or_else(|| BigRational::from_integer(BigInt::zero()))
}

fn sign_of(v: &BigRational) -> Ordering {
    if v.is_positive() {
        Ordering::Greater
    } else if v.is_negative() {
        Ordering::Less
    } else {
        Ordering::Equal
    }
}

fn sign_f64(v: f64) -> Ordering {
    v.partial_cmp(&0.0).unwrap_or(Ordering::Equal)
}

/// Sign of the signed area of `(a, b, c)`: `Greater` for counterclockwise,
/// `Less` for clockwise, `Equal` for collinear.
pub fn orient2d(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> Ordering {
    let left = (a[0] - c[0]) * (b[1] - c[1]);
    let right = (a[1] - c[1]) * (b[0] - c[0]);
    let det = left - right;
    let bound = CCW_ERR_BOUND * (left.abs() + right.abs());
    if det.abs() > bound || (det == 0.0 && left == 0.0 && right == 0.0) {
        return sign_f64(det);
    }
    orient2d_exact(a, b, c)
}

pub(crate) fn orient2d_exact(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> Ordering {
    let [ax, ay, bx, by, cx, cy] = [a[0], a[1], b[0], b[1], c[0], c[1]].map(exact);
    let det = (&ax - &cx) * (&by - &cy) - (&ay - &cy) * (&bx - &cx);
    sign_of(&det)
}

/// `Greater` when `d` lies strictly inside the circle through the
/// counterclockwise triangle `(a, b, c)`, `Equal` when cocircular.
pub fn incircle(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> Ordering {
    let (adx, ady) = (a[0] - d[0], a[1] - d[1]);
    let (bdx, bdy) = (b[0] - d[0], b[1] - d[1]);
    let (cdx, cdy) = (c[0] - d[0], c[1] - d[1]);

    let bdxcdy = bdx * cdy;
    let cdxbdy = cdx * bdy;
    let alift = adx * adx + ady * ady;
    let cdxady = cdx * ady;
    let adxcdy = adx * cdy;
    let blift = bdx * bdx + bdy * bdy;
    let adxbdy = adx * bdy;
    let bdxady = bdx * ady;
    let clift = cdx * cdx + cdy * cdy;

    let det = alift * (bdxcdy - cdxbdy) + blift * (cdxady - adxcdy) + clift * (adxbdy - bdxady);
    let permanent = (bdxcdy.abs() + cdxbdy.abs()) * alift
        + (cdxady.abs() + adxcdy.abs()) * blift
        + (adxbdy.abs() + bdxady.abs()) * clift;
    if det.abs() > ICC_ERR_BOUND * permanent {
        return sign_f64(det);
    }
    incircle_exact(a, b, c, d)
}

pub(crate) fn incircle_exact(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> Ordering {
    let [ax, ay, bx, by, cx, cy, dx, dy] =
        [a[0], a[1], b[0], b[1], c[0], c[1], d[0], d[1]].map(exact);
    let (adx, ady) = (&ax - &dx, &ay - &dy);
    let (bdx, bdy) = (&bx - &dx, &by - &dy);
    let (cdx, cdy) = (&cx - &dx, &cy - &dy);
    let alift = &adx * &adx + &ady * &ady;
    let blift = &bdx * &bdx + &bdy * &bdy;
    let clift = &cdx * &cdx + &cdy * &cdy;
    let det = alift * (&bdx * &cdy - &cdx * &bdy)
        + blift * (&cdx * &ady - &adx * &cdy)
        + clift * (&adx * &bdy - &bdx * &ady);
    sign_of(&det)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn basic_orientation() {
        assert_eq!(orient2d([0.0, 0.0], [1.0, 0.0], [0.0, 1.0]), Ordering::Greater);
        assert_eq!(orient2d([0.0, 0.0], [0.0, 1.0], [1.0, 0.0]), Ordering::Less);
        assert_eq!(orient2d([0.0, 0.0], [1.0, 1.0], [2.0, 2.0]), Ordering::Equal);
    }

    #[test]
    fn near_collinear_is_resolved_exactly() {
        // Classic failure case for naive evaluation: points nudged by one ulp
        // off the line y = x.
        let a = [0.5, 0.5];
        let b = [12.0, 12.0];
        let c = [24.0, 24.0];
        assert_eq!(orient2d(a, b, c), Ordering::Equal);
        let nudged = [0.5 + f64::EPSILON / 2.0, 0.5];
        assert_eq!(orient2d(nudged, b, c), orient2d_exact(nudged, b, c));
        assert_ne!(orient2d(nudged, b, c), Ordering::Equal);
    }

    #[test]
    fn cocircular_square() {
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        assert_eq!(incircle(sq[0], sq[1], sq[2], sq[3]), Ordering::Equal);
        assert_eq!(incircle(sq[0], sq[1], sq[2], [0.5, 0.5]), Ordering::Greater);
        assert_eq!(incircle(sq[0], sq[1], sq[2], [2.0, 2.0]), Ordering::Less);
    }

    proptest! {
        #[test]
        fn filtered_matches_exact(v in prop::array::uniform8(-1.0e3f64..1.0e3)) {
            let (a, b, c, d) = ([v[0], v[1]], [v[2], v[3]], [v[4], v[5]], [v[6], v[7]]);
            prop_assert_eq!(orient2d(a, b, c), orient2d_exact(a, b, c));
            prop_assert_eq!(incircle(a, b, c, d), incircle_exact(a, b, c, d));
        }

        #[test]
        fn grid_points_match_exact(v in prop::array::uniform8(-4i32..4)) {
            let f = |i: usize| v[i] as f64 * 0.1;
            let (a, b, c, d) = ([f(0), f(1)], [f(2), f(3)], [f(4), f(5)], [f(6), f(7)]);
            prop_assert_eq!(orient2d(a, b, c), orient2d_exact(a, b, c));
            prop_assert_eq!(incircle(a, b, c, d), incircle_exact(a, b, c, d));
        }
    }
}
