//! Principal component analysis onto two dimensions.

use super::FeatureError;
use crate::num::Real;

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen<T> {
    /// Eigenvalues, descending.
    pub values: Vec<T>,
    /// Unit eigenvectors matching `values`; each has its largest-magnitude
    /// entry positive (first such entry on ties).
    pub vectors: Vec<Vec<T>>,
}

/// Eigen-decomposition of the symmetric `n × n` row-major matrix `a` by
/// Householder tridiagonalization followed by implicit QL iterations.
///
/// # Panics
/// If `a.len() != n * n`.
pub fn symmetric_eigen<T: Real>(a: &[T], n: usize) -> SymmetricEigen<T> {
    assert_eq!(a.len(), n * n, "matrix must be n × n");
    if n == 0 {
        return SymmetricEigen { values: vec![], vectors: vec![] };
    }
    let mut v: Vec<Vec<T>> = (0..n).map(|i| a[i * n..(i + 1) * n].to_vec()).collect();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    tridiagonalize(&mut v, &mut d, &mut e);
    ql_implicit(&mut v, &mut d, &mut e);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| crate::num::cmp(&d[j], &d[i]).then(i.cmp(&j)));
    let values = order.iter().map(|&k| d[k]).collect();
    let vectors = order
        .iter()
        .map(|&k| {
            let mut col: Vec<T> = (0..n).map(|r| v[r][k]).collect();
            canonical_sign(&mut col);
            col
        })
        .collect();
    SymmetricEigen { values, vectors }
}

/// Flips `v` so its largest-magnitude entry (first on ties) is positive.
pub fn canonical_sign<T: Real>(v: &mut [T]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < T::zero()) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn tridiagonalize<T: Real>(v: &mut [Vec<T>], d: &mut [T], e: &mut [T]) {
    let n = d.len();
    let zero = T::zero();
    for j in 0..n {
        d[j] = v[n - 1][j];
    }
    for i in (1..n).rev() {
        let mut scale = zero;
        let mut h = zero;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == zero {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[i - 1][j];
                v[i][j] = zero;
                v[j][i] = zero;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > zero {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = zero;
            }
            for j in 0..i {
                f = d[j];
                v[j][i] = f;
                g = e[j] + v[j][j] * f;
                for k in j + 1..i {
                    g += v[k][j] * d[k];
                    e[k] += v[k][j] * f;
                }
                e[j] = g;
            }
            f = zero;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[k][j] -= f * e[k] + g * d[k];
                }
                d[j] = v[i - 1][j];
                v[i][j] = zero;
            }
        }
        d[i] = h;
    }
    // accumulate the transformations
    for i in 0..n - 1 {
        v[n - 1][i] = v[i][i];
        v[i][i] = T::one();
        let h = d[i + 1];
        if h != zero {
            for k in 0..=i {
                d[k] = v[k][i + 1] / h;
            }
            for j in 0..=i {
                let mut g = zero;
                for k in 0..=i {
                    g += v[k][i + 1] * v[k][j];
                }
                for k in 0..=i {
                    v[k][j] -= g * d[k];
                }
            }
        }
        for row in v.iter_mut().take(i + 1) {
            row[i + 1] = zero;
        }
    }
    for j in 0..n {
        d[j] = v[n - 1][j];
        v[n - 1][j] = zero;
    }
    v[n - 1][n - 1] = T::one();
    e[0] = zero;
}

fn ql_implicit<T: Real>(v: &mut [Vec<T>], d: &mut [T], e: &mut [T]) {
    let n = d.len();
    let zero = T::zero();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = zero;
    let mut f = zero;
    let mut tst1 = zero;
    let eps = T::epsilon();
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            loop {
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (T::of(2.0) * e[l]);
                let mut r = p.hypot(T::one());
                if p < zero {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = T::one();
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = zero;
                let mut s2 = zero;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for row in v.iter_mut() {
                        h = row[i + 1];
                        row[i + 1] = s * row[i] + c * h;
                        row[i] = c * row[i] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = zero;
    }
}

/// Result of [`pca_2d`].
#[derive(Debug, Clone, PartialEq)]
pub struct Pca2<T> {
    pub mean: Vec<T>,
    /// The two leading principal axes (orthonormal).
    pub components: [Vec<T>; 2],
    /// Each input vector's coordinates on the two axes.
    pub projected: Vec<[T; 2]>,
    /// Variance along each axis (sample covariance, n − 1 denominator).
    pub explained: [T; 2],
    /// All covariance eigenvalues, descending.
    pub eigenvalues: Vec<T>,
}

/// Sample covariance (n − 1 denominator) of equal-length vectors, row-major.
pub fn covariance<T: Real>(vectors: &[Vec<T>]) -> (Vec<T>, Vec<T>) {
    let n = vectors.len();
    let d = vectors[0].len();
    let mut mean = vec![T::zero(); d];
    for v in vectors {
        for (m, &x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    let nn = T::of_usize(n);
    mean.iter_mut().for_each(|m| *m /= nn);
    let mut cov = vec![T::zero(); d * d];
    let mut centered = vec![T::zero(); d];
    for v in vectors {
        for k in 0..d {
            centered[k] = v[k] - mean[k];
        }
        for i in 0..d {
            let ci = centered[i];
            if ci == T::zero() {
                continue;
            }
            let row = &mut cov[i * d..i * d + d];
            for j in i..d {
                row[j] += ci * centered[j];
            }
        }
    }
    let denom = T::of_usize(n - 1);
    for i in 0..d {
        for j in i..d {
            let c = cov[i * d + j] / denom;
            cov[i * d + j] = c;
            cov[j * d + i] = c;
        }
    }
    (mean, cov)
}

/// Projects `vectors` onto the two leading eigenvectors of their covariance.
pub fn pca_2d<T: Real>(vectors: &[Vec<T>]) -> Result<Pca2<T>, FeatureError> {
    if vectors.len() < 2 {
        return Err(FeatureError::InvalidParameter("PCA needs at least 2 vectors"));
    }
    let d = vectors[0].len();
    if d < 2 {
        return Err(FeatureError::InvalidParameter("PCA needs at least 2 dimensions"));
    }
    if vectors.iter().any(|v| v.len() != d) {
        return Err(FeatureError::InvalidParameter("vectors differ in length"));
    }
    let (mean, cov) = covariance(vectors);
    if (0..d).all(|i| cov[i * d + i] == T::zero()) {
        return Err(FeatureError::ZeroVariance);
    }
    let eig = symmetric_eigen(&cov, d);
    let components = [eig.vectors[0].clone(), eig.vectors[1].clone()];
    let projected = vectors
        .iter()
        .map(|v| {
            components.each_ref().map(|c| {
                v.iter()
                    .zip(&mean)
                    .zip(c)
                    .map(|((&x, &m), &w)| (x - m) * w)
                    .sum()
            })
        })
        .collect();
    Ok(Pca2 {
        mean,
        components,
        projected,
        explained: [eig.values[0], eig.values[1]],
        eigenvalues: eig.values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn axis_aligned_ellipse() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Vec<f64>> = (0..500)
            .map(|_| {
                let (a, b): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
                vec![1.0 * a, 3.0 * b]
            })
            .collect();
        // make the sample exactly uncorrelated by symmetrizing
        let pts: Vec<Vec<f64>> = pts.iter().flat_map(|p| [p.clone(), vec![-p[0], p[1]]]).collect();
        let pca = pca_2d(&pts).unwrap();
        assert!((pca.components[0][1] - 1.0).abs() < 1e-12 && pca.components[0][0].abs() < 1e-12);
        assert!((pca.components[1][0] - 1.0).abs() < 1e-12 && pca.components[1][1].abs() < 1e-12);
        assert!(pca.explained[0] > pca.explained[1]);
    }

    #[test]
    fn planar_data_has_null_third_eigenvalue() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts: Vec<Vec<f64>> = (0..200)
            .map(|_| {
                let (u, v): (f64, f64) = (rng.random_range(-5.0..5.0), rng.random_range(-2.0..2.0));
                vec![u + v, u - 2.0 * v, 3.0 * u + 0.5 * v]
            })
            .collect();
        let pca = pca_2d(&pts).unwrap();
        assert!(pca.eigenvalues[2].abs() < 1e-9);
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(pca_2d(&[vec![1.0, 2.0]]), Err(FeatureError::InvalidParameter("PCA needs at least 2 vectors")));
        assert_eq!(pca_2d(&[vec![1.0, 2.0], vec![1.0, 2.0]]), Err(FeatureError::ZeroVariance));
    }

    #[test]
    fn random_5d_matches_nalgebra() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<Vec<f64>> = (0..300)
            .map(|_| {
                let z: Vec<f64> = (0..5).map(|_| rng.sample(StandardNormal)).collect();
                vec![z[0] * 4.0, z[0] + z[1] * 2.0, z[2], z[3] * 0.5 + z[1], z[4] * 0.1]
            })
            .collect();
        let pca = pca_2d(&pts).unwrap();
        let (_, cov) = covariance(&pts);
        let oracle = DMatrix::from_row_slice(5, 5, &cov).symmetric_eigen();
        let mut ev: Vec<f64> = oracle.eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (a, b) in pca.eigenvalues.iter().zip(&ev) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        // projected variance equals eigenvalue
        for k in 0..2 {
            let n = pca.projected.len() as f64;
            let mean = pca.projected.iter().map(|p| p[k]).sum::<f64>() / n;
            let var = pca.projected.iter().map(|p| (p[k] - mean).powi(2)).sum::<f64>() / (n - 1.0);
            assert!((var - ev[k]).abs() < 1e-9);
            assert!(mean.abs() < 1e-9);
        }
    }

    fn sym_matrix() -> impl Strategy<Value = (usize, Vec<f64>)> {
        (1usize..9).prop_flat_map(|n| {
            prop::collection::vec(-10.0f64..10.0, n * n).prop_map(move |raw| {
                let mut a = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..n {
                        a[i * n + j] = 0.5 * (raw[i * n + j] + raw[j * n + i]);
                    }
                }
                (n, a)
            })
        })
    }

    proptest! {
        #[test]
        fn eigen_decomposition_reconstructs((n, a) in sym_matrix()) {
            let eig = symmetric_eigen(&a, n);
            let oracle = DMatrix::from_row_slice(n, n, &a).symmetric_eigen();
            let mut ev: Vec<f64> = oracle.eigenvalues.iter().copied().collect();
            ev.sort_by(|x, y| y.partial_cmp(x).unwrap());
            for (x, y) in eig.values.iter().zip(&ev) {
                prop_assert!((x - y).abs() < 1e-9);
            }
            for i in 0..n {
                for j in 0..n {
                    // orthonormality
                    let dot: f64 = (0..n).map(|k| eig.vectors[i][k] * eig.vectors[j][k]).sum();
                    let expected = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((dot - expected).abs() < 1e-9);
                    // A = V Λ Vᵀ
                    let rec: f64 = (0..n).map(|k| eig.vectors[k][i] * eig.values[k] * eig.vectors[k][j]).sum();
                    prop_assert!((rec - a[i * n + j]).abs() < 1e-9);
                }
                let v = &eig.vectors[i];
                let big = v.iter().cloned().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
                prop_assert!(big > 0.0);
            }
        }
    }
}
