//! Colorizing LiDAR points from a georeferenced color-infrared raster and
//! min-max normalization of the non-geometric channels.

use rayon::prelude::*;
use thiserror::Error;

use crate::model::{AffineTransform, ChannelState, GeoRaster, PointCloud};
use crate::num::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FusionError {
    #[error("singular raster transform (determinant {0})")]
    SingularTransform(f64),
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("none of the {0} points fall inside the raster")]
    NoOverlap(usize),
}

/// Fractional pixel position; pixel centers sit on integers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelCoord {
    pub col: f64,
    pub row: f64,
}

impl PixelCoord {
    /// Integer pixel whose footprint contains this position.
    pub fn containing_pixel(&self) -> (i64, i64) {
        ((self.col + 0.5).floor() as i64, (self.row + 0.5).floor() as i64)
    }
}

/// Inverts the pixel-center-to-world affine map.
pub fn world_to_pixel(t: &AffineTransform, x: f64, y: f64) -> Result<PixelCoord, FusionError> {
    let det = t.determinant();
    if det == 0.0 || !det.is_finite() {
        return Err(FusionError::SingularTransform(det));
    }
    let (dx, dy) = (x - t.c, y - t.f);
    Ok(PixelCoord {
        col: (t.e * dx - t.b * dy) / det,
        row: (t.a * dy - t.d * dx) / det,
    })
}

/// Result of [`colorize`]: the colored cloud plus how many points missed the raster.
#[derive(Debug, Clone, PartialEq)]
pub struct Colorized<T> {
    pub cloud: PointCloud<T>,
    pub outside: usize,
}

/// Assigns each point the raw `(nir, r, g)` bytes of the raster pixel it falls
/// into. Points outside the raster keep their position and get `(0, 0, 0)`.
pub fn colorize<T: Real>(
    cloud: &PointCloud<T>,
    raster: &GeoRaster,
) -> Result<Colorized<T>, FusionError> {
    if cloud.is_empty() {
        return Err(FusionError::EmptyCloud);
    }
    let t = raster.transform();
    world_to_pixel(t, 0.0, 0.0)?;
    let (w, h) = (raster.width() as i64, raster.height() as i64);

    let colored: Vec<_> = cloud
        .points()
        .par_iter()
        .map(|p| {
            let px = world_to_pixel(t, p.x.f64(), p.y.f64()).expect("checked above");
            let (col, row) = px.containing_pixel();
            let mut q = *p;
            if (0..w).contains(&col) && (0..h).contains(&row) {
                let [nir, r, g] = raster.pixel(col as usize, row as usize);
                q.nir = T::of(nir as f64);
                q.r = T::of(r as f64);
                q.g = T::of(g as f64);
                (q, false)
            } else {
                q.nir = T::zero();
                q.r = T::zero();
                q.g = T::zero();
                (q, true)
            }
        })
        .collect();

    let outside = colored.iter().filter(|(_, out)| *out).count();
    if outside == colored.len() {
        return Err(FusionError::NoOverlap(outside));
    }
    let cloud = PointCloud::from_points(colored.into_iter().map(|(p, _)| p).collect())
        .with_channel_state(cloud.channel_state());
    Ok(Colorized { cloud, outside })
}

/// Maps intensity, NIR, R and G each to `[0, 1]` by per-cloud min-max.
///
/// A constant channel maps to 0. Already-normalized clouds are returned as is.
pub fn normalize_channels<T: Real>(cloud: &PointCloud<T>) -> Result<PointCloud<T>, FusionError> {
    if cloud.is_empty() {
        return Err(FusionError::EmptyCloud);
    }
    if cloud.channel_state() == ChannelState::Normalized {
        return Ok(cloud.clone());
    }
    let pts = cloud.points();
    let range = |get: fn(&crate::model::MultispectralPoint<T>) -> T| {
        pts.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), p| {
            let v = get(p);
            (lo.min(v), hi.max(v))
        })
    };
    let ranges = [
        range(|p| p.intensity),
        range(|p| p.nir),
        range(|p| p.r),
        range(|p| p.g),
    ];
    let scale = |v: T, (lo, hi): (T, T)| {
        if hi > lo {
            ((v - lo) / (hi - lo)).max(T::zero()).min(T::one())
        } else {
            T::zero()
        }
    };
    let mut out = cloud.clone();
    out.map_points(|p| {
        p.intensity = scale(p.intensity, ranges[0]);
        p.nir = scale(p.nir, ranges[1]);
        p.r = scale(p.r, ranges[2]);
        p.g = scale(p.g, ranges[3]);
    });
    out.set_channel_state(ChannelState::Normalized);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MultispectralPoint;

    fn tf(v: [f64; 6]) -> AffineTransform {
        AffineTransform::from_world_file_order(v)
    }

    #[test]
    fn pixel_center_identity() {
        let t = tf([1.0, 0.0, 0.0, -1.0, 0.5, -0.5]);
        assert_eq!(world_to_pixel(&t, 0.5, -0.5).unwrap(), PixelCoord { col: 0.0, row: 0.0 });
        // col = (x - 0.5) / 1 = 2, row = (y + 0.5) / -1 = 3
        assert_eq!(world_to_pixel(&t, 2.5, -3.5).unwrap(), PixelCoord { col: 2.0, row: 3.0 });
    }

    #[test]
    fn rotated_transform_round_trip() {
        let t = tf([0.8, 0.3, -0.25, -0.9, 1234.5, 987.25]);
        for (col, row) in [(0.0, 0.0), (3.25, 7.5), (-2.0, 11.0), (100.125, 3.0)] {
            let (x, y) = t.pixel_to_world(col, row);
            let p = world_to_pixel(&t, x, y).unwrap();
            assert!((p.col - col).abs() < 1e-9 && (p.row - row).abs() < 1e-9);
        }
    }

    #[test]
    fn singular_transform() {
        let t = tf([1.0, 2.0, 2.0, 4.0, 0.0, 0.0]);
        assert!(matches!(world_to_pixel(&t, 1.0, 1.0), Err(FusionError::SingularTransform(_))));
    }

    fn raster_5x4() -> GeoRaster {
        // 0.2 m pixels, top-left pixel center at (100.1, 200.1)
        let t = tf([0.2, 0.0, 0.0, -0.2, 100.1, 200.1]);
        let n = 20;
        let mut planes = [vec![0u8; n], vec![0u8; n], vec![0u8; n]];
        let i = 2 * 5 + 3;
        planes[0][i] = 200;
        planes[1][i] = 50;
        planes[2][i] = 25;
        GeoRaster::new(5, 4, planes, t).unwrap()
    }

    #[test]
    fn colorizes_from_containing_pixel() {
        let r = raster_5x4();
        let (x, y) = r.transform().pixel_to_world(3.0, 2.0);
        let cloud = PointCloud::from_points(vec![
            MultispectralPoint::new(x, y, 12.0, 40.0),
            MultispectralPoint::new(x + 0.05, y - 0.07, 3.0, 41.0),
        ]);
        let out = colorize(&cloud, &r).unwrap();
        assert_eq!(out.outside, 0);
        for (a, b) in cloud.points().iter().zip(out.cloud.points()) {
            assert_eq!((b.nir, b.r, b.g), (200.0, 50.0, 25.0));
            assert_eq!((a.x, a.y, a.z, a.intensity), (b.x, b.y, b.z, b.intensity));
        }
        let again = colorize(&out.cloud, &r).unwrap();
        assert_eq!(again.cloud, out.cloud);
    }

    #[test]
    fn outside_point_is_flagged() {
        let r = raster_5x4();
        let (x, y) = r.transform().pixel_to_world(3.0, 2.0);
        let cloud = PointCloud::from_points(vec![
            MultispectralPoint::new(x, y, 0.0, 0.0),
            MultispectralPoint::new(100.0 - 1.0, y, 0.0, 0.0),
        ]);
        let out = colorize(&cloud, &r).unwrap();
        assert_eq!(out.outside, 1);
        let p = out.cloud.points()[1];
        assert_eq!((p.nir, p.r, p.g), (0.0, 0.0, 0.0));

        let far = PointCloud::from_points(vec![MultispectralPoint::new(0.0, 0.0, 0.0, 0.0)]);
        assert_eq!(colorize(&far, &r), Err(FusionError::NoOverlap(1)));
    }

    #[test]
    fn min_max_normalization() {
        let cloud = PointCloud::from_points(
            [10.0, 20.0, 30.0]
                .iter()
                .map(|&i| MultispectralPoint::new(0.0, 0.0, 0.0, i).with_color(5.0, i, 1.0))
                .collect(),
        );
        let n = normalize_channels(&cloud).unwrap();
        let inten: Vec<f64> = n.points().iter().map(|p| p.intensity).collect();
        assert_eq!(inten, vec![0.0, 0.5, 1.0]);
        assert!(n.points().iter().all(|p| p.nir == 0.0 && p.g == 0.0));
        assert_eq!(n.channel_state(), ChannelState::Normalized);
        assert_eq!(normalize_channels(&n).unwrap(), n);
        assert_eq!(normalize_channels(&PointCloud::<f64>::new()), Err(FusionError::EmptyCloud));
    }
}
