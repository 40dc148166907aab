//! Orthographic side views of single trees.
//!
//! A view at azimuth `a` rotates the tree by `a` about its xy centroid and
//! looks along +y: image columns follow x (centered on the centroid), rows
//! follow height with the ground on the bottom row, and the nearest point
//! (smallest rotated y) wins each pixel.

use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{write_ppm, DecayLevel, PointCloud};
use crate::num::Real;

#[derive(Debug, Error, PartialEq)]
pub enum ProjectionError {
    #[error("cannot render an empty tree")]
    EmptyTree,
    #[error("downscale factor {0} is not the reciprocal of a positive integer")]
    NonIntegralFactor(f64),
    #[error("invalid canvas: {0}")]
    InvalidCanvas(&'static str),
}

/// The four view azimuths, degrees.
pub const AZIMUTHS: [u16; 4] = [0, 90, 180, 270];

/// Geometry of the render canvas and of the final image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanvasSpec {
    pub world_width: f64,
    pub world_height: f64,
    pub px_per_m: f64,
    pub downscale: f64,
    pub final_width: usize,
    pub final_height: usize,
}

impl Default for CanvasSpec {
    fn default() -> Self {
        Self {
            world_width: 20.0,
            world_height: 40.0,
            px_per_m: 10.0,
            downscale: 0.2,
            final_width: 129,
            final_height: 132,
        }
    }
}

impl CanvasSpec {
    /// Canvas large enough for every view of every tree: twice the largest
    /// horizontal distance from a tree's centroid plus 1 m, by the tallest
    /// tree plus 1 m. Other fields keep their defaults.
    pub fn fit_trees<'a, T: Real>(trees: impl IntoIterator<Item = &'a PointCloud<T>>) -> Self {
        let mut radius = 0.0f64;
        let mut top = 0.0f64;
        for t in trees {
            let Ok((cx, cy)) = t.centroid_xy() else { continue };
            for p in t.points() {
                let dx = (p.x - cx).f64();
                let dy = (p.y - cy).f64();
                radius = radius.max(dx.hypot(dy));
                top = top.max(p.z.f64());
            }
        }
        Self {
            world_width: 2.0 * radius + 1.0,
            world_height: top + 1.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ProjectionError> {
        if !(self.world_width > 0.0 && self.world_height > 0.0) {
            return Err(ProjectionError::InvalidCanvas("world extent must be positive"));
        }
        if !(self.px_per_m > 0.0) {
            return Err(ProjectionError::InvalidCanvas("px_per_m must be positive"));
        }
        if !(self.downscale > 0.0 && self.downscale <= 1.0) {
            return Err(ProjectionError::InvalidCanvas("downscale must be in (0, 1]"));
        }
        if self.final_width == 0 || self.final_height == 0 {
            return Err(ProjectionError::InvalidCanvas("final size must be positive"));
        }
        Ok(())
    }

    /// Render canvas size in pixels, (width, height).
    pub fn canvas_px(&self) -> (usize, usize) {
        (
            (self.world_width * self.px_per_m).ceil() as usize,
            (self.world_height * self.px_per_m).ceil() as usize,
        )
    }
}

/// Three-channel (NIR, R, G) image with values in [0, 1], row-major, row 0 on top.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewImage<T> {
    pub width: usize,
    pub height: usize,
    pub azimuth: u16,
    pub pixels: Vec<[T; 3]>,
}

impl<T: Real> ViewImage<T> {
    pub fn blank(width: usize, height: usize, azimuth: u16) -> Self {
        Self {
            width,
            height,
            azimuth,
            pixels: vec![[T::zero(); 3]; width * height],
        }
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> [T; 3] {
        self.pixels[row * self.width + col]
    }

    /// Number of pixels that are not pure background.
    pub fn lit_count(&self) -> usize {
        self.pixels.iter().filter(|p| p.iter().any(|&c| c != T::zero())).count()
    }

    /// Binary PPM (P6); each value is scaled by 255 and rounded half-up.
    pub fn to_ppm(&self) -> Vec<u8> {
        let rgb: Vec<u8> = self
            .pixels
            .iter()
            .flat_map(|px| px.map(|c| (c.f64() * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8))
            .collect();
        write_ppm(self.width, self.height, &rgb)
    }
}

/// Rotation by `degrees` (counter-clockwise) as (cos, sin), exact for
/// multiples of 90.
fn cos_sin<T: Real>(degrees: T) -> (T, T) {
    let d = degrees.f64().rem_euclid(360.0);
    let quarter = d / 90.0;
    if quarter == quarter.floor() {
        let one = T::one();
        let zero = T::zero();
        return match quarter as u32 {
            0 => (one, zero),
            1 => (zero, one),
            2 => (-one, zero),
            _ => (zero, -one),
        };
    }
    let r = T::of(d.to_radians());
    (r.cos(), r.sin())
}

/// Rotates x,y about the cloud's xy centroid; z and channels are unchanged.
pub fn rotate_z<T: Real>(cloud: &PointCloud<T>, azimuth: T) -> PointCloud<T> {
    let Ok((cx, cy)) = cloud.centroid_xy() else {
        return cloud.clone();
    };
    let (c, s) = cos_sin(azimuth);
    if c == T::one() {
        return cloud.clone();
    }
    let mut out = cloud.clone();
    out.map_points(|p| {
        let (dx, dy) = (p.x - cx, p.y - cy);
        p.x = cx + (c * dx - s * dy);
        p.y = cy + (s * dx + c * dy);
    });
    out
}

/// Renders one side view on the full-resolution canvas.
pub fn render_view<T: Real>(
    tree: &PointCloud<T>,
    spec: &CanvasSpec,
    azimuth: u16,
) -> Result<ViewImage<T>, ProjectionError> {
    spec.validate()?;
    if tree.is_empty() {
        return Err(ProjectionError::EmptyTree);
    }
    let rotated = rotate_z(tree, T::of(azimuth as f64));
    let (cx, _) = rotated.centroid_xy().expect("nonempty");
    let (w, h) = spec.canvas_px();
    let ppm = T::of(spec.px_per_m);
    let half = T::of(spec.world_width / 2.0);

    let mut img = ViewImage::blank(w, h, azimuth % 360);
    let mut depth = vec![T::infinity(); w * h];
    for p in rotated.points() {
        let col = ((p.x - cx + half) * ppm).floor();
        let up = (p.z * ppm).floor();
        if col < T::zero() || up < T::zero() {
            continue;
        }
        let (col, up) = (col.to_usize().unwrap_or(usize::MAX), up.to_usize().unwrap_or(usize::MAX));
        if col >= w || up >= h {
            continue;
        }
        let k = (h - 1 - up) * w + col;
        if p.y < depth[k] {
            depth[k] = p.y;
            let unit = |v: T| v.max(T::zero()).min(T::one());
            img.pixels[k] = [unit(p.nir), unit(p.r), unit(p.g)];
        }
    }
    Ok(img)
}

/// Block factor `k` with `factor == 1/k`.
pub fn block_size(factor: f64) -> Result<usize, ProjectionError> {
    if !(factor > 0.0 && factor <= 1.0) {
        return Err(ProjectionError::NonIntegralFactor(factor));
    }
    let k = (1.0 / factor).round();
    if (k * factor - 1.0).abs() > 1e-9 {
        return Err(ProjectionError::NonIntegralFactor(factor));
    }
    Ok(k as usize)
}

/// k×k block mean with `k = 1/factor`; edge blocks average the pixels they
/// contain, so output dims are `ceil(dims / k)`.
pub fn downscale_blocks<T: Real>(image: &ViewImage<T>, factor: f64) -> Result<ViewImage<T>, ProjectionError> {
    let k = block_size(factor)?;
    if k == 1 {
        return Ok(image.clone());
    }
    let (w, h) = (image.width.div_ceil(k), image.height.div_ceil(k));
    let mut out = ViewImage::blank(w, h, image.azimuth);
    for row in 0..h {
        for col in 0..w {
            let mut acc = [T::zero(); 3];
            let mut n = 0usize;
            for r in row * k..((row + 1) * k).min(image.height) {
                for c in col * k..((col + 1) * k).min(image.width) {
                    let px = image.get(c, r);
                    for ch in 0..3 {
                        acc[ch] += px[ch];
                    }
                    n += 1;
                }
            }
            let n = T::of_usize(n);
            out.pixels[row * w + col] = acc.map(|a| a / n);
        }
    }
    Ok(out)
}

/// Centers `image` on a `width × height` canvas, padding with background or
/// cropping symmetrically (odd remainders go to the right/bottom).
pub fn fit_canvas<T: Real>(image: &ViewImage<T>, width: usize, height: usize) -> ViewImage<T> {
    let mut out = ViewImage::blank(width, height, image.azimuth);
    // offset of the source origin on the target canvas, may be negative
    let ox = (width as isize - image.width as isize).div_euclid(2);
    let oy = (height as isize - image.height as isize).div_euclid(2);
    let ox = if width >= image.width { ox } else { -((image.width - width) as isize / 2) };
    let oy = if height >= image.height { oy } else { -((image.height - height) as isize / 2) };
    for row in 0..image.height {
        let tr = row as isize + oy;
        if tr < 0 || tr >= height as isize {
            continue;
        }
        for col in 0..image.width {
            let tc = col as isize + ox;
            if tc < 0 || tc >= width as isize {
                continue;
            }
            out.pixels[tr as usize * width + tc as usize] = image.get(col, row);
        }
    }
    out
}

/// Block-mean downscale followed by center pad/crop to the final size.
pub fn downscale<T: Real>(image: &ViewImage<T>, spec: &CanvasSpec) -> Result<ViewImage<T>, ProjectionError> {
    let small = downscale_blocks(image, spec.downscale)?;
    Ok(fit_canvas(&small, spec.final_width, spec.final_height))
}

/// The four final-size views at azimuths 0, 90, 180 and 270.
pub fn project_views<T: Real>(tree: &PointCloud<T>, spec: &CanvasSpec) -> Result<[ViewImage<T>; 4], ProjectionError> {
    let mut views = Vec::with_capacity(4);
    for az in AZIMUTHS {
        views.push(downscale(&render_view(tree, spec, az)?, spec)?);
    }
    Ok(views.try_into().expect("four azimuths"))
}

/// Sidecar CSV for exported views: `tree_id,azimuth,label,file`. Unlabelled
/// trees leave the label empty.
pub fn views_manifest_csv<'a>(rows: impl IntoIterator<Item = (usize, u16, Option<DecayLevel>, &'a str)>) -> String {
    let mut out = String::from("tree_id,azimuth,label,file\n");
    for (id, az, label, file) in rows {
        let label = label.map(|l| l.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{id},{az},{label},{file}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ChannelState, MultispectralPoint};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cpt(x: f64, y: f64, z: f64, c: [f64; 3]) -> MultispectralPoint<f64> {
        MultispectralPoint::new(x, y, z, 0.5).with_color(c[0], c[1], c[2])
    }

    fn cloud(pts: Vec<MultispectralPoint<f64>>) -> PointCloud<f64> {
        PointCloud::from_points(pts).with_channel_state(ChannelState::Normalized)
    }

    #[test]
    fn rotation_examples() {
        let c = cloud(vec![cpt(1.0, 0.0, 0.0, [0.0; 3]), cpt(-1.0, 0.0, 0.0, [0.0; 3])]);
        assert_eq!(rotate_z(&c, 0.0), c);
        let r = rotate_z(&c, 90.0);
        assert!((r.points()[0].x - 0.0).abs() < 1e-12 && (r.points()[0].y - 1.0).abs() < 1e-12);
        let full = rotate_z(&c, 360.0);
        for (a, b) in full.points().iter().zip(c.points()) {
            assert!((a.x - b.x).abs() < 1e-9 && (a.y - b.y).abs() < 1e-9);
        }
        // general angles go through sin/cos
        let r = rotate_z(&c, 45.0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((r.points()[0].x - h).abs() < 1e-12 && (r.points()[0].y - h).abs() < 1e-12);
        assert_eq!(r.points()[0].z, 0.0);
    }

    fn spec(w: f64, h: f64, ppm: f64) -> CanvasSpec {
        CanvasSpec {
            world_width: w,
            world_height: h,
            px_per_m: ppm,
            ..CanvasSpec::default()
        }
    }

    #[test]
    fn single_point_lands_in_center() {
        let s = spec(2.1, 2.0, 10.0);
        let img = render_view(&cloud(vec![cpt(3.0, 4.0, 1.0, [0.2, 0.4, 0.6])]), &s, 0).unwrap();
        assert_eq!((img.width, img.height), (21, 20));
        assert_eq!(img.lit_count(), 1);
        assert_eq!(img.get(10, 9), [0.2, 0.4, 0.6]);
    }

    #[test]
    fn nearer_point_wins() {
        let s = spec(4.0, 4.0, 10.0);
        for pts in [
            vec![cpt(0.0, 1.0, 2.0, [1.0, 0.0, 0.0]), cpt(0.0, 2.0, 2.0, [0.0, 1.0, 0.0])],
            vec![cpt(0.0, 2.0, 2.0, [0.0, 1.0, 0.0]), cpt(0.0, 1.0, 2.0, [1.0, 0.0, 0.0])],
        ] {
            let img = render_view(&cloud(pts), &s, 0).unwrap();
            assert_eq!(img.lit_count(), 1);
            assert!(img.pixels.contains(&[1.0, 0.0, 0.0]));
        }
    }

    #[test]
    fn empty_tree_and_bad_factor() {
        assert_eq!(
            render_view(&PointCloud::<f64>::new(), &CanvasSpec::default(), 0),
            Err(ProjectionError::EmptyTree)
        );
        let img = ViewImage::<f64>::blank(4, 4, 0);
        assert_eq!(downscale_blocks(&img, 0.3), Err(ProjectionError::NonIntegralFactor(0.3)));
        assert_eq!(block_size(0.2), Ok(5));
        assert_eq!(block_size(0.25), Ok(4));
    }

    #[test]
    fn downscale_examples() {
        let mut img = ViewImage::<f64>::blank(10, 10, 0);
        img.pixels.iter_mut().for_each(|p| *p = [0.4; 3]);
        let d = downscale_blocks(&img, 0.2).unwrap();
        assert_eq!((d.width, d.height), (2, 2));
        assert!(d.pixels.iter().all(|p| p.iter().all(|&v| (v - 0.4).abs() < 1e-15)));

        let mut one = ViewImage::<f64>::blank(5, 5, 0);
        one.pixels[12] = [1.0; 3];
        let d = downscale_blocks(&one, 0.2).unwrap();
        assert_eq!(d.pixels, vec![[1.0 / 25.0; 3]]);
        assert_eq!(d.pixels[0][0], 0.04);

        // ragged edges average what they hold
        let mut ragged = ViewImage::<f64>::blank(7, 5, 0);
        ragged.pixels[6] = [1.0; 3];
        let d = downscale_blocks(&ragged, 0.2).unwrap();
        assert_eq!((d.width, d.height), (2, 1));
        assert_eq!(d.pixels[1][0], 0.1);

        assert_eq!(downscale_blocks(&one, 1.0).unwrap(), one);
    }

    #[test]
    fn fit_pads_and_crops_centered() {
        let mut img = ViewImage::<f64>::blank(3, 2, 90);
        img.pixels[0] = [1.0; 3];
        let padded = fit_canvas(&img, 7, 6);
        assert_eq!(padded.get(2, 2), [1.0; 3]);
        assert_eq!(padded.lit_count(), 1);
        assert_eq!(padded.azimuth, 90);

        let mut big = ViewImage::<f64>::blank(7, 6, 0);
        for (i, p) in big.pixels.iter_mut().enumerate() {
            *p = [i as f64; 3];
        }
        let cropped = fit_canvas(&big, 3, 2);
        assert_eq!(cropped.get(0, 0), big.get(2, 2));
        assert_eq!(cropped.get(2, 1), big.get(4, 3));
        assert_eq!(fit_canvas(&big, 7, 6), big);
    }

    #[test]
    fn project_views_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = (0..400)
            .map(|_| {
                let c = [rng.random(), rng.random(), rng.random()];
                cpt(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(0.0..15.0), c)
            })
            .collect();
        let tree = cloud(pts);
        let s = CanvasSpec::fit_trees([&tree]);
        let views = project_views(&tree, &s).unwrap();
        assert_eq!(views.each_ref().map(|v| v.azimuth), AZIMUTHS);
        for v in &views {
            assert_eq!((v.width, v.height), (129, 132));
            assert!(v.pixels.iter().flatten().all(|&c| (0.0..=1.0).contains(&c)));
        }
    }

    /// Four-fold symmetric cone: every point also appears rotated by 90°, 180°, 270°.
    fn symmetric_cone(seed: u64, n: usize) -> PointCloud<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pts = Vec::new();
        for _ in 0..n {
            let z: f64 = rng.random_range(0.5..12.0);
            let r = 3.0 * (1.0 - z / 12.0) * rng.random::<f64>().sqrt();
            let th: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let c = [z / 12.0, 0.5, 1.0 - z / 12.0];
            let (x, y) = (r * th.cos(), r * th.sin());
            pts.extend([cpt(x, y, z, c), cpt(-y, x, z, c), cpt(-x, -y, z, c), cpt(y, -x, z, c)]);
        }
        cloud(pts)
    }

    #[test]
    fn symmetric_cone_views_agree() {
        let tree = symmetric_cone(7, 800);
        let s = CanvasSpec::fit_trees([&tree]);
        let views = project_views(&tree, &s).unwrap();
        let total = views[0].pixels.len();
        for v in &views[1..] {
            let differing = v.pixels.iter().zip(&views[0].pixels).filter(|(a, b)| a != b).count();
            assert!(
                differing as f64 <= 0.01 * total as f64,
                "azimuth {}: {differing} of {total} pixels differ",
                v.azimuth
            );
        }
    }

    #[test]
    fn front_and_rear_are_mirrors() {
        // Mirror-symmetric in y. 512 dyadic points make the centroid exact, and
        // x sits on half-pixel centers so no column boundary is ever hit.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut pts = Vec::new();
        for _ in 0..256 {
            let x = (rng.random_range(-20i32..20) as f64 + 0.5) / 8.0;
            let y = rng.random_range(1i32..20) as f64 / 8.0;
            let z = (rng.random_range(0i32..80) as f64 + 0.5) / 8.0;
            let c = [rng.random(), rng.random(), rng.random()];
            pts.push(cpt(x, y, z, c));
            pts.push(cpt(x, -y, z, c));
        }
        let tree = cloud(pts);
        let (cx, _) = tree.centroid_xy().unwrap();
        assert_ne!((cx * 8.0).rem_euclid(1.0), 0.5);
        let s = spec(8.0, 12.0, 8.0);
        let front = render_view(&tree, &s, 0).unwrap();
        let rear = render_view(&tree, &s, 180).unwrap();
        assert!(front.lit_count() > 100);
        let w = front.width;
        for row in 0..front.height {
            for col in 0..w {
                assert_eq!(front.get(col, row), rear.get(w - 1 - col, row), "pixel ({col},{row})");
            }
        }
    }

    fn dyadic_cloud() -> impl Strategy<Value = Vec<(i32, i32, i32, u8)>> {
        // 64 points keeps the centroid (a sum divided by a power of two) exact.
        prop::collection::vec((-64i32..64, -64i32..64, 0i32..128, 0u8..=255), 64)
    }

    fn build(raw: &[(i32, i32, i32, u8)]) -> PointCloud<f64> {
        cloud(
            raw.iter()
                .map(|&(x, y, z, c)| {
                    let v = c as f64 / 255.0;
                    cpt(x as f64 / 16.0, y as f64 / 16.0, z as f64 / 16.0, [v, 1.0 - v, 0.5])
                })
                .collect(),
        )
    }

    proptest! {
        #[test]
        fn view_identity(raw in dyadic_cloud(), a in 0u16..4, b in 0u16..4) {
            let tree = build(&raw);
            let s = spec(12.0, 9.0, 8.0);
            let (a, b) = (a * 90, b * 90);
            let lhs = render_view(&rotate_z(&tree, a as f64), &s, b).unwrap();
            let rhs = render_view(&tree, &s, (a + b) % 360).unwrap();
            prop_assert_eq!(lhs.pixels, rhs.pixels);
        }

        #[test]
        fn depth_buffer_matches_brute_force(
            raw in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0, 0.0f64..6.0, 0.0f64..1.0), 1..1000),
            az in 0u16..4,
        ) {
            let tree = cloud(raw.iter().map(|&(x, y, z, c)| cpt(x, y, z, [c, c, c])).collect());
            let s = spec(7.0, 6.5, 4.0);
            let img = render_view(&tree, &s, az * 90).unwrap();

            // Oracle: rotate and bin independently, then take argmin depth per pixel.
            let rot = rotate_z(&tree, (az * 90) as f64);
            let n = rot.len() as f64;
            let cx = rot.points().iter().map(|p| p.x).sum::<f64>() / n;
            let (w, h) = s.canvas_px();
            let mut best: Vec<Option<(f64, f64)>> = vec![None; w * h];
            for p in rot.points() {
                let col = ((p.x - cx + s.world_width / 2.0) * s.px_per_m).floor();
                let up = (p.z * s.px_per_m).floor();
                if col < 0.0 || up < 0.0 || col >= w as f64 || up >= h as f64 {
                    continue;
                }
                let k = (h - 1 - up as usize) * w + col as usize;
                if best[k].is_none_or(|(d, _)| p.y < d) {
                    best[k] = Some((p.y, p.nir));
                }
            }
            for (k, b) in best.iter().enumerate() {
                let expect = b.map(|(_, c)| c).unwrap_or(0.0);
                prop_assert_eq!(img.pixels[k][0], expect);
            }
            prop_assert!(img.lit_count() <= tree.len());
        }
    }

    #[test]
    fn ppm_export_rounds_half_up() {
        let mut img = ViewImage::<f64>::blank(2, 1, 0);
        img.pixels[0] = [0.5, 1.0, 0.0];
        img.pixels[1] = [0.002, 0.001, 1.0 / 255.0];
        let bytes = img.to_ppm();
        let (w, h, rgb) = crate::model::read_ppm(&bytes).unwrap();
        assert_eq!((w, h), (2, 1));
        // 127.5 rounds up to 128
        assert_eq!(rgb, vec![128, 255, 0, 1, 0, 1]);
    }

    #[test]
    fn manifest_rows() {
        let l = DecayLevel::new(3).unwrap();
        let csv = views_manifest_csv([(0, 0, Some(l), "t0_000.ppm"), (1, 90, None, "t1_090.ppm")]);
        assert_eq!(csv, "tree_id,azimuth,label,file\n0,0,3,t0_000.ppm\n1,90,,t1_090.ppm\n");
    }
}
