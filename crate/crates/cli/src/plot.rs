//! Synthetic plot: generated trees standing on sloped, noisy terrain, plus a
//! color-infrared orthophoto of the canopy.

use deadwood::dataset::LabeledSample;
use deadwood::model::{AffineTransform, MultispectralPoint};
use deadwood::{GeoRaster, PointCloud};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Spacing between tree stems, m.
pub const TREE_SPACING: f64 = 12.0;
const MARGIN: f64 = 8.0;
const GROUND_STEP: f64 = 1.0;
const PIXEL: f64 = 0.5;
const SOIL: [u8; 3] = [60, 70, 55];
/// Unit intensities are stored as 12-bit LAS integers.
const LAS_INTENSITY: f64 = 4095.0;

fn terrain(x: f64, y: f64) -> f64 {
    100.0 + 0.03 * x + 0.02 * y
}

/// Lays `trees` out on a square grid, adds ground points, and renders a
/// top-down orthophoto in which every pixel takes the color of its highest
/// tree point. Returned points carry no color; the raster does.
pub fn synthetic_plot(trees: &[LabeledSample<f64>], seed: u64) -> (PointCloud, GeoRaster) {
    let side = (trees.len() as f64).sqrt().ceil().max(1.0) as usize;
    let extent = 2.0 * MARGIN + (side.saturating_sub(1)) as f64 * TREE_SPACING;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.03).expect("valid sd");

    let mut points = Vec::new();
    let steps = (extent / GROUND_STEP).round() as usize;
    for i in 0..=steps {
        for j in 0..=steps {
            let (x, y) = (i as f64 * GROUND_STEP, j as f64 * GROUND_STEP);
            points.push(MultispectralPoint::new(x, y, terrain(x, y) + noise.sample(&mut rng), (0.1 * LAS_INTENSITY).round()));
        }
    }

    // one extra pixel so points on the far edge still land inside
    let px = (extent / PIXEL).floor() as usize + 1;
    let mut top = vec![f64::NEG_INFINITY; px * px];
    let mut planes = [vec![SOIL[0]; px * px], vec![SOIL[1]; px * px], vec![SOIL[2]; px * px]];
    for (t, sample) in trees.iter().enumerate() {
        let cloud = &sample.tree.points;
        let Ok((cx, cy)) = cloud.centroid_xy() else { continue };
        let ox = MARGIN + (t % side) as f64 * TREE_SPACING;
        let oy = MARGIN + (t / side) as f64 * TREE_SPACING;
        for p in cloud.points() {
            let (x, y) = (p.x - cx + ox, p.y - cy + oy);
            points.push(MultispectralPoint::new(x, y, p.z + terrain(x, y), (p.intensity * LAS_INTENSITY).round()));
            let col = (x / PIXEL).floor();
            let row = ((extent - y) / PIXEL).floor();
            if col < 0.0 || row < 0.0 || col >= px as f64 || row >= px as f64 {
                continue;
            }
            let k = row as usize * px + col as usize;
            if p.z > top[k] {
                top[k] = p.z;
                for (plane, v) in planes.iter_mut().zip([p.nir, p.r, p.g]) {
                    plane[k] = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
                }
            }
        }
    }
    let transform = AffineTransform::from_world_file_order([PIXEL, 0.0, 0.0, -PIXEL, PIXEL / 2.0, extent - PIXEL / 2.0]);
    let raster = GeoRaster::new(px, px, planes, transform).expect("valid raster");
    (PointCloud::from_points(points), raster)
}
