//! Ground filtering by progressive TIN densification, terrain models and
//! height normalization.

mod delaunay;
pub mod predicates;

pub use delaunay::{delaunay_triangulate, Insertion, Location, TinVertex, Triangulation, GHOST};

use std::fmt::Write;

use thiserror::Error;

use crate::model::PointCloud;
use crate::num::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TerrainError {
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("all points are collinear")]
    Collinear,
    #[error("points {first} and {second} coincide")]
    DuplicatePoint { first: usize, second: usize },
    #[error("only {0} seed cells occupied, need at least 3")]
    TooFewSeeds(usize),
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("no ground points")]
    NoGround,
    #[error("mask length {mask} does not match cloud size {cloud}")]
    MaskLength { mask: usize, cloud: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}

/// Progressive TIN densification thresholds.
///
/// `densify_angle`/`densify_dist` decide which points are inserted into the
/// terrain TIN; `max_angle`/`max_dist` decide which points are classified as
/// ground against that TIN. With equal pairs (the default) the ground set is
/// exactly the set of TIN vertices. Because the TIN sequence does not depend on
/// `max_angle`/`max_dist`, loosening either never shrinks the ground set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PtdParams {
    /// Side of the grid cells whose lowest points seed the TIN, meters.
    pub seed_cell: f64,
    /// Largest admissible angle between a facet and the lines from its
    /// vertices to a candidate, degrees.
    pub max_angle: f64,
    /// Largest admissible vertical distance from a candidate to its facet, meters.
    pub max_dist: f64,
    /// Angle limit for inserting a point into the TIN, degrees.
    pub densify_angle: f64,
    /// Vertical distance limit for inserting a point into the TIN, meters.
    pub densify_dist: f64,
    pub max_iterations: usize,
}

impl Default for PtdParams {
    fn default() -> Self {
        Self {
            seed_cell: 5.0,
            max_angle: 6.0,
            max_dist: 1.4,
            densify_angle: 6.0,
            densify_dist: 1.4,
            max_iterations: 50,
        }
    }
}

impl PtdParams {
    pub fn validate(&self) -> Result<(), TerrainError> {
        if !(self.seed_cell > 0.0) {
            return Err(TerrainError::InvalidParameter("seed_cell must be positive"));
        }
        for a in [self.max_angle, self.densify_angle] {
            if !(a > 0.0 && a < 90.0) {
                return Err(TerrainError::InvalidParameter("angles must be in (0, 90)"));
            }
        }
        if !(self.max_dist > 0.0 && self.densify_dist > 0.0) {
            return Err(TerrainError::InvalidParameter("distances must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(TerrainError::InvalidParameter("max_iterations must be positive"));
        }
        Ok(())
    }
}

/// Lowest point (ties: lowest index) of every occupied `cell` x `cell` grid square.
fn lowest_per_cell<T: Real>(cloud: &PointCloud<T>, cell: f64) -> Vec<usize> {
    let b = cloud.bounds().expect("nonempty");
    let (x0, y0) = (b.min[0].f64(), b.min[1].f64());
    let cols = ((b.max[0].f64() - x0) / cell).floor() as usize + 1;
    let mut best: std::collections::BTreeMap<(usize, usize), usize> = Default::default();
    for (i, p) in cloud.points().iter().enumerate() {
        let c = ((p.x.f64() - x0) / cell).floor() as usize;
        let r = ((p.y.f64() - y0) / cell).floor() as usize;
        best.entry((r, c.min(cols - 1)))
            .and_modify(|j| {
                if p.z < cloud.points()[*j].z {
                    *j = i;
                }
            })
            .or_insert(i);
    }
    best.into_values().collect()
}

/// Elevation at `(x, y)` from a least-squares plane through the nearest seeds.
fn extrapolate_corner(seeds: &[[f64; 3]], x: f64, y: f64) -> f64 {
    let mut by_dist: Vec<(f64, usize)> = seeds
        .iter()
        .enumerate()
        .map(|(i, s)| ((s[0] - x).powi(2) + (s[1] - y).powi(2), i))
        .collect();
    by_dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let near: Vec<[f64; 3]> = by_dist.iter().take(8).map(|&(_, i)| seeds[i]).collect();
    let n = near.len() as f64;
    let (mx, my, mz) = near.iter().fold((0.0, 0.0, 0.0), |acc, s| {
        (acc.0 + s[0] / n, acc.1 + s[1] / n, acc.2 + s[2] / n)
    });
    let (mut sxx, mut sxy, mut syy, mut sxz, mut syz) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for s in &near {
        let (dx, dy, dz) = (s[0] - mx, s[1] - my, s[2] - mz);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
        sxz += dx * dz;
        syz += dy * dz;
    }
    let det = sxx * syy - sxy * sxy;
    if det.abs() <= 1e-12 * (sxx * syy).max(1e-300) {
        return mz;
    }
    let bx = (sxz * syy - syz * sxy) / det;
    let by = (syz * sxx - sxz * sxy) / det;
    mz + bx * (x - mx) + by * (y - my)
}

/// Vertical distance and largest vertex angle (degrees) of `p` against the
/// facet `tri`.
fn facet_test(tri: [[f64; 3]; 3], p: [f64; 3]) -> (f64, f64) {
    let [a, b, c] = tri;
    let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
    let n = [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ];
    let d = [p[0] - a[0], p[1] - a[1], p[2] - a[2]];
    let z_plane = a[2] - (n[0] * d[0] + n[1] * d[1]) / n[2];
    let vertical = (p[2] - z_plane).abs();
    let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
    let perp = (n[0] * d[0] + n[1] * d[1] + n[2] * d[2]).abs() / norm;
    let angle = tri
        .iter()
        .map(|q| {
            let len = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt();
            if len == 0.0 {
                0.0
            } else {
                (perp / len).min(1.0).asin().to_degrees()
            }
        })
        .fold(0.0, f64::max);
    (vertical, angle)
}

/// Classifies ground points by progressive TIN densification.
///
/// The TIN starts from the lowest point of each `seed_cell` square plus four
/// virtual corners outside the cloud's footprint (elevations extrapolated from
/// the nearest seeds). Each iteration tests every point not yet in the TIN
/// against the facet containing it: points within the densify limits are
/// inserted, points within `max_dist`/`max_angle` are marked ground. Iteration
/// stops when nothing is inserted or after `max_iterations`, followed by one
/// last classification pass against the final TIN.
pub fn filter_ground<T: Real>(cloud: &PointCloud<T>, params: &PtdParams) -> Result<Vec<bool>, TerrainError> {
    params.validate()?;
    if cloud.is_empty() {
        return Err(TerrainError::EmptyCloud);
    }
    let pts = cloud.points();
    let seeds = lowest_per_cell(cloud, params.seed_cell);
    if seeds.len() < 3 {
        return Err(TerrainError::TooFewSeeds(seeds.len()));
    }
    let seed_xyz: Vec<[f64; 3]> = seeds
        .iter()
        .map(|&i| [pts[i].x.f64(), pts[i].y.f64(), pts[i].z.f64()])
        .collect();

    let b = cloud.bounds().expect("nonempty");
    let m = params.seed_cell;
    let (x0, y0, x1, y1) = (b.min[0].f64() - m, b.min[1].f64() - m, b.max[0].f64() + m, b.max[1].f64() + m);
    let mut init: Vec<[f64; 3]> = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
        .iter()
        .map(|&(x, y)| [x, y, extrapolate_corner(&seed_xyz, x, y)])
        .collect();
    init.extend(&seed_xyz);
    let mut tin = Triangulation::<f64>::from_points(&init).map_err(|e| match e {
        TerrainError::DuplicatePoint { .. } => TerrainError::Collinear,
        other => other,
    })?;

    let mut ground = vec![false; pts.len()];
    let mut in_tin = vec![false; pts.len()];
    for &i in &seeds {
        ground[i] = true;
        in_tin[i] = true;
    }
    let xyz = |i: usize| [pts[i].x.f64(), pts[i].y.f64(), pts[i].z.f64()];
    let remaining: Vec<usize> = (0..pts.len()).filter(|&i| !in_tin[i]).collect();
    let mut remaining = delaunay::spatial_order(&remaining, |i| [xyz(i)[0], xyz(i)[1]]);

    // (vertical distance, max angle) of every remaining point against the current TIN
    let evaluate = |tin: &Triangulation<f64>, remaining: &[usize]| -> Vec<Option<(f64, f64)>> {
        remaining
            .iter()
            .map(|&i| {
                let p = xyz(i);
                match tin.locate(p[0], p[1]) {
                    Location::Inside(t) => {
                        let v = tin.triangle(t).map(|k| {
                            let q = tin.vertices()[k];
                            [q.x, q.y, q.z]
                        });
                        Some(facet_test(v, p))
                    }
                    Location::OutsideHull => None,
                }
            })
            .collect()
    };
    let classify = |scores: &[Option<(f64, f64)>], remaining: &[usize], ground: &mut [bool]| {
        for (&i, s) in remaining.iter().zip(scores) {
            if let Some((vertical, angle)) = *s {
                if vertical <= params.max_dist && angle <= params.max_angle {
                    ground[i] = true;
                }
            }
        }
    };

    let mut converged = false;
    for _ in 0..params.max_iterations {
        let scores = evaluate(&tin, &remaining);
        classify(&scores, &remaining, &mut ground);
        let mut inserted = 0;
        for (&i, s) in remaining.iter().zip(&scores) {
            if let Some((vertical, angle)) = *s {
                if vertical <= params.densify_dist && angle <= params.densify_angle {
                    in_tin[i] = true;
                    ground[i] = true;
                    inserted += 1;
                }
            }
        }
        if inserted == 0 {
            converged = true;
            break;
        }
        for &i in remaining.iter().filter(|&&i| in_tin[i]) {
            let p = xyz(i);
            tin.insert(p[0], p[1], p[2]);
        }
        remaining.retain(|&i| !in_tin[i]);
    }
    if !converged {
        let scores = evaluate(&tin, &remaining);
        classify(&scores, &remaining, &mut ground);
    }
    Ok(ground)
}

/// Raster of bare-ground elevations. Cell `(col, row)` covers
/// `[origin_x + col*cell, origin_x + (col+1)*cell)` and likewise in y; row 0 is
/// the southernmost.
#[derive(Debug, Clone, PartialEq)]
pub struct Dtm<T> {
    pub origin: (T, T),
    pub cell: T,
    pub cols: usize,
    pub rows: usize,
    pub elevations: Vec<T>,
    pub nodata: T,
}

impl<T: Real> Dtm<T> {
    pub fn at(&self, col: usize, row: usize) -> T {
        self.elevations[row * self.cols + col]
    }

    /// Bilinear interpolation between cell centers; clamps to the edge cells
    /// outside the grid.
    pub fn sample(&self, x: T, y: T) -> T {
        let half = T::of(0.5);
        let fx = ((x - self.origin.0) / self.cell - half)
            .max(T::zero())
            .min(T::of_usize(self.cols - 1));
        let fy = ((y - self.origin.1) / self.cell - half)
            .max(T::zero())
            .min(T::of_usize(self.rows - 1));
        let (c0, r0) = (fx.floor().to_usize().unwrap(), fy.floor().to_usize().unwrap());
        let (c1, r1) = ((c0 + 1).min(self.cols - 1), (r0 + 1).min(self.rows - 1));
        let (tx, ty) = (fx - T::of_usize(c0), fy - T::of_usize(r0));
        let bottom = self.at(c0, r0) * (T::one() - tx) + self.at(c1, r0) * tx;
        let top = self.at(c0, r1) * (T::one() - tx) + self.at(c1, r1) * tx;
        bottom * (T::one() - ty) + top * ty
    }

    /// Text grid: `origin`, `cell`, `dims` and `nodata` header lines, then one
    /// line per row starting with row 0.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "origin {} {}", self.origin.0, self.origin.1);
        let _ = writeln!(s, "cell {}", self.cell);
        let _ = writeln!(s, "dims {} {}", self.cols, self.rows);
        let _ = writeln!(s, "nodata {}", self.nodata);
        for row in self.elevations.chunks(self.cols) {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }
}

/// Per-cell mean of ground elevations over the cloud's footprint; empty cells
/// take the value of the nearest nonempty cell (ties: lowest row-major index).
pub fn build_dtm<T: Real>(cloud: &PointCloud<T>, ground: &[bool], cell: T) -> Result<Dtm<T>, TerrainError> {
    if !(cell > T::zero()) {
        return Err(TerrainError::InvalidParameter("cell must be positive"));
    }
    if cloud.is_empty() {
        return Err(TerrainError::EmptyCloud);
    }
    if ground.len() != cloud.len() {
        return Err(TerrainError::MaskLength {
            mask: ground.len(),
            cloud: cloud.len(),
        });
    }
    if !ground.iter().any(|&g| g) {
        return Err(TerrainError::NoGround);
    }
    let b = cloud.bounds().expect("nonempty");
    let origin = (b.min[0], b.min[1]);
    let cols = ((b.max[0] - origin.0) / cell).floor().to_usize().unwrap() + 1;
    let rows = ((b.max[1] - origin.1) / cell).floor().to_usize().unwrap() + 1;
    let mut sum = vec![T::zero(); cols * rows];
    let mut count = vec![0usize; cols * rows];
    for (p, _) in cloud.points().iter().zip(ground).filter(|(_, &g)| g) {
        let c = ((p.x - origin.0) / cell).floor().to_usize().unwrap().min(cols - 1);
        let r = ((p.y - origin.1) / cell).floor().to_usize().unwrap().min(rows - 1);
        sum[r * cols + c] += p.z;
        count[r * cols + c] += 1;
    }
    let mean: Vec<Option<T>> = sum
        .iter()
        .zip(&count)
        .map(|(&s, &n)| (n > 0).then(|| s / T::of_usize(n)))
        .collect();

    let elevations = (0..rows * cols)
        .map(|i| mean[i].unwrap_or_else(|| nearest_filled(&mean, cols, rows, i)))
        .collect();
    Ok(Dtm {
        origin,
        cell,
        cols,
        rows,
        elevations,
        nodata: T::of(-9999.0),
    })
}

/// Expanding-ring search for the nearest filled cell by center distance.
fn nearest_filled<T: Real>(mean: &[Option<T>], cols: usize, rows: usize, i: usize) -> T {
    let (c0, r0) = ((i % cols) as i64, (i / cols) as i64);
    let mut best: Option<(i64, usize)> = None;
    let max_ring = cols.max(rows) as i64;
    for ring in 1..=max_ring {
        for dr in -ring..=ring {
            for dc in -ring..=ring {
                if dr.abs() != ring && dc.abs() != ring {
                    continue;
                }
                let (r, c) = (r0 + dr, c0 + dc);
                if r < 0 || c < 0 || r >= rows as i64 || c >= cols as i64 {
                    continue;
                }
                let j = (r as usize) * cols + c as usize;
                if mean[j].is_none() {
                    continue;
                }
                let d2 = dr * dr + dc * dc;
                if best.is_none_or(|(bd, bj)| d2 < bd || (d2 == bd && j < bj)) {
                    best = Some((d2, j));
                }
            }
        }
        // cells in later rings are at least ring + 1 away
        if let Some((bd, _)) = best {
            if bd < (ring + 1) * (ring + 1) {
                break;
            }
        }
    }
    mean[best.expect("at least one filled cell").1].unwrap()
}

/// Subtracts the terrain elevation from every point; negative heights clamp to 0.
pub fn normalize_heights<T: Real>(cloud: &PointCloud<T>, dtm: &Dtm<T>) -> Result<PointCloud<T>, TerrainError> {
    if cloud.is_empty() {
        return Err(TerrainError::EmptyCloud);
    }
    let mut out = cloud.clone();
    out.map_points(|p| p.z = (p.z - dtm.sample(p.x, p.y)).max(T::zero()));
    Ok(out)
}
