//! Top-down individual tree segmentation on a height-normalized cloud.
//!
//! Trees are grown one at a time from the highest unassigned point. A point
//! joins the tree being grown when its 2D distance to that tree is below the
//! threshold and no greater than its distance to any earlier tree. Each tree is
//! grown to a fixpoint before the next seed is taken. At that point every
//! unassigned point is at least `threshold` away from all finished trees, so
//! the second condition always holds. Growth is then a flood fill over the
//! "closer than threshold" graph, which is how it is computed here.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{MultispectralPoint, PointCloud};
use crate::num::Real;

#[derive(Debug, Error, PartialEq)]
pub enum SegmentationError {
    #[error("cannot segment an empty cloud")]
    EmptyCloud,
    #[error("invalid segmentation parameter: {0}")]
    InvalidParameter(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegParams {
    /// 2D distance below which a point joins a neighbouring tree, meters.
    pub threshold: f64,
    /// Seeds (and kept segments) must reach at least this height, meters.
    pub min_height: f64,
    /// Segments with fewer points are rejected by [`filter_segments`].
    pub min_points: usize,
}

impl Default for SegParams {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            min_height: 2.0,
            min_points: 16,
        }
    }
}

impl SegParams {
    pub fn validate(&self) -> Result<(), SegmentationError> {
        if !(self.threshold > 0.0) {
            return Err(SegmentationError::InvalidParameter("threshold must be positive"));
        }
        if !(self.min_height > 0.0) {
            return Err(SegmentationError::InvalidParameter("min_height must be positive"));
        }
        if self.min_points == 0 {
            return Err(SegmentationError::InvalidParameter("min_points must be positive"));
        }
        Ok(())
    }
}

/// One segmented tree.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeSegment<T> {
    pub id: usize,
    /// Indices into the segmented cloud, ascending.
    pub indices: Vec<usize>,
    /// The member points, in input order.
    pub points: PointCloud<T>,
    /// Highest member point (the seed).
    pub apex: MultispectralPoint<T>,
}

impl<T: Real> TreeSegment<T> {
    pub fn stem_xy(&self) -> (T, T) {
        (self.apex.x, self.apex.y)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

#[inline]
fn dist2<T: Real>(a: &MultispectralPoint<T>, b: &MultispectralPoint<T>) -> T {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    dx * dx + dy * dy
}

fn cell_of<T: Real>(p: &MultispectralPoint<T>, cell: T) -> (i64, i64) {
    (
        (p.x / cell).floor().to_i64().unwrap_or(i64::MIN),
        (p.y / cell).floor().to_i64().unwrap_or(i64::MIN),
    )
}

/// Segments `cloud` into trees. Points never reached stay unassigned; see
/// [`residual_indices`].
pub fn segment_trees<T: Real>(
    cloud: &PointCloud<T>,
    params: &SegParams,
) -> Result<Vec<TreeSegment<T>>, SegmentationError> {
    params.validate()?;
    if cloud.is_empty() {
        return Err(SegmentationError::EmptyCloud);
    }
    let pts = cloud.points();
    let threshold = T::of(params.threshold);
    let t2 = threshold * threshold;
    let min_height = T::of(params.min_height);

    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, p) in pts.iter().enumerate() {
        grid.entry(cell_of(p, threshold)).or_default().push(i);
    }

    // Seed order: descending z, ties by input index.
    let mut order: Vec<usize> = (0..pts.len()).filter(|&i| pts[i].z >= min_height).collect();
    order.sort_by(|&a, &b| crate::num::cmp(&pts[b].z, &pts[a].z).then(a.cmp(&b)));

    let mut owner: Vec<Option<usize>> = vec![None; pts.len()];
    let mut trees = Vec::new();
    let mut queue = VecDeque::new();
    for &seed in &order {
        if owner[seed].is_some() {
            continue;
        }
        let id = trees.len();
        owner[seed] = Some(id);
        let mut members = vec![seed];
        queue.push_back(seed);
        while let Some(i) = queue.pop_front() {
            let (cx, cy) = cell_of(&pts[i], threshold);
            for gx in cx.saturating_sub(1)..=cx.saturating_add(1) {
                for gy in cy.saturating_sub(1)..=cy.saturating_add(1) {
                    let Some(bucket) = grid.get(&(gx, gy)) else { continue };
                    for &j in bucket {
                        if owner[j].is_none() && dist2(&pts[i], &pts[j]) < t2 {
                            owner[j] = Some(id);
                            members.push(j);
                            queue.push_back(j);
                        }
                    }
                }
            }
        }
        members.sort_unstable();
        trees.push(TreeSegment {
            id,
            points: cloud.select(&members),
            indices: members,
            apex: pts[seed],
        });
    }
    Ok(trees)
}

/// Indices of points in a cloud of `len` points that belong to no segment.
pub fn residual_indices<T>(len: usize, segments: &[TreeSegment<T>]) -> Vec<usize> {
    let mut taken = vec![false; len];
    for s in segments {
        for &i in &s.indices {
            taken[i] = true;
        }
    }
    (0..len).filter(|&i| !taken[i]).collect()
}

/// Splits segments into (kept, rejected): kept segments have at least
/// `min_points` points and an apex at or above `min_height`.
pub fn filter_segments<T: Real>(
    segments: Vec<TreeSegment<T>>,
    params: &SegParams,
) -> (Vec<TreeSegment<T>>, Vec<TreeSegment<T>>) {
    let min_height = T::of(params.min_height);
    segments
        .into_iter()
        .partition(|s| s.len() >= params.min_points && s.apex.z >= min_height)
}

/// Points whose 2D distance to `center` is at most `radius`, order preserved.
///
/// # Panics
/// If `radius` is not positive.
pub fn crop_cylinder<T: Real>(cloud: &PointCloud<T>, center: (T, T), radius: T) -> PointCloud<T> {
    assert!(radius > T::zero(), "crop radius must be positive");
    let r2 = radius * radius;
    let kept = cloud
        .points()
        .iter()
        .filter(|p| {
            let dx = p.x - center.0;
            let dy = p.y - center.1;
            dx * dx + dy * dy <= r2
        })
        .copied()
        .collect();
    PointCloud::from_points(kept).with_channel_state(cloud.channel_state())
}

/// CSV manifest with one row per segment: `id,apex_x,apex_y,apex_z,points`.
pub fn segment_manifest_csv<T: Real>(segments: &[TreeSegment<T>]) -> String {
    let mut out = String::from("id,apex_x,apex_y,apex_z,points\n");
    for s in segments {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{}",
            s.id,
            s.apex.x.f64(),
            s.apex.y.f64(),
            s.apex.z.f64(),
            s.len()
        );
    }
    out
}
