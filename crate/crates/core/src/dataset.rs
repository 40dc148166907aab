//! Labeled tree samples and a synthetic five-level conifer generator.
//!
//! The generator builds each tree from a tapered stem cylinder plus a crown
//! whose structure degrades with the decay level, and colors points from a
//! per-level Gaussian in normalized (NIR, R, G). It exists so the pipeline can
//! be exercised end to end without field data; the geometry and color means
//! are generator constants, not measurements.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use rayon::prelude::*;
use thiserror::Error;

use crate::model::{ChannelState, DecayLevel, MultispectralPoint, PointCloud};
use crate::num::{derive_seed, Real};
use crate::segmentation::TreeSegment;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("decay level {0} outside 1..=5")]
    InvalidLevel(u8),
    #[error("sample count for level {level} is negative ({count})")]
    NegativeCount { level: usize, count: i64 },
    #[error("expected 5 comma-separated counts, got `{0}`")]
    CountList(String),
    #[error("unknown sample source `{0}`")]
    Source(String),
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Source {
    Field,
    Synthetic,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Field => "field",
            Source::Synthetic => "synthetic",
        })
    }
}

impl FromStr for Source {
    type Err = DatasetError;
    fn from_str(s: &str) -> Result<Self, DatasetError> {
        match s {
            "field" => Ok(Source::Field),
            "synthetic" => Ok(Source::Synthetic),
            other => Err(DatasetError::Source(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample<T> {
    pub tree: TreeSegment<T>,
    pub label: DecayLevel,
    pub source: Source,
    /// Samples sharing a group never straddle cross-validation folds.
    pub group: usize,
}

/// Sample counts per level, 1 through 5.
pub const DEFAULT_COUNTS: [usize; 5] = [233, 167, 236, 239, 155];

/// Parses `a,b,c,d,e` into per-level counts.
pub fn parse_counts(s: &str) -> Result<[usize; 5], DatasetError> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 5 {
        return Err(DatasetError::CountList(s.to_string()));
    }
    let mut out = [0; 5];
    for (level, (slot, p)) in out.iter_mut().zip(&parts).enumerate() {
        let v: i64 = p.parse().map_err(|_| DatasetError::CountList(s.to_string()))?;
        if v < 0 {
            return Err(DatasetError::NegativeCount { level: level + 1, count: v });
        }
        *slot = v as usize;
    }
    Ok(out)
}

/// How a level's crown is built.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CrownModel {
    /// Filled cone; `gap_fraction` of the 1 m × 30° crown cells are empty.
    Cone { gap_fraction: f64 },
    /// Whorls of straight branches; `missing_fraction` of them are gone and
    /// the rest reach `length_scale` × the crown radius.
    Branches { missing_fraction: f64, length_scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelSpec {
    /// Point count (min, max, mean) per tree.
    pub point_count: (usize, usize, f64),
    /// Crown base radius range, m.
    pub crown_radius: (f64, f64),
    /// Share of points on the stem.
    pub stem_fraction: f64,
    pub crown: CrownModel,
    /// Probability that the top is broken off at 60–85% of full height.
    pub broken_top: f64,
    /// Mean normalized (NIR, R, G).
    pub color_mean: [f64; 3],
    /// Per-point color standard deviation.
    pub color_sd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub levels: [LevelSpec; 5],
    /// Tree height range before any top breakage, m.
    pub height: (f64, f64),
    /// Log-space spread of the point count around the level mean.
    pub count_spread: f64,
    /// Standard deviation of each tree's color offset from the level mean.
    pub tree_color_sd: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        let level = |point_count, crown_radius, stem_fraction, crown, broken_top, color_mean| LevelSpec {
            point_count,
            crown_radius,
            stem_fraction,
            crown,
            broken_top,
            color_mean,
            color_sd: 0.06,
        };
        Self {
            levels: [
                // live: dense crown, high NIR ("red" in CIR)
                level((845, 10295, 3346.0), (2.0, 3.5), 0.05, CrownModel::Cone { gap_fraction: 0.0 }, 0.0, [0.85, 0.30, 0.25]),
                // declining: same geometry, foliage shifts green to gray
                level((1586, 14405, 4785.0), (2.0, 3.5), 0.05, CrownModel::Cone { gap_fraction: 0.0 }, 0.0, [0.45, 0.55, 0.45]),
                // dead: about half the crown gone
                level((644, 5963, 2139.0), (1.8, 3.0), 0.10, CrownModel::Cone { gap_fraction: 0.5 }, 0.1, [0.55, 0.50, 0.40]),
                // loose bark: sparse branches, top usually broken
                level(
                    (121, 2799, 637.0),
                    (1.0, 2.0),
                    0.35,
                    CrownModel::Branches { missing_fraction: 0.5, length_scale: 1.0 },
                    0.7,
                    [0.50, 0.50, 0.55],
                ),
                // clean: bare stem with stubs
                level(
                    (16, 1418, 161.0),
                    (0.3, 0.8),
                    0.85,
                    CrownModel::Branches { missing_fraction: 0.7, length_scale: 0.5 },
                    0.6,
                    [0.70, 0.70, 0.72],
                ),
            ],
            height: (12.0, 35.0),
            count_spread: 0.45,
            tree_color_sd: 0.03,
            seed: 42,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let (lo, hi) = self.height;
        if !(5.0..=40.0).contains(&lo) || !(lo..=40.0).contains(&hi) {
            return Err(DatasetError::InvalidSpec(format!("height range {lo}..{hi} must lie in [5, 40]")));
        }
        if !(self.count_spread >= 0.0 && self.tree_color_sd >= 0.0) {
            return Err(DatasetError::InvalidSpec("spreads must be non-negative".into()));
        }
        for (i, l) in self.levels.iter().enumerate() {
            let (min, max, mean) = l.point_count;
            if min == 0 || min > max || !(min as f64..=max as f64).contains(&mean) {
                return Err(DatasetError::InvalidSpec(format!("level {}: bad point count range", i + 1)));
            }
            if !(0.0..=1.0).contains(&l.stem_fraction) || !(0.0..=1.0).contains(&l.broken_top) {
                return Err(DatasetError::InvalidSpec(format!("level {}: fractions must be in [0, 1]", i + 1)));
            }
            if !(l.crown_radius.0 > 0.0 && l.crown_radius.0 <= l.crown_radius.1) || !(l.color_sd >= 0.0) {
                return Err(DatasetError::InvalidSpec(format!("level {}: bad radius or color spread", i + 1)));
            }
            let frac = match l.crown {
                CrownModel::Cone { gap_fraction } => gap_fraction,
                CrownModel::Branches { missing_fraction, .. } => missing_fraction,
            };
            if !(0.0..1.0).contains(&frac) {
                return Err(DatasetError::InvalidSpec(format!("level {}: crown fraction must be in [0, 1)", i + 1)));
            }
        }
        Ok(())
    }
}

struct TreeShape {
    height: f64,
    top: f64,
    crown_base: f64,
    crown_radius: f64,
    stem_radius: f64,
}

impl TreeShape {
    /// Crown radius at height `z` (full, unbroken cone).
    fn radius_at(&self, z: f64) -> f64 {
        self.crown_radius * ((self.height - z) / (self.height - self.crown_base)).clamp(0.0, 1.0)
    }
}

/// One synthetic tree, stem base at the origin, heights above ground.
/// `id` becomes the segment id and the group.
pub fn generate_synthetic_tree<T: Real>(
    level: u8,
    spec: &SyntheticSpec,
    seed: u64,
    id: usize,
) -> Result<LabeledSample<T>, DatasetError> {
    let label = DecayLevel::new(level).map_err(|_| DatasetError::InvalidLevel(level))?;
    let ls = &spec.levels[label.index()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let (min, max, mean) = ls.point_count;
    let sigma = spec.count_spread;
    let n = if sigma > 0.0 {
        let lognormal = LogNormal::new(mean.ln() - sigma * sigma / 2.0, sigma).expect("finite parameters");
        (lognormal.sample(&mut rng).round() as usize).clamp(min, max)
    } else {
        (mean.round() as usize).clamp(min, max)
    };

    let height = rng.random_range(spec.height.0..=spec.height.1);
    let top = if rng.random::<f64>() < ls.broken_top { height * rng.random_range(0.6..0.85) } else { height };
    let shape = TreeShape {
        height,
        top,
        crown_base: height * rng.random_range(0.25..0.45),
        crown_radius: rng.random_range(ls.crown_radius.0..=ls.crown_radius.1),
        stem_radius: 0.015 * height,
    };

    let n_stem = ((ls.stem_fraction * n as f64).round() as usize).clamp(1, n);
    let mut xyz: Vec<(f64, f64, f64, bool)> = Vec::with_capacity(n);
    for _ in 0..n_stem {
        let z = rng.random_range(0.0..=shape.top);
        let r = shape.stem_radius * (1.0 - 0.5 * z / shape.height);
        let a = rng.random_range(0.0..std::f64::consts::TAU);
        xyz.push((r * a.cos(), r * a.sin(), z, true));
    }
    let n_crown = n - n_stem;
    match ls.crown {
        CrownModel::Cone { gap_fraction } => cone_crown(&shape, gap_fraction, n_crown, &mut rng, &mut xyz),
        CrownModel::Branches { missing_fraction, length_scale } => {
            branch_crown(&shape, missing_fraction, length_scale, n_crown, &mut rng, &mut xyz)
        }
    }

    let offset: Vec<f64> = if spec.tree_color_sd > 0.0 {
        let nd = Normal::new(0.0, spec.tree_color_sd).expect("sd checked");
        (0..3).map(|_| nd.sample(&mut rng)).collect()
    } else {
        vec![0.0; 3]
    };
    let point_noise = Normal::new(0.0, ls.color_sd.max(f64::MIN_POSITIVE)).expect("sd checked");
    let intensity_noise = Normal::new(0.0, 0.1).expect("constant sd");
    let points: Vec<MultispectralPoint<T>> = xyz
        .into_iter()
        .map(|(x, y, z, stem)| {
            // bark is darker than foliage
            let shade = if stem { 0.85 } else { 1.0 };
            let mut c = [0.0; 3];
            for (ch, v) in c.iter_mut().enumerate() {
                let noise = if ls.color_sd > 0.0 { point_noise.sample(&mut rng) } else { 0.0 };
                *v = ((ls.color_mean[ch] + offset[ch]) * shade + noise).clamp(0.0, 1.0);
            }
            let base: f64 = if stem { 0.6 } else { 0.35 };
            let intensity = (base + intensity_noise.sample(&mut rng)).clamp(0.0, 1.0);
            MultispectralPoint::new(T::of(x), T::of(y), T::of(z), T::of(intensity)).with_color(
                T::of(c[0]),
                T::of(c[1]),
                T::of(c[2]),
            )
        })
        .collect();

    let cloud = PointCloud::from_points(points).with_channel_state(ChannelState::Normalized);
    let apex = *cloud
        .points()
        .iter()
        .max_by(|a, b| crate::num::cmp(&a.z, &b.z))
        .expect("at least one stem point");
    Ok(LabeledSample {
        tree: TreeSegment { id, indices: (0..cloud.len()).collect(), points: cloud, apex },
        label,
        source: Source::Synthetic,
        group: id,
    })
}

fn cone_crown(shape: &TreeShape, gap_fraction: f64, n: usize, rng: &mut ChaCha8Rng, out: &mut Vec<(f64, f64, f64, bool)>) {
    let span = shape.height - shape.crown_base;
    let bands = span.ceil() as usize + 1;
    let sectors = 12;
    let mut gap: Vec<bool> = (0..bands * sectors).map(|_| rng.random::<f64>() < gap_fraction).collect();
    if gap.iter().all(|&g| g) {
        gap[0] = false;
    }
    let mut placed = 0;
    while placed < n {
        // area-weighted height: more crown surface near the base
        let z = shape.height - span * rng.random::<f64>().sqrt();
        if z > shape.top {
            continue;
        }
        let a = rng.random_range(0.0..std::f64::consts::TAU);
        let band = ((z - shape.crown_base) as usize).min(bands - 1);
        let sector = ((a / std::f64::consts::TAU * sectors as f64) as usize).min(sectors - 1);
        if gap[band * sectors + sector] {
            continue;
        }
        // foliage concentrates toward the crown surface
        let r = shape.radius_at(z) * rng.random::<f64>().powf(0.3);
        out.push((r * a.cos(), r * a.sin(), z, false));
        placed += 1;
    }
}

fn branch_crown(
    shape: &TreeShape,
    missing_fraction: f64,
    length_scale: f64,
    n: usize,
    rng: &mut ChaCha8Rng,
    out: &mut Vec<(f64, f64, f64, bool)>,
) {
    if n == 0 {
        return;
    }
    // (base height, azimuth, length)
    let mut branches = Vec::new();
    let mut z = shape.crown_base;
    while z < shape.top {
        for _ in 0..rng.random_range(4..=6) {
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            let len = (shape.radius_at(z) * length_scale).max(0.1) * rng.random_range(0.5..=1.0);
            if rng.random::<f64>() >= missing_fraction {
                branches.push((z, a, len));
            }
        }
        z += 0.8;
    }
    if branches.is_empty() {
        let a = rng.random_range(0.0..std::f64::consts::TAU);
        branches.push((shape.crown_base.min(shape.top), a, (shape.crown_radius * length_scale).max(0.1)));
    }
    let jitter = Normal::new(0.0, 0.05).expect("constant sd");
    for _ in 0..n {
        let (bz, a, len) = branches[rng.random_range(0..branches.len())];
        let t = rng.random::<f64>();
        let r = shape.stem_radius + t * len;
        // branches droop slightly toward their tips
        let z = bz - 0.2 * t * len;
        out.push((
            r * a.cos() + jitter.sample(rng),
            r * a.sin() + jitter.sample(rng),
            (z + jitter.sample(rng)).max(0.0),
            false,
        ));
    }
}

/// `counts[l]` trees of level `l + 1`, shuffled deterministically. Sample `i`
/// of the shuffled list has id and group `i`; its cloud depends only on the
/// spec seed and its position in the unshuffled per-level sequence.
pub fn generate_dataset<T: Real>(spec: &SyntheticSpec, counts: &[usize; 5]) -> Result<Vec<LabeledSample<T>>, DatasetError> {
    spec.validate()?;
    let mut plan: Vec<(u8, u64)> = Vec::new();
    for (l, &c) in counts.iter().enumerate() {
        for _ in 0..c {
            plan.push((l as u8 + 1, derive_seed(spec.seed, plan.len() as u64)));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, u64::MAX));
    plan.shuffle(&mut rng);
    plan.par_iter()
        .enumerate()
        .map(|(id, &(level, seed))| generate_synthetic_tree(level, spec, seed, id))
        .collect()
}
