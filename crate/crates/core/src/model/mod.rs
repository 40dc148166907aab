//! Point-cloud and raster data model with file IO.
//!
//! Formats: uncompressed LAS 1.2 (point formats 0 and 1), a whitespace text
//! format (`x y z i [nir r g]`), binary PPM (P6) rasters and six-line world files.

mod las;
mod ppm;
mod text;

pub use las::{read_las, write_las, LAS_HEADER_SIZE, LAS_SCALE};
pub use ppm::{read_geo_raster, read_ppm, read_world_file, write_ppm, write_world_file};
pub use text::{read_text_cloud, write_text_cloud};

use std::fmt;

use thiserror::Error;

use crate::num::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("non-finite value in point {index}")]
    NonFinite { index: usize },
    #[error("bad LAS signature at byte {offset}")]
    LasSignature { offset: usize },
    #[error("unsupported LAS version {major}.{minor} at byte {offset}")]
    LasVersion { major: u8, minor: u8, offset: usize },
    #[error("unsupported LAS point format {format} at byte {offset}")]
    LasFormat { format: u8, offset: usize },
    #[error("truncated LAS data at byte {offset}: need {needed} bytes, have {available}")]
    LasTruncated {
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("{axis} coordinate {value} does not fit a scaled 32-bit integer")]
    LasCoordinateRange { axis: char, value: f64 },
    #[error("intensity {value} of point {index} does not fit an unsigned 16-bit integer")]
    LasIntensityRange { index: usize, value: f64 },
    #[error("line {line}: cannot parse `{token}` as a number")]
    TextParse { line: usize, token: String },
    #[error("line {line}: expected 4 or 7 fields, found {found}")]
    TextFieldCount { line: usize, found: usize },
    #[error("not a binary PPM (P6) file")]
    PpmMagic,
    #[error("PPM maxval must be 255, found {0}")]
    PpmMaxval(u32),
    #[error("malformed PPM header: {0}")]
    PpmHeader(String),
    #[error("truncated PPM pixel data: expected {expected} bytes, found {found}")]
    PpmTruncated { expected: usize, found: usize },
    #[error("world file must have 6 lines, found {0}")]
    WorldFileLines(usize),
    #[error("world file line {line}: cannot parse `{token}`")]
    WorldFileParse { line: usize, token: String },
    #[error("degenerate raster transform (A = {a}, E = {e})")]
    DegenerateTransform { a: f64, e: f64 },
    #[error("raster planes do not match {width}x{height}")]
    PlaneSize { width: usize, height: usize },
    #[error("decay level {0} outside 1..=5")]
    DecayLevel(u8),
}

/// Whether intensity and color channels hold raw ingest values or have been
/// min-max normalized to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChannelState {
    #[default]
    Raw,
    Normalized,
}

/// One fused LiDAR return: position, laser intensity and the NIR/R/G color
/// sampled from the color-infrared raster.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MultispectralPoint<T> {
    pub x: T,
    pub y: T,
    pub z: T,
    pub intensity: T,
    pub nir: T,
    pub r: T,
    pub g: T,
}

impl<T: Real> MultispectralPoint<T> {
    pub fn new(x: T, y: T, z: T, intensity: T) -> Self {
        Self {
            x,
            y,
            z,
            intensity,
            nir: T::zero(),
            r: T::zero(),
            g: T::zero(),
        }
    }

    pub fn with_color(mut self, nir: T, r: T, g: T) -> Self {
        self.nir = nir;
        self.r = r;
        self.g = g;
        self
    }

    pub fn is_finite(&self) -> bool {
        [self.x, self.y, self.z, self.intensity, self.nir, self.r, self.g]
            .iter()
            .all(|v| v.is_finite())
    }

    /// Horizontal distance to another point.
    #[inline]
    pub fn dist_xy(&self, other: &Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Axis-aligned 3D box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds<T> {
    pub min: [T; 3],
    pub max: [T; 3],
}

impl<T: Real> Bounds<T> {
    fn of_point(p: &MultispectralPoint<T>) -> Self {
        Self {
            min: [p.x, p.y, p.z],
            max: [p.x, p.y, p.z],
        }
    }

    fn grow(&mut self, p: &MultispectralPoint<T>) {
        for (k, v) in [p.x, p.y, p.z].into_iter().enumerate() {
            self.min[k] = self.min[k].min(v);
            self.max[k] = self.max[k].max(v);
        }
    }

    pub fn contains(&self, p: &MultispectralPoint<T>) -> bool {
        [p.x, p.y, p.z]
            .iter()
            .enumerate()
            .all(|(k, v)| *v >= self.min[k] && *v <= self.max[k])
    }

    pub fn extent(&self) -> [T; 3] {
        [
            self.max[0] - self.min[0],
            self.max[1] - self.min[1],
            self.max[2] - self.min[2],
        ]
    }
}

/// Ordered collection of points with tight bounds.
///
/// Bounds are recomputed on every mutation, so `bounds()` always equals the
/// exact min/max of the stored points. An empty cloud has no bounds.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud<T> {
    points: Vec<MultispectralPoint<T>>,
    bounds: Option<Bounds<T>>,
    channel_state: ChannelState,
}

impl<T: Real> PointCloud<T> {
    pub fn new() -> Self {
        Self {
            points: Vec::new(),
            bounds: None,
            channel_state: ChannelState::Raw,
        }
    }

    pub fn from_points(points: Vec<MultispectralPoint<T>>) -> Self {
        let mut cloud = Self {
            points,
            bounds: None,
            channel_state: ChannelState::Raw,
        };
        cloud.recompute_bounds();
        cloud
    }

    pub fn with_channel_state(mut self, state: ChannelState) -> Self {
        self.channel_state = state;
        self
    }

    pub fn points(&self) -> &[MultispectralPoint<T>] {
        &self.points
    }

    pub fn into_points(self) -> Vec<MultispectralPoint<T>> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn channel_state(&self) -> ChannelState {
        self.channel_state
    }

    pub fn set_channel_state(&mut self, state: ChannelState) {
        self.channel_state = state;
    }

    pub fn bounds(&self) -> Result<Bounds<T>, ModelError> {
        self.bounds.ok_or(ModelError::EmptyCloud)
    }

    pub fn push(&mut self, p: MultispectralPoint<T>) {
        match &mut self.bounds {
            Some(b) => b.grow(&p),
            None => self.bounds = Some(Bounds::of_point(&p)),
        }
        self.points.push(p);
    }

    pub fn remove(&mut self, index: usize) -> MultispectralPoint<T> {
        let p = self.points.remove(index);
        self.recompute_bounds();
        p
    }

    pub fn retain(&mut self, mut keep: impl FnMut(&MultispectralPoint<T>) -> bool) {
        self.points.retain(|p| keep(p));
        self.recompute_bounds();
    }

    /// Applies `f` to every point and recomputes bounds.
    pub fn map_points(&mut self, f: impl FnMut(&mut MultispectralPoint<T>)) {
        self.points.iter_mut().for_each(f);
        self.recompute_bounds();
    }

    /// New cloud holding the points at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self::from_points(indices.iter().map(|&i| self.points[i]).collect())
            .with_channel_state(self.channel_state)
    }

    /// Mean of x and y.
    pub fn centroid_xy(&self) -> Result<(T, T), ModelError> {
        if self.points.is_empty() {
            return Err(ModelError::EmptyCloud);
        }
        let n = T::of_usize(self.points.len());
        let sx: T = self.points.iter().map(|p| p.x).sum();
        let sy: T = self.points.iter().map(|p| p.y).sum();
        Ok((sx / n, sy / n))
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match self.points.iter().position(|p| !p.is_finite()) {
            Some(index) => Err(ModelError::NonFinite { index }),
            None => Ok(()),
        }
    }

    fn recompute_bounds(&mut self) {
        let mut it = self.points.iter();
        self.bounds = it.next().map(|first| {
            let mut b = Bounds::of_point(first);
            it.for_each(|p| b.grow(p));
            b
        });
    }
}

impl<T: Real> FromIterator<MultispectralPoint<T>> for PointCloud<T> {
    fn from_iter<I: IntoIterator<Item = MultispectralPoint<T>>>(iter: I) -> Self {
        Self::from_points(iter.into_iter().collect())
    }
}

/// Six affine coefficients in world-file order `(A, D, B, E, C, F)`:
/// `x = A*col + B*row + C`, `y = D*col + E*row + F`, evaluated at pixel centers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineTransform {
    pub a: f64,
    pub d: f64,
    pub b: f64,
    pub e: f64,
    pub c: f64,
    pub f: f64,
}

impl AffineTransform {
    pub fn from_world_file_order(v: [f64; 6]) -> Self {
        Self {
            a: v[0],
            d: v[1],
            b: v[2],
            e: v[3],
            c: v[4],
            f: v[5],
        }
    }

    pub fn to_world_file_order(&self) -> [f64; 6] {
        [self.a, self.d, self.b, self.e, self.c, self.f]
    }

    pub fn pixel_to_world(&self, col: f64, row: f64) -> (f64, f64) {
        (
            self.a * col + self.b * row + self.c,
            self.d * col + self.e * row + self.f,
        )
    }

    pub fn determinant(&self) -> f64 {
        self.a * self.e - self.b * self.d
    }
}

/// Three-band color-infrared raster. Plane 0 is NIR, 1 is red, 2 is green.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoRaster {
    width: usize,
    height: usize,
    planes: [Vec<u8>; 3],
    transform: AffineTransform,
}

impl GeoRaster {
    pub fn new(
        width: usize,
        height: usize,
        planes: [Vec<u8>; 3],
        transform: AffineTransform,
    ) -> Result<Self, ModelError> {
        if transform.a == 0.0 || transform.e == 0.0 {
            return Err(ModelError::DegenerateTransform {
                a: transform.a,
                e: transform.e,
            });
        }
        if planes.iter().any(|p| p.len() != width * height) {
            return Err(ModelError::PlaneSize { width, height });
        }
        Ok(Self {
            width,
            height,
            planes,
            transform,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn transform(&self) -> &AffineTransform {
        &self.transform
    }

    pub fn plane(&self, band: usize) -> &[u8] {
        &self.planes[band]
    }

    /// `(nir, r, g)` at integer pixel `(col, row)`.
    pub fn pixel(&self, col: usize, row: usize) -> [u8; 3] {
        let i = row * self.width + col;
        [self.planes[0][i], self.planes[1][i], self.planes[2][i]]
    }
}

/// Single-tree decay stage, 1 (live) through 5 (clean snag).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DecayLevel(u8);

impl DecayLevel {
    pub const ALL: [DecayLevel; 5] = [
        DecayLevel(1),
        DecayLevel(2),
        DecayLevel(3),
        DecayLevel(4),
        DecayLevel(5),
    ];

    pub fn new(level: u8) -> Result<Self, ModelError> {
        if (1..=5).contains(&level) {
            Ok(Self(level))
        } else {
            Err(ModelError::DecayLevel(level))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// Zero-based class index.
    pub fn index(self) -> usize {
        (self.0 - 1) as usize
    }
}

impl TryFrom<u8> for DecayLevel {
    type Error = ModelError;
    fn try_from(v: u8) -> Result<Self, ModelError> {
        Self::new(v)
    }
}

impl fmt::Display for DecayLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}
