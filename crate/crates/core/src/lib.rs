//! Decay-stage classification of individual conifer trees from airborne LiDAR
//! fused with color-infrared orthophotos.
//!
//! Every numeric module is generic over [`num::Real`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`, which is what the command-line tool
//! uses.

pub mod dataset;
pub mod evalkit;
pub mod features;
pub mod forest;
pub mod fusion;
pub mod model;
pub mod num;
pub mod projection;
pub mod segmentation;
pub mod terrain;

pub use model::{ChannelState, DecayLevel, GeoRaster, ModelError};
pub use num::Real;

pub type MultispectralPoint = model::MultispectralPoint<f64>;
pub type PointCloud = model::PointCloud<f64>;
pub type Triangulation = terrain::Triangulation<f64>;
pub type Dtm = terrain::Dtm<f64>;
pub type TreeSegment = segmentation::TreeSegment<f64>;
pub type ViewImage = projection::ViewImage<f64>;
pub type FeatureVector = features::FeatureVector<f64>;
pub type ForestModel = forest::ForestModel<f64>;
pub type LabeledSample = dataset::LabeledSample<f64>;
