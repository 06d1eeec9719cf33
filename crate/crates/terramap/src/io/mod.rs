//! File formats: point-cloud, label and pose files in the common layouts,
//! map/metric emission, and the sequence manifest.

pub mod kitti;
pub mod manifest;
pub mod maps;

pub use manifest::{Manifest, PointFormat, SequenceSource};
