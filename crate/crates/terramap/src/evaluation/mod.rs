//! Ground-truth construction, quality metrics, and the deterministic
//! synthetic scene + virtual LiDAR generator used for desk-scale
//! experiments.

mod ground_truth;
mod lidar;
mod metrics;
mod scene;

pub use ground_truth::{
    assemble_map, finalize_gt, label_traversability, GroundTruthMap, GtLabel, LabelSets,
    LabeledPoint,
};
pub use lidar::simulate_lidar;
pub use metrics::{
    metrics_elevation, metrics_traversability, ElevationMetrics, MetricReport,
    TraversabilityMetrics,
};
pub use scene::{synth_scene, MapParams, Primitive, SceneSpec, SceneTerrain, SensorSpec, TrajectoryStep};
