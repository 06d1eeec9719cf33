//! Per-frame rectification, per-cell height statistics, and coarse
//! terrain/obstacle segmentation.

use crate::geometry::{interpolate_pose, Point3, Pose6};
use crate::{Error, Result};
use nalgebra::UnitQuaternion;

/// One LiDAR scan: points in the sensor frame, the frame's pose, and an id.
///
/// `fractions`, when present, gives each point's acquisition time as a
/// fraction of the scan period in `[0, 1]` and enables motion compensation.
#[derive(Debug, Clone)]
pub struct ScanFrame {
    pub points: Vec<Point3>,
    /// Per-point scan-time fractions; either empty or one entry per point.
    pub fractions: Vec<f64>,
    pub frame_pose: Pose6,
    pub frame_id: u32,
}

impl ScanFrame {
    pub fn new(points: Vec<Point3>, frame_pose: Pose6, frame_id: u32) -> Self {
        ScanFrame {
            points,
            fractions: Vec::new(),
            frame_pose,
            frame_id,
        }
    }

    pub fn with_fractions(mut self, fractions: Vec<f64>) -> Self {
        assert!(
            fractions.is_empty() || fractions.len() == self.points.len(),
            "fractions must be empty or match point count"
        );
        self.fractions = fractions;
        self
    }
}

/// Height statistics of the points that fell into one grid cell in one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellObservation {
    pub count: u32,
    /// Mean height, meters.
    pub mean: f64,
    /// Population variance of heights, m².
    pub variance: f64,
    pub min_h: f64,
    pub max_h: f64,
}

/// Coarse per-cell classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellClass {
    Unobserved,
    PotentialTerrain,
    Obstacle,
}

/// Mean and population variance of a cell's heights.
///
/// The variance is `mean(z²) − mean(z)²` (divide by n, not n−1): fusing two
/// observation batches must reproduce the statistics of the concatenated
/// heights exactly, which only holds for the population form.
pub fn cell_stats(heights: &[f64]) -> Result<CellObservation> {
    if heights.is_empty() {
        return Err(Error::Undefined("cell_stats on empty cell".into()));
    }
    let n = heights.len() as f64;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut min_h = f64::INFINITY;
    let mut max_h = f64::NEG_INFINITY;
    for &z in heights {
        sum += z;
        sum_sq += z * z;
        min_h = min_h.min(z);
        max_h = max_h.max(z);
    }
    let mean = sum / n;
    let variance = (sum_sq / n - mean * mean).max(0.0);
    Ok(CellObservation {
        count: heights.len() as u32,
        mean,
        variance,
        min_h,
        max_h,
    })
}

/// Min-max height segmentation: a cell is an obstacle when its height spread
/// strictly exceeds `t_h`.
pub fn coarse_segment(obs: &CellObservation, t_h: f64) -> CellClass {
    if obs.max_h - obs.min_h > t_h {
        CellClass::Obstacle
    } else {
        CellClass::PotentialTerrain
    }
}

/// Drop points hanging more than `t_o` above the lowest height in the cell.
///
/// The per-cell minimum stands in for the ground height, which keeps hanging
/// canopy out of the min-max spread without removing true vertical structure
/// near the ground.
pub fn remove_overhang(cell_heights: &[f64], t_o: f64) -> Vec<f64> {
    let Some(ground) = cell_heights.iter().cloned().reduce(f64::min) else {
        return Vec::new();
    };
    cell_heights
        .iter()
        .cloned()
        .filter(|&z| z <= ground + t_o)
        .collect()
}

/// Motion-compensate and gravity-align one scan.
///
/// Each point is carried to the world frame through the pose interpolated at
/// its scan-time fraction, then re-centered on `pose_after`'s position. The
/// output frame is world-axis-aligned (roll, pitch and azimuth removed) with
/// the sensor at the origin; `frame_pose` is updated accordingly. Scans
/// without fractions are treated as captured entirely at `pose_after`, so
/// only the upright rotation applies.
pub fn rectify_scan(scan: &ScanFrame, pose_before: &Pose6, pose_after: &Pose6) -> ScanFrame {
    let reference = pose_after.translation;
    let has_fractions = !scan.fractions.is_empty();
    let points = scan
        .points
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let pose = if has_fractions {
                let alpha = scan.fractions[i].clamp(0.0, 1.0);
                interpolate_pose(pose_before, pose_after, alpha)
                    .expect("clamped fraction is in range")
            } else {
                *pose_after
            };
            let w = pose.to_world(p);
            Point3::new(w.x - reference.x, w.y - reference.y, w.z - reference.z)
        })
        .collect();
    ScanFrame {
        points,
        fractions: scan.fractions.clone(),
        frame_pose: Pose6::new(UnitQuaternion::identity(), reference, pose_after.timestamp),
        frame_id: scan.frame_id,
    }
}
