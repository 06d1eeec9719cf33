//! Coordinate systems, world/grid quantization with residual alignment, and
//! rigid transforms shared by every other module.
//!
//! The grid convention: columns grow with world `+x`, rows grow with world
//! `-y`, and the map is anchored to the *world-quantized* cell containing the
//! sensor. The sub-cell residual of the sensor position is added back before
//! quantizing local points, so the same world point always lands in the same
//! world-quantized cell regardless of where the sensor sits inside its own
//! cell.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};

use crate::{Error, Result};

/// A 3D point in meters. The frame (sensor or world) is determined by
/// context.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub(crate) fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub(crate) fn from_vector(v: Vector3<f64>) -> Self {
        Point3::new(v.x, v.y, v.z)
    }
}

/// A 6-DoF pose: rotation (unit quaternion), translation in meters, and a
/// timestamp in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose6 {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
    pub timestamp: f64,
}

impl Pose6 {
    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>, timestamp: f64) -> Self {
        Pose6 {
            rotation,
            translation,
            timestamp,
        }
    }

    pub fn identity() -> Self {
        Pose6::new(UnitQuaternion::identity(), Vector3::zeros(), 0.0)
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Pose6::new(UnitQuaternion::identity(), Vector3::new(x, y, z), 0.0)
    }

    /// Build a pose from a 3×3 rotation matrix, normalizing the input.
    ///
    /// Accepts matrices that are orthonormal only approximately (e.g. parsed
    /// from text); the nearest rotation is used. Fails if the result is not
    /// orthonormal with determinant +1 within 1e-9.
    pub fn from_matrix(rot: Matrix3<f64>, translation: Vector3<f64>, timestamp: f64) -> Result<Self> {
        if !rot.iter().all(|v| v.is_finite()) || !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite pose entries".into()));
        }
        let rotation = Rotation3::from_matrix(&rot);
        let m = rotation.matrix();
        let ortho_err = (m.transpose() * m - Matrix3::identity()).norm();
        let det_err = (m.determinant() - 1.0).abs();
        if ortho_err > 1e-9 || det_err > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "rotation not orthonormal within 1e-9 (ortho {ortho_err:.2e}, det {det_err:.2e})"
            )));
        }
        Ok(Pose6::new(
            UnitQuaternion::from_rotation_matrix(&rotation),
            translation,
            timestamp,
        ))
    }

    /// Map a point from this pose's local frame into the world frame.
    pub fn to_world(&self, p: Point3) -> Point3 {
        Point3::from_vector(self.rotation * p.to_vector() + self.translation)
    }

    /// Map a world-frame point into this pose's local frame.
    pub fn to_local(&self, p: Point3) -> Point3 {
        Point3::from_vector(self.rotation.inverse() * (p.to_vector() - self.translation))
    }
}

/// Integer cell coordinates, `0 <= row, col < side_cells`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridIndex {
    pub row: usize,
    pub col: usize,
}

impl GridIndex {
    pub fn new(row: usize, col: usize) -> Self {
        GridIndex { row, col }
    }
}

/// Anchoring of the rolling grid to world coordinates.
///
/// `residual_xy` is the sensor's offset from the lower-left corner of the
/// world-quantized cell it occupies; adding it back to sensor-local
/// coordinates before quantization aligns local projections with world cell
/// boundaries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapAnchor {
    /// Sensor position in world coordinates (x, y), meters.
    pub lidar_world_xy: [f64; 2],
    /// Sub-cell residual per axis, each in `[0, cell_size)`.
    pub residual_xy: [f64; 2],
    /// Cell side length ω in meters.
    pub cell_size: f64,
    /// Number of cells per map side (even).
    pub side_cells: usize,
}

impl MapAnchor {
    pub fn new(lidar_world_xy: [f64; 2], cell_size: f64, side_cells: usize) -> Result<Self> {
        if !(cell_size > 0.0) || !cell_size.is_finite() {
            return Err(Error::InvalidArgument("cell_size must be positive".into()));
        }
        if side_cells == 0 || side_cells % 2 != 0 {
            return Err(Error::InvalidArgument("side_cells must be even and nonzero".into()));
        }
        if !lidar_world_xy.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite sensor position".into()));
        }
        Ok(MapAnchor {
            lidar_world_xy,
            residual_xy: compute_residual(lidar_world_xy, cell_size)?,
            cell_size,
            side_cells,
        })
    }

    /// World-quantized cell of the sensor, per axis: `Floor(L/ω)`.
    pub fn lidar_cell(&self) -> [i64; 2] {
        [
            floor_div(self.lidar_world_xy[0], self.cell_size),
            floor_div(self.lidar_world_xy[1], self.cell_size),
        ]
    }

    /// World coordinates of a cell's center.
    pub fn cell_center(&self, idx: GridIndex) -> [f64; 2] {
        let n_half = (self.side_cells / 2) as i64;
        let [lx, ly] = self.lidar_cell();
        let qx = lx + idx.col as i64 - n_half;
        let qy = ly + (n_half - 1 - idx.row as i64);
        [
            (qx as f64 + 0.5) * self.cell_size,
            (qy as f64 + 0.5) * self.cell_size,
        ]
    }

    /// Map a world-quantized cell coordinate to a grid index, if inside the
    /// window.
    pub fn world_cell_to_grid(&self, qx: i64, qy: i64) -> Option<GridIndex> {
        let n = self.side_cells as i64;
        let [lx, ly] = self.lidar_cell();
        let col = n / 2 + (qx - lx);
        let row = n / 2 - 1 - (qy - ly);
        if row >= 0 && row < n && col >= 0 && col < n {
            Some(GridIndex::new(row as usize, col as usize))
        } else {
            None
        }
    }
}

/// Mathematical floor of `a / b` as an integer (toward −∞).
#[inline]
pub fn floor_div(a: f64, b: f64) -> i64 {
    (a / b).floor() as i64
}

/// Sub-cell residual of a sensor position: `r = L − Floor(L/ω)·ω` per axis.
///
/// Each component is guaranteed in `[0, ω)`.
pub fn compute_residual(lidar_xy: [f64; 2], omega: f64) -> Result<[f64; 2]> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::InvalidArgument("omega must be positive and finite".into()));
    }
    if !lidar_xy.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite sensor position".into()));
    }
    let mut out = [0.0; 2];
    for (o, &l) in out.iter_mut().zip(&lidar_xy) {
        let r = l - (l / omega).floor() * omega;
        // Rounding can push r onto omega exactly for tiny negative l.
        *o = if r >= omega { 0.0 } else { r.max(0.0) };
    }
    Ok(out)
}

/// Project a sensor-local point onto the grid.
///
/// `col = N/2 + Floor((p.x + r_x)/ω)`, `row = N/2 − 1 − Floor((p.y + r_y)/ω)`.
/// Returns `None` when the point falls outside the map window.
pub fn world_to_grid(p: Point3, anchor: &MapAnchor) -> Option<GridIndex> {
    let n = anchor.side_cells as i64;
    let half = n / 2;
    let col = half + floor_div(p.x + anchor.residual_xy[0], anchor.cell_size);
    let row = half - 1 - floor_div(p.y + anchor.residual_xy[1], anchor.cell_size);
    if row >= 0 && row < n && col >= 0 && col < n {
        Some(GridIndex::new(row as usize, col as usize))
    } else {
        None
    }
}

/// Re-express `p` given in `src`'s local frame in `dst`'s local frame:
/// `T_dst⁻¹ · T_src · p`.
pub fn transform_point(p: Point3, src: &Pose6, dst: &Pose6) -> Point3 {
    dst.to_local(src.to_world(p))
}

/// Interpolate between two poses: linear in translation and timestamp,
/// spherical in rotation. `alpha` must lie in `[0, 1]`.
pub fn interpolate_pose(a: &Pose6, b: &Pose6, alpha: f64) -> Result<Pose6> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!(
            "interpolation fraction {alpha} outside [0, 1]"
        )));
    }
    let rotation = a.rotation.slerp(&b.rotation, alpha);
    let translation = a.translation.lerp(&b.translation, alpha);
    let timestamp = a.timestamp + alpha * (b.timestamp - a.timestamp);
    Ok(Pose6::new(rotation, translation, timestamp))
}
