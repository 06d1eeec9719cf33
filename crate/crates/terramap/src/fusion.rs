//! The rolling global grid map and multi-frame fusion of per-cell elevation
//! distributions.
//!
//! Default fusion pools the per-frame Gaussian moments exactly, so the
//! fused `(S, μ̂, Σ̂)` of a cell always equals the single-pass statistics of
//! every height ever projected into it, independent of how the heights were
//! split across frames. Kalman-filter fusion is kept as an alternative for
//! comparison runs.
//!
//! Storage is a flat N×N array addressed by world-quantized cell coordinates
//! modulo N (a 2D ring buffer). Recentering the map therefore moves no data:
//! it only resets the slots whose world cells left the window, making a roll
//! O(evicted cells).

use crate::geometry::{world_to_grid, GridIndex, MapAnchor};
use crate::preprocess::{coarse_segment, CellClass, CellObservation, ScanFrame};
use crate::Result;

/// Fused per-cell state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    /// Cumulative number of projected points, S.
    pub total_points: u32,
    /// Joint mean elevation (absolute world z), meters.
    pub mean: f64,
    /// Joint elevation variance, m².
    pub variance: f64,
    pub class: CellClass,
    /// Number of frames that contributed observations.
    pub obs_frames: u32,
    /// Frame id of the last update.
    pub last_update: u32,
}

impl GridCell {
    pub fn unobserved() -> Self {
        GridCell {
            total_points: 0,
            mean: 0.0,
            variance: 0.0,
            class: CellClass::Unobserved,
            obs_frames: 0,
            last_update: 0,
        }
    }
}

/// Measurement-noise variance for Kalman fusion: either fixed or scaled by
/// the cell's horizontal distance from the sensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeasurementNoise {
    Constant(f64),
    /// `ξ = coeff · d` with `d` the cell-to-sensor distance in meters.
    DistanceScaled(f64),
}

impl MeasurementNoise {
    pub fn at_distance(&self, d: f64) -> f64 {
        match *self {
            MeasurementNoise::Constant(xi) => xi,
            MeasurementNoise::DistanceScaled(coeff) => (coeff * d).max(1e-6),
        }
    }
}

/// Kalman fusion parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KfParams {
    /// Prediction-model gain.
    pub a: f64,
    /// Measurement-model gain.
    pub c: f64,
    /// Process-noise variance ε, m².
    pub process_noise: f64,
    /// Measurement-noise variance ξ.
    pub measurement_noise: MeasurementNoise,
}

impl Default for KfParams {
    fn default() -> Self {
        KfParams {
            a: 1.0,
            c: 1.0,
            process_noise: 0.01,
            measurement_noise: MeasurementNoise::DistanceScaled(0.01),
        }
    }
}

/// Which multi-frame fusion rule `integrate_frame` applies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FusionMode {
    Ndt,
    Kf(KfParams),
}

/// Parameters consumed while integrating one frame.
#[derive(Debug, Clone, Copy)]
pub struct FusionConfig {
    pub mode: FusionMode,
    /// Min-max spread threshold T_h, meters.
    pub t_h: f64,
    /// Overhang threshold T_o, meters.
    pub t_o: f64,
    /// Variance refinement threshold T_Σ, m².
    pub t_sigma: f64,
    /// Frames a cell must have been observed before variance refinement.
    pub min_obs: u32,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            mode: FusionMode::Ndt,
            t_h: 0.4,
            t_o: 2.3,
            t_sigma: 0.1,
            min_obs: 3,
        }
    }
}

/// Moment-pooling fusion of a prior cell state with one frame's observation.
///
/// ```text
/// S' = S + n
/// μ̂' = (n·μ + S·μ̂) / S'
/// Σ̂' = (n·Σ + S·Σ̂ + (n·S/S')·(μ − μ̂)²) / S'
/// ```
///
/// A prior with `S = 0` yields `(n, μ, Σ)` directly.
pub fn ndt_update(prior: &GridCell, obs: &CellObservation) -> GridCell {
    let n = obs.count as f64;
    let s_prev = prior.total_points as f64;
    let s_new = s_prev + n;
    let mean = (n * obs.mean + s_prev * prior.mean) / s_new;
    let delta = obs.mean - prior.mean;
    let variance = if prior.total_points == 0 {
        obs.variance
    } else {
        ((n * obs.variance + s_prev * prior.variance + (n * s_prev / s_new) * delta * delta)
            / s_new)
            .max(0.0)
    };
    GridCell {
        total_points: prior.total_points + obs.count,
        mean,
        variance,
        ..*prior
    }
}

/// One Kalman step on a cell's elevation estimate.
///
/// `xi` is the resolved measurement-noise variance for this cell. A prior
/// with `S = 0` is initialized to the observation with variance `xi`.
pub fn kf_update(prior: &GridCell, obs_mean: f64, obs_count: u32, params: &KfParams, xi: f64) -> GridCell {
    if prior.total_points == 0 {
        return GridCell {
            total_points: obs_count,
            mean: obs_mean,
            variance: xi,
            ..*prior
        };
    }
    let predicted_mean = params.a * prior.mean;
    let predicted_var = params.a * params.a * prior.variance + params.process_noise;
    let gain = predicted_var * params.c / (params.c * params.c * predicted_var + xi);
    let mean = predicted_mean + gain * (obs_mean - params.c * predicted_mean);
    let variance = (1.0 - gain * params.c) * predicted_var;
    GridCell {
        total_points: prior.total_points + obs_count,
        mean,
        variance: variance.max(0.0),
        ..*prior
    }
}

/// Variance refinement: a persistently noisy terrain cell becomes an
/// obstacle. Never demotes an obstacle.
pub fn refine_by_variance(cell: &GridCell, t_sigma: f64, min_obs: u32) -> CellClass {
    if cell.class == CellClass::PotentialTerrain
        && cell.obs_frames >= min_obs
        && cell.variance > t_sigma
    {
        CellClass::Obstacle
    } else {
        cell.class
    }
}

/// Immutable row-major copy of the map used by inference and analysis.
#[derive(Debug, Clone)]
pub struct MapSnapshot {
    pub anchor: MapAnchor,
    pub class: Vec<CellClass>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub total_points: Vec<u32>,
}

impl MapSnapshot {
    pub fn side(&self) -> usize {
        self.anchor.side_cells
    }

    #[inline]
    pub fn idx(&self, row: usize, col: usize) -> usize {
        row * self.anchor.side_cells + col
    }
}

/// The rolling, world-anchored elevation grid.
pub struct RollingGridMap {
    anchor: MapAnchor,
    cells: Vec<GridCell>,
    // Per-frame scratch, reused across integrate calls.
    scratch_first: Vec<(u32, f64)>,
    accum: Vec<CellAccum>,
    touched: Vec<u32>,
}

#[derive(Clone, Copy)]
struct CellAccum {
    count: u32,
    sum: f64,
    sum_sq: f64,
    min: f64,
    max: f64,
}

const EMPTY_ACCUM: CellAccum = CellAccum {
    count: 0,
    sum: 0.0,
    sum_sq: 0.0,
    min: f64::INFINITY,
    max: f64::NEG_INFINITY,
};

impl RollingGridMap {
    pub fn new(lidar_world_xy: [f64; 2], cell_size: f64, side_cells: usize) -> Result<Self> {
        let anchor = MapAnchor::new(lidar_world_xy, cell_size, side_cells)?;
        let n = side_cells * side_cells;
        Ok(RollingGridMap {
            anchor,
            cells: vec![GridCell::unobserved(); n],
            scratch_first: Vec::new(),
            accum: vec![EMPTY_ACCUM; n],
            touched: Vec::new(),
        })
    }

    pub fn anchor(&self) -> &MapAnchor {
        &self.anchor
    }

    /// Storage slot of a world-quantized cell (2D ring-buffer addressing).
    #[inline]
    fn slot_of_world(&self, qx: i64, qy: i64) -> usize {
        let n = self.anchor.side_cells as i64;
        (qy.rem_euclid(n) * n + qx.rem_euclid(n)) as usize
    }

    #[inline]
    fn world_cell_of(&self, idx: GridIndex) -> [i64; 2] {
        let half = (self.anchor.side_cells / 2) as i64;
        let [lx, ly] = self.anchor.lidar_cell();
        [
            lx + idx.col as i64 - half,
            ly + half - 1 - idx.row as i64,
        ]
    }

    pub fn cell(&self, idx: GridIndex) -> &GridCell {
        let [qx, qy] = self.world_cell_of(idx);
        &self.cells[self.slot_of_world(qx, qy)]
    }

    pub fn cell_mut(&mut self, idx: GridIndex) -> &mut GridCell {
        let [qx, qy] = self.world_cell_of(idx);
        let slot = self.slot_of_world(qx, qy);
        &mut self.cells[slot]
    }

    /// Recenter the window on a new sensor position.
    ///
    /// Cells whose world-quantized coordinates leave the window are reset to
    /// unobserved; every other cell keeps its contents at its world position.
    pub fn roll_to(&mut self, new_lidar_xy: [f64; 2]) -> Result<()> {
        let old = self.anchor.lidar_cell();
        let new_anchor = MapAnchor::new(new_lidar_xy, self.anchor.cell_size, self.anchor.side_cells)?;
        let new = new_anchor.lidar_cell();
        let n = self.anchor.side_cells as i64;
        let half = n / 2;

        for axis in 0..2 {
            let shift = new[axis] - old[axis];
            if shift == 0 {
                continue;
            }
            if shift.abs() >= n {
                self.cells.fill(GridCell::unobserved());
                break;
            }
            // World lines in the old window but not the new one.
            let (evict_from, evict_to) = if shift > 0 {
                (old[axis] - half, old[axis] - half + shift)
            } else {
                (old[axis] + half + shift, old[axis] + half)
            };
            for q in evict_from..evict_to {
                self.clear_line(axis, q);
            }
        }
        self.anchor = new_anchor;
        Ok(())
    }

    /// Reset all slots on one world-quantized column (axis 0) or row (axis 1).
    fn clear_line(&mut self, axis: usize, q: i64) {
        let n = self.anchor.side_cells as i64;
        let fixed = q.rem_euclid(n) as usize;
        let side = self.anchor.side_cells;
        if axis == 0 {
            for j in 0..side {
                self.cells[j * side + fixed] = GridCell::unobserved();
            }
        } else {
            let base = fixed * side;
            self.cells[base..base + side].fill(GridCell::unobserved());
        }
    }

    /// Integrate one rectified scan: roll, project, accumulate per-cell
    /// statistics (dropping overhanging points), fuse, and refine classes.
    pub fn integrate_frame(&mut self, scan: &ScanFrame, cfg: &FusionConfig) -> Result<()> {
        let pose = scan.frame_pose;
        self.roll_to([pose.translation.x, pose.translation.y])?;

        // Pass A: project points, record (slot, world z), track per-cell
        // minimum height for the overhang cut.
        self.scratch_first.clear();
        self.scratch_first.reserve(scan.points.len());
        for p in &scan.points {
            if !p.is_finite() {
                continue;
            }
            let Some(idx) = world_to_grid(*p, &self.anchor) else {
                continue;
            };
            let [qx, qy] = self.world_cell_of(idx);
            let slot = self.slot_of_world(qx, qy) as u32;
            let z = p.z + pose.translation.z;
            let acc = &mut self.accum[slot as usize];
            if acc.count == 0 && acc.min == f64::INFINITY {
                self.touched.push(slot);
            }
            acc.min = acc.min.min(z);
            self.scratch_first.push((slot, z));
        }

        // Pass B: accumulate moments of the points that survive the cut.
        for &(slot, z) in &self.scratch_first {
            let acc = &mut self.accum[slot as usize];
            if z <= acc.min + cfg.t_o {
                acc.count += 1;
                acc.sum += z;
                acc.sum_sq += z * z;
                acc.max = acc.max.max(z);
            }
        }
        // min must describe the surviving points; the cut keeps the minimum
        // itself, so it is unchanged.

        let lidar_xy = [pose.translation.x, pose.translation.y];
        for ti in 0..self.touched.len() {
            let slot = self.touched[ti] as usize;
            let acc = self.accum[slot];
            self.accum[slot] = EMPTY_ACCUM;
            if acc.count == 0 {
                continue;
            }
            let nf = acc.count as f64;
            let mean = acc.sum / nf;
            let obs = CellObservation {
                count: acc.count,
                mean,
                variance: (acc.sum_sq / nf - mean * mean).max(0.0),
                min_h: acc.min,
                max_h: acc.max,
            };

            let cell = self.cells[slot];
            if cell.class == CellClass::Obstacle {
                // Obstacles are absorbing and stop accumulating statistics.
                self.cells[slot].last_update = scan.frame_id;
                continue;
            }

            let mut fused = match cfg.mode {
                FusionMode::Ndt => ndt_update(&cell, &obs),
                FusionMode::Kf(params) => {
                    // Cell-to-sensor distance for the scaled noise rule.
                    let [qx, qy] = slot_world_guess(&self.anchor, slot);
                    let cx = (qx as f64 + 0.5) * self.anchor.cell_size;
                    let cy = (qy as f64 + 0.5) * self.anchor.cell_size;
                    let d = ((cx - lidar_xy[0]).powi(2) + (cy - lidar_xy[1]).powi(2)).sqrt();
                    let xi = params.measurement_noise.at_distance(d);
                    kf_update(&cell, obs.mean, obs.count, &params, xi)
                }
            };
            fused.obs_frames = cell.obs_frames + 1;
            fused.last_update = scan.frame_id;
            fused.class = match coarse_segment(&obs, cfg.t_h) {
                CellClass::Obstacle => CellClass::Obstacle,
                _ => CellClass::PotentialTerrain,
            };
            fused.class = refine_by_variance(&fused, cfg.t_sigma, cfg.min_obs);
            self.cells[slot] = fused;
        }
        self.touched.clear();
        Ok(())
    }

    /// Row-major copy of the current window.
    pub fn snapshot(&self) -> MapSnapshot {
        let side = self.anchor.side_cells;
        let mut class = Vec::with_capacity(side * side);
        let mut mean = Vec::with_capacity(side * side);
        let mut variance = Vec::with_capacity(side * side);
        let mut total_points = Vec::with_capacity(side * side);
        for row in 0..side {
            for col in 0..side {
                let cell = self.cell(GridIndex::new(row, col));
                class.push(cell.class);
                mean.push(cell.mean);
                variance.push(cell.variance);
                total_points.push(cell.total_points);
            }
        }
        MapSnapshot {
            anchor: self.anchor,
            class,
            mean,
            variance,
            total_points,
        }
    }
}

/// Recover the world-quantized cell of a storage slot.
///
/// Ring-buffer addressing maps N consecutive world lines onto N slots, so
/// within the active window the inverse is unique.
fn slot_world_guess(anchor: &MapAnchor, slot: usize) -> [i64; 2] {
    let n = anchor.side_cells as i64;
    let half = n / 2;
    let [lx, ly] = anchor.lidar_cell();
    let sx = (slot as i64) % n;
    let sy = (slot as i64) / n;
    let qx = lx - half + (sx - (lx - half).rem_euclid(n)).rem_euclid(n);
    let qy = ly - half + (sy - (ly - half).rem_euclid(n)).rem_euclid(n);
    [qx, qy]
}
