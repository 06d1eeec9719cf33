//! Ground-truth traversability and elevation maps from pose-and-label
//! annotated sequences.

use std::collections::HashSet;

use crate::geometry::{transform_point, world_to_grid, GridIndex, MapAnchor, Point3, Pose6};
use crate::grid::grow_region;
use crate::preprocess::ScanFrame;

/// A point with its semantic label id.
#[derive(Debug, Clone, Copy)]
pub struct LabeledPoint {
    pub point: Point3,
    pub label: u32,
}

/// Ground-truth cell label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GtLabel {
    Traversable,
    NonTraversable,
    Empty,
}

/// Ground-truth traversability labels and terrain elevations.
#[derive(Debug, Clone)]
pub struct GroundTruthMap {
    pub side: usize,
    pub cell_size: f64,
    pub labels: Vec<GtLabel>,
    /// Mean ground elevation; meaningful only where `elev_valid`.
    pub elevation: Vec<f64>,
    pub elev_valid: Vec<bool>,
}

impl GroundTruthMap {
    #[inline]
    pub fn idx(&self, row: usize, col: usize) -> usize {
        row * self.side + col
    }

    pub fn traversable_count(&self) -> usize {
        self.labels
            .iter()
            .filter(|&&l| l == GtLabel::Traversable)
            .count()
    }
}

/// Label dictionary: which semantic ids are traversable ground, and which
/// mark vegetation-like classes subject to the hanging-point rule.
#[derive(Debug, Clone, Default)]
pub struct LabelSets {
    pub traversable: HashSet<u32>,
    pub hanging_candidates: HashSet<u32>,
}

impl LabelSets {
    pub fn new(traversable: &[u32], hanging: &[u32]) -> Self {
        LabelSets {
            traversable: traversable.iter().cloned().collect(),
            hanging_candidates: hanging.iter().cloned().collect(),
        }
    }
}

/// Assemble labeled frames around a center frame into one dense cloud in
/// the center frame's coordinates.
///
/// Frames whose pose translation lies within `radius` of the center frame's
/// are transformed by `T_center⁻¹ · T_frame` and concatenated.
pub fn assemble_map(
    frames: &[(ScanFrame, Vec<u32>)],
    center: usize,
    radius: f64,
) -> Vec<LabeledPoint> {
    let center_pose: Pose6 = frames[center].0.frame_pose;
    let mut cloud = Vec::new();
    for (scan, labels) in frames {
        let d = (scan.frame_pose.translation - center_pose.translation).norm();
        if d > radius {
            continue;
        }
        for (i, &p) in scan.points.iter().enumerate() {
            let label = labels.get(i).copied().unwrap_or(0);
            cloud.push(LabeledPoint {
                point: transform_point(p, &scan.frame_pose, &center_pose),
                label,
            });
        }
    }
    cloud
}

/// Traversability judgement per cell from semantic labels.
///
/// A cell is traversable when every non-hanging point in it carries a
/// traversable label. Vegetation-like points count as hanging (and are
/// excluded from both the judgement and the elevation average) when they
/// sit more than `t_o` above the highest ground-labeled point in the cell.
pub fn label_traversability(
    cloud: &[LabeledPoint],
    anchor: &MapAnchor,
    sets: &LabelSets,
    t_o: f64,
) -> GroundTruthMap {
    let side = anchor.side_cells;
    let n = side * side;
    // Max ground height per cell, for the hanging rule.
    let mut max_ground = vec![f64::NEG_INFINITY; n];
    let mut cell_of = Vec::with_capacity(cloud.len());
    for lp in cloud {
        let idx = world_to_grid(lp.point, anchor);
        cell_of.push(idx);
        if let Some(idx) = idx {
            if sets.traversable.contains(&lp.label) {
                let i = idx.row * side + idx.col;
                max_ground[i] = max_ground[i].max(lp.point.z);
            }
        }
    }

    let mut labels = vec![GtLabel::Empty; n];
    let mut sum_z = vec![0.0f64; n];
    let mut count = vec![0u32; n];
    let mut all_traversable = vec![true; n];
    for (lp, idx) in cloud.iter().zip(&cell_of) {
        let Some(idx) = idx else { continue };
        let i = idx.row * side + idx.col;
        let hanging = sets.hanging_candidates.contains(&lp.label)
            && max_ground[i].is_finite()
            && lp.point.z > max_ground[i] + t_o;
        if hanging {
            continue;
        }
        if !sets.traversable.contains(&lp.label) {
            all_traversable[i] = false;
        }
        sum_z[i] += lp.point.z;
        count[i] += 1;
    }
    let mut elevation = vec![0.0f64; n];
    let mut elev_valid = vec![false; n];
    for i in 0..n {
        if count[i] == 0 {
            continue;
        }
        labels[i] = if all_traversable[i] {
            GtLabel::Traversable
        } else {
            GtLabel::NonTraversable
        };
        elevation[i] = sum_z[i] / count[i] as f64;
        elev_valid[i] = labels[i] == GtLabel::Traversable;
    }
    GroundTruthMap {
        side,
        cell_size: anchor.cell_size,
        labels,
        elevation,
        elev_valid,
    }
}

/// Reachability filtering and the elevation-validity invariant.
///
/// Grows from the map center over 4-adjacent traversable cells (through the
/// shared region-growing routine); traversable cells left unreached become
/// non-traversable. If the center cell is not traversable, the nearest
/// traversable cell (Euclidean, ties by row then column) seeds instead,
/// with a warning.
pub fn finalize_gt(mut map: GroundTruthMap) -> GroundTruthMap {
    let side = map.side;
    let center = (side / 2 - 1, side / 2);
    let seed = if map.labels[center.0 * side + center.1] == GtLabel::Traversable {
        Some(center)
    } else {
        let mut best: Option<(f64, (usize, usize))> = None;
        for r in 0..side {
            for c in 0..side {
                if map.labels[r * side + c] != GtLabel::Traversable {
                    continue;
                }
                let dr = r as f64 - center.0 as f64;
                let dc = c as f64 - center.1 as f64;
                let d = dr * dr + dc * dc;
                let candidate = (d, (r, c));
                best = Some(match best {
                    None => candidate,
                    Some(cur) => {
                        if candidate.0 < cur.0
                            || (candidate.0 == cur.0 && candidate.1 < cur.1)
                        {
                            candidate
                        } else {
                            cur
                        }
                    }
                });
            }
        }
        if let Some((_, cell)) = best {
            eprintln!(
                "warning: ground-truth center cell not traversable; seeding from ({}, {})",
                cell.0, cell.1
            );
        }
        best.map(|(_, cell)| cell)
    };

    let labels = map.labels.clone();
    let reached = grow_region(
        side,
        seed.as_ref().map(std::slice::from_ref).unwrap_or(&[]),
        |_, (br, bc)| labels[br * side + bc] == GtLabel::Traversable,
    );
    for i in 0..side * side {
        if map.labels[i] == GtLabel::Traversable && !reached.as_slice()[i] {
            map.labels[i] = GtLabel::NonTraversable;
        }
        map.elev_valid[i] = map.labels[i] == GtLabel::Traversable && map.elev_valid[i];
    }
    map
}
