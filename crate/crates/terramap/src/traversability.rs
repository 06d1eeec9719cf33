//! Traversability analysis over the dense terrain model: surface normals,
//! the local-convexity edge test, per-cell travel costs, reachability by
//! region growing, and cost-aware grid path planning.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::geometry::{GridIndex, MapAnchor};
use crate::grid::{grow_region, neighbors4};

/// Dense elevation field with per-cell variance and validity.
#[derive(Debug, Clone)]
pub struct TerrainModel {
    pub anchor: MapAnchor,
    /// Row-major elevation, meters (world z).
    pub elevation: Vec<f64>,
    /// Row-major posterior variance, m².
    pub variance: Vec<f64>,
    /// Row-major validity; invalid cells carry no terrain estimate.
    pub valid: Vec<bool>,
}

impl TerrainModel {
    pub fn side(&self) -> usize {
        self.anchor.side_cells
    }

    #[inline]
    pub fn idx(&self, row: usize, col: usize) -> usize {
        row * self.side() + col
    }

    /// Cell center and elevation as a 3D point, if valid.
    pub fn vertex(&self, row: usize, col: usize) -> Option<[f64; 3]> {
        let i = self.idx(row, col);
        if !self.valid[i] {
            return None;
        }
        let [x, y] = self.anchor.cell_center(GridIndex::new(row, col));
        Some([x, y, self.elevation[i]])
    }
}

/// Unit surface normals where the 4-neighborhood is valid.
#[derive(Debug, Clone)]
pub struct NormalField {
    pub side: usize,
    pub normals: Vec<[f64; 3]>,
    pub valid: Vec<bool>,
}

impl NormalField {
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Option<[f64; 3]> {
        let i = row * self.side + col;
        if self.valid[i] {
            Some(self.normals[i])
        } else {
            None
        }
    }
}

/// Per-cell traversability label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellLabel {
    Traversable,
    NonTraversable,
    /// Traversable geometry with no connection to the vehicle's seed cells;
    /// only region growing assigns this.
    Unreachable,
    Unknown,
}

/// Travel costs and labels over the grid.
#[derive(Debug, Clone)]
pub struct CostMap {
    pub side: usize,
    pub cell_size: f64,
    pub labels: Vec<CellLabel>,
    /// Finite for traversable cells, +∞ elsewhere.
    pub cost: Vec<f64>,
}

impl CostMap {
    #[inline]
    pub fn idx(&self, row: usize, col: usize) -> usize {
        row * self.side + col
    }

    pub fn label(&self, idx: GridIndex) -> CellLabel {
        self.labels[self.idx(idx.row, idx.col)]
    }
}

/// Kinematic limits of the vehicle.
#[derive(Debug, Clone, Copy)]
pub struct KinematicLimits {
    /// Maximum normal-similarity angle T_α, degrees.
    pub max_similarity_deg: f64,
    /// Concavity angle threshold T_θ, degrees; the projection of a normal
    /// onto the inter-cell displacement must stay at or below cos(T_θ).
    pub concavity_deg: f64,
    /// Sensor mounting height above the ground, meters.
    pub lidar_height: f64,
}

impl Default for KinematicLimits {
    fn default() -> Self {
        KinematicLimits {
            max_similarity_deg: 10.0,
            concavity_deg: 80.0,
            lidar_height: 2.0,
        }
    }
}

impl KinematicLimits {
    pub fn cos_similarity(&self) -> f64 {
        self.max_similarity_deg.to_radians().cos()
    }

    pub fn cos_concavity(&self) -> f64 {
        self.concavity_deg.to_radians().cos()
    }
}

/// Geometry of one cell used by the edge test: center vertex and unit
/// normal.
#[derive(Debug, Clone, Copy)]
pub struct CellGeom {
    pub vertex: [f64; 3],
    pub normal: [f64; 3],
}

#[inline]
fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

/// Central-difference surface normal at a cell, oriented with `n_z ≥ 0`.
///
/// The two difference vectors span the east–west and north–south neighbors;
/// their cross product is undefined whenever any 4-neighbor is invalid.
pub fn compute_normal(model: &TerrainModel, cell: GridIndex) -> Option<[f64; 3]> {
    let side = model.side();
    let (r, c) = (cell.row, cell.col);
    if r == 0 || c == 0 || r + 1 >= side || c + 1 >= side {
        return None;
    }
    let east = model.vertex(r, c + 1)?;
    let west = model.vertex(r, c - 1)?;
    let north = model.vertex(r - 1, c)?; // smaller row = larger world y
    let south = model.vertex(r + 1, c)?;
    let a = sub(east, west);
    let b = sub(north, south);
    let n = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    let len = norm(n);
    if len == 0.0 {
        return None;
    }
    let mut n = [n[0] / len, n[1] / len, n[2] / len];
    if n[2] < 0.0 {
        n = [-n[0], -n[1], -n[2]];
    }
    Some(n)
}

/// Normals for the whole model.
pub fn compute_normal_field(model: &TerrainModel) -> NormalField {
    let side = model.side();
    let mut normals = vec![[0.0; 3]; side * side];
    let mut valid = vec![false; side * side];
    for row in 0..side {
        for col in 0..side {
            if let Some(n) = compute_normal(model, GridIndex::new(row, col)) {
                normals[row * side + col] = n;
                valid[row * side + col] = true;
            }
        }
    }
    NormalField {
        side,
        normals,
        valid,
    }
}

/// The local-convexity test between two adjacent cells.
///
/// The edge is traversable when neither normal leans into the displacement
/// beyond the concavity bound and the normals themselves agree within the
/// similarity bound:
///
/// ```text
/// n_i·v_ij/‖v_ij‖ ≤ cos(T_θ)  ∧  n_j·v_ji/‖v_ji‖ ≤ cos(T_θ)  ∧  n_i·n_j ≥ cos(T_α)
/// ```
pub fn edge_traversable(i: &CellGeom, j: &CellGeom, limits: &KinematicLimits) -> bool {
    let v_ij = sub(j.vertex, i.vertex);
    let len = norm(v_ij);
    if len == 0.0 {
        return true;
    }
    let cos_theta = limits.cos_concavity();
    let proj_i = dot(i.normal, v_ij) / len;
    let proj_j = dot(j.normal, [-v_ij[0], -v_ij[1], -v_ij[2]]) / len;
    proj_i <= cos_theta && proj_j <= cos_theta && dot(i.normal, j.normal) >= limits.cos_similarity()
}

/// Travel cost of a cell from its traversable neighbor edges.
///
/// ```text
/// C_i = (1/3m) Σ_j [ n_i·v_ij/(‖v_ij‖·cos T_θ) + n_j·v_ji/(‖v_ji‖·cos T_θ) + cos(T_α)/(n_i·n_j) ]
/// ```
///
/// Flat ground with aligned normals attains the minimum `cos(T_α)/3`.
/// Returns `None` when there is no traversable neighbor.
pub fn travel_cost(cell: &CellGeom, neighbors: &[CellGeom], limits: &KinematicLimits) -> Option<f64> {
    if neighbors.is_empty() {
        return None;
    }
    let cos_theta = limits.cos_concavity();
    let cos_alpha = limits.cos_similarity();
    let mut acc = 0.0;
    for j in neighbors {
        let v_ij = sub(j.vertex, cell.vertex);
        let len = norm(v_ij);
        let proj_i = dot(cell.normal, v_ij) / (len * cos_theta);
        let proj_j = dot(j.normal, [-v_ij[0], -v_ij[1], -v_ij[2]]) / (len * cos_theta);
        acc += proj_i + proj_j + cos_alpha / dot(cell.normal, j.normal);
    }
    Some(acc / (3.0 * neighbors.len() as f64))
}

/// Labels and costs from the terrain model, before reachability.
///
/// `obstacle` marks cells known to be obstacles from the fused map; those
/// are non-traversable regardless of geometry. Cells without a valid normal
/// are unknown. A cell is traversable when at least one of its 4-neighbor
/// edges passes the convexity test, and carries the average cost over its
/// passing edges.
pub fn compute_cost_map(
    model: &TerrainModel,
    obstacle: &[bool],
    limits: &KinematicLimits,
) -> (NormalField, CostMap) {
    let side = model.side();
    let normals = compute_normal_field(model);
    let mut labels = vec![CellLabel::Unknown; side * side];
    let mut cost = vec![f64::INFINITY; side * side];

    let geom = |row: usize, col: usize| -> Option<CellGeom> {
        let normal = normals.get(row, col)?;
        Some(CellGeom {
            vertex: model.vertex(row, col)?,
            normal,
        })
    };

    for row in 0..side {
        for col in 0..side {
            let i = row * side + col;
            if obstacle[i] {
                labels[i] = CellLabel::NonTraversable;
                continue;
            }
            let Some(here) = geom(row, col) else {
                continue; // stays Unknown
            };
            let mut passing: Vec<CellGeom> = Vec::with_capacity(4);
            for (nr, nc) in neighbors4(side, row, col) {
                if obstacle[nr * side + nc] {
                    continue;
                }
                if let Some(other) = geom(nr, nc) {
                    if edge_traversable(&here, &other, limits) {
                        passing.push(other);
                    }
                }
            }
            match travel_cost(&here, &passing, limits) {
                Some(c) => {
                    labels[i] = CellLabel::Traversable;
                    cost[i] = c;
                }
                None => labels[i] = CellLabel::NonTraversable,
            }
        }
    }

    (
        normals,
        CostMap {
            side,
            cell_size: model.anchor.cell_size,
            labels,
            cost,
        },
    )
}

/// Reachability: keep only traversable cells connected to the vehicle.
///
/// Seeds are traversable cells in the 3×3 window around `vehicle_cell`
/// whose elevation is consistent with the sensor height above ground
/// (`lidar_z − lidar_height`) within `seed_tolerance`. The fill expands
/// across 4-adjacent edges that pass the convexity test; traversable cells
/// never reached become `Unreachable`. With no valid seed the whole map is
/// unreachable and a warning is emitted.
pub fn region_grow(
    costmap: &CostMap,
    model: &TerrainModel,
    normals: &NormalField,
    limits: &KinematicLimits,
    vehicle_cell: GridIndex,
    lidar_z: f64,
    seed_tolerance: f64,
) -> CostMap {
    let side = costmap.side;
    let expected_ground = lidar_z - limits.lidar_height;
    let mut seeds = Vec::new();
    for dr in -1i64..=1 {
        for dc in -1i64..=1 {
            let r = vehicle_cell.row as i64 + dr;
            let c = vehicle_cell.col as i64 + dc;
            if r < 0 || c < 0 || r as usize >= side || c as usize >= side {
                continue;
            }
            let (r, c) = (r as usize, c as usize);
            let i = r * side + c;
            if costmap.labels[i] == CellLabel::Traversable
                && (model.elevation[i] - expected_ground).abs() <= seed_tolerance
            {
                seeds.push((r, c));
            }
        }
    }
    if seeds.is_empty() {
        eprintln!(
            "warning: no traversable seed near vehicle cell ({}, {}); all cells unreachable",
            vehicle_cell.row, vehicle_cell.col
        );
    }

    let geom = |row: usize, col: usize| -> Option<CellGeom> {
        let normal = normals.get(row, col)?;
        Some(CellGeom {
            vertex: model.vertex(row, col)?,
            normal,
        })
    };
    let reached = grow_region(side, &seeds, |(ar, ac), (br, bc)| {
        if costmap.labels[br * side + bc] != CellLabel::Traversable {
            return false;
        }
        match (geom(ar, ac), geom(br, bc)) {
            (Some(a), Some(b)) => edge_traversable(&a, &b, limits),
            _ => false,
        }
    });

    let mut out = costmap.clone();
    for i in 0..side * side {
        if out.labels[i] == CellLabel::Traversable && !reached.as_slice()[i] {
            out.labels[i] = CellLabel::Unreachable;
            out.cost[i] = f64::INFINITY;
        }
    }
    out
}

/// A planned grid path and its total objective value.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedPath {
    pub cells: Vec<GridIndex>,
    /// Σ (step length in meters + λ · entered-cell cost).
    pub total_cost: f64,
}

#[derive(PartialEq)]
struct HeapEntry {
    f: f64,
    g: f64,
    idx: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on f.
        other.f.total_cmp(&self.f)
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

const MOVES: [(i64, i64); 8] = [
    (-1, 0),
    (1, 0),
    (0, -1),
    (0, 1),
    (-1, -1),
    (-1, 1),
    (1, -1),
    (1, 1),
];

/// Cost-aware A* over the 8-connected traversable cells.
///
/// Each step costs its metric length plus `lambda` times the entered cell's
/// travel cost; the heuristic is the straight-line distance, which ignores
/// the cost term and therefore never overestimates. Diagonal moves require
/// both rectilinear intermediate cells to be traversable so corners are not
/// cut. Returns `None` when start or goal is not traversable or no path
/// exists.
pub fn plan_path(
    costmap: &CostMap,
    start: GridIndex,
    goal: GridIndex,
    lambda: f64,
) -> Option<PlannedPath> {
    let side = costmap.side;
    let omega = costmap.cell_size;
    let at = |idx: GridIndex| costmap.labels[idx.row * side + idx.col];
    if at(start) != CellLabel::Traversable || at(goal) != CellLabel::Traversable {
        return None;
    }
    if start == goal {
        return Some(PlannedPath {
            cells: vec![start],
            total_cost: 0.0,
        });
    }

    let h = |i: usize| {
        let (r, c) = (i / side, i % side);
        let dr = r as f64 - goal.row as f64;
        let dc = c as f64 - goal.col as f64;
        omega * (dr * dr + dc * dc).sqrt()
    };

    let mut g = vec![f64::INFINITY; side * side];
    let mut parent = vec![usize::MAX; side * side];
    let start_i = start.row * side + start.col;
    let goal_i = goal.row * side + goal.col;
    g[start_i] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(HeapEntry {
        f: h(start_i),
        g: 0.0,
        idx: start_i,
    });

    while let Some(entry) = heap.pop() {
        if entry.g > g[entry.idx] {
            continue; // stale
        }
        if entry.idx == goal_i {
            break;
        }
        let (r, c) = (entry.idx / side, entry.idx % side);
        for &(dr, dc) in &MOVES {
            let nr = r as i64 + dr;
            let nc = c as i64 + dc;
            if nr < 0 || nc < 0 || nr as usize >= side || nc as usize >= side {
                continue;
            }
            let (nr, nc) = (nr as usize, nc as usize);
            let ni = nr * side + nc;
            if costmap.labels[ni] != CellLabel::Traversable {
                continue;
            }
            let diagonal = dr != 0 && dc != 0;
            if diagonal {
                // No corner cutting: both rectilinear intermediates must be
                // traversable.
                let a = (r, nc);
                let b = (nr, c);
                if costmap.labels[a.0 * side + a.1] != CellLabel::Traversable
                    || costmap.labels[b.0 * side + b.1] != CellLabel::Traversable
                {
                    continue;
                }
            }
            let step = if diagonal {
                omega * std::f64::consts::SQRT_2
            } else {
                omega
            };
            let tentative = g[entry.idx] + step + lambda * costmap.cost[ni];
            if tentative < g[ni] {
                g[ni] = tentative;
                parent[ni] = entry.idx;
                heap.push(HeapEntry {
                    f: tentative + h(ni),
                    g: tentative,
                    idx: ni,
                });
            }
        }
    }

    if g[goal_i].is_infinite() {
        return None;
    }
    let mut cells = Vec::new();
    let mut cur = goal_i;
    while cur != usize::MAX {
        cells.push(GridIndex::new(cur / side, cur % side));
        if cur == start_i {
            break;
        }
        cur = parent[cur];
    }
    cells.reverse();
    Some(PlannedPath {
        cells,
        total_cost: g[goal_i],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model_from_fn(side: usize, omega: f64, f: impl Fn(f64, f64) -> f64) -> TerrainModel {
        let anchor = MapAnchor::new([0.0, 0.0], omega, side).unwrap();
        let mut elevation = vec![0.0; side * side];
        let valid = vec![true; side * side];
        for row in 0..side {
            for col in 0..side {
                let [x, y] = anchor.cell_center(GridIndex::new(row, col));
                elevation[row * side + col] = f(x, y);
            }
        }
        TerrainModel {
            anchor,
            elevation,
            variance: vec![1e-4; side * side],
            valid,
        }
    }

    #[test]
    fn normal_flat_plane() {
        let model = model_from_fn(10, 0.2, |_, _| 1.0);
        let n = compute_normal(&model, GridIndex::new(5, 5)).unwrap();
        assert_relative_eq!(n[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(n[1], 0.0, epsilon = 1e-12);
        assert_relative_eq!(n[2], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn normal_45_degree_ramp() {
        let model = model_from_fn(10, 0.2, |x, _| x);
        let n = compute_normal(&model, GridIndex::new(5, 5)).unwrap();
        let s = 1.0 / 2.0f64.sqrt();
        assert_relative_eq!(n[0], -s, epsilon = 1e-12);
        assert_relative_eq!(n[1], 0.0, epsilon = 1e-12);
        assert_relative_eq!(n[2], s, epsilon = 1e-12);
    }

    #[test]
    fn normal_offset_invariant_and_unit() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let base = model_from_fn(12, 0.2, |x, y| 0.3 * (x * 1.7).sin() + 0.2 * y);
        let mut shifted = base.clone();
        for e in shifted.elevation.iter_mut() {
            *e += 5.0;
        }
        for _ in 0..50 {
            let r = rng.gen_range(1..11);
            let c = rng.gen_range(1..11);
            let a = compute_normal(&base, GridIndex::new(r, c)).unwrap();
            let b = compute_normal(&shifted, GridIndex::new(r, c)).unwrap();
            for k in 0..3 {
                assert_relative_eq!(a[k], b[k], epsilon = 1e-12);
            }
            let len = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
            assert_relative_eq!(len, 1.0, epsilon = 1e-9);
            assert!(a[2] >= 0.0);
        }
    }

    #[test]
    fn normal_undefined_on_border_or_invalid_neighbor() {
        let mut model = model_from_fn(6, 0.2, |_, _| 0.0);
        assert!(compute_normal(&model, GridIndex::new(0, 3)).is_none());
        // Invalidate the east neighbor of (2, 2).
        model.valid[2 * 6 + 3] = false;
        assert!(compute_normal(&model, GridIndex::new(2, 2)).is_none());
    }

    fn flat_geom(x: f64, h: f64) -> CellGeom {
        CellGeom {
            vertex: [x, 0.0, h],
            normal: [0.0, 0.0, 1.0],
        }
    }

    #[test]
    fn edge_flat_true_wall_false() {
        let limits = KinematicLimits::default();
        assert!(edge_traversable(&flat_geom(0.0, 0.0), &flat_geom(0.2, 0.0), &limits));

        // Perpendicular normals: similarity fails.
        let wall = CellGeom {
            vertex: [0.2, 0.0, 0.1],
            normal: [1.0, 0.0, 0.0],
        };
        assert!(!edge_traversable(&flat_geom(0.0, 0.0), &wall, &limits));
    }

    #[test]
    fn edge_fails_across_curb_face() {
        // 0.15 m elevation jump between adjacent 0.2 m cells: the concavity
        // projection is 0.15/0.25 = 0.6 > cos(80°).
        let limits = KinematicLimits::default();
        let low = flat_geom(0.0, 0.0);
        let high = flat_geom(0.2, 0.15);
        assert!(!edge_traversable(&low, &high, &limits));
    }

    #[test]
    fn edge_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let limits = KinematicLimits::default();
        let random_normal = |rng: &mut ChaCha8Rng| {
            let n = [
                rng.gen_range(-0.3..0.3),
                rng.gen_range(-0.3..0.3),
                1.0f64,
            ];
            let l = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
            [n[0] / l, n[1] / l, n[2] / l]
        };
        for _ in 0..300 {
            let a = CellGeom {
                vertex: [0.0, 0.0, rng.gen_range(-0.2..0.2)],
                normal: random_normal(&mut rng),
            };
            let b = CellGeom {
                vertex: [0.2, 0.0, rng.gen_range(-0.2..0.2)],
                normal: random_normal(&mut rng),
            };
            assert_eq!(
                edge_traversable(&a, &b, &limits),
                edge_traversable(&b, &a, &limits)
            );
        }
    }

    #[test]
    fn travel_cost_flat_minimum() {
        let limits = KinematicLimits::default();
        let here = flat_geom(0.0, 0.0);
        for m in 1..=4 {
            let neighbors: Vec<CellGeom> = (0..m)
                .map(|k| flat_geom(0.2 * (k + 1) as f64, 0.0))
                .collect();
            let c = travel_cost(&here, &neighbors, &limits).unwrap();
            assert_relative_eq!(c, 10.0f64.to_radians().cos() / 3.0, epsilon = 1e-12);
        }
        assert!(travel_cost(&here, &[], &limits).is_none());
    }

    #[test]
    fn travel_cost_rises_at_grade_change() {
        // On an infinite uniform slope the displacement lies in the surface
        // plane, so the projection terms vanish and the cost equals flat
        // ground. The cost rises where flat meets ramp: there the uphill
        // neighbor sits above the local tangent plane.
        let limits = KinematicLimits::default();
        let flat_cost = 10.0f64.to_radians().cos() / 3.0;

        let slope = 5.0f64.to_radians();
        let n_ramp = [-slope.sin(), 0.0, slope.cos()];
        let on_ramp = CellGeom {
            vertex: [0.0, 0.0, 0.0],
            normal: n_ramp,
        };
        let up_ramp = CellGeom {
            vertex: [0.2, 0.0, 0.2 * slope.tan()],
            normal: n_ramp,
        };
        let uniform = travel_cost(&on_ramp, &[up_ramp], &limits).unwrap();
        assert_relative_eq!(uniform, flat_cost, epsilon = 1e-12);

        // Flat cell at the foot of the ramp, looking up the grade.
        let at_foot = CellGeom {
            vertex: [0.0, 0.0, 0.0],
            normal: [0.0, 0.0, 1.0],
        };
        assert!(edge_traversable(&at_foot, &up_ramp, &limits));
        let transition = travel_cost(&at_foot, &[up_ramp], &limits).unwrap();
        assert!(
            transition > flat_cost,
            "concave transition cost {transition} <= flat {flat_cost}"
        );
    }

    #[test]
    fn travel_cost_order_invariant() {
        let limits = KinematicLimits::default();
        let here = flat_geom(0.0, 0.01);
        let a = flat_geom(0.2, 0.0);
        let b = flat_geom(-0.2, 0.03);
        let c1 = travel_cost(&here, &[a, b], &limits).unwrap();
        let c2 = travel_cost(&here, &[b, a], &limits).unwrap();
        assert_relative_eq!(c1, c2, epsilon = 1e-15);
    }

    fn full_pipeline_costmap(model: &TerrainModel, limits: &KinematicLimits) -> CostMap {
        let obstacle = vec![false; model.side() * model.side()];
        let (normals, pre) = compute_cost_map(model, &obstacle, limits);
        let side = model.side();
        region_grow(
            &pre,
            model,
            &normals,
            limits,
            GridIndex::new(side / 2 - 1, side / 2),
            limits.lidar_height, // ground at z=0
            0.4,
        )
    }

    #[test]
    fn region_grow_flat_reaches_everything() {
        let model = model_from_fn(20, 0.2, |_, _| 0.0);
        let limits = KinematicLimits::default();
        let grown = full_pipeline_costmap(&model, &limits);
        for row in 1..19 {
            for col in 1..19 {
                assert_eq!(
                    grown.labels[row * 20 + col],
                    CellLabel::Traversable,
                    "({row},{col})"
                );
            }
        }
    }

    #[test]
    fn region_grow_walled_plateau_unreachable() {
        // A raised plateau with steep faces in one corner.
        let model = model_from_fn(24, 0.2, |x, y| {
            if x > 1.0 && y > 1.0 {
                1.0
            } else {
                0.0
            }
        });
        let limits = KinematicLimits::default();
        let grown = full_pipeline_costmap(&model, &limits);
        // Interior of the plateau: flat but disconnected.
        let idx = model.anchor.world_cell_to_grid(9, 9).unwrap();
        assert_eq!(grown.labels[idx.row * 24 + idx.col], CellLabel::Unreachable);
        // Ground near the vehicle stays traversable.
        let idx = model.anchor.world_cell_to_grid(0, 0).unwrap();
        assert_eq!(grown.labels[idx.row * 24 + idx.col], CellLabel::Traversable);
    }

    #[test]
    fn region_grow_curb_splits_regions() {
        // Two flat regions separated by a 0.15 m curb across the whole map.
        let model = model_from_fn(24, 0.2, |x, _| if x > 0.5 { 0.15 } else { 0.0 });
        let limits = KinematicLimits::default();
        let grown = full_pipeline_costmap(&model, &limits);
        let far = model.anchor.world_cell_to_grid(10, 0).unwrap();
        assert_eq!(grown.labels[far.row * 24 + far.col], CellLabel::Unreachable);
        let near = model.anchor.world_cell_to_grid(-5, 0).unwrap();
        assert_eq!(grown.labels[near.row * 24 + near.col], CellLabel::Traversable);
    }

    #[test]
    fn region_grow_no_seed_marks_all_unreachable() {
        let model = model_from_fn(10, 0.2, |_, _| 0.0);
        let limits = KinematicLimits::default();
        let obstacle = vec![false; 100];
        let (normals, pre) = compute_cost_map(&model, &obstacle, &limits);
        // Sensor claims the ground is 5 m below its actual elevation.
        let grown = region_grow(
            &pre,
            &model,
            &normals,
            &limits,
            GridIndex::new(4, 5),
            5.0 + limits.lidar_height,
            0.4,
        );
        assert!(grown
            .labels
            .iter()
            .all(|&l| l != CellLabel::Traversable));
    }

    #[test]
    fn traversable_cost_at_least_flat_minimum_on_concave_terrain() {
        // With upward-curving terrain every chord lies above both endpoint
        // tangent planes, so the projection terms stay nonnegative and flat
        // ground is the cost minimum. (Convex grade breaks can undercut it;
        // see travel_cost_rises_at_grade_change.)
        let bowl = model_from_fn(24, 0.2, |x, y| 0.03 * (x * x + y * y));
        let limits = KinematicLimits::default();
        let floor = limits.cos_similarity() / 3.0 - 1e-9;
        let obstacle = vec![false; 24 * 24];
        let (_, cm) = compute_cost_map(&bowl, &obstacle, &limits);
        let mut traversable = 0;
        for i in 0..cm.labels.len() {
            if cm.labels[i] == CellLabel::Traversable {
                assert!(cm.cost[i] >= floor, "cost {} below floor", cm.cost[i]);
                traversable += 1;
            }
        }
        assert!(traversable > 100);

        let flat = model_from_fn(24, 0.2, |_, _| 0.7);
        let (_, cm) = compute_cost_map(&flat, &obstacle, &limits);
        for i in 0..cm.labels.len() {
            if cm.labels[i] == CellLabel::Traversable {
                assert_relative_eq!(cm.cost[i], limits.cos_similarity() / 3.0, epsilon = 1e-12);
            }
        }
    }

    fn uniform_costmap(side: usize, cost: f64) -> CostMap {
        CostMap {
            side,
            cell_size: 0.2,
            labels: vec![CellLabel::Traversable; side * side],
            cost: vec![cost; side * side],
        }
    }

    #[test]
    fn plan_trivial_and_straight_line() {
        let cm = uniform_costmap(12, 0.33);
        let s = GridIndex::new(3, 3);
        let p = plan_path(&cm, s, s, 5.0).unwrap();
        assert_eq!(p.cells, vec![s]);
        assert_eq!(p.total_cost, 0.0);

        // On a uniform map the optimum uses max(|dr|,|dc|) steps.
        let g = GridIndex::new(9, 7);
        let p = plan_path(&cm, s, g, 5.0).unwrap();
        assert_eq!(p.cells.len() - 1, 6);
        let diag_steps = 4; // min(|dr|,|dc|)
        let straight = 2;
        let expect = diag_steps as f64 * (0.2 * std::f64::consts::SQRT_2 + 5.0 * 0.33)
            + straight as f64 * (0.2 + 5.0 * 0.33);
        assert_relative_eq!(p.total_cost, expect, epsilon = 1e-9);
    }

    #[test]
    fn plan_rejects_bad_endpoints() {
        let mut cm = uniform_costmap(8, 0.33);
        cm.labels[5 * 8 + 5] = CellLabel::Unreachable;
        assert!(plan_path(&cm, GridIndex::new(0, 0), GridIndex::new(5, 5), 5.0).is_none());
    }

    /// Plain Dijkstra over the same move rules.
    fn dijkstra_cost(cm: &CostMap, start: GridIndex, goal: GridIndex, lambda: f64) -> Option<f64> {
        let side = cm.side;
        let start_i = start.row * side + start.col;
        let goal_i = goal.row * side + goal.col;
        if cm.labels[start_i] != CellLabel::Traversable || cm.labels[goal_i] != CellLabel::Traversable
        {
            return None;
        }
        let mut dist = vec![f64::INFINITY; side * side];
        dist[start_i] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(HeapEntry { f: 0.0, g: 0.0, idx: start_i });
        while let Some(e) = heap.pop() {
            if e.g > dist[e.idx] {
                continue;
            }
            let (r, c) = (e.idx / side, e.idx % side);
            for &(dr, dc) in &MOVES {
                let nr = r as i64 + dr;
                let nc = c as i64 + dc;
                if nr < 0 || nc < 0 || nr as usize >= side || nc as usize >= side {
                    continue;
                }
                let (nr, nc) = (nr as usize, nc as usize);
                let ni = nr * side + nc;
                if cm.labels[ni] != CellLabel::Traversable {
                    continue;
                }
                let diagonal = dr != 0 && dc != 0;
                if diagonal
                    && (cm.labels[r * side + nc] != CellLabel::Traversable
                        || cm.labels[nr * side + c] != CellLabel::Traversable)
                {
                    continue;
                }
                let step = if diagonal {
                    cm.cell_size * std::f64::consts::SQRT_2
                } else {
                    cm.cell_size
                };
                let nd = dist[e.idx] + step + lambda * cm.cost[ni];
                if nd < dist[ni] {
                    dist[ni] = nd;
                    heap.push(HeapEntry { f: nd, g: nd, idx: ni });
                }
            }
        }
        if dist[goal_i].is_finite() {
            Some(dist[goal_i])
        } else {
            None
        }
    }

    #[test]
    fn plan_matches_dijkstra_on_random_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for case in 0..60 {
            let side = rng.gen_range(5..=30);
            let mut cm = uniform_costmap(side, 0.0);
            for i in 0..side * side {
                cm.cost[i] = rng.gen_range(0.3..1.0);
                if rng.gen_bool(0.25) {
                    cm.labels[i] = CellLabel::NonTraversable;
                }
            }
            let start = GridIndex::new(rng.gen_range(0..side), rng.gen_range(0..side));
            let goal = GridIndex::new(rng.gen_range(0..side), rng.gen_range(0..side));
            cm.labels[start.row * side + start.col] = CellLabel::Traversable;
            cm.labels[goal.row * side + goal.col] = CellLabel::Traversable;
            let lambda = 5.0;
            let ours = plan_path(&cm, start, goal, lambda);
            let oracle = dijkstra_cost(&cm, start, goal, lambda);
            match (ours, oracle) {
                (None, None) => {}
                (Some(p), Some(d)) => {
                    assert_eq!(p.total_cost, d, "case {case}: cost mismatch");
                }
                (a, b) => panic!("case {case}: feasibility mismatch {a:?} vs {b:?}"),
            }
        }
    }

    #[test]
    fn plan_prefers_low_cost_corridor() {
        // Rows 0-2 are rough (cost 0.9), row 4 is a flat corridor (0.33);
        // with lambda = 5 the optimum detours through the corridor.
        let side = 20;
        let mut cm = uniform_costmap(side, 0.9);
        for col in 0..side {
            cm.cost[4 * side + col] = 0.33;
        }
        let start = GridIndex::new(4, 0);
        let goal = GridIndex::new(4, 19);
        let p = plan_path(&cm, start, goal, 5.0).unwrap();
        for cell in &p.cells {
            assert_eq!(cell.row, 4, "path left the corridor at {cell:?}");
        }
        let oracle = dijkstra_cost(&cm, start, goal, 5.0).unwrap();
        assert_eq!(p.total_cost, oracle);
    }
}
