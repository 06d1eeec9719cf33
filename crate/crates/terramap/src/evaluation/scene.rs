//! Deterministic synthetic scenes: analytic terrain built from primitives,
//! with semantic labels for ground-truth construction.

use serde::{Deserialize, Serialize};

use crate::evaluation::ground_truth::{GroundTruthMap, GtLabel};
use crate::geometry::{GridIndex, MapAnchor, Pose6};
use crate::Result;

/// Semantic label ids used by the synthetic generator. The traversable set
/// is `{TERRAIN}`; walls and slabs are obstacles, and curb faces form their
/// own non-traversable band.
pub const LABEL_TERRAIN: u32 = 1;
pub const LABEL_OBSTACLE: u32 = 2;
pub const LABEL_FACE: u32 = 3;

/// One terrain building block. Primitives are applied in order; setters
/// overwrite the height inside their footprint (last writer wins) and
/// adders modify it.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Primitive {
    /// Base plane at height `z` (everywhere).
    Plane { z: f64 },
    /// Linear grade along +x between `x_start` and `x_end`; constant at the
    /// end heights outside that band. Applies inside the band only.
    Ramp {
        x_start: f64,
        x_end: f64,
        z_start: f64,
        z_end: f64,
    },
    /// A curb: adds `height` everywhere with `x ≥ x_edge`. The vertical
    /// face follows the edge line.
    Step { x_edge: f64, height: f64 },
    /// Additive Gaussian hill.
    Hill {
        cx: f64,
        cy: f64,
        amplitude: f64,
        sigma: f64,
    },
    /// Raised block over a rectangle; adds `height` to the local terrain.
    /// Non-traversable.
    Wall {
        x0: f64,
        y0: f64,
        x1: f64,
        y1: f64,
        height: f64,
    },
    /// Flat surface at absolute height `z` over a rectangle (e.g. a parked
    /// vehicle's roof). Non-traversable.
    Slab {
        x0: f64,
        y0: f64,
        x1: f64,
        y1: f64,
        z: f64,
    },
}

impl Primitive {
    fn rect_contains(x0: f64, y0: f64, x1: f64, y1: f64, x: f64, y: f64) -> bool {
        x >= x0 && x < x1 && y >= y0 && y < y1
    }

    fn apply(&self, x: f64, y: f64, h: f64) -> f64 {
        match *self {
            Primitive::Plane { z } => z,
            Primitive::Ramp {
                x_start,
                x_end,
                z_start,
                z_end,
            } => {
                if x < x_start || x > x_end {
                    h
                } else {
                    z_start + (z_end - z_start) * (x - x_start) / (x_end - x_start)
                }
            }
            Primitive::Step { x_edge, height } => {
                if x >= x_edge {
                    h + height
                } else {
                    h
                }
            }
            Primitive::Hill {
                cx,
                cy,
                amplitude,
                sigma,
            } => {
                let d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
                h + amplitude * (-d2 / (2.0 * sigma * sigma)).exp()
            }
            Primitive::Wall {
                x0,
                y0,
                x1,
                y1,
                height,
            } => {
                if Self::rect_contains(x0, y0, x1, y1, x, y) {
                    h + height
                } else {
                    h
                }
            }
            Primitive::Slab { x0, y0, x1, y1, z } => {
                if Self::rect_contains(x0, y0, x1, y1, x, y) {
                    z
                } else {
                    h
                }
            }
        }
    }

    /// Semantic label of the surface at (x, y), if this primitive claims it.
    fn label(&self, x: f64, y: f64, cell_size: f64) -> Option<u32> {
        match *self {
            Primitive::Plane { .. } | Primitive::Ramp { .. } | Primitive::Hill { .. } => None,
            Primitive::Step { x_edge, .. } => {
                // Cells whose footprint straddles the face line.
                let local = x - x_edge;
                if local >= -cell_size && local < cell_size {
                    let cell_lo = (x / cell_size).floor() * cell_size;
                    if x_edge > cell_lo && x_edge <= cell_lo + cell_size {
                        Some(LABEL_FACE)
                    } else {
                        None
                    }
                } else {
                    None
                }
            }
            Primitive::Wall { x0, y0, x1, y1, .. } => {
                if Self::rect_contains(x0, y0, x1, y1, x, y) {
                    Some(LABEL_OBSTACLE)
                } else {
                    None
                }
            }
            Primitive::Slab { x0, y0, x1, y1, .. } => {
                if Self::rect_contains(x0, y0, x1, y1, x, y) {
                    Some(LABEL_OBSTACLE)
                } else {
                    None
                }
            }
        }
    }

    /// Contribution to a conservative upper bound on terrain height.
    fn height_bound(&self, current: f64) -> f64 {
        match *self {
            Primitive::Plane { z } => current.max(z),
            Primitive::Ramp { z_start, z_end, .. } => current.max(z_start.max(z_end)),
            Primitive::Step { height, .. } => current + height.max(0.0),
            Primitive::Hill { amplitude, .. } => current + amplitude.max(0.0),
            Primitive::Wall { height, .. } => current + height.max(0.0),
            Primitive::Slab { z, .. } => current.max(z),
        }
    }
}

/// Virtual sensor description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensorSpec {
    /// Beam elevation angles in degrees (negative looks down).
    pub beam_elevations_deg: Vec<f64>,
    /// Azimuth samples per revolution.
    pub azimuth_steps: usize,
    /// Gaussian range noise σ, meters.
    pub range_noise_sigma: f64,
    /// Maximum range, meters.
    pub max_range: f64,
    /// Bisection tolerance for the surface intersection, meters.
    pub surface_tolerance: f64,
}

impl SensorSpec {
    /// Evenly spaced downward-looking beams.
    pub fn fan(beams: usize, min_elev_deg: f64, max_elev_deg: f64, azimuth_steps: usize) -> Self {
        let beam_elevations_deg = (0..beams)
            .map(|i| {
                if beams == 1 {
                    min_elev_deg
                } else {
                    min_elev_deg + (max_elev_deg - min_elev_deg) * i as f64 / (beams - 1) as f64
                }
            })
            .collect();
        SensorSpec {
            beam_elevations_deg,
            azimuth_steps,
            range_noise_sigma: 0.0,
            max_range: 30.0,
            surface_tolerance: 1e-3,
        }
    }
}

/// One trajectory sample: position, yaw and timestamp.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub position: [f64; 3],
    pub yaw_deg: f64,
    pub timestamp: f64,
}

impl TrajectoryStep {
    pub fn pose(&self) -> Pose6 {
        Pose6::new(
            nalgebra::UnitQuaternion::from_euler_angles(0.0, 0.0, self.yaw_deg.to_radians()),
            nalgebra::Vector3::new(self.position[0], self.position[1], self.position[2]),
            self.timestamp,
        )
    }
}

/// Grid geometry the scene's ground truth is sampled on.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MapParams {
    /// Map side W, meters.
    pub width_m: f64,
    /// Cell side ω, meters.
    pub cell_size: f64,
}

impl MapParams {
    pub fn side_cells(&self) -> usize {
        (self.width_m / self.cell_size).round() as usize
    }
}

/// A complete synthetic experiment description; deterministic given `seed`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneSpec {
    pub name: String,
    pub primitives: Vec<Primitive>,
    pub seed: u64,
    pub sensor: SensorSpec,
    pub trajectory: Vec<TrajectoryStep>,
    pub map: MapParams,
}

/// The evaluated terrain: height function plus label lookup.
#[derive(Debug, Clone)]
pub struct SceneTerrain {
    primitives: Vec<Primitive>,
    cell_size: f64,
    height_bound: f64,
}

impl SceneTerrain {
    pub fn new(primitives: &[Primitive], cell_size: f64) -> Self {
        let mut bound = 0.0;
        for p in primitives {
            bound = p.height_bound(bound);
        }
        SceneTerrain {
            primitives: primitives.to_vec(),
            cell_size,
            height_bound: bound,
        }
    }

    /// Terrain height at (x, y).
    pub fn height(&self, x: f64, y: f64) -> f64 {
        let mut h = 0.0;
        for p in &self.primitives {
            h = p.apply(x, y, h);
        }
        h
    }

    /// Upper bound on the terrain height anywhere.
    pub fn height_bound(&self) -> f64 {
        self.height_bound
    }

    /// Semantic label of the surface at (x, y); later primitives win.
    pub fn label(&self, x: f64, y: f64) -> u32 {
        let mut label = LABEL_TERRAIN;
        for p in &self.primitives {
            if let Some(l) = p.label(x, y, self.cell_size) {
                label = l;
            }
        }
        label
    }

    /// Sample the ground truth on a grid anchor: labels from primitive
    /// semantics, elevations from the analytic height at cell centers.
    pub fn ground_truth_on(&self, anchor: &MapAnchor) -> GroundTruthMap {
        let side = anchor.side_cells;
        let mut labels = vec![GtLabel::Empty; side * side];
        let mut elevation = vec![0.0; side * side];
        let mut elev_valid = vec![false; side * side];
        for row in 0..side {
            for col in 0..side {
                let [x, y] = anchor.cell_center(GridIndex::new(row, col));
                let i = row * side + col;
                labels[i] = match self.label(x, y) {
                    LABEL_TERRAIN => GtLabel::Traversable,
                    _ => GtLabel::NonTraversable,
                };
                if labels[i] == GtLabel::Traversable {
                    elevation[i] = self.height(x, y);
                    elev_valid[i] = true;
                }
            }
        }
        GroundTruthMap {
            side,
            cell_size: anchor.cell_size,
            labels,
            elevation,
            elev_valid,
        }
    }
}

/// Build the analytic terrain and its ground truth sampled around the first
/// trajectory pose.
pub fn synth_scene(spec: &SceneSpec) -> Result<(SceneTerrain, GroundTruthMap)> {
    let terrain = SceneTerrain::new(&spec.primitives, spec.map.cell_size);
    let start = spec
        .trajectory
        .first()
        .map(|s| [s.position[0], s.position[1]])
        .unwrap_or([0.0, 0.0]);
    let anchor = MapAnchor::new(start, spec.map.cell_size, spec.map.side_cells())?;
    let gt = terrain.ground_truth_on(&anchor);
    Ok((terrain, gt))
}

fn straight_trajectory(frames: usize, start: [f64; 3], velocity: [f64; 2], dt: f64) -> Vec<TrajectoryStep> {
    (0..frames)
        .map(|i| TrajectoryStep {
            position: [
                start[0] + velocity[0] * dt * i as f64,
                start[1] + velocity[1] * dt * i as f64,
                start[2],
            ],
            yaw_deg: 0.0,
            timestamp: dt * i as f64,
        })
        .collect()
}

impl SceneSpec {
    /// Named desk-scale scenes.
    ///
    /// - `flat`: noise-free level ground; the fixed-point scene.
    /// - `flat_noisy`: level ground with 2 cm range noise.
    /// - `curb`: road and raised sidewalk split by a 0.15 m curb, plus a
    ///   parked-car roof slab; the edge-preservation scene.
    /// - `two_region`: flat field split by a long curb; reachability scene.
    /// - `hills`: smooth undulating ground.
    /// - `perf`: dense sensor over mixed terrain for latency measurement.
    pub fn builtin(name: &str, seed: u64) -> Option<SceneSpec> {
        let map = MapParams {
            width_m: 16.0,
            cell_size: 0.2,
        };
        let spec = match name {
            "flat" => SceneSpec {
                name: name.into(),
                primitives: vec![Primitive::Plane { z: 0.0 }],
                seed,
                sensor: SensorSpec {
                    surface_tolerance: 1e-9,
                    max_range: 12.0,
                    ..SensorSpec::fan(24, -80.0, -8.0, 360)
                },
                trajectory: straight_trajectory(6, [0.0, 0.0, 2.0], [2.5, 0.0], 0.1),
                map,
            },
            "flat_noisy" => SceneSpec {
                name: name.into(),
                primitives: vec![Primitive::Plane { z: 0.0 }],
                seed,
                sensor: SensorSpec {
                    range_noise_sigma: 0.02,
                    max_range: 12.0,
                    ..SensorSpec::fan(24, -80.0, -8.0, 360)
                },
                trajectory: straight_trajectory(6, [0.0, 0.0, 2.0], [2.5, 0.0], 0.1),
                map,
            },
            "curb" => SceneSpec {
                name: name.into(),
                primitives: vec![
                    Primitive::Plane { z: 0.0 },
                    // Sidewalk 0.15 m above the road, face mid-cell.
                    Primitive::Step {
                        x_edge: 2.5,
                        height: 0.15,
                    },
                    // Parked car against the curb: its roof reads as a flat
                    // surface 1.5 m up and initially passes the min-max test.
                    Primitive::Slab {
                        x0: 3.0,
                        y0: -2.6,
                        x1: 4.8,
                        y1: -0.6,
                        z: 1.5,
                    },
                ],
                seed,
                sensor: SensorSpec {
                    surface_tolerance: 1e-6,
                    max_range: 14.0,
                    ..SensorSpec::fan(32, -75.0, -6.0, 480)
                },
                trajectory: straight_trajectory(8, [0.0, 0.0, 2.0], [0.0, 4.5], 0.1),
                map,
            },
            "two_region" => SceneSpec {
                name: name.into(),
                primitives: vec![
                    Primitive::Plane { z: 0.0 },
                    Primitive::Step {
                        x_edge: 2.5,
                        height: 0.15,
                    },
                ],
                seed,
                sensor: SensorSpec {
                    max_range: 14.0,
                    ..SensorSpec::fan(32, -75.0, -6.0, 480)
                },
                trajectory: straight_trajectory(6, [0.0, 0.0, 2.0], [0.0, 4.0], 0.1),
                map,
            },
            "hills" => SceneSpec {
                name: name.into(),
                primitives: vec![
                    Primitive::Plane { z: 0.0 },
                    Primitive::Hill {
                        cx: 3.0,
                        cy: 2.0,
                        amplitude: 0.5,
                        sigma: 2.0,
                    },
                    Primitive::Hill {
                        cx: -3.0,
                        cy: -2.0,
                        amplitude: 0.35,
                        sigma: 1.6,
                    },
                ],
                seed,
                sensor: SensorSpec {
                    range_noise_sigma: 0.01,
                    max_range: 14.0,
                    ..SensorSpec::fan(32, -75.0, -6.0, 480)
                },
                trajectory: straight_trajectory(8, [0.0, 0.0, 2.0], [3.0, 2.0], 0.1),
                map,
            },
            "perf" => SceneSpec {
                name: name.into(),
                primitives: vec![
                    Primitive::Plane { z: 0.0 },
                    Primitive::Hill {
                        cx: 6.0,
                        cy: 4.0,
                        amplitude: 0.6,
                        sigma: 3.0,
                    },
                    Primitive::Step {
                        x_edge: -5.1,
                        height: 0.15,
                    },
                ],
                seed,
                sensor: SensorSpec {
                    range_noise_sigma: 0.01,
                    max_range: 25.0,
                    ..SensorSpec::fan(64, -80.0, -2.5, 1875)
                },
                trajectory: straight_trajectory(5, [0.0, 0.0, 2.0], [5.0, 0.0], 0.1),
                map: MapParams {
                    width_m: 80.0,
                    cell_size: 0.2,
                },
            },
            _ => return None,
        };
        Some(spec)
    }

    pub fn from_json(text: &str) -> Result<SceneSpec> {
        serde_json::from_str(text).map_err(|e| crate::Error::Parse(format!("scene spec: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene spec serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plane_scene_all_traversable() {
        let spec = SceneSpec::builtin("flat", 1).unwrap();
        let (terrain, gt) = synth_scene(&spec).unwrap();
        assert_eq!(terrain.height(3.0, -2.0), 0.0);
        assert!(gt.labels.iter().all(|&l| l == GtLabel::Traversable));
        assert!(gt.elevation.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn curb_scene_marks_face_cells() {
        let spec = SceneSpec::builtin("curb", 1).unwrap();
        let (terrain, gt) = synth_scene(&spec).unwrap();
        assert_eq!(terrain.height(2.49, 0.0), 0.0);
        assert_eq!(terrain.height(2.51, 0.0), 0.15);
        // The cell containing x = 2.5 is the face band.
        assert_eq!(terrain.label(2.45, 0.0), LABEL_FACE);
        assert_eq!(terrain.label(2.2, 0.0), LABEL_TERRAIN);
        assert_eq!(terrain.label(2.75, 0.0), LABEL_TERRAIN);
        // Roof cells are obstacles.
        assert_eq!(terrain.label(4.0, -1.5), LABEL_OBSTACLE);
        let side = gt.side;
        let non_trav = gt
            .labels
            .iter()
            .filter(|&&l| l == GtLabel::NonTraversable)
            .count();
        assert!(non_trav > side); // at least the face column plus the roof
    }

    #[test]
    fn scene_deterministic_serialization_roundtrip() {
        let spec = SceneSpec::builtin("hills", 7).unwrap();
        let json = spec.to_json();
        let back = SceneSpec::from_json(&json).unwrap();
        assert_eq!(back.to_json(), json);
        let (t1, g1) = synth_scene(&spec).unwrap();
        let (t2, g2) = synth_scene(&back).unwrap();
        assert_eq!(t1.height(1.234, -0.77), t2.height(1.234, -0.77));
        assert_eq!(g1.elevation, g2.elevation);
    }

    #[test]
    fn last_writer_wins_on_overlap() {
        let prims = vec![
            Primitive::Plane { z: 0.0 },
            Primitive::Slab {
                x0: -1.0,
                y0: -1.0,
                x1: 1.0,
                y1: 1.0,
                z: 2.0,
            },
            Primitive::Slab {
                x0: 0.0,
                y0: -1.0,
                x1: 1.0,
                y1: 1.0,
                z: 3.0,
            },
        ];
        let terrain = SceneTerrain::new(&prims, 0.2);
        assert_eq!(terrain.height(-0.5, 0.0), 2.0);
        assert_eq!(terrain.height(0.5, 0.0), 3.0);
    }
}
