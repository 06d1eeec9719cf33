//! Virtual spinning LiDAR over an analytic heightfield.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::evaluation::scene::{SceneTerrain, SensorSpec};
use crate::geometry::{Point3, Pose6};
use crate::preprocess::ScanFrame;

/// Cast one ray against the terrain: coarse march plus bisection.
///
/// Returns the hit range, or `None` when the ray never crosses the surface
/// within `max_range`.
fn cast_ray(
    terrain: &SceneTerrain,
    origin: [f64; 3],
    dir: [f64; 3],
    max_range: f64,
    tolerance: f64,
) -> Option<f64> {
    // Rays that never descend below the terrain bound cannot hit.
    if dir[2] >= 0.0 && origin[2] > terrain.height_bound() {
        return None;
    }
    let above = |t: f64| {
        let x = origin[0] + t * dir[0];
        let y = origin[1] + t * dir[1];
        let z = origin[2] + t * dir[2];
        z - terrain.height(x, y)
    };
    let mut t_prev = 0.0;
    let mut f_prev = above(0.0);
    if f_prev <= 0.0 {
        return None; // sensor at or below the surface
    }
    let mut t = 0.0;
    while t < max_range {
        // The step grows with range; close-in geometry is resolved finely.
        let step = (0.015 * t).clamp(0.05, 0.4);
        t = (t + step).min(max_range);
        let f = above(t);
        if f <= 0.0 {
            // Bisect the crossing.
            let (mut lo, mut hi) = (t_prev, t);
            while hi - lo > tolerance {
                let mid = 0.5 * (lo + hi);
                if above(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Some(0.5 * (lo + hi));
        }
        t_prev = t;
        f_prev = f;
    }
    let _ = f_prev;
    None
}

/// Simulate one spinning-scan frame from `pose`.
///
/// Beams sweep azimuth uniformly over one revolution; each return carries a
/// scan-time fraction equal to its azimuth phase, so synthetic scans can be
/// motion-compensated exactly. Gaussian range noise is applied along the
/// ray. Points are expressed in the sensor frame.
pub fn simulate_lidar(
    terrain: &SceneTerrain,
    pose: &Pose6,
    sensor: &SensorSpec,
    frame_id: u32,
    rng: &mut ChaCha8Rng,
) -> ScanFrame {
    let origin = [pose.translation.x, pose.translation.y, pose.translation.z];
    let mut points = Vec::new();
    let mut fractions = Vec::new();
    for az_step in 0..sensor.azimuth_steps {
        let fraction = az_step as f64 / sensor.azimuth_steps as f64;
        let azimuth = 2.0 * std::f64::consts::PI * fraction;
        let (sin_az, cos_az) = azimuth.sin_cos();
        for &elev_deg in &sensor.beam_elevations_deg {
            let (sin_el, cos_el) = elev_deg.to_radians().sin_cos();
            // Beam direction in the sensor frame, rotated to the world.
            let local = nalgebra::Vector3::new(cos_el * cos_az, cos_el * sin_az, sin_el);
            let world = pose.rotation * local;
            let Some(range) = cast_ray(
                terrain,
                origin,
                [world.x, world.y, world.z],
                sensor.max_range,
                sensor.surface_tolerance,
            ) else {
                continue;
            };
            let noisy = if sensor.range_noise_sigma > 0.0 {
                let gauss: f64 = sample_standard_normal(rng);
                (range + gauss * sensor.range_noise_sigma).max(0.0)
            } else {
                range
            };
            if noisy > sensor.max_range {
                continue;
            }
            points.push(Point3::new(
                local.x * noisy,
                local.y * noisy,
                local.z * noisy,
            ));
            fractions.push(fraction);
        }
    }
    ScanFrame::new(points, *pose, frame_id).with_fractions(fractions)
}

/// Box–Muller standard normal; keeps the generator stream independent of
/// `rand_distr` version details.
fn sample_standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
