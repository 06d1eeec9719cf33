//! Odometry-benchmark style binary point clouds, per-point labels and pose
//! files.
//!
//! - `.bin` clouds: little-endian float32 quadruples `x, y, z, intensity`.
//! - `.label` files: little-endian uint32 per point; the lower 16 bits are
//!   the semantic id.
//! - `poses.txt`: one frame per line, 12 floats forming the row-major 3×4
//!   `[R|t]` matrix.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{Matrix3, Vector3};

use crate::geometry::{Point3, Pose6};
use crate::{Error, Result};

/// Frame period assumed when pose files carry no timestamps, seconds.
pub const DEFAULT_FRAME_PERIOD: f64 = 0.1;

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Parse(format!("{}: {e}", path.display()))
}

/// Read a binary cloud; returns points and per-point intensities.
pub fn read_point_bin(path: &Path) -> Result<(Vec<Point3>, Vec<f32>)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| io_err(path, e))?;
    if bytes.len() % 16 != 0 {
        return Err(Error::Parse(format!(
            "{}: length {} is not a multiple of 16",
            path.display(),
            bytes.len()
        )));
    }
    let n = bytes.len() / 16;
    let mut points = Vec::with_capacity(n);
    let mut intensity = Vec::with_capacity(n);
    for chunk in bytes.chunks_exact(16) {
        let f = |o: usize| f32::from_le_bytes([chunk[o], chunk[o + 1], chunk[o + 2], chunk[o + 3]]);
        points.push(Point3::new(f(0) as f64, f(4) as f64, f(8) as f64));
        intensity.push(f(12));
    }
    Ok((points, intensity))
}

pub fn write_point_bin(path: &Path, points: &[Point3], intensity: &[f32]) -> Result<()> {
    assert_eq!(points.len(), intensity.len());
    let mut bytes = Vec::with_capacity(points.len() * 16);
    for (p, &i) in points.iter().zip(intensity) {
        bytes.extend_from_slice(&(p.x as f32).to_le_bytes());
        bytes.extend_from_slice(&(p.y as f32).to_le_bytes());
        bytes.extend_from_slice(&(p.z as f32).to_le_bytes());
        bytes.extend_from_slice(&i.to_le_bytes());
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&bytes))
        .map_err(|e| io_err(path, e))
}

/// Read a label file; full 32-bit values (lower 16 bits = semantic id).
pub fn read_labels(path: &Path) -> Result<Vec<u32>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| io_err(path, e))?;
    if bytes.len() % 4 != 0 {
        return Err(Error::Parse(format!(
            "{}: length {} is not a multiple of 4",
            path.display(),
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

pub fn write_labels(path: &Path, labels: &[u32]) -> Result<()> {
    let mut bytes = Vec::with_capacity(labels.len() * 4);
    for l in labels {
        bytes.extend_from_slice(&l.to_le_bytes());
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&bytes))
        .map_err(|e| io_err(path, e))
}

/// Semantic id of a raw label value.
pub fn semantic_id(label: u32) -> u32 {
    label & 0xFFFF
}

/// Read a poses file; timestamps are synthesized at the default frame
/// period.
pub fn read_poses(path: &Path) -> Result<Vec<Pose6>> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut poses = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("{}: line {}: bad float '{t}'", path.display(), lineno + 1)))
            })
            .collect::<Result<_>>()?;
        if vals.len() != 12 {
            return Err(Error::Parse(format!(
                "{}: line {}: expected 12 floats, got {}",
                path.display(),
                lineno + 1,
                vals.len()
            )));
        }
        let rot = Matrix3::new(
            vals[0], vals[1], vals[2], vals[4], vals[5], vals[6], vals[8], vals[9], vals[10],
        );
        let t = Vector3::new(vals[3], vals[7], vals[11]);
        poses.push(Pose6::from_matrix(
            rot,
            t,
            poses.len() as f64 * DEFAULT_FRAME_PERIOD,
        )?);
    }
    Ok(poses)
}

pub fn write_poses(path: &Path, poses: &[Pose6]) -> Result<()> {
    let mut out = String::new();
    for pose in poses {
        let m = pose.rotation.to_rotation_matrix();
        let m = m.matrix();
        let t = pose.translation;
        let row = [
            m[(0, 0)], m[(0, 1)], m[(0, 2)], t.x,
            m[(1, 0)], m[(1, 1)], m[(1, 2)], t.y,
            m[(2, 0)], m[(2, 1)], m[(2, 2)], t.z,
        ];
        let line: Vec<String> = row.iter().map(|v| format!("{v:.9e}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Read a CSV cloud with header `x,y,z` or `x,y,z,t`; `t` is the per-point
/// scan-time fraction.
pub fn read_point_csv(path: &Path) -> Result<(Vec<Point3>, Vec<f64>)> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("").trim().to_ascii_lowercase();
    let has_t = match header.as_str() {
        "x,y,z" => false,
        "x,y,z,t" => true,
        other => {
            return Err(Error::Parse(format!(
                "{}: expected header 'x,y,z[,t]', got '{other}'",
                path.display()
            )))
        }
    };
    let mut points = Vec::new();
    let mut fractions = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|t| {
                t.trim().parse::<f64>().map_err(|_| {
                    Error::Parse(format!("{}: line {}: bad float '{t}'", path.display(), lineno + 2))
                })
            })
            .collect::<Result<_>>()?;
        let expected = if has_t { 4 } else { 3 };
        if vals.len() != expected {
            return Err(Error::Parse(format!(
                "{}: line {}: expected {} values",
                path.display(),
                lineno + 2,
                expected
            )));
        }
        points.push(Point3::new(vals[0], vals[1], vals[2]));
        if has_t {
            fractions.push(vals[3]);
        }
    }
    Ok((points, fractions))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::UnitQuaternion;

    #[test]
    fn bin_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("000000.bin");
        let points = vec![Point3::new(1.5, -2.25, 0.125), Point3::new(0.0, 3.0, -1.0)];
        let intensity = vec![0.5f32, 0.25];
        write_point_bin(&path, &points, &intensity).unwrap();
        let (p2, i2) = read_point_bin(&path).unwrap();
        assert_eq!(points, p2);
        assert_eq!(intensity, i2);
    }

    #[test]
    fn labels_round_trip_and_semantic_mask() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("000000.label");
        let labels = vec![40u32, (7 << 16) | 72, 0xFFFF_FFFF];
        write_labels(&path, &labels).unwrap();
        let back = read_labels(&path).unwrap();
        assert_eq!(labels, back);
        assert_eq!(semantic_id(back[1]), 72);
        assert_eq!(semantic_id(back[2]), 0xFFFF);
    }

    #[test]
    fn poses_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("poses.txt");
        let poses = vec![
            Pose6::identity(),
            Pose6::new(
                UnitQuaternion::from_euler_angles(0.0, 0.1, 0.5),
                Vector3::new(1.0, 2.0, 3.0),
                DEFAULT_FRAME_PERIOD,
            ),
        ];
        write_poses(&path, &poses).unwrap();
        let back = read_poses(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert!((back[1].translation - poses[1].translation).norm() < 1e-8);
        assert!(back[1].rotation.angle_to(&poses[1].rotation) < 1e-8);
        assert_eq!(back[1].timestamp, DEFAULT_FRAME_PERIOD);
    }

    #[test]
    fn csv_round_trip_with_fractions() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scan.csv");
        std::fs::write(&path, "x,y,z,t\n1.0,2.0,3.0,0.25\n-1.0,0.5,0.0,0.75\n").unwrap();
        let (points, fractions) = read_point_csv(&path).unwrap();
        assert_eq!(points.len(), 2);
        assert_eq!(fractions, vec![0.25, 0.75]);
        assert_eq!(points[1], Point3::new(-1.0, 0.5, 0.0));

        std::fs::write(&path, "x,y,z\n1.0,2.0,3.0\n").unwrap();
        let (points, fractions) = read_point_csv(&path).unwrap();
        assert_eq!(points.len(), 1);
        assert!(fractions.is_empty());
    }
}
