//! The sequence manifest: one key-value file naming the pose file, the
//! frame files and optional labels, so real and synthetic sequences share a
//! single ingestion path.

use std::path::{Path, PathBuf};

use crate::geometry::Pose6;
use crate::io::kitti;
use crate::preprocess::ScanFrame;
use crate::{Error, Result};

/// Point-cloud file format named in the manifest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointFormat {
    /// Binary float32 quadruples (`.bin`).
    Bin,
    /// CSV with header `x,y,z[,t]`.
    Csv,
}

/// Parsed manifest.
///
/// ```text
/// poses = poses.txt
/// frames = velodyne          # directory; files sorted by name
/// labels = labels            # optional directory
/// format = bin               # bin | csv
/// intensity_is_time = false  # bin intensity channel holds scan fractions
/// ```
#[derive(Debug, Clone)]
pub struct Manifest {
    pub poses_path: PathBuf,
    pub frames_dir: PathBuf,
    pub labels_dir: Option<PathBuf>,
    pub format: PointFormat,
    /// For synthetic `.bin` sequences: interpret the intensity channel as
    /// the per-point scan-time fraction used for motion compensation.
    pub intensity_is_time: bool,
}

impl Manifest {
    pub fn from_file(path: &Path) -> Result<Manifest> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut poses = None;
        let mut frames = None;
        let mut labels = None;
        let mut format = PointFormat::Bin;
        let mut intensity_is_time = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse(format!(
                    "{}: line {}: expected 'key = value'",
                    path.display(),
                    lineno + 1
                )));
            };
            let value = value.trim();
            match key.trim() {
                "poses" => poses = Some(base.join(value)),
                "frames" => frames = Some(base.join(value)),
                "labels" => labels = Some(base.join(value)),
                "format" => {
                    format = match value {
                        "bin" => PointFormat::Bin,
                        "csv" => PointFormat::Csv,
                        other => {
                            return Err(Error::Parse(format!(
                                "{}: unknown format '{other}'",
                                path.display()
                            )))
                        }
                    }
                }
                "intensity_is_time" => {
                    intensity_is_time = matches!(value, "true" | "1" | "yes");
                }
                other => {
                    return Err(Error::Parse(format!(
                        "{}: unknown manifest key '{other}'",
                        path.display()
                    )))
                }
            }
        }
        Ok(Manifest {
            poses_path: poses
                .ok_or_else(|| Error::Parse(format!("{}: missing 'poses'", path.display())))?,
            frames_dir: frames
                .ok_or_else(|| Error::Parse(format!("{}: missing 'frames'", path.display())))?,
            labels_dir: labels,
            format,
            intensity_is_time,
        })
    }

    /// Open the sequence: list frame files, read poses, pair them up.
    ///
    /// Frames beyond the pose count are skipped with a warning (a frame
    /// without a pose cannot be integrated).
    pub fn open(&self) -> Result<SequenceSource> {
        let mut frame_paths = list_sorted(&self.frames_dir, match self.format {
            PointFormat::Bin => "bin",
            PointFormat::Csv => "csv",
        })?;
        let poses = kitti::read_poses(&self.poses_path)?;
        if frame_paths.len() > poses.len() {
            eprintln!(
                "warning: {} frames but {} poses; skipping unmatched frames",
                frame_paths.len(),
                poses.len()
            );
            frame_paths.truncate(poses.len());
        }
        let label_paths = match &self.labels_dir {
            Some(dir) => {
                let mut labels = list_sorted(dir, "label")?;
                if labels.len() < frame_paths.len() {
                    return Err(Error::Parse(format!(
                        "{}: {} label files for {} frames",
                        dir.display(),
                        labels.len(),
                        frame_paths.len()
                    )));
                }
                labels.truncate(frame_paths.len());
                Some(labels)
            }
            None => None,
        };
        Ok(SequenceSource {
            frame_paths,
            poses,
            label_paths,
            format: self.format,
            intensity_is_time: self.intensity_is_time,
        })
    }
}

fn list_sorted(dir: &Path, extension: &str) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| Error::Parse(format!("{}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some(extension))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Parse(format!(
            "{}: no .{extension} files",
            dir.display()
        )));
    }
    Ok(paths)
}

/// An opened sequence, loading frames on demand.
#[derive(Debug, Clone)]
pub struct SequenceSource {
    pub frame_paths: Vec<PathBuf>,
    pub poses: Vec<Pose6>,
    pub label_paths: Option<Vec<PathBuf>>,
    pub format: PointFormat,
    pub intensity_is_time: bool,
}

impl SequenceSource {
    pub fn len(&self) -> usize {
        self.frame_paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frame_paths.is_empty()
    }

    /// Load one frame (and its labels when present).
    pub fn load(&self, index: usize) -> Result<(ScanFrame, Option<Vec<u32>>)> {
        let path = &self.frame_paths[index];
        let pose = self.poses[index];
        let scan = match self.format {
            PointFormat::Bin => {
                let (points, intensity) = kitti::read_point_bin(path)?;
                let scan = ScanFrame::new(points, pose, index as u32);
                if self.intensity_is_time {
                    scan.with_fractions(intensity.iter().map(|&i| i as f64).collect())
                } else {
                    scan
                }
            }
            PointFormat::Csv => {
                let (points, fractions) = kitti::read_point_csv(path)?;
                ScanFrame::new(points, pose, index as u32).with_fractions(fractions)
            }
        };
        let labels = match &self.label_paths {
            Some(paths) => {
                let raw = kitti::read_labels(&paths[index])?;
                if raw.len() != scan.points.len() {
                    return Err(Error::Parse(format!(
                        "{}: {} labels for {} points",
                        paths[index].display(),
                        raw.len(),
                        scan.points.len()
                    )));
                }
                Some(raw.iter().map(|&l| kitti::semantic_id(l)).collect())
            }
            None => None,
        };
        Ok((scan, labels))
    }
}
