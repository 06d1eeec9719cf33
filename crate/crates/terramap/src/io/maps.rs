//! Emission and ingestion of grid maps: CSV with an invalid-cell sentinel,
//! 8-bit PGM previews, and path files.

use std::io::Write;
use std::path::Path;

use crate::geometry::GridIndex;
use crate::traversability::{CellLabel, CostMap};
use crate::{Error, Result};

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Parse(format!("{}: {e}", path.display()))
}

/// Write a square field as CSV: `side` rows of comma-separated values,
/// `sentinel` where invalid.
pub fn write_csv_map(
    path: &Path,
    side: usize,
    values: &[f64],
    valid: &[bool],
    sentinel: f64,
) -> Result<()> {
    assert_eq!(values.len(), side * side);
    assert_eq!(valid.len(), side * side);
    let mut out = String::new();
    for row in 0..side {
        for col in 0..side {
            if col > 0 {
                out.push(',');
            }
            let i = row * side + col;
            if valid[i] {
                out.push_str(&format!("{}", values[i]));
            } else {
                out.push_str(&format!("{sentinel}"));
            }
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Read a CSV map; cells equal to `sentinel` are invalid.
pub fn read_csv_map(path: &Path, sentinel: f64) -> Result<(usize, Vec<f64>, Vec<bool>)> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut values = Vec::new();
    let mut valid = Vec::new();
    let mut side = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|t| {
                t.trim().parse::<f64>().map_err(|_| {
                    Error::Parse(format!("{}: line {}: bad float '{t}'", path.display(), lineno + 1))
                })
            })
            .collect::<Result<_>>()?;
        if side == 0 {
            side = row.len();
        } else if row.len() != side {
            return Err(Error::Parse(format!(
                "{}: line {}: ragged row",
                path.display(),
                lineno + 1
            )));
        }
        for v in row {
            valid.push(v != sentinel);
            values.push(v);
        }
    }
    if values.len() != side * side {
        return Err(Error::Parse(format!(
            "{}: expected a square map, got {} values with side {}",
            path.display(),
            values.len(),
            side
        )));
    }
    Ok((side, values, valid))
}

/// Write an 8-bit PGM preview with linear min-max scaling over the valid
/// cells; the scaling is recorded in the comment line. Invalid cells are 0.
pub fn write_pgm(path: &Path, side: usize, values: &[f64], valid: &[bool]) -> Result<()> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..values.len() {
        if valid[i] {
            lo = lo.min(values[i]);
            hi = hi.max(values[i]);
        }
    }
    if !lo.is_finite() {
        lo = 0.0;
        hi = 0.0;
    }
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut bytes = Vec::with_capacity(side * side + 64);
    bytes.extend_from_slice(format!("P5\n# min={lo} max={hi} invalid=0\n{side} {side}\n255\n").as_bytes());
    for i in 0..side * side {
        let px = if valid[i] {
            // Valid cells occupy 1..=255 so invalid stays distinguishable.
            1 + ((values[i] - lo) / span * 254.0).round() as u8
        } else {
            0
        };
        bytes.push(px);
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&bytes))
        .map_err(|e| io_err(path, e))
}

/// Write a planned path as CSV rows of `row,col`.
pub fn write_path_csv(path: &Path, cells: &[GridIndex]) -> Result<()> {
    let mut out = String::from("row,col\n");
    for c in cells {
        out.push_str(&format!("{},{}\n", c.row, c.col));
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Serialize a cost map: traversable cells carry their cost, everything
/// else the sentinel.
pub fn write_costmap_csv(path: &Path, costmap: &CostMap, sentinel: f64) -> Result<()> {
    let valid: Vec<bool> = costmap
        .labels
        .iter()
        .map(|&l| l == CellLabel::Traversable)
        .collect();
    write_csv_map(path, costmap.side, &costmap.cost, &valid, sentinel)
}

/// Load a cost map written by [`write_costmap_csv`]; sentinel cells become
/// non-traversable.
pub fn read_costmap_csv(path: &Path, sentinel: f64, cell_size: f64) -> Result<CostMap> {
    let (side, values, valid) = read_csv_map(path, sentinel)?;
    let labels = valid
        .iter()
        .map(|&v| {
            if v {
                CellLabel::Traversable
            } else {
                CellLabel::NonTraversable
            }
        })
        .collect();
    let cost = values
        .iter()
        .zip(&valid)
        .map(|(&v, &ok)| if ok { v } else { f64::INFINITY })
        .collect();
    Ok(CostMap {
        side,
        cell_size,
        labels,
        cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_preserves_sentinel() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("elev.csv");
        let side = 3;
        let values = vec![0.5, 1.0, -2.0, 0.0, 3.25, 0.1, 0.2, 0.3, 0.4];
        let mut valid = vec![true; 9];
        valid[2] = false;
        write_csv_map(&path, side, &values, &valid, -999.0).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("-999"));
        let (s2, v2, ok2) = read_csv_map(&path, -999.0).unwrap();
        assert_eq!(s2, side);
        assert_eq!(ok2, valid);
        for i in 0..9 {
            if valid[i] {
                assert_eq!(v2[i], values[i]);
            }
        }
    }

    #[test]
    fn pgm_header_records_scaling() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("elev.pgm");
        let values = vec![0.0, 0.5, 1.0, 0.25];
        let valid = vec![true, true, true, false];
        write_pgm(&path, 2, &values, &valid).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let header = String::from_utf8_lossy(&bytes[..bytes.len() - 4]);
        assert!(header.starts_with("P5\n"));
        assert!(header.contains("min=0 max=1"));
        let pixels = &bytes[bytes.len() - 4..];
        assert_eq!(pixels[0], 1); // min maps to 1
        assert_eq!(pixels[2], 255); // max maps to 255
        assert_eq!(pixels[3], 0); // invalid maps to 0
    }

    #[test]
    fn costmap_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cost.csv");
        let costmap = CostMap {
            side: 2,
            cell_size: 0.2,
            labels: vec![
                CellLabel::Traversable,
                CellLabel::NonTraversable,
                CellLabel::Unreachable,
                CellLabel::Traversable,
            ],
            cost: vec![0.33, f64::INFINITY, f64::INFINITY, 0.4],
        };
        write_costmap_csv(&path, &costmap, -999.0).unwrap();
        let back = read_costmap_csv(&path, -999.0, 0.2).unwrap();
        assert_eq!(back.labels[0], CellLabel::Traversable);
        assert_eq!(back.labels[1], CellLabel::NonTraversable);
        assert_eq!(back.labels[2], CellLabel::NonTraversable);
        assert_eq!(back.cost[3], 0.4);
    }

    #[test]
    fn path_csv_format() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("path.csv");
        write_path_csv(&path, &[GridIndex::new(1, 2), GridIndex::new(3, 4)]).unwrap();
        assert_eq!(
            std::fs::read_to_string(&path).unwrap(),
            "row,col\n1,2\n3,4\n"
        );
    }
}
