//! Traversability and elevation quality metrics.

use serde::{Deserialize, Serialize};

use crate::evaluation::ground_truth::{GroundTruthMap, GtLabel};
use crate::traversability::{CellLabel, CostMap, TerrainModel};
use crate::{Error, Result};

/// Sentinel written for cells without a valid elevation.
pub const INVALID_ELEVATION: f64 = -999.0;

/// Precision / recall / F1 over traversable cells.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TraversabilityMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub n_estimated: usize,
    pub n_ground_truth: usize,
}

/// Elevation accuracy and coverage over ground-truth traversable cells.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ElevationMetrics {
    /// Mean absolute deviation (the per-cell root of the squared error,
    /// averaged).
    pub error_mean_abs: f64,
    /// Conventional root-mean-squared error, reported alongside.
    pub error_rmse: f64,
    pub coverage: f64,
    pub n_ground_truth: usize,
}

/// One evaluated frame, emitted as a JSON line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    pub frame: u32,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub error_mean_abs: f64,
    pub error_rmse: f64,
    pub coverage: f64,
}

/// Precision, recall and F1 of the estimated traversable set.
///
/// `P` counts over the estimated traversable cells, `R` over the
/// ground-truth traversable cells. Whenever either set is empty the metric
/// is undefined and signaled as an error. `F1` is 0 by convention when
/// `P + R = 0`.
pub fn metrics_traversability(
    est: &CostMap,
    gt: &GroundTruthMap,
) -> Result<TraversabilityMetrics> {
    if est.side != gt.side {
        return Err(Error::InvalidArgument(format!(
            "grid geometry mismatch: {} vs {}",
            est.side, gt.side
        )));
    }
    let mut n_est = 0usize;
    let mut n_gt = 0usize;
    let mut both = 0usize;
    for i in 0..est.labels.len() {
        let e = est.labels[i] == CellLabel::Traversable;
        let g = gt.labels[i] == GtLabel::Traversable;
        n_est += e as usize;
        n_gt += g as usize;
        both += (e && g) as usize;
    }
    if n_est == 0 {
        return Err(Error::Undefined("no estimated traversable cells".into()));
    }
    if n_gt == 0 {
        return Err(Error::Undefined("no ground-truth traversable cells".into()));
    }
    let precision = both as f64 / n_est as f64;
    let recall = both as f64 / n_gt as f64;
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(TraversabilityMetrics {
        precision,
        recall,
        f1,
        n_estimated: n_est,
        n_ground_truth: n_gt,
    })
}

/// Coverage and elevation error over ground-truth traversable cells.
///
/// Coverage is the fraction of ground-truth traversable cells where the
/// estimate is valid. By default invalid estimates are excluded from the
/// error sums (they are already penalized through coverage);
/// `count_invalid_in_error` instead charges them the sentinel deviation
/// `|sentinel − H_gt|`.
pub fn metrics_elevation(
    est: &TerrainModel,
    gt: &GroundTruthMap,
    count_invalid_in_error: bool,
) -> Result<ElevationMetrics> {
    if est.side() != gt.side {
        return Err(Error::InvalidArgument(format!(
            "grid geometry mismatch: {} vs {}",
            est.side(),
            gt.side
        )));
    }
    let mut n_gt = 0usize;
    let mut covered = 0usize;
    let mut abs_sum = 0.0f64;
    let mut sq_sum = 0.0f64;
    let mut counted = 0usize;
    for i in 0..gt.labels.len() {
        if gt.labels[i] != GtLabel::Traversable || !gt.elev_valid[i] {
            continue;
        }
        n_gt += 1;
        if est.valid[i] {
            covered += 1;
            let diff = est.elevation[i] - gt.elevation[i];
            abs_sum += diff.abs();
            sq_sum += diff * diff;
            counted += 1;
        } else if count_invalid_in_error {
            let diff = INVALID_ELEVATION - gt.elevation[i];
            abs_sum += diff.abs();
            sq_sum += diff * diff;
            counted += 1;
        }
    }
    if n_gt == 0 {
        return Err(Error::Undefined("no ground-truth traversable cells".into()));
    }
    let denom = if count_invalid_in_error { n_gt } else { counted.max(1) };
    Ok(ElevationMetrics {
        error_mean_abs: abs_sum / denom as f64,
        error_rmse: (sq_sum / denom as f64).sqrt(),
        coverage: covered as f64 / n_gt as f64,
        n_ground_truth: n_gt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::MapAnchor;
    use approx::assert_relative_eq;

    fn gt_all_traversable(side: usize, z: f64) -> GroundTruthMap {
        GroundTruthMap {
            side,
            cell_size: 0.2,
            labels: vec![GtLabel::Traversable; side * side],
            elevation: vec![z; side * side],
            elev_valid: vec![true; side * side],
        }
    }

    fn costmap_from_mask(side: usize, traversable: impl Fn(usize, usize) -> bool) -> CostMap {
        let mut labels = vec![CellLabel::NonTraversable; side * side];
        let mut cost = vec![f64::INFINITY; side * side];
        for r in 0..side {
            for c in 0..side {
                if traversable(r, c) {
                    labels[r * side + c] = CellLabel::Traversable;
                    cost[r * side + c] = 0.33;
                }
            }
        }
        CostMap {
            side,
            cell_size: 0.2,
            labels,
            cost,
        }
    }

    fn model_const(side: usize, z: f64) -> TerrainModel {
        TerrainModel {
            anchor: MapAnchor::new([0.0, 0.0], 0.2, side).unwrap(),
            elevation: vec![z; side * side],
            variance: vec![1e-4; side * side],
            valid: vec![true; side * side],
        }
    }

    #[test]
    fn fixed_point_when_estimate_equals_truth() {
        let gt = gt_all_traversable(8, 0.3);
        let est = costmap_from_mask(8, |_, _| true);
        let m = metrics_traversability(&est, &gt).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));

        let model = model_const(8, 0.3);
        let e = metrics_elevation(&model, &gt, false).unwrap();
        assert_eq!(e.error_mean_abs, 0.0);
        assert_eq!(e.error_rmse, 0.0);
        assert_eq!(e.coverage, 1.0);
    }

    #[test]
    fn half_coverage_no_false_positives() {
        let gt = gt_all_traversable(8, 0.0);
        // Estimate covers the left half only.
        let est = costmap_from_mask(8, |_, c| c < 4);
        let m = metrics_traversability(&est, &gt).unwrap();
        assert_relative_eq!(m.precision, 1.0);
        assert_relative_eq!(m.recall, 0.5);
        assert_relative_eq!(m.f1, 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn disjoint_sets_give_zero_f1() {
        let side = 8;
        let mut gt = gt_all_traversable(side, 0.0);
        // Ground truth traversable on the left, estimate on the right.
        for r in 0..side {
            for c in 4..side {
                gt.labels[r * side + c] = GtLabel::NonTraversable;
            }
        }
        let est = costmap_from_mask(side, |_, c| c >= 4);
        let m = metrics_traversability(&est, &gt).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn empty_sets_signal_undefined() {
        let gt = gt_all_traversable(4, 0.0);
        let est = costmap_from_mask(4, |_, _| false);
        assert!(metrics_traversability(&est, &gt).is_err());

        let mut gt_empty = gt_all_traversable(4, 0.0);
        for l in gt_empty.labels.iter_mut() {
            *l = GtLabel::Empty;
        }
        let est = costmap_from_mask(4, |_, _| true);
        assert!(metrics_traversability(&est, &gt_empty).is_err());
        let model = model_const(4, 0.0);
        assert!(metrics_elevation(&model, &gt_empty, false).is_err());
    }

    #[test]
    fn uniform_bias_appears_as_error() {
        let gt = gt_all_traversable(8, 0.0);
        let model = model_const(8, 0.05);
        let e = metrics_elevation(&model, &gt, false).unwrap();
        assert_relative_eq!(e.error_mean_abs, 0.05, epsilon = 1e-12);
        assert_relative_eq!(e.error_rmse, 0.05, epsilon = 1e-12);
    }

    #[test]
    fn coverage_counts_invalid_cells() {
        let gt = gt_all_traversable(8, 0.0);
        let mut model = model_const(8, 0.0);
        for i in 0..32 {
            model.valid[i] = false;
        }
        let e = metrics_elevation(&model, &gt, false).unwrap();
        assert_relative_eq!(e.coverage, 0.5, epsilon = 1e-12);
        assert_eq!(e.error_mean_abs, 0.0);

        // Charging the sentinel instead swamps the error statistic.
        let e = metrics_elevation(&model, &gt, true).unwrap();
        assert!(e.error_mean_abs > 400.0);
    }
}
