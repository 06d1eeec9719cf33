//! Kernel-weighted Bayesian inference of a dense elevation field from the
//! sparse potential-terrain cells, with per-cell variance weighting and an
//! edge-preserving bilateral pass.
//!
//! Every observed cell contributes a Gaussian likelihood raised to a
//! compactly-supported kernel weight; the conjugate posterior at a target
//! cell is then a precision-weighted sum in closed form:
//!
//! ```text
//! μ* = ( Σᵢ (μ̂ᵢ/Σ̂ᵢ)·wᵢ·kᵢ + μ₀/Σ₀ ) / ( Σᵢ (1/Σ̂ᵢ)·wᵢ·kᵢ + 1/Σ₀ )
//! Σ* = 1 / ( Σᵢ (1/Σ̂ᵢ)·wᵢ·kᵢ + 1/Σ₀ )
//! ```
//!
//! with `kᵢ` the sparse kernel of the cell-to-target distance and `wᵢ` the
//! bilateral weight of the cell's first-pass residual. A diffuse prior is
//! represented as exactly zero precision, never as a large finite variance.

use crate::fusion::MapSnapshot;
use crate::preprocess::CellClass;
use crate::traversability::TerrainModel;
use crate::{Error, Result};

/// Elevation variance floor (m²) applied before a cell's variance is used as
/// a precision weight; single-point cells report exactly zero variance,
/// which a centimeter-scale ranging noise floor keeps usable.
pub const VARIANCE_FLOOR: f64 = 1e-4;

/// Inference parameters.
#[derive(Debug, Clone, Copy)]
pub struct BgkConfig {
    /// Kernel support radius l, meters.
    pub kernel_radius: f64,
    /// Bilateral Gaussian variance Σ_w, m².
    pub bilateral_variance: f64,
    /// Weight observations by their estimated precision (1/Σ̂). When off,
    /// every observation carries unit precision — the comparison mode.
    pub use_estimated_variance: bool,
    /// Apply the bilateral first pass. When off, all bilateral weights are 1.
    pub use_bilateral_filter: bool,
}

impl Default for BgkConfig {
    fn default() -> Self {
        BgkConfig {
            kernel_radius: 1.0,
            bilateral_variance: 0.1,
            use_estimated_variance: true,
            use_bilateral_filter: true,
        }
    }
}

/// One fused cell presented to the inference.
#[derive(Debug, Clone, Copy)]
pub struct BgkObservation {
    /// Cell-center position, meters.
    pub position: [f64; 2],
    /// Fused mean elevation, meters.
    pub mean: f64,
    /// Fused elevation variance, m² (floored before use).
    pub variance: f64,
    /// Bilateral weight in (0, 1].
    pub weight: f64,
}

impl BgkObservation {
    pub fn new(position: [f64; 2], mean: f64, variance: f64) -> Self {
        BgkObservation {
            position,
            mean,
            variance,
            weight: 1.0,
        }
    }
}

/// Posterior elevation belief at a target cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorGaussian {
    pub mean: f64,
    pub variance: f64,
}

/// Prior over a target cell's elevation.
///
/// `Diffuse` is the zero-mean, infinite-variance prior; its precision terms
/// are exactly zero rather than approximated by a large float.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorGaussian {
    Diffuse,
    Informed { mean: f64, variance: f64 },
}

/// The compactly supported kernel: weight in [0, 1], exactly zero beyond `l`.
///
/// ```text
/// k(d) = (2 + cos(2πd/l))/3 · (1 − d/l) + sin(2πd/l)/(2π)   for d ≤ l
/// ```
pub fn sparse_kernel(d: f64, l: f64) -> f64 {
    debug_assert!(d >= 0.0 && l > 0.0);
    if d > l {
        return 0.0;
    }
    let ratio = d / l;
    let angle = 2.0 * std::f64::consts::PI * ratio;
    let k = (2.0 + angle.cos()) / 3.0 * (1.0 - ratio) + angle.sin() / (2.0 * std::f64::consts::PI);
    k.clamp(0.0, 1.0)
}

fn accumulate(
    obs: &[BgkObservation],
    prior: PriorGaussian,
    target: [f64; 2],
    cfg: &BgkConfig,
    use_weights: bool,
) -> Option<PosteriorGaussian> {
    let mut num = 0.0;
    let mut den = 0.0;
    for o in obs {
        let dx = o.position[0] - target[0];
        let dy = o.position[1] - target[1];
        let k = sparse_kernel((dx * dx + dy * dy).sqrt(), cfg.kernel_radius);
        if k == 0.0 {
            continue;
        }
        let precision = if cfg.use_estimated_variance {
            1.0 / o.variance.max(VARIANCE_FLOOR)
        } else {
            1.0
        };
        let w = if use_weights { o.weight } else { 1.0 };
        num += o.mean * precision * w * k;
        den += precision * w * k;
    }
    match prior {
        PriorGaussian::Diffuse => {}
        PriorGaussian::Informed { mean, variance } => {
            let precision = if cfg.use_estimated_variance {
                1.0 / variance.max(VARIANCE_FLOOR)
            } else {
                1.0
            };
            num += mean * precision;
            den += precision;
        }
    }
    if den <= 0.0 {
        return None;
    }
    Some(PosteriorGaussian {
        mean: num / den,
        variance: 1.0 / den,
    })
}

/// Closed-form posterior with all bilateral weights fixed to 1.
///
/// Returns `None` when no observation lies within the kernel radius and the
/// prior is diffuse (the target carries no information).
pub fn bgk_posterior(
    obs: &[BgkObservation],
    prior: PriorGaussian,
    target: [f64; 2],
    cfg: &BgkConfig,
) -> Option<PosteriorGaussian> {
    accumulate(obs, prior, target, cfg, false)
}

/// Bilateral weights from first-pass residuals.
///
/// `first_pass[i]` is the posterior mean evaluated at observation `i`'s own
/// position (the observation itself participates); the residual against the
/// observed mean is mapped through a Gaussian, so cells near sharp terrain
/// changes are downweighted.
pub fn bilateral_weights(obs: &[BgkObservation], first_pass: &[f64], sigma_w: f64) -> Vec<f64> {
    assert_eq!(obs.len(), first_pass.len());
    obs.iter()
        .zip(first_pass)
        .map(|(o, est)| {
            let delta = est - o.mean;
            (-delta * delta / (2.0 * sigma_w)).exp()
        })
        .collect()
}

/// Closed-form posterior honoring each observation's bilateral weight.
pub fn bgk_weighted_posterior(
    obs: &[BgkObservation],
    prior: PriorGaussian,
    target: [f64; 2],
    cfg: &BgkConfig,
) -> Option<PosteriorGaussian> {
    accumulate(obs, prior, target, cfg, true)
}

/// Predictive elevation distribution: same mean, variances add.
///
/// `likelihood_variance` is the measurement-model variance Σ̂* at the target;
/// convolving it with the posterior yields `N(μ*, Σ* + Σ̂*)` in closed form.
pub fn predictive_distribution(
    post: &PosteriorGaussian,
    likelihood_variance: f64,
) -> Result<PosteriorGaussian> {
    if !(likelihood_variance > 0.0) {
        return Err(Error::InvalidArgument(
            "likelihood variance must be positive".into(),
        ));
    }
    Ok(PosteriorGaussian {
        mean: post.mean,
        variance: post.variance + likelihood_variance,
    })
}

/// Fixed kernel weights of the discrete cell-offset window.
struct KernelWindow {
    radius_cells: i32,
    /// (d_row, d_col, k) for every offset with a strictly positive weight.
    offsets: Vec<(i32, i32, f64)>,
}

impl KernelWindow {
    fn new(cell_size: f64, kernel_radius: f64) -> Self {
        let radius_cells = (kernel_radius / cell_size).ceil() as i32;
        let mut offsets = Vec::new();
        for dr in -radius_cells..=radius_cells {
            for dc in -radius_cells..=radius_cells {
                let d = cell_size * ((dr * dr + dc * dc) as f64).sqrt();
                let k = sparse_kernel(d, kernel_radius);
                if k > 0.0 {
                    offsets.push((dr, dc, k));
                }
            }
        }
        KernelWindow {
            radius_cells,
            offsets,
        }
    }
}

/// Two-pass dense inference over a map snapshot.
///
/// Pass 1 evaluates the posterior at every potential-terrain cell (prior =
/// the cell's own fused belief) and converts the residuals to bilateral
/// weights. Pass 2 evaluates the weighted posterior at every non-obstacle
/// cell: observed cells keep their own belief as prior, unobserved cells get
/// the diffuse prior. Obstacle cells carry no terrain elevation, and
/// unobserved cells with no support within the kernel radius stay invalid.
pub fn infer_dense_terrain(snapshot: &MapSnapshot, cfg: &BgkConfig) -> TerrainModel {
    let side = snapshot.side();
    let window = KernelWindow::new(snapshot.anchor.cell_size, cfg.kernel_radius);
    let pad = window.radius_cells as usize;
    let stride = side + 2 * pad;

    // Padded scatter of observation means and precision·weight products;
    // zero precision means "no contribution", which makes the inner loop
    // branch-free.
    let mut obs_mean = vec![0.0f64; stride * stride];
    let mut obs_prec = vec![0.0f64; stride * stride];
    let mut observed = vec![false; stride * stride];
    for row in 0..side {
        for col in 0..side {
            let i = snapshot.idx(row, col);
            if snapshot.class[i] == CellClass::PotentialTerrain {
                let j = (row + pad) * stride + (col + pad);
                obs_mean[j] = snapshot.mean[i];
                obs_prec[j] = if cfg.use_estimated_variance {
                    1.0 / snapshot.variance[i].max(VARIANCE_FLOOR)
                } else {
                    1.0
                };
                observed[j] = true;
            }
        }
    }

    // Box counts of observed cells for the empty-window skip.
    let counts = box_counts(&observed, stride, pad);

    let padded_offsets: Vec<(isize, f64)> = window
        .offsets
        .iter()
        .map(|&(dr, dc, k)| (dr as isize * stride as isize + dc as isize, k))
        .collect();

    // Pass 1: bilateral weights at observed cells.
    if cfg.use_bilateral_filter {
        let mut weights = vec![1.0f64; stride * stride];
        for row in 0..side {
            for col in 0..side {
                let j = (row + pad) * stride + (col + pad);
                if !observed[j] {
                    continue;
                }
                let mut num = 0.0;
                let mut den = 0.0;
                for &(off, k) in &padded_offsets {
                    let jj = (j as isize + off) as usize;
                    num += obs_mean[jj] * obs_prec[jj] * k;
                    den += obs_prec[jj] * k;
                }
                // Own-belief prior.
                num += obs_mean[j] * obs_prec[j];
                den += obs_prec[j];
                let delta = num / den - obs_mean[j];
                weights[j] = (-delta * delta / (2.0 * cfg.bilateral_variance)).exp();
            }
        }
        for j in 0..obs_prec.len() {
            obs_prec[j] *= weights[j];
        }
    }

    // Pass 2: dense field.
    let mut elevation = vec![0.0f64; side * side];
    let mut variance = vec![0.0f64; side * side];
    let mut valid = vec![false; side * side];
    for row in 0..side {
        for col in 0..side {
            let i = snapshot.idx(row, col);
            if snapshot.class[i] == CellClass::Obstacle {
                continue;
            }
            let j = (row + pad) * stride + (col + pad);
            let is_observed = snapshot.class[i] == CellClass::PotentialTerrain;
            if !is_observed && counts.window_count(row, col) == 0 {
                continue; // no support, diffuse prior: stays unknown
            }
            let mut num = 0.0;
            let mut den = 0.0;
            for &(off, k) in &padded_offsets {
                let jj = (j as isize + off) as usize;
                num += obs_mean[jj] * obs_prec[jj] * k;
                den += obs_prec[jj] * k;
            }
            if is_observed {
                let prior_prec = if cfg.use_estimated_variance {
                    1.0 / snapshot.variance[i].max(VARIANCE_FLOOR)
                } else {
                    1.0
                };
                num += snapshot.mean[i] * prior_prec;
                den += prior_prec;
            }
            if den > 0.0 {
                elevation[i] = num / den;
                variance[i] = 1.0 / den;
                valid[i] = true;
            }
        }
    }

    TerrainModel {
        anchor: snapshot.anchor,
        elevation,
        variance,
        valid,
    }
}

/// Sliding-window counts of observed cells, via a 2D prefix sum.
struct BoxCounts {
    prefix: Vec<u32>,
    stride: usize,
    pad: usize,
}

fn box_counts(observed: &[bool], stride: usize, pad: usize) -> BoxCounts {
    let mut prefix = vec![0u32; (stride + 1) * (stride + 1)];
    for r in 0..stride {
        for c in 0..stride {
            let v = observed[r * stride + c] as u32;
            prefix[(r + 1) * (stride + 1) + (c + 1)] = v + prefix[r * (stride + 1) + (c + 1)]
                + prefix[(r + 1) * (stride + 1) + c]
                - prefix[r * (stride + 1) + c];
        }
    }
    BoxCounts {
        prefix,
        stride,
        pad,
    }
}

impl BoxCounts {
    /// Observed-cell count in the (2·pad+1)² window centered on a map cell.
    fn window_count(&self, row: usize, col: usize) -> u32 {
        let w = self.stride + 1;
        // Map cell (row, col) sits at padded (row+pad, col+pad); its window
        // spans [row, row+2·pad] × [col, col+2·pad] in padded coordinates.
        let r0 = row;
        let c0 = col;
        let r1 = row + 2 * self.pad + 1;
        let c1 = col + 2 * self.pad + 1;
        self.prefix[r1 * w + c1] + self.prefix[r0 * w + c0]
            - self.prefix[r0 * w + c1]
            - self.prefix[r1 * w + c0]
    }
}
