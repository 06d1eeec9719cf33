//! Dense terrain modeling and traversability analysis from LiDAR-style
//! point-cloud sequences.
//!
//! The pipeline fuses consecutive scans into a rolling, world-quantized
//! elevation grid (one Gaussian per cell), densifies it with kernel-weighted
//! Bayesian regression plus edge-preserving bilateral filtering, and derives
//! per-cell travel costs, reachability and plannable paths from the resulting
//! surface.
//!
//! Crate layout:
//!
//! - [`geometry`] — coordinate systems, world/grid quantization, rigid
//!   transforms and pose interpolation.
//! - [`preprocess`] — scan rectification, per-cell height statistics and
//!   coarse terrain/obstacle segmentation.
//! - [`fusion`] — the rolling grid map and multi-frame fusion (moment
//!   pooling by default, Kalman filtering as an alternative).
//! - [`bgk`] — sparse-kernel Bayesian inference of a dense elevation field
//!   with variance weighting and bilateral filtering.
//! - [`traversability`] — surface normals, local-convexity edge tests,
//!   travel costs, region growing and grid path planning.
//! - [`evaluation`] — ground-truth construction, quality metrics, and a
//!   deterministic synthetic scene + virtual LiDAR generator.
//! - [`config`], [`io`], [`pipeline`], [`ablation`] — configuration, file
//!   formats, the frame-by-frame runner and the ablation harness.
//!
//! The `terramap` binary is a thin front-end over [`pipeline`] and
//! [`ablation`]; see the crate examples for library-level usage.

pub mod ablation;
pub mod bgk;
pub mod config;
pub mod evaluation;
pub mod fusion;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod pipeline;
pub mod preprocess;
pub mod traversability;

mod timing;

pub use timing::StageTimer;

/// Errors produced by library operations.
///
/// Most operations are total over their documented domain; this enum covers
/// the few contract violations and I/O-adjacent failures that can occur.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument violated a documented precondition.
    InvalidArgument(String),
    /// A parse failure in one of the supported file formats.
    Parse(String),
    /// A metric or query whose result is undefined for the given inputs.
    Undefined(String),
}

impl std::fmt::Display for Error {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::Parse(msg) => write!(f, "parse error: {msg}"),
            Error::Undefined(msg) => write!(f, "undefined: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
