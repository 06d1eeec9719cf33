//! Pipeline configuration: a flat key-value file, environment overrides,
//! and command-line `key=value` overrides, applied in that order.

use std::collections::HashSet;
use std::path::Path;

use crate::bgk::BgkConfig;
use crate::fusion::{FusionConfig, FusionMode, KfParams, MeasurementNoise};
use crate::traversability::KinematicLimits;
use crate::{Error, Result};

/// Environment-variable prefix for overrides (`TERRAMAP_CELL_SIZE=0.1`).
pub const ENV_PREFIX: &str = "TERRAMAP_";

/// All tunables of the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Map side W, meters.
    pub width_m: f64,
    /// Grid cell side ω, meters.
    pub cell_size: f64,
    /// Min-max height spread threshold T_h, meters.
    pub height_spread_threshold: f64,
    /// Fused-variance obstacle threshold T_Σ, m².
    pub variance_threshold: f64,
    /// Bilateral Gaussian variance Σ_w, m².
    pub bilateral_variance: f64,
    /// Kernel support radius l, meters.
    pub kernel_radius: f64,
    /// Maximum normal-similarity angle T_α, degrees.
    pub max_similarity_deg: f64,
    /// Concavity angle threshold T_θ, degrees.
    pub concavity_deg: f64,
    /// Overhang threshold T_o, meters (vehicle height + 0.5).
    pub overhang_threshold: f64,
    /// Multi-frame fusion rule: `ndt` or `kf`.
    pub fusion: String,
    /// Kalman process-noise variance ε, m².
    pub kf_process_noise: f64,
    /// Kalman measurement-noise coefficient; variance is `coeff · distance`
    /// in `distance` mode, or the value itself in `constant` mode.
    pub kf_measurement_noise: f64,
    /// `distance` or `constant`.
    pub kf_noise_mode: String,
    /// Variance weighting of observations in the dense inference.
    pub use_estimated_variance: bool,
    /// Bilateral filtering in the dense inference.
    pub use_bilateral_filter: bool,
    /// Frames a cell must be observed before variance refinement applies.
    pub min_obs_frames: u32,
    /// Sensor mounting height above ground, meters.
    pub lidar_height: f64,
    /// Travel-cost weight λ in path planning.
    pub plan_lambda: f64,
    /// Sentinel for invalid cells in emitted maps.
    pub sentinel: f64,
    /// Master random seed (synthetic generation).
    pub seed: u64,
    /// Frames to skip before evaluation (map warm-up).
    pub eval_warmup_frames: u32,
    /// Radius for assembling labeled frames into ground truth, meters.
    pub gt_assemble_radius: f64,
    /// Traversable semantic label ids (comma separated in files).
    pub traversable_labels: Vec<u32>,
    /// Vegetation-like label ids subject to the hanging rule.
    pub hanging_labels: Vec<u32>,
    /// Charge invalid estimates the sentinel deviation inside the elevation
    /// error (default: exclude them; they already lower coverage).
    pub count_invalid_in_error: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            width_m: 80.0,
            cell_size: 0.2,
            height_spread_threshold: 0.4,
            variance_threshold: 0.1,
            bilateral_variance: 0.1,
            kernel_radius: 1.0,
            max_similarity_deg: 10.0,
            concavity_deg: 80.0,
            overhang_threshold: 2.3,
            fusion: "ndt".into(),
            kf_process_noise: 0.01,
            kf_measurement_noise: 0.01,
            kf_noise_mode: "distance".into(),
            use_estimated_variance: true,
            use_bilateral_filter: true,
            min_obs_frames: 3,
            lidar_height: 2.0,
            plan_lambda: 5.0,
            sentinel: -999.0,
            seed: 0,
            eval_warmup_frames: 2,
            gt_assemble_radius: 20.0,
            traversable_labels: vec![40, 44, 48, 49, 72],
            hanging_labels: vec![70],
            count_invalid_in_error: false,
        }
    }
}

impl PipelineConfig {
    /// Grid cells per side; `W/ω` rounded, forced even.
    pub fn side_cells(&self) -> usize {
        let n = (self.width_m / self.cell_size).round() as usize;
        if n % 2 == 0 {
            n
        } else {
            n + 1
        }
    }

    pub fn fusion_config(&self) -> Result<FusionConfig> {
        let mode = match self.fusion.as_str() {
            "ndt" => FusionMode::Ndt,
            "kf" => FusionMode::Kf(KfParams {
                a: 1.0,
                c: 1.0,
                process_noise: self.kf_process_noise,
                measurement_noise: match self.kf_noise_mode.as_str() {
                    "distance" => MeasurementNoise::DistanceScaled(self.kf_measurement_noise),
                    "constant" => MeasurementNoise::Constant(self.kf_measurement_noise),
                    other => {
                        return Err(Error::InvalidArgument(format!(
                            "kf_noise_mode must be 'distance' or 'constant', got '{other}'"
                        )))
                    }
                },
            }),
            other => {
                return Err(Error::InvalidArgument(format!(
                    "fusion must be 'ndt' or 'kf', got '{other}'"
                )))
            }
        };
        Ok(FusionConfig {
            mode,
            t_h: self.height_spread_threshold,
            t_o: self.overhang_threshold,
            t_sigma: self.variance_threshold,
            min_obs: self.min_obs_frames,
        })
    }

    pub fn bgk_config(&self) -> BgkConfig {
        BgkConfig {
            kernel_radius: self.kernel_radius,
            bilateral_variance: self.bilateral_variance,
            use_estimated_variance: self.use_estimated_variance,
            use_bilateral_filter: self.use_bilateral_filter,
        }
    }

    pub fn kinematic_limits(&self) -> KinematicLimits {
        KinematicLimits {
            max_similarity_deg: self.max_similarity_deg,
            concavity_deg: self.concavity_deg,
            lidar_height: self.lidar_height,
        }
    }

    /// Apply one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let bad = |what: &str| Error::Parse(format!("bad value '{v}' for {what}"));
        match key.trim() {
            "width_m" => self.width_m = v.parse().map_err(|_| bad("width_m"))?,
            "cell_size" => self.cell_size = v.parse().map_err(|_| bad("cell_size"))?,
            "height_spread_threshold" => {
                self.height_spread_threshold = v.parse().map_err(|_| bad(key))?
            }
            "variance_threshold" => self.variance_threshold = v.parse().map_err(|_| bad(key))?,
            "bilateral_variance" => self.bilateral_variance = v.parse().map_err(|_| bad(key))?,
            "kernel_radius" => self.kernel_radius = v.parse().map_err(|_| bad(key))?,
            "max_similarity_deg" => self.max_similarity_deg = v.parse().map_err(|_| bad(key))?,
            "concavity_deg" => self.concavity_deg = v.parse().map_err(|_| bad(key))?,
            "overhang_threshold" => self.overhang_threshold = v.parse().map_err(|_| bad(key))?,
            "fusion" => self.fusion = v.to_string(),
            "kf_process_noise" => self.kf_process_noise = v.parse().map_err(|_| bad(key))?,
            "kf_measurement_noise" => {
                self.kf_measurement_noise = v.parse().map_err(|_| bad(key))?
            }
            "kf_noise_mode" => self.kf_noise_mode = v.to_string(),
            "use_estimated_variance" => {
                self.use_estimated_variance = parse_bool(v).ok_or_else(|| bad(key))?
            }
            "use_bilateral_filter" => {
                self.use_bilateral_filter = parse_bool(v).ok_or_else(|| bad(key))?
            }
            "min_obs_frames" => self.min_obs_frames = v.parse().map_err(|_| bad(key))?,
            "lidar_height" => self.lidar_height = v.parse().map_err(|_| bad(key))?,
            "plan_lambda" => self.plan_lambda = v.parse().map_err(|_| bad(key))?,
            "sentinel" => self.sentinel = v.parse().map_err(|_| bad(key))?,
            "seed" => self.seed = v.parse().map_err(|_| bad(key))?,
            "eval_warmup_frames" => self.eval_warmup_frames = v.parse().map_err(|_| bad(key))?,
            "gt_assemble_radius" => self.gt_assemble_radius = v.parse().map_err(|_| bad(key))?,
            "traversable_labels" => self.traversable_labels = parse_id_list(v)?,
            "hanging_labels" => self.hanging_labels = parse_id_list(v)?,
            "count_invalid_in_error" => {
                self.count_invalid_in_error = parse_bool(v).ok_or_else(|| bad(key))?
            }
            other => {
                return Err(Error::Parse(format!("unknown config key '{other}'")));
            }
        }
        Ok(())
    }

    /// Parse a key-value config file. Lines are `key = value`; `#` starts a
    /// comment.
    pub fn from_file(path: &Path) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let mut cfg = PipelineConfig::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse(format!(
                    "line {}: expected 'key = value', got '{raw}'",
                    lineno + 1
                )));
            };
            self.set(key, value)?;
        }
        Ok(())
    }

    /// Apply overrides from `TERRAMAP_*` environment variables.
    pub fn apply_env_overrides(&mut self) -> Result<()> {
        let known: HashSet<String> = KEY_DOC.iter().map(|(k, _)| k.to_string()).collect();
        for (name, value) in std::env::vars() {
            if let Some(stripped) = name.strip_prefix(ENV_PREFIX) {
                let key = stripped.to_ascii_lowercase();
                if known.contains(&key) {
                    self.set(&key, &value)?;
                }
            }
        }
        Ok(())
    }

    /// The default configuration as a commented key-value file.
    pub fn commented_default() -> String {
        let cfg = PipelineConfig::default();
        let mut out = String::from("# terramap pipeline configuration\n");
        for (key, doc) in KEY_DOC {
            let value = cfg.get(key);
            out.push_str(&format!("{key} = {value}  # {doc}\n"));
        }
        out
    }

    fn get(&self, key: &str) -> String {
        match key {
            "width_m" => self.width_m.to_string(),
            "cell_size" => self.cell_size.to_string(),
            "height_spread_threshold" => self.height_spread_threshold.to_string(),
            "variance_threshold" => self.variance_threshold.to_string(),
            "bilateral_variance" => self.bilateral_variance.to_string(),
            "kernel_radius" => self.kernel_radius.to_string(),
            "max_similarity_deg" => self.max_similarity_deg.to_string(),
            "concavity_deg" => self.concavity_deg.to_string(),
            "overhang_threshold" => self.overhang_threshold.to_string(),
            "fusion" => self.fusion.clone(),
            "kf_process_noise" => self.kf_process_noise.to_string(),
            "kf_measurement_noise" => self.kf_measurement_noise.to_string(),
            "kf_noise_mode" => self.kf_noise_mode.clone(),
            "use_estimated_variance" => self.use_estimated_variance.to_string(),
            "use_bilateral_filter" => self.use_bilateral_filter.to_string(),
            "min_obs_frames" => self.min_obs_frames.to_string(),
            "lidar_height" => self.lidar_height.to_string(),
            "plan_lambda" => self.plan_lambda.to_string(),
            "sentinel" => self.sentinel.to_string(),
            "seed" => self.seed.to_string(),
            "eval_warmup_frames" => self.eval_warmup_frames.to_string(),
            "gt_assemble_radius" => self.gt_assemble_radius.to_string(),
            "traversable_labels" => join_ids(&self.traversable_labels),
            "hanging_labels" => join_ids(&self.hanging_labels),
            "count_invalid_in_error" => self.count_invalid_in_error.to_string(),
            _ => unreachable!("unknown key {key}"),
        }
    }
}

fn parse_bool(v: &str) -> Option<bool> {
    match v {
        "true" | "1" | "on" | "yes" => Some(true),
        "false" | "0" | "off" | "no" => Some(false),
        _ => None,
    }
}

fn parse_id_list(v: &str) -> Result<Vec<u32>> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad label id '{s}'")))
        })
        .collect()
}

fn join_ids(ids: &[u32]) -> String {
    ids.iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Key list with the documentation printed into generated config files.
/// Symbols follow the conventional parameter names.
const KEY_DOC: &[(&str, &str)] = &[
    ("width_m", "W — map side (m)"),
    ("cell_size", "omega — grid cell side (m)"),
    ("height_spread_threshold", "T_h — min-max spread above which a cell is an obstacle (m)"),
    ("variance_threshold", "T_Sigma — fused variance above which a terrain cell becomes an obstacle (m^2)"),
    ("bilateral_variance", "Sigma_w — bilateral weight Gaussian variance (m^2)"),
    ("kernel_radius", "l — kernel support radius (m)"),
    ("max_similarity_deg", "T_alpha — max angle between neighbor normals (deg)"),
    ("concavity_deg", "T_theta — concavity angle threshold (deg)"),
    ("overhang_threshold", "T_o — hanging-point cut above per-cell ground (m)"),
    ("fusion", "multi-frame fusion: ndt | kf"),
    ("kf_process_noise", "epsilon — Kalman process-noise variance (m^2)"),
    ("kf_measurement_noise", "xi — Kalman measurement noise (coefficient in distance mode)"),
    ("kf_noise_mode", "distance | constant"),
    ("use_estimated_variance", "weight observations by 1/variance in dense inference"),
    ("use_bilateral_filter", "edge-preserving bilateral pass in dense inference"),
    ("min_obs_frames", "frames observed before variance refinement applies"),
    ("lidar_height", "sensor mounting height above ground (m)"),
    ("plan_lambda", "lambda — travel-cost weight in path planning"),
    ("sentinel", "value written for invalid cells in emitted maps"),
    ("seed", "master random seed for synthetic generation"),
    ("eval_warmup_frames", "frames skipped before evaluation"),
    ("gt_assemble_radius", "frame-assembly radius for ground truth (m)"),
    ("traversable_labels", "semantic ids considered traversable ground"),
    ("hanging_labels", "semantic ids subject to the hanging-point rule"),
    ("count_invalid_in_error", "charge invalid cells the sentinel deviation in E"),
];
