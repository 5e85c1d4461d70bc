//! Run configuration: one JSON document with dotted-path overrides.

use std::path::{Path, PathBuf};

use phaseless_core::error::Error as CoreError;
use phaseless_core::radon::FbpFilter;
use phaseless_core::scatter::{FrequencyLadder, ScatterModel, SynthesisSpec};
use phaseless_core::timedomain::{QuadratureSpec, TraceSpec};

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Phantom description file.
    pub phantom: PathBuf,
    /// Support ball radius B.
    #[serde(default = "default_b")]
    pub b: f64,
    /// Slice heights to acquire and reconstruct.
    #[serde(default = "default_slices")]
    pub slices: Vec<f64>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub ladder: LadderConfig,
    #[serde(default = "default_model")]
    pub model: ScatterModel,
    #[serde(default)]
    pub quad: QuadratureSpec,
    #[serde(default)]
    pub trace: TraceSpec,
    #[serde(default)]
    pub fbp: FbpConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    /// Maximum chord x frequency evaluations for the series model.
    #[serde(default = "default_budget")]
    pub budget: usize,
    /// Directory for datasets, volume, and metrics.
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

fn default_b() -> f64 {
    1.0
}

fn default_slices() -> Vec<f64> {
    vec![0.0]
}

fn default_model() -> ScatterModel {
    ScatterModel::Asymptotic
}

fn default_budget() -> usize {
    2_000_000
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_n_alpha")]
    pub n_alpha: usize,
    #[serde(default = "default_n_s")]
    pub n_s: usize,
    #[serde(default = "default_edge_frac")]
    pub edge_frac: f64,
}

fn default_n_alpha() -> usize {
    90
}

fn default_n_s() -> usize {
    64
}

fn default_edge_frac() -> f64 {
    phaseless_core::radon::EDGE_MARGIN_FRAC
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n_alpha: default_n_alpha(),
            n_s: default_n_s(),
            edge_frac: default_edge_frac(),
        }
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderConfig {
    #[serde(default = "default_k_min")]
    pub k_min: f64,
    #[serde(default = "default_k_max")]
    pub k_max: f64,
    #[serde(default = "default_n_k")]
    pub n: usize,
}

fn default_k_min() -> f64 {
    20.0
}

fn default_k_max() -> f64 {
    160.0
}

fn default_n_k() -> usize {
    8
}

impl Default for LadderConfig {
    fn default() -> Self {
        Self {
            k_min: default_k_min(),
            k_max: default_k_max(),
            n: default_n_k(),
        }
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FbpConfig {
    #[serde(default = "default_filter")]
    pub filter: FbpFilter,
    #[serde(default = "default_n_image")]
    pub n_image: usize,
}

fn default_filter() -> FbpFilter {
    FbpFilter::RampHann
}

fn default_n_image() -> usize {
    128
}

impl Default for FbpConfig {
    fn default() -> Self {
        Self {
            filter: default_filter(),
            n_image: default_n_image(),
        }
    }
}

#[derive(Debug, Clone, Default, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    /// Loads the JSON config and applies dotted-path overrides like
    /// `fbp.n_image=256`; override values parse as JSON, falling back to
    /// strings.
    pub fn load(path: &Path, overrides: &[String]) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CoreError::Format {
                path: path.to_path_buf(),
                msg: format!("cannot read config: {e}"),
            })?;
        let mut value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CoreError::Format {
                path: path.to_path_buf(),
                msg: format!("bad config JSON: {e}"),
            })?;
        for item in overrides {
            apply_override(&mut value, item)?;
        }
        let cfg: RunConfig = serde_json::from_value(value)
            .map_err(|e| CoreError::validation(format!("invalid config: {e}")))?;
        // config round-trips losslessly
        let rt: RunConfig = serde_json::from_value(serde_json::to_value(&cfg)?)?;
        debug_assert_eq!(serde_json::to_value(&rt)?, serde_json::to_value(&cfg)?);
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if !self.phantom.exists() {
            anyhow::bail!(CoreError::validation(format!(
                "phantom file {} does not exist",
                self.phantom.display()
            )));
        }
        if self.slices.is_empty() {
            anyhow::bail!(CoreError::validation("config: no slices"));
        }
        for &a in &self.slices {
            if a.abs() >= self.b {
                anyhow::bail!(CoreError::validation(format!(
                    "slice height {a} outside (-B, B) with B = {}",
                    self.b
                )));
            }
        }
        if !(self.grid.edge_frac >= 0.0 && self.grid.edge_frac < 1.0) {
            anyhow::bail!(CoreError::validation("config: edge_frac must be in [0, 1)"));
        }
        if self.noise.sigma < 0.0 {
            anyhow::bail!(CoreError::validation("config: noise sigma must be >= 0"));
        }
        self.quad.validate()?;
        self.trace.validate()?;
        self.ladder()?;
        Ok(())
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn ladder(&self) -> anyhow::Result<FrequencyLadder<f64>> {
        Ok(FrequencyLadder::geometric(
            self.ladder.k_min,
            self.ladder.k_max,
            self.ladder.n,
        )?)
    }

    pub fn synthesis_spec(&self) -> SynthesisSpec {
        SynthesisSpec {
            n_alpha: self.grid.n_alpha,
            n_s: self.grid.n_s,
            edge_frac: self.grid.edge_frac,
            model: self.model,
            noise_level: self.noise.sigma,
            seed: self.noise.seed,
            budget: self.budget,
            trace: self.trace,
            quad: self.quad,
        }
    }
}

fn apply_override(root: &mut serde_json::Value, item: &str) -> anyhow::Result<()> {
    let (path, raw) = item.split_once('=').ok_or_else(|| {
        CoreError::validation(format!("override {item:?} must look like path.to.field=value"))
    })?;
    let new_value = serde_json::from_str(raw)
        .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let mut cursor = root;
    let segments: Vec<&str> = path.split('.').collect();
    for (i, seg) in segments.iter().enumerate() {
        let map = cursor.as_object_mut().ok_or_else(|| {
            CoreError::validation(format!("override {item:?}: {seg} is not an object field"))
        })?;
        if i + 1 == segments.len() {
            map.insert(seg.to_string(), new_value);
            return Ok(());
        }
        cursor = map
            .entry(seg.to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    unreachable!("split never yields zero segments");
}
