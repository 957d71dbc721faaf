//! JSON run configuration.
//!
//! ```json
//! {
//!   "channel": { "h11": 1, "h12": 4, "h21": 3, "h22": 1, "p1": 1, "p2": 1 },
//!   "target": { "kappa1": "capacity", "kappa2": "capacity", "epsilon": 0.001 },
//!   "seed": 1,
//!   "region": { "grid": 200 },
//!   "simulate": { "point": "symmetric_boundary", "n_list": [100, 200, 400], "trials": 100000 },
//!   "verify": { "n": 100 }
//! }
//! ```
//!
//! Every block except `channel` is optional. Rates are in nats per channel
//! use; a first-order rate may be the string `"capacity"` for the single-user
//! rate of that user.

use std::fmt;
use std::path::Path;

use icdisp::channel::{first_order, ChannelParams};
use icdisp::region::{SecondOrderPoint, TargetPoint};
use serde::{Deserialize, Serialize};

/// Malformed or unreadable configuration (exit code 2).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub channel: ChannelParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetConfig>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub region: RegionConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateConfig>,
    #[serde(default)]
    pub verify: VerifyConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Kappa {
    Value(f64),
    Named(KappaName),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaName {
    Capacity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub kappa1: Kappa,
    pub kappa2: Kappa,
    pub epsilon: f64,
}

impl TargetConfig {
    pub fn resolve(&self, ch: &ChannelParams) -> icdisp::Result<TargetPoint> {
        let f = first_order(ch);
        let pick = |k: Kappa, cap: f64| match k {
            Kappa::Value(v) => v,
            Kappa::Named(KappaName::Capacity) => cap,
        };
        TargetPoint::new(pick(self.kappa1, f.i11), pick(self.kappa2, f.i21), self.epsilon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    #[serde(default = "default_grid")]
    pub grid: usize,
}

impl Default for RegionConfig {
    fn default() -> Self {
        RegionConfig { grid: default_grid() }
    }
}

fn default_grid() -> usize {
    200
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointConfig {
    Explicit { l1: f64, l2: f64 },
    Named(PointName),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointName {
    /// The corner-boundary point with `l1 = l2`.
    SymmetricBoundary,
}

impl PointConfig {
    pub fn explicit(&self) -> Option<SecondOrderPoint> {
        match *self {
            PointConfig::Explicit { l1, l2 } => Some(SecondOrderPoint { l1, l2 }),
            PointConfig::Named(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub point: PointConfig,
    pub n_list: Vec<usize>,
    pub trials: u64,
    /// Overrides the numeric `K` constant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
}

/// Sample sizes of the verification suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Blocklength of the fixed-codeword checks.
    pub n: usize,
    pub fixed_trials: u64,
    pub u_blocks: u64,
    pub vd_n: usize,
    pub vd_trials: u64,
    pub oracle_blocks: u64,
    pub ratio_n: Vec<usize>,
    pub ratio_samples: u64,
    pub scan_points: usize,
    pub ks_n: Vec<usize>,
    pub ks_trials: u64,
    /// Test hook: added to one closed-form dispersion entry (and its mirror).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vd_perturbation: Option<Perturbation>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            n: 100,
            fixed_trials: 20_000,
            u_blocks: 2_000,
            vd_n: 200,
            vd_trials: 20_000,
            oracle_blocks: 1_000,
            ratio_n: vec![50, 100, 200],
            ratio_samples: 2_000,
            scan_points: 10_000,
            ks_n: vec![25, 100, 400],
            ks_trials: 20_000,
            vd_perturbation: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub row: usize,
    pub col: usize,
    pub delta: f64,
}

pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ConfigError(format!("field `{path}`: {}", e.inner()))
    })
}

pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    parse(&text)
}
