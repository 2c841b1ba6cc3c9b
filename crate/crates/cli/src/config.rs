//! Run configuration: one JSON document drives every subcommand, with
//! command-line overrides for paths and the seed only.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};

use fairrisk_core::cohort::{GroupSpec, OutcomeTask};
use fairrisk_core::mitigate::{MitigationMode, TargetMetric};
use fairrisk_core::synth::{
    AttributeMarginals, GradeDistribution, OutcomeCoefficients, RiskTargets, YearWeight,
};

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default = "default_task")]
    pub task: OutcomeTask,
    pub paths: Paths,
    #[serde(default)]
    pub years: Years,
    #[serde(default)]
    pub load: LoadConfig,
    /// Group partitions to audit; absent means the default five.
    #[serde(default)]
    pub groups: Option<Vec<GroupSpec>>,
    #[serde(default)]
    pub smote: Option<SmoteConfig>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub calibration: CalibrationConfig,
    #[serde(default)]
    pub mitigation: MitigationConfig,
    #[serde(default = "default_equity_threshold")]
    pub equity_threshold: f64,
    #[serde(default)]
    pub synth: Option<SynthSection>,
}

fn default_task() -> OutcomeTask {
    OutcomeTask::Dropout
}

fn default_equity_threshold() -> f64 {
    0.2
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub cohort_csv: PathBuf,
    #[serde(default)]
    pub schema: Option<PathBuf>,
    #[serde(default)]
    pub model_json: Option<PathBuf>,
    pub report_dir: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Years {
    pub train: Vec<i32>,
    pub test: Vec<i32>,
}

impl Default for Years {
    fn default() -> Self {
        Years {
            train: vec![2009, 2010, 2011, 2012, 2013],
            test: vec![2014, 2016, 2017],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadConfig {
    #[serde(default)]
    pub drop_missing_grade: bool,
    #[serde(default)]
    pub drop_missing_outcome: bool,
    #[serde(default = "default_grade_scale")]
    pub grade_scale: (f64, f64),
}

impl Default for LoadConfig {
    fn default() -> Self {
        LoadConfig {
            drop_missing_grade: false,
            drop_missing_outcome: false,
            grade_scale: default_grade_scale(),
        }
    }
}

fn default_grade_scale() -> (f64, f64) {
    (5.0, 14.0)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SmoteSelectorConfig {
    /// Oversample a class of the outcome label.
    ByLabel { value: u8 },
    /// Oversample the rows of one encoded feature value, e.g. feature
    /// "gender" value "female".
    ByColumn { feature: String, value: String },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoteConfig {
    pub selector: SmoteSelectorConfig,
    #[serde(default = "default_smote_k")]
    pub k: usize,
    #[serde(default = "default_smote_ratio")]
    pub target_ratio: f64,
}

fn default_smote_k() -> usize {
    5
}

fn default_smote_ratio() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    Logistic,
    Mlp,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_family")]
    pub family: ModelFamily,
    #[serde(default = "default_hidden_units")]
    pub hidden_units: usize,
    #[serde(default)]
    pub train: TrainSection,
}

fn default_family() -> ModelFamily {
    ModelFamily::Mlp
}

fn default_hidden_units() -> usize {
    fairrisk_core::models::DEFAULT_HIDDEN_UNITS
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            family: default_family(),
            hidden_units: default_hidden_units(),
            train: TrainSection::default(),
        }
    }
}

/// Training knobs; the seed always derives from the run seed.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub validation_fraction: f64,
    pub l2_penalty: f64,
    pub momentum: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = fairrisk_core::models::TrainConfig::default();
        TrainSection {
            learning_rate: d.learning_rate,
            batch_size: d.batch_size,
            max_epochs: d.max_epochs,
            patience: d.patience,
            validation_fraction: d.validation_fraction,
            l2_penalty: d.l2_penalty,
            momentum: d.momentum,
        }
    }
}

impl TrainSection {
    pub fn to_train_config(&self, seed: u64) -> fairrisk_core::models::TrainConfig {
        fairrisk_core::models::TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
            validation_fraction: self.validation_fraction,
            seed,
            l2_penalty: self.l2_penalty,
            momentum: self.momentum,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationMethod {
    #[default]
    Isotonic,
    Platt,
    None,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    #[serde(default)]
    pub method: CalibrationMethod,
    /// Fit one map per audited group instead of a single global map.
    #[serde(default)]
    pub per_group: bool,
    /// Fraction of training rows held out for calibration fitting;
    /// zero fits the map on the full training split.
    #[serde(default)]
    pub holdout_fraction: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            method: CalibrationMethod::Isotonic,
            per_group: false,
            holdout_fraction: 0.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MitigationConfig {
    #[serde(default = "default_metric")]
    pub metric: TargetMetric,
    #[serde(default = "default_mode")]
    pub mode: MitigationMode,
}

fn default_metric() -> TargetMetric {
    TargetMetric::Gfpr
}

fn default_mode() -> MitigationMode {
    MitigationMode::Randomized
}

impl Default for MitigationConfig {
    fn default() -> Self {
        MitigationConfig { metric: default_metric(), mode: default_mode() }
    }
}

/// Generator settings for `fairrisk synth`; unset sections fall back to
/// the shipped defaults. The generation seed derives from the run seed.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub n: usize,
    #[serde(default)]
    pub attribute_marginals: Option<AttributeMarginals>,
    #[serde(default)]
    pub grade_distribution: Option<GradeDistribution>,
    #[serde(default)]
    pub outcome_coefficients: Option<OutcomeCoefficients>,
    #[serde(default)]
    pub year_weights: Option<Vec<YearWeight>>,
    /// Fit the outcome coefficients to risk-rate targets before
    /// generating (the shipped target table when `risk_targets` is unset).
    #[serde(default)]
    pub fit_to_targets: bool,
    #[serde(default)]
    pub risk_targets: Option<RiskTargets>,
}

/// A loaded config plus its provenance (hash of the file bytes).
pub struct LoadedConfig {
    pub config: RunConfig,
    pub hash: String,
}

pub fn load_config(path: &Path) -> Result<LoadedConfig, CliError> {
    let bytes = std::fs::read(path).map_err(|e| {
        CliError::Usage(format!("cannot read config {}: {e}", path.display()))
    })?;
    let config: RunConfig = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
    let hash = hex_digest(&bytes);
    Ok(LoadedConfig { config, hash })
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Stable sub-seed for a pipeline stage.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let digest = Sha256::digest(format!("{seed}:{label}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest is long enough"))
}

/// Reads the optional schema sidecar: a JSON object mapping file column
/// names to the canonical ones.
pub fn load_schema_sidecar(path: &Path) -> Result<HashMap<String, String>, CliError> {
    let bytes = std::fs::read(path).map_err(|e| {
        CliError::Usage(format!("cannot read schema sidecar {}: {e}", path.display()))
    })?;
    serde_json::from_slice(&bytes).map_err(|e| {
        CliError::Usage(format!("invalid schema sidecar {}: {e}", path.display()))
    })
}
