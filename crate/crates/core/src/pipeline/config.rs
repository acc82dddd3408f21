//! The single-document JSON run configuration. Every field has a default;
//! unknown fields are rejected so typos fail fast.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::backbone::EncoderConfig;
use crate::baselines::DropoutLocation;
use crate::data::SplitSpec;

use super::PipelineError;

/// Which data the run operates on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetConfig {
    Sinusoid {
        #[serde(default = "defaults::sinusoid_n")]
        n: usize,
        #[serde(default = "defaults::x_lo")]
        x_lo: f64,
        #[serde(default = "defaults::x_hi")]
        x_hi: f64,
        #[serde(default = "defaults::amplitude")]
        amplitude: f64,
        #[serde(default = "defaults::frequency")]
        frequency: f64,
        #[serde(default = "defaults::noise_sigma")]
        noise_sigma: f64,
        #[serde(default)]
        seed: u64,
    },
    Csv {
        path: PathBuf,
        target_column: String,
        feature_columns: Vec<String>,
        #[serde(default = "defaults::yes")]
        standardize: bool,
    },
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig::Sinusoid {
            n: defaults::sinusoid_n(),
            x_lo: defaults::x_lo(),
            x_hi: defaults::x_hi(),
            amplitude: defaults::amplitude(),
            frequency: defaults::frequency(),
            noise_sigma: defaults::noise_sigma(),
            seed: 0,
        }
    }
}

/// Stochastic-attention settings: the search domain, the evaluation budget
/// (`B` case draws x `M` passes), the BO budget `K`, and the master seed.
/// `m` is both the passes-per-batch during calibration and the predictive
/// ensemble size during evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SaConfig {
    pub nu_min: u64,
    pub nu_max: u64,
    pub b: usize,
    pub m: usize,
    pub k: usize,
    pub master_seed: u64,
}

impl Default for SaConfig {
    fn default() -> Self {
        SaConfig {
            nu_min: 1,
            nu_max: 1024,
            b: 40,
            m: 200,
            k: 20,
            master_seed: 7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SwagSettings {
    pub steps: usize,
    pub learning_rate: f64,
    pub snapshot_every: usize,
    pub batch_size: usize,
    pub variance_scale: f64,
}

impl Default for SwagSettings {
    fn default() -> Self {
        SwagSettings {
            steps: 200,
            learning_rate: 2e-3,
            snapshot_every: 5,
            batch_size: 8,
            variance_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineConfig {
    pub dropout_rate: f64,
    pub dropout_location: DropoutLocation,
    pub swag: SwagSettings,
    pub deep_ensemble_size: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            dropout_rate: 0.1,
            dropout_location: DropoutLocation::PooledFeatures,
            swag: SwagSettings::default(),
            deep_ensemble_size: 16,
        }
    }
}

/// How baseline temperatures are chosen: `w1` minimizes the PIT W1 on the
/// calibration split; `coverage` bisects tau until calibration coverage at
/// the first configured level matches the stochastic-attention coverage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemperatureMode {
    W1,
    Coverage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricConfig {
    pub coverage_levels: Vec<f64>,
    pub pit_bins: usize,
    pub temperature_mode: TemperatureMode,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            coverage_levels: vec![0.5, 0.9, 0.95],
            pit_bins: 20,
            temperature_mode: TemperatureMode::W1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    pub split: SplitSpec,
    pub encoder: EncoderConfig,
    pub ridge: f64,
    pub sa: SaConfig,
    pub baselines: BaselineConfig,
    pub metrics: MetricConfig,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: DatasetConfig::default(),
            split: SplitSpec::default(),
            encoder: EncoderConfig::default(),
            ridge: 1e-3,
            sa: SaConfig::default(),
            baselines: BaselineConfig::default(),
            metrics: MetricConfig::default(),
            output_dir: None,
        }
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_frac: 0.8,
            cal_frac: 0.1,
            test_frac: 0.1,
            seed: 2,
        }
    }
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            n_layers: 2,
            n_heads: 4,
            d_model: 24,
            d_ff: 48,
            n_tokens: 4,
            seed: 3,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::io(&format!("reading config {}", path.display()), e))?;
        let config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    /// Fail-fast validation: referenced paths must exist, the search domain
    /// must be nonempty, all budgets and levels must be usable.
    pub fn validate(&self) -> Result<(), PipelineError> {
        match &self.dataset {
            DatasetConfig::Sinusoid { n, x_lo, x_hi, noise_sigma, .. } => {
                if *n < 10 {
                    return Err(PipelineError::Config("sinusoid n must be >= 10".into()));
                }
                if !(x_lo < x_hi) {
                    return Err(PipelineError::Config(format!(
                        "x_lo {x_lo} must be below x_hi {x_hi}"
                    )));
                }
                if *noise_sigma < 0.0 {
                    return Err(PipelineError::Config("noise_sigma must be >= 0".into()));
                }
            }
            DatasetConfig::Csv { path, feature_columns, .. } => {
                if !path.exists() {
                    return Err(PipelineError::Config(format!(
                        "csv path {} does not exist",
                        path.display()
                    )));
                }
                if feature_columns.is_empty() {
                    return Err(PipelineError::Config("feature_columns is empty".into()));
                }
            }
        }
        self.split
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        self.encoder
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        if self.ridge < 0.0 {
            return Err(PipelineError::Config("ridge must be >= 0".into()));
        }
        if self.sa.nu_min == 0 || self.sa.nu_min > self.sa.nu_max {
            return Err(PipelineError::Config(format!(
                "empty search domain [{}, {}]",
                self.sa.nu_min, self.sa.nu_max
            )));
        }
        if self.sa.m < 2 {
            return Err(PipelineError::Config("sa.m must be >= 2".into()));
        }
        if self.sa.b == 0 || self.sa.k == 0 {
            return Err(PipelineError::Config("sa.b and sa.k must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.baselines.dropout_rate) {
            return Err(PipelineError::Config(format!(
                "dropout_rate {} not in [0, 1)",
                self.baselines.dropout_rate
            )));
        }
        if self.baselines.deep_ensemble_size < 2 {
            return Err(PipelineError::Config("deep_ensemble_size must be >= 2".into()));
        }
        let swag = &self.baselines.swag;
        if swag.snapshot_every == 0 || swag.steps / swag.snapshot_every < 2 {
            return Err(PipelineError::Config(
                "swag must produce at least 2 snapshots".into(),
            ));
        }
        if self.metrics.coverage_levels.is_empty()
            || self
                .metrics
                .coverage_levels
                .iter()
                .any(|l| !(*l > 0.0 && *l < 1.0))
        {
            return Err(PipelineError::Config(
                "coverage_levels must be nonempty, each in (0, 1)".into(),
            ));
        }
        if self.metrics.pit_bins == 0 {
            return Err(PipelineError::Config("pit_bins must be >= 1".into()));
        }
        Ok(())
    }

    /// Build the configured dataset.
    pub fn build_dataset(&self) -> Result<crate::data::Dataset, PipelineError> {
        match &self.dataset {
            DatasetConfig::Sinusoid {
                n,
                x_lo,
                x_hi,
                amplitude,
                frequency,
                noise_sigma,
                seed,
            } => Ok(crate::data::make_sinusoid(
                *n,
                (*x_lo, *x_hi),
                *amplitude,
                *frequency,
                *noise_sigma,
                *seed,
            )?),
            DatasetConfig::Csv {
                path,
                target_column,
                feature_columns,
                standardize,
            } => Ok(crate::data::load_csv(
                path,
                target_column,
                feature_columns,
                *standardize,
            )?),
        }
    }

    /// Split the dataset and standardize from train statistics when the
    /// dataset asks for it.
    pub fn build_splits(
        &self,
    ) -> Result<(crate::data::Dataset, crate::data::Dataset, crate::data::Dataset), PipelineError>
    {
        let dataset = self.build_dataset()?;
        let (mut train, mut cal, mut test) = crate::data::split(&dataset, &self.split)?;
        if dataset.standardize {
            crate::data::standardize_by_train(&mut train, &mut cal, &mut test)?;
        }
        Ok((train, cal, test))
    }
}

mod defaults {
    pub fn sinusoid_n() -> usize {
        400
    }
    pub fn x_lo() -> f64 {
        -3.0
    }
    pub fn x_hi() -> f64 {
        3.0
    }
    pub fn amplitude() -> f64 {
        2.0
    }
    pub fn frequency() -> f64 {
        1.5
    }
    pub fn noise_sigma() -> f64 {
        0.38
    }
    pub fn yes() -> bool {
        true
    }
}
