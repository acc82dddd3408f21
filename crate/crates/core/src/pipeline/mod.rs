//! End-to-end orchestration: run configs, the five pipeline commands, cost
//! accounting, and the run-directory manifest.
//!
//! Every command is a pure function of `(config, inputs on disk)`: two runs
//! with identical configs and seeds produce byte-identical outputs. The one
//! exception is wall-clock timing, which lives in `timings.json` and is
//! listed in the manifest without a content hash.

pub mod commands;
pub mod config;
pub mod ledger;
pub mod manifest;

pub use commands::{cmd_calibrate, cmd_evaluate, cmd_fit, cmd_report, cmd_sweep_nu};
pub use config::RunConfig;
pub use ledger::{CostLedger, MethodCost};

use thiserror::Error;

/// Top-level error with the exit-code classes the CLI maps to:
/// 2 = config validation, 3 = numerical, 4 = I/O.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config validation failed: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("i/o failure: {0}")]
    Io(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Numeric(_) => 3,
            PipelineError::Io(_) => 4,
        }
    }

    pub(crate) fn io(context: &str, err: std::io::Error) -> Self {
        PipelineError::Io(format!("{context}: {err}"))
    }
}

impl From<crate::data::DataError> for PipelineError {
    fn from(e: crate::data::DataError) -> Self {
        use crate::data::DataError::*;
        match e {
            Io { .. } => PipelineError::Io(e.to_string()),
            InvalidRange(_, _) | ParseError { .. } | MissingColumn(_) | EmptySplit
            | InvalidSplitSpec(_) | EmptyDataset => PipelineError::Config(e.to_string()),
        }
    }
}

impl From<crate::backbone::BackboneError> for PipelineError {
    fn from(e: crate::backbone::BackboneError) -> Self {
        use crate::backbone::BackboneError::*;
        match e {
            InvalidConfig(_) => PipelineError::Config(e.to_string()),
            _ => PipelineError::Numeric(e.to_string()),
        }
    }
}

impl From<crate::model_io::ModelIoError> for PipelineError {
    fn from(e: crate::model_io::ModelIoError) -> Self {
        use crate::model_io::ModelIoError::*;
        match e {
            Io(_) => PipelineError::Io(e.to_string()),
            Parse(_) | Invalid(_) => PipelineError::Config(e.to_string()),
        }
    }
}

impl From<crate::calibration::CalibrationError> for PipelineError {
    fn from(e: crate::calibration::CalibrationError) -> Self {
        PipelineError::Numeric(e.to_string())
    }
}

impl From<crate::bayesopt::BayesOptError> for PipelineError {
    fn from(e: crate::bayesopt::BayesOptError) -> Self {
        PipelineError::Numeric(e.to_string())
    }
}

impl From<crate::ensemble::EnsembleError> for PipelineError {
    fn from(e: crate::ensemble::EnsembleError) -> Self {
        PipelineError::Numeric(e.to_string())
    }
}

impl From<crate::metrics::MetricsError> for PipelineError {
    fn from(e: crate::metrics::MetricsError) -> Self {
        PipelineError::Numeric(e.to_string())
    }
}

impl From<crate::baselines::BaselineError> for PipelineError {
    fn from(e: crate::baselines::BaselineError) -> Self {
        PipelineError::Numeric(e.to_string())
    }
}

impl From<crate::attention::AttentionError> for PipelineError {
    fn from(e: crate::attention::AttentionError) -> Self {
        PipelineError::Numeric(e.to_string())
    }
}
