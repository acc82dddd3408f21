//! Inference-time stochastic attention around a frozen transformer regressor.
//!
//! The crate replaces softmax attention weights with normalized multinomial
//! samples controlled by a single concentration parameter `nu`, turning a
//! deterministic predictor into a one-parameter family of stochastic
//! predictors. Repeated stochastic forward passes yield predictive ensembles;
//! `nu` is selected post hoc by matching the induced deviation scale to the
//! residual scale on held-out data, searched with a Bayesian log-log
//! surrogate under Thompson sampling. Forecast-verification metrics (PIT,
//! Wasserstein-1 to uniform, coverage, sharpness, CRPS, energy score) and
//! lightweight uncertainty baselines complete the comparison loop.
//!
//! Start with the runnable examples (`cargo run --example end_to_end`) or the
//! `stochattn` binary (`fit`, `calibrate`, `evaluate`, `sweep-nu`, `report`).

pub mod attention;
pub mod backbone;
pub mod baselines;
pub mod bayesopt;
pub mod calibration;
pub mod data;
pub mod ensemble;
pub mod linalg;
pub mod metrics;
pub mod model_io;
pub mod pipeline;
pub mod rng;
