//! Lightweight uncertainty baselines over the same frozen backbone.
//!
//! Each baseline produces the same `PredictiveEnsemble` type the stochastic
//! attention path does, so every method flows through the identical metrics
//! code. The encoder stays frozen throughout; the baselines randomize only
//! around the readout: MC dropout masks pooled features at test time,
//! SWAG-diagonal samples readout weights from an SGD-trajectory Gaussian,
//! and the deep ensemble refits the readout on bootstrap resamples.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backbone::{
    forward_deterministic, pooled_features, ridge_fit, BackboneError, InputCase, ModelBundle,
    Readout,
};
use crate::ensemble::{EnsembleMeta, PredictiveEnsemble};
use crate::linalg::dot;
use crate::rng::{domain, substream};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("dropout rate must lie in [0, 1), got {0}")]
    InvalidRate(f64),
    #[error("need at least 2 snapshots, got {0}")]
    TooFewSnapshots(usize),
    #[error("ensemble size must be >= 2, got {0}")]
    TooFewMembers(usize),
    #[error("training case {0} has no target")]
    MissingTarget(usize),
    #[error(transparent)]
    Backbone(#[from] BackboneError),
    #[error(transparent)]
    Ensemble(#[from] crate::ensemble::EnsembleError),
}

/// Where test-time dropout masks apply. In this backbone the readout
/// consumes the pooled features directly, so both locations act on the same
/// vector; the distinction is kept for config compatibility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropoutLocation {
    PooledFeatures,
    ReadoutInputs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DropoutSpec {
    pub rate: f64,
    pub location: DropoutLocation,
}

impl DropoutSpec {
    pub fn new(rate: f64, location: DropoutLocation) -> Result<Self, BaselineError> {
        if !(0.0..1.0).contains(&rate) {
            return Err(BaselineError::InvalidRate(rate));
        }
        Ok(DropoutSpec { rate, location })
    }
}

/// Gaussian over readout parameters `[w; b]` (bias last): SWA mean plus a
/// diagonal covariance from the SGD trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutPosterior {
    pub mean: Vec<f64>,
    pub diag_variance: Vec<f64>,
}

/// MC dropout at test time: each pass zeroes pooled-feature coordinates
/// independently with probability `rate` and rescales survivors by
/// `1/(1-rate)` (inverted dropout), then applies the frozen readout.
pub fn mc_dropout_ensemble(
    model: &ModelBundle,
    input: &InputCase,
    spec: DropoutSpec,
    m: usize,
    seed: u64,
) -> Result<PredictiveEnsemble, BaselineError> {
    if m < 2 {
        return Err(BaselineError::TooFewMembers(m));
    }
    let phi = pooled_features(model, input)?;
    let deterministic = dot(&model.readout.weights, &phi) + model.readout.bias;
    let keep_scale = 1.0 / (1.0 - spec.rate);
    let samples: Vec<f64> = (0..m as u64)
        .map(|pass| {
            let mut rng = substream(seed, domain::DROPOUT, &[pass]);
            let mut acc = 0.0;
            for (&w, &f) in model.readout.weights.iter().zip(&phi) {
                let keep = spec.rate == 0.0 || rng.random::<f64>() >= spec.rate;
                if keep {
                    acc += w * f * keep_scale;
                }
            }
            acc + model.readout.bias
        })
        .collect();
    Ok(PredictiveEnsemble::new(
        samples,
        deterministic,
        EnsembleMeta {
            method: "mc_dropout".into(),
            params: format!("rate={}", spec.rate),
            master_seed: seed,
        },
    )?)
}

/// SGD settings for the SWAG trajectory over the readout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwagConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub snapshot_every: usize,
    pub batch_size: usize,
    pub ridge: f64,
}

impl Default for SwagConfig {
    fn default() -> Self {
        SwagConfig {
            steps: 200,
            learning_rate: 2e-3,
            snapshot_every: 5,
            batch_size: 8,
            ridge: 1e-3,
        }
    }
}

/// Mini-batch SGD on the ridge objective over readout parameters, starting
/// from the model's fitted readout. Returns one parameter snapshot
/// (`[w; b]`) every `snapshot_every` steps.
pub fn sgd_snapshots(
    model: &ModelBundle,
    train: &[InputCase],
    config: &SwagConfig,
    seed: u64,
) -> Result<Vec<Vec<f64>>, BaselineError> {
    let mut features = Vec::with_capacity(train.len());
    let mut targets = Vec::with_capacity(train.len());
    for (i, case) in train.iter().enumerate() {
        let y = case.target.ok_or(BaselineError::MissingTarget(i))?;
        features.push(pooled_features(model, case)?);
        targets.push(y);
    }
    let d = model.readout.weights.len();
    let n = features.len();
    let mut theta = model.readout.weights.clone();
    theta.push(model.readout.bias);
    let mut snapshots = Vec::new();
    let batch = config.batch_size.max(1).min(n);
    for step in 0..config.steps {
        let mut rng = substream(seed, domain::SWAG_SGD, &[step as u64]);
        let mut grad = vec![0.0; d + 1];
        for _ in 0..batch {
            let idx = rng.random_range(0..n);
            let phi = &features[idx];
            let resid = targets[idx] - dot(&theta[..d], phi) - theta[d];
            for (g, &p) in grad.iter_mut().zip(phi) {
                *g += -2.0 * resid * p;
            }
            grad[d] += -2.0 * resid;
        }
        // Per-example gradient scale plus the ridge term on the weights.
        let scale = 1.0 / batch as f64;
        for (j, g) in grad.iter_mut().enumerate() {
            *g *= scale;
            if j < d {
                *g += 2.0 * config.ridge * theta[j] / n as f64;
            }
        }
        for (t, g) in theta.iter_mut().zip(&grad) {
            *t -= config.learning_rate * g;
        }
        if (step + 1) % config.snapshot_every == 0 {
            snapshots.push(theta.clone());
        }
    }
    Ok(snapshots)
}

/// SWA mean and diagonal second-moment variance of a parameter trajectory:
/// `mean = avg(theta)`, `var = avg(theta^2) - mean^2`, clamped at zero.
pub fn posterior_from_snapshots(snapshots: &[Vec<f64>]) -> Result<ReadoutPosterior, BaselineError> {
    if snapshots.len() < 2 {
        return Err(BaselineError::TooFewSnapshots(snapshots.len()));
    }
    let t = snapshots.len() as f64;
    let dim = snapshots[0].len();
    let mut mean = vec![0.0; dim];
    let mut second = vec![0.0; dim];
    for snap in snapshots {
        debug_assert_eq!(snap.len(), dim);
        for ((m, s), &v) in mean.iter_mut().zip(&mut second).zip(snap) {
            *m += v;
            *s += v * v;
        }
    }
    for (m, s) in mean.iter_mut().zip(&mut second) {
        *m /= t;
        *s = (*s / t - *m * *m).max(0.0);
    }
    Ok(ReadoutPosterior {
        mean,
        diag_variance: second,
    })
}

/// SWAG-diagonal over the readout: run the SGD trajectory, collect
/// snapshots, return the SWA mean and clamped diagonal variance.
pub fn swag_diag_readout(
    model: &ModelBundle,
    train: &[InputCase],
    config: &SwagConfig,
    seed: u64,
) -> Result<ReadoutPosterior, BaselineError> {
    let snapshots = sgd_snapshots(model, train, config, seed)?;
    posterior_from_snapshots(&snapshots)
}

/// Sample readout parameters from `N(mean, 0.5 * variance_scale * diag)` and
/// evaluate each draw on the frozen pooled features. The 0.5 factor is the
/// half-covariance sampling convention; `variance_scale` exposes the
/// variance sweep (default 1).
pub fn swag_diag_ensemble(
    model: &ModelBundle,
    posterior: &ReadoutPosterior,
    input: &InputCase,
    variance_scale: f64,
    m: usize,
    seed: u64,
) -> Result<PredictiveEnsemble, BaselineError> {
    if m < 2 {
        return Err(BaselineError::TooFewMembers(m));
    }
    let phi = pooled_features(model, input)?;
    let deterministic = forward_deterministic(model, input)?;
    let d = phi.len();
    debug_assert_eq!(posterior.mean.len(), d + 1);
    let sd: Vec<f64> = posterior
        .diag_variance
        .iter()
        .map(|v| (0.5 * variance_scale * v).sqrt())
        .collect();
    let samples: Vec<f64> = (0..m as u64)
        .map(|pass| {
            let mut rng = substream(seed, domain::SWAG_SAMPLE, &[pass]);
            let mut acc = 0.0;
            for j in 0..d {
                let z: f64 = StandardNormal.sample(&mut rng);
                acc += (posterior.mean[j] + sd[j] * z) * phi[j];
            }
            let z: f64 = StandardNormal.sample(&mut rng);
            acc + posterior.mean[d] + sd[d] * z
        })
        .collect();
    Ok(PredictiveEnsemble::new(
        samples,
        deterministic,
        EnsembleMeta {
            method: "swag_diag".into(),
            params: format!("scale={variance_scale}"),
            master_seed: seed,
        },
    )?)
}

/// Bootstrap indices for ensemble member `member`: `n` draws with
/// replacement from `0..n`.
pub(crate) fn bootstrap_indices(seed: u64, member: u64, n: usize) -> Vec<usize> {
    let mut rng = substream(seed, domain::BOOTSTRAP, &[member]);
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Deep ensemble over the readout: `l` ridge refits on bootstrap resamples
/// of the training cases (the frozen encoder is shared).
pub fn deep_ensemble_readout(
    model: &ModelBundle,
    train: &[InputCase],
    ridge: f64,
    l: usize,
    seed: u64,
) -> Result<Vec<ModelBundle>, BaselineError> {
    if l < 2 {
        return Err(BaselineError::TooFewMembers(l));
    }
    let mut features = Vec::with_capacity(train.len());
    let mut targets = Vec::with_capacity(train.len());
    for (i, case) in train.iter().enumerate() {
        let y = case.target.ok_or(BaselineError::MissingTarget(i))?;
        features.push(pooled_features(model, case)?);
        targets.push(y);
    }
    let mut members = Vec::with_capacity(l);
    for member in 0..l as u64 {
        let idx = bootstrap_indices(seed, member, train.len());
        let boot_features: Vec<Vec<f64>> = idx.iter().map(|&i| features[i].clone()).collect();
        let boot_targets: Vec<f64> = idx.iter().map(|&i| targets[i]).collect();
        let (weights, bias) = ridge_fit(&boot_features, &boot_targets, ridge)?;
        let mut bundle = model.clone();
        bundle.readout = Readout { weights, bias };
        members.push(bundle);
    }
    Ok(members)
}

/// Pool the members' predictions at one input into an ensemble of size `l`.
/// `deterministic_value` stays the base model's prediction.
pub fn deep_ensemble_predictions(
    model: &ModelBundle,
    members: &[ModelBundle],
    input: &InputCase,
    seed: u64,
) -> Result<PredictiveEnsemble, BaselineError> {
    if members.len() < 2 {
        return Err(BaselineError::TooFewMembers(members.len()));
    }
    let deterministic = forward_deterministic(model, input)?;
    let samples: Result<Vec<f64>, BackboneError> = members
        .iter()
        .map(|m| forward_deterministic(m, input))
        .collect();
    Ok(PredictiveEnsemble::new(
        samples?,
        deterministic,
        EnsembleMeta {
            method: "deep_ensemble".into(),
            params: format!("members={}", members.len()),
            master_seed: seed,
        },
    )?)
}
