//! Calibration-loss estimation for the concentration parameter.
//!
//! The loss compares two magnitudes on held-out data: the stochastic
//! deviation `delta = |f_nu(x) - f(x)|` induced by attention sampling, and
//! the observed residual `r = |y - f(x)|`. Matching their scales is the
//! criterion that selects `nu`. Estimates average `(delta - r)^2` over `B`
//! sampled cases and `M` stochastic passes per case; the same pass set also
//! yields the deviation-scale proxy `s(nu)` and residual scale `s0` used by
//! the Bayesian-optimization surrogate.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attention::ConcentrationParam;
use crate::backbone::{forward_deterministic, forward_stochastic, BackboneError, InputCase, ModelBundle};
use crate::rng::{domain, substream};

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("input case has no target")]
    MissingTarget,
    #[error("calibration batch has no cases")]
    EmptyBatch,
    #[error("need at least 2 deviation samples, got {0}")]
    TooFewSamples(usize),
    #[error(transparent)]
    Backbone(#[from] BackboneError),
}

/// Held-out cases plus the sampling budget for one loss evaluation:
/// `B` case draws, `M` stochastic passes per case.
#[derive(Debug, Clone)]
pub struct CalibrationBatch {
    pub cases: Vec<InputCase>,
    pub b: usize,
    pub m: usize,
}

impl CalibrationBatch {
    pub fn new(cases: Vec<InputCase>, b: usize, m: usize) -> Result<Self, CalibrationError> {
        if cases.is_empty() || b == 0 || m == 0 {
            return Err(CalibrationError::EmptyBatch);
        }
        if cases.iter().any(|c| c.target.is_none()) {
            return Err(CalibrationError::MissingTarget);
        }
        Ok(CalibrationBatch { cases, b, m })
    }
}

/// One unit of optimization history: a loss estimate at one `nu` together
/// with the deviation-scale and residual-scale proxies from the same passes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub nu: u64,
    pub loss_estimate: f64,
    pub scale_estimate: f64,
    pub target_scale: f64,
}

/// Per-case evaluation detail: the deviation samples and the residual they
/// were compared against.
#[derive(Debug, Clone)]
pub struct CaseDiagnostics {
    pub deltas: Vec<f64>,
    pub residual: f64,
}

/// `|f_nu(x) - f(x)|` for one stochastic pass.
pub fn deviation_magnitude(
    model: &ModelBundle,
    input: &InputCase,
    nu: ConcentrationParam,
    pass_index: u64,
    master_seed: u64,
) -> Result<f64, CalibrationError> {
    let det = forward_deterministic(model, input)?;
    let sto = forward_stochastic(model, input, nu, pass_index, master_seed)?;
    Ok((sto - det).abs())
}

/// `|y - f(x)|` for one labelled case.
pub fn residual_magnitude(model: &ModelBundle, input: &InputCase) -> Result<f64, CalibrationError> {
    let y = input.target.ok_or(CalibrationError::MissingTarget)?;
    let det = forward_deterministic(model, input)?;
    Ok((y - det).abs())
}

/// Indices of the `B` cases used by one evaluation: a seeded shuffle of the
/// case list, drawn without replacement, reshuffling whenever a full pass is
/// exhausted (only relevant when `B` exceeds the case count).
fn batch_indices(n_cases: usize, b: usize, master_seed: u64) -> Vec<usize> {
    let mut indices = Vec::with_capacity(b);
    let mut round = 0u64;
    while indices.len() < b {
        let mut perm: Vec<usize> = (0..n_cases).collect();
        let mut rng = substream(master_seed, domain::EVAL_LOSS, &[round]);
        perm.shuffle(&mut rng);
        let take = (b - indices.len()).min(n_cases);
        indices.extend_from_slice(&perm[..take]);
        round += 1;
    }
    indices
}

/// Pure arithmetic core shared by the estimator and its tests: fold per-case
/// deviation samples and residuals into a record.
pub fn accumulate_record(
    nu: u64,
    per_case: &[CaseDiagnostics],
) -> Result<CalibrationRecord, CalibrationError> {
    if per_case.is_empty() {
        return Err(CalibrationError::EmptyBatch);
    }
    let b = per_case.len() as f64;
    let mut loss = 0.0;
    let mut scale = 0.0;
    let mut target = 0.0;
    let mut total_passes = 0usize;
    for case in per_case {
        let m = case.deltas.len() as f64;
        let ell: f64 = case
            .deltas
            .iter()
            .map(|d| (d - case.residual) * (d - case.residual))
            .sum();
        // Decomposition identity: mean squared discrepancy equals population
        // variance plus squared bias, checked on every evaluation in tests.
        debug_assert!(
            case.deltas.len() < 2 || {
                let (var, bias_sq) = loss_decomposition(&case.deltas, case.residual)
                    .expect("len checked");
                ((var + bias_sq) - ell / m).abs() <= 1e-10 * (ell / m).max(1e-300)
            },
            "variance + bias^2 does not reproduce the mean squared discrepancy"
        );
        loss += ell / m;
        scale += case.deltas.iter().sum::<f64>();
        target += case.residual;
        total_passes += case.deltas.len();
    }
    Ok(CalibrationRecord {
        nu,
        loss_estimate: loss / b,
        scale_estimate: scale / total_passes as f64,
        target_scale: target / b,
    })
}

/// Estimate the calibration loss at `nu`, returning per-case diagnostics.
pub fn eval_loss_detailed(
    model: &ModelBundle,
    batch: &CalibrationBatch,
    nu: ConcentrationParam,
    master_seed: u64,
) -> Result<(CalibrationRecord, Vec<CaseDiagnostics>), CalibrationError> {
    let indices = batch_indices(batch.cases.len(), batch.b, master_seed);
    let per_case: Result<Vec<CaseDiagnostics>, CalibrationError> = indices
        .par_iter()
        .enumerate()
        .map(|(slot, &case_idx)| {
            let case = &batch.cases[case_idx];
            let residual = residual_magnitude(model, case)?;
            let det = forward_deterministic(model, case)?;
            let deltas: Result<Vec<f64>, BackboneError> = (0..batch.m as u64)
                .map(|m| {
                    let pass = slot as u64 * batch.m as u64 + m;
                    Ok((forward_stochastic(model, case, nu, pass, master_seed)? - det).abs())
                })
                .collect();
            Ok(CaseDiagnostics {
                deltas: deltas?,
                residual,
            })
        })
        .collect();
    let per_case = per_case?;
    let record = accumulate_record(nu.get(), &per_case)?;
    Ok((record, per_case))
}

/// Estimate the calibration loss at `nu` on `B` sampled cases with `M`
/// passes each. Deterministic given `(master_seed, batch)`.
pub fn eval_loss(
    model: &ModelBundle,
    batch: &CalibrationBatch,
    nu: ConcentrationParam,
    master_seed: u64,
) -> Result<CalibrationRecord, CalibrationError> {
    Ok(eval_loss_detailed(model, batch, nu, master_seed)?.0)
}

/// Split the mean squared discrepancy into its variance and squared-bias
/// parts: `(Var_pop(delta), (mean(delta) - r)^2)`. Population variance
/// (divide by M) so the two parts sum exactly to `mean((delta - r)^2)`.
pub fn loss_decomposition(deltas: &[f64], residual: f64) -> Result<(f64, f64), CalibrationError> {
    if deltas.len() < 2 {
        return Err(CalibrationError::TooFewSamples(deltas.len()));
    }
    let m = deltas.len() as f64;
    let mean = deltas.iter().sum::<f64>() / m;
    let variance = deltas.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / m;
    let bias = mean - residual;
    Ok((variance, bias * bias))
}
