//! One-dimensional Bayesian optimization over the integer concentration
//! parameter.
//!
//! Loss evaluations are noisy Monte Carlo estimates, so the search works
//! through a conjugate Bayesian surrogate on the deviation scale rather than
//! on the loss directly: `ln s(nu) = a ln nu + ln b + eps z`, a normal
//! inverse-gamma regression of log-scale on log-nu. Each iteration draws
//! surrogate parameters by Thompson sampling, minimizes the expected squared
//! discrepancy between the surrogate scale and the residual target scale in
//! closed form, and projects onto the integer domain. The returned optimum is
//! always the argmin of the recorded loss estimates, never the surrogate's
//! opinion.
//!
//! With lognormal noise `zeta`, `E[zeta] = exp(eps^2/2)` and
//! `E[zeta^2] = exp(2 eps^2)`, so for `u = b nu^a` the objective
//! `E[(u zeta - s0)^2] = u^2 e^{2 eps^2} - 2 s0 u e^{eps^2/2} + s0^2`
//! is quadratic in `u` with minimizer `u* = s0 exp(-3 eps^2 / 2)`.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attention::ConcentrationParam;
use crate::calibration::{eval_loss, CalibrationBatch, CalibrationError, CalibrationRecord};
use crate::linalg::{cholesky2, inv2};
use crate::rng::{domain, substream};

#[derive(Debug, Error)]
pub enum BayesOptError {
    #[error("need at least 2 history points with distinct nu to fit the surrogate")]
    DegenerateDesign,
    #[error("scale estimate must be positive to fit the log-log surrogate")]
    NonPositiveScale,
    #[error("surrogate exponent a = 0: flat in nu, falling back to exploration")]
    ZeroExponent,
    #[error("empty search domain")]
    EmptyDomain,
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
}

/// Integer interval of admissible `nu` values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchDomain {
    pub nu_min: u64,
    pub nu_max: u64,
}

impl SearchDomain {
    pub fn new(nu_min: u64, nu_max: u64) -> Result<Self, BayesOptError> {
        if nu_min == 0 || nu_min > nu_max {
            return Err(BayesOptError::EmptyDomain);
        }
        Ok(SearchDomain { nu_min, nu_max })
    }

    pub fn contains(&self, nu: u64) -> bool {
        (self.nu_min..=self.nu_max).contains(&nu)
    }

    pub fn len(&self) -> u64 {
        self.nu_max - self.nu_min + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Normal inverse-gamma prior for the log-log regression: coefficients
/// `(a, ln b) ~ N(mean, eps^2 / precision * I)`, `eps^2 ~ IG(shape, scale)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NigPrior {
    pub coeff_mean: [f64; 2],
    pub coeff_precision: f64,
    pub ig_shape: f64,
    pub ig_scale: f64,
}

impl Default for NigPrior {
    /// Weakly informative: mean slope -1 encodes the expected decreasing
    /// scale trend and washes out after a couple of observations. The noise
    /// prior scale is near zero so the residual sum of squares dominates
    /// `eps^2` immediately; a noiseless history collapses the noise
    /// posterior instead of being floored by the prior.
    fn default() -> Self {
        NigPrior {
            coeff_mean: [-1.0, 0.0],
            coeff_precision: 1e-8,
            ig_shape: 1.0,
            ig_scale: 1e-6,
        }
    }
}

/// Posterior of the Bayesian log-log surrogate. `coeff_cov_factor` is the
/// matrix `V` in `(a, ln b) | eps^2 ~ N(mean, eps^2 V)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogatePosterior {
    pub coeff_mean: [f64; 2],
    pub coeff_cov_factor: [[f64; 2]; 2],
    pub ig_shape: f64,
    pub ig_scale: f64,
    pub n_obs: usize,
}

impl SurrogatePosterior {
    /// Marginal mean of the noise variance, defined for `ig_shape > 1`.
    pub fn noise_variance_mean(&self) -> f64 {
        self.ig_scale / (self.ig_shape - 1.0)
    }
}

/// Fit the surrogate under the default weak prior.
pub fn fit_surrogate(history: &[CalibrationRecord]) -> Result<SurrogatePosterior, BayesOptError> {
    fit_surrogate_with_prior(history, &NigPrior::default())
}

/// Conjugate update of the normal inverse-gamma regression of `ln s` on
/// `(ln nu, 1)`. Only records with positive scale enter the fit.
pub fn fit_surrogate_with_prior(
    history: &[CalibrationRecord],
    prior: &NigPrior,
) -> Result<SurrogatePosterior, BayesOptError> {
    if history.iter().any(|r| r.scale_estimate <= 0.0) {
        return Err(BayesOptError::NonPositiveScale);
    }
    let rows: Vec<([f64; 2], f64)> = history
        .iter()
        .map(|r| ([(r.nu as f64).ln(), 1.0], r.scale_estimate.ln()))
        .collect();
    let distinct = {
        let mut nus: Vec<u64> = history.iter().map(|r| r.nu).collect();
        nus.sort_unstable();
        nus.dedup();
        nus.len()
    };
    if distinct < 2 {
        return Err(BayesOptError::DegenerateDesign);
    }

    // Precision-form update: Lambda_n = Lambda_0 + X^T X,
    // m_n = V_n (Lambda_0 m_0 + X^T y).
    let l0 = prior.coeff_precision;
    let mut lambda = [[l0, 0.0], [0.0, l0]];
    let mut rhs = [l0 * prior.coeff_mean[0], l0 * prior.coeff_mean[1]];
    let mut yty = 0.0;
    for (x, y) in &rows {
        for i in 0..2 {
            for j in 0..2 {
                lambda[i][j] += x[i] * x[j];
            }
            rhs[i] += x[i] * y;
        }
        yty += y * y;
    }
    let v = inv2(lambda).ok_or(BayesOptError::DegenerateDesign)?;
    let mean = [
        v[0][0] * rhs[0] + v[0][1] * rhs[1],
        v[1][0] * rhs[0] + v[1][1] * rhs[1],
    ];
    let m0_l0_m0 = l0
        * (prior.coeff_mean[0] * prior.coeff_mean[0] + prior.coeff_mean[1] * prior.coeff_mean[1]);
    let mn_ln_mn = mean[0] * rhs[0] + mean[1] * rhs[1];
    let shape = prior.ig_shape + rows.len() as f64 / 2.0;
    let scale = (prior.ig_scale + 0.5 * (yty + m0_l0_m0 - mn_ln_mn)).max(1e-300);
    Ok(SurrogatePosterior {
        coeff_mean: mean,
        coeff_cov_factor: v,
        ig_shape: shape,
        ig_scale: scale,
        n_obs: rows.len(),
    })
}

/// Thompson sample `(a, ln b, eps^2)` from the posterior: `eps^2` from its
/// inverse-gamma marginal, then coefficients from the conditional normal.
pub fn thompson_draw<R: Rng + ?Sized>(
    posterior: &SurrogatePosterior,
    rng: &mut R,
) -> (f64, f64, f64) {
    let gamma = Gamma::new(posterior.ig_shape, 1.0).expect("positive shape");
    let eps2 = posterior.ig_scale / gamma.sample(rng).max(1e-300);
    let l = cholesky2(posterior.coeff_cov_factor);
    let z0: f64 = StandardNormal.sample(rng);
    let z1: f64 = StandardNormal.sample(rng);
    let sd = eps2.sqrt();
    let a = posterior.coeff_mean[0] + sd * l[0][0] * z0;
    let ln_b = posterior.coeff_mean[1] + sd * (l[1][0] * z0 + l[1][1] * z1);
    (a, ln_b, eps2)
}

/// Expected squared discrepancy between the surrogate scale at `nu` and the
/// target scale, for sampled parameters. This is the acquisition objective.
pub fn acquisition_objective(a: f64, ln_b: f64, eps2: f64, s0: f64, nu: f64) -> f64 {
    let u = (ln_b + a * nu.ln()).exp();
    u * u * (2.0 * eps2).exp() - 2.0 * s0 * u * (eps2 / 2.0).exp() + s0 * s0
}

/// Round half-way cases toward the smaller integer.
fn round_ties_down(x: f64) -> u64 {
    let floor = x.floor();
    if x - floor > 0.5 {
        floor as u64 + 1
    } else {
        floor.max(0.0) as u64
    }
}

/// Closed-form acquisition minimizer: solves `b nu^a = s0 exp(-3 eps^2 / 2)`
/// for the continuous minimizer and projects to the nearest integer in the
/// domain (ties toward smaller nu, out-of-range onto the nearer endpoint).
pub fn acquisition_minimizer(
    a: f64,
    ln_b: f64,
    eps2: f64,
    s0: f64,
    domain: SearchDomain,
) -> Result<u64, BayesOptError> {
    assert!(s0 > 0.0, "target scale must be positive");
    if a == 0.0 {
        return Err(BayesOptError::ZeroExponent);
    }
    let ln_nu_star = (s0.ln() - 1.5 * eps2 - ln_b) / a;
    Ok(project_log(ln_nu_star, domain))
}

fn project_log(ln_nu_star: f64, domain: SearchDomain) -> u64 {
    if ln_nu_star <= (domain.nu_min as f64).ln() {
        return domain.nu_min;
    }
    if ln_nu_star >= (domain.nu_max as f64).ln() {
        return domain.nu_max;
    }
    round_ties_down(ln_nu_star.exp()).clamp(domain.nu_min, domain.nu_max)
}

/// Continuous minimizer in nu (unclamped); used to pick the step direction
/// for repeat avoidance.
fn continuous_minimizer(a: f64, ln_b: f64, eps2: f64, s0: f64) -> f64 {
    ((s0.ln() - 1.5 * eps2 - ln_b) / a).exp()
}

/// First unevaluated integer reachable from `candidate`, stepping first
/// toward the continuous minimizer, then the other way. Returns `candidate`
/// itself when the whole domain is exhausted.
fn avoid_repeats(
    candidate: u64,
    continuous: f64,
    domain: SearchDomain,
    evaluated: &std::collections::BTreeSet<u64>,
) -> u64 {
    if !evaluated.contains(&candidate) {
        return candidate;
    }
    let toward_larger = continuous > candidate as f64;
    let directions: [i64; 2] = if toward_larger { [1, -1] } else { [-1, 1] };
    for dir in directions {
        let mut probe = candidate as i64 + dir;
        while probe >= domain.nu_min as i64 && probe <= domain.nu_max as i64 {
            if !evaluated.contains(&(probe as u64)) {
                return probe as u64;
            }
            probe += dir;
        }
    }
    candidate
}

/// Geometric midpoint of `[lo, hi]`, rounded with ties toward smaller nu.
fn geometric_midpoint(lo: u64, hi: u64) -> u64 {
    round_ties_down(((lo as f64).ln() * 0.5 + (hi as f64).ln() * 0.5).exp())
}

/// Propose the next `nu` to evaluate.
///
/// With fewer than two usable history points (positive scale, distinct nu)
/// the suggestion is space-filling: the geometric midpoint of the widest
/// unexplored log-subinterval. Otherwise fit, Thompson-draw, and minimize the
/// acquisition in closed form. Already-evaluated integers are skipped by
/// stepping toward the continuous minimizer unless the domain is exhausted.
pub fn suggest_next<R: Rng + ?Sized>(
    history: &[CalibrationRecord],
    domain: SearchDomain,
    s0_estimate: f64,
    rng: &mut R,
) -> u64 {
    let evaluated: std::collections::BTreeSet<u64> = history.iter().map(|r| r.nu).collect();
    let usable: Vec<CalibrationRecord> = history
        .iter()
        .filter(|r| r.scale_estimate > 0.0)
        .cloned()
        .collect();
    let distinct_usable = {
        let mut nus: Vec<u64> = usable.iter().map(|r| r.nu).collect();
        nus.sort_unstable();
        nus.dedup();
        nus.len()
    };

    if distinct_usable < 2 {
        // Space-filling: bisect the widest unexplored log-interval.
        let mut anchors: Vec<u64> = evaluated
            .iter()
            .copied()
            .filter(|&nu| domain.contains(nu))
            .collect();
        anchors.insert(0, domain.nu_min);
        anchors.push(domain.nu_max);
        anchors.sort_unstable();
        anchors.dedup();
        let (mut best_lo, mut best_hi, mut best_span) = (domain.nu_min, domain.nu_max, -1.0);
        for pair in anchors.windows(2) {
            let span = (pair[1] as f64).ln() - (pair[0] as f64).ln();
            if span > best_span {
                best_span = span;
                best_lo = pair[0];
                best_hi = pair[1];
            }
        }
        let candidate = geometric_midpoint(best_lo, best_hi);
        return avoid_repeats(candidate, candidate as f64, domain, &evaluated);
    }

    match fit_surrogate(&usable) {
        Ok(posterior) => {
            let (a, ln_b, eps2) = thompson_draw(&posterior, rng);
            match acquisition_minimizer(a, ln_b, eps2, s0_estimate, domain) {
                Ok(candidate) => {
                    let continuous = continuous_minimizer(a, ln_b, eps2, s0_estimate);
                    avoid_repeats(candidate, continuous, domain, &evaluated)
                }
                Err(_) => uniform_fallback(domain, &evaluated, rng),
            }
        }
        Err(_) => uniform_fallback(domain, &evaluated, rng),
    }
}

fn uniform_fallback<R: Rng + ?Sized>(
    domain: SearchDomain,
    evaluated: &std::collections::BTreeSet<u64>,
    rng: &mut R,
) -> u64 {
    let candidate = rng.random_range(domain.nu_min..=domain.nu_max);
    avoid_repeats(candidate, candidate as f64, domain, evaluated)
}

/// One BO iteration as persisted in the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoIteration {
    pub iteration: usize,
    pub nu: u64,
    pub record: CalibrationRecord,
    pub posterior: Option<SurrogatePosterior>,
    pub s0: f64,
}

/// Calibrate `nu`: `K` rounds of suggest -> evaluate -> append, then return
/// the history argmin by loss estimate (ties toward smaller nu).
///
/// The target scale `s0` is computed once from the full calibration split and
/// held fixed across iterations.
pub fn calibrate_nu(
    model: &crate::backbone::ModelBundle,
    batch: &CalibrationBatch,
    domain: SearchDomain,
    budget: usize,
    master_seed: u64,
) -> Result<(ConcentrationParam, Vec<BoIteration>), BayesOptError> {
    assert!(budget >= 1, "BO budget must be >= 1");
    let mut s0 = 0.0;
    for case in &batch.cases {
        s0 += crate::calibration::residual_magnitude(model, case)?;
    }
    s0 /= batch.cases.len() as f64;

    let mut history: Vec<CalibrationRecord> = Vec::with_capacity(budget);
    let mut trace: Vec<BoIteration> = Vec::with_capacity(budget);
    for k in 0..budget {
        let mut rng = substream(master_seed, domain::BO_SUGGEST, &[k as u64]);
        let nu = suggest_next(&history, domain, s0, &mut rng);
        debug_assert!(domain.contains(nu));
        let eval_seed = crate::rng::mix_key(master_seed, domain::EVAL_LOSS, &[k as u64]);
        let record = eval_loss(
            model,
            batch,
            ConcentrationParam::new(nu).expect("domain nu >= 1"),
            eval_seed,
        )?;
        history.push(record.clone());
        let posterior = fit_surrogate(&history).ok();
        trace.push(BoIteration {
            iteration: k,
            nu,
            record,
            posterior,
            s0,
        });
    }

    let best = history
        .iter()
        .fold(None::<&CalibrationRecord>, |best, r| match best {
            None => Some(r),
            Some(b) => {
                if r.loss_estimate < b.loss_estimate
                    || (r.loss_estimate == b.loss_estimate && r.nu < b.nu)
                {
                    Some(r)
                } else {
                    Some(b)
                }
            }
        })
        .expect("budget >= 1");
    Ok((
        ConcentrationParam::new(best.nu).expect("history nu >= 1"),
        trace,
    ))
}
