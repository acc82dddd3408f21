//! Probabilistic-forecast verification for scalar predictive ensembles.
//!
//! Calibration is read through the probability integral transform: the
//! empirical predictive CDF evaluated at each realized outcome. Exact
//! calibration makes PIT values uniform on [0, 1]; the Wasserstein-1
//! distance to the uniform distribution summarizes the departure as one
//! scalar. Coverage and mean interval width report the same phenomenon at
//! fixed levels, and the CRPS decomposition
//! `crps = E|X - y| - 0.5 E|X - X'|` splits a proper score into prediction
//! error and spread reward. Temperature scaling rescales ensembles about
//! their means to post-correct miscalibrated baselines.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensemble::{central_interval, empirical_cdf, PredictiveEnsemble};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("length mismatch: {0} ensembles vs {1} targets")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("empty calibration split")]
    EmptyCalibration,
    #[error("PIT value {0} outside [0, 1]")]
    OutOfRange(f64),
}

/// PIT values on [0, 1], one per test case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PITSample {
    values: Vec<f64>,
}

impl PITSample {
    pub fn new(values: Vec<f64>) -> Result<Self, MetricsError> {
        if values.is_empty() {
            return Err(MetricsError::Empty);
        }
        if let Some(&v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(MetricsError::OutOfRange(v));
        }
        Ok(PITSample { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Histogram over `bins` equal-width bins; the last bin is closed at 1.
    pub fn histogram(&self, bins: usize) -> Vec<usize> {
        let mut counts = vec![0usize; bins];
        for &v in &self.values {
            let idx = ((v * bins as f64) as usize).min(bins - 1);
            counts[idx] += 1;
        }
        counts
    }
}

/// Accuracy, calibration, sharpness, and score summaries for one method on
/// one dataset split. `coverage` and `sharpness` are keyed by the coverage
/// level formatted with two decimals ("0.95").
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub method: String,
    pub dataset: String,
    pub seed: u64,
    pub rmse: f64,
    pub mae: f64,
    pub pit_w1: f64,
    pub coverage: std::collections::BTreeMap<String, f64>,
    pub sharpness: std::collections::BTreeMap<String, f64>,
    pub crps: f64,
    pub crps_error_term: f64,
    pub crps_spread_term: f64,
    pub energy_score: f64,
}

impl MetricReport {
    /// The identities every report must satisfy before it is written out.
    pub fn validate(&self) -> Result<(), MetricsError> {
        let identity = (self.crps - (self.crps_error_term - self.crps_spread_term)).abs();
        if identity > 1e-10 {
            return Err(MetricsError::OutOfRange(identity));
        }
        for &c in self.coverage.values() {
            if !(0.0..=1.0).contains(&c) {
                return Err(MetricsError::OutOfRange(c));
            }
        }
        Ok(())
    }
}

/// PIT: the empirical predictive CDF of each ensemble evaluated at its
/// target, mid-distribution convention at ties.
pub fn pit(
    ensembles: &[PredictiveEnsemble],
    targets: &[f64],
) -> Result<PITSample, MetricsError> {
    if ensembles.len() != targets.len() {
        return Err(MetricsError::LengthMismatch(ensembles.len(), targets.len()));
    }
    if ensembles.is_empty() {
        return Err(MetricsError::Empty);
    }
    let values = ensembles
        .iter()
        .zip(targets)
        .map(|(e, &y)| empirical_cdf(e, y))
        .collect();
    PITSample::new(values)
}

/// Exact Wasserstein-1 distance between the empirical distribution of the
/// PIT values and U[0, 1]: the integral of |F_hat(t) - t| over [0, 1],
/// evaluated segment by segment between sorted values (the integrand is
/// piecewise |c - t| with one possible crossing per segment).
pub fn w1_to_uniform(pit: &PITSample) -> Result<f64, MetricsError> {
    let mut sorted = pit.values.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;

    // Integral of |t - c| over [t0, t1].
    fn seg(c: f64, t0: f64, t1: f64) -> f64 {
        debug_assert!(t0 <= t1);
        if c <= t0 {
            ((t1 - c) * (t1 - c) - (t0 - c) * (t0 - c)) / 2.0
        } else if c >= t1 {
            ((c - t0) * (c - t0) - (c - t1) * (c - t1)) / 2.0
        } else {
            ((t0 - c) * (t0 - c) + (t1 - c) * (t1 - c)) / 2.0
        }
    }

    let mut total = 0.0;
    let mut prev = 0.0;
    for (i, &v) in sorted.iter().enumerate() {
        total += seg(i as f64 / n, prev, v);
        prev = v;
    }
    total += seg(1.0, prev, 1.0);
    Ok(total)
}

/// Empirical coverage of the closed central interval at `level`, and the
/// mean interval width (sharpness).
pub fn coverage_and_sharpness(
    ensembles: &[PredictiveEnsemble],
    targets: &[f64],
    level: f64,
) -> Result<(f64, f64), MetricsError> {
    if ensembles.len() != targets.len() {
        return Err(MetricsError::LengthMismatch(ensembles.len(), targets.len()));
    }
    if ensembles.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut covered = 0usize;
    let mut width_sum = 0.0;
    for (e, &y) in ensembles.iter().zip(targets) {
        let (lo, hi) = central_interval(e, level);
        // Closed interval: endpoint hits count as covered.
        if y >= lo && y <= hi {
            covered += 1;
        }
        width_sum += hi - lo;
    }
    Ok((
        covered as f64 / ensembles.len() as f64,
        width_sum / ensembles.len() as f64,
    ))
}

/// CRPS of the empirical predictive distribution against a scalar target,
/// split into `(crps, error_term, spread_term)`:
/// error `= (1/M) sum |x_m - y|`, spread `= (1/(2 M^2)) sum_all_pairs
/// |x_m - x_k|` (self-pairs included), `crps = error - spread`.
pub fn crps_decomposed(
    ensemble: &PredictiveEnsemble,
    target: f64,
) -> Result<(f64, f64, f64), MetricsError> {
    let m = ensemble.len();
    if m < 2 {
        return Err(MetricsError::TooFewSamples(m));
    }
    let mf = m as f64;
    let error: f64 = ensemble.samples.iter().map(|x| (x - target).abs()).sum::<f64>() / mf;
    // All-pairs sum via order statistics: sum_{i,j} |x_i - x_j|
    // = 2 * sum_i (2i - m + 1) x_(i).
    let mut sorted = ensemble.samples.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pair_sum: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| (2.0 * i as f64 - mf + 1.0) * x)
        .sum::<f64>()
        * 2.0;
    let spread = pair_sum / (2.0 * mf * mf);
    Ok((error - spread, error, spread))
}

/// Energy score with the same all-pairs estimator. For scalar outputs this
/// coincides with `crps_decomposed`; computed here by the direct double loop
/// as an independent route.
pub fn energy_score(ensemble: &PredictiveEnsemble, target: f64) -> Result<f64, MetricsError> {
    let m = ensemble.len();
    if m < 2 {
        return Err(MetricsError::TooFewSamples(m));
    }
    let mf = m as f64;
    let error: f64 = ensemble.samples.iter().map(|x| (x - target).abs()).sum::<f64>() / mf;
    let mut pair_sum = 0.0;
    for &a in &ensemble.samples {
        for &b in &ensemble.samples {
            pair_sum += (a - b).abs();
        }
    }
    Ok(error - pair_sum / (2.0 * mf * mf))
}

/// Rescale every sample about its ensemble mean: `mean + tau * (x - mean)`.
/// `tau = 1` is the bitwise identity.
pub fn apply_temperature(ensembles: &[PredictiveEnsemble], tau: f64) -> Vec<PredictiveEnsemble> {
    if tau == 1.0 {
        return ensembles.to_vec();
    }
    ensembles
        .iter()
        .map(|e| {
            let mean = e.mean();
            let samples = e.samples.iter().map(|x| mean + tau * (x - mean)).collect();
            PredictiveEnsemble {
                samples,
                deterministic_value: e.deterministic_value,
                meta: e.meta.clone(),
            }
        })
        .collect()
}

const TAU_LO: f64 = 1e-2;
const TAU_HI: f64 = 1e3;

/// Fit the temperature by golden-section search over `log tau` in
/// `[1e-2, 1e3]`, minimizing the PIT Wasserstein-1 distance to uniform on
/// the calibration split.
pub fn fit_temperature(
    cal_ensembles: &[PredictiveEnsemble],
    cal_targets: &[f64],
) -> Result<f64, MetricsError> {
    if cal_ensembles.is_empty() {
        return Err(MetricsError::EmptyCalibration);
    }
    if cal_ensembles.len() != cal_targets.len() {
        return Err(MetricsError::LengthMismatch(
            cal_ensembles.len(),
            cal_targets.len(),
        ));
    }
    let objective = |ln_tau: f64| -> f64 {
        let scaled = apply_temperature(cal_ensembles, ln_tau.exp());
        let p = pit(&scaled, cal_targets).expect("lengths checked");
        w1_to_uniform(&p).expect("nonempty")
    };
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut a = TAU_LO.ln();
    let mut b = TAU_HI.ln();
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = objective(c);
    let mut fd = objective(d);
    for _ in 0..90 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = objective(d);
        }
    }
    Ok(((a + b) / 2.0).exp())
}

/// Fit `tau` on the calibration split, then scale the evaluation split with
/// the same `tau`. Returns `(tau, scaled evaluation ensembles)`.
pub fn temperature_scale(
    cal_ensembles: &[PredictiveEnsemble],
    cal_targets: &[f64],
    eval_ensembles: &[PredictiveEnsemble],
) -> Result<(f64, Vec<PredictiveEnsemble>), MetricsError> {
    let tau = fit_temperature(cal_ensembles, cal_targets)?;
    Ok((tau, apply_temperature(eval_ensembles, tau)))
}

/// Alternative temperature criterion: bisection on `log tau` until the
/// empirical coverage at `level` matches `target_coverage`. Coverage is
/// monotone nondecreasing in `tau`.
pub fn fit_temperature_coverage(
    cal_ensembles: &[PredictiveEnsemble],
    cal_targets: &[f64],
    level: f64,
    target_coverage: f64,
) -> Result<f64, MetricsError> {
    if cal_ensembles.is_empty() {
        return Err(MetricsError::EmptyCalibration);
    }
    if cal_ensembles.len() != cal_targets.len() {
        return Err(MetricsError::LengthMismatch(
            cal_ensembles.len(),
            cal_targets.len(),
        ));
    }
    let coverage_at = |ln_tau: f64| -> f64 {
        let scaled = apply_temperature(cal_ensembles, ln_tau.exp());
        coverage_and_sharpness(&scaled, cal_targets, level)
            .expect("lengths checked")
            .0
    };
    let mut lo = TAU_LO.ln();
    let mut hi = TAU_HI.ln();
    if coverage_at(lo) >= target_coverage {
        return Ok(TAU_LO);
    }
    if coverage_at(hi) <= target_coverage {
        return Ok(TAU_HI);
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if coverage_at(mid) < target_coverage {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// Standard point-accuracy summaries: `(rmse, mae)`.
pub fn point_accuracy(predictions: &[f64], targets: &[f64]) -> Result<(f64, f64), MetricsError> {
    if predictions.len() != targets.len() {
        return Err(MetricsError::LengthMismatch(predictions.len(), targets.len()));
    }
    if predictions.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = predictions.len() as f64;
    let mut sq = 0.0;
    let mut abs = 0.0;
    for (&p, &y) in predictions.iter().zip(targets) {
        let e = p - y;
        sq += e * e;
        abs += e.abs();
    }
    Ok(((sq / n).sqrt(), abs / n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::EnsembleMeta;
    use crate::rng::{domain, substream};
    use proptest::prelude::*;
    use rand_distr::{Distribution, Normal};

    fn meta() -> EnsembleMeta {
        EnsembleMeta {
            method: "test".into(),
            params: String::new(),
            master_seed: 0,
        }
    }

    fn ens(samples: &[f64]) -> PredictiveEnsemble {
        PredictiveEnsemble::new(samples.to_vec(), 0.0, meta()).unwrap()
    }

    /// Critical value of chi-square with 19 degrees of freedom at p = 0.99.
    const CHI2_19_CRIT_99: f64 = 36.1909;

    #[test]
    fn pit_examples() {
        let e = ens(&[1.0, 2.0, 3.0]);
        let p = pit(std::slice::from_ref(&e), &[0.0]).unwrap();
        assert_eq!(p.values(), &[0.0]);
        // Degenerate ensemble at the target: mid-distribution tie rule gives 0.5.
        let d = ens(&[2.0, 2.0, 2.0]);
        let p = pit(&[d.clone(), d], &[2.0, 2.0]).unwrap();
        assert_eq!(p.values(), &[0.5, 0.5]);
        assert!(matches!(
            pit(&[ens(&[1.0, 2.0])], &[0.0, 1.0]),
            Err(MetricsError::LengthMismatch(1, 2))
        ));
    }

    #[test]
    fn pit_self_consistency_chi_square() {
        // Ensembles and targets from the same generator: the PIT histogram
        // over 20 bins must be flat at chi-square p > 0.01. With M = 39
        // samples the discrete PIT grid {k/39} puts exactly 2 of the 40
        // equally likely values in each bin, so the multinomial is exact.
        let n_cases = 5000;
        let m = 39;
        let mut ensembles = Vec::with_capacity(n_cases);
        let mut targets = Vec::with_capacity(n_cases);
        for i in 0..n_cases {
            let mut rng = substream(101, domain::DATA, &[i as u64]);
            let samples: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
            ensembles.push(PredictiveEnsemble::new(samples, 0.5, meta()).unwrap());
            targets.push(rng.random::<f64>());
        }
        let p = pit(&ensembles, &targets).unwrap();
        let counts = p.histogram(20);
        let expected = n_cases as f64 / 20.0;
        let stat: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        assert!(
            stat < CHI2_19_CRIT_99,
            "chi-square {stat} >= {CHI2_19_CRIT_99}; counts {counts:?}"
        );
    }

    #[test]
    fn w1_examples() {
        // Single PIT value 0.5: area below = 0.125, above = 0.125.
        let p = PITSample::new(vec![0.5]).unwrap();
        assert!((w1_to_uniform(&p).unwrap() - 0.25).abs() < 1e-15);
        // Near-perfect uniform grid.
        let grid: Vec<f64> = (1..=100).map(|i| (i as f64 - 0.5) / 100.0).collect();
        let p = PITSample::new(grid).unwrap();
        assert!(w1_to_uniform(&p).unwrap() < 0.005);
        // All mass at one endpoint.
        let p = PITSample::new(vec![0.0; 10]).unwrap();
        assert!((w1_to_uniform(&p).unwrap() - 0.5).abs() < 1e-15);
        let p = PITSample::new(vec![1.0; 10]).unwrap();
        assert!((w1_to_uniform(&p).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn coverage_examples() {
        // Targets at the ensemble median are always covered.
        let e = ens(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let (cov, _) = coverage_and_sharpness(&[e.clone(), e], &[3.0, 3.0], 0.5).unwrap();
        assert_eq!(cov, 1.0);
        // Degenerate ensembles away from the target: coverage 0, width 0.
        let d = ens(&[7.0, 7.0, 7.0]);
        let (cov, width) = coverage_and_sharpness(&[d], &[1.0], 0.9).unwrap();
        assert_eq!((cov, width), (0.0, 0.0));
    }

    #[test]
    fn coverage_gaussian_self_consistency() {
        // Gaussian ensembles with targets from the same Gaussian: empirical
        // coverage at level 0.95 within +-0.02 over 5000 cases.
        let n_cases = 5000;
        let m = 2000;
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut covered = 0usize;
        for i in 0..n_cases {
            let mut rng = substream(103, domain::DATA, &[i as u64]);
            let mu = 3.0 * (i as f64 / n_cases as f64 - 0.5);
            let samples: Vec<f64> = (0..m).map(|_| mu + normal.sample(&mut rng)).collect();
            let e = PredictiveEnsemble::new(samples, mu, meta()).unwrap();
            let y = mu + normal.sample(&mut rng);
            let (lo, hi) = crate::ensemble::central_interval(&e, 0.95);
            if y >= lo && y <= hi {
                covered += 1;
            }
        }
        let cov = covered as f64 / n_cases as f64;
        assert!((cov - 0.95).abs() <= 0.02, "coverage {cov}");
    }

    #[test]
    fn crps_pair_enumeration() {
        let e = ens(&[0.0, 2.0]);
        let (crps, error, spread) = crps_decomposed(&e, 1.0).unwrap();
        assert_eq!(error, 1.0);
        assert_eq!(spread, 0.5);
        assert_eq!(crps, 0.5);
    }

    #[test]
    fn crps_degenerate_limits() {
        let at_target = ens(&[3.0, 3.0, 3.0]);
        assert_eq!(crps_decomposed(&at_target, 3.0).unwrap(), (0.0, 0.0, 0.0));
        // Deterministic-forecast limit: reduces to absolute error.
        let off = ens(&[6.0, 6.0, 6.0]);
        let (crps, error, spread) = crps_decomposed(&off, 3.0).unwrap();
        assert_eq!((crps, error, spread), (3.0, 3.0, 0.0));
    }

    #[test]
    fn energy_equals_crps_for_scalars() {
        let e = ens(&[0.0, 2.0]);
        assert_eq!(energy_score(&e, 1.0).unwrap(), 0.5);
        assert_eq!(energy_score(&ens(&[4.0, 4.0]), 4.0).unwrap(), 0.0);
        for i in 0..1000u64 {
            let mut rng = substream(104, domain::DATA, &[i]);
            let m = 2 + (rng.random::<u64>() % 30) as usize;
            let samples: Vec<f64> = (0..m).map(|_| rng.random::<f64>() * 10.0 - 5.0).collect();
            let y = rng.random::<f64>() * 10.0 - 5.0;
            let e = ens(&samples);
            let (crps, _, _) = crps_decomposed(&e, y).unwrap();
            let es = energy_score(&e, y).unwrap();
            assert!((crps - es).abs() < 1e-12, "crps {crps} vs energy {es}");
        }
    }

    #[test]
    fn temperature_identity_is_bitwise() {
        let ensembles = vec![ens(&[1.0, 2.5, -0.3]), ens(&[0.1, 0.2, 0.44])];
        let scaled = apply_temperature(&ensembles, 1.0);
        assert_eq!(ensembles, scaled);
    }

    /// Gaussian ensembles around per-case means with ensemble std
    /// `spread`, targets drawn with noise std `truth`.
    fn gaussian_rig(
        n_cases: usize,
        m: usize,
        spread: f64,
        truth: f64,
        seed: u64,
    ) -> (Vec<PredictiveEnsemble>, Vec<f64>) {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut ensembles = Vec::with_capacity(n_cases);
        let mut targets = Vec::with_capacity(n_cases);
        for i in 0..n_cases {
            let mut rng = substream(seed, domain::DATA, &[i as u64]);
            let mu = (i as f64 * 0.37).sin() * 2.0;
            let samples: Vec<f64> = (0..m)
                .map(|_| mu + spread * normal.sample(&mut rng))
                .collect();
            ensembles.push(PredictiveEnsemble::new(samples, mu, meta()).unwrap());
            targets.push(mu + truth * normal.sample(&mut rng));
        }
        (ensembles, targets)
    }

    #[test]
    fn temperature_fixes_underdispersion() {
        // Ensembles 10x too narrow: tau lands near 10 and W1 improves.
        let (ensembles, targets) = gaussian_rig(400, 100, 0.1, 1.0, 105);
        let before = w1_to_uniform(&pit(&ensembles, &targets).unwrap()).unwrap();
        let (tau, scaled) = temperature_scale(&ensembles, &targets, &ensembles).unwrap();
        let after = w1_to_uniform(&pit(&scaled, &targets).unwrap()).unwrap();
        assert!((tau - 10.0).abs() / 10.0 < 0.2, "tau {tau}");
        assert!(after < before, "W1 {before} -> {after}");
    }

    #[test]
    fn temperature_near_identity_when_calibrated() {
        let (ensembles, targets) = gaussian_rig(400, 100, 1.0, 1.0, 106);
        let before = w1_to_uniform(&pit(&ensembles, &targets).unwrap()).unwrap();
        let tau = fit_temperature(&ensembles, &targets).unwrap();
        let after =
            w1_to_uniform(&pit(&apply_temperature(&ensembles, tau), &targets).unwrap()).unwrap();
        assert!((0.8..=1.25).contains(&tau), "tau {tau}");
        assert!(after <= before + 0.01, "W1 {before} -> {after}");
    }

    #[test]
    fn temperature_preserves_means() {
        let (ensembles, _) = gaussian_rig(50, 64, 0.5, 1.0, 107);
        for tau in [0.25, 2.0, 17.0] {
            let scaled = apply_temperature(&ensembles, tau);
            for (orig, s) in ensembles.iter().zip(&scaled) {
                let m0 = orig.mean();
                let m1 = s.mean();
                assert!((m0 - m1).abs() <= 1e-10 * m0.abs().max(1.0));
            }
        }
    }

    #[test]
    fn shrinking_calibrated_ensembles_worsens_w1() {
        // Monotonicity smoke test at tau in {0.25, 0.5, 1}.
        let (ensembles, targets) = gaussian_rig(500, 100, 1.0, 1.0, 108);
        let w1_at = |tau: f64| {
            w1_to_uniform(&pit(&apply_temperature(&ensembles, tau), &targets).unwrap()).unwrap()
        };
        let w_full = w1_at(1.0);
        let w_half = w1_at(0.5);
        let w_quarter = w1_at(0.25);
        assert!(w_half >= w_full - 5e-3, "{w_half} vs {w_full}");
        assert!(w_quarter >= w_half - 5e-3, "{w_quarter} vs {w_half}");
        assert!(w_quarter > w_full, "{w_quarter} vs {w_full}");
    }

    #[test]
    fn coverage_matching_mode_hits_target() {
        let (ensembles, targets) = gaussian_rig(400, 100, 0.2, 1.0, 109);
        let tau =
            fit_temperature_coverage(&ensembles, &targets, 0.95, 0.95).unwrap();
        let scaled = apply_temperature(&ensembles, tau);
        let (cov, _) = coverage_and_sharpness(&scaled, &targets, 0.95).unwrap();
        assert!((cov - 0.95).abs() <= 0.03, "coverage {cov} at tau {tau}");
    }

    #[test]
    fn point_accuracy_examples() {
        assert_eq!(
            point_accuracy(&[1.0, 2.0], &[1.0, 2.0]).unwrap(),
            (0.0, 0.0)
        );
        assert_eq!(
            point_accuracy(&[3.0, 4.0], &[1.0, 2.0]).unwrap(),
            (2.0, 2.0)
        );
        let (rmse, mae) = point_accuracy(&[3.0, -1.0], &[0.0, 0.0]).unwrap();
        assert!((rmse - 5.0f64.sqrt()).abs() < 1e-15);
        assert_eq!(mae, 2.0);
    }

    #[test]
    fn report_validation_catches_broken_identity() {
        let mut report = MetricReport {
            method: "sa".into(),
            dataset: "test".into(),
            seed: 0,
            rmse: 1.0,
            mae: 1.0,
            pit_w1: 0.1,
            coverage: Default::default(),
            sharpness: Default::default(),
            crps: 0.5,
            crps_error_term: 1.0,
            crps_spread_term: 0.5,
            energy_score: 0.5,
        };
        report.validate().unwrap();
        report.crps = 0.7;
        assert!(report.validate().is_err());
    }

    proptest! {
        #[test]
        fn prop_crps_identity_and_propriety(
            samples in proptest::collection::vec(-20.0f64..20.0, 2..50),
            target in -25.0f64..25.0,
        ) {
            let e = ens(&samples);
            let (crps, error, spread) = crps_decomposed(&e, target).unwrap();
            prop_assert!((crps - (error - spread)).abs() < 1e-12);
            prop_assert!(crps >= -1e-12, "crps {crps}");
            prop_assert!(spread >= -1e-12);
        }

        #[test]
        fn prop_w1_bounds(
            values in proptest::collection::vec(0.0f64..=1.0, 1..60),
        ) {
            let p = PITSample::new(values).unwrap();
            let w1 = w1_to_uniform(&p).unwrap();
            prop_assert!((0.0..=0.5 + 1e-12).contains(&w1));
        }

        #[test]
        fn prop_scaling_never_changes_means_hence_rankings(
            base in proptest::collection::vec(-5.0f64..5.0, 4..20),
            tau in 0.1f64..10.0,
        ) {
            let e = ens(&base);
            let scaled = apply_temperature(std::slice::from_ref(&e), tau);
            prop_assert!((scaled[0].mean() - e.mean()).abs() < 1e-10);
        }
    }
}
