//! Predictive ensembles from repeated stochastic forward passes, plus the
//! empirical-distribution summaries the metrics are built on.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attention::ConcentrationParam;
use crate::backbone::{forward_deterministic, forward_stochastic, BackboneError, InputCase, ModelBundle};

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("an ensemble needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("non-finite sample at index {0}")]
    NonFiniteSample(usize),
    #[error(transparent)]
    Backbone(#[from] BackboneError),
}

/// Which mechanism produced an ensemble, and under what settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMeta {
    pub method: String,
    pub params: String,
    pub master_seed: u64,
}

/// `M` sampled outputs for one input: the implicit predictive distribution
/// around the deterministic value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveEnsemble {
    pub samples: Vec<f64>,
    pub deterministic_value: f64,
    pub meta: EnsembleMeta,
}

impl PredictiveEnsemble {
    pub fn new(
        samples: Vec<f64>,
        deterministic_value: f64,
        meta: EnsembleMeta,
    ) -> Result<Self, EnsembleError> {
        if samples.len() < 2 {
            return Err(EnsembleError::TooFewSamples(samples.len()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(EnsembleError::NonFiniteSample(i));
        }
        Ok(PredictiveEnsemble {
            samples,
            deterministic_value,
            meta,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.len() as f64
    }
}

/// Draw an `M`-sample stochastic-attention ensemble; sample `m` is the
/// forward pass with `pass_index = m`, so ensembles compose exactly from
/// individual passes and are reproducible by construction.
pub fn draw_ensemble(
    model: &ModelBundle,
    input: &InputCase,
    nu: ConcentrationParam,
    m: usize,
    master_seed: u64,
) -> Result<PredictiveEnsemble, EnsembleError> {
    if m < 2 {
        return Err(EnsembleError::TooFewSamples(m));
    }
    let deterministic_value = forward_deterministic(model, input)?;
    let samples: Result<Vec<f64>, BackboneError> = (0..m as u64)
        .into_par_iter()
        .map(|pass| forward_stochastic(model, input, nu, pass, master_seed))
        .collect();
    PredictiveEnsemble::new(
        samples?,
        deterministic_value,
        EnsembleMeta {
            method: "sa".into(),
            params: format!("nu={}", nu.get()),
            master_seed,
        },
    )
}

/// Empirical CDF with the mid-distribution convention at ties:
/// `(#below + 0.5 * #equal) / M`.
pub fn empirical_cdf(ensemble: &PredictiveEnsemble, point: f64) -> f64 {
    let mut below = 0usize;
    let mut equal = 0usize;
    for &s in &ensemble.samples {
        if s < point {
            below += 1;
        } else if s == point {
            equal += 1;
        }
    }
    (below as f64 + 0.5 * equal as f64) / ensemble.len() as f64
}

/// Central interval at the given coverage level, endpoints from type-7
/// (linear-interpolation) empirical quantiles of the samples.
pub fn central_interval(ensemble: &PredictiveEnsemble, level: f64) -> (f64, f64) {
    assert!(
        level > 0.0 && level < 1.0,
        "level must be in (0, 1), got {level}"
    );
    let mut sorted = ensemble.samples.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let alpha = (1.0 - level) / 2.0;
    (quantile_sorted(&sorted, alpha), quantile_sorted(&sorted, 1.0 - alpha))
}

/// Type-7 quantile on a pre-sorted slice: `h = (n-1) q`, linear between
/// order statistics.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    debug_assert!(n > 0);
    let h = (n as f64 - 1.0) * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = h - lo as f64;
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backbone::{fit_readout, init_encoder, EncoderConfig, Readout};
    use proptest::prelude::*;

    fn meta() -> EnsembleMeta {
        EnsembleMeta {
            method: "test".into(),
            params: String::new(),
            master_seed: 0,
        }
    }

    fn ensemble(samples: &[f64]) -> PredictiveEnsemble {
        PredictiveEnsemble::new(samples.to_vec(), 0.0, meta()).unwrap()
    }

    fn toy_model(seed: u64) -> ModelBundle {
        let cfg = EncoderConfig {
            n_layers: 2,
            n_heads: 2,
            d_model: 8,
            d_ff: 16,
            n_tokens: 3,
            seed,
        };
        let mut m = init_encoder(&cfg).unwrap();
        m.readout = Readout {
            weights: (0..8).map(|i| 0.15 * (i as f64 - 3.0)).collect(),
            bias: 0.2,
        };
        m.with_all_layers_stochastic()
    }

    #[test]
    fn ensemble_composes_from_individual_passes() {
        let m = toy_model(1);
        let input = InputCase::new(vec![0.4, -0.6, 1.0], None);
        let nu = ConcentrationParam::new(3).unwrap();
        let ens = draw_ensemble(&m, &input, nu, 2, 909).unwrap();
        let p0 = forward_stochastic(&m, &input, nu, 0, 909).unwrap();
        let p1 = forward_stochastic(&m, &input, nu, 1, 909).unwrap();
        assert_eq!(ens.samples, vec![p0, p1]);
        assert_eq!(
            ens.deterministic_value,
            forward_deterministic(&m, &input).unwrap()
        );
    }

    #[test]
    fn degenerate_attention_gives_degenerate_ensemble() {
        // One token per sequence makes every attention row one-hot.
        let cfg = EncoderConfig {
            n_layers: 2,
            n_heads: 2,
            d_model: 8,
            d_ff: 16,
            n_tokens: 1,
            seed: 2,
        };
        let mut m = init_encoder(&cfg).unwrap();
        m.readout = Readout {
            weights: vec![0.5; 8],
            bias: -1.0,
        };
        let m = m.with_all_layers_stochastic();
        let input = InputCase::new(vec![0.7, -0.1], None);
        let ens =
            draw_ensemble(&m, &input, ConcentrationParam::new(2).unwrap(), 16, 5).unwrap();
        for &s in &ens.samples {
            assert_eq!(s, ens.deterministic_value);
        }
    }

    #[test]
    fn ensembles_are_reproducible() {
        let m = toy_model(3);
        let input = InputCase::new(vec![0.9, 0.2, -0.5], None);
        let nu = ConcentrationParam::new(4).unwrap();
        let a = draw_ensemble(&m, &input, nu, 64, 17).unwrap();
        let b = draw_ensemble(&m, &input, nu, 64, 17).unwrap();
        assert_eq!(a.samples, b.samples);
    }

    #[test]
    fn sample_mean_near_deterministic_at_large_nu() {
        // Recovery + CLT: at nu = 1000 the ensemble mean sits within
        // 3 * std/sqrt(M) of the deterministic value, plus the small O(1/nu)
        // nonlinearity bias absorbed by the band.
        let m = fit_readout(
            &toy_model(4),
            &(0..40)
                .map(|i| {
                    let x = i as f64 * 0.15 - 3.0;
                    InputCase::new(vec![x], Some((1.5 * x).sin()))
                })
                .collect::<Vec<_>>(),
            1e-3,
        )
        .unwrap();
        let input = InputCase::new(vec![0.33], None);
        let ens = draw_ensemble(
            &m,
            &input,
            ConcentrationParam::new(1000).unwrap(),
            500,
            23,
        )
        .unwrap();
        let mean = ens.mean();
        let var = ens
            .samples
            .iter()
            .map(|s| (s - mean) * (s - mean))
            .sum::<f64>()
            / ens.len() as f64;
        let stderr = (var / ens.len() as f64).sqrt();
        assert!(
            (mean - ens.deterministic_value).abs() <= 3.0 * stderr + 1e-4,
            "mean {mean} vs det {} (3se = {})",
            ens.deterministic_value,
            3.0 * stderr
        );
    }

    #[test]
    fn rejects_too_few_samples() {
        let m = toy_model(5);
        let input = InputCase::new(vec![1.0], None);
        assert!(matches!(
            draw_ensemble(&m, &input, ConcentrationParam::new(2).unwrap(), 1, 0),
            Err(EnsembleError::TooFewSamples(1))
        ));
    }

    #[test]
    fn cdf_examples() {
        let ens = ensemble(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(empirical_cdf(&ens, 0.5), 0.0);
        assert_eq!(empirical_cdf(&ens, 2.5), 0.5);
        assert_eq!(empirical_cdf(&ens, 9.0), 1.0);
        // Counting oracle with ties: (1 + 0.5*2)/4 = 0.5.
        let tied = ensemble(&[1.0, 2.0, 2.0, 3.0]);
        assert_eq!(empirical_cdf(&tied, 2.0), 0.5);
    }

    #[test]
    fn interval_examples() {
        let constant = ensemble(&[3.0; 8]);
        assert_eq!(central_interval(&constant, 0.9), (3.0, 3.0));
        // 101 equally spaced points: order-statistic interpolation gives
        // exactly the 5th and 95th values.
        let grid: Vec<f64> = (0..=100).map(|i| i as f64).collect();
        let ens = ensemble(&grid);
        let (lo, hi) = central_interval(&ens, 0.9);
        assert!((lo - 5.0).abs() < 1e-9 && (hi - 95.0).abs() < 1e-9, "({lo}, {hi})");
        // level -> 1 approaches (min, max).
        let (lo, hi) = central_interval(&ens, 1.0 - 1e-12);
        assert!((lo - 0.0).abs() < 1e-8 && (hi - 100.0).abs() < 1e-8);
    }

    proptest! {
        #[test]
        fn prop_cdf_monotone_and_bounded(
            samples in proptest::collection::vec(-50.0f64..50.0, 2..40),
            points in proptest::collection::vec(-60.0f64..60.0, 2..10),
        ) {
            let ens = ensemble(&samples);
            let min = samples.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut pts = points.clone();
            pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut prev = 0.0;
            for &p in &pts {
                let c = empirical_cdf(&ens, p);
                prop_assert!((0.0..=1.0).contains(&c));
                prop_assert!(c + 1e-15 >= prev);
                prev = c;
            }
            prop_assert_eq!(empirical_cdf(&ens, min - 1.0), 0.0);
            prop_assert_eq!(empirical_cdf(&ens, max + 1.0), 1.0);
        }

        #[test]
        fn prop_interval_width_monotone_in_level(
            samples in proptest::collection::vec(-50.0f64..50.0, 3..40),
            lo_level in 0.1f64..0.5,
            hi_level in 0.5f64..0.99,
        ) {
            let ens = ensemble(&samples);
            let (a1, b1) = central_interval(&ens, lo_level);
            let (a2, b2) = central_interval(&ens, hi_level);
            prop_assert!(a1 <= b1 && a2 <= b2);
            prop_assert!(b2 - a2 + 1e-12 >= b1 - a1);
        }
    }
}
