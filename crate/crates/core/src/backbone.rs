//! A small frozen transformer encoder for scalar regression.
//!
//! The encoder is never trained: weights are drawn once from a seeded
//! scaled-Gaussian scheme and stay fixed. Accuracy comes from a closed-form
//! ridge fit of a linear readout over mean-pooled encoder features. The
//! stochastic forward pass is identical to the deterministic one except that
//! attention rows in the configured `stochastic_layers` replace their softmax
//! weights with multinomial samples, each row drawing from an independent
//! substream keyed by `(master_seed, pass_index, layer, head, row)`.

use std::collections::BTreeSet;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attention::{
    sample_stochastic_weights, softmax_weights, weighted_rows, AttentionError,
    ConcentrationParam, ScoreVector, ValueMatrix,
};
use crate::linalg::{dot, solve, Mat};
use crate::rng::{domain, substream};

const LN_EPS: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum BackboneError {
    #[error("invalid encoder config: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("no stochastic layers enabled on this model")]
    NoStochasticLayers,
    #[error("normal system is singular; use ridge > 0")]
    SingularSystem,
    #[error("need at least {0} training cases with targets")]
    TooFewCases(usize),
    #[error("training case {0} has no target")]
    MissingTarget(usize),
    #[error(transparent)]
    Attention(#[from] AttentionError),
}

/// Architecture of the frozen encoder. `seed` fixes every weight.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderConfig {
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_model: usize,
    pub d_ff: usize,
    pub n_tokens: usize,
    pub seed: u64,
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<(), BackboneError> {
        if self.n_layers == 0
            || self.n_heads == 0
            || self.d_model == 0
            || self.d_ff == 0
            || self.n_tokens == 0
        {
            return Err(BackboneError::InvalidConfig(
                "all dimensions must be >= 1".into(),
            ));
        }
        if self.d_model % self.n_heads != 0 {
            return Err(BackboneError::InvalidConfig(format!(
                "d_model ({}) must be divisible by n_heads ({})",
                self.d_model, self.n_heads
            )));
        }
        Ok(())
    }
}

/// One input case: a flat feature vector plus an optional scalar target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputCase {
    pub features: Vec<f64>,
    pub target: Option<f64>,
}

impl InputCase {
    pub fn new(features: Vec<f64>, target: Option<f64>) -> Self {
        InputCase { features, target }
    }
}

/// Weights for one encoder layer; all matrices row-major flat arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerWeights {
    pub wq: Vec<f64>,
    pub wk: Vec<f64>,
    pub wv: Vec<f64>,
    pub wo: Vec<f64>,
    pub ln1_gamma: Vec<f64>,
    pub ln1_beta: Vec<f64>,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub ln2_gamma: Vec<f64>,
    pub ln2_beta: Vec<f64>,
}

/// Linear readout over mean-pooled encoder features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Readout {
    pub weights: Vec<f64>,
    pub bias: f64,
}

/// Frozen encoder weights plus the fitted readout: the deterministic
/// predictor. Immutable after `fit_readout`; forward passes are pure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub config: EncoderConfig,
    pub layers: Vec<LayerWeights>,
    pub readout: Readout,
    pub stochastic_layers: BTreeSet<usize>,
}

impl ModelBundle {
    /// Enable stochastic attention on the given layers.
    pub fn with_stochastic_layers(mut self, layers: BTreeSet<usize>) -> Self {
        self.stochastic_layers = layers;
        self
    }

    /// Enable stochastic attention on every layer.
    pub fn with_all_layers_stochastic(mut self) -> Self {
        self.stochastic_layers = (0..self.config.n_layers).collect();
        self
    }

    /// Shape consistency of every stored weight against the config.
    pub fn validate(&self) -> Result<(), BackboneError> {
        self.config.validate()?;
        let d = self.config.d_model;
        if self.layers.len() != self.config.n_layers {
            return Err(BackboneError::DimensionMismatch(format!(
                "{} layers stored, config says {}",
                self.layers.len(),
                self.config.n_layers
            )));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            let checks = [
                (layer.wq.len(), d * d, "wq"),
                (layer.wk.len(), d * d, "wk"),
                (layer.wv.len(), d * d, "wv"),
                (layer.wo.len(), d * d, "wo"),
                (layer.ln1_gamma.len(), d, "ln1_gamma"),
                (layer.ln1_beta.len(), d, "ln1_beta"),
                (layer.w1.len(), d * self.config.d_ff, "w1"),
                (layer.b1.len(), self.config.d_ff, "b1"),
                (layer.w2.len(), self.config.d_ff * d, "w2"),
                (layer.b2.len(), d, "b2"),
                (layer.ln2_gamma.len(), d, "ln2_gamma"),
                (layer.ln2_beta.len(), d, "ln2_beta"),
            ];
            for (got, want, name) in checks {
                if got != want {
                    return Err(BackboneError::DimensionMismatch(format!(
                        "layer {i} {name}: {got} values, expected {want}"
                    )));
                }
            }
        }
        if self.readout.weights.len() != d {
            return Err(BackboneError::DimensionMismatch(format!(
                "readout width {} vs pooled feature width {d}",
                self.readout.weights.len()
            )));
        }
        if let Some(&l) = self.stochastic_layers.iter().find(|&&l| l >= self.config.n_layers) {
            return Err(BackboneError::DimensionMismatch(format!(
                "stochastic layer index {l} out of range"
            )));
        }
        Ok(())
    }
}

fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, std: f64) -> Vec<f64> {
    let normal = Normal::new(0.0, std).expect("positive std");
    (0..rows * cols).map(|_| normal.sample(rng)).collect()
}

/// Build a frozen encoder from the config. Weights are a deterministic
/// function of `config.seed`; the readout starts at zero and
/// `stochastic_layers` starts empty.
pub fn init_encoder(config: &EncoderConfig) -> Result<ModelBundle, BackboneError> {
    config.validate()?;
    let d = config.d_model;
    let d_ff = config.d_ff;
    let attn_std = 1.0 / (d as f64).sqrt();
    let ff_out_std = 1.0 / (d_ff as f64).sqrt();
    let mut layers = Vec::with_capacity(config.n_layers);
    for l in 0..config.n_layers {
        let mut rng = substream(config.seed, domain::ENCODER_INIT, &[l as u64]);
        layers.push(LayerWeights {
            wq: gaussian_matrix(&mut rng, d, d, attn_std),
            wk: gaussian_matrix(&mut rng, d, d, attn_std),
            wv: gaussian_matrix(&mut rng, d, d, attn_std),
            wo: gaussian_matrix(&mut rng, d, d, attn_std),
            ln1_gamma: vec![1.0; d],
            ln1_beta: vec![0.0; d],
            w1: gaussian_matrix(&mut rng, d, d_ff, attn_std),
            b1: vec![0.0; d_ff],
            w2: gaussian_matrix(&mut rng, d_ff, d, ff_out_std),
            b2: vec![0.0; d],
            ln2_gamma: vec![1.0; d],
            ln2_beta: vec![0.0; d],
        });
    }
    Ok(ModelBundle {
        config: config.clone(),
        layers,
        readout: Readout {
            weights: vec![0.0; d],
            bias: 0.0,
        },
        stochastic_layers: BTreeSet::new(),
    })
}

/// How attention weights are produced during a forward pass.
#[derive(Debug, Clone, Copy)]
enum AttentionMode {
    Deterministic,
    Stochastic {
        nu: ConcentrationParam,
        pass_index: u64,
        master_seed: u64,
    },
}

fn layer_norm(x: &[f64], gamma: &[f64], beta: &[f64], out: &mut [f64]) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let inv = 1.0 / (var + LN_EPS).sqrt();
    for ((o, &v), (&g, &b)) in out.iter_mut().zip(x).zip(gamma.iter().zip(beta)) {
        *o = g * (v - mean) * inv + b;
    }
}

#[inline]
fn gelu(x: f64) -> f64 {
    const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
    0.5 * x * (1.0 + (SQRT_2_OVER_PI * (x + 0.044_715 * x * x * x)).tanh())
}

/// Split `input.features` into `n_tokens` zero-padded patches of equal width.
fn patchify(features: &[f64], n_tokens: usize) -> Result<(Vec<f64>, usize), BackboneError> {
    if features.is_empty() {
        return Err(BackboneError::DimensionMismatch(
            "input has no features".into(),
        ));
    }
    if let Some(i) = features.iter().position(|v| !v.is_finite()) {
        return Err(BackboneError::DimensionMismatch(format!(
            "non-finite feature at index {i}"
        )));
    }
    let width = features.len().div_ceil(n_tokens);
    let mut patches = vec![0.0; n_tokens * width];
    patches[..features.len()].copy_from_slice(features);
    Ok((patches, width))
}

/// Patch-embedding matrix: derived from the model seed and the patch width,
/// so it never needs to be stored with the model.
fn patch_embedding(seed: u64, width: usize, d_model: usize) -> Vec<f64> {
    let mut rng = substream(seed, domain::PATCH_EMBED, &[width as u64]);
    gaussian_matrix(&mut rng, width, d_model, 1.0 / (width as f64).sqrt())
}

/// Run the encoder and return mean-pooled features of width `d_model`.
fn encode(
    model: &ModelBundle,
    input: &InputCase,
    mode: AttentionMode,
) -> Result<Vec<f64>, BackboneError> {
    let cfg = &model.config;
    let d = cfg.d_model;
    let n_tok = cfg.n_tokens;
    let n_heads = cfg.n_heads;
    let d_head = d / n_heads;
    let scale = 1.0 / (d_head as f64).sqrt();

    let (patches, width) = patchify(&input.features, n_tok)?;
    let embed = patch_embedding(cfg.seed, width, d);
    let embed_mat = Mat {
        rows: width,
        cols: d,
        data: embed,
    };

    // Token states, row-major [n_tok, d].
    let mut x = vec![0.0; n_tok * d];
    for t in 0..n_tok {
        let patch = &patches[t * width..(t + 1) * width];
        let row = crate::linalg::vec_mat(patch, &embed_mat);
        x[t * d..(t + 1) * d].copy_from_slice(&row);
    }

    let mut normed = vec![0.0; n_tok * d];
    let mut q = vec![0.0; n_tok * d];
    let mut k = vec![0.0; n_tok * d];
    let mut v = vec![0.0; n_tok * d];
    let mut attn_out = vec![0.0; n_tok * d];

    for (layer_idx, layer) in model.layers.iter().enumerate() {
        // Attention sublayer, pre-norm.
        for t in 0..n_tok {
            layer_norm(
                &x[t * d..(t + 1) * d],
                &layer.ln1_gamma,
                &layer.ln1_beta,
                &mut normed[t * d..(t + 1) * d],
            );
        }
        project(&normed, &layer.wq, n_tok, d, &mut q);
        project(&normed, &layer.wk, n_tok, d, &mut k);
        project(&normed, &layer.wv, n_tok, d, &mut v);

        let stochastic_here = matches!(mode, AttentionMode::Stochastic { .. })
            && model.stochastic_layers.contains(&layer_idx);

        for h in 0..n_heads {
            let head_off = h * d_head;
            // Per-head value rows, contiguous for the attention kernel.
            let mut v_head = vec![0.0; n_tok * d_head];
            for t in 0..n_tok {
                v_head[t * d_head..(t + 1) * d_head]
                    .copy_from_slice(&v[t * d + head_off..t * d + head_off + d_head]);
            }
            let v_view = ValueMatrix::view(&v_head, n_tok, d_head);
            for t in 0..n_tok {
                let q_row = &q[t * d + head_off..t * d + head_off + d_head];
                let scores: Vec<f64> = (0..n_tok)
                    .map(|j| {
                        scale * dot(q_row, &k[j * d + head_off..j * d + head_off + d_head])
                    })
                    .collect();
                let weights = softmax_weights(&ScoreVector::unmasked(scores))?;
                let out_row = if stochastic_here {
                    let AttentionMode::Stochastic {
                        nu,
                        pass_index,
                        master_seed,
                    } = mode
                    else {
                        unreachable!()
                    };
                    let mut rng = substream(
                        master_seed,
                        domain::ATTENTION_ROW,
                        &[pass_index, layer_idx as u64, h as u64, t as u64],
                    );
                    let sampled = sample_stochastic_weights(&weights, nu, &mut rng);
                    weighted_rows(sampled.weights(), v_view)
                } else {
                    weighted_rows(weights.weights(), v_view)
                };
                attn_out[t * d + head_off..t * d + head_off + d_head].copy_from_slice(&out_row);
            }
        }

        // Output projection + residual.
        let wo = Mat {
            rows: d,
            cols: d,
            data: layer.wo.clone(),
        };
        for t in 0..n_tok {
            let projected = crate::linalg::vec_mat(&attn_out[t * d..(t + 1) * d], &wo);
            for (xi, pi) in x[t * d..(t + 1) * d].iter_mut().zip(&projected) {
                *xi += pi;
            }
        }

        // Feed-forward sublayer, pre-norm.
        for t in 0..n_tok {
            layer_norm(
                &x[t * d..(t + 1) * d],
                &layer.ln2_gamma,
                &layer.ln2_beta,
                &mut normed[t * d..(t + 1) * d],
            );
        }
        let w1 = Mat {
            rows: d,
            cols: cfg.d_ff,
            data: layer.w1.clone(),
        };
        let w2 = Mat {
            rows: cfg.d_ff,
            cols: d,
            data: layer.w2.clone(),
        };
        for t in 0..n_tok {
            let mut hidden = crate::linalg::vec_mat(&normed[t * d..(t + 1) * d], &w1);
            for (hv, &b) in hidden.iter_mut().zip(&layer.b1) {
                *hv = gelu(*hv + b);
            }
            let mut out = crate::linalg::vec_mat(&hidden, &w2);
            for (ov, &b) in out.iter_mut().zip(&layer.b2) {
                *ov += b;
            }
            for (xi, oi) in x[t * d..(t + 1) * d].iter_mut().zip(&out) {
                *xi += oi;
            }
        }
    }

    // Mean-pool the residual stream over tokens.
    let mut pooled = vec![0.0; d];
    for t in 0..n_tok {
        for (p, &v) in pooled.iter_mut().zip(&x[t * d..(t + 1) * d]) {
            *p += v;
        }
    }
    for p in &mut pooled {
        *p /= n_tok as f64;
    }
    Ok(pooled)
}

fn project(x: &[f64], w: &[f64], n_tok: usize, d: usize, out: &mut [f64]) {
    // out[t] = x[t] @ W, W row-major [d, d].
    for t in 0..n_tok {
        let x_row = &x[t * d..(t + 1) * d];
        let out_row = &mut out[t * d..(t + 1) * d];
        out_row.fill(0.0);
        for (i, &xi) in x_row.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let w_row = &w[i * d..(i + 1) * d];
            for (o, &wv) in out_row.iter_mut().zip(w_row) {
                *o += xi * wv;
            }
        }
    }
}

/// Mean-pooled encoder features under softmax attention everywhere.
pub fn pooled_features(model: &ModelBundle, input: &InputCase) -> Result<Vec<f64>, BackboneError> {
    encode(model, input, AttentionMode::Deterministic)
}

/// The deterministic predictor: encoder, mean pooling, linear readout.
pub fn forward_deterministic(model: &ModelBundle, input: &InputCase) -> Result<f64, BackboneError> {
    let phi = pooled_features(model, input)?;
    Ok(dot(&model.readout.weights, &phi) + model.readout.bias)
}

/// One stochastic forward pass. Attention rows in `stochastic_layers` sample
/// their weights from substreams keyed by
/// `(master_seed, pass_index, layer, head, row)`, so the result is a pure
/// function of its arguments.
///
/// A single `nu` is shared across all layers and heads; per-layer or
/// per-head concentration parameters are not implemented.
pub fn forward_stochastic(
    model: &ModelBundle,
    input: &InputCase,
    nu: ConcentrationParam,
    pass_index: u64,
    master_seed: u64,
) -> Result<f64, BackboneError> {
    if model.stochastic_layers.is_empty() {
        return Err(BackboneError::NoStochasticLayers);
    }
    let phi = encode(
        model,
        input,
        AttentionMode::Stochastic {
            nu,
            pass_index,
            master_seed,
        },
    )?;
    Ok(dot(&model.readout.weights, &phi) + model.readout.bias)
}

/// Closed-form ridge fit: minimize `sum (y - w^T phi - b)^2 + ridge ||w||^2`
/// over `(w, b)` with the bias unpenalized. Returns `(w, b)`.
pub fn ridge_fit(
    features: &[Vec<f64>],
    targets: &[f64],
    ridge: f64,
) -> Result<(Vec<f64>, f64), BackboneError> {
    assert_eq!(features.len(), targets.len());
    let n = features.len();
    if n < 2 {
        return Err(BackboneError::TooFewCases(2));
    }
    let d = features[0].len();
    // Normal equations over the augmented parameter vector [w; b].
    let mut a = Mat::zeros(d + 1, d + 1);
    let mut rhs = vec![0.0; d + 1];
    for (phi, &y) in features.iter().zip(targets) {
        debug_assert_eq!(phi.len(), d);
        for i in 0..d {
            for j in 0..d {
                *a.at_mut(i, j) += phi[i] * phi[j];
            }
            *a.at_mut(i, d) += phi[i];
            *a.at_mut(d, i) += phi[i];
            rhs[i] += phi[i] * y;
        }
        *a.at_mut(d, d) += 1.0;
        rhs[d] += y;
    }
    for i in 0..d {
        *a.at_mut(i, i) += ridge;
    }
    let scale = a.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let sol = solve(&a, &rhs, scale * 1e-13).ok_or(BackboneError::SingularSystem)?;
    let (w, b) = sol.split_at(d);
    Ok((w.to_vec(), b[0]))
}

/// Fit the readout by ridge least squares on pooled features; the encoder is
/// untouched. All training cases must carry targets.
pub fn fit_readout(
    model: &ModelBundle,
    train: &[InputCase],
    ridge: f64,
) -> Result<ModelBundle, BackboneError> {
    if train.len() < 2 {
        return Err(BackboneError::TooFewCases(2));
    }
    let mut features = Vec::with_capacity(train.len());
    let mut targets = Vec::with_capacity(train.len());
    for (i, case) in train.iter().enumerate() {
        let y = case.target.ok_or(BackboneError::MissingTarget(i))?;
        features.push(pooled_features(model, case)?);
        targets.push(y);
    }
    let (weights, bias) = ridge_fit(&features, &targets, ridge)?;
    let mut fitted = model.clone();
    fitted.readout = Readout { weights, bias };
    Ok(fitted)
}
