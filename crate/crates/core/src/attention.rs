//! Softmax attention for a single row and its stochastic multinomial
//! replacement.
//!
//! Deterministic attention weights form a categorical distribution over key
//! positions; the attention output is the expectation of the value rows under
//! that distribution. The stochastic variant replaces the exact expectation
//! with a normalized count vector `W/nu`, `W ~ Multinomial(nu, pi)`, so the
//! output becomes a finite-sample average of value rows. The concentration
//! parameter `nu` controls dispersion: weight covariance shrinks as `1/nu`
//! and the deterministic computation is recovered as `nu -> inf`.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use thiserror::Error;

/// Probabilities below this are treated as exactly zero before sampling, so
/// masked positions can never receive weight through floating-point noise.
pub const PROB_FLOOR: f64 = 1e-15;

/// Absolute tolerance for the unit-sum simplex invariant.
pub const SIMPLEX_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttentionError {
    #[error("all positions are masked out")]
    AllMasked,
    #[error("unmasked score at position {0} is not finite")]
    NonFinite(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid simplex vector: {0}")]
    InvalidSimplex(String),
    #[error("concentration parameter must be >= 1")]
    InvalidConcentration,
}

/// Attention scores for one query row, with a mask marking attendable
/// positions. Masked positions behave as score `-inf`: they are excluded from
/// the softmax and receive weight exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    values: Vec<f64>,
    mask: Vec<bool>,
}

impl ScoreVector {
    /// Scores with every position attendable.
    pub fn unmasked(values: Vec<f64>) -> Self {
        let mask = vec![true; values.len()];
        ScoreVector { values, mask }
    }

    pub fn new(values: Vec<f64>, mask: Vec<bool>) -> Result<Self, AttentionError> {
        if values.len() != mask.len() {
            return Err(AttentionError::DimensionMismatch(format!(
                "{} scores vs {} mask entries",
                values.len(),
                mask.len()
            )));
        }
        if !mask.iter().any(|&m| m) {
            return Err(AttentionError::AllMasked);
        }
        Ok(ScoreVector { values, mask })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// A point on the probability simplex: nonnegative weights with unit sum.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexVector {
    weights: Vec<f64>,
}

impl SimplexVector {
    pub fn new(weights: Vec<f64>) -> Result<Self, AttentionError> {
        if weights.is_empty() {
            return Err(AttentionError::InvalidSimplex("empty weight vector".into()));
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
            return Err(AttentionError::InvalidSimplex(format!(
                "entry {i} is {}",
                weights[i]
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_SUM_TOL {
            return Err(AttentionError::InvalidSimplex(format!(
                "weights sum to {sum}, not 1"
            )));
        }
        Ok(SimplexVector { weights })
    }

    /// Internal constructor for weights that are valid by construction.
    pub(crate) fn new_unchecked(weights: Vec<f64>) -> Self {
        SimplexVector { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// The multinomial sample count `nu >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ConcentrationParam(u64);

impl ConcentrationParam {
    pub fn new(nu: u64) -> Result<Self, AttentionError> {
        if nu == 0 {
            return Err(AttentionError::InvalidConcentration);
        }
        Ok(ConcentrationParam(nu))
    }

    pub fn get(self) -> u64 {
        self.0
    }
}

impl std::fmt::Display for ConcentrationParam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Value rows attended over: `n_k` rows of width `d_v`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueMatrix {
    n_rows: usize,
    d_v: usize,
    data: Vec<f64>,
}

impl ValueMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, AttentionError> {
        let n_rows = rows.len();
        let d_v = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(n_rows * d_v);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d_v {
                return Err(AttentionError::DimensionMismatch(format!(
                    "row {i} has width {}, expected {d_v}",
                    row.len()
                )));
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(AttentionError::DimensionMismatch(format!(
                    "non-finite value at row {i}, column {j}"
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(ValueMatrix { n_rows, d_v, data })
    }

    /// Borrow `n_rows` rows of width `d_v` from a flat row-major slice.
    pub(crate) fn view(data: &[f64], n_rows: usize, d_v: usize) -> ValueMatrixView<'_> {
        debug_assert_eq!(data.len(), n_rows * d_v);
        let _ = n_rows;
        ValueMatrixView { d_v, data }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn d_v(&self) -> usize {
        self.d_v
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d_v..(i + 1) * self.d_v]
    }

    fn as_view(&self) -> ValueMatrixView<'_> {
        ValueMatrixView {
            d_v: self.d_v,
            data: &self.data,
        }
    }
}

/// Borrowed value rows; lets the transformer reuse its flat buffers.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ValueMatrixView<'a> {
    d_v: usize,
    data: &'a [f64],
}

impl<'a> ValueMatrixView<'a> {
    fn row(&self, i: usize) -> &'a [f64] {
        &self.data[i * self.d_v..(i + 1) * self.d_v]
    }
}

/// Masked softmax with max-subtraction. Masked positions get weight exactly 0.
pub fn softmax_weights(scores: &ScoreVector) -> Result<SimplexVector, AttentionError> {
    let mut max = f64::NEG_INFINITY;
    let mut any = false;
    for (i, (&s, &m)) in scores.values.iter().zip(&scores.mask).enumerate() {
        if !m {
            continue;
        }
        if !s.is_finite() {
            return Err(AttentionError::NonFinite(i));
        }
        any = true;
        if s > max {
            max = s;
        }
    }
    if !any {
        return Err(AttentionError::AllMasked);
    }
    let mut weights = vec![0.0; scores.len()];
    let mut sum = 0.0;
    for (w, (&s, &m)) in weights.iter_mut().zip(scores.values.iter().zip(&scores.mask)) {
        if m {
            let e = (s - max).exp();
            *w = e;
            sum += e;
        }
    }
    for w in &mut weights {
        *w /= sum;
    }
    Ok(SimplexVector::new_unchecked(weights))
}

/// Weighted sum of value rows under the given simplex weights.
pub fn deterministic_output(
    weights: &SimplexVector,
    values: &ValueMatrix,
) -> Result<Vec<f64>, AttentionError> {
    if weights.len() != values.n_rows() {
        return Err(AttentionError::DimensionMismatch(format!(
            "{} weights vs {} value rows",
            weights.len(),
            values.n_rows()
        )));
    }
    Ok(weighted_rows(weights.weights(), values.as_view()))
}

#[inline]
pub(crate) fn weighted_rows(weights: &[f64], values: ValueMatrixView<'_>) -> Vec<f64> {
    let mut out = vec![0.0; values.d_v];
    for (j, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for (o, &v) in out.iter_mut().zip(values.row(j)) {
            *o += w * v;
        }
    }
    out
}

/// Draw `W ~ Multinomial(nu, pi)` and return `W/nu`.
///
/// Uses the sequential conditional-binomial construction: category `j`
/// receives `Binomial(remaining, pi_j / remaining_mass)` counts, which is
/// distributionally identical to `nu` categorical draws but costs `O(n_k)`
/// per row. The last supported category absorbs the remaining count, so the
/// result always sums to exactly `nu` and zero-probability positions always
/// get weight 0.
pub fn sample_stochastic_weights<R: Rng + ?Sized>(
    weights: &SimplexVector,
    nu: ConcentrationParam,
    rng: &mut R,
) -> SimplexVector {
    let pi = weights.weights();
    let n = nu.get();
    let mut counts = vec![0u64; pi.len()];
    sample_multinomial_counts(pi, n, rng, &mut counts);
    let inv = 1.0 / n as f64;
    let sampled = counts.iter().map(|&c| c as f64 * inv).collect();
    SimplexVector::new_unchecked(sampled)
}

pub(crate) fn sample_multinomial_counts<R: Rng + ?Sized>(
    pi: &[f64],
    nu: u64,
    rng: &mut R,
    counts: &mut [u64],
) {
    counts.fill(0);
    let support: Vec<usize> = (0..pi.len()).filter(|&j| pi[j] >= PROB_FLOOR).collect();
    debug_assert!(!support.is_empty(), "simplex with empty support");
    let mut remaining_mass: f64 = support.iter().map(|&j| pi[j]).sum();
    let mut remaining = nu;
    for (pos, &j) in support.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if pos == support.len() - 1 {
            counts[j] = remaining;
            break;
        }
        let p = (pi[j] / remaining_mass).clamp(0.0, 1.0);
        let draw = Binomial::new(remaining, p)
            .expect("conditional probability in [0, 1]")
            .sample(rng);
        counts[j] = draw;
        remaining -= draw;
        remaining_mass -= pi[j];
    }
}

/// One stochastic attention output: sample `W/nu` and average value rows.
/// Equals `deterministic_output(sample_stochastic_weights(pi, nu, rng), V)`.
pub fn stochastic_output<R: Rng + ?Sized>(
    weights: &SimplexVector,
    values: &ValueMatrix,
    nu: ConcentrationParam,
    rng: &mut R,
) -> Result<Vec<f64>, AttentionError> {
    if weights.len() != values.n_rows() {
        return Err(AttentionError::DimensionMismatch(format!(
            "{} weights vs {} value rows",
            weights.len(),
            values.n_rows()
        )));
    }
    let sampled = sample_stochastic_weights(weights, nu, rng);
    Ok(weighted_rows(sampled.weights(), values.as_view()))
}

/// Closed-form covariance of the stochastic weights:
/// `(1/nu) (diag(pi) - pi pi^T)`. Symmetric, PSD, rows sum to zero.
pub fn stochastic_weight_covariance(
    weights: &SimplexVector,
    nu: ConcentrationParam,
) -> Vec<Vec<f64>> {
    let pi = weights.weights();
    let inv_nu = 1.0 / nu.get() as f64;
    let n = pi.len();
    let mut cov = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let d = if i == j { pi[i] } else { 0.0 };
            cov[i][j] = inv_nu * (d - pi[i] * pi[j]);
        }
    }
    cov
}
