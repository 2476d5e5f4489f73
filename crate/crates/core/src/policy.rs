//! Autoregressive linear-softmax policy with closed-form gradients.
//!
//! The policy scores every vocabulary token with a linear map of context
//! features (prompt features, one-hot of the previous token, normalized
//! position) and samples through a temperature softmax. Token ids `0..=9`
//! are reserved for the digits `0..=9`; the remainder of the vocabulary is
//! reasoning tokens. Reasoning positions mask the digits out; the final score
//! position is a softmax over the whole vocabulary.
//!
//! Because the map is linear, every gradient used by the estimators
//! (log-probability of a sampled chain, probability of a score token, the
//! expected-digit value) has an exact closed form, checked against central
//! finite differences in the test suite.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::token_entropy;
use crate::rng::{streams, Rng};

/// Token ids `0..DIGIT_COUNT` represent the digits `0..=9`.
pub const DIGIT_COUNT: usize = 10;

/// Uniform initialization half-width for fresh parameters.
pub const INIT_SCALE: f64 = 0.01;

/// Partition of the vocabulary into digit tokens and reasoning tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VocabLayout {
    vocab_size: usize,
}

impl VocabLayout {
    /// Requires at least the ten digits plus one reasoning token.
    pub fn new(vocab_size: usize) -> Result<Self> {
        if vocab_size < DIGIT_COUNT + 1 {
            return Err(Error::Config(format!(
                "vocab_size must be at least {}, got {vocab_size}",
                DIGIT_COUNT + 1
            )));
        }
        Ok(VocabLayout { vocab_size })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn digit_tokens(&self) -> std::ops::Range<usize> {
        0..DIGIT_COUNT
    }

    pub fn cot_tokens(&self) -> std::ops::Range<usize> {
        DIGIT_COUNT..self.vocab_size
    }

    pub fn n_cot_tokens(&self) -> usize {
        self.vocab_size - DIGIT_COUNT
    }

    pub fn is_digit(token: usize) -> bool {
        token < DIGIT_COUNT
    }
}

/// Whether a position samples a reasoning token (digits masked) or the final
/// score token (full vocabulary).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PositionKind {
    Cot,
    Score,
}

/// Static shape and sampling parameters of a policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub vocab: VocabLayout,
    /// Prompt feature dimension `d`.
    pub prompt_dim: usize,
    /// Fixed reasoning length `L`.
    pub cot_length: usize,
    /// Softmax temperature, applied identically when sampling, scoring and
    /// computing rewards.
    pub temperature: f64,
    /// Renormalize digit mass when computing the expected-digit value.
    #[serde(default)]
    pub rail_renormalize: bool,
}

impl PolicyConfig {
    pub fn new(
        vocab_size: usize,
        prompt_dim: usize,
        cot_length: usize,
        temperature: f64,
    ) -> Result<Self> {
        let cfg = PolicyConfig {
            vocab: VocabLayout::new(vocab_size)?,
            prompt_dim,
            cot_length,
            temperature,
            rail_renormalize: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        VocabLayout::new(self.vocab.vocab_size())?;
        if self.prompt_dim == 0 {
            return Err(Error::Config("prompt_dim must be at least 1".into()));
        }
        if self.cot_length == 0 {
            return Err(Error::Config("cot_length must be at least 1".into()));
        }
        if !self.temperature.is_finite() || self.temperature <= 0.0 {
            return Err(Error::Config(format!(
                "temperature must be positive and finite, got {}",
                self.temperature
            )));
        }
        Ok(())
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.vocab_size()
    }

    /// Context feature dimension `F = d + V + 1`.
    pub fn feature_dim(&self) -> usize {
        self.prompt_dim + self.vocab_size() + 1
    }

    /// Flat parameter length `V*F + V` (row-major weight matrix, then bias).
    pub fn param_len(&self) -> usize {
        let v = self.vocab_size();
        v * self.feature_dim() + v
    }

    fn weight_row(&self, token: usize) -> std::ops::Range<usize> {
        let f = self.feature_dim();
        token * f..(token + 1) * f
    }

    fn bias_index(&self, token: usize) -> usize {
        self.vocab_size() * self.feature_dim() + token
    }
}

/// One sampled generation: the reasoning chain, the score token, and the
/// cached positionwise quantities the estimators need.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub prompt_idx: usize,
    pub cot: Vec<usize>,
    pub score_token: usize,
    /// Sum of per-step log-probabilities over the reasoning positions.
    pub logp_cot: f64,
    /// Full-vocabulary distribution at the score position, at temperature T.
    pub score_dist: Vec<f64>,
    /// Mean per-token sampling entropy over the `L+1` generated positions.
    pub mean_entropy: f64,
}

/// Context features: prompt features, one-hot of the previous token (all-zero
/// at the first position), and normalized position `t/L`.
pub fn context_features(
    cfg: &PolicyConfig,
    prompt: &[f64],
    prev_token: Option<usize>,
    pos: usize,
) -> Vec<f64> {
    let mut out = vec![0.0; cfg.feature_dim()];
    fill_context_features(cfg, prompt, prev_token, pos, &mut out);
    out
}

fn fill_context_features(
    cfg: &PolicyConfig,
    prompt: &[f64],
    prev_token: Option<usize>,
    pos: usize,
    out: &mut [f64],
) {
    debug_assert_eq!(prompt.len(), cfg.prompt_dim);
    debug_assert_eq!(out.len(), cfg.feature_dim());
    debug_assert!(pos <= cfg.cot_length);
    out.fill(0.0);
    out[..cfg.prompt_dim].copy_from_slice(prompt);
    if let Some(t) = prev_token {
        out[cfg.prompt_dim + t] = 1.0;
    }
    out[cfg.feature_dim() - 1] = pos as f64 / cfg.cot_length as f64;
}

/// Fresh parameters drawn i.i.d. uniform in `[-INIT_SCALE, INIT_SCALE]` from a
/// stream keyed by `seed`.
pub fn init_policy(cfg: &PolicyConfig, seed: u64) -> Vec<f64> {
    let mut rng = Rng::seeded(seed).derive(&[streams::INIT]);
    (0..cfg.param_len())
        .map(|_| (rng.next_f64() * 2.0 - 1.0) * INIT_SCALE)
        .collect()
}

fn logits(params: &[f64], cfg: &PolicyConfig, features: &[f64]) -> Result<Vec<f64>> {
    debug_assert_eq!(params.len(), cfg.param_len());
    let v = cfg.vocab_size();
    let mut z = Vec::with_capacity(v);
    for token in 0..v {
        let row = &params[cfg.weight_row(token)];
        let mut acc = params[cfg.bias_index(token)];
        for (w, x) in row.iter().zip(features) {
            acc += w * x;
        }
        if !acc.is_finite() {
            return Err(Error::NonFiniteLogits);
        }
        z.push(acc);
    }
    Ok(z)
}

fn support(cfg: &PolicyConfig, kind: PositionKind) -> std::ops::Range<usize> {
    match kind {
        PositionKind::Cot => cfg.vocab.cot_tokens(),
        PositionKind::Score => 0..cfg.vocab_size(),
    }
}

/// Token distribution at temperature `cfg.temperature`.
///
/// Under `Cot`, digit entries are exactly zero and the softmax runs over
/// reasoning tokens only; under `Score`, the softmax runs over the whole
/// vocabulary.
pub fn token_dist(
    params: &[f64],
    cfg: &PolicyConfig,
    features: &[f64],
    kind: PositionKind,
) -> Result<Vec<f64>> {
    let z = logits(params, cfg, features)?;
    let sup = support(cfg, kind);
    let t = cfg.temperature;
    let max = sup
        .clone()
        .map(|j| z[j] / t)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut dist = vec![0.0; cfg.vocab_size()];
    let mut sum = 0.0;
    for j in sup.clone() {
        let e = ((z[j] / t) - max).exp();
        dist[j] = e;
        sum += e;
    }
    for j in sup {
        dist[j] /= sum;
    }
    Ok(dist)
}

/// Distribution at the score position following reasoning chain `cot`.
pub fn score_dist(
    params: &[f64],
    cfg: &PolicyConfig,
    prompt: &[f64],
    cot: &[usize],
) -> Result<Vec<f64>> {
    debug_assert_eq!(cot.len(), cfg.cot_length);
    let features = context_features(cfg, prompt, cot.last().copied(), cfg.cot_length);
    token_dist(params, cfg, &features, PositionKind::Score)
}

/// Log-probability of the reasoning chain `cot` under the masked softmax.
pub fn log_prob_cot(
    params: &[f64],
    cfg: &PolicyConfig,
    prompt: &[f64],
    cot: &[usize],
) -> Result<f64> {
    debug_assert_eq!(cot.len(), cfg.cot_length);
    let mut features = vec![0.0; cfg.feature_dim()];
    let mut prev = None;
    let mut total = 0.0;
    for (pos, &token) in cot.iter().enumerate() {
        fill_context_features(cfg, prompt, prev, pos, &mut features);
        let dist = token_dist(params, cfg, &features, PositionKind::Cot)?;
        let p = dist[token];
        if p <= 0.0 {
            return Err(Error::ZeroProbability(token));
        }
        total += p.ln();
        prev = Some(token);
    }
    Ok(total)
}

/// Log-probability of `token` at the score position following `cot`.
pub fn log_prob_token(
    params: &[f64],
    cfg: &PolicyConfig,
    prompt: &[f64],
    cot: &[usize],
    token: usize,
) -> Result<f64> {
    let dist = score_dist(params, cfg, prompt, cot)?;
    let p = dist[token];
    if p <= 0.0 {
        return Err(Error::ZeroProbability(token));
    }
    Ok(p.ln())
}

/// Sample one trajectory: `L` reasoning tokens under the digit mask, then one
/// score token over the full vocabulary, all at temperature `T`.
pub fn sample_trajectory(
    params: &[f64],
    cfg: &PolicyConfig,
    prompt_idx: usize,
    prompt: &[f64],
    rng: &mut Rng,
) -> Result<Trajectory> {
    let mut features = vec![0.0; cfg.feature_dim()];
    let mut cot = Vec::with_capacity(cfg.cot_length);
    let mut prev = None;
    let mut logp_cot = 0.0;
    let mut entropy_sum = 0.0;
    for pos in 0..cfg.cot_length {
        fill_context_features(cfg, prompt, prev, pos, &mut features);
        let dist = token_dist(params, cfg, &features, PositionKind::Cot)?;
        let token = rng.pick_weighted(&dist);
        logp_cot += dist[token].ln();
        entropy_sum += token_entropy(&dist);
        cot.push(token);
        prev = Some(token);
    }
    fill_context_features(cfg, prompt, prev, cfg.cot_length, &mut features);
    let score_dist = token_dist(params, cfg, &features, PositionKind::Score)?;
    let score_token = rng.pick_weighted(&score_dist);
    entropy_sum += token_entropy(&score_dist);
    Ok(Trajectory {
        prompt_idx,
        cot,
        score_token,
        logp_cot,
        score_dist,
        mean_entropy: entropy_sum / (cfg.cot_length + 1) as f64,
    })
}

/// Scatter per-logit coefficients onto the flat parameter layout:
/// `grad[W_j] += scale * coeff_j * features`, `grad[b_j] += scale * coeff_j`.
fn add_logit_grad(
    cfg: &PolicyConfig,
    features: &[f64],
    coeffs: &[f64],
    scale: f64,
    grad: &mut [f64],
) {
    for (token, &c) in coeffs.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let c = c * scale;
        let row = cfg.weight_row(token);
        for (g, x) in grad[row].iter_mut().zip(features) {
            *g += c * x;
        }
        grad[cfg.bias_index(token)] += c;
    }
}

/// Gradient of `log_prob_cot` with respect to the flat parameters.
///
/// Per position the masked log-softmax has `d/dz_j = (1[j = c_t] - p_j)/T` on
/// the reasoning support and zero on digit rows.
pub fn grad_log_prob_cot(
    params: &[f64],
    cfg: &PolicyConfig,
    prompt: &[f64],
    cot: &[usize],
) -> Result<Vec<f64>> {
    let mut grad = vec![0.0; cfg.param_len()];
    add_grad_log_prob_cot(params, cfg, prompt, cot, 1.0, &mut grad)?;
    Ok(grad)
}

/// Accumulate `scale * grad log pi(cot | x)` into `grad`.
pub(crate) fn add_grad_log_prob_cot(
    params: &[f64],
    cfg: &PolicyConfig,
    prompt: &[f64],
    cot: &[usize],
    scale: f64,
    grad: &mut [f64],
) -> Result<()> {
    debug_assert_eq!(cot.len(), cfg.cot_length);
    let t = cfg.temperature;
    let mut features = vec![0.0; cfg.feature_dim()];
    let mut coeffs = vec![0.0; cfg.vocab_size()];
    let mut prev = None;
    for (pos, &token) in cot.iter().enumerate() {
        fill_context_features(cfg, prompt, prev, pos, &mut features);
        let dist = token_dist(params, cfg, &features, PositionKind::Cot)?;
        coeffs.fill(0.0);
        for j in cfg.vocab.cot_tokens() {
            coeffs[j] = (((j == token) as u8 as f64) - dist[j]) / t;
        }
        add_logit_grad(cfg, &features, &coeffs, scale, grad);
        prev = Some(token);
    }
    Ok(())
}

/// Gradient of `log π(token | x, cot)` at the score position.
pub fn grad_log_prob_score_token(
    params: &[f64],
    cfg: &PolicyConfig,
    prompt: &[f64],
    cot: &[usize],
    token: usize,
) -> Result<Vec<f64>> {
    let mut grad = vec![0.0; cfg.param_len()];
    add_grad_log_prob_score_token(params, cfg, prompt, cot, token, 1.0, &mut grad)?;
    Ok(grad)
}

pub(crate) fn add_grad_log_prob_score_token(
    params: &[f64],
    cfg: &PolicyConfig,
    prompt: &[f64],
    cot: &[usize],
    token: usize,
    scale: f64,
    grad: &mut [f64],
) -> Result<()> {
    let t = cfg.temperature;
    let features = context_features(cfg, prompt, cot.last().copied(), cfg.cot_length);
    let dist = token_dist(params, cfg, &features, PositionKind::Score)?;
    let coeffs: Vec<f64> = (0..cfg.vocab_size())
        .map(|j| (((j == token) as u8 as f64) - dist[j]) / t)
        .collect();
    add_logit_grad(cfg, &features, &coeffs, scale, grad);
    Ok(())
}

/// Gradient of the score-position probability `π(token | x, cot)`.
///
/// Softmax Jacobian row `dπ_k/dz_j = π_k (1[k = j] - π_j)/T` mapped through
/// the score-position features.
pub fn grad_token_prob(
    params: &[f64],
    cfg: &PolicyConfig,
    prompt: &[f64],
    cot: &[usize],
    token: usize,
) -> Result<Vec<f64>> {
    let t = cfg.temperature;
    let features = context_features(cfg, prompt, cot.last().copied(), cfg.cot_length);
    let dist = token_dist(params, cfg, &features, PositionKind::Score)?;
    let pk = dist[token];
    let coeffs: Vec<f64> = (0..cfg.vocab_size())
        .map(|j| pk * (((j == token) as u8 as f64) - dist[j]) / t)
        .collect();
    let mut grad = vec![0.0; cfg.param_len()];
    add_logit_grad(cfg, &features, &coeffs, 1.0, &mut grad);
    Ok(grad)
}

/// Expected-digit value of a score-position distribution.
///
/// Raw digit mass by default; with `rail_renormalize` the digit block is
/// renormalized before taking the expectation.
pub fn rail_value_from_dist(cfg: &PolicyConfig, dist: &[f64]) -> f64 {
    let s1: f64 = (0..DIGIT_COUNT).map(|k| k as f64 * dist[k]).sum();
    if cfg.rail_renormalize {
        let s0: f64 = dist[..DIGIT_COUNT].iter().sum();
        s1 / s0
    } else {
        s1
    }
}

/// Expected-digit value and its parameter gradient at the score position.
pub fn rail_value_and_grad(
    params: &[f64],
    cfg: &PolicyConfig,
    prompt: &[f64],
    cot: &[usize],
) -> Result<(f64, Vec<f64>)> {
    let mut grad = vec![0.0; cfg.param_len()];
    let value = add_rail_grad(params, cfg, prompt, cot, 1.0, &mut grad)?;
    Ok((value, grad))
}

/// Accumulate `scale * ∇ŷ` into `grad`, returning the value `ŷ`.
pub(crate) fn add_rail_grad(
    params: &[f64],
    cfg: &PolicyConfig,
    prompt: &[f64],
    cot: &[usize],
    scale: f64,
    grad: &mut [f64],
) -> Result<f64> {
    let t = cfg.temperature;
    let features = context_features(cfg, prompt, cot.last().copied(), cfg.cot_length);
    let dist = token_dist(params, cfg, &features, PositionKind::Score)?;
    let s1: f64 = (0..DIGIT_COUNT).map(|k| k as f64 * dist[k]).sum();
    let v = cfg.vocab_size();
    // dS1/dz_j = (j*p_j*[j digit] - S1*p_j)/T, dS0/dz_j analogous with weight 1.
    let coeffs: Vec<f64> = if cfg.rail_renormalize {
        let s0: f64 = dist[..DIGIT_COUNT].iter().sum();
        (0..v)
            .map(|j| {
                let digit_w = if VocabLayout::is_digit(j) {
                    j as f64
                } else {
                    0.0
                };
                let digit_m = if VocabLayout::is_digit(j) { 1.0 } else { 0.0 };
                let ds1 = (digit_w * dist[j] - s1 * dist[j]) / t;
                let ds0 = (digit_m * dist[j] - s0 * dist[j]) / t;
                (ds1 * s0 - s1 * ds0) / (s0 * s0)
            })
            .collect()
    } else {
        (0..v)
            .map(|j| {
                let digit_w = if VocabLayout::is_digit(j) {
                    j as f64
                } else {
                    0.0
                };
                (digit_w * dist[j] - s1 * dist[j]) / t
            })
            .collect()
    };
    add_logit_grad(cfg, &features, &coeffs, scale, grad);
    let value = if cfg.rail_renormalize {
        let s0: f64 = dist[..DIGIT_COUNT].iter().sum();
        s1 / s0
    } else {
        s1
    };
    Ok(value)
}
