//! Ground-truth verification: exact enumeration of objectives and gradients on
//! tiny instances, finite-difference checks, estimator-expectation audits, and
//! a brute-force suite for posterior-mean optimality.
//!
//! Convention: every gradient reported by this module is the gradient of the
//! minimization objective
//! `L = E_x E_{c~pi}[ (y_hat - y*)^2 - lambda log pi(y*|x,c) ]`.
//! The production estimators ascend the corresponding reward `r = -loss
//! integrand`, so estimator expectations are negated here before comparison.

// Probability tables read better with explicit indices.
#![allow(clippy::needless_range_loop)]

use serde::Serialize;

use crate::env::JudgeExample;
use crate::error::{Error, Result};
use crate::estimator::{self, EstimatorKind, StabilizationFlags};
use crate::policy::{self, PolicyConfig, Trajectory};
use crate::rng::Rng;

/// Largest number of distinct reasoning chains an instance may enumerate.
pub const MAX_COTS: usize = 16;
/// Largest number of K-tuples an expectation may enumerate.
pub const MAX_TUPLES: usize = 250_000;

/// A policy and a handful of prompts small enough for exact enumeration.
#[derive(Debug, Clone)]
pub struct TinyInstance {
    pub policy: PolicyConfig,
    pub prompts: Vec<JudgeExample>,
    pub lambda: f64,
}

impl TinyInstance {
    pub fn validate(&self) -> Result<()> {
        self.policy.validate()?;
        if self.prompts.is_empty() || self.prompts.len() > 4 {
            return Err(Error::EnumerationBound(format!(
                "tiny instance needs 1..=4 prompts, got {}",
                self.prompts.len()
            )));
        }
        let n_cots = self
            .policy
            .vocab
            .n_cot_tokens()
            .checked_pow(self.policy.cot_length as u32)
            .unwrap_or(usize::MAX);
        if n_cots > MAX_COTS {
            return Err(Error::EnumerationBound(format!(
                "{n_cots} reasoning chains exceed the bound {MAX_COTS}"
            )));
        }
        Ok(())
    }

    /// Every reasoning chain of length `L` over the reasoning tokens.
    pub fn enumerate_cots(&self) -> Vec<Vec<usize>> {
        let tokens: Vec<usize> = self.policy.vocab.cot_tokens().collect();
        let mut out: Vec<Vec<usize>> = vec![Vec::new()];
        for _ in 0..self.policy.cot_length {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    tokens.iter().map(move |&t| {
                        let mut c = prefix.clone();
                        c.push(t);
                        c
                    })
                })
                .collect();
        }
        out
    }
}

/// A random enumerable instance with parameters of the given magnitude.
pub fn random_tiny_instance(
    rng: &mut Rng,
    v_cot: usize,
    cot_length: usize,
    n_prompts: usize,
    prompt_dim: usize,
    lambda: f64,
    param_scale: f64,
) -> (TinyInstance, Vec<f64>) {
    let policy =
        PolicyConfig::new(10 + v_cot, prompt_dim, cot_length, 1.0).expect("valid tiny policy");
    let prompts = (0..n_prompts)
        .map(|_| JudgeExample {
            features: (0..prompt_dim)
                .map(|_| rng.next_f64() * 2.0 - 1.0)
                .collect(),
            gold: 1 + rng.next_below(5) as i64,
            quality: 0,
        })
        .collect();
    let params = (0..policy.param_len())
        .map(|_| (rng.next_f64() * 2.0 - 1.0) * param_scale)
        .collect();
    (
        TinyInstance {
            policy,
            prompts,
            lambda,
        },
        params,
    )
}

/// Loss integrand for one `(prompt, chain)` pair.
fn chain_loss(
    params: &[f64],
    inst: &TinyInstance,
    example: &JudgeExample,
    cot: &[usize],
) -> Result<f64> {
    let dist = policy::score_dist(params, &inst.policy, &example.features, cot)?;
    let y_hat = policy::rail_value_from_dist(&inst.policy, &dist);
    let d = y_hat - example.gold as f64;
    Ok(d * d - inst.lambda * dist[example.gold as usize].ln())
}

/// Exact objective by full enumeration over prompts and reasoning chains.
pub fn exact_objective(params: &[f64], inst: &TinyInstance) -> Result<f64> {
    inst.validate()?;
    let cots = inst.enumerate_cots();
    let px = 1.0 / inst.prompts.len() as f64;
    let mut total = 0.0;
    for example in &inst.prompts {
        for cot in &cots {
            let pi_c = policy::log_prob_cot(params, &inst.policy, &example.features, cot)?.exp();
            total += px * pi_c * chain_loss(params, inst, example, cot)?;
        }
    }
    Ok(total)
}

/// Exact gradient of the objective: score-function term plus direct term,
/// enumerated in closed form.
pub fn exact_gradient(params: &[f64], inst: &TinyInstance) -> Result<Vec<f64>> {
    inst.validate()?;
    let cots = inst.enumerate_cots();
    let px = 1.0 / inst.prompts.len() as f64;
    let cfg = &inst.policy;
    let mut grad = vec![0.0; cfg.param_len()];
    for example in &inst.prompts {
        for cot in &cots {
            let pi_c = policy::log_prob_cot(params, cfg, &example.features, cot)?.exp();
            let loss = chain_loss(params, inst, example, cot)?;
            // pi * loss * grad log pi(c|x)
            policy::add_grad_log_prob_cot(
                params,
                cfg,
                &example.features,
                cot,
                px * pi_c * loss,
                &mut grad,
            )?;
            // pi * grad loss: 2 (y_hat - y*) grad y_hat - lambda grad log pi(y*|x,c)
            let dist = policy::score_dist(params, cfg, &example.features, cot)?;
            let y_hat = policy::rail_value_from_dist(cfg, &dist);
            policy::add_rail_grad(
                params,
                cfg,
                &example.features,
                cot,
                px * pi_c * 2.0 * (y_hat - example.gold as f64),
                &mut grad,
            )?;
            if inst.lambda != 0.0 {
                policy::add_grad_log_prob_score_token(
                    params,
                    cfg,
                    &example.features,
                    cot,
                    example.gold as usize,
                    -px * pi_c * inst.lambda,
                    &mut grad,
                )?;
            }
        }
    }
    Ok(grad)
}

/// Central finite differences of any scalar function of the parameters.
pub fn finite_diff_of(
    params: &[f64],
    step: f64,
    mut f: impl FnMut(&[f64]) -> Result<f64>,
) -> Result<Vec<f64>> {
    let mut p = params.to_vec();
    let mut grad = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let orig = p[i];
        p[i] = orig + step;
        let hi = f(&p)?;
        p[i] = orig - step;
        let lo = f(&p)?;
        p[i] = orig;
        grad.push((hi - lo) / (2.0 * step));
    }
    Ok(grad)
}

/// Central finite differences of the exact objective.
pub fn finite_diff_gradient(params: &[f64], inst: &TinyInstance, step: f64) -> Result<Vec<f64>> {
    finite_diff_of(params, step, |p| exact_objective(p, inst))
}

/// Worst relative coordinate discrepancy; differences under the 1e-8
/// absolute floor count as zero.
pub fn max_rel_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let diff = (x - y).abs();
            if diff <= 1e-8 {
                0.0
            } else {
                diff / x.abs().max(y.abs())
            }
        })
        .fold(0.0, f64::max)
}

pub fn max_abs_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn decode_tuple(mut index: usize, base: usize, k: usize) -> Vec<usize> {
    let mut digits = vec![0usize; k];
    for d in digits.iter_mut() {
        *d = index % base;
        index /= base;
    }
    digits
}

struct ChainCache {
    cot: Vec<usize>,
    pi: f64,
    logp_cot: f64,
    score_dist: Vec<f64>,
}

fn chain_cache(
    params: &[f64],
    cfg: &PolicyConfig,
    example: &JudgeExample,
    cots: &[Vec<usize>],
) -> Result<Vec<ChainCache>> {
    cots.iter()
        .map(|cot| {
            let logp_cot = policy::log_prob_cot(params, cfg, &example.features, cot)?;
            let score_dist = policy::score_dist(params, cfg, &example.features, cot)?;
            Ok(ChainCache {
                cot: cot.clone(),
                pi: logp_cot.exp(),
                logp_cot,
                score_dist,
            })
        })
        .collect()
}

fn trajectory_from_cache(cache: &ChainCache, prompt_idx: usize, score_token: usize) -> Trajectory {
    Trajectory {
        prompt_idx,
        cot: cache.cot.clone(),
        score_token,
        logp_cot: cache.logp_cot,
        score_dist: cache.score_dist.clone(),
        mean_entropy: 0.0,
    }
}

/// Exact expectation of the sampled estimator over all K-tuples of reasoning
/// chains (and score tokens, for the binary-reward estimator), reported in the
/// minimization convention.
///
/// `beta` is fixed at 1 so the direct term carries its exact weight.
pub fn estimator_expectation(
    kind: EstimatorKind,
    params: &[f64],
    inst: &TinyInstance,
    k: usize,
    flags: StabilizationFlags,
) -> Result<Vec<f64>> {
    inst.validate()?;
    if k < 2 {
        return Err(Error::Degenerate(
            "estimator expectation needs K >= 2".into(),
        ));
    }
    let cfg = &inst.policy;
    let cots = inst.enumerate_cots();
    let px = 1.0 / inst.prompts.len() as f64;
    let mut total = vec![0.0; cfg.param_len()];

    for (prompt_idx, example) in inst.prompts.iter().enumerate() {
        let cache = chain_cache(params, cfg, example, &cots)?;
        // Sample space per draw: chains alone, or (chain, score-token) pairs
        // when the estimator consumes the sampled score.
        let per_draw: Vec<(usize, Option<usize>, f64)> = match kind {
            EstimatorKind::StandardRl => {
                let mut v = Vec::with_capacity(cache.len() * cfg.vocab_size());
                for (ci, c) in cache.iter().enumerate() {
                    for y in 0..cfg.vocab_size() {
                        v.push((ci, Some(y), c.pi * c.score_dist[y]));
                    }
                }
                v
            }
            _ => cache
                .iter()
                .enumerate()
                .map(|(ci, c)| (ci, None, c.pi))
                .collect(),
        };
        let n_tuples = per_draw.len().checked_pow(k as u32).unwrap_or(usize::MAX);
        if n_tuples > MAX_TUPLES {
            return Err(Error::EnumerationBound(format!(
                "{n_tuples} tuples exceed the bound {MAX_TUPLES}"
            )));
        }
        for t in 0..n_tuples {
            let draws = decode_tuple(t, per_draw.len(), k);
            let mut weight = px;
            let mut trajs = Vec::with_capacity(k);
            for &d in &draws {
                let (ci, y, p) = per_draw[d];
                weight *= p;
                trajs.push(trajectory_from_cache(
                    &cache[ci],
                    prompt_idx,
                    y.unwrap_or(0),
                ));
            }
            if weight == 0.0 {
                continue;
            }
            let rewards: Vec<f64> = trajs
                .iter()
                .map(|tr| estimator::trajectory_reward(kind, tr, example, cfg, inst.lambda))
                .collect();
            let weights = estimator::term1_weights(&rewards, flags)?;
            let grad = match kind {
                EstimatorKind::Real => estimator::real_gradient_with_weights(
                    &trajs,
                    &weights,
                    params,
                    cfg,
                    example,
                    inst.lambda,
                    1.0,
                )?,
                EstimatorKind::StandardRl => estimator::standard_rl_gradient_with_weights(
                    &trajs, &weights, params, cfg, example,
                )?,
                EstimatorKind::Raft | EstimatorKind::Jepo => {
                    return Err(Error::EnumerationBound(
                        "expectation audit covers the real and standard_rl estimators".into(),
                    ))
                }
            };
            for (acc, g) in total.iter_mut().zip(&grad) {
                *acc += weight * g;
            }
        }
    }
    // Ascent on reward -> gradient of the minimization objective.
    for g in &mut total {
        *g = -*g;
    }
    Ok(total)
}

/// Expectation of the exploration-only estimator when the reward is a fixed
/// per-(prompt, chain) table (so the direct term vanishes identically).
pub fn estimator_expectation_reward_table(
    params: &[f64],
    inst: &TinyInstance,
    table: &[Vec<f64>],
    k: usize,
    flags: StabilizationFlags,
) -> Result<Vec<f64>> {
    inst.validate()?;
    let cfg = &inst.policy;
    let cots = inst.enumerate_cots();
    let px = 1.0 / inst.prompts.len() as f64;
    let mut total = vec![0.0; cfg.param_len()];
    for (prompt_idx, example) in inst.prompts.iter().enumerate() {
        let cache = chain_cache(params, cfg, example, &cots)?;
        let n_tuples = cache.len().checked_pow(k as u32).unwrap_or(usize::MAX);
        if n_tuples > MAX_TUPLES {
            return Err(Error::EnumerationBound(format!(
                "{n_tuples} tuples exceed the bound {MAX_TUPLES}"
            )));
        }
        for t in 0..n_tuples {
            let draws = decode_tuple(t, cache.len(), k);
            let weight: f64 = px * draws.iter().map(|&d| cache[d].pi).product::<f64>();
            if weight == 0.0 {
                continue;
            }
            let rewards: Vec<f64> = draws.iter().map(|&d| table[prompt_idx][d]).collect();
            let w = estimator::term1_weights(&rewards, flags)?;
            let mut grad = vec![0.0; cfg.param_len()];
            for (i, &d) in draws.iter().enumerate() {
                if w[i] != 0.0 {
                    policy::add_grad_log_prob_cot(
                        params,
                        cfg,
                        &example.features,
                        &cache[d].cot,
                        w[i] / k as f64,
                        &mut grad,
                    )?;
                }
            }
            for (acc, g) in total.iter_mut().zip(&grad) {
                *acc += weight * g;
            }
        }
    }
    for g in &mut total {
        *g = -*g;
    }
    Ok(total)
}

/// Direct enumeration of the score-function gradient for a fixed reward table:
/// `-sum_x P(x) sum_c pi(c|x) r(x,c) grad log pi(c|x)` in the minimization
/// convention.
pub fn reinforce_expectation_reward_table(
    params: &[f64],
    inst: &TinyInstance,
    table: &[Vec<f64>],
) -> Result<Vec<f64>> {
    inst.validate()?;
    let cfg = &inst.policy;
    let cots = inst.enumerate_cots();
    let px = 1.0 / inst.prompts.len() as f64;
    let mut grad = vec![0.0; cfg.param_len()];
    for (prompt_idx, example) in inst.prompts.iter().enumerate() {
        for (ci, cot) in cots.iter().enumerate() {
            let pi_c = policy::log_prob_cot(params, cfg, &example.features, cot)?.exp();
            policy::add_grad_log_prob_cot(
                params,
                cfg,
                &example.features,
                cot,
                -px * pi_c * table[prompt_idx][ci],
                &mut grad,
            )?;
        }
    }
    Ok(grad)
}

/// Direct enumeration of the binary-reward policy gradient over full
/// sequences `(c, y)`, in the minimization convention.
pub fn reinforce_expectation_binary(params: &[f64], inst: &TinyInstance) -> Result<Vec<f64>> {
    inst.validate()?;
    let cfg = &inst.policy;
    let cots = inst.enumerate_cots();
    let px = 1.0 / inst.prompts.len() as f64;
    let mut grad = vec![0.0; cfg.param_len()];
    for example in &inst.prompts {
        for cot in &cots {
            let pi_c = policy::log_prob_cot(params, cfg, &example.features, cot)?.exp();
            let dist = policy::score_dist(params, cfg, &example.features, cot)?;
            for y in 0..cfg.vocab_size() {
                let r = crate::reward::binary_reward(y, example.gold);
                if r == 0.0 || dist[y] == 0.0 {
                    continue;
                }
                let w = -px * pi_c * dist[y] * r;
                policy::add_grad_log_prob_cot(params, cfg, &example.features, cot, w, &mut grad)?;
                policy::add_grad_log_prob_score_token(
                    params,
                    cfg,
                    &example.features,
                    cot,
                    y,
                    w,
                    &mut grad,
                )?;
            }
        }
    }
    Ok(grad)
}

/// Exact expectation of `b_i * grad log pi(c_i | x)` for the leave-one-out
/// baseline of sample 0 — zero when the baseline is independent of the sample.
pub fn baseline_term_expectation(
    params: &[f64],
    inst: &TinyInstance,
    k: usize,
) -> Result<Vec<f64>> {
    inst.validate()?;
    let cfg = &inst.policy;
    let cots = inst.enumerate_cots();
    let px = 1.0 / inst.prompts.len() as f64;
    let mut total = vec![0.0; cfg.param_len()];
    for example in &inst.prompts {
        let cache = chain_cache(params, cfg, example, &cots)?;
        let n_tuples = cache.len().pow(k as u32);
        for t in 0..n_tuples {
            let draws = decode_tuple(t, cache.len(), k);
            let weight: f64 = px * draws.iter().map(|&d| cache[d].pi).product::<f64>();
            let rewards: Vec<f64> = draws
                .iter()
                .map(|&d| {
                    let tr = trajectory_from_cache(&cache[d], 0, 0);
                    estimator::trajectory_reward(
                        EstimatorKind::Real,
                        &tr,
                        example,
                        cfg,
                        inst.lambda,
                    )
                })
                .collect();
            let baseline: f64 = rewards[1..].iter().sum::<f64>() / (k - 1) as f64;
            policy::add_grad_log_prob_cot(
                params,
                cfg,
                &example.features,
                &cache[draws[0]].cot,
                weight * baseline,
                &mut total,
            )?;
        }
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Posterior-mean optimality suite over random discrete joints.
// ---------------------------------------------------------------------------

/// A finite joint `P(x) * pi(c|x) * P(y|x)`, the factorization under which the
/// label is conditionally independent of the reasoning chain.
#[derive(Debug, Clone)]
pub struct DiscreteJoint {
    pub px: Vec<f64>,
    pub pc_given_x: Vec<Vec<f64>>,
    pub py_given_x: Vec<Vec<f64>>,
    pub y_values: Vec<f64>,
}

impl DiscreteJoint {
    pub fn validate(&self) -> Result<()> {
        let close = |s: f64| (s - 1.0).abs() < 1e-12;
        if !close(self.px.iter().sum()) {
            return Err(Error::Degenerate("P(x) does not sum to 1".into()));
        }
        for pc in &self.pc_given_x {
            if !close(pc.iter().sum()) {
                return Err(Error::Degenerate("pi(c|x) does not sum to 1".into()));
            }
        }
        for py in &self.py_given_x {
            if !close(py.iter().sum()) {
                return Err(Error::Degenerate("P(y|x) does not sum to 1".into()));
            }
        }
        Ok(())
    }

    fn nx(&self) -> usize {
        self.px.len()
    }

    fn nc(&self) -> usize {
        self.pc_given_x[0].len()
    }

    /// `E[y | x]`.
    pub fn posterior_mean_x(&self, x: usize) -> f64 {
        self.py_given_x[x]
            .iter()
            .zip(&self.y_values)
            .map(|(p, y)| p * y)
            .sum()
    }

    /// `E[y | x, c]` computed the long way, through the full joint table.
    pub fn posterior_mean_xc_from_joint(&self, x: usize, c: usize) -> f64 {
        let pxc: f64 = self.px[x] * self.pc_given_x[x][c];
        if pxc == 0.0 {
            return f64::NAN;
        }
        let num: f64 = self.py_given_x[x]
            .iter()
            .zip(&self.y_values)
            .map(|(py, y)| self.px[x] * self.pc_given_x[x][c] * py * y)
            .sum();
        num / pxc
    }
}

pub fn random_joint(rng: &mut Rng) -> DiscreteJoint {
    let nx = 2 + rng.next_below(4) as usize;
    let nc = 2 + rng.next_below(4) as usize;
    let ny = 2 + rng.next_below(4) as usize;
    let simplex = |rng: &mut Rng, n: usize| -> Vec<f64> {
        let raw: Vec<f64> = (0..n).map(|_| 0.05 + rng.next_f64()).collect();
        let sum: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / sum).collect()
    };
    DiscreteJoint {
        px: simplex(rng, nx),
        pc_given_x: (0..nx).map(|_| simplex(rng, nc)).collect(),
        py_given_x: (0..nx).map(|_| simplex(rng, ny)).collect(),
        y_values: (1..=ny).map(|v| v as f64).collect(),
    }
}

/// Sufficient statistics of a predictor table under the joint.
struct PredictorStats {
    mean: f64,
    second: f64,
    cross_mu: f64,
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct OptimalityReport {
    pub joints_tested: usize,
    pub joints_skipped: usize,
    pub competitors_tested: u64,
    pub competitors_skipped: u64,
    pub violations: Vec<String>,
}

impl OptimalityReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Run the optimality checks for one joint, appending to `report`.
pub fn check_joint(
    joint: &DiscreteJoint,
    joint_idx: usize,
    n_competitors: usize,
    rng: &mut Rng,
    report: &mut OptimalityReport,
) {
    const TOL: f64 = 1e-9;
    const EXACT: f64 = 1e-12;
    let nx = joint.nx();
    let nc = joint.nc();

    // Label moments (centered variance to dodge cancellation).
    let mut ey = 0.0;
    let mut ey2 = 0.0;
    for x in 0..nx {
        for (py, y) in joint.py_given_x[x].iter().zip(&joint.y_values) {
            ey += joint.px[x] * py * y;
            ey2 += joint.px[x] * py * y * y;
        }
    }
    let mut var_y = 0.0;
    for x in 0..nx {
        for (py, y) in joint.py_given_x[x].iter().zip(&joint.y_values) {
            var_y += joint.px[x] * py * (y - ey) * (y - ey);
        }
    }

    // Posterior mean as a table over (x, c); constant in c.
    let mu: Vec<f64> = (0..nx).map(|x| joint.posterior_mean_x(x)).collect();
    let mut emu = 0.0;
    for x in 0..nx {
        for c in 0..nc {
            emu += joint.px[x] * joint.pc_given_x[x][c] * mu[x];
        }
    }
    let mut var_mu = 0.0;
    for x in 0..nx {
        for c in 0..nc {
            var_mu += joint.px[x] * joint.pc_given_x[x][c] * (mu[x] - emu) * (mu[x] - emu);
        }
    }

    if var_y < 1e-12 || var_mu < 1e-12 {
        report.joints_skipped += 1;
        return;
    }
    report.joints_tested += 1;

    // (d) conditioning on the chain adds nothing under the factorization.
    for x in 0..nx {
        for c in 0..nc {
            let via_joint = joint.posterior_mean_xc_from_joint(x, c);
            if (via_joint - mu[x]).abs() > EXACT {
                report.violations.push(format!(
                    "joint {joint_idx}: posterior mean depends on the chain at ({x},{c})"
                ));
            }
        }
    }

    let stats_of = |table: &dyn Fn(usize, usize) -> f64| -> PredictorStats {
        let mut mean = 0.0;
        let mut second = 0.0;
        let mut cross = 0.0;
        for x in 0..nx {
            for c in 0..nc {
                let pxc = joint.px[x] * joint.pc_given_x[x][c];
                let f = table(x, c);
                mean += pxc * f;
                second += pxc * f * f;
                // E[f y] = E[f mu] under the factorization.
                cross += pxc * f * mu[x];
            }
        }
        PredictorStats {
            mean,
            second,
            cross_mu: cross,
        }
    };
    let mse_of = |s: &PredictorStats| s.second - 2.0 * s.cross_mu + ey2;
    // Population Pearson against the label; centered accumulation keeps the
    // affine-invariance identity exact to roundoff.
    let pearson_of = |table: &dyn Fn(usize, usize) -> f64| -> Option<f64> {
        let mut ef = 0.0;
        for x in 0..nx {
            for c in 0..nc {
                ef += joint.px[x] * joint.pc_given_x[x][c] * table(x, c);
            }
        }
        let mut var_f = 0.0;
        let mut cov = 0.0;
        for x in 0..nx {
            for c in 0..nc {
                let pxc = joint.px[x] * joint.pc_given_x[x][c];
                let df = table(x, c) - ef;
                var_f += pxc * df * df;
                // Cov(f, y) = Cov(f, mu) under the factorization.
                cov += pxc * df * (mu[x] - emu);
            }
        }
        if var_f < 1e-13 {
            return None;
        }
        Some(cov / (var_f * var_y).sqrt())
    };

    let mse_mu = mse_of(&stats_of(&|x, _| mu[x]));
    let rho_mu = pearson_of(&|x, _| mu[x]).expect("Var(mu) checked above");

    // (c) exact affine invariance of the correlation.
    for (a, b) in [(0.5, -2.0), (2.0, 0.0), (7.3, 5.0)] {
        let rho = pearson_of(&|x, _| a * mu[x] + b).unwrap_or(f64::NAN);
        if (rho - rho_mu).abs() > EXACT {
            report.violations.push(format!(
                "joint {joint_idx}: affine map ({a},{b}) changed the correlation"
            ));
        }
    }

    let y_span = joint.y_values.last().unwrap() + 1.0;
    for comp_idx in 0..n_competitors {
        let table: Vec<Vec<f64>> = (0..nx)
            .map(|_| (0..nc).map(|_| rng.next_f64() * y_span).collect())
            .collect();
        let s = stats_of(&|x, c| table[x][c]);
        let mse_f = mse_of(&s);
        if mse_f < mse_mu - TOL {
            report.violations.push(format!(
                "joint {joint_idx}, competitor {comp_idx}: beat the posterior mean on MSE"
            ));
        }
        // Affine probes of the competitor, via closed-form MSE.
        for (a, b) in [(0.5, 1.0), (2.0, -1.0)] {
            let mse_affine = a * a * s.second + 2.0 * a * b * s.mean + b * b
                - 2.0 * (a * s.cross_mu + b * ey)
                + ey2;
            if mse_affine < mse_mu - TOL {
                report.violations.push(format!(
                    "joint {joint_idx}, competitor {comp_idx}: affine probe beat the posterior mean on MSE"
                ));
            }
        }
        match pearson_of(&|x, c| table[x][c]) {
            Some(rho_f) => {
                report.competitors_tested += 1;
                if rho_f > rho_mu + TOL {
                    report.violations.push(format!(
                        "joint {joint_idx}, competitor {comp_idx}: beat the posterior mean on correlation"
                    ));
                }
            }
            None => report.competitors_skipped += 1,
        }
    }
}

/// Brute-force audit that the posterior mean minimizes squared error and
/// maximizes Pearson correlation (up to positive affine maps) over random
/// discrete joints and random competitor predictors.
pub fn posterior_optimality_suite(
    n_joints: usize,
    n_competitors: usize,
    seed: u64,
) -> OptimalityReport {
    let mut rng = Rng::seeded(seed);
    let mut report = OptimalityReport::default();
    for joint_idx in 0..n_joints {
        let joint = random_joint(&mut rng);
        check_joint(&joint, joint_idx, n_competitors, &mut rng, &mut report);
    }
    report
}

// ---------------------------------------------------------------------------
// Naive reference metrics (definitional, quadratic-time).
// ---------------------------------------------------------------------------

/// Definitional Pearson: raw moments, no centering pass.
pub fn pearson_reference(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let ex = x.iter().sum::<f64>() / n;
    let ey = y.iter().sum::<f64>() / n;
    let exy = x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / n;
    let ex2 = x.iter().map(|a| a * a).sum::<f64>() / n;
    let ey2 = y.iter().map(|b| b * b).sum::<f64>() / n;
    (exy - ex * ey) / ((ex2 - ex * ex) * (ey2 - ey * ey)).sqrt()
}

/// Quadratic-time average ranks: `1 + #below + #ties/2`.
pub fn ranks_reference(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&a| {
            let below = v.iter().filter(|&&b| b < a).count() as f64;
            let tied = v.iter().filter(|&&b| b == a).count() as f64;
            1.0 + below + (tied - 1.0) / 2.0
        })
        .collect()
}

pub fn spearman_reference(x: &[f64], y: &[f64]) -> f64 {
    pearson_reference(&ranks_reference(x), &ranks_reference(y))
}

/// Quadratic-time tau-b by explicit pair classification.
pub fn kendall_tau_b_reference(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let (mut concordant, mut discordant) = (0.0f64, 0.0f64);
    let (mut ties_x, mut ties_y) = (0.0f64, 0.0f64);
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 {
                ties_x += 1.0;
            }
            if dy == 0.0 {
                ties_y += 1.0;
            }
            if dx != 0.0 && dy != 0.0 {
                if dx * dy > 0.0 {
                    concordant += 1.0;
                } else {
                    discordant += 1.0;
                }
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as f64;
    (concordant - discordant) / ((n0 - ties_x) * (n0 - ties_y)).sqrt()
}

// ---------------------------------------------------------------------------
// Verification runner.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyScale {
    Quick,
    Full,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Soft checks report without failing the run.
    pub hard: bool,
    pub max_error: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub scale: String,
    pub checks: Vec<CheckResult>,
    pub hard_failures: usize,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.hard_failures == 0
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn push(
    checks: &mut Vec<CheckResult>,
    name: &str,
    hard: bool,
    passed: bool,
    max_error: f64,
    detail: String,
) {
    checks.push(CheckResult {
        name: name.to_string(),
        passed,
        hard,
        max_error,
        detail,
    });
}

/// Run the verification suite. `Quick` trims instance counts to seconds of
/// runtime; `Full` runs the complete suite.
pub fn run_verification(scale: VerifyScale) -> VerifyReport {
    let full = scale == VerifyScale::Full;
    let mut checks = Vec::new();
    let mut rng = Rng::seeded(0xA11CE);

    // 1. Closed-form gradient vs central finite differences.
    {
        let n = if full { 50 } else { 10 };
        let mut worst = 0.0f64;
        let mut ok = true;
        for i in 0..n {
            let lambda = if i % 2 == 0 { 0.0 } else { 1.0 };
            let l = 1 + (i % 2);
            let (inst, params) = random_tiny_instance(&mut rng, 2, l, 1 + i % 3, 3, lambda, 0.8);
            let exact = exact_gradient(&params, &inst).unwrap();
            let numeric = finite_diff_gradient(&params, &inst, 1e-5).unwrap();
            let err = max_rel_error(&exact, &numeric);
            worst = worst.max(err);
            ok &= err <= 1e-6;
        }
        push(
            &mut checks,
            "gradient_finite_diff",
            true,
            ok,
            worst,
            format!("{n} instances, relative tolerance 1e-6"),
        );
    }

    // 2. Unstabilized estimator expectation equals the exact gradient,
    //    with and without the leave-one-out baseline.
    {
        let n = if full { 8 } else { 4 };
        let mut worst = 0.0f64;
        let mut ok = true;
        for i in 0..n {
            let lambda = if i % 2 == 0 { 0.0 } else { 1.0 };
            let (inst, params) =
                random_tiny_instance(&mut rng, 2, 1 + i % 2, 1 + i % 2, 3, lambda, 0.6);
            let exact = exact_gradient(&params, &inst).unwrap();
            for k in [2usize, 3] {
                for baseline in [false, true] {
                    let flags = StabilizationFlags {
                        leave_one_out_baseline: baseline,
                        standardize_and_clip: false,
                    };
                    let expect =
                        estimator_expectation(EstimatorKind::Real, &params, &inst, k, flags)
                            .unwrap();
                    let err = max_abs_error(&expect, &exact);
                    worst = worst.max(err);
                    ok &= err <= 1e-10;
                }
            }
        }
        push(
            &mut checks,
            "estimator_unbiasedness",
            true,
            ok,
            worst,
            format!("{n} instances, K in {{2,3}}, baseline on/off, absolute tolerance 1e-10"),
        );
    }

    // 3. Fixed reward table: direct term vanishes and the expectation reduces
    //    to the plain score-function gradient.
    {
        let n = if full { 6 } else { 3 };
        let mut worst = 0.0f64;
        let mut ok = true;
        for i in 0..n {
            let (inst, params) =
                random_tiny_instance(&mut rng, 2, 1 + i % 2, 1 + i % 2, 3, 0.0, 0.7);
            let n_cots = inst.enumerate_cots().len();
            let table: Vec<Vec<f64>> = (0..inst.prompts.len())
                .map(|_| (0..n_cots).map(|_| rng.next_f64() * 4.0 - 2.0).collect())
                .collect();
            let via_estimator = estimator_expectation_reward_table(
                &params,
                &inst,
                &table,
                2,
                StabilizationFlags::RAW,
            )
            .unwrap();
            let direct = reinforce_expectation_reward_table(&params, &inst, &table).unwrap();
            let err = max_abs_error(&via_estimator, &direct);
            worst = worst.max(err);
            ok &= err <= 1e-10;
        }
        push(
            &mut checks,
            "policy_independent_reward_reduction",
            true,
            ok,
            worst,
            format!("{n} instances, absolute tolerance 1e-10"),
        );
    }

    // 4. Binary-reward estimator expectation equals direct sequence-level
    //    enumeration.
    {
        let n = if full { 4 } else { 2 };
        let mut worst = 0.0f64;
        let mut ok = true;
        for i in 0..n {
            let (inst, params) = random_tiny_instance(&mut rng, 2, 1, 1 + i % 2, 3, 0.0, 0.6);
            let expect = estimator_expectation(
                EstimatorKind::StandardRl,
                &params,
                &inst,
                2,
                StabilizationFlags::RAW,
            )
            .unwrap();
            let direct = reinforce_expectation_binary(&params, &inst).unwrap();
            let err = max_abs_error(&expect, &direct);
            worst = worst.max(err);
            ok &= err <= 1e-10;
        }
        push(
            &mut checks,
            "binary_reward_sequence_gradient",
            true,
            ok,
            worst,
            format!("{n} instances, absolute tolerance 1e-10"),
        );
    }

    // 5. Leave-one-out baseline contributes zero in expectation.
    {
        let n = if full { 6 } else { 3 };
        let mut worst = 0.0f64;
        let mut ok = true;
        for i in 0..n {
            let (inst, params) = random_tiny_instance(&mut rng, 2, 1, 1 + i % 2, 3, 1.0, 0.7);
            for k in [2usize, 3] {
                let term = baseline_term_expectation(&params, &inst, k).unwrap();
                let err = term.iter().fold(0.0f64, |m, g| m.max(g.abs()));
                worst = worst.max(err);
                ok &= err <= 1e-10;
            }
        }
        push(
            &mut checks,
            "rloo_baseline_zero_expectation",
            true,
            ok,
            worst,
            format!("{n} instances, K in {{2,3}}, absolute tolerance 1e-10"),
        );
    }

    // 6. Posterior-mean optimality brute force.
    {
        let (joints, comps) = if full { (1000, 1000) } else { (100, 100) };
        let report = posterior_optimality_suite(joints, comps, 0xBEEF);
        let ok = report.passed();
        push(
            &mut checks,
            "posterior_mean_optimality",
            true,
            ok,
            report.violations.len() as f64,
            format!(
                "{} joints tested, {} skipped degenerate, {} competitor checks, {} violations",
                report.joints_tested,
                report.joints_skipped,
                report.competitors_tested,
                report.violations.len()
            ),
        );
    }

    // 7. Production correlation metrics vs naive references.
    {
        let n = if full { 100 } else { 25 };
        let mut worst = 0.0f64;
        let mut ok = true;
        for i in 0..n {
            let len = 5 + rng.next_below(60) as usize;
            let tied = i % 2 == 0;
            let draw = |rng: &mut Rng| {
                if tied {
                    (1 + rng.next_below(5)) as f64
                } else {
                    rng.next_f64() * 10.0
                }
            };
            let x: Vec<f64> = (0..len).map(|_| draw(&mut rng)).collect();
            let y: Vec<f64> = (0..len).map(|_| draw(&mut rng)).collect();
            let checks_ok = [
                crate::metrics::pearson(&x, &y).map(|v| (v - pearson_reference(&x, &y)).abs()),
                crate::metrics::spearman(&x, &y).map(|v| (v - spearman_reference(&x, &y)).abs()),
                crate::metrics::kendall_tau_b(&x, &y)
                    .map(|v| (v - kendall_tau_b_reference(&x, &y)).abs()),
            ];
            // Degenerate draws (all ties) are legitimately rejected.
            for err in checks_ok.into_iter().flatten() {
                worst = worst.max(err);
                ok &= err <= 1e-12;
            }
        }
        push(
            &mut checks,
            "metrics_reference_equivalence",
            true,
            ok,
            worst,
            format!("{n} random vectors with and without ties, tolerance 1e-12"),
        );
    }

    // 8. Stabilized estimator keeps a descent direction (soft diagnostic).
    {
        let n = if full { 8 } else { 4 };
        let mut min_cos = f64::INFINITY;
        let mut ok = true;
        for i in 0..n {
            let (inst, params) =
                random_tiny_instance(&mut rng, 2, 1 + i % 2, 1 + i % 3, 3, 1.0, 0.8);
            let exact = exact_gradient(&params, &inst).unwrap();
            let stabilized = estimator_expectation(
                EstimatorKind::Real,
                &params,
                &inst,
                3,
                StabilizationFlags::default(),
            )
            .unwrap();
            let dot: f64 = exact.iter().zip(&stabilized).map(|(a, b)| a * b).sum();
            let na: f64 = exact.iter().map(|a| a * a).sum::<f64>().sqrt();
            let nb: f64 = stabilized.iter().map(|b| b * b).sum::<f64>().sqrt();
            let cos = dot / (na * nb).max(1e-300);
            min_cos = min_cos.min(cos);
            ok &= cos > 0.0;
        }
        push(
            &mut checks,
            "stabilization_direction_preserved",
            false,
            ok,
            1.0 - min_cos,
            format!("{n} instances; min cosine to the exact gradient = {min_cos:.4}"),
        );
    }

    let hard_failures = checks.iter().filter(|c| c.hard && !c.passed).count();
    VerifyReport {
        scale: match scale {
            VerifyScale::Quick => "quick".to_string(),
            VerifyScale::Full => "full".to_string(),
        },
        checks,
        hard_failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixed_instance(v_cot: usize, l: usize, lambda: f64, seed: u64) -> (TinyInstance, Vec<f64>) {
        let mut rng = Rng::seeded(seed);
        random_tiny_instance(&mut rng, v_cot, l, 2, 3, lambda, 0.8)
    }

    #[test]
    fn exact_objective_single_chain_is_the_loss() {
        let (mut inst, params) = fixed_instance(1, 1, 0.0, 1);
        inst.prompts.truncate(1);
        let cots = inst.enumerate_cots();
        assert_eq!(cots.len(), 1);
        let expect = chain_loss(&params, &inst, &inst.prompts[0], &cots[0]).unwrap();
        let got = exact_objective(&params, &inst).unwrap();
        assert!((got - expect).abs() < 1e-15);
    }

    #[test]
    fn exact_objective_zero_at_point_mass_on_gold() {
        // lambda = 0 and the score head at (numerically) a point mass on the
        // gold digit: the squared error vanishes.
        let policy = PolicyConfig::new(11, 3, 1, 1.0).unwrap();
        let mut params = vec![0.0; policy.param_len()];
        let gold = 4usize;
        params[policy.param_len() - 11 + gold] = 500.0;
        let inst = TinyInstance {
            policy,
            prompts: vec![JudgeExample {
                features: vec![0.0; 3],
                gold: gold as i64,
                quality: 0,
            }],
            lambda: 0.0,
        };
        let obj = exact_objective(&params, &inst).unwrap();
        assert!(obj.abs() < 1e-12, "objective {obj}");
    }

    #[test]
    fn exact_objective_matches_monte_carlo() {
        let (inst, params) = fixed_instance(2, 2, 1.0, 3);
        let exact = exact_objective(&params, &inst).unwrap();
        let n = 1_000_000usize;
        let base = Rng::seeded(99);
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for i in 0..n {
            let mut rng = base.derive(&[i as u64]);
            let prompt_idx = i % inst.prompts.len();
            let ex = &inst.prompts[prompt_idx];
            let traj = policy::sample_trajectory(
                &params,
                &inst.policy,
                prompt_idx,
                &ex.features,
                &mut rng,
            )
            .unwrap();
            let loss = chain_loss(&params, &inst, ex, &traj.cot).unwrap();
            sum += loss;
            sum2 += loss * loss;
        }
        let mean = sum / n as f64;
        let var = (sum2 / n as f64 - mean * mean).max(0.0);
        let sigma = (var / n as f64).sqrt();
        assert!(
            (mean - exact).abs() <= 3.0 * sigma + 1e-9,
            "mc {mean} vs exact {exact} (sigma {sigma})"
        );
    }

    #[test]
    fn exact_gradient_matches_finite_differences() {
        for (seed, lambda) in [(10, 0.0), (11, 1.0)] {
            let (inst, params) = fixed_instance(2, 2, lambda, seed);
            let exact = exact_gradient(&params, &inst).unwrap();
            let numeric = finite_diff_gradient(&params, &inst, 1e-5).unwrap();
            assert!(max_rel_error(&exact, &numeric) <= 1e-6);
        }
    }

    #[test]
    fn constant_reward_gradient_is_zero() {
        // With a constant reward table the score-function term integrates to
        // zero: sum over chains of grad pi is the gradient of a constant.
        let (inst, params) = fixed_instance(2, 1, 0.0, 5);
        let n_cots = inst.enumerate_cots().len();
        let table: Vec<Vec<f64>> = vec![vec![2.5; n_cots]; inst.prompts.len()];
        let grad = reinforce_expectation_reward_table(&params, &inst, &table).unwrap();
        assert!(grad.iter().all(|g| g.abs() < 1e-12));
    }

    #[test]
    fn single_chain_instance_reduces_to_direct_term() {
        let (inst, params) = fixed_instance(1, 2, 1.0, 7);
        let exact = exact_gradient(&params, &inst).unwrap();
        // log pi(c|x) = 0 identically, so only the direct term remains; the
        // finite-difference gradient of the objective is that term.
        let numeric = finite_diff_gradient(&params, &inst, 1e-5).unwrap();
        assert!(max_rel_error(&exact, &numeric) <= 1e-6);
        // And the chain gradient itself is exactly zero.
        let cots = inst.enumerate_cots();
        let g =
            policy::grad_log_prob_cot(&params, &inst.policy, &inst.prompts[0].features, &cots[0])
                .unwrap();
        assert!(g.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn central_differences_are_exact_on_quadratics() {
        // For a quadratic the second-order truncation term vanishes, leaving
        // only roundoff.
        let coeffs: Vec<f64> = (0..20).map(|i| 0.3 + 0.1 * i as f64).collect();
        let params: Vec<f64> = (0..20).map(|i| -1.0 + 0.1 * i as f64).collect();
        let quad = |p: &[f64]| -> Result<f64> {
            Ok(p.iter()
                .zip(&coeffs)
                .map(|(x, a)| a * x * x + 2.0 * x)
                .sum())
        };
        let numeric = finite_diff_of(&params, 1e-5, quad).unwrap();
        for ((x, a), g) in params.iter().zip(&coeffs).zip(&numeric) {
            let analytic = 2.0 * a * x + 2.0;
            assert!((g - analytic).abs() < 1e-9, "{g} vs {analytic}");
        }
    }

    #[test]
    fn finite_diff_step_sweep_is_v_shaped() {
        let (inst, params) = fixed_instance(2, 1, 1.0, 21);
        let exact = exact_gradient(&params, &inst).unwrap();
        let err_at = |step: f64| {
            let numeric = finite_diff_gradient(&params, &inst, step).unwrap();
            max_rel_error(&exact, &numeric)
        };
        let coarse = err_at(1e-3);
        let mid = err_at(1e-5);
        let fine = err_at(1e-7);
        assert!(mid <= coarse, "coarse {coarse} vs mid {mid}");
        assert!(mid <= fine, "fine {fine} vs mid {mid}");
    }

    #[test]
    fn estimator_expectation_is_unbiased_and_k_independent() {
        let (inst, params) = fixed_instance(2, 1, 1.0, 31);
        let exact = exact_gradient(&params, &inst).unwrap();
        let mut results = Vec::new();
        for k in [2usize, 3] {
            for baseline in [false, true] {
                let flags = StabilizationFlags {
                    leave_one_out_baseline: baseline,
                    standardize_and_clip: false,
                };
                let e =
                    estimator_expectation(EstimatorKind::Real, &params, &inst, k, flags).unwrap();
                assert!(
                    max_abs_error(&e, &exact) <= 1e-10,
                    "k={k} baseline={baseline}"
                );
                results.push(e);
            }
        }
        for pair in results.windows(2) {
            assert!(max_abs_error(&pair[0], &pair[1]) <= 1e-10);
        }
    }

    #[test]
    fn forced_equal_rewards_kill_the_exploration_term() {
        let (inst, params) = fixed_instance(2, 1, 0.0, 41);
        let n_cots = inst.enumerate_cots().len();
        let table: Vec<Vec<f64>> = vec![vec![1.0; n_cots]; inst.prompts.len()];
        let e = estimator_expectation_reward_table(
            &params,
            &inst,
            &table,
            2,
            StabilizationFlags::default(),
        )
        .unwrap();
        assert!(e.iter().all(|g| g.abs() < 1e-12));
    }

    #[test]
    fn verification_catches_an_injected_sign_error() {
        // The finite-difference harness must flag a corrupted gradient: flip
        // the sign of the direct term and check the checker.
        let (inst, params) = fixed_instance(2, 1, 1.0, 51);
        let broken = {
            let mut g = exact_gradient(&params, &inst).unwrap();
            let numeric = finite_diff_gradient(&params, &inst, 1e-5).unwrap();
            // Corrupt: negate every coordinate (sign error).
            for v in g.iter_mut() {
                *v = -*v;
            }
            max_rel_error(&g, &numeric)
        };
        assert!(
            broken > 1e-6,
            "sign error must exceed the tolerance, got {broken}"
        );
    }

    #[test]
    fn deterministic_label_gives_perfect_predictor() {
        // y* = g(x) deterministically: posterior mean is g, with zero MSE and
        // correlation 1 against itself under any competitor-free check.
        let joint = DiscreteJoint {
            px: vec![0.25, 0.25, 0.5],
            pc_given_x: vec![vec![0.5, 0.5]; 3],
            py_given_x: vec![
                vec![1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
            ],
            y_values: vec![1.0, 2.0, 3.0],
        };
        joint.validate().unwrap();
        for (x, expect) in [(0usize, 1.0), (1, 2.0), (2, 3.0)] {
            assert_eq!(joint.posterior_mean_x(x), expect);
            for c in 0..2 {
                assert_eq!(joint.posterior_mean_xc_from_joint(x, c), expect);
            }
        }
    }

    #[test]
    fn optimality_suite_skips_degenerate_joint() {
        // Label independent of x: Var(mu) = 0, so the joint must be counted
        // as skipped rather than tested.
        let joint = DiscreteJoint {
            px: vec![0.5, 0.5],
            pc_given_x: vec![vec![1.0]; 2],
            py_given_x: vec![vec![0.5, 0.5]; 2],
            y_values: vec![1.0, 2.0],
        };
        joint.validate().unwrap();
        let mut report = OptimalityReport::default();
        let mut rng = Rng::seeded(1);
        check_joint(&joint, 0, 10, &mut rng, &mut report);
        assert_eq!(report.joints_skipped, 1);
        assert_eq!(report.joints_tested, 0);
        assert!(report.passed());
    }

    #[test]
    fn optimality_suite_checks_deterministic_label_joint() {
        // y* = g(x): the posterior mean is g itself, zero MSE, correlation 1;
        // no competitor should beat it.
        let joint = DiscreteJoint {
            px: vec![0.25, 0.25, 0.5],
            pc_given_x: vec![vec![0.5, 0.5]; 3],
            py_given_x: vec![
                vec![1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
            ],
            y_values: vec![1.0, 2.0, 3.0],
        };
        joint.validate().unwrap();
        let mut report = OptimalityReport::default();
        let mut rng = Rng::seeded(5);
        check_joint(&joint, 0, 200, &mut rng, &mut report);
        assert_eq!(report.joints_tested, 1);
        assert!(report.passed(), "violations: {:?}", report.violations);
    }

    #[test]
    fn optimality_suite_small_run_passes() {
        let report = posterior_optimality_suite(50, 50, 7);
        assert!(report.passed(), "violations: {:?}", report.violations);
        assert!(report.joints_tested > 0);
    }

    #[test]
    fn reference_metrics_agree_with_production_on_mixed_ties() {
        let x = [1.0, 2.0, 2.0, 3.0, 1.0, 4.0, 2.0];
        let y = [2.0, 1.0, 3.0, 3.0, 2.0, 5.0, 1.0];
        assert!(
            (crate::metrics::pearson(&x, &y).unwrap() - pearson_reference(&x, &y)).abs() < 1e-13
        );
        assert!(
            (crate::metrics::spearman(&x, &y).unwrap() - spearman_reference(&x, &y)).abs() < 1e-13
        );
        assert!(
            (crate::metrics::kendall_tau_b(&x, &y).unwrap() - kendall_tau_b_reference(&x, &y))
                .abs()
                < 1e-13
        );
    }

    #[test]
    fn quick_verification_passes() {
        let report = run_verification(VerifyScale::Quick);
        for check in &report.checks {
            assert!(
                check.passed || !check.hard,
                "hard check failed: {} ({})",
                check.name,
                check.detail
            );
        }
        assert!(report.passed());
    }
}
