//! Gradient estimators over sampled groups.
//!
//! All estimators return ascent directions on their reward; the trainer adds
//! `eta * update`. The menu:
//!
//! * `real_gradient` — generalized policy gradient for the policy-dependent
//!   regression-aware reward: a reasoning-exploration term weighted by
//!   standardized leave-one-out advantages plus a `beta`-scaled prediction
//!   refinement term (the direct reward gradient).
//! * `standard_rl_gradient` — binary-reward policy gradient over the full
//!   sequence log-probability, with the same advantage pipeline.
//! * `raft_gradient` — prediction refinement only, applied to self-sampled
//!   reasoning chains.
//! * `jepo_gradient` — gold-token log-likelihood as the exploration reward
//!   plus an unweighted gold-token likelihood gradient.

use serde::{Deserialize, Serialize};

use crate::env::JudgeExample;
use crate::error::{Error, Result};
use crate::policy::{self, PolicyConfig, Trajectory};

/// Clip bound for standardized advantages.
pub const ADV_CLIP: f64 = 1.0;
/// Guard added to the advantage standard deviation.
pub const ADV_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Real,
    StandardRl,
    Raft,
    Jepo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    pub kind: EstimatorKind,
    /// Weight on the prediction-refinement term.
    pub beta: f64,
    /// Log-likelihood weight inside the regression-aware reward.
    pub lambda: f64,
    /// Use raw rewards (no baseline, no standardization) as exploration
    /// weights for the jepo estimator.
    pub jepo_raw_weights: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            kind: EstimatorKind::Real,
            beta: 0.01,
            lambda: 1.0,
            jepo_raw_weights: false,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.beta.is_finite() || self.beta < 0.0 {
            return Err(Error::Config(format!(
                "beta must be >= 0, got {}",
                self.beta
            )));
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::Config(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// Which stabilizations the exploration weights go through.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StabilizationFlags {
    pub leave_one_out_baseline: bool,
    pub standardize_and_clip: bool,
}

impl Default for StabilizationFlags {
    fn default() -> Self {
        StabilizationFlags {
            leave_one_out_baseline: true,
            standardize_and_clip: true,
        }
    }
}

impl StabilizationFlags {
    pub const RAW: StabilizationFlags = StabilizationFlags {
        leave_one_out_baseline: false,
        standardize_and_clip: false,
    };
}

/// The `K` trajectories sampled for one prompt with their rewards, leave-one-
/// out baselines, raw advantages and standardized clipped advantages.
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub prompt_idx: usize,
    pub trajectories: Vec<Trajectory>,
    pub rewards: Vec<f64>,
    pub baselines: Vec<f64>,
    pub advantages: Vec<f64>,
    pub std_advantages: Vec<f64>,
}

impl Group {
    pub fn new(
        prompt_idx: usize,
        trajectories: Vec<Trajectory>,
        rewards: Vec<f64>,
    ) -> Result<Self> {
        if trajectories.len() != rewards.len() {
            return Err(Error::Degenerate("trajectory/reward count mismatch".into()));
        }
        let (advantages, std_advantages) = rloo_advantages(&rewards)?;
        let baselines = rewards
            .iter()
            .zip(&advantages)
            .map(|(r, a)| r - a)
            .collect();
        Ok(Group {
            prompt_idx,
            trajectories,
            rewards,
            baselines,
            advantages,
            std_advantages,
        })
    }

    pub fn k(&self) -> usize {
        self.trajectories.len()
    }
}

fn population_std(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n).sqrt()
}

/// Leave-one-out advantages and their standardized clipped form.
///
/// `b_i` is the mean of the other `K-1` rewards, `A_i = r_i - b_i`, and
/// `A~_i = clip(A_i / (sigma(A) + eps), -1, 1)` with the population standard
/// deviation over the group's raw advantages.
pub fn rloo_advantages(rewards: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let k = rewards.len();
    if k < 2 {
        return Err(Error::Degenerate(format!(
            "leave-one-out baseline needs at least 2 samples, got {k}"
        )));
    }
    let total: f64 = rewards.iter().sum();
    let advantages: Vec<f64> = rewards
        .iter()
        .map(|&r| {
            let baseline = (total - r) / (k - 1) as f64;
            r - baseline
        })
        .collect();
    let sigma = population_std(&advantages);
    let standardized = advantages
        .iter()
        .map(|a| (a / (sigma + ADV_EPS)).clamp(-ADV_CLIP, ADV_CLIP))
        .collect();
    Ok((advantages, standardized))
}

/// Exploration-term weights under a choice of stabilizations.
pub fn term1_weights(rewards: &[f64], flags: StabilizationFlags) -> Result<Vec<f64>> {
    let mut weights: Vec<f64> = if flags.leave_one_out_baseline {
        rloo_advantages(rewards)?.0
    } else {
        rewards.to_vec()
    };
    if flags.standardize_and_clip {
        let sigma = population_std(&weights);
        for w in &mut weights {
            *w = (*w / (sigma + ADV_EPS)).clamp(-ADV_CLIP, ADV_CLIP);
        }
    }
    Ok(weights)
}

/// Prediction-refinement gradient of one trajectory:
/// `-2 (y_hat - y*) grad y_hat + lambda * grad log pi(y* | x, c)`,
/// accumulated into `grad` with weight `scale`.
fn add_prediction_update(
    params: &[f64],
    cfg: &PolicyConfig,
    example: &JudgeExample,
    traj: &Trajectory,
    lambda: f64,
    scale: f64,
    grad: &mut [f64],
) -> Result<()> {
    let gold_token = example.gold as usize;
    // The residual is needed before the gradient pass can be scaled.
    let dist = policy::score_dist(params, cfg, &example.features, &traj.cot)?;
    let y_hat = policy::rail_value_from_dist(cfg, &dist);
    policy::add_rail_grad(
        params,
        cfg,
        &example.features,
        &traj.cot,
        scale * (-2.0) * (y_hat - example.gold as f64),
        grad,
    )?;
    if lambda != 0.0 {
        policy::add_grad_log_prob_score_token(
            params,
            cfg,
            &example.features,
            &traj.cot,
            gold_token,
            scale * lambda,
            grad,
        )?;
    }
    Ok(())
}

/// Generalized policy gradient for the regression-aware reward with explicit
/// exploration weights (the oracle audits feed unstabilized weights here).
pub fn real_gradient_with_weights(
    trajectories: &[Trajectory],
    weights: &[f64],
    params: &[f64],
    cfg: &PolicyConfig,
    example: &JudgeExample,
    lambda: f64,
    beta: f64,
) -> Result<Vec<f64>> {
    debug_assert_eq!(trajectories.len(), weights.len());
    let k = trajectories.len() as f64;
    let mut grad = vec![0.0; cfg.param_len()];
    for (traj, &w) in trajectories.iter().zip(weights) {
        if w != 0.0 {
            policy::add_grad_log_prob_cot(
                params,
                cfg,
                &example.features,
                &traj.cot,
                w / k,
                &mut grad,
            )?;
        }
        if beta != 0.0 {
            add_prediction_update(params, cfg, example, traj, lambda, beta / k, &mut grad)?;
        }
    }
    Ok(grad)
}

/// Production regression-aware estimator: standardized clipped advantages on
/// the exploration term, `beta` on the prediction term.
pub fn real_gradient(
    group: &Group,
    params: &[f64],
    cfg: &PolicyConfig,
    example: &JudgeExample,
    est: &EstimatorConfig,
) -> Result<Vec<f64>> {
    real_gradient_with_weights(
        &group.trajectories,
        &group.std_advantages,
        params,
        cfg,
        example,
        est.lambda,
        est.beta,
    )
}

/// Binary-reward policy gradient: advantages weight the full sequence
/// log-probability, reasoning chain plus sampled score token.
pub fn standard_rl_gradient(
    group: &Group,
    params: &[f64],
    cfg: &PolicyConfig,
    example: &JudgeExample,
) -> Result<Vec<f64>> {
    standard_rl_gradient_with_weights(
        &group.trajectories,
        &group.std_advantages,
        params,
        cfg,
        example,
    )
}

pub fn standard_rl_gradient_with_weights(
    trajectories: &[Trajectory],
    weights: &[f64],
    params: &[f64],
    cfg: &PolicyConfig,
    example: &JudgeExample,
) -> Result<Vec<f64>> {
    let k = trajectories.len() as f64;
    let mut grad = vec![0.0; cfg.param_len()];
    for (traj, &w) in trajectories.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        policy::add_grad_log_prob_cot(params, cfg, &example.features, &traj.cot, w / k, &mut grad)?;
        policy::add_grad_log_prob_score_token(
            params,
            cfg,
            &example.features,
            &traj.cot,
            traj.score_token,
            w / k,
            &mut grad,
        )?;
    }
    Ok(grad)
}

/// Prediction refinement alone over self-sampled chains.
pub fn raft_gradient(
    group: &Group,
    params: &[f64],
    cfg: &PolicyConfig,
    example: &JudgeExample,
    lambda: f64,
) -> Result<Vec<f64>> {
    let k = group.k() as f64;
    let mut grad = vec![0.0; cfg.param_len()];
    for traj in &group.trajectories {
        add_prediction_update(params, cfg, example, traj, lambda, 1.0 / k, &mut grad)?;
    }
    Ok(grad)
}

/// Gold-token likelihood as exploration reward plus its direct gradient.
///
/// With `raw_weights`, exploration weights are the raw log-likelihood rewards
/// rather than standardized leave-one-out advantages.
pub fn jepo_gradient(
    group: &Group,
    params: &[f64],
    cfg: &PolicyConfig,
    example: &JudgeExample,
    raw_weights: bool,
) -> Result<Vec<f64>> {
    let weights = if raw_weights {
        group.rewards.clone()
    } else {
        group.std_advantages.clone()
    };
    let k = group.k() as f64;
    let gold_token = example.gold as usize;
    let mut grad = vec![0.0; cfg.param_len()];
    for (traj, &w) in group.trajectories.iter().zip(&weights) {
        if w != 0.0 {
            policy::add_grad_log_prob_cot(
                params,
                cfg,
                &example.features,
                &traj.cot,
                w / k,
                &mut grad,
            )?;
        }
        policy::add_grad_log_prob_score_token(
            params,
            cfg,
            &example.features,
            &traj.cot,
            gold_token,
            1.0 / k,
            &mut grad,
        )?;
    }
    Ok(grad)
}

/// Per-trajectory reward for an estimator kind.
pub fn trajectory_reward(
    kind: EstimatorKind,
    traj: &Trajectory,
    example: &JudgeExample,
    cfg: &PolicyConfig,
    lambda: f64,
) -> f64 {
    match kind {
        EstimatorKind::Real | EstimatorKind::Raft => {
            let y_hat = policy::rail_value_from_dist(cfg, &traj.score_dist);
            let logp_gold = traj.score_dist[example.gold as usize].ln();
            crate::reward::real_reward(y_hat, logp_gold, example.gold, lambda)
        }
        EstimatorKind::StandardRl => crate::reward::binary_reward(traj.score_token, example.gold),
        EstimatorKind::Jepo => traj.score_dist[example.gold as usize].ln(),
    }
}

/// Dispatch on the configured estimator kind.
pub fn gradient_for(
    est: &EstimatorConfig,
    group: &Group,
    params: &[f64],
    cfg: &PolicyConfig,
    example: &JudgeExample,
) -> Result<Vec<f64>> {
    match est.kind {
        EstimatorKind::Real => real_gradient(group, params, cfg, example, est),
        EstimatorKind::StandardRl => standard_rl_gradient(group, params, cfg, example),
        EstimatorKind::Raft => raft_gradient(group, params, cfg, example, est.lambda),
        EstimatorKind::Jepo => jepo_gradient(group, params, cfg, example, est.jepo_raw_weights),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{init_policy, sample_trajectory};
    use crate::rng::Rng;
    use proptest::prelude::*;

    fn example(gold: i64) -> JudgeExample {
        JudgeExample {
            features: vec![0.2, -0.4, 0.6, 0.1, -0.3],
            gold,
            quality: gold,
        }
    }

    fn sample_group(
        cfg: &PolicyConfig,
        params: &[f64],
        ex: &JudgeExample,
        kind: EstimatorKind,
        lambda: f64,
        k: usize,
        seed: u64,
    ) -> Group {
        let base = Rng::seeded(seed);
        let trajs: Vec<Trajectory> = (0..k)
            .map(|i| {
                let mut rng = base.derive(&[i as u64]);
                sample_trajectory(params, cfg, 0, &ex.features, &mut rng).unwrap()
            })
            .collect();
        let rewards = trajs
            .iter()
            .map(|t| trajectory_reward(kind, t, ex, cfg, lambda))
            .collect();
        Group::new(0, trajs, rewards).unwrap()
    }

    fn finite_diff(params: &[f64], step: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        let mut p = params.to_vec();
        (0..params.len())
            .map(|i| {
                let orig = p[i];
                p[i] = orig + step;
                let hi = f(&p);
                p[i] = orig - step;
                let lo = f(&p);
                p[i] = orig;
                (hi - lo) / (2.0 * step)
            })
            .collect()
    }

    fn assert_close(a: &[f64], b: &[f64], rel_tol: f64) {
        for (i, (x, y)) in a.iter().zip(b).enumerate() {
            let scale = x.abs().max(y.abs()).max(1e-8);
            assert!((x - y).abs() / scale <= rel_tol, "coord {i}: {x} vs {y}");
        }
    }

    #[test]
    fn rloo_two_point_symmetric() {
        let (a, std) = rloo_advantages(&[1.0, 0.0]).unwrap();
        assert_eq!(a, vec![1.0, -1.0]);
        assert!((std[0] - 1.0).abs() < 1e-7);
        assert!((std[1] + 1.0).abs() < 1e-7);
    }

    #[test]
    fn rloo_degenerate_equal_rewards() {
        let (a, std) = rloo_advantages(&[0.7; 5]).unwrap();
        assert!(a.iter().all(|&x| x.abs() < 1e-15));
        assert!(std.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rloo_clipping_case() {
        let (a, std) = rloo_advantages(&[3.0, -1.0, -1.0, -1.0]).unwrap();
        assert!((a[0] - 4.0).abs() < 1e-12);
        for v in &a[1..] {
            assert!((v + 4.0 / 3.0).abs() < 1e-12);
        }
        // sigma = 4/sqrt(3); 4 / sigma = sqrt(3) clips to 1.
        assert!((std[0] - 1.0).abs() < 1e-8);
        for v in &std[1..] {
            assert!((v + 1.0 / 3.0f64.sqrt()).abs() < 1e-8);
        }
    }

    #[test]
    fn rloo_rejects_single_sample() {
        assert!(rloo_advantages(&[1.0]).is_err());
    }

    #[test]
    fn real_gradient_vanishes_without_signal() {
        // beta = 0 and all rewards equal: both terms are zero.
        let cfg = PolicyConfig::new(11, 5, 2, 1.0).unwrap();
        let params = init_policy(&cfg, 1);
        let ex = example(4);
        // Single reasoning token: every trajectory identical, rewards equal.
        let group = sample_group(&cfg, &params, &ex, EstimatorKind::Real, 1.0, 4, 3);
        let est = EstimatorConfig {
            beta: 0.0,
            ..EstimatorConfig::default()
        };
        let grad = real_gradient(&group, &params, &cfg, &ex, &est).unwrap();
        assert!(grad.iter().all(|&g| g.abs() < 1e-12));
    }

    #[test]
    fn real_gradient_single_cot_matches_prediction_term_finite_diff() {
        // With one reasoning token the exploration term is identically zero,
        // so the estimator equals the mean prediction update, i.e. the descent
        // direction on the mean per-trajectory loss.
        let cfg = PolicyConfig::new(11, 5, 1, 1.0).unwrap();
        let params = init_policy(&cfg, 5);
        let ex = example(5);
        let lambda = 1.0;
        let group = sample_group(&cfg, &params, &ex, EstimatorKind::Real, lambda, 2, 9);
        let est = EstimatorConfig {
            beta: 1.0,
            lambda,
            ..EstimatorConfig::default()
        };
        let grad = real_gradient(&group, &params, &cfg, &ex, &est).unwrap();
        let cots: Vec<Vec<usize>> = group.trajectories.iter().map(|t| t.cot.clone()).collect();
        let numeric = finite_diff(&params, 1e-5, |p| {
            let mut loss = 0.0;
            for cot in &cots {
                let dist = policy::score_dist(p, &cfg, &ex.features, cot).unwrap();
                let y_hat = policy::rail_value_from_dist(&cfg, &dist);
                let d = y_hat - ex.gold as f64;
                loss += d * d - lambda * dist[ex.gold as usize].ln();
            }
            loss / cots.len() as f64
        });
        let ascent: Vec<f64> = numeric.iter().map(|g| -g).collect();
        assert_close(&grad, &ascent, 1e-6);
    }

    #[test]
    fn standard_rl_zero_gradient_when_all_correct() {
        let cfg = PolicyConfig::new(12, 5, 2, 1.0).unwrap();
        let params = init_policy(&cfg, 2);
        let ex = example(3);
        let trajs: Vec<Trajectory> = (0..4)
            .map(|i| {
                let mut rng = Rng::seeded(40 + i);
                let mut t = sample_trajectory(&params, &cfg, 0, &ex.features, &mut rng).unwrap();
                t.score_token = 3;
                t
            })
            .collect();
        let rewards = vec![1.0; 4];
        let group = Group::new(0, trajs, rewards).unwrap();
        let grad = standard_rl_gradient(&group, &params, &cfg, &ex).unwrap();
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn standard_rl_two_sample_contrast() {
        let cfg = PolicyConfig::new(12, 5, 2, 1.0).unwrap();
        let params = init_policy(&cfg, 8);
        let ex = example(2);
        let group = sample_group(&cfg, &params, &ex, EstimatorKind::StandardRl, 0.0, 2, 77);
        // Force rewards [1, 0] regardless of what was sampled.
        let group = Group::new(0, group.trajectories, vec![1.0, 0.0]).unwrap();
        let grad = standard_rl_gradient(&group, &params, &cfg, &ex).unwrap();
        let seq_grad = |t: &Trajectory| -> Vec<f64> {
            let mut g = policy::grad_log_prob_cot(&params, &cfg, &ex.features, &t.cot).unwrap();
            let gs = policy::grad_log_prob_score_token(
                &params,
                &cfg,
                &ex.features,
                &t.cot,
                t.score_token,
            )
            .unwrap();
            for (a, b) in g.iter_mut().zip(&gs) {
                *a += b;
            }
            g
        };
        let g1 = seq_grad(&group.trajectories[0]);
        let g2 = seq_grad(&group.trajectories[1]);
        let expect: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| 0.5 * (a - b)).collect();
        assert_close(&grad, &expect, 1e-6);
    }

    #[test]
    fn raft_equals_real_without_exploration_term() {
        let cfg = PolicyConfig::new(11, 5, 2, 1.0).unwrap();
        let params = init_policy(&cfg, 4);
        let ex = example(4);
        let lambda = 0.7;
        let group = sample_group(&cfg, &params, &ex, EstimatorKind::Real, lambda, 3, 5);
        let est = EstimatorConfig {
            beta: 1.0,
            lambda,
            ..EstimatorConfig::default()
        };
        let real = real_gradient(&group, &params, &cfg, &ex, &est).unwrap();
        let raft = raft_gradient(&group, &params, &cfg, &ex, lambda).unwrap();
        for (a, b) in real.iter().zip(&raft) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn raft_zero_at_exact_fit_without_likelihood() {
        // Score head with mass 0.5/0.5 on digits 3 and 5: y_hat = 4 = gold.
        let cfg = PolicyConfig::new(12, 5, 1, 1.0).unwrap();
        let mut params = vec![0.0; cfg.param_len()];
        let big = 60.0;
        for j in 0..12 {
            let bias = cfg.param_len() - 12 + j;
            params[bias] = if j == 3 || j == 5 { big } else { 0.0 };
        }
        let ex = JudgeExample {
            features: vec![0.0; 5],
            gold: 4,
            quality: 4,
        };
        let mut rng = Rng::seeded(0);
        let trajs: Vec<Trajectory> = (0..2)
            .map(|_| sample_trajectory(&params, &cfg, 0, &ex.features, &mut rng).unwrap())
            .collect();
        let rewards = trajs
            .iter()
            .map(|t| trajectory_reward(EstimatorKind::Raft, t, &ex, &cfg, 0.0))
            .collect();
        let group = Group::new(0, trajs, rewards).unwrap();
        let grad = raft_gradient(&group, &params, &cfg, &ex, 0.0).unwrap();
        assert!(
            grad.iter().all(|&g| g.abs() < 1e-9),
            "max {}",
            grad.iter().fold(0.0f64, |m, g| m.max(g.abs()))
        );
        // Full estimator at beta = 1: equal rewards kill the exploration term
        // and the zero residual kills the prediction term.
        let est = EstimatorConfig {
            beta: 1.0,
            lambda: 0.0,
            ..EstimatorConfig::default()
        };
        let real = real_gradient(&group, &params, &cfg, &ex, &est).unwrap();
        assert!(real.iter().all(|&g| g.abs() < 1e-9));
    }

    #[test]
    fn raft_matches_finite_differences() {
        let cfg = PolicyConfig::new(12, 5, 2, 1.1).unwrap();
        let params = init_policy(&cfg, 12);
        let ex = example(5);
        let lambda = 1.0;
        let group = sample_group(&cfg, &params, &ex, EstimatorKind::Raft, lambda, 3, 21);
        let grad = raft_gradient(&group, &params, &cfg, &ex, lambda).unwrap();
        let cots: Vec<Vec<usize>> = group.trajectories.iter().map(|t| t.cot.clone()).collect();
        let numeric = finite_diff(&params, 1e-5, |p| {
            let mut loss = 0.0;
            for cot in &cots {
                let dist = policy::score_dist(p, &cfg, &ex.features, cot).unwrap();
                let y_hat = policy::rail_value_from_dist(&cfg, &dist);
                loss += (y_hat - ex.gold as f64).powi(2) - lambda * dist[ex.gold as usize].ln();
            }
            loss / cots.len() as f64
        });
        let ascent: Vec<f64> = numeric.iter().map(|g| -g).collect();
        assert_close(&grad, &ascent, 1e-6);
    }

    #[test]
    fn jepo_exploration_term_vanishes_for_equal_rewards() {
        let cfg = PolicyConfig::new(11, 5, 2, 1.0).unwrap();
        let params = init_policy(&cfg, 6);
        let ex = example(2);
        // Single reasoning token: identical chains, equal gold likelihoods.
        let group = sample_group(&cfg, &params, &ex, EstimatorKind::Jepo, 0.0, 3, 1);
        let grad = jepo_gradient(&group, &params, &cfg, &ex, false).unwrap();
        // Equals the mean gold-token likelihood gradient.
        let expect = policy::grad_log_prob_score_token(
            &params,
            &cfg,
            &ex.features,
            &group.trajectories[0].cot,
            ex.gold as usize,
        )
        .unwrap();
        assert_close(&grad, &expect, 1e-9);
    }

    #[test]
    fn jepo_prediction_term_matches_finite_differences() {
        let cfg = PolicyConfig::new(12, 5, 2, 1.0).unwrap();
        let params = init_policy(&cfg, 13);
        let ex = example(3);
        let group = sample_group(&cfg, &params, &ex, EstimatorKind::Jepo, 0.0, 3, 2);
        // Zero exploration weights isolate the prediction half.
        let zero = vec![0.0; 3];
        let trajs = group.trajectories.clone();
        let grad = {
            let g = Group::new(0, trajs.clone(), zero.clone()).unwrap();
            // raw_weights with all-zero rewards: weights all zero.
            jepo_gradient(&g, &params, &cfg, &ex, true).unwrap()
        };
        let cots: Vec<Vec<usize>> = trajs.iter().map(|t| t.cot.clone()).collect();
        let numeric = finite_diff(&params, 1e-5, |p| {
            cots.iter()
                .map(|cot| {
                    policy::score_dist(p, &cfg, &ex.features, cot).unwrap()[ex.gold as usize].ln()
                })
                .sum::<f64>()
                / cots.len() as f64
        });
        assert_close(&grad, &numeric, 1e-6);
    }

    #[test]
    fn ordinal_sensitivity_vs_binary_blindness() {
        let cfg = PolicyConfig::new(12, 5, 2, 1.0).unwrap();
        let params = init_policy(&cfg, 30);
        let features = vec![0.1, 0.2, -0.1, 0.0, 0.4];
        let base = Rng::seeded(3);
        let trajs: Vec<Trajectory> = (0..3)
            .map(|i| {
                let mut rng = base.derive(&[i]);
                let mut t = sample_trajectory(&params, &cfg, 0, &features, &mut rng).unwrap();
                t.score_token = 9; // never matches either gold below
                t
            })
            .collect();
        let ex_a = JudgeExample {
            features: features.clone(),
            gold: 2,
            quality: 2,
        };
        let ex_b = JudgeExample {
            features: features.clone(),
            gold: 5,
            quality: 5,
        };

        // Binary rewards identical (all wrong) under both relabelings.
        let mk_binary = |ex: &JudgeExample| {
            let rewards = trajs
                .iter()
                .map(|t| crate::reward::binary_reward(t.score_token, ex.gold))
                .collect();
            Group::new(0, trajs.clone(), rewards).unwrap()
        };
        let ga = standard_rl_gradient(&mk_binary(&ex_a), &params, &cfg, &ex_a).unwrap();
        let gb = standard_rl_gradient(&mk_binary(&ex_b), &params, &cfg, &ex_b).unwrap();
        assert_eq!(ga, gb);

        // The regression-aware estimator distinguishes the two golds.
        let est = EstimatorConfig {
            beta: 1.0,
            lambda: 0.0,
            ..EstimatorConfig::default()
        };
        let mk_real = |ex: &JudgeExample| {
            let rewards = trajs
                .iter()
                .map(|t| trajectory_reward(EstimatorKind::Real, t, ex, &cfg, 0.0))
                .collect();
            Group::new(0, trajs.clone(), rewards).unwrap()
        };
        let ra = real_gradient(&mk_real(&ex_a), &params, &cfg, &ex_a, &est).unwrap();
        let rb = real_gradient(&mk_real(&ex_b), &params, &cfg, &ex_b, &est).unwrap();
        assert!(ra.iter().zip(&rb).any(|(x, y)| (x - y).abs() > 1e-9));
    }

    proptest! {
        #[test]
        fn standardized_advantages_stay_clipped(
            rewards in proptest::collection::vec(-100.0f64..100.0, 2..20)
        ) {
            let (_, std) = rloo_advantages(&rewards).unwrap();
            for a in std {
                prop_assert!((-1.0..=1.0).contains(&a));
            }
        }
    }
}
