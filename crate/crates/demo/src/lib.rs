//! Browser demo bindings: small wasm-bindgen wrappers over the training
//! engine for the static page in `www/`.
//!
//! Three interactive operations, all returning JSON strings so the page stays
//! framework-free:
//!
//! * [`train_compare`] — train the regression-aware and binary-reward
//!   estimators side by side and report test-Pearson / entropy curves.
//! * [`posterior_curve`] — the exact Bayes posterior mean along a path through
//!   the five class centers, for the current environment knobs.
//! * [`advantage_pipeline`] — leave-one-out baselines, advantages and
//!   standardized clipped advantages for a hand-entered reward group.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use realpg::env::{make_dataset, posterior_mean, EnvConfig, PROMPT_DIM};
use realpg::estimator::{rloo_advantages, EstimatorConfig, EstimatorKind};
use realpg::infer::{evaluate_dataset, InferMode};
use realpg::policy::PolicyConfig;
use realpg::reward::{RewardConfig, RewardKind};
use realpg::trainer::{train_run_with_probe, OptimizerKind, SampleFilter, TrainerConfig};

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct DemoConfig {
    steps: usize,
    eval_every: usize,
    group_size: usize,
    batch_size: usize,
    learning_rate: f64,
    lambda: f64,
    beta: f64,
    temperature: f64,
    sigma_x: f64,
    flip_prob: f64,
    seed: u64,
    n_train: usize,
    n_test: usize,
}

impl Default for DemoConfig {
    fn default() -> Self {
        DemoConfig {
            steps: 300,
            eval_every: 20,
            group_size: 16,
            batch_size: 16,
            learning_rate: 0.1,
            lambda: 1.0,
            beta: 0.01,
            temperature: 1.0,
            sigma_x: 0.65,
            flip_prob: 0.2,
            seed: 1,
            n_train: 800,
            n_test: 400,
        }
    }
}

#[derive(Serialize)]
struct Curve {
    label: String,
    steps: Vec<usize>,
    pearson: Vec<f64>,
    entropy: Vec<f64>,
    final_rmse: f64,
}

#[derive(Serialize)]
struct CompareOut {
    curves: Vec<Curve>,
}

fn error_json(message: impl std::fmt::Display) -> String {
    serde_json::json!({ "error": message.to_string() }).to_string()
}

fn run_one(kind: EstimatorKind, demo: &DemoConfig) -> realpg::Result<Curve> {
    let env = EnvConfig {
        sigma_x: demo.sigma_x,
        flip_prob: demo.flip_prob,
        ..EnvConfig::default()
    };
    let train_data = make_dataset(env, demo.n_train, demo.seed)?;
    let test_data = make_dataset(env, demo.n_test, demo.seed + 1000)?;
    let policy = PolicyConfig::new(16, PROMPT_DIM, 1, demo.temperature)?;
    let cfg = TrainerConfig {
        steps: demo.steps,
        batch_size: demo.batch_size,
        group_size: demo.group_size,
        learning_rate: demo.learning_rate,
        optimizer: OptimizerKind::Adam,
        filter: SampleFilter::Partial,
        estimator: EstimatorConfig {
            kind,
            beta: demo.beta,
            lambda: demo.lambda,
            jepo_raw_weights: false,
        },
        reward: RewardConfig {
            lambda: demo.lambda,
            kind: if kind == EstimatorKind::StandardRl {
                RewardKind::Binary
            } else {
                RewardKind::Real
            },
        },
        policy,
        seed: demo.seed,
    };
    cfg.validate()?;

    let mut steps = Vec::new();
    let mut pearson = Vec::new();
    let out = train_run_with_probe(
        &cfg,
        &train_data,
        None,
        demo.eval_every.max(1),
        |step, params| {
            let eval =
                evaluate_dataset(params, &policy, &test_data, InferMode::Rail, 1, demo.seed)?;
            steps.push(step);
            pearson.push(eval.report.r);
            Ok(())
        },
    )?;
    // Sampling entropy at the probed steps, from the per-step training logs.
    let entropy: Vec<f64> = steps
        .iter()
        .map(|&s| out.logs[s.saturating_sub(1).min(out.logs.len() - 1)].entropy)
        .collect();
    let final_eval = evaluate_dataset(
        &out.checkpoint.params,
        &policy,
        &test_data,
        InferMode::Rail,
        1,
        demo.seed,
    )?;
    Ok(Curve {
        label: match kind {
            EstimatorKind::Real => "regression-aware".to_string(),
            EstimatorKind::StandardRl => "binary-reward".to_string(),
            EstimatorKind::Raft => "prediction-only".to_string(),
            EstimatorKind::Jepo => "gold-likelihood".to_string(),
        },
        steps,
        pearson,
        entropy,
        final_rmse: final_eval.report.rmse,
    })
}

/// Train the regression-aware and binary-reward estimators under the supplied
/// knobs and return their test-Pearson and entropy curves as JSON.
#[wasm_bindgen]
pub fn train_compare(config_json: &str) -> String {
    let demo: DemoConfig = match serde_json::from_str(config_json) {
        Ok(d) => d,
        Err(e) => return error_json(format!("bad config: {e}")),
    };
    if demo.steps == 0 || demo.steps > 2000 || demo.n_train == 0 || demo.n_train > 20_000 {
        return error_json("steps must be 1..=2000 and n_train 1..=20000");
    }
    let mut curves = Vec::new();
    for kind in [EstimatorKind::Real, EstimatorKind::StandardRl] {
        match run_one(kind, &demo) {
            Ok(c) => curves.push(c),
            Err(e) => return error_json(e),
        }
    }
    serde_json::to_string(&CompareOut { curves }).expect("serializes")
}

#[derive(Serialize)]
struct PosteriorOut {
    /// Path position in units of class index (1..=5).
    position: Vec<f64>,
    posterior: Vec<f64>,
    kernel_mean: Vec<f64>,
}

/// Exact posterior mean along the straight-line path through the five class
/// centers, plus the clamped flip-kernel mean per class.
#[wasm_bindgen]
pub fn posterior_curve(
    alpha: f64,
    sigma_x: f64,
    flip_prob: f64,
    points_per_segment: u32,
) -> String {
    let config = EnvConfig {
        alpha,
        sigma_x,
        flip_prob,
    };
    if let Err(e) = config.validate() {
        return error_json(e);
    }
    if sigma_x == 0.0 {
        return error_json("sigma_x must be positive for an off-lattice curve");
    }
    let pts = points_per_segment.clamp(2, 200) as usize;
    let mut position = Vec::new();
    let mut posterior = Vec::new();
    for segment in 0..4 {
        for i in 0..pts {
            let s = i as f64 / pts as f64;
            let mut features = vec![0.0; PROMPT_DIM];
            features[segment] = alpha * (1.0 - s);
            features[segment + 1] = alpha * s;
            match posterior_mean(&config, &features) {
                Ok(mu) => {
                    position.push(1.0 + segment as f64 + s);
                    posterior.push(mu);
                }
                Err(e) => return error_json(e),
            }
        }
    }
    position.push(5.0);
    let mut last = vec![0.0; PROMPT_DIM];
    last[4] = alpha;
    match posterior_mean(&config, &last) {
        Ok(mu) => posterior.push(mu),
        Err(e) => return error_json(e),
    }
    let kernel_mean = (1..=5)
        .map(|q| realpg::env::expected_gold_given_quality(&config, q))
        .collect();
    serde_json::to_string(&PosteriorOut {
        position,
        posterior,
        kernel_mean,
    })
    .expect("serializes")
}

#[derive(Serialize)]
struct AdvantageOut {
    rewards: Vec<f64>,
    baselines: Vec<f64>,
    advantages: Vec<f64>,
    sigma: f64,
    standardized: Vec<f64>,
}

/// Leave-one-out advantage pipeline for a hand-entered reward group.
#[wasm_bindgen]
pub fn advantage_pipeline(rewards_json: &str) -> String {
    let rewards: Vec<f64> = match serde_json::from_str(rewards_json) {
        Ok(r) => r,
        Err(e) => return error_json(format!("expected a JSON array of numbers: {e}")),
    };
    if rewards.len() > 64 {
        return error_json("at most 64 rewards");
    }
    let (advantages, standardized) = match rloo_advantages(&rewards) {
        Ok(v) => v,
        Err(e) => return error_json(e),
    };
    let baselines: Vec<f64> = rewards
        .iter()
        .zip(&advantages)
        .map(|(r, a)| r - a)
        .collect();
    let mean = advantages.iter().sum::<f64>() / advantages.len() as f64;
    let sigma = (advantages
        .iter()
        .map(|a| (a - mean) * (a - mean))
        .sum::<f64>()
        / advantages.len() as f64)
        .sqrt();
    serde_json::to_string(&AdvantageOut {
        rewards,
        baselines,
        advantages,
        sigma,
        standardized,
    })
    .expect("serializes")
}
