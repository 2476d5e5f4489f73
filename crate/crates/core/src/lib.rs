//! Desk-scale training engine for regression-aware reinforcement learning on
//! synthetic judge environments.
//!
//! A small autoregressive linear-softmax policy generates a reasoning chain
//! and a 1-5 score for each prompt. Training optimizes a policy-dependent
//! regression reward through a generalized policy gradient (exploration term
//! plus prediction-refinement term), with leave-one-out advantage baselines,
//! standardized clipped advantages, and dynamic group filtering. Competing
//! estimators (binary-reward policy gradient, prediction-only updates, and a
//! gold-likelihood variant) share the same loop for controlled comparisons.
//!
//! Everything the estimators rely on is verifiable: closed-form gradients are
//! checked against finite differences, sampled estimators against exact
//! enumeration on tiny instances, and the expected-digit predictor against a
//! brute-force optimality suite over random discrete joints. See the
//! `oracle` module and the `verify` CLI subcommand.

pub mod config;
pub mod env;
pub mod error;
pub mod estimator;
pub mod infer;
pub mod metrics;
pub mod oracle;
pub mod parallel;
pub mod policy;
pub mod reward;
pub mod rng;
pub mod trainer;

pub use config::RunConfig;
pub use env::{make_dataset, posterior_mean, EnvConfig, JudgeDataset, JudgeExample};
pub use error::{Error, Result};
pub use estimator::{rloo_advantages, EstimatorConfig, EstimatorKind, Group};
pub use infer::{average_of_n, greedy_predict, rail_predict, InferMode, Prediction};
pub use metrics::{error_metrics, kendall_tau_b, pearson, spearman, token_entropy, MetricsReport};
pub use policy::{init_policy, sample_trajectory, PolicyConfig, Trajectory, VocabLayout};
pub use reward::{binary_reward, group_accuracy, real_reward, RewardConfig, RewardKind};
pub use rng::Rng;
pub use trainer::{
    load_checkpoint, save_checkpoint, train_run, train_step, Checkpoint, OptimizerKind,
    SampleFilter, StepLog, TrainerConfig,
};
