//! Train the regression-aware and binary-reward estimators under identical
//! seeds, data and hyperparameters, and print the resulting correlation
//! metrics side by side.
//!
//!     cargo run --release -p realpg --example estimator_contrast

use realpg::env::{make_dataset, EnvConfig};
use realpg::estimator::EstimatorKind;
use realpg::infer::{evaluate_dataset, InferMode};
use realpg::reward::RewardKind;
use realpg::trainer::{train_run, OptimizerKind, SampleFilter, TrainerConfig};
use realpg::{EstimatorConfig, PolicyConfig, RewardConfig};

fn main() {
    let env = EnvConfig::default();
    let policy = PolicyConfig::new(16, 5, 1, 1.0).unwrap();
    let seeds: Vec<u64> = (1..=5).collect();

    println!(
        "{:<18} {:>8} {:>8} {:>8} {:>8} {:>8}",
        "estimator", "pearson", "spearman", "tau", "rmse", "mae"
    );
    for kind in [
        EstimatorKind::Real,
        EstimatorKind::StandardRl,
        EstimatorKind::Raft,
        EstimatorKind::Jepo,
    ] {
        let mut sums = [0.0f64; 5];
        for &seed in &seeds {
            let train_data = make_dataset(env, 2000, seed).unwrap();
            let test_data = make_dataset(env, 1000, seed + 1000).unwrap();
            let cfg = TrainerConfig {
                steps: 500,
                batch_size: 16,
                group_size: 16,
                learning_rate: 0.1,
                optimizer: OptimizerKind::Adam,
                filter: SampleFilter::Partial,
                estimator: EstimatorConfig {
                    kind,
                    beta: 0.01,
                    lambda: 1.0,
                    jepo_raw_weights: false,
                },
                reward: RewardConfig {
                    lambda: 1.0,
                    kind: if kind == EstimatorKind::StandardRl {
                        RewardKind::Binary
                    } else {
                        RewardKind::Real
                    },
                },
                policy,
                seed,
            };
            let out = train_run(&cfg, &train_data, None).unwrap();
            let eval = evaluate_dataset(
                &out.checkpoint.params,
                &policy,
                &test_data,
                InferMode::Rail,
                1,
                seed,
            )
            .unwrap();
            for (s, v) in sums.iter_mut().zip([
                eval.report.r,
                eval.report.rho,
                eval.report.tau,
                eval.report.rmse,
                eval.report.mae,
            ]) {
                *s += v;
            }
        }
        let k = seeds.len() as f64;
        println!(
            "{:<18} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            format!("{kind:?}"),
            sums[0] / k,
            sums[1] / k,
            sums[2] / k,
            sums[3] / k,
            sums[4] / k
        );
    }
}
