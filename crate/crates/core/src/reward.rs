//! Reward functions over sampled trajectories.
//!
//! The regression-aware reward scores a trajectory by the squared gap between
//! the expected-digit prediction and the gold score, plus a weighted
//! log-likelihood of the gold token — so it moves with the policy parameters.
//! The binary reward is plain token-match accuracy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::Group;
use crate::policy::VocabLayout;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    Real,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    /// Log-likelihood weight on the gold score token.
    pub lambda: f64,
    pub kind: RewardKind,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            lambda: 1.0,
            kind: RewardKind::Real,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::Config(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// Regression-aware reward: `-(y_hat - y*)^2 + lambda * log pi(y* | x, c)`.
pub fn real_reward(y_hat: f64, logp_gold: f64, gold: i64, lambda: f64) -> f64 {
    let d = y_hat - gold as f64;
    -d * d + lambda * logp_gold
}

/// 1 if the sampled score token is the digit token of the gold score.
pub fn binary_reward(score_token: usize, gold: i64) -> f64 {
    if VocabLayout::is_digit(score_token) && score_token as i64 == gold {
        1.0
    } else {
        0.0
    }
}

/// Fraction of a group's trajectories whose score token matches the gold.
pub fn group_accuracy(group: &Group, gold: i64) -> f64 {
    accuracy_of_tokens(
        group.trajectories.iter().map(|t| t.score_token),
        gold,
        group.trajectories.len(),
    )
}

pub fn accuracy_of_tokens(tokens: impl Iterator<Item = usize>, gold: i64, k: usize) -> f64 {
    debug_assert!(k >= 1);
    tokens.map(|t| binary_reward(t, gold)).sum::<f64>() / k as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_reward_examples() {
        assert_eq!(real_reward(5.0, -0.1, 5, 0.0), 0.0);
        assert_eq!(real_reward(3.0, -0.1, 5, 0.0), -4.0);
        let r = real_reward(3.7, 0.7f64.ln(), 5, 1.0);
        assert!((r - (-2.046674943938732)).abs() < 1e-12);
    }

    #[test]
    fn real_reward_nonpositive_and_ordinal() {
        for (y_hat, logp) in [(0.0, -3.0), (4.5, -0.01), (9.0, -0.7)] {
            assert!(real_reward(y_hat, logp, 3, 1.0) <= 0.0);
        }
        // Strictly decreasing in |y_hat - y*| at fixed log-likelihood.
        let logp = -0.3;
        let mut last = f64::INFINITY;
        for gap in [0.0, 0.5, 1.0, 2.5, 4.0] {
            let r = real_reward(3.0 + gap, logp, 3, 1.0);
            assert!(r < last);
            last = r;
        }
    }

    #[test]
    fn binary_reward_examples() {
        assert_eq!(binary_reward(5, 5), 1.0);
        assert_eq!(binary_reward(4, 5), 0.0);
        // Reasoning tokens never match a gold score.
        assert_eq!(binary_reward(11, 5), 0.0);
        assert_eq!(binary_reward(11, 11), 0.0);
    }

    #[test]
    fn accuracy_examples() {
        let flags = [5usize, 2, 5, 2];
        assert_eq!(accuracy_of_tokens(flags.iter().copied(), 5, 4), 0.5);
        assert_eq!(accuracy_of_tokens(std::iter::repeat_n(4, 8), 4, 8), 1.0);
        let one_hit = [5usize, 0, 0, 0, 0, 0, 0, 0];
        assert_eq!(accuracy_of_tokens(one_hit.iter().copied(), 5, 8), 0.125);
    }
}
