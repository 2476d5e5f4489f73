//! Run configuration: a single JSON document covering the environment, policy,
//! training, estimator, reward and inference settings, plus paths and seeds.
//!
//! Unknown keys are rejected, every default is recorded on emission, and
//! dotted-path overrides (`--train.steps=100`) are applied to the JSON tree
//! before deserialization so runs stay self-describing.

use serde::{Deserialize, Serialize};

use crate::env::{EnvConfig, PROMPT_DIM};
use crate::error::{Error, Result};
use crate::estimator::{EstimatorConfig, EstimatorKind};
use crate::infer::InferMode;
use crate::metrics::TauVariant;
use crate::policy::{PolicyConfig, VocabLayout};
use crate::reward::{RewardConfig, RewardKind};
use crate::trainer::{OptimizerKind, SampleFilter, TrainerConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicySection {
    pub vocab_size: usize,
    pub cot_length: usize,
    pub temperature: f64,
    pub rail_renormalize: bool,
}

impl Default for PolicySection {
    fn default() -> Self {
        PolicySection {
            vocab_size: 16,
            cot_length: 1,
            temperature: 1.0,
            rail_renormalize: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub steps: usize,
    pub batch_size: usize,
    pub group_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub filter: SampleFilter,
    /// Evaluate on the held-out split every this many steps and emit a
    /// correlation-curve row (0 disables the curve file).
    pub eval_every: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            steps: 500,
            batch_size: 16,
            group_size: 16,
            learning_rate: 0.1,
            optimizer: OptimizerKind::Adam,
            filter: SampleFilter::Partial,
            eval_every: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorSection {
    pub kind: EstimatorKind,
    pub beta: f64,
    pub jepo_raw_weights: bool,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        EstimatorSection {
            kind: EstimatorKind::Real,
            beta: 0.01,
            jepo_raw_weights: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferSection {
    pub mode: InferMode,
    pub n: usize,
    pub tau_variant: TauVariant,
}

impl Default for InferSection {
    fn default() -> Self {
        InferSection {
            mode: InferMode::Rail,
            n: 10,
            tau_variant: TauVariant::B,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub n_train: usize,
    pub n_test: usize,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            n_train: 2000,
            n_test: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedsSection {
    pub data_train: u64,
    pub data_test: u64,
    pub train: u64,
    pub eval: u64,
}

impl Default for SeedsSection {
    fn default() -> Self {
        SeedsSection {
            data_train: 1,
            data_test: 1001,
            train: 1,
            eval: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub train_data: String,
    pub test_data: String,
    pub out_dir: String,
    pub init_checkpoint: Option<String>,
}

impl Default for PathsSection {
    fn default() -> Self {
        PathsSection {
            train_data: "train.jsonl".to_string(),
            test_data: "test.jsonl".to_string(),
            out_dir: "out".to_string(),
            init_checkpoint: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub policy: PolicySection,
    pub train: TrainSection,
    pub estimator: EstimatorSection,
    pub reward: RewardConfig,
    pub infer: InferSection,
    pub data: DataSection,
    pub seeds: SeedsSection,
    pub paths: PathsSection,
}

impl RunConfig {
    /// Parse a JSON document, apply `--dotted.path=value` overrides, reject
    /// unknown keys, and validate.
    pub fn from_json(text: &str, overrides: &[String]) -> Result<RunConfig> {
        let mut value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON: {e}")))?;
        for item in overrides {
            apply_override(&mut value, item)?;
        }
        let config: RunConfig = serde_json::from_value(value)
            .map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.reward.validate()?;
        self.policy_config()?.validate()?;
        self.trainer_config()?.validate()?;
        if self.data.n_train == 0 || self.data.n_test == 0 {
            return Err(Error::Config("dataset sizes must be at least 1".into()));
        }
        if self.infer.n == 0 {
            return Err(Error::Config("infer.n must be at least 1".into()));
        }
        Ok(())
    }

    pub fn policy_config(&self) -> Result<PolicyConfig> {
        Ok(PolicyConfig {
            vocab: VocabLayout::new(self.policy.vocab_size)?,
            prompt_dim: PROMPT_DIM,
            cot_length: self.policy.cot_length,
            temperature: self.policy.temperature,
            rail_renormalize: self.policy.rail_renormalize,
        })
    }

    pub fn estimator_config(&self) -> EstimatorConfig {
        EstimatorConfig {
            kind: self.estimator.kind,
            beta: self.estimator.beta,
            lambda: self.reward.lambda,
            jepo_raw_weights: self.estimator.jepo_raw_weights,
        }
    }

    pub fn trainer_config(&self) -> Result<TrainerConfig> {
        Ok(TrainerConfig {
            steps: self.train.steps,
            batch_size: self.train.batch_size,
            group_size: self.train.group_size,
            learning_rate: self.train.learning_rate,
            optimizer: self.train.optimizer,
            filter: self.train.filter,
            estimator: self.estimator_config(),
            reward: self.reward,
            policy: self.policy_config()?,
            seed: self.seeds.train,
        })
    }

    /// Fully resolved config with every default made explicit.
    pub fn to_resolved_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// The reward kind each estimator requires; used to default-correct
    /// configs that only set the estimator kind.
    pub fn expected_reward_kind(&self) -> RewardKind {
        match self.estimator.kind {
            EstimatorKind::StandardRl => RewardKind::Binary,
            _ => RewardKind::Real,
        }
    }
}

/// Apply one `--path.to.key=value` override onto the JSON tree. The value is
/// parsed as JSON when possible, otherwise taken as a string.
fn apply_override(root: &mut serde_json::Value, item: &str) -> Result<()> {
    let stripped = item.strip_prefix("--").ok_or_else(|| {
        Error::Config(format!(
            "override must look like --key.path=value, got {item}"
        ))
    })?;
    let (path, raw_value) = stripped
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override missing '=': {item}")))?;
    if path.is_empty() {
        return Err(Error::Config(format!("override has an empty path: {item}")));
    }
    let value: serde_json::Value = match serde_json::from_str(raw_value) {
        Ok(v) => v,
        Err(_) => serde_json::Value::String(raw_value.to_string()),
    };
    let mut node = root;
    let segments: Vec<&str> = path.split('.').collect();
    for (i, seg) in segments.iter().enumerate() {
        if !node.is_object() {
            return Err(Error::Config(format!(
                "override path {path} crosses a non-object"
            )));
        }
        let map = node.as_object_mut().expect("checked object");
        if i + 1 == segments.len() {
            map.insert(seg.to_string(), value);
            return Ok(());
        }
        node = map
            .entry(seg.to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    unreachable!("loop returns on the last segment")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip_through_resolved_json() {
        let config = RunConfig::default();
        config.validate().unwrap();
        let text = config.to_resolved_json();
        let back = RunConfig::from_json(&text, &[]).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn empty_document_resolves_to_defaults() {
        let config = RunConfig::from_json("{}", &[]).unwrap();
        assert_eq!(config, RunConfig::default());
        assert_eq!(config.train.group_size, 16);
        assert_eq!(config.estimator.beta, 0.01);
        assert_eq!(config.reward.lambda, 1.0);
        assert_eq!(config.policy.temperature, 1.0);
        assert_eq!(config.train.filter, SampleFilter::Partial);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_json(r#"{"trian": {}}"#, &[]).is_err());
        assert!(RunConfig::from_json(r#"{"train": {"stepz": 3}}"#, &[]).is_err());
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let config = RunConfig::from_json(
            "{}",
            &[
                "--train.steps=42".to_string(),
                "--estimator.kind=\"raft\"".to_string(),
                "--env.sigma_x=0.25".to_string(),
            ],
        )
        .unwrap();
        assert_eq!(config.train.steps, 42);
        assert_eq!(config.estimator.kind, EstimatorKind::Raft);
        assert_eq!(config.env.sigma_x, 0.25);
    }

    #[test]
    fn bare_string_override_values_parse() {
        let config = RunConfig::from_json("{}", &["--estimator.kind=jepo".to_string()]).unwrap();
        assert_eq!(config.estimator.kind, EstimatorKind::Jepo);
    }

    #[test]
    fn malformed_overrides_error() {
        assert!(RunConfig::from_json("{}", &["train.steps=1".to_string()]).is_err());
        assert!(RunConfig::from_json("{}", &["--train.steps".to_string()]).is_err());
        assert!(RunConfig::from_json("{}", &["--oops.nope=1".to_string()]).is_err());
    }

    #[test]
    fn estimator_reward_kind_mismatch_is_a_config_error() {
        let res = RunConfig::from_json("{}", &["--estimator.kind=standard_rl".to_string()]);
        // standard_rl with the default (real) reward kind must be rejected.
        assert!(res.is_err());
        let res = RunConfig::from_json(
            "{}",
            &[
                "--estimator.kind=standard_rl".to_string(),
                "--reward.kind=binary".to_string(),
            ],
        );
        assert!(res.is_ok());
    }

    #[test]
    fn invalid_numbers_are_rejected() {
        for bad in [
            "--policy.temperature=0",
            "--policy.vocab_size=10",
            "--train.group_size=1",
            "--env.flip_prob=1.0",
            "--train.learning_rate=0",
        ] {
            assert!(
                RunConfig::from_json("{}", &[bad.to_string()]).is_err(),
                "{bad} should be rejected"
            );
        }
    }
}
