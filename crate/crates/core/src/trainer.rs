//! Training loop: batch sampling, K-way generation, dynamic-sampling filters,
//! gradient accumulation, parameter updates, checkpointing and per-step
//! diagnostics.
//!
//! A full run is a pure function of `(config, dataset)`: every stochastic step
//! draws from a stream derived from the run seed and fixed indices, and
//! accumulation happens in ascending `(prompt, sample)` order, so logs and
//! checkpoints are byte-identical across reruns and worker counts.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::{JudgeDataset, JudgeExample};
use crate::error::{Error, Result};
use crate::estimator::{self, EstimatorConfig, Group};
use crate::parallel;
use crate::policy::{self, PolicyConfig, Trajectory};
use crate::reward::{self, RewardConfig, RewardKind};
use crate::rng::{streams, Rng};

/// Checkpoint file magic.
pub const CHECKPOINT_MAGIC: &[u8; 8] = b"REALPG1\n";

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// Group filter by token-match accuracy, applied before the gradient step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleFilter {
    /// Keep every group.
    All,
    /// Keep `0 < acc < 1`: only partially correct prompts.
    Partial,
    /// Keep `0 < acc <= 1`.
    ExcludeAllWrong,
    /// Keep `0 <= acc < 1`.
    ExcludeAllRight,
}

impl SampleFilter {
    pub fn keeps(&self, acc: f64) -> bool {
        match self {
            SampleFilter::All => true,
            SampleFilter::Partial => acc > 0.0 && acc < 1.0,
            SampleFilter::ExcludeAllWrong => acc > 0.0,
            SampleFilter::ExcludeAllRight => acc < 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub group_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub filter: SampleFilter,
    pub estimator: EstimatorConfig,
    pub reward: RewardConfig,
    pub policy: PolicyConfig,
    pub seed: u64,
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        self.policy.validate()?;
        self.estimator.validate()?;
        self.reward.validate()?;
        if self.group_size < 2 {
            return Err(Error::Config(format!(
                "group_size must be at least 2, got {}",
                self.group_size
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        let expected_reward = match self.estimator.kind {
            estimator::EstimatorKind::StandardRl => RewardKind::Binary,
            _ => RewardKind::Real,
        };
        if self.reward.kind != expected_reward {
            return Err(Error::Config(format!(
                "estimator {:?} requires reward kind {:?}",
                self.estimator.kind, expected_reward
            )));
        }
        Ok(())
    }
}

/// Optimizer state. The moment vectors are empty for SGD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, param_len: usize) -> Self {
        match kind {
            OptimizerKind::Sgd => OptimizerState {
                kind,
                t: 0,
                m: Vec::new(),
                v: Vec::new(),
            },
            OptimizerKind::Adam => OptimizerState {
                kind,
                t: 0,
                m: vec![0.0; param_len],
                v: vec![0.0; param_len],
            },
        }
    }
}

/// One update step: returns the delta to add to the parameters.
pub fn optimizer_update(state: &mut OptimizerState, grad: &[f64], eta: f64) -> Vec<f64> {
    match state.kind {
        OptimizerKind::Sgd => grad.iter().map(|g| eta * g).collect(),
        OptimizerKind::Adam => {
            state.t += 1;
            let bc1 = 1.0 - ADAM_BETA1.powi(state.t as i32);
            let bc2 = 1.0 - ADAM_BETA2.powi(state.t as i32);
            grad.iter()
                .enumerate()
                .map(|(i, &g)| {
                    state.m[i] = ADAM_BETA1 * state.m[i] + (1.0 - ADAM_BETA1) * g;
                    state.v[i] = ADAM_BETA2 * state.v[i] + (1.0 - ADAM_BETA2) * g * g;
                    let m_hat = state.m[i] / bc1;
                    let v_hat = state.v[i] / bc2;
                    eta * m_hat / (v_hat.sqrt() + ADAM_EPS)
                })
                .collect()
        }
    }
}

/// Per-step diagnostics, one CSV row per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub mean_reward: f64,
    pub mean_acc: f64,
    pub kept_frac: f64,
    pub grad_norm: f64,
    pub entropy: f64,
    pub resp_len: f64,
}

impl StepLog {
    pub fn csv_header() -> &'static str {
        "step,mean_reward,mean_acc,kept_frac,grad_norm,entropy,resp_len"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.step,
            self.mean_reward,
            self.mean_acc,
            self.kept_frac,
            self.grad_norm,
            self.entropy,
            self.resp_len
        )
    }
}

pub fn logs_to_csv(logs: &[StepLog]) -> String {
    let mut out = String::from(StepLog::csv_header());
    out.push('\n');
    for log in logs {
        out.push_str(&log.csv_row());
        out.push('\n');
    }
    out
}

/// Serializable training state: parameters plus optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub policy: PolicyConfig,
    pub optimizer: OptimizerState,
    pub step: u64,
    pub params: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    policy: PolicyConfig,
    optimizer_kind: OptimizerKind,
    optimizer_t: u64,
    step: u64,
    param_len: usize,
}

fn write_f64s(w: &mut impl Write, values: &[f64]) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Checkpoint("truncated checkpoint file".into()))?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

pub fn write_checkpoint(ckpt: &Checkpoint, mut w: impl Write) -> Result<()> {
    if ckpt.params.len() != ckpt.policy.param_len() {
        return Err(Error::Checkpoint(format!(
            "parameter length {} does not match policy layout {}",
            ckpt.params.len(),
            ckpt.policy.param_len()
        )));
    }
    w.write_all(CHECKPOINT_MAGIC)?;
    let header = CheckpointHeader {
        policy: ckpt.policy,
        optimizer_kind: ckpt.optimizer.kind,
        optimizer_t: ckpt.optimizer.t,
        step: ckpt.step,
        param_len: ckpt.params.len(),
    };
    let header_bytes = serde_json::to_vec(&header).expect("header serializes");
    w.write_all(&(header_bytes.len() as u32).to_le_bytes())?;
    w.write_all(&header_bytes)?;
    write_f64s(&mut w, &ckpt.params)?;
    if ckpt.optimizer.kind == OptimizerKind::Adam {
        write_f64s(&mut w, &ckpt.optimizer.m)?;
        write_f64s(&mut w, &ckpt.optimizer.v)?;
    }
    Ok(())
}

pub fn read_checkpoint(mut r: impl Read) -> Result<Checkpoint> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Checkpoint("truncated checkpoint file".into()))?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint(
            "bad magic: not a checkpoint or wrong version".into(),
        ));
    }
    let mut len_bytes = [0u8; 4];
    r.read_exact(&mut len_bytes)
        .map_err(|_| Error::Checkpoint("truncated checkpoint file".into()))?;
    let header_len = u32::from_le_bytes(len_bytes) as usize;
    let mut header_bytes = vec![0u8; header_len];
    r.read_exact(&mut header_bytes)
        .map_err(|_| Error::Checkpoint("truncated checkpoint file".into()))?;
    let header: CheckpointHeader = serde_json::from_slice(&header_bytes)
        .map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
    header.policy.validate()?;
    if header.param_len != header.policy.param_len() {
        return Err(Error::Checkpoint(format!(
            "header param_len {} does not match policy layout {}",
            header.param_len,
            header.policy.param_len()
        )));
    }
    let params = read_f64s(&mut r, header.param_len)?;
    let mut optimizer = OptimizerState::new(header.optimizer_kind, header.param_len);
    optimizer.t = header.optimizer_t;
    if header.optimizer_kind == OptimizerKind::Adam {
        optimizer.m = read_f64s(&mut r, header.param_len)?;
        optimizer.v = read_f64s(&mut r, header.param_len)?;
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Checkpoint(
            "trailing bytes after checkpoint payload".into(),
        ));
    }
    Ok(Checkpoint {
        policy: header.policy,
        optimizer,
        step: header.step,
        params,
    })
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_checkpoint(ckpt, std::io::BufWriter::new(file))
}

/// Load a checkpoint, optionally demanding a specific policy shape.
pub fn load_checkpoint(
    path: impl AsRef<Path>,
    expected: Option<&PolicyConfig>,
) -> Result<Checkpoint> {
    let file = std::fs::File::open(path)?;
    let ckpt = read_checkpoint(std::io::BufReader::new(file))?;
    if let Some(cfg) = expected {
        if *cfg != ckpt.policy {
            return Err(Error::Checkpoint(format!(
                "checkpoint policy {:?} does not match expected {:?}",
                ckpt.policy, cfg
            )));
        }
    }
    Ok(ckpt)
}

pub struct TrainOutput {
    pub checkpoint: Checkpoint,
    pub logs: Vec<StepLog>,
}

struct GroupOutcome {
    group: Group,
    accuracy: f64,
    kept: bool,
}

fn sample_groups(
    params: &[f64],
    batch: &[(usize, &JudgeExample)],
    cfg: &TrainerConfig,
    step: usize,
) -> Result<Vec<GroupOutcome>> {
    let k = cfg.group_size;
    let base = Rng::seeded(cfg.seed);
    let flat: Vec<Result<Trajectory>> = parallel::par_map(batch.len() * k, |i| {
        let (prompt_idx, example) = batch[i / k];
        let mut rng = base.derive(&[
            streams::SAMPLE,
            step as u64,
            prompt_idx as u64,
            (i % k) as u64,
        ]);
        policy::sample_trajectory(params, &cfg.policy, prompt_idx, &example.features, &mut rng)
    });
    let mut trajectories = Vec::with_capacity(flat.len());
    for t in flat {
        trajectories.push(t?);
    }
    let mut outcomes = Vec::with_capacity(batch.len());
    for (b, &(prompt_idx, example)) in batch.iter().enumerate() {
        let trajs: Vec<Trajectory> = trajectories[b * k..(b + 1) * k].to_vec();
        let rewards: Vec<f64> = trajs
            .iter()
            .map(|t| {
                estimator::trajectory_reward(
                    cfg.estimator.kind,
                    t,
                    example,
                    &cfg.policy,
                    cfg.reward.lambda,
                )
            })
            .collect();
        if rewards.iter().any(|r| !r.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite reward at step {step}, prompt {prompt_idx}"
            )));
        }
        let group = Group::new(prompt_idx, trajs, rewards)?;
        let accuracy = reward::group_accuracy(&group, example.gold);
        let kept = cfg.filter.keeps(accuracy);
        outcomes.push(GroupOutcome {
            group,
            accuracy,
            kept,
        });
    }
    Ok(outcomes)
}

/// One training step over a batch of prompts.
///
/// Groups failing the accuracy filter contribute nothing; if no group
/// survives, parameters and optimizer state are left untouched.
pub fn train_step(
    params: &mut [f64],
    opt: &mut OptimizerState,
    batch: &[(usize, &JudgeExample)],
    cfg: &TrainerConfig,
    step: usize,
) -> Result<StepLog> {
    let outcomes = sample_groups(params, batch, cfg, step)?;

    let total_trajs = (batch.len() * cfg.group_size) as f64;
    let mean_reward = outcomes
        .iter()
        .flat_map(|o| o.group.rewards.iter())
        .sum::<f64>()
        / total_trajs;
    let mean_acc = outcomes.iter().map(|o| o.accuracy).sum::<f64>() / batch.len() as f64;
    let entropy = outcomes
        .iter()
        .flat_map(|o| o.group.trajectories.iter())
        .map(|t| t.mean_entropy)
        .sum::<f64>()
        / total_trajs;

    let kept: Vec<usize> = outcomes
        .iter()
        .enumerate()
        .filter(|(_, o)| o.kept)
        .map(|(i, _)| i)
        .collect();
    let kept_frac = kept.len() as f64 / batch.len() as f64;

    let mut grad_norm = 0.0;
    if !kept.is_empty() {
        let grads: Vec<Result<Vec<f64>>> = parallel::par_map(kept.len(), |j| {
            let o = &outcomes[kept[j]];
            let example = batch
                .iter()
                .find(|(idx, _)| *idx == o.group.prompt_idx)
                .expect("kept group's prompt is in the batch")
                .1;
            estimator::gradient_for(&cfg.estimator, &o.group, params, &cfg.policy, example)
        });
        let mut mean_grad = vec![0.0; params.len()];
        for g in grads {
            let g = g?;
            for (acc, gi) in mean_grad.iter_mut().zip(&g) {
                *acc += gi;
            }
        }
        let scale = 1.0 / kept.len() as f64;
        for g in &mut mean_grad {
            *g *= scale;
        }
        grad_norm = mean_grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !grad_norm.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite gradient at step {step}: |params| = {:.3e}, kept groups = {}",
                params.iter().map(|p| p * p).sum::<f64>().sqrt(),
                kept.len()
            )));
        }
        let delta = optimizer_update(opt, &mean_grad, cfg.learning_rate);
        for (p, d) in params.iter_mut().zip(&delta) {
            *p += d;
        }
    }

    Ok(StepLog {
        step,
        mean_reward,
        mean_acc,
        kept_frac,
        grad_norm,
        entropy,
        resp_len: (cfg.policy.cot_length + 1) as f64,
    })
}

/// Run the full loop: shuffled round-robin minibatches, one log row per step,
/// final checkpoint.
pub fn train_run(
    cfg: &TrainerConfig,
    dataset: &JudgeDataset,
    init: Option<&Checkpoint>,
) -> Result<TrainOutput> {
    train_run_with_probe(cfg, dataset, init, 0, |_, _| Ok(()))
}

/// `train_run` with a probe called on the initial parameters and after every
/// `probe_every`-th step (0 disables probing). The probe only observes the
/// parameters, so determinism is unaffected.
pub fn train_run_with_probe<F>(
    cfg: &TrainerConfig,
    dataset: &JudgeDataset,
    init: Option<&Checkpoint>,
    probe_every: usize,
    mut probe: F,
) -> Result<TrainOutput>
where
    F: FnMut(usize, &[f64]) -> Result<()>,
{
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::Config("training dataset is empty".into()));
    }
    let mut params = match init {
        Some(ckpt) => {
            if ckpt.policy != cfg.policy {
                return Err(Error::Checkpoint(
                    "init checkpoint policy does not match run config".into(),
                ));
            }
            ckpt.params.clone()
        }
        None => policy::init_policy(&cfg.policy, cfg.seed),
    };
    let mut opt = OptimizerState::new(cfg.optimizer, params.len());

    let n = dataset.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut shuffle_rng = Rng::seeded(cfg.seed).derive(&[streams::SHUFFLE]);
    for i in (1..n).rev() {
        let j = shuffle_rng.next_below(i as u64 + 1) as usize;
        order.swap(i, j);
    }

    if probe_every > 0 {
        probe(0, &params)?;
    }
    let mut logs = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let batch: Vec<(usize, &JudgeExample)> = (0..cfg.batch_size)
            .map(|b| {
                let idx = order[(step * cfg.batch_size + b) % n];
                (idx, &dataset.examples[idx])
            })
            .collect();
        logs.push(train_step(&mut params, &mut opt, &batch, cfg, step)?);
        if probe_every > 0 && ((step + 1) % probe_every == 0 || step + 1 == cfg.steps) {
            probe(step + 1, &params)?;
        }
    }

    Ok(TrainOutput {
        checkpoint: Checkpoint {
            policy: cfg.policy,
            optimizer: opt,
            step: cfg.steps as u64,
            params,
        },
        logs,
    })
}
