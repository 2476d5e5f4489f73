//! Inference-time predictors: expected-digit sampling, greedy decoding, and
//! average-of-N aggregation.

use serde::{Deserialize, Serialize};

use crate::env::JudgeDataset;
use crate::error::{Error, Result};
use crate::metrics::{token_entropy, MetricsReport, TauVariant};
use crate::parallel;
use crate::policy::{self, PolicyConfig, PositionKind, DIGIT_COUNT};
use crate::rng::{streams, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InferMode {
    Rail,
    Greedy,
    RailAvgN,
}

impl InferMode {
    pub fn label(&self) -> &'static str {
        match self {
            InferMode::Rail => "rail",
            InferMode::Greedy => "greedy",
            InferMode::RailAvgN => "rail_avg_n",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub prompt_idx: usize,
    pub value: f64,
    pub mode: InferMode,
}

/// Sample one reasoning chain and return the expected-digit value of the
/// score distribution.
pub fn rail_predict(
    params: &[f64],
    cfg: &PolicyConfig,
    prompt_idx: usize,
    prompt: &[f64],
    rng: &mut Rng,
) -> Result<Prediction> {
    let traj = policy::sample_trajectory(params, cfg, prompt_idx, prompt, rng)?;
    Ok(Prediction {
        prompt_idx,
        value: policy::rail_value_from_dist(cfg, &traj.score_dist),
        mode: InferMode::Rail,
    })
}

/// Greedy decode: per-step argmax over reasoning tokens (ties to the lowest
/// token id), then argmax over the digit block at the score position.
pub fn greedy_predict(
    params: &[f64],
    cfg: &PolicyConfig,
    prompt_idx: usize,
    prompt: &[f64],
) -> Result<Prediction> {
    let mut cot = Vec::with_capacity(cfg.cot_length);
    let mut prev = None;
    for pos in 0..cfg.cot_length {
        let features = policy::context_features(cfg, prompt, prev, pos);
        let dist = policy::token_dist(params, cfg, &features, PositionKind::Cot)?;
        let token = argmax_lowest_id(&dist, cfg.vocab.cot_tokens());
        cot.push(token);
        prev = Some(token);
    }
    let dist = policy::score_dist(params, cfg, prompt, &cot)?;
    let digit = argmax_lowest_id(&dist, 0..DIGIT_COUNT);
    Ok(Prediction {
        prompt_idx,
        value: digit as f64,
        mode: InferMode::Greedy,
    })
}

fn argmax_lowest_id(dist: &[f64], range: std::ops::Range<usize>) -> usize {
    let mut best = range.start;
    for j in range {
        if dist[j] > dist[best] {
            best = j;
        }
    }
    best
}

/// Arithmetic mean of `n` independent expected-digit predictions, with the
/// i-th constituent drawn from the stream `base.derive([prompt_idx, i])`.
pub fn average_of_n(
    params: &[f64],
    cfg: &PolicyConfig,
    prompt_idx: usize,
    prompt: &[f64],
    n: usize,
    base: &Rng,
) -> Result<Prediction> {
    if n == 0 {
        return Err(Error::Config("average-of-n needs n >= 1".into()));
    }
    let mut sum = 0.0;
    for i in 0..n {
        let mut rng = base.derive(&[prompt_idx as u64, i as u64]);
        sum += rail_predict(params, cfg, prompt_idx, prompt, &mut rng)?.value;
    }
    Ok(Prediction {
        prompt_idx,
        value: sum / n as f64,
        mode: InferMode::RailAvgN,
    })
}

pub struct EvalOutcome {
    pub predictions: Vec<Prediction>,
    pub report: MetricsReport,
}

/// Predict every example in the dataset and compute the metrics report.
pub fn evaluate_dataset(
    params: &[f64],
    cfg: &PolicyConfig,
    dataset: &JudgeDataset,
    mode: InferMode,
    n: usize,
    seed: u64,
) -> Result<EvalOutcome> {
    evaluate_dataset_with_tau(params, cfg, dataset, mode, n, seed, TauVariant::B)
}

pub fn evaluate_dataset_with_tau(
    params: &[f64],
    cfg: &PolicyConfig,
    dataset: &JudgeDataset,
    mode: InferMode,
    n: usize,
    seed: u64,
    tau: TauVariant,
) -> Result<EvalOutcome> {
    let base = Rng::seeded(seed).derive(&[streams::EVAL]);
    let results: Vec<Result<(Prediction, f64)>> = parallel::par_map(dataset.len(), |i| {
        let ex = &dataset.examples[i];
        match mode {
            InferMode::Rail => {
                let mut rng = base.derive(&[i as u64, 0]);
                let traj = policy::sample_trajectory(params, cfg, i, &ex.features, &mut rng)?;
                let pred = Prediction {
                    prompt_idx: i,
                    value: policy::rail_value_from_dist(cfg, &traj.score_dist),
                    mode,
                };
                Ok((pred, traj.mean_entropy))
            }
            InferMode::Greedy => {
                let pred = greedy_predict(params, cfg, i, &ex.features)?;
                Ok((pred, greedy_path_entropy(params, cfg, &ex.features)?))
            }
            InferMode::RailAvgN => {
                let pred = average_of_n(params, cfg, i, &ex.features, n, &base)?;
                let mut entropy = 0.0;
                for j in 0..n {
                    let mut rng = base.derive(&[i as u64, j as u64]);
                    let traj = policy::sample_trajectory(params, cfg, i, &ex.features, &mut rng)?;
                    entropy += traj.mean_entropy;
                }
                Ok((pred, entropy / n as f64))
            }
        }
    });
    let mut predictions = Vec::with_capacity(dataset.len());
    let mut entropy_sum = 0.0;
    for r in results {
        let (pred, entropy) = r?;
        entropy_sum += entropy;
        predictions.push(pred);
    }
    let preds: Vec<f64> = predictions.iter().map(|p| p.value).collect();
    let golds = dataset.golds();
    let report = MetricsReport::compute_with_tau(
        &preds,
        &golds,
        entropy_sum / dataset.len() as f64,
        (cfg.cot_length + 1) as f64,
        tau,
    )?;
    Ok(EvalOutcome {
        predictions,
        report,
    })
}

/// Mean per-token entropy of the distributions visited by greedy decoding.
fn greedy_path_entropy(params: &[f64], cfg: &PolicyConfig, prompt: &[f64]) -> Result<f64> {
    let mut cot = Vec::with_capacity(cfg.cot_length);
    let mut prev = None;
    let mut total = 0.0;
    for pos in 0..cfg.cot_length {
        let features = policy::context_features(cfg, prompt, prev, pos);
        let dist = policy::token_dist(params, cfg, &features, PositionKind::Cot)?;
        total += token_entropy(&dist);
        let token = argmax_lowest_id(&dist, cfg.vocab.cot_tokens());
        cot.push(token);
        prev = Some(token);
    }
    let dist = policy::score_dist(params, cfg, prompt, &cot)?;
    total += token_entropy(&dist);
    Ok(total / (cfg.cot_length + 1) as f64)
}

/// Predictions CSV: `prompt_idx,pred,gold,mode`.
pub fn predictions_csv(predictions: &[Prediction], golds: &[f64]) -> String {
    let mut out = String::from("prompt_idx,pred,gold,mode\n");
    for (p, g) in predictions.iter().zip(golds) {
        out.push_str(&format!(
            "{},{},{},{}\n",
            p.prompt_idx,
            p.value,
            g,
            p.mode.label()
        ));
    }
    out
}
