//! Synthetic pointwise-judging environment.
//!
//! Each example has a latent quality `q` uniform over `1..=5`, prompt features
//! `alpha * onehot5(q) + N(0, sigma_x^2)` per coordinate, and a gold score
//! `y* = clamp(q + delta, 1, 5)` with `delta in {-1, 0, +1}` drawn with
//! probabilities `(p/2, 1-p, p/2)`. The gold score depends on the reasoning
//! chain only through the prompt, and the Bayes posterior mean is available in
//! closed form, so predictors can be verified against the exact optimum.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{streams, Rng};

pub const SCORE_MIN: i64 = 1;
pub const SCORE_MAX: i64 = 5;
/// Prompt feature dimension (one coordinate per score level).
pub const PROMPT_DIM: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    /// Signal scale on the one-hot center.
    pub alpha: f64,
    /// Per-coordinate Gaussian feature noise.
    pub sigma_x: f64,
    /// Probability that the gold label flips one step off the latent quality.
    pub flip_prob: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            alpha: 1.0,
            sigma_x: 0.65,
            flip_prob: 0.2,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.sigma_x.is_finite() || self.sigma_x < 0.0 {
            return Err(Error::Config(format!(
                "sigma_x must be >= 0, got {}",
                self.sigma_x
            )));
        }
        if !(0.0..1.0).contains(&self.flip_prob) {
            return Err(Error::Config(format!(
                "flip_prob must be in [0, 1), got {}",
                self.flip_prob
            )));
        }
        if !self.alpha.is_finite() {
            return Err(Error::Config("alpha must be finite".into()));
        }
        Ok(())
    }
}

/// One (prompt features, gold score) example. The latent quality is retained
/// for oracle queries only; the training loop never reads it.
#[derive(Debug, Clone, PartialEq)]
pub struct JudgeExample {
    pub features: Vec<f64>,
    pub gold: i64,
    pub quality: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JudgeDataset {
    pub config: EnvConfig,
    pub seed: u64,
    pub examples: Vec<JudgeExample>,
}

impl JudgeDataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn golds(&self) -> Vec<f64> {
        self.examples.iter().map(|e| e.gold as f64).collect()
    }
}

fn clamp_score(v: i64) -> i64 {
    v.clamp(SCORE_MIN, SCORE_MAX)
}

/// Deterministic dataset generation from `(config, n, seed)`.
pub fn make_dataset(config: EnvConfig, n: usize, seed: u64) -> Result<JudgeDataset> {
    config.validate()?;
    if n == 0 {
        return Err(Error::Config("dataset size must be at least 1".into()));
    }
    let mut rng = Rng::seeded(seed).derive(&[streams::DATA]);
    let mut examples = Vec::with_capacity(n);
    for _ in 0..n {
        let quality = SCORE_MIN + rng.next_below(5) as i64;
        let mut features = vec![0.0; PROMPT_DIM];
        for (i, f) in features.iter_mut().enumerate() {
            let center = if i as i64 == quality - 1 {
                config.alpha
            } else {
                0.0
            };
            *f = center + config.sigma_x * rng.next_normal();
        }
        let u = rng.next_f64();
        let delta = if u < config.flip_prob / 2.0 {
            -1
        } else if u < config.flip_prob {
            1
        } else {
            0
        };
        let gold = clamp_score(quality + delta);
        examples.push(JudgeExample {
            features,
            gold,
            quality,
        });
    }
    Ok(JudgeDataset {
        config,
        seed,
        examples,
    })
}

/// `E[y* | q]` under the clamped flip kernel.
pub fn expected_gold_given_quality(config: &EnvConfig, quality: i64) -> f64 {
    let p = config.flip_prob;
    let branches = [(-1, p / 2.0), (0, 1.0 - p), (1, p / 2.0)];
    branches
        .iter()
        .map(|&(d, w)| w * clamp_score(quality + d) as f64)
        .sum()
}

/// Exact Bayes posterior mean `E[y* | f_x]`.
///
/// With `sigma_x = 0` the features must sit exactly on one of the centers
/// `alpha * onehot5(q)`; anywhere else the posterior is undefined.
pub fn posterior_mean(config: &EnvConfig, features: &[f64]) -> Result<f64> {
    config.validate()?;
    if features.len() != PROMPT_DIM {
        return Err(Error::Config(format!(
            "expected {PROMPT_DIM} prompt features, got {}",
            features.len()
        )));
    }
    if config.sigma_x == 0.0 {
        for q in SCORE_MIN..=SCORE_MAX {
            let onlattice = (0..PROMPT_DIM).all(|i| {
                let center = if i as i64 == q - 1 { config.alpha } else { 0.0 };
                features[i] == center
            });
            if onlattice {
                return Ok(expected_gold_given_quality(config, q));
            }
        }
        return Err(Error::Degenerate(
            "sigma_x = 0 with features off the center lattice: posterior undefined".into(),
        ));
    }
    let inv_two_var = 1.0 / (2.0 * config.sigma_x * config.sigma_x);
    let log_weights: Vec<f64> = (SCORE_MIN..=SCORE_MAX)
        .map(|q| {
            let d2: f64 = (0..PROMPT_DIM)
                .map(|i| {
                    let center = if i as i64 == q - 1 { config.alpha } else { 0.0 };
                    let d = features[i] - center;
                    d * d
                })
                .sum();
            -d2 * inv_two_var
        })
        .collect();
    let max = log_weights
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_weights.iter().map(|lw| (lw - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mean = (SCORE_MIN..=SCORE_MAX)
        .zip(&weights)
        .map(|(q, w)| w / total * expected_gold_given_quality(config, q))
        .sum();
    Ok(mean)
}

#[derive(Serialize, Deserialize)]
struct DatasetHeader {
    alpha: f64,
    sigma_x: f64,
    flip_prob: f64,
    seed: u64,
    n: usize,
}

#[derive(Serialize, Deserialize)]
struct Record {
    q: i64,
    y: i64,
    f: Vec<f64>,
}

/// Line-delimited dataset format: one header line with the generating config
/// and seed, then one record per example.
pub fn write_dataset(dataset: &JudgeDataset, mut w: impl Write) -> Result<()> {
    let header = DatasetHeader {
        alpha: dataset.config.alpha,
        sigma_x: dataset.config.sigma_x,
        flip_prob: dataset.config.flip_prob,
        seed: dataset.seed,
        n: dataset.examples.len(),
    };
    writeln!(
        w,
        "{}",
        serde_json::to_string(&header).expect("header serializes")
    )?;
    for ex in &dataset.examples {
        let record = Record {
            q: ex.quality,
            y: ex.gold,
            f: ex.features.clone(),
        };
        writeln!(
            w,
            "{}",
            serde_json::to_string(&record).expect("record serializes")
        )?;
    }
    Ok(())
}

pub fn read_dataset(r: impl BufRead) -> Result<JudgeDataset> {
    let mut lines = r.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::Dataset("empty dataset file".into()))??;
    let header: DatasetHeader = serde_json::from_str(&header_line)
        .map_err(|e| Error::Dataset(format!("bad header: {e}")))?;
    let config = EnvConfig {
        alpha: header.alpha,
        sigma_x: header.sigma_x,
        flip_prob: header.flip_prob,
    };
    let mut examples = Vec::with_capacity(header.n);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line)
            .map_err(|e| Error::Dataset(format!("bad record at line {}: {e}", i + 2)))?;
        if record.f.len() != PROMPT_DIM {
            return Err(Error::Dataset(format!(
                "record at line {} has {} features, expected {PROMPT_DIM}",
                i + 2,
                record.f.len()
            )));
        }
        examples.push(JudgeExample {
            features: record.f,
            gold: record.y,
            quality: record.q,
        });
    }
    if examples.len() != header.n {
        return Err(Error::Dataset(format!(
            "header says {} records, found {}",
            header.n,
            examples.len()
        )));
    }
    Ok(JudgeDataset {
        config,
        seed: header.seed,
        examples,
    })
}

pub fn save_dataset(dataset: &JudgeDataset, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_dataset(dataset, std::io::BufWriter::new(file))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<JudgeDataset> {
    let file = std::fs::File::open(path)?;
    read_dataset(std::io::BufReader::new(file))
}
