//! Evaluation metrics: Pearson r, Spearman rho, Kendall tau-b, RMSE, MAE, plus
//! token-entropy and response-length diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kendall variant. `B` applies tie corrections in both arguments and is the
/// default; `A` divides by the raw pair count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TauVariant {
    A,
    #[default]
    B,
}

/// One evaluation summary, serialized with these exact key names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub r: f64,
    pub rho: f64,
    pub tau: f64,
    pub rmse: f64,
    pub mae: f64,
    pub n: usize,
    pub mean_entropy: f64,
    pub mean_resp_len: f64,
}

impl MetricsReport {
    pub fn compute(
        preds: &[f64],
        golds: &[f64],
        mean_entropy: f64,
        mean_resp_len: f64,
    ) -> Result<Self> {
        Self::compute_with_tau(preds, golds, mean_entropy, mean_resp_len, TauVariant::B)
    }

    pub fn compute_with_tau(
        preds: &[f64],
        golds: &[f64],
        mean_entropy: f64,
        mean_resp_len: f64,
        tau: TauVariant,
    ) -> Result<Self> {
        let (rmse, mae) = error_metrics(preds, golds)?;
        Ok(MetricsReport {
            r: pearson(preds, golds)?,
            rho: spearman(preds, golds)?,
            tau: kendall_tau(preds, golds, tau)?,
            rmse,
            mae,
            n: preds.len(),
            mean_entropy,
            mean_resp_len,
        })
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics report serializes")
    }
}

fn check_paired(x: &[f64], y: &[f64], min_len: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Degenerate(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < min_len {
        return Err(Error::Degenerate(format!(
            "need at least {min_len} samples, got {}",
            x.len()
        )));
    }
    Ok(())
}

/// Sample Pearson correlation coefficient. Errors on zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_paired(x, y, 2)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(Error::Degenerate(
            "zero variance in correlation input".into(),
        ));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Average ranks (1-based), ties receive the mean of their rank span.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation: Pearson on average-ranked data.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_paired(x, y, 2)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<f64> {
    kendall_tau(x, y, TauVariant::B)
}

/// Kendall rank correlation by sorting plus merge-based swap counting.
///
/// With `n0 = n(n-1)/2`, `tx`/`ty` the tied-pair counts in each argument and
/// `txy` the pairs tied in both, `C - D = n0 - tx - ty + txy - 2*swaps`.
pub fn kendall_tau(x: &[f64], y: &[f64], variant: TauVariant) -> Result<f64> {
    check_paired(x, y, 2)?;
    let n = x.len();
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let tie_pairs = |run: usize| (run * (run - 1) / 2) as f64;

    let (mut tx, mut txy) = (0.0, 0.0);
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && pairs[j + 1].0 == pairs[i].0 {
            j += 1;
        }
        tx += tie_pairs(j - i + 1);
        // xy ties inside this x-run.
        let mut k = i;
        while k <= j {
            let mut m = k;
            while m < j && pairs[m + 1].1 == pairs[k].1 {
                m += 1;
            }
            txy += tie_pairs(m - k + 1);
            k = m + 1;
        }
        i = j + 1;
    }

    let swaps = merge_count_swaps(&mut pairs);

    let mut ty = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && pairs[j + 1].1 == pairs[i].1 {
            j += 1;
        }
        ty += tie_pairs(j - i + 1);
        i = j + 1;
    }

    let n0 = (n * (n - 1) / 2) as f64;
    if tx >= n0 || ty >= n0 {
        return Err(Error::Degenerate("fully tied vector in kendall tau".into()));
    }
    let c_minus_d = n0 - tx - ty + txy - 2.0 * swaps;
    let tau = match variant {
        TauVariant::B => c_minus_d / ((n0 - tx) * (n0 - ty)).sqrt(),
        TauVariant::A => c_minus_d / n0,
    };
    Ok(tau.clamp(-1.0, 1.0))
}

/// Bottom-up merge sort by the second component, counting the swaps needed —
/// each swap is one discordant pair. Equal elements keep left-run priority so
/// ties are not counted.
fn merge_count_swaps(pairs: &mut [(f64, f64)]) -> f64 {
    let n = pairs.len();
    let mut swaps = 0.0;
    let mut buf: Vec<(f64, f64)> = vec![(0.0, 0.0); n];
    let mut width = 1;
    while width < n {
        let mut start = 0;
        while start < n {
            let mid = (start + width).min(n);
            let end = (start + 2 * width).min(n);
            let (mut l, mut r) = (start, mid);
            let mut out = start;
            while l < mid || r < end {
                if l < mid && (r >= end || pairs[l].1 <= pairs[r].1) {
                    buf[out] = pairs[l];
                    l += 1;
                } else {
                    swaps += (mid - l) as f64;
                    buf[out] = pairs[r];
                    r += 1;
                }
                out += 1;
            }
            start = end;
        }
        pairs[..n].copy_from_slice(&buf[..n]);
        width *= 2;
    }
    swaps
}

/// Root-mean-square error and mean absolute error.
pub fn error_metrics(preds: &[f64], golds: &[f64]) -> Result<(f64, f64)> {
    check_paired(preds, golds, 1)?;
    let n = preds.len() as f64;
    let (mut se, mut ae) = (0.0, 0.0);
    for (p, g) in preds.iter().zip(golds) {
        let d = p - g;
        se += d * d;
        ae += d.abs();
    }
    Ok(((se / n).sqrt(), ae / n))
}

/// Shannon entropy of a probability vector in nats, with `0 ln 0 = 0`.
pub fn token_entropy(dist: &[f64]) -> f64 {
    dist.iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum()
}
