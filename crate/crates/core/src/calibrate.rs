//! Monotone score-to-probability calibration and calibration quality
//! measurement.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{logit, sigmoid};

#[derive(Debug, Error)]
pub enum CalibrateError {
    #[error("scores and labels differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("calibration requires both classes")]
    SingleClass,
    #[error("fit did not converge after {0} iterations")]
    NonConvergence(usize),
    #[error("near-degenerate fit rejected by the orientation guard (a = {a:.3e}, b = {b:.3})")]
    NearDegenerateFit { a: f64, b: f64 },
    #[error("empty input")]
    EmptyInput,
    #[error("bin count must be at least 1")]
    InvalidBinCount,
}

/// A fitted monotone score-to-probability transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CalibrationMap {
    /// `sigmoid(a * s + b)` with `a > 0`, strictly increasing.
    Platt { a: f64, b: f64 },
    /// Step function: the fitted value of the greatest breakpoint at or
    /// below the score, clamped to the first/last value outside the
    /// fitted range. Breakpoints strictly ascending, values
    /// non-decreasing in [0, 1].
    Isotonic { breakpoints: Vec<f64>, values: Vec<f64> },
}

impl CalibrationMap {
    pub fn apply_one(&self, score: f64) -> f64 {
        match self {
            CalibrationMap::Platt { a, b } => sigmoid(a * score + b),
            CalibrationMap::Isotonic { breakpoints, values } => {
                let idx = breakpoints.partition_point(|&b| b <= score);
                if idx == 0 {
                    values[0]
                } else {
                    values[idx - 1]
                }
            }
        }
    }

    pub fn apply(&self, scores: &[f64]) -> Vec<f64> {
        scores.iter().map(|&s| self.apply_one(s)).collect()
    }
}

fn check_two_classes(scores: &[f64], labels: &[u8]) -> Result<(), CalibrateError> {
    if scores.len() != labels.len() {
        return Err(CalibrateError::LengthMismatch(scores.len(), labels.len()));
    }
    if scores.is_empty() {
        return Err(CalibrateError::EmptyInput);
    }
    let positives = labels.iter().filter(|&&y| y == 1).count();
    if positives == 0 || positives == labels.len() {
        return Err(CalibrateError::SingleClass);
    }
    Ok(())
}

const PLATT_MAX_ITERS: usize = 200;

/// Fits `sigmoid(a * s + b)` by Newton iterations on the log-likelihood
/// with raw 0/1 targets. A fit whose slope is not positive carries no
/// orientation information and is rejected.
pub fn fit_platt(scores: &[f64], labels: &[u8]) -> Result<CalibrationMap, CalibrateError> {
    check_two_classes(scores, labels)?;
    let n = scores.len();
    let base_rate = labels.iter().filter(|&&y| y == 1).count() as f64 / n as f64;

    let nll = |a: f64, b: f64| -> f64 {
        scores
            .iter()
            .zip(labels)
            .map(|(&s, &y)| {
                let z = a * s + b;
                z.max(0.0) - z * (y as f64) + (1.0 + (-z.abs()).exp()).ln()
            })
            .sum()
    };

    let mut a = 0.0;
    let mut b = logit(base_rate);
    let mut converged = false;
    for _ in 0..PLATT_MAX_ITERS {
        let mut g_a = 0.0;
        let mut g_b = 0.0;
        let mut h_aa = 0.0;
        let mut h_ab = 0.0;
        let mut h_bb = 0.0;
        for (&s, &y) in scores.iter().zip(labels) {
            let p = sigmoid(a * s + b);
            let d = p - y as f64;
            let w = (p * (1.0 - p)).max(1e-12);
            g_a += d * s;
            g_b += d;
            h_aa += w * s * s;
            h_ab += w * s;
            h_bb += w;
        }
        let current = nll(a, b);
        // separable data drives the likelihood toward a perfect fit at
        // infinite slope; a negligible gradient or loss is convergence
        if g_a.abs().max(g_b.abs()) < 1e-8 * n as f64 || current < 1e-8 {
            converged = true;
            break;
        }

        // damped 2x2 Newton solve
        let mut damping = 0.0;
        let (da, db) = loop {
            let det = (h_aa + damping) * (h_bb + damping) - h_ab * h_ab;
            if det.abs() > 1e-12 * (h_aa + h_bb + 1.0) {
                break (
                    -((h_bb + damping) * g_a - h_ab * g_b) / det,
                    -((h_aa + damping) * g_b - h_ab * g_a) / det,
                );
            }
            damping = if damping == 0.0 { 1e-8 } else { damping * 10.0 };
        };

        let mut t = 1.0;
        let mut improvement = 0.0;
        let mut stepped = false;
        for _ in 0..40 {
            let candidate = nll(a + t * da, b + t * db);
            if candidate <= current - 1e-14 {
                a += t * da;
                b += t * db;
                improvement = current - candidate;
                stepped = true;
                break;
            }
            t *= 0.5;
        }
        if !stepped
            || improvement < 1e-13 * (1.0 + current)
            || a.abs() > 500.0
            || b.abs() > 500.0
        {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(CalibrateError::NonConvergence(PLATT_MAX_ITERS));
    }
    if a <= 1e-8 {
        return Err(CalibrateError::NearDegenerateFit { a, b });
    }
    Ok(CalibrationMap::Platt { a, b })
}

/// Pool-adjacent-violators fit of non-decreasing values against real
/// targets, pooling tied scores first. Returns strictly ascending
/// breakpoints with one fitted value per distinct score.
pub fn pava_fit(scores: &[f64], targets: &[f64]) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(scores.len(), targets.len());
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[i].partial_cmp(&scores[j]).unwrap().then(i.cmp(&j)));

    // pre-pool exact score ties
    let mut breakpoints: Vec<f64> = Vec::new();
    let mut tied: Vec<(f64, f64)> = Vec::new(); // (sum, count) per distinct score
    for &i in &order {
        if breakpoints.last() == Some(&scores[i]) {
            let last = tied.last_mut().unwrap();
            last.0 += targets[i];
            last.1 += 1.0;
        } else {
            breakpoints.push(scores[i]);
            tied.push((targets[i], 1.0));
        }
    }

    // PAVA over blocks of (sum, count, span of distinct scores)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::new();
    for (sum, count) in tied {
        blocks.push((sum, count, 1));
        while blocks.len() >= 2 {
            let last = blocks[blocks.len() - 1];
            let prev = blocks[blocks.len() - 2];
            if prev.0 / prev.1 > last.0 / last.1 {
                blocks.pop();
                let top = blocks.last_mut().unwrap();
                top.0 += last.0;
                top.1 += last.1;
                top.2 += last.2;
            } else {
                break;
            }
        }
    }

    let mut values = Vec::with_capacity(breakpoints.len());
    for (sum, count, span) in blocks {
        let v = sum / count;
        values.resize(values.len() + span, v);
    }
    (breakpoints, values)
}

/// Isotonic regression of 0/1 labels on scores: the least-squares
/// non-decreasing fit, via pool-adjacent-violators.
pub fn fit_isotonic(scores: &[f64], labels: &[u8]) -> Result<CalibrationMap, CalibrateError> {
    check_two_classes(scores, labels)?;
    let targets: Vec<f64> = labels.iter().map(|&y| y as f64).collect();
    let (breakpoints, values) = pava_fit(scores, &targets);
    Ok(CalibrationMap::Isotonic { breakpoints, values })
}

#[derive(Debug, Clone, Serialize)]
pub struct ReliabilityBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub mean_score: Option<f64>,
    pub positive_rate: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReliabilityTable {
    pub bins: Vec<ReliabilityBin>,
    pub ece: f64,
    pub n: usize,
}

impl ReliabilityTable {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count,mean_score,positive_rate\n");
        for b in &self.bins {
            out.push_str(&format!(
                "{:.3},{:.3},{},{},{}\n",
                b.lo,
                b.hi,
                b.count,
                b.mean_score.map(|v| format!("{v:.6}")).unwrap_or_default(),
                b.positive_rate.map(|v| format!("{v:.6}")).unwrap_or_default(),
            ));
        }
        out.push_str(&format!("# ece={:.6} n={}\n", self.ece, self.n));
        out
    }
}

/// Reliability against arbitrary real targets in [0, 1]. With 0/1 labels
/// this is the usual empirical reliability table; with known conditional
/// probabilities it measures calibration without label sampling noise.
pub fn reliability_against(
    scores: &[f64],
    targets: &[f64],
    bin_count: usize,
) -> Result<ReliabilityTable, CalibrateError> {
    if bin_count == 0 {
        return Err(CalibrateError::InvalidBinCount);
    }
    if scores.is_empty() {
        return Err(CalibrateError::EmptyInput);
    }
    if scores.len() != targets.len() {
        return Err(CalibrateError::LengthMismatch(scores.len(), targets.len()));
    }

    let mut sums = vec![(0usize, 0.0f64, 0.0f64); bin_count]; // count, sum score, sum target
    for (&s, &t) in scores.iter().zip(targets) {
        let idx = ((s * bin_count as f64).floor() as usize).min(bin_count - 1);
        sums[idx].0 += 1;
        sums[idx].1 += s;
        sums[idx].2 += t;
    }

    let n = scores.len();
    let mut ece = 0.0;
    let bins = sums
        .iter()
        .enumerate()
        .map(|(i, &(count, sum_s, sum_t))| {
            let lo = i as f64 / bin_count as f64;
            let hi = (i + 1) as f64 / bin_count as f64;
            if count == 0 {
                ReliabilityBin { lo, hi, count, mean_score: None, positive_rate: None }
            } else {
                let mean_score = sum_s / count as f64;
                let rate = sum_t / count as f64;
                ece += (count as f64 / n as f64) * (mean_score - rate).abs();
                ReliabilityBin {
                    lo,
                    hi,
                    count,
                    mean_score: Some(mean_score),
                    positive_rate: Some(rate),
                }
            }
        })
        .collect();

    Ok(ReliabilityTable { bins, ece, n })
}

/// Equal-width reliability table and expected calibration error.
pub fn reliability(
    scores: &[f64],
    labels: &[u8],
    bin_count: usize,
) -> Result<ReliabilityTable, CalibrateError> {
    let targets: Vec<f64> = labels.iter().map(|&y| y as f64).collect();
    reliability_against(scores, &targets, bin_count)
}

/// Expected calibration error with the default ten bins.
pub fn ece(scores: &[f64], labels: &[u8]) -> Result<f64, CalibrateError> {
    Ok(reliability(scores, labels, 10)?.ece)
}
