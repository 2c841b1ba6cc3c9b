//! Calibration-preserving equalization of one generalized error rate
//! across two groups.
//!
//! The better-off group's calibrated classifier is mixed with its trivial
//! predictor (the constant group base rate, perfectly calibrated by
//! construction). Since GFPR and GFNR are linear in the score vector, the
//! mixing weight solving the equalization is the root of a linear
//! equation, and the target rate is hit exactly in expectation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibrate;
use crate::fairness::{self, FairnessError, ScoredGroup};

#[derive(Debug, Error)]
pub enum MitigateError {
    #[error("group `{0}` has a single class; policy fitting needs both")]
    SingleClass(String),
    #[error(
        "target {target:.4} for `{degraded_group}` is unreachable by mixing; \
         the achievable extreme is {achievable:.4}"
    )]
    Infeasible {
        degraded_group: String,
        target: f64,
        achievable: f64,
    },
    #[error(transparent)]
    Fairness(#[from] FairnessError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMetric {
    Gfpr,
    Gfnr,
}

impl TargetMetric {
    pub fn name(self) -> &'static str {
        match self {
            TargetMetric::Gfpr => "gfpr",
            TargetMetric::Gfnr => "gfnr",
        }
    }

    fn of(self, group: &ScoredGroup) -> Result<f64, FairnessError> {
        match self {
            TargetMetric::Gfpr => fairness::gfpr(group),
            TargetMetric::Gfnr => fairness::gfnr(group),
        }
    }

    fn other(self) -> TargetMetric {
        match self {
            TargetMetric::Gfpr => TargetMetric::Gfnr,
            TargetMetric::Gfnr => TargetMetric::Gfpr,
        }
    }

    /// The target metric of the constant predictor emitting `mu`.
    fn trivial_value(self, mu: f64) -> f64 {
        match self {
            TargetMetric::Gfpr => mu,
            TargetMetric::Gfnr => 1.0 - mu,
        }
    }
}

impl MitigationMode {
    pub fn name(self) -> &'static str {
        match self {
            MitigationMode::Randomized => "randomized",
            MitigationMode::ExpectedScore => "expected_score",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MitigationMode {
    /// Each score is independently replaced by the trivial rate with
    /// probability alpha. Faithful to the randomized mixing construction
    /// and calibration-preserving, at the cost of sampling noise.
    Randomized,
    /// Every score becomes the mixture expectation
    /// `(1 - alpha) * s + alpha * trivial_rate`: reproducible, equalizes
    /// the target metric exactly, and leaves the group's ranking (and so
    /// its AUC) unchanged while alpha < 1.
    ExpectedScore,
}

/// Pre-fit state of one group, kept as an audit trail on the policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupFitSnapshot {
    pub group: String,
    pub metric_value: f64,
    pub base_rate: f64,
    pub ece: f64,
    pub n: usize,
}

/// A fitted two-group equalization policy for one generalized error rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MitigationPolicy {
    pub target_metric: TargetMetric,
    pub degraded_group: String,
    pub alpha: f64,
    pub trivial_rate: f64,
    pub target_value: f64,
    pub mode: MitigationMode,
    pub pre_fit: Vec<GroupFitSnapshot>,
}

fn check_both_classes(group: &ScoredGroup) -> Result<(), MitigateError> {
    let pos = group.n_pos();
    if pos == 0 || pos == group.n() {
        return Err(MitigateError::SingleClass(group.name.clone()));
    }
    Ok(())
}

/// Fits the mixing weight that raises the better-off group's target
/// metric to the other group's value. Input scores are expected to be
/// calibrated (the caller's responsibility); pre-fit per-group ECE is
/// recorded so that claim is auditable.
pub fn fit_policy(
    group_a: &ScoredGroup,
    group_b: &ScoredGroup,
    target_metric: TargetMetric,
    mode: MitigationMode,
) -> Result<MitigationPolicy, MitigateError> {
    check_both_classes(group_a)?;
    check_both_classes(group_b)?;

    let m_a = target_metric.of(group_a)?;
    let m_b = target_metric.of(group_b)?;
    let (degraded, m_degraded, target) = if m_a <= m_b {
        (group_a, m_a, m_b)
    } else {
        (group_b, m_b, m_a)
    };

    let mu = degraded.base_rate();
    let mu_effect = target_metric.trivial_value(mu);
    let alpha = if (target - m_degraded).abs() < 1e-15 {
        0.0
    } else {
        let denom = mu_effect - m_degraded;
        let a = if denom == 0.0 { f64::INFINITY } else { (target - m_degraded) / denom };
        if !(0.0..=1.0).contains(&a) {
            return Err(MitigateError::Infeasible {
                degraded_group: degraded.name.clone(),
                target,
                achievable: mu_effect,
            });
        }
        a
    };

    let snapshot = |g: &ScoredGroup, m: f64| -> Result<GroupFitSnapshot, MitigateError> {
        Ok(GroupFitSnapshot {
            group: g.name.clone(),
            metric_value: m,
            base_rate: g.base_rate(),
            ece: calibrate::ece(&g.scores, &g.labels).expect("nonempty group"),
            n: g.n(),
        })
    };

    Ok(MitigationPolicy {
        target_metric,
        degraded_group: degraded.name.clone(),
        alpha,
        trivial_rate: mu,
        target_value: target,
        mode,
        pre_fit: vec![snapshot(group_a, m_a)?, snapshot(group_b, m_b)?],
    })
}

/// Applies a policy to the degraded group's scores. The caller routes
/// groups; the non-degraded group passes through untouched.
pub fn apply_policy(policy: &MitigationPolicy, scores: &[f64], seed: u64) -> Vec<f64> {
    match policy.mode {
        MitigationMode::Randomized => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            scores
                .iter()
                .map(|&s| {
                    if rng.random::<f64>() < policy.alpha {
                        policy.trivial_rate
                    } else {
                        s
                    }
                })
                .collect()
        }
        MitigationMode::ExpectedScore => scores
            .iter()
            .map(|&s| (1.0 - policy.alpha) * s + policy.alpha * policy.trivial_rate)
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationSnapshot {
    pub group: String,
    pub target_metric_value: Option<f64>,
    pub other_metric_value: Option<f64>,
    pub ece: Option<f64>,
}

/// Post-application check: target-metric values and ratio, the non-target
/// metric, and per-group calibration error before and after.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationRecord {
    pub target_metric: TargetMetric,
    pub degraded_group: String,
    pub alpha: f64,
    pub groups: Vec<VerificationSnapshot>,
    /// First group's target metric over the second's.
    pub target_ratio: Option<f64>,
    pub ece_before: Vec<f64>,
}

pub fn verify_policy(
    policy: &MitigationPolicy,
    group_a_after: &ScoredGroup,
    group_b_after: &ScoredGroup,
) -> VerificationRecord {
    let snap = |g: &ScoredGroup| VerificationSnapshot {
        group: g.name.clone(),
        target_metric_value: policy.target_metric.of(g).ok(),
        other_metric_value: policy.target_metric.other().of(g).ok(),
        ece: calibrate::ece(&g.scores, &g.labels).ok(),
    };
    let a = snap(group_a_after);
    let b = snap(group_b_after);
    let target_ratio = match (a.target_metric_value, b.target_metric_value) {
        (Some(x), Some(y)) if y != 0.0 => Some(x / y),
        _ => None,
    };
    VerificationRecord {
        target_metric: policy.target_metric,
        degraded_group: policy.degraded_group.clone(),
        alpha: policy.alpha,
        groups: vec![a, b],
        target_ratio,
        ece_before: policy.pre_fit.iter().map(|s| s.ece).collect(),
    }
}
