//! Per-group audit metrics (AUC, generalized error rates, F-score) and
//! disparity-ratio reports.
//!
//! GFPR is the mean predicted risk among true negatives and GFNR the mean
//! of one-minus-predicted-risk among true positives: the probabilistic
//! generalizations of the classical error rates to score-valued
//! classifiers. Both are linear in the score vector, which is what makes
//! the mixing-based mitigation exactly analyzable.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibrate;

#[derive(Debug, Error)]
pub enum FairnessError {
    #[error("scores and labels differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("score {0} outside [0, 1]")]
    ScoreOutOfRange(f64),
    #[error("group `{0}` is empty")]
    EmptyGroup(String),
    #[error("metric undefined: group has a single class")]
    SingleClass,
    #[error("metric undefined: group has no positives")]
    NoPositives,
    #[error("metric undefined: group has no negatives")]
    NoNegatives,
}

/// (score, label) pairs for one group: the unit of all fairness math.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredGroup {
    pub name: String,
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
}

impl ScoredGroup {
    pub fn new(name: &str, scores: Vec<f64>, labels: Vec<u8>) -> Result<Self, FairnessError> {
        if scores.len() != labels.len() {
            return Err(FairnessError::LengthMismatch(scores.len(), labels.len()));
        }
        if let Some(&bad) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(FairnessError::ScoreOutOfRange(bad));
        }
        debug_assert!(labels.iter().all(|&l| l <= 1));
        Ok(ScoredGroup { name: name.to_string(), scores, labels })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn n_pos(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }

    pub fn n_neg(&self) -> usize {
        self.n() - self.n_pos()
    }

    pub fn base_rate(&self) -> f64 {
        self.n_pos() as f64 / self.n() as f64
    }
}

/// AUC as the Mann-Whitney rank statistic: the fraction of
/// (positive, negative) pairs ranked correctly, ties counted one half.
pub fn auc(group: &ScoredGroup) -> Result<f64, FairnessError> {
    auc_scores(&group.scores, &group.labels)
}

pub fn auc_scores(scores: &[f64], labels: &[u8]) -> Result<f64, FairnessError> {
    if scores.len() != labels.len() {
        return Err(FairnessError::LengthMismatch(scores.len(), labels.len()));
    }
    let n = scores.len();
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(FairnessError::SingleClass);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| scores[i].partial_cmp(&scores[j]).unwrap());

    // midranks: tied scores share the average of their 1-based ranks
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if labels[idx] == 1 {
                rank_sum_pos += midrank;
            }
        }
        i = j + 1;
    }

    let u = rank_sum_pos - (n_pos as f64 * (n_pos as f64 + 1.0)) / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Generalized false positive rate: mean score over true negatives.
pub fn gfpr(group: &ScoredGroup) -> Result<f64, FairnessError> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (&s, &y) in group.scores.iter().zip(&group.labels) {
        if y == 0 {
            sum += s;
            count += 1;
        }
    }
    if count == 0 {
        return Err(FairnessError::NoNegatives);
    }
    Ok(sum / count as f64)
}

/// Generalized false negative rate: mean of (1 - score) over true
/// positives.
pub fn gfnr(group: &ScoredGroup) -> Result<f64, FairnessError> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (&s, &y) in group.scores.iter().zip(&group.labels) {
        if y == 1 {
            sum += 1.0 - s;
            count += 1;
        }
    }
    if count == 0 {
        return Err(FairnessError::NoPositives);
    }
    Ok(sum / count as f64)
}

/// Cut-off selection for the F-score.
#[derive(Debug, Clone, Copy)]
pub enum ThresholdRule<'a> {
    Fixed(f64),
    /// Scan all distinct scores of the reference (typically training data)
    /// and pick the F1-maximizing cut-off; ties resolve to the lowest.
    SelectOptimal(&'a ScoredGroup),
}

/// F1 at a threshold, classifying `score >= threshold` as positive.
/// Returns the score together with the threshold that was used.
pub fn f_score(group: &ScoredGroup, rule: ThresholdRule) -> Result<(f64, f64), FairnessError> {
    if group.n_pos() == 0 {
        return Err(FairnessError::NoPositives);
    }
    let threshold = match rule {
        ThresholdRule::Fixed(t) => t,
        ThresholdRule::SelectOptimal(reference) => optimal_threshold(reference)?,
    };
    Ok((f1_at(group, threshold), threshold))
}

fn f1_at(group: &ScoredGroup, threshold: f64) -> f64 {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&s, &y) in group.scores.iter().zip(&group.labels) {
        let predicted = s >= threshold;
        match (predicted, y == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    if 2 * tp + fp + fn_ == 0 {
        0.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    }
}

/// The F1-maximizing cut-off over the reference group's distinct scores.
pub fn optimal_threshold(reference: &ScoredGroup) -> Result<f64, FairnessError> {
    if reference.n() == 0 {
        return Err(FairnessError::EmptyGroup(reference.name.clone()));
    }
    let p = reference.n_pos();
    if p == 0 {
        return Err(FairnessError::NoPositives);
    }

    let mut order: Vec<usize> = (0..reference.n()).collect();
    order.sort_by(|&i, &j| reference.scores[i].partial_cmp(&reference.scores[j]).unwrap());

    // suffix positive counts over the ascending order
    let n = order.len();
    let mut suffix_pos = vec![0usize; n + 1];
    for i in (0..n).rev() {
        suffix_pos[i] = suffix_pos[i + 1] + (reference.labels[order[i]] == 1) as usize;
    }

    let mut best_f1 = f64::NEG_INFINITY;
    let mut best_t = 0.0;
    for i in 0..n {
        if i > 0 && reference.scores[order[i]] == reference.scores[order[i - 1]] {
            continue;
        }
        let t = reference.scores[order[i]];
        let tp = suffix_pos[i];
        let pred_pos = n - i;
        let f1 = 2.0 * tp as f64 / (pred_pos + p) as f64;
        if f1 > best_f1 {
            best_f1 = f1;
            best_t = t;
        }
    }
    Ok(best_t)
}

// ---------------------------------------------------------------------------
// Audit report assembly.

/// Per-group metric row. Undefined metrics (single-class groups) are
/// absent rather than zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMetricRow {
    pub group: String,
    pub auc: Option<f64>,
    pub gfnr: Option<f64>,
    pub gfpr: Option<f64>,
    pub f_score: Option<f64>,
    pub ece: Option<f64>,
    pub n: usize,
    pub n_pos: usize,
    pub n_neg: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricRatio {
    pub value: Option<f64>,
    /// Set when the ratio strays more than the equity threshold from 1.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub label: String,
    pub auc: MetricRatio,
    pub gfnr: MetricRatio,
    pub gfpr: MetricRatio,
    pub f_score: MetricRatio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecAudit {
    pub spec: String,
    pub first: GroupMetricRow,
    pub second: GroupMetricRow,
    pub ratios: RatioRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub task: String,
    pub model_tag: String,
    pub threshold: f64,
    pub equity_threshold: f64,
    pub overall: GroupMetricRow,
    pub specs: Vec<SpecAudit>,
}

/// A pair of scored groups under one partition spec.
#[derive(Debug, Clone)]
pub struct SpecScored {
    pub spec: String,
    pub first: ScoredGroup,
    pub second: ScoredGroup,
}

#[derive(Debug, Clone)]
pub struct AuditOptions {
    /// Frozen classification cut-off for the F-score (selected on
    /// training data).
    pub threshold: f64,
    pub equity_threshold: f64,
    pub ece_bins: usize,
}

impl Default for AuditOptions {
    fn default() -> Self {
        AuditOptions { threshold: 0.5, equity_threshold: 0.2, ece_bins: 10 }
    }
}

fn metric_row(group: &ScoredGroup, opts: &AuditOptions) -> GroupMetricRow {
    GroupMetricRow {
        group: group.name.clone(),
        auc: auc(group).ok(),
        gfnr: gfnr(group).ok(),
        gfpr: gfpr(group).ok(),
        f_score: f_score(group, ThresholdRule::Fixed(opts.threshold)).ok().map(|(f, _)| f),
        ece: calibrate::reliability(&group.scores, &group.labels, opts.ece_bins)
            .ok()
            .map(|t| t.ece),
        n: group.n(),
        n_pos: group.n_pos(),
        n_neg: group.n_neg(),
    }
}

fn ratio(first: Option<f64>, second: Option<f64>, equity_threshold: f64) -> MetricRatio {
    match (first, second) {
        (Some(a), Some(b)) if b != 0.0 => {
            let r = a / b;
            MetricRatio { value: Some(r), flagged: (1.0 - r).abs() > equity_threshold }
        }
        _ => MetricRatio { value: None, flagged: false },
    }
}

/// Assembles the audit report: one metric row per group per spec, a
/// first-over-second disparity ratio per spec, and an overall row.
pub fn audit(
    task: &str,
    model_tag: &str,
    overall: &ScoredGroup,
    specs: &[SpecScored],
    opts: &AuditOptions,
) -> Result<FairnessReport, FairnessError> {
    if overall.n() == 0 {
        return Err(FairnessError::EmptyGroup(overall.name.clone()));
    }
    for s in specs {
        if s.first.n() == 0 {
            return Err(FairnessError::EmptyGroup(s.first.name.clone()));
        }
        if s.second.n() == 0 {
            return Err(FairnessError::EmptyGroup(s.second.name.clone()));
        }
    }

    let spec_audits = specs
        .iter()
        .map(|s| {
            let first = metric_row(&s.first, opts);
            let second = metric_row(&s.second, opts);
            let ratios = RatioRow {
                label: format!("{}/{}", s.first.name, s.second.name),
                auc: ratio(first.auc, second.auc, opts.equity_threshold),
                gfnr: ratio(first.gfnr, second.gfnr, opts.equity_threshold),
                gfpr: ratio(first.gfpr, second.gfpr, opts.equity_threshold),
                f_score: ratio(first.f_score, second.f_score, opts.equity_threshold),
            };
            SpecAudit { spec: s.spec.clone(), first, second, ratios }
        })
        .collect();

    Ok(FairnessReport {
        task: task.to_string(),
        model_tag: model_tag.to_string(),
        threshold: opts.threshold,
        equity_threshold: opts.equity_threshold,
        overall: metric_row(overall, opts),
        specs: spec_audits,
    })
}

// ---------------------------------------------------------------------------
// Rendering.

#[derive(Debug, Clone, Default)]
pub struct ReportMeta {
    pub config_hash: String,
    pub seed: u64,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

fn opt_md(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "—".to_string())
}

fn ratio_md(r: &MetricRatio) -> String {
    match r.value {
        Some(v) if r.flagged => format!("**{v:.3}\\***"),
        Some(v) => format!("**{v:.3}**"),
        None => "—".to_string(),
    }
}

impl FairnessReport {
    pub fn to_csv_string(&self, meta: &ReportMeta) -> String {
        let mut out = format!(
            "# fairrisk audit task={} model={} config={} seed={} threshold={:.6} equity_threshold={}\n",
            self.task, self.model_tag, meta.config_hash, meta.seed, self.threshold,
            self.equity_threshold
        );
        out.push_str("section,spec,group,auc,gfnr,gfpr,f_score,ece,n,n_pos,n_neg,flags\n");
        let row_line = |section: &str, spec: &str, r: &GroupMetricRow| {
            format!(
                "{section},{spec},{},{},{},{},{},{},{},{},{},\n",
                r.group,
                opt(r.auc),
                opt(r.gfnr),
                opt(r.gfpr),
                opt(r.f_score),
                opt(r.ece),
                r.n,
                r.n_pos,
                r.n_neg
            )
        };
        out.push_str(&row_line("overall", "", &self.overall));
        for s in &self.specs {
            out.push_str(&row_line("group", &s.spec, &s.first));
            out.push_str(&row_line("group", &s.spec, &s.second));
            let mut flags: Vec<&str> = Vec::new();
            if s.ratios.auc.flagged {
                flags.push("auc");
            }
            if s.ratios.gfnr.flagged {
                flags.push("gfnr");
            }
            if s.ratios.gfpr.flagged {
                flags.push("gfpr");
            }
            if s.ratios.f_score.flagged {
                flags.push("f_score");
            }
            out.push_str(&format!(
                "ratio,{},{},{},{},{},{},,,,,{}\n",
                s.spec,
                s.ratios.label,
                opt(s.ratios.auc.value),
                opt(s.ratios.gfnr.value),
                opt(s.ratios.gfpr.value),
                opt(s.ratios.f_score.value),
                flags.join(";")
            ));
        }
        out
    }

    pub fn to_markdown(&self, meta: &ReportMeta) -> String {
        let mut out = format!(
            "# Fairness audit — {} / {}\n\nconfig `{}`, seed {}, F-score cut-off {:.4}, \
             equity band |1 − ratio| ≤ {}\n\nRatios are first group over second; \
             values outside the equity band are starred.\n\n",
            self.task, self.model_tag, meta.config_hash, meta.seed, self.threshold,
            self.equity_threshold
        );
        out.push_str("| group | AUC | GFNR | GFPR | F-score | ECE | n |\n");
        out.push_str("|---|---|---|---|---|---|---|\n");
        let row_line = |r: &GroupMetricRow, emphasis: &str| {
            format!(
                "| {emphasis}{}{emphasis} | {} | {} | {} | {} | {} | {} |\n",
                r.group,
                opt_md(r.auc),
                opt_md(r.gfnr),
                opt_md(r.gfpr),
                opt_md(r.f_score),
                opt_md(r.ece),
                r.n
            )
        };
        out.push_str(&row_line(&self.overall, "**"));
        for s in &self.specs {
            out.push_str(&row_line(&s.first, ""));
            out.push_str(&row_line(&s.second, ""));
            out.push_str(&format!(
                "| _{} (ratio)_ | {} | {} | {} | {} | — | |\n",
                s.ratios.label,
                ratio_md(&s.ratios.auc),
                ratio_md(&s.ratios.gfnr),
                ratio_md(&s.ratios.gfpr),
                ratio_md(&s.ratios.f_score),
            ));
        }
        out
    }
}
