//! Subcommand implementations wiring the library pipeline:
//! synth -> audit -> mitigate.

use std::path::{Path, PathBuf};

use serde::Serialize;

use fairrisk_core::calibrate::{self, CalibrationMap};
use fairrisk_core::cohort::{self, CohortError, GroupSpec, LoadOptions, OutcomeTask};
use fairrisk_core::fairness::{
    self, AuditOptions, FairnessReport, GroupMetricRow, ReportMeta, ScoredGroup, SpecAudit,
    SpecScored,
};
use fairrisk_core::mitigate::{
    self, MitigateError, MitigationPolicy, VerificationRecord,
};
use fairrisk_core::models::{self, Model, ModelDocument, ModelError};
use fairrisk_core::preprocess::{self, EncodingSchema, MinoritySelector};
use fairrisk_core::synth::{self, GeneratorConfig, MarginalTargets, RiskTargets};

use crate::config::{
    self, CalibrationMethod, LoadedConfig, ModelFamily, RunConfig, SmoteSelectorConfig,
};
use crate::CliError;

#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub cohort: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

fn usage_err(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| usage_err(format!("cannot create {}: {e}", parent.display())))?;
    }
    std::fs::write(path, contents)
        .map_err(|e| usage_err(format!("cannot write {}: {e}", path.display())))
}

struct Resolved {
    config: RunConfig,
    hash: String,
    seed: u64,
    cohort_csv: PathBuf,
    report_dir: PathBuf,
}

fn resolve(loaded: LoadedConfig, overrides: &Overrides) -> Resolved {
    let LoadedConfig { config, hash } = loaded;
    let seed = overrides.seed.unwrap_or(config.seed);
    let cohort_csv = overrides
        .cohort
        .clone()
        .unwrap_or_else(|| config.paths.cohort_csv.clone());
    let report_dir = overrides
        .out_dir
        .clone()
        .unwrap_or_else(|| config.paths.report_dir.clone());
    Resolved { config, hash, seed, cohort_csv, report_dir }
}

// ---------------------------------------------------------------------------
// synth

pub fn cmd_synth(config_path: &Path, overrides: &Overrides) -> Result<(), CliError> {
    let resolved = resolve(config::load_config(config_path)?, overrides);
    let section = resolved
        .config
        .synth
        .as_ref()
        .ok_or_else(|| usage_err("config has no `synth` section"))?;

    let mut generator = GeneratorConfig {
        n: section.n,
        seed: config::derive_seed(resolved.seed, "synth"),
        ..GeneratorConfig::default()
    };
    if let Some(m) = section.attribute_marginals {
        generator.attribute_marginals = m;
    }
    if let Some(g) = section.grade_distribution {
        generator.grade_distribution = g;
    }
    if let Some(c) = section.outcome_coefficients {
        generator.outcome_coefficients = c;
    }
    if let Some(y) = &section.year_weights {
        generator.year_weights = y.clone();
    }

    let fitted = section.fit_to_targets || section.risk_targets.is_some();
    let targets = if fitted {
        let targets = section
            .risk_targets
            .clone()
            .unwrap_or_else(RiskTargets::default_targets);
        generator.outcome_coefficients = synth::fit_outcome_coefficients(&targets, &generator)
            .map_err(|e| match e {
                synth::SynthError::InvalidConfig(_) => usage_err(e),
                other => data_err(other),
            })?;
        MarginalTargets::with_risks(&generator, targets)
    } else {
        MarginalTargets::from_config(&generator)
    };

    let cohort = synth::generate(&generator).map_err(usage_err)?;
    if let Some(parent) = resolved.cohort_csv.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| usage_err(format!("cannot create {}: {e}", parent.display())))?;
    }
    cohort::write_cohort_csv(&cohort, &resolved.cohort_csv).map_err(data_err)?;

    let report = synth::validate_marginals(
        &cohort,
        &targets,
        synth::grade_median(&generator.grade_distribution),
    );
    let header = format!(
        "# fairrisk synth n={} config={} seed={}\n",
        cohort.len(),
        resolved.hash,
        resolved.seed
    );
    write_file(
        &resolved.report_dir.join("marginals.csv"),
        &format!("{header}{}", report.to_csv_string()),
    )?;
    write_file(
        &resolved.report_dir.join("marginals.txt"),
        &format!("{header}{}", report.to_text()),
    )?;
    log::info!(
        "generated {} records to {} (max marginal deviation {:.4})",
        cohort.len(),
        resolved.cohort_csv.display(),
        report.max_deviation()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// audit

pub struct AuditState {
    pub report: FairnessReport,
    pub spec_groups: Vec<(GroupSpec, ScoredGroup, ScoredGroup)>,
    pub meta: ReportMeta,
    pub opts: AuditOptions,
    pub model_tag: String,
    pub task: OutcomeTask,
    pub metric_mode: crate::config::MitigationConfig,
    pub seed: u64,
    pub report_dir: PathBuf,
}

pub fn cmd_audit(config_path: &Path, overrides: &Overrides) -> Result<(), CliError> {
    let state = run_audit(config::load_config(config_path)?, overrides)?;
    write_audit_reports(&state)
}

fn write_audit_reports(state: &AuditState) -> Result<(), CliError> {
    let base = format!("audit_{}_{}", state.task.name(), state.model_tag);
    write_file(
        &state.report_dir.join(format!("{base}.csv")),
        &state.report.to_csv_string(&state.meta),
    )?;
    write_file(
        &state.report_dir.join(format!("{base}.md")),
        &state.report.to_markdown(&state.meta),
    )?;
    Ok(())
}

pub fn run_audit(loaded: LoadedConfig, overrides: &Overrides) -> Result<AuditState, CliError> {
    let resolved = resolve(loaded, overrides);
    let config = &resolved.config;
    let seed = resolved.seed;
    let task = config.task;

    // cohort
    let schema_map = match &config.paths.schema {
        Some(path) => Some(config::load_schema_sidecar(path)?),
        None => None,
    };
    let load_options = LoadOptions {
        drop_missing_grade: config.load.drop_missing_grade,
        drop_missing_outcome: config.load.drop_missing_outcome,
        grade_scale: config.load.grade_scale,
        ..LoadOptions::default()
    };
    if !resolved.cohort_csv.exists() {
        return Err(usage_err(format!(
            "cohort CSV {} does not exist",
            resolved.cohort_csv.display()
        )));
    }
    let outcome = cohort::load_cohort(&resolved.cohort_csv, schema_map.as_ref(), &load_options)
        .map_err(data_err)?;
    for diag in &outcome.diagnostics {
        log::warn!("row {} filtered: {}", diag.row, diag.reason);
    }
    let full_cohort = outcome.cohort;

    let (train_cohort, test_cohort) =
        cohort::temporal_split(&full_cohort, &config.years.train, &config.years.test).map_err(
            |e| match e {
                CohortError::OverlappingYears(_) => usage_err(e),
                other => data_err(other),
            },
        )?;
    log::info!(
        "temporal split: {} train / {} test records",
        train_cohort.len(),
        test_cohort.len()
    );

    // model: load an existing document or train a fresh one
    let existing_doc = match &config.paths.model_json {
        Some(path) if path.exists() => Some(ModelDocument::load(path).map_err(data_err)?),
        _ => None,
    };

    let schema: EncodingSchema = match &existing_doc {
        Some(doc) => doc.encoding.clone(),
        None => preprocess::encode(&train_cohort, task, None)
            .map_err(data_err)?
            .schema,
    };
    let train_matrix =
        preprocess::encode(&train_cohort, task, Some(&schema)).map_err(data_err)?;
    let test_matrix = preprocess::encode(&test_cohort, task, Some(&schema)).map_err(data_err)?;

    // calibration slice: held-out training rows, or the whole split
    let holdout = config.calibration.holdout_fraction;
    if !(0.0..1.0).contains(&holdout) {
        return Err(usage_err("calibration.holdout_fraction must lie in [0, 1)"));
    }
    let (fit_indices, calibration_indices): (Vec<usize>, Vec<usize>) = if holdout > 0.0 {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng =
            rand_chacha::ChaCha8Rng::seed_from_u64(config::derive_seed(seed, "calibration-split"));
        let mut indices: Vec<usize> = (0..train_matrix.n_rows()).collect();
        indices.shuffle(&mut rng);
        let k = ((holdout * indices.len() as f64).round() as usize).min(indices.len() - 1);
        let (cal, fit) = indices.split_at(k);
        (fit.to_vec(), cal.to_vec())
    } else {
        let all: Vec<usize> = (0..train_matrix.n_rows()).collect();
        (all.clone(), all)
    };

    let (model, train_seed) = match &existing_doc {
        Some(doc) => (doc.model.clone(), doc.train_seed),
        None => {
            let mut fit_matrix = train_matrix.select(&fit_indices);
            if let Some(smote_config) = &config.smote {
                let selector = resolve_smote_selector(smote_config, &schema)?;
                fit_matrix = preprocess::smote(
                    &fit_matrix,
                    selector,
                    smote_config.k,
                    smote_config.target_ratio,
                    config::derive_seed(seed, "smote"),
                )
                .map_err(data_err)?;
                log::info!("smote expanded training rows to {}", fit_matrix.n_rows());
            }
            let train_seed = config::derive_seed(seed, "train");
            let train_config = config.model.train.to_train_config(train_seed);
            let model = match config.model.family {
                ModelFamily::Logistic => Model::Logistic(
                    models::train_logistic(&fit_matrix, &train_config).map_err(map_model_err)?,
                ),
                ModelFamily::Mlp => Model::Mlp(
                    models::train_mlp(&fit_matrix, &train_config, config.model.hidden_units)
                        .map_err(map_model_err)?,
                ),
            };
            (model, train_seed)
        }
    };

    // global calibration map
    let calibration_matrix = train_matrix.select(&calibration_indices);
    let calibration_scores = model.predict_proba(&calibration_matrix).map_err(data_err)?;
    let method = config.calibration.method;
    let global_map: Option<CalibrationMap> = match (&existing_doc, method) {
        (_, CalibrationMethod::None) => None,
        (Some(doc), _) if doc.calibration.is_some() => doc.calibration.clone(),
        (_, CalibrationMethod::Isotonic) => Some(
            calibrate::fit_isotonic(&calibration_scores, calibration_matrix.labels())
                .map_err(data_err)?,
        ),
        (_, CalibrationMethod::Platt) => Some(
            calibrate::fit_platt(&calibration_scores, calibration_matrix.labels())
                .map_err(data_err)?,
        ),
    };
    let model_tag = match &global_map {
        None => model.family().to_string(),
        Some(_) => format!("{}_calibrated", model.family()),
    };

    let apply_global = |scores: &[f64]| -> Vec<f64> {
        match &global_map {
            Some(map) => map.apply(scores),
            None => scores.to_vec(),
        }
    };

    // frozen F-score cut-off from the calibration slice
    let threshold_reference = ScoredGroup::new(
        "train",
        apply_global(&calibration_scores),
        calibration_matrix.labels().to_vec(),
    )
    .map_err(data_err)?;
    let threshold = fairness::optimal_threshold(&threshold_reference).map_err(data_err)?;

    // score the temporal test split
    let raw_test_scores = model.predict_proba(&test_matrix).map_err(data_err)?;
    let global_test_scores = apply_global(&raw_test_scores);
    let test_labels = test_matrix.labels().to_vec();

    let specs = config
        .groups
        .clone()
        .unwrap_or_else(GroupSpec::default_audit_specs);

    let mut spec_groups: Vec<(GroupSpec, ScoredGroup, ScoredGroup)> = Vec::new();
    for spec in &specs {
        let (first_idx, second_idx) =
            cohort::partition(&test_cohort, spec, &train_cohort).map_err(data_err)?;

        let (first_scores, second_scores) =
            if config.calibration.per_group && method != CalibrationMethod::None {
                let (train_first, train_second) =
                    cohort::partition(&train_cohort, spec, &train_cohort).map_err(data_err)?;
                (
                    per_group_side_scores(
                        &train_first,
                        &first_idx,
                        &calibration_indices,
                        &calibration_scores,
                        calibration_matrix.labels(),
                        &raw_test_scores,
                        method,
                        &global_map,
                    ),
                    per_group_side_scores(
                        &train_second,
                        &second_idx,
                        &calibration_indices,
                        &calibration_scores,
                        calibration_matrix.labels(),
                        &raw_test_scores,
                        method,
                        &global_map,
                    ),
                )
            } else {
                let pick = |idx: &[usize]| idx.iter().map(|&i| global_test_scores[i]).collect();
                (pick(&first_idx), pick(&second_idx))
            };

        let first = ScoredGroup::new(
            &spec.first_label,
            first_scores,
            first_idx.iter().map(|&i| test_labels[i]).collect(),
        )
        .map_err(data_err)?;
        let second = ScoredGroup::new(
            &spec.second_label,
            second_scores,
            second_idx.iter().map(|&i| test_labels[i]).collect(),
        )
        .map_err(data_err)?;
        spec_groups.push((spec.clone(), first, second));
    }

    let overall = ScoredGroup::new("all", global_test_scores.clone(), test_labels.clone())
        .map_err(data_err)?;
    let opts = AuditOptions {
        threshold,
        equity_threshold: config.equity_threshold,
        ece_bins: 10,
    };
    let scored: Vec<SpecScored> = spec_groups
        .iter()
        .map(|(spec, first, second)| SpecScored {
            spec: spec.name.clone(),
            first: first.clone(),
            second: second.clone(),
        })
        .collect();
    let report = fairness::audit(task.name(), &model_tag, &overall, &scored, &opts)
        .map_err(data_err)?;

    // persist the model document for replayable audits
    let document = ModelDocument {
        model,
        encoding: schema,
        calibration: global_map,
        train_seed,
    };
    let model_path = match (&config.paths.model_json, &existing_doc) {
        (Some(path), None) => Some(path.clone()),
        (None, None) => Some(resolved.report_dir.join(format!("model_{model_tag}.json"))),
        _ => None,
    };
    if let Some(path) = model_path {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)
                .map_err(|e| usage_err(format!("cannot create {}: {e}", parent.display())))?;
        }
        document.save(&path).map_err(data_err)?;
    }

    Ok(AuditState {
        report,
        spec_groups,
        meta: ReportMeta { config_hash: resolved.hash.clone(), seed },
        opts,
        model_tag,
        task,
        metric_mode: config.mitigation.clone(),
        seed,
        report_dir: resolved.report_dir.clone(),
    })
}

fn map_model_err(e: ModelError) -> CliError {
    match e {
        ModelError::InvalidConfig(_) => usage_err(e),
        other => data_err(other),
    }
}

fn resolve_smote_selector(
    smote: &crate::config::SmoteConfig,
    schema: &EncodingSchema,
) -> Result<MinoritySelector, CliError> {
    match &smote.selector {
        SmoteSelectorConfig::ByLabel { value } => Ok(MinoritySelector::ByLabel { value: *value }),
        SmoteSelectorConfig::ByColumn { feature, value } => {
            let index = schema
                .feature_index(feature)
                .ok_or_else(|| usage_err(format!("unknown smote feature `{feature}`")))?;
            let encoded = schema
                .encode_token(index, value)
                .ok_or_else(|| usage_err(format!("`{value}` is not a category of `{feature}`")))?;
            Ok(MinoritySelector::ByColumn { index, value: encoded })
        }
    }
}

/// Per-group calibration: fit a map on the group's calibration-slice
/// members (identified by the same rule on the training cohort) and apply
/// it to the group's test members. Falls back to the global map when the
/// group slice cannot support a fit.
#[allow(clippy::too_many_arguments)]
fn per_group_side_scores(
    train_side_rows: &[usize],
    test_idx: &[usize],
    calibration_indices: &[usize],
    calibration_scores: &[f64],
    calibration_labels: &[u8],
    raw_test_scores: &[f64],
    method: CalibrationMethod,
    global_map: &Option<CalibrationMap>,
) -> Vec<f64> {
    let side: std::collections::HashSet<usize> = train_side_rows.iter().copied().collect();
    let mut group_scores = Vec::new();
    let mut group_labels = Vec::new();
    for (slice_pos, &train_row) in calibration_indices.iter().enumerate() {
        if side.contains(&train_row) {
            group_scores.push(calibration_scores[slice_pos]);
            group_labels.push(calibration_labels[slice_pos]);
        }
    }

    let fitted = match method {
        CalibrationMethod::Isotonic => calibrate::fit_isotonic(&group_scores, &group_labels).ok(),
        CalibrationMethod::Platt => calibrate::fit_platt(&group_scores, &group_labels).ok(),
        CalibrationMethod::None => None,
    };
    let raw: Vec<f64> = test_idx.iter().map(|&i| raw_test_scores[i]).collect();
    match fitted.or_else(|| global_map.clone()) {
        Some(map) => map.apply(&raw),
        None => raw,
    }
}

// ---------------------------------------------------------------------------
// mitigate

#[derive(Debug, Serialize)]
struct SpecMitigationRecord {
    spec: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    policy: Option<MitigationPolicy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    verification: Option<VerificationRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

struct SpecMitigation {
    record: SpecMitigationRecord,
    before: SpecAudit,
    after: Option<SpecAudit>,
}

pub fn cmd_mitigate(config_path: &Path, overrides: &Overrides) -> Result<(), CliError> {
    let state = run_audit(config::load_config(config_path)?, overrides)?;
    write_audit_reports(&state)?;

    let metric = state.metric_mode.metric;
    let mode = state.metric_mode.mode;

    let mut outcomes: Vec<SpecMitigation> = Vec::new();
    let mut successes = 0usize;
    for ((spec, first, second), before) in
        state.spec_groups.iter().zip(&state.report.specs)
    {
        match mitigate::fit_policy(first, second, metric, mode) {
            Ok(policy) => {
                let seed = config::derive_seed(state.seed, &format!("mitigate:{}", spec.name));
                let degrade = |group: &ScoredGroup| -> ScoredGroup {
                    if group.name == policy.degraded_group {
                        ScoredGroup::new(
                            &group.name,
                            mitigate::apply_policy(&policy, &group.scores, seed),
                            group.labels.clone(),
                        )
                        .expect("mitigated scores stay in [0, 1]")
                    } else {
                        group.clone()
                    }
                };
                let first_after = degrade(first);
                let second_after = degrade(second);
                let verification = mitigate::verify_policy(&policy, &first_after, &second_after);

                let after_report = fairness::audit(
                    state.task.name(),
                    &state.model_tag,
                    &first_after, // placeholder overall; only the spec rows are consumed
                    &[SpecScored {
                        spec: spec.name.clone(),
                        first: first_after.clone(),
                        second: second_after.clone(),
                    }],
                    &state.opts,
                )
                .map_err(data_err)?;

                successes += 1;
                outcomes.push(SpecMitigation {
                    record: SpecMitigationRecord {
                        spec: spec.name.clone(),
                        policy: Some(policy),
                        verification: Some(verification),
                        error: None,
                    },
                    before: before.clone(),
                    after: Some(after_report.specs[0].clone()),
                });
            }
            Err(e @ (MitigateError::Infeasible { .. } | MitigateError::SingleClass(_))) => {
                log::warn!("spec {}: {e}", spec.name);
                outcomes.push(SpecMitigation {
                    record: SpecMitigationRecord {
                        spec: spec.name.clone(),
                        policy: None,
                        verification: None,
                        error: Some(e.to_string()),
                    },
                    before: before.clone(),
                    after: None,
                });
            }
            Err(other) => return Err(data_err(other)),
        }
    }

    let base = format!("mitigation_{}_{}", state.task.name(), metric.name());
    let records: Vec<&SpecMitigationRecord> = outcomes.iter().map(|o| &o.record).collect();
    let policies_json = serde_json::to_string_pretty(&records)
        .map_err(|e| data_err(format!("cannot serialize policies: {e}")))?;
    write_file(&state.report_dir.join("mitigation_policies.json"), &(policies_json + "\n"))?;
    write_file(
        &state.report_dir.join(format!("{base}.csv")),
        &mitigation_csv(&state, &outcomes),
    )?;
    write_file(
        &state.report_dir.join(format!("{base}.md")),
        &mitigation_markdown(&state, &outcomes),
    )?;

    if successes == 0 {
        return Err(CliError::Infeasible(format!(
            "no group spec admitted a {} equalization policy",
            metric.name()
        )));
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

fn metric_csv_row(phase: &str, spec: &str, row: &GroupMetricRow, alpha: Option<f64>) -> String {
    format!(
        "{phase},{spec},{},{},{},{},{},{},{},{},{},{},\n",
        row.group,
        fmt_opt(row.auc),
        fmt_opt(row.gfnr),
        fmt_opt(row.gfpr),
        fmt_opt(row.f_score),
        fmt_opt(row.ece),
        row.n,
        row.n_pos,
        row.n_neg,
        alpha.map(|a| format!("{a:.6}")).unwrap_or_default(),
    )
}

fn ratio_csv_row(phase: &str, spec: &str, audit: &SpecAudit) -> String {
    format!(
        "{phase},{spec},{},{},{},{},{},,,,,,\n",
        audit.ratios.label,
        fmt_opt(audit.ratios.auc.value),
        fmt_opt(audit.ratios.gfnr.value),
        fmt_opt(audit.ratios.gfpr.value),
        fmt_opt(audit.ratios.f_score.value),
    )
}

fn mitigation_csv(state: &AuditState, outcomes: &[SpecMitigation]) -> String {
    let mut out = format!(
        "# fairrisk mitigation task={} model={} metric={} mode={} config={} seed={}\n",
        state.task.name(),
        state.model_tag,
        state.metric_mode.metric.name(),
        state.metric_mode.mode.name(),
        state.meta.config_hash,
        state.meta.seed
    );
    out.push_str("phase,spec,group,auc,gfnr,gfpr,f_score,ece,n,n_pos,n_neg,alpha,note\n");
    for o in outcomes {
        out.push_str(&metric_csv_row("before", &o.record.spec, &o.before.first, None));
        out.push_str(&metric_csv_row("before", &o.record.spec, &o.before.second, None));
        out.push_str(&ratio_csv_row("before_ratio", &o.record.spec, &o.before));
        match (&o.after, &o.record.policy) {
            (Some(after), Some(policy)) => {
                let alpha_for = |row: &GroupMetricRow| {
                    (row.group == policy.degraded_group).then_some(policy.alpha)
                };
                out.push_str(&metric_csv_row(
                    "after",
                    &o.record.spec,
                    &after.first,
                    alpha_for(&after.first),
                ));
                out.push_str(&metric_csv_row(
                    "after",
                    &o.record.spec,
                    &after.second,
                    alpha_for(&after.second),
                ));
                out.push_str(&ratio_csv_row("after_ratio", &o.record.spec, after));
            }
            _ => {
                out.push_str(&format!(
                    "after_error,{},,,,,,,,,,,\"{}\"\n",
                    o.record.spec,
                    o.record.error.as_deref().unwrap_or("unknown")
                ));
            }
        }
    }
    out
}

fn mitigation_markdown(state: &AuditState, outcomes: &[SpecMitigation]) -> String {
    let mut out = format!(
        "# Mitigation report — {} / {}\n\nequalized metric: **{}**, mode {}, \
         config `{}`, seed {}\n\n",
        state.task.name(),
        state.model_tag,
        state.metric_mode.metric.name(),
        state.metric_mode.mode.name(),
        state.meta.config_hash,
        state.meta.seed
    );
    let fmt_md = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "—".to_string());
    for o in outcomes {
        out.push_str(&format!("## {}\n\n", o.record.spec));
        out.push_str("| phase | group | AUC | GFNR | GFPR | F-score | ECE | n |\n");
        out.push_str("|---|---|---|---|---|---|---|---|\n");
        let row_line = |phase: &str, r: &GroupMetricRow| {
            format!(
                "| {phase} | {} | {} | {} | {} | {} | {} | {} |\n",
                r.group,
                fmt_md(r.auc),
                fmt_md(r.gfnr),
                fmt_md(r.gfpr),
                fmt_md(r.f_score),
                fmt_md(r.ece),
                r.n
            )
        };
        let ratio_line = |phase: &str, a: &SpecAudit| {
            format!(
                "| {phase} | _{} (ratio)_ | {} | {} | {} | {} | — | |\n",
                a.ratios.label,
                fmt_md(a.ratios.auc.value),
                fmt_md(a.ratios.gfnr.value),
                fmt_md(a.ratios.gfpr.value),
                fmt_md(a.ratios.f_score.value),
            )
        };
        out.push_str(&row_line("before", &o.before.first));
        out.push_str(&row_line("before", &o.before.second));
        out.push_str(&ratio_line("before", &o.before));
        match (&o.after, &o.record.policy) {
            (Some(after), Some(policy)) => {
                out.push_str(&row_line("after", &after.first));
                out.push_str(&row_line("after", &after.second));
                out.push_str(&ratio_line("after", after));
                out.push_str(&format!(
                    "\ndegraded group `{}`, alpha {:.4}, trivial rate {:.4}\n\n",
                    policy.degraded_group, policy.alpha, policy.trivial_rate
                ));
            }
            _ => {
                out.push_str(&format!(
                    "\nno feasible policy: {}\n\n",
                    o.record.error.as_deref().unwrap_or("unknown")
                ));
            }
        }
    }
    out
}
