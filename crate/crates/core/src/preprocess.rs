//! Feature encoding, standardization, and SMOTE oversampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohort::{Cohort, Gender, HsLocation, HsType, Nationality, OutcomeTask};

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("cannot fit an encoding on an empty cohort")]
    EmptyCohort,
    #[error("feature `{0}` is constant; standardization is undefined")]
    ConstantFeature(String),
    #[error("minority set is empty")]
    EmptyMinority,
    #[error("majority set is empty; oversampling ratio is undefined")]
    NoMajority,
    #[error("minority size {size} must exceed neighbor count k={k}")]
    MinorityTooSmall { size: usize, k: usize },
    #[error("target ratio {requested} is below the current minority ratio {current}")]
    TargetRatioTooLow { current: f64, requested: f64 },
    #[error("column index {index} out of bounds for width {width}")]
    ColumnOutOfBounds { index: usize, width: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureKind {
    /// 0/1 indicator; `one_token`/`zero_token` name the decoded categories.
    Binary { one_token: String, zero_token: String },
    /// Real feature standardized by training statistics.
    Standardized { mean: f64, sd: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
}

/// Per-feature encoding plan, fitted on training data only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingSchema {
    pub features: Vec<FeatureSpec>,
}

impl EncodingSchema {
    pub fn width(&self) -> usize {
        self.features.len()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    /// Decodes a binary column value back to its category token.
    pub fn decode_binary(&self, feature_index: usize, value: f64) -> Option<&str> {
        match &self.features.get(feature_index)?.kind {
            FeatureKind::Binary { one_token, zero_token } => {
                if value == 1.0 {
                    Some(one_token)
                } else if value == 0.0 {
                    Some(zero_token)
                } else {
                    None
                }
            }
            FeatureKind::Standardized { .. } => None,
        }
    }

    /// Encoded value for a category token of a binary feature.
    pub fn encode_token(&self, feature_index: usize, token: &str) -> Option<f64> {
        match &self.features.get(feature_index)?.kind {
            FeatureKind::Binary { one_token, zero_token } => {
                if token == one_token {
                    Some(1.0)
                } else if token == zero_token {
                    Some(0.0)
                } else {
                    None
                }
            }
            FeatureKind::Standardized { .. } => None,
        }
    }
}

/// Row-major feature matrix with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Vec<f64>,
    width: usize,
    labels: Vec<u8>,
    pub schema: EncodingSchema,
}

impl FeatureMatrix {
    pub fn new(
        data: Vec<f64>,
        width: usize,
        labels: Vec<u8>,
        schema: EncodingSchema,
    ) -> FeatureMatrix {
        assert!(width > 0 && data.len() == width * labels.len(), "shape mismatch");
        assert!(data.iter().all(|v| v.is_finite()), "non-finite feature value");
        assert!(labels.iter().all(|&l| l <= 1), "labels must be 0/1");
        FeatureMatrix { data, width, labels, schema }
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn label_f64(&self, i: usize) -> f64 {
        self.labels[i] as f64
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    fn push_row(&mut self, row: &[f64], label: u8) {
        debug_assert_eq!(row.len(), self.width);
        debug_assert!(row.iter().all(|v| v.is_finite()));
        self.data.extend_from_slice(row);
        self.labels.push(label);
    }

    /// New matrix holding the given rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(indices.len() * self.width);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        FeatureMatrix::new(data, self.width, labels, self.schema.clone())
    }
}

fn population_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Encodes a cohort: binary attributes as 0/1 indicators, age and grade
/// standardized. With `schema: None` the standardization statistics are
/// fitted on this cohort; otherwise the supplied (training) schema is
/// applied unchanged, so test data is standardized by training statistics.
pub fn encode(
    cohort: &Cohort,
    task: OutcomeTask,
    schema: Option<&EncodingSchema>,
) -> Result<FeatureMatrix, PreprocessError> {
    if cohort.is_empty() {
        return Err(PreprocessError::EmptyCohort);
    }

    let schema = match schema {
        Some(s) => s.clone(),
        None => {
            let fit_standardized = |name: &str, values: Vec<f64>| -> Result<FeatureKind, PreprocessError> {
                let (mean, sd) = population_sd(&values);
                if sd.is_nan() || sd <= 0.0 {
                    return Err(PreprocessError::ConstantFeature(name.to_string()));
                }
                Ok(FeatureKind::Standardized { mean, sd })
            };
            let ages: Vec<f64> = cohort.records.iter().map(|r| r.age as f64).collect();
            let grades: Vec<f64> = cohort.records.iter().map(|r| r.admission_grade).collect();
            EncodingSchema {
                features: vec![
                    FeatureSpec {
                        name: "gender".to_string(),
                        kind: FeatureKind::Binary {
                            one_token: Gender::Female.token().to_string(),
                            zero_token: Gender::Male.token().to_string(),
                        },
                    },
                    FeatureSpec {
                        name: "nationality".to_string(),
                        kind: FeatureKind::Binary {
                            one_token: Nationality::Foreign.token().to_string(),
                            zero_token: Nationality::National.token().to_string(),
                        },
                    },
                    FeatureSpec {
                        name: "hs_location".to_string(),
                        kind: FeatureKind::Binary {
                            one_token: HsLocation::InState.token().to_string(),
                            zero_token: HsLocation::OutOfState.token().to_string(),
                        },
                    },
                    FeatureSpec {
                        name: "hs_type".to_string(),
                        kind: FeatureKind::Binary {
                            one_token: HsType::Public.token().to_string(),
                            zero_token: HsType::NonPublic.token().to_string(),
                        },
                    },
                    FeatureSpec {
                        name: "age".to_string(),
                        kind: fit_standardized("age", ages)?,
                    },
                    FeatureSpec {
                        name: "admission_grade".to_string(),
                        kind: fit_standardized("admission_grade", grades)?,
                    },
                ],
            }
        }
    };

    let width = schema.width();
    let mut data = Vec::with_capacity(width * cohort.len());
    let mut labels = Vec::with_capacity(cohort.len());
    for r in &cohort.records {
        for spec in &schema.features {
            let v = match (&spec.kind, spec.name.as_str()) {
                (FeatureKind::Binary { .. }, "gender") => (r.gender == Gender::Female) as u8 as f64,
                (FeatureKind::Binary { .. }, "nationality") => {
                    (r.nationality == Nationality::Foreign) as u8 as f64
                }
                (FeatureKind::Binary { .. }, "hs_location") => {
                    (r.hs_location == HsLocation::InState) as u8 as f64
                }
                (FeatureKind::Binary { .. }, "hs_type") => {
                    (r.hs_type == HsType::Public) as u8 as f64
                }
                (FeatureKind::Standardized { mean, sd }, "age") => (r.age as f64 - mean) / sd,
                (FeatureKind::Standardized { mean, sd }, "admission_grade") => {
                    (r.admission_grade - mean) / sd
                }
                _ => unreachable!("unknown feature {}", spec.name),
            };
            data.push(v);
        }
        labels.push(task.label(r) as u8);
    }

    Ok(FeatureMatrix::new(data, width, labels, schema))
}

/// How the minority set is selected for oversampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MinoritySelector {
    /// Conventional class balancing on the outcome label.
    ByLabel { value: u8 },
    /// Balancing on an encoded feature column (e.g. a demographic
    /// attribute). Interpolation is stratified by outcome label within the
    /// minority so the subgroup's label distribution is preserved.
    ByColumn { index: usize, value: f64 },
}

/// SMOTE oversampling. Appends synthetic rows until the minority/majority
/// count ratio reaches `target_ratio`; each synthetic row sits on the
/// segment between a minority row and one of its k nearest minority
/// neighbors (Euclidean, ties broken by lowest row index), with the mixing
/// coefficient drawn uniformly. Deterministic given `seed`. Original rows
/// are preserved verbatim and precede all synthetic rows.
pub fn smote(
    matrix: &FeatureMatrix,
    selector: MinoritySelector,
    k: usize,
    target_ratio: f64,
    seed: u64,
) -> Result<FeatureMatrix, PreprocessError> {
    if let MinoritySelector::ByColumn { index, .. } = selector {
        if index >= matrix.width() {
            return Err(PreprocessError::ColumnOutOfBounds {
                index,
                width: matrix.width(),
            });
        }
    }
    let is_minority = |i: usize| -> bool {
        match selector {
            MinoritySelector::ByLabel { value } => matrix.labels()[i] == value,
            MinoritySelector::ByColumn { index, value } => matrix.row(i)[index] == value,
        }
    };

    let minority: Vec<usize> = (0..matrix.n_rows()).filter(|&i| is_minority(i)).collect();
    if minority.is_empty() {
        return Err(PreprocessError::EmptyMinority);
    }
    if minority.len() <= k {
        return Err(PreprocessError::MinorityTooSmall { size: minority.len(), k });
    }
    let majority_count = matrix.n_rows() - minority.len();
    if majority_count == 0 {
        return Err(PreprocessError::NoMajority);
    }
    let current = minority.len() as f64 / majority_count as f64;
    if target_ratio < current {
        return Err(PreprocessError::TargetRatioTooLow { current, requested: target_ratio });
    }

    let wanted = (target_ratio * majority_count as f64).round() as usize;
    let n_add = wanted.saturating_sub(minority.len());
    let mut out = matrix.clone();
    if n_add == 0 {
        return Ok(out);
    }

    // Stratify by label within the minority so interpolation never crosses
    // outcome labels; by-label selection yields a single stratum.
    let strata: Vec<Vec<usize>> = match selector {
        MinoritySelector::ByLabel { .. } => vec![minority],
        MinoritySelector::ByColumn { .. } => {
            let mut by_label = vec![Vec::new(), Vec::new()];
            for &i in &minority {
                by_label[matrix.labels()[i] as usize].push(i);
            }
            by_label.into_iter().filter(|s| !s.is_empty()).collect()
        }
    };
    let quotas = largest_remainder_quotas(n_add, &strata);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (stratum, quota) in strata.iter().zip(quotas) {
        if quota == 0 {
            continue;
        }
        if stratum.len() == 1 {
            // Degenerate stratum: nothing to interpolate toward, so the
            // synthetic rows are copies.
            let row = matrix.row(stratum[0]).to_vec();
            let label = matrix.labels()[stratum[0]];
            for _ in 0..quota {
                out.push_row(&row, label);
            }
            continue;
        }
        let k_eff = k.min(stratum.len() - 1);
        let neighbors = k_nearest(matrix, stratum, k_eff);
        for j in 0..quota {
            let s = j % stratum.len();
            let seed_row = matrix.row(stratum[s]);
            let nn = neighbors[s][rng.random_range(0..k_eff)];
            let nn_row = matrix.row(nn);
            let lambda: f64 = rng.random();
            let synth: Vec<f64> = seed_row
                .iter()
                .zip(nn_row)
                .map(|(a, b)| a + lambda * (b - a))
                .collect();
            out.push_row(&synth, matrix.labels()[stratum[s]]);
        }
    }

    Ok(out)
}

fn largest_remainder_quotas(total: usize, strata: &[Vec<usize>]) -> Vec<usize> {
    let pool: usize = strata.iter().map(|s| s.len()).sum();
    let exact: Vec<f64> = strata
        .iter()
        .map(|s| total as f64 * s.len() as f64 / pool as f64)
        .collect();
    let mut quotas: Vec<usize> = exact.iter().map(|&e| e.floor() as usize).collect();
    let mut leftover = total - quotas.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..strata.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for i in order {
        if leftover == 0 {
            break;
        }
        quotas[i] += 1;
        leftover -= 1;
    }
    quotas
}

/// k nearest stratum members for each stratum member, excluding itself.
/// Distance ties resolve to the lowest row index.
fn k_nearest(matrix: &FeatureMatrix, stratum: &[usize], k: usize) -> Vec<Vec<usize>> {
    stratum
        .iter()
        .map(|&i| {
            let xi = matrix.row(i);
            let mut candidates: Vec<(f64, usize)> = stratum
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| {
                    let d2: f64 = xi
                        .iter()
                        .zip(matrix.row(j))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    (d2, j)
                })
                .collect();
            candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            candidates.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::StudentRecord;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn record(id: &str, gender: Gender, age: u32, grade: f64, dropout: bool) -> StudentRecord {
        StudentRecord {
            id: id.to_string(),
            year: 2009,
            gender,
            age,
            nationality: Nationality::National,
            hs_location: HsLocation::InState,
            hs_type: HsType::Public,
            admission_grade: grade,
            dropout,
            underperform: false,
        }
    }

    fn five_record_cohort() -> Cohort {
        Cohort {
            records: vec![
                record("a", Gender::Male, 18, 8.0, false),
                record("b", Gender::Female, 19, 9.0, true),
                record("c", Gender::Male, 20, 10.0, false),
                record("d", Gender::Male, 21, 11.0, true),
                record("e", Gender::Male, 22, 12.0, false),
            ],
            grade_scale: (5.0, 14.0),
        }
    }

    #[test]
    fn single_record_cohort_cannot_fit() {
        let cohort = Cohort {
            records: vec![record("a", Gender::Male, 18, 9.0, false)],
            grade_scale: (5.0, 14.0),
        };
        let err = encode(&cohort, OutcomeTask::Dropout, None).unwrap_err();
        assert!(matches!(err, PreprocessError::ConstantFeature(_)));
    }

    #[test]
    fn constant_grade_is_rejected() {
        let cohort = Cohort {
            records: vec![
                record("a", Gender::Male, 18, 9.0, false),
                record("b", Gender::Male, 19, 9.0, true),
            ],
            grade_scale: (5.0, 14.0),
        };
        let err = encode(&cohort, OutcomeTask::Dropout, None).unwrap_err();
        assert!(matches!(err, PreprocessError::ConstantFeature(name) if name == "admission_grade"));
    }

    #[test]
    fn training_schema_standardizes_test_data() {
        let train = five_record_cohort();
        // hand statistics: ages 18..22 -> mean 20, population sd sqrt(2);
        // grades 8..12 -> mean 10, population sd sqrt(2)
        let matrix = encode(&train, OutcomeTask::Dropout, None).unwrap();
        let schema = matrix.schema.clone();
        match schema.features[4].kind {
            FeatureKind::Standardized { mean, sd } => {
                assert!((mean - 20.0).abs() < 1e-12);
                assert!((sd - 2.0f64.sqrt()).abs() < 1e-12);
            }
            _ => panic!("age must be standardized"),
        }

        let test = Cohort {
            records: vec![record("x", Gender::Male, 24, 13.0, false)],
            grade_scale: (5.0, 14.0),
        };
        let test_matrix = encode(&test, OutcomeTask::Dropout, Some(&schema)).unwrap();
        let row = test_matrix.row(0);
        assert!((row[4] - (24.0 - 20.0) / 2.0f64.sqrt()).abs() < 1e-12);
        assert!((row[5] - (13.0 - 10.0) / 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn labels_follow_task() {
        let mut cohort = five_record_cohort();
        cohort.records[0].underperform = true;
        let dropout = encode(&cohort, OutcomeTask::Dropout, None).unwrap();
        let either = encode(&cohort, OutcomeTask::DropoutOrUnderperformance, None).unwrap();
        assert_eq!(dropout.labels(), &[0, 1, 0, 1, 0]);
        assert_eq!(either.labels(), &[1, 1, 0, 1, 0]);
    }

    #[test]
    fn binary_columns_round_trip() {
        let cohort = five_record_cohort();
        let matrix = encode(&cohort, OutcomeTask::Dropout, None).unwrap();
        for (i, r) in cohort.records.iter().enumerate() {
            let row = matrix.row(i);
            assert_eq!(matrix.schema.decode_binary(0, row[0]), Some(r.gender.token()));
            assert_eq!(
                matrix.schema.decode_binary(1, row[1]),
                Some(r.nationality.token())
            );
            assert_eq!(
                matrix.schema.decode_binary(2, row[2]),
                Some(r.hs_location.token())
            );
            assert_eq!(matrix.schema.decode_binary(3, row[3]), Some(r.hs_type.token()));
        }
    }

    fn toy_matrix(rows: Vec<(Vec<f64>, u8)>) -> FeatureMatrix {
        let width = rows[0].0.len();
        let schema = EncodingSchema {
            features: (0..width)
                .map(|i| FeatureSpec {
                    name: format!("f{i}"),
                    kind: FeatureKind::Standardized { mean: 0.0, sd: 1.0 },
                })
                .collect(),
        };
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for (row, label) in rows {
            data.extend(row);
            labels.push(label);
        }
        FeatureMatrix::new(data, width, labels, schema)
    }

    #[test]
    fn identical_minority_rows_synthesize_themselves() {
        let matrix = toy_matrix(vec![
            (vec![3.0, 3.0], 1),
            (vec![3.0, 3.0], 1),
            (vec![0.0, 0.0], 0),
            (vec![0.1, 0.0], 0),
            (vec![0.0, 0.1], 0),
        ]);
        let out = smote(&matrix, MinoritySelector::ByLabel { value: 1 }, 1, 1.0, 9).unwrap();
        assert_eq!(out.n_rows(), 6);
        assert_eq!(out.row(5), &[3.0, 3.0]);
        assert_eq!(out.labels()[5], 1);
    }

    #[test]
    fn synthetic_row_replays_seeded_lambda() {
        let matrix = toy_matrix(vec![
            (vec![0.0, 0.0], 1),
            (vec![1.0, 1.0], 1),
            (vec![5.0, 5.0], 0),
            (vec![5.0, 6.0], 0),
            (vec![6.0, 5.0], 0),
        ]);
        let seed = 21;
        let out = smote(&matrix, MinoritySelector::ByLabel { value: 1 }, 1, 1.0, seed).unwrap();
        assert_eq!(out.n_rows(), 6);

        // replay the generator's draw order: neighbor index, then lambda
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let _nn: usize = rng.random_range(0..1);
        let lambda: f64 = rng.random();
        assert_eq!(out.row(5), &[lambda, lambda]);
    }

    #[test]
    fn by_column_balances_the_column() {
        // 2 female rows (index 0 == 1.0) vs 18 male rows
        let mut rows = Vec::new();
        for i in 0..2 {
            rows.push((vec![1.0, i as f64 * 0.25], i as u8));
        }
        for i in 0..18 {
            rows.push((vec![0.0, i as f64 * 0.1], (i % 2) as u8));
        }
        let matrix = toy_matrix(rows);
        let out = smote(&matrix, MinoritySelector::ByColumn { index: 0, value: 1.0 }, 1, 1.0, 5).unwrap();
        let female = (0..out.n_rows()).filter(|&i| out.row(i)[0] == 1.0).count();
        assert_eq!(female, 18);
        assert!((female as f64 / out.n_rows() as f64 - 0.5).abs() <= 1.0 / out.n_rows() as f64);
    }

    #[test]
    fn by_column_preserves_label_distribution() {
        // female rows: 3 negative, 1 positive; quota allocation must keep ~3:1
        let mut rows = vec![
            (vec![1.0, 0.0], 0),
            (vec![1.0, 0.2], 0),
            (vec![1.0, 0.4], 0),
            (vec![1.0, 0.6], 1),
        ];
        for i in 0..36 {
            rows.push((vec![0.0, i as f64 * 0.05], (i % 2) as u8));
        }
        let matrix = toy_matrix(rows);
        let out = smote(&matrix, MinoritySelector::ByColumn { index: 0, value: 1.0 }, 2, 1.0, 5).unwrap();
        let female_rows: Vec<usize> = (0..out.n_rows()).filter(|&i| out.row(i)[0] == 1.0).collect();
        assert_eq!(female_rows.len(), 36);
        let female_pos = female_rows.iter().filter(|&&i| out.labels()[i] == 1).count();
        // 1/4 positive, largest-remainder allocation keeps it exact: 9 of 36
        assert_eq!(female_pos, 9);
    }

    #[test]
    fn smote_error_paths() {
        let matrix = toy_matrix(vec![
            (vec![0.0], 1),
            (vec![1.0], 0),
            (vec![2.0], 0),
        ]);
        assert!(matches!(
            smote(&matrix, MinoritySelector::ByLabel { value: 1 }, 1, 1.0, 0).unwrap_err(),
            PreprocessError::MinorityTooSmall { size: 1, k: 1 }
        ));
        assert!(matches!(
            smote(&matrix, MinoritySelector::ByColumn { index: 0, value: 7.0 }, 0, 1.0, 0)
                .unwrap_err(),
            PreprocessError::EmptyMinority
        ));
        let all_minority = toy_matrix(vec![(vec![0.0], 1), (vec![1.0], 1)]);
        assert!(matches!(
            smote(&all_minority, MinoritySelector::ByLabel { value: 1 }, 1, 1.0, 0).unwrap_err(),
            PreprocessError::NoMajority
        ));
        let balanced = toy_matrix(vec![
            (vec![0.0], 1),
            (vec![0.5], 1),
            (vec![1.0], 0),
        ]);
        assert!(matches!(
            smote(&balanced, MinoritySelector::ByLabel { value: 1 }, 1, 0.5, 0).unwrap_err(),
            PreprocessError::TargetRatioTooLow { .. }
        ));
    }

    #[test]
    fn originals_precede_synthetics_verbatim() {
        let matrix = toy_matrix(vec![
            (vec![0.0, 1.0], 1),
            (vec![1.0, 0.0], 1),
            (vec![0.5, 0.5], 1),
            (vec![9.0, 9.0], 0),
            (vec![9.5, 9.0], 0),
            (vec![9.0, 9.5], 0),
            (vec![9.5, 9.5], 0),
        ]);
        let out = smote(&matrix, MinoritySelector::ByLabel { value: 1 }, 2, 1.0, 3).unwrap();
        assert_eq!(out.n_rows(), 8);
        for i in 0..matrix.n_rows() {
            assert_eq!(out.row(i), matrix.row(i));
            assert_eq!(out.labels()[i], matrix.labels()[i]);
        }
    }
}
