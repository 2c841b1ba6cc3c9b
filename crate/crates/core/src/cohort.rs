//! Student cohort data model: CSV ingestion, outcome labeling, temporal
//! splitting, and binary group partitioning.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Canonical CSV column names, in file order.
pub const CSV_COLUMNS: [&str; 10] = [
    "id",
    "year",
    "gender",
    "age",
    "nationality",
    "hs_location",
    "hs_type",
    "admission_grade",
    "dropout",
    "underperform",
];

#[derive(Debug, Error)]
pub enum CohortError {
    #[error("missing column `{0}` in cohort CSV")]
    MissingColumn(String),
    #[error("row {row}: unparseable value for `{column}`: {detail}")]
    UnparseableValue {
        row: usize,
        column: String,
        detail: String,
    },
    #[error("duplicate id `{id}` at rows {first_row} and {second_row}")]
    DuplicateId {
        id: String,
        first_row: usize,
        second_row: usize,
    },
    #[error("row {row}: {detail}")]
    InvalidRecord { row: usize, detail: String },
    #[error("train and test year sets overlap: {0:?}")]
    OverlappingYears(Vec<i32>),
    #[error("temporal split produced an empty {0} side")]
    EmptySplitSide(&'static str),
    #[error("group rule {rule} cannot be applied to attribute `{attr}`")]
    AttributeMismatch { rule: &'static str, attr: String },
    #[error("`{value}` is not a valid value for attribute `{attr}`")]
    InvalidAttributeValue { attr: String, value: String },
    #[error("median-of-training cutoff requested but the training reference is empty")]
    EmptyTrainingReference,
    #[error("empty index set")]
    EmptyIndices,
    #[error("index {0} out of bounds for cohort of {1} records")]
    IndexOutOfBounds(usize, usize),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Female,
    Male,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nationality {
    National,
    Foreign,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HsLocation {
    InState,
    OutOfState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HsType {
    Public,
    NonPublic,
}

macro_rules! token_impl {
    ($ty:ty, $(($variant:path, $token:literal)),+) => {
        impl $ty {
            pub fn token(self) -> &'static str {
                match self {
                    $($variant => $token,)+
                }
            }

            pub fn from_token(s: &str) -> Option<Self> {
                match s {
                    $($token => Some($variant),)+
                    _ => None,
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.token())
            }
        }
    };
}

token_impl!(Gender, (Gender::Female, "female"), (Gender::Male, "male"));
token_impl!(
    Nationality,
    (Nationality::National, "national"),
    (Nationality::Foreign, "foreign")
);
token_impl!(
    HsLocation,
    (HsLocation::InState, "in_state"),
    (HsLocation::OutOfState, "out_of_state")
);
token_impl!(
    HsType,
    (HsType::Public, "public"),
    (HsType::NonPublic, "non_public")
);

/// One student's enrollment-time features and binary outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentRecord {
    pub id: String,
    pub year: i32,
    pub gender: Gender,
    pub age: u32,
    pub nationality: Nationality,
    pub hs_location: HsLocation,
    pub hs_type: HsType,
    pub admission_grade: f64,
    pub dropout: bool,
    pub underperform: bool,
}

impl StudentRecord {
    /// Checks record invariants against the cohort's grade scale.
    /// Dropout and underperformance are disjoint outcomes: underperform
    /// may be set only when dropout is not.
    pub fn validate(&self, grade_scale: (f64, f64)) -> Result<(), String> {
        if !self.admission_grade.is_finite() {
            return Err(format!("admission_grade {} is not finite", self.admission_grade));
        }
        if self.admission_grade < grade_scale.0 || self.admission_grade > grade_scale.1 {
            return Err(format!(
                "admission_grade {} outside scale [{}, {}]",
                self.admission_grade, grade_scale.0, grade_scale.1
            ));
        }
        if self.dropout && self.underperform {
            return Err("dropout and underperform are disjoint outcomes; both set".to_string());
        }
        Ok(())
    }
}

/// An ordered collection of student records sharing one grade scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    pub records: Vec<StudentRecord>,
    pub grade_scale: (f64, f64),
}

impl Cohort {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// The two prediction targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeTask {
    Dropout,
    DropoutOrUnderperformance,
}

impl OutcomeTask {
    pub fn label(self, record: &StudentRecord) -> bool {
        match self {
            OutcomeTask::Dropout => record.dropout,
            OutcomeTask::DropoutOrUnderperformance => record.dropout || record.underperform,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OutcomeTask::Dropout => "dropout",
            OutcomeTask::DropoutOrUnderperformance => "dropout_or_underperformance",
        }
    }
}

/// Record attributes a group rule may reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    Gender,
    Age,
    Nationality,
    HsLocation,
    HsType,
    AdmissionGrade,
}

impl Attribute {
    pub fn name(self) -> &'static str {
        match self {
            Attribute::Gender => "gender",
            Attribute::Age => "age",
            Attribute::Nationality => "nationality",
            Attribute::HsLocation => "hs_location",
            Attribute::HsType => "hs_type",
            Attribute::AdmissionGrade => "admission_grade",
        }
    }

    /// Categorical token of this attribute, if it is categorical.
    pub fn token(self, record: &StudentRecord) -> Option<&'static str> {
        match self {
            Attribute::Gender => Some(record.gender.token()),
            Attribute::Nationality => Some(record.nationality.token()),
            Attribute::HsLocation => Some(record.hs_location.token()),
            Attribute::HsType => Some(record.hs_type.token()),
            Attribute::Age | Attribute::AdmissionGrade => None,
        }
    }

    /// Numeric value of this attribute, if it is numeric.
    pub fn numeric(self, record: &StudentRecord) -> Option<f64> {
        match self {
            Attribute::Age => Some(record.age as f64),
            Attribute::AdmissionGrade => Some(record.admission_grade),
            _ => None,
        }
    }

    fn valid_token(self, value: &str) -> bool {
        match self {
            Attribute::Gender => Gender::from_token(value).is_some(),
            Attribute::Nationality => Nationality::from_token(value).is_some(),
            Attribute::HsLocation => HsLocation::from_token(value).is_some(),
            Attribute::HsType => HsType::from_token(value).is_some(),
            Attribute::Age | Attribute::AdmissionGrade => false,
        }
    }
}

/// Where a threshold rule's cutoff comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CutoffSource {
    Fixed { value: f64 },
    MedianOfTraining,
}

/// Which side of a threshold forms the first group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// First group: value <= cutoff. Ties at the cutoff land here.
    Le,
    /// First group: value > cutoff.
    Gt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroupRule {
    AttributeEquals { attr: Attribute, value: String },
    Threshold {
        attr: Attribute,
        cutoff: CutoffSource,
        direction: Direction,
    },
}

/// A named rule that partitions any cohort into two disjoint, exhaustive
/// groups. `first_label`/`second_label` name the matching and
/// non-matching sides for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub name: String,
    pub first_label: String,
    pub second_label: String,
    pub rule: GroupRule,
}

impl GroupSpec {
    pub fn attribute_equals(
        name: &str,
        first_label: &str,
        second_label: &str,
        attr: Attribute,
        value: &str,
    ) -> Self {
        GroupSpec {
            name: name.to_string(),
            first_label: first_label.to_string(),
            second_label: second_label.to_string(),
            rule: GroupRule::AttributeEquals {
                attr,
                value: value.to_string(),
            },
        }
    }

    pub fn threshold(
        name: &str,
        first_label: &str,
        second_label: &str,
        attr: Attribute,
        cutoff: CutoffSource,
        direction: Direction,
    ) -> Self {
        GroupSpec {
            name: name.to_string(),
            first_label: first_label.to_string(),
            second_label: second_label.to_string(),
            rule: GroupRule::Threshold {
                attr,
                cutoff,
                direction,
            },
        }
    }

    /// The five audited partitions, in report order. Numeric cutoffs use
    /// the training median for the admission grade; the default audit set
    /// does not include the age partition, but [`age_spec`] builds one.
    pub fn default_audit_specs() -> Vec<GroupSpec> {
        vec![
            GroupSpec::attribute_equals(
                "nationality",
                "nationals",
                "foreigners",
                Attribute::Nationality,
                "national",
            ),
            GroupSpec::attribute_equals(
                "hs_location",
                "state_highschool",
                "nonstate_highschool",
                Attribute::HsLocation,
                "in_state",
            ),
            GroupSpec::attribute_equals(
                "hs_type",
                "public_highschool",
                "nonpublic_highschool",
                Attribute::HsType,
                "public",
            ),
            GroupSpec::threshold(
                "admission_grade",
                "low_admission_grade",
                "high_admission_grade",
                Attribute::AdmissionGrade,
                CutoffSource::MedianOfTraining,
                Direction::Le,
            ),
            GroupSpec::attribute_equals("gender", "male", "female", Attribute::Gender, "male"),
        ]
    }

    /// Age partition at the usual enrollment-age cutoff of 19 years.
    pub fn age_spec() -> GroupSpec {
        GroupSpec::threshold(
            "age",
            "age_le_19",
            "age_gt_19",
            Attribute::Age,
            CutoffSource::Fixed { value: 19.0 },
            Direction::Le,
        )
    }
}

/// Row-filter flags and validation bounds applied at load time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoadOptions {
    /// Drop rows whose admission grade cell is empty instead of failing.
    pub drop_missing_grade: bool,
    /// Drop rows whose outcome cells are empty instead of failing.
    pub drop_missing_outcome: bool,
    pub grade_scale: (f64, f64),
    pub year_range: (i32, i32),
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            drop_missing_grade: false,
            drop_missing_outcome: false,
            grade_scale: (5.0, 14.0),
            year_range: (1900, 2100),
        }
    }
}

/// A row dropped by a load-time filter flag.
#[derive(Debug, Clone, Serialize)]
pub struct LoadDiagnostic {
    /// 1-based data row number (header excluded).
    pub row: usize,
    pub id: Option<String>,
    pub reason: String,
}

#[derive(Debug)]
pub struct LoadOutcome {
    pub cohort: Cohort,
    pub diagnostics: Vec<LoadDiagnostic>,
}

/// Loads a cohort CSV. `schema` optionally maps the file's column names
/// to the canonical names in [`CSV_COLUMNS`]; canonical headers pass
/// through unchanged and unknown columns are ignored.
pub fn load_cohort(
    path: &Path,
    schema: Option<&HashMap<String, String>>,
    options: &LoadOptions,
) -> Result<LoadOutcome, CohortError> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();

    let canonical = |h: &str| -> String {
        match schema.and_then(|m| m.get(h)) {
            Some(name) => name.clone(),
            None => h.to_string(),
        }
    };
    let mut col_index: HashMap<String, usize> = HashMap::new();
    for (i, h) in headers.iter().enumerate() {
        col_index.entry(canonical(h)).or_insert(i);
    }
    for required in CSV_COLUMNS {
        if !col_index.contains_key(required) {
            return Err(CohortError::MissingColumn(required.to_string()));
        }
    }

    let field = |record: &csv::StringRecord, name: &str| -> String {
        record.get(col_index[name]).unwrap_or("").trim().to_string()
    };

    let mut records = Vec::new();
    let mut diagnostics = Vec::new();
    let mut seen_ids: HashMap<String, usize> = HashMap::new();

    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row = row?;
        let id = field(&row, "id");
        let grade_cell = field(&row, "admission_grade");
        let dropout_cell = field(&row, "dropout");
        let underperform_cell = field(&row, "underperform");

        if grade_cell.is_empty() && options.drop_missing_grade {
            diagnostics.push(LoadDiagnostic {
                row: row_no,
                id: if id.is_empty() { None } else { Some(id) },
                reason: "missing admission grade".to_string(),
            });
            continue;
        }
        if (dropout_cell.is_empty() || underperform_cell.is_empty()) && options.drop_missing_outcome
        {
            diagnostics.push(LoadDiagnostic {
                row: row_no,
                id: if id.is_empty() { None } else { Some(id) },
                reason: "missing outcome data".to_string(),
            });
            continue;
        }

        let record = parse_record(&row, row_no, &field, options)?;
        if let Some(&first_row) = seen_ids.get(&record.id) {
            return Err(CohortError::DuplicateId {
                id: record.id,
                first_row,
                second_row: row_no,
            });
        }
        seen_ids.insert(record.id.clone(), row_no);
        records.push(record);
    }

    Ok(LoadOutcome {
        cohort: Cohort {
            records,
            grade_scale: options.grade_scale,
        },
        diagnostics,
    })
}

fn parse_record(
    row: &csv::StringRecord,
    row_no: usize,
    field: &dyn Fn(&csv::StringRecord, &str) -> String,
    options: &LoadOptions,
) -> Result<StudentRecord, CohortError> {
    fn bad(row: usize, column: &str, detail: impl Into<String>) -> CohortError {
        CohortError::UnparseableValue {
            row,
            column: column.to_string(),
            detail: detail.into(),
        }
    }

    let id = field(row, "id");
    if id.is_empty() {
        return Err(bad(row_no, "id", "empty"));
    }
    let year: i32 = field(row, "year")
        .parse()
        .map_err(|e| bad(row_no, "year", format!("{e}")))?;
    if year < options.year_range.0 || year > options.year_range.1 {
        return Err(CohortError::InvalidRecord {
            row: row_no,
            detail: format!(
                "year {} outside declared range [{}, {}]",
                year, options.year_range.0, options.year_range.1
            ),
        });
    }
    let gender = Gender::from_token(&field(row, "gender"))
        .ok_or_else(|| bad(row_no, "gender", field(row, "gender")))?;
    let age: u32 = field(row, "age")
        .parse()
        .map_err(|e| bad(row_no, "age", format!("{e}")))?;
    let nationality = Nationality::from_token(&field(row, "nationality"))
        .ok_or_else(|| bad(row_no, "nationality", field(row, "nationality")))?;
    let hs_location = HsLocation::from_token(&field(row, "hs_location"))
        .ok_or_else(|| bad(row_no, "hs_location", field(row, "hs_location")))?;
    let hs_type = HsType::from_token(&field(row, "hs_type"))
        .ok_or_else(|| bad(row_no, "hs_type", field(row, "hs_type")))?;
    let admission_grade: f64 = field(row, "admission_grade")
        .parse()
        .map_err(|e| bad(row_no, "admission_grade", format!("{e}")))?;
    let parse_flag = |column: &str| -> Result<bool, CohortError> {
        match field(row, column).as_str() {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(bad(row_no, column, format!("expected 0/1, got `{other}`"))),
        }
    };
    let dropout = parse_flag("dropout")?;
    let underperform = parse_flag("underperform")?;

    let record = StudentRecord {
        id,
        year,
        gender,
        age,
        nationality,
        hs_location,
        hs_type,
        admission_grade,
        dropout,
        underperform,
    };
    record
        .validate(options.grade_scale)
        .map_err(|detail| CohortError::InvalidRecord { row: row_no, detail })?;
    Ok(record)
}

/// Writes a cohort in the canonical CSV layout.
pub fn write_cohort_csv(cohort: &Cohort, path: &Path) -> Result<(), CohortError> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(CSV_COLUMNS)?;
    for r in &cohort.records {
        writer.write_record([
            r.id.as_str(),
            &r.year.to_string(),
            r.gender.token(),
            &r.age.to_string(),
            r.nationality.token(),
            r.hs_location.token(),
            r.hs_type.token(),
            &format_grade(r.admission_grade),
            if r.dropout { "1" } else { "0" },
            if r.underperform { "1" } else { "0" },
        ])?;
    }
    writer.flush()?;
    Ok(())
}

fn format_grade(g: f64) -> String {
    // Shortest representation that round-trips in f64.
    let mut s = format!("{g}");
    if !s.contains('.') && !s.contains('e') {
        s.push_str(".0");
    }
    s
}

/// Splits a cohort by enrollment year. Records in neither year set are
/// excluded. The year sets must be disjoint and both sides nonempty.
pub fn temporal_split(
    cohort: &Cohort,
    train_years: &[i32],
    test_years: &[i32],
) -> Result<(Cohort, Cohort), CohortError> {
    let train: BTreeSet<i32> = train_years.iter().copied().collect();
    let test: BTreeSet<i32> = test_years.iter().copied().collect();
    let overlap: Vec<i32> = train.intersection(&test).copied().collect();
    if !overlap.is_empty() {
        return Err(CohortError::OverlappingYears(overlap));
    }

    let mut train_records = Vec::new();
    let mut test_records = Vec::new();
    for r in &cohort.records {
        if train.contains(&r.year) {
            train_records.push(r.clone());
        } else if test.contains(&r.year) {
            test_records.push(r.clone());
        }
    }
    if train_records.is_empty() {
        return Err(CohortError::EmptySplitSide("train"));
    }
    if test_records.is_empty() {
        return Err(CohortError::EmptySplitSide("test"));
    }
    Ok((
        Cohort {
            records: train_records,
            grade_scale: cohort.grade_scale,
        },
        Cohort {
            records: test_records,
            grade_scale: cohort.grade_scale,
        },
    ))
}

/// Median with the even-count convention of averaging the middle two.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite value in median"));
    let n = sorted.len();
    Some(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    })
}

/// Resolves a spec's cutoff against the training reference.
pub fn resolve_cutoff(
    spec: &GroupSpec,
    training_reference: &Cohort,
) -> Result<Option<f64>, CohortError> {
    match &spec.rule {
        GroupRule::AttributeEquals { .. } => Ok(None),
        GroupRule::Threshold { attr, cutoff, .. } => match cutoff {
            CutoffSource::Fixed { value } => Ok(Some(*value)),
            CutoffSource::MedianOfTraining => {
                let values: Vec<f64> = training_reference
                    .records
                    .iter()
                    .filter_map(|r| attr.numeric(r))
                    .collect();
                median(&values)
                    .map(Some)
                    .ok_or(CohortError::EmptyTrainingReference)
            }
        },
    }
}

type RecordMatcher = Box<dyn Fn(&StudentRecord) -> Result<bool, CohortError>>;

/// Partitions a cohort into (matching, non-matching) index sets under the
/// spec's rule. Median cutoffs are computed on `training_reference` and
/// reused for the partitioned cohort, never refit.
pub fn partition(
    cohort: &Cohort,
    spec: &GroupSpec,
    training_reference: &Cohort,
) -> Result<(Vec<usize>, Vec<usize>), CohortError> {
    let matcher: RecordMatcher = match &spec.rule {
        GroupRule::AttributeEquals { attr, value } => {
            if attr.numeric(&dummy_record()).is_some() {
                return Err(CohortError::AttributeMismatch {
                    rule: "attribute_equals",
                    attr: attr.name().to_string(),
                });
            }
            if !attr.valid_token(value) {
                return Err(CohortError::InvalidAttributeValue {
                    attr: attr.name().to_string(),
                    value: value.clone(),
                });
            }
            let attr = *attr;
            let value = value.clone();
            Box::new(move |r| Ok(attr.token(r) == Some(value.as_str())))
        }
        GroupRule::Threshold { attr, direction, .. } => {
            if attr.numeric(&dummy_record()).is_none() {
                return Err(CohortError::AttributeMismatch {
                    rule: "threshold",
                    attr: attr.name().to_string(),
                });
            }
            let cutoff = resolve_cutoff(spec, training_reference)?
                .expect("threshold rule always yields a cutoff");
            let attr = *attr;
            let direction = *direction;
            Box::new(move |r| {
                let v = attr.numeric(r).expect("numeric attribute");
                Ok(match direction {
                    Direction::Le => v <= cutoff,
                    Direction::Gt => v > cutoff,
                })
            })
        }
    };

    let mut first = Vec::new();
    let mut second = Vec::new();
    for (i, r) in cohort.records.iter().enumerate() {
        if matcher(r)? {
            first.push(i);
        } else {
            second.push(i);
        }
    }
    Ok((first, second))
}

fn dummy_record() -> StudentRecord {
    StudentRecord {
        id: String::new(),
        year: 2009,
        gender: Gender::Male,
        age: 18,
        nationality: Nationality::National,
        hs_location: HsLocation::InState,
        hs_type: HsType::Public,
        admission_grade: 9.0,
        dropout: false,
        underperform: false,
    }
}

/// Fraction of positive labels for `task` over the given record indices.
pub fn base_rate(
    cohort: &Cohort,
    task: OutcomeTask,
    indices: &[usize],
) -> Result<f64, CohortError> {
    if indices.is_empty() {
        return Err(CohortError::EmptyIndices);
    }
    let mut positives = 0usize;
    for &i in indices {
        let record = cohort
            .records
            .get(i)
            .ok_or(CohortError::IndexOutOfBounds(i, cohort.records.len()))?;
        if task.label(record) {
            positives += 1;
        }
    }
    Ok(positives as f64 / indices.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    const HEADER: &str = "id,year,gender,age,nationality,hs_location,hs_type,admission_grade,dropout,underperform\n";

    fn sample_record(id: &str, year: i32) -> StudentRecord {
        StudentRecord {
            id: id.to_string(),
            year,
            gender: Gender::Male,
            age: 18,
            nationality: Nationality::National,
            hs_location: HsLocation::InState,
            hs_type: HsType::Public,
            admission_grade: 9.0,
            dropout: false,
            underperform: false,
        }
    }

    #[test]
    fn loads_valid_rows() {
        let csv = format!(
            "{HEADER}s1,2009,male,18,national,in_state,public,9.5,0,0\n\
             s2,2010,female,19,foreign,out_of_state,non_public,11.0,1,0\n\
             s3,2011,male,20,national,in_state,non_public,7.25,0,1\n"
        );
        let f = write_csv(&csv);
        let out = load_cohort(f.path(), None, &LoadOptions::default()).unwrap();
        assert_eq!(out.cohort.len(), 3);
        assert!(out.diagnostics.is_empty());
        assert_eq!(out.cohort.records[1].gender, Gender::Female);
        assert_eq!(out.cohort.records[2].admission_grade, 7.25);
    }

    #[test]
    fn missing_grade_filter_emits_diagnostic() {
        let csv = format!(
            "{HEADER}s1,2009,male,18,national,in_state,public,9.5,0,0\n\
             s2,2010,male,18,national,in_state,public,,1,0\n"
        );
        let f = write_csv(&csv);
        let options = LoadOptions {
            drop_missing_grade: true,
            ..LoadOptions::default()
        };
        let out = load_cohort(f.path(), None, &options).unwrap();
        assert_eq!(out.cohort.len(), 1);
        assert_eq!(out.diagnostics.len(), 1);
        assert_eq!(out.diagnostics[0].row, 2);
        assert!(out.diagnostics[0].reason.contains("admission grade"));
    }

    #[test]
    fn missing_grade_without_flag_is_an_error() {
        let csv = format!("{HEADER}s1,2009,male,18,national,in_state,public,,0,0\n");
        let f = write_csv(&csv);
        let err = load_cohort(f.path(), None, &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, CohortError::UnparseableValue { .. }));
    }

    #[test]
    fn duplicate_id_names_both_rows() {
        let csv = format!(
            "{HEADER}s1,2009,male,18,national,in_state,public,9.5,0,0\n\
             s2,2010,male,18,national,in_state,public,9.5,0,0\n\
             s1,2011,male,18,national,in_state,public,9.5,0,0\n"
        );
        let f = write_csv(&csv);
        let err = load_cohort(f.path(), None, &LoadOptions::default()).unwrap_err();
        match err {
            CohortError::DuplicateId { id, first_row, second_row } => {
                assert_eq!(id, "s1");
                assert_eq!((first_row, second_row), (1, 3));
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn schema_sidecar_renames_columns() {
        let csv = "Student,Year,Sex,Age,Nat,Loc,Type,Grade,Drop,Under\n\
                   s1,2009,male,18,national,in_state,public,9.5,0,0\n";
        let f = write_csv(csv);
        let mapping: HashMap<String, String> = [
            ("Student", "id"),
            ("Year", "year"),
            ("Sex", "gender"),
            ("Age", "age"),
            ("Nat", "nationality"),
            ("Loc", "hs_location"),
            ("Type", "hs_type"),
            ("Grade", "admission_grade"),
            ("Drop", "dropout"),
            ("Under", "underperform"),
        ]
        .into_iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
        let out = load_cohort(f.path(), Some(&mapping), &LoadOptions::default()).unwrap();
        assert_eq!(out.cohort.len(), 1);
    }

    #[test]
    fn missing_column_is_reported() {
        let csv = "id,year,gender,age,nationality,hs_location,hs_type,admission_grade,dropout\n";
        let f = write_csv(csv);
        let err = load_cohort(f.path(), None, &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, CohortError::MissingColumn(c) if c == "underperform"));
    }

    #[test]
    fn both_outcomes_set_rejected() {
        let csv = format!("{HEADER}s1,2009,male,18,national,in_state,public,9.5,1,1\n");
        let f = write_csv(&csv);
        let err = load_cohort(f.path(), None, &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, CohortError::InvalidRecord { row: 1, .. }));
    }

    #[test]
    fn cohort_csv_round_trips() {
        let cohort = Cohort {
            records: vec![sample_record("a", 2009), {
                let mut r = sample_record("b", 2014);
                r.gender = Gender::Female;
                r.admission_grade = 10.123456789;
                r.dropout = true;
                r
            }],
            grade_scale: (5.0, 14.0),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cohort.csv");
        write_cohort_csv(&cohort, &path).unwrap();
        let out = load_cohort(&path, None, &LoadOptions::default()).unwrap();
        assert_eq!(out.cohort, cohort);
    }

    #[test]
    fn temporal_split_partitions_by_year() {
        let records: Vec<StudentRecord> = (0..10i32)
            .map(|i| sample_record(&format!("s{i}"), 2009 + i % 5))
            .chain((10..16i32).map(|i| sample_record(&format!("s{i}"), 2014 + (i % 2) * 2)))
            .collect();
        let cohort = Cohort { records, grade_scale: (5.0, 14.0) };
        let (train, test) =
            temporal_split(&cohort, &[2009, 2010, 2011, 2012, 2013], &[2014, 2016, 2017]).unwrap();
        assert_eq!(train.len() + test.len(), cohort.len());
        assert!(train.records.iter().all(|r| r.year <= 2013));
        assert!(test.records.iter().all(|r| r.year >= 2014));
    }

    #[test]
    fn temporal_split_rejects_overlap() {
        let cohort = Cohort {
            records: vec![sample_record("a", 2010)],
            grade_scale: (5.0, 14.0),
        };
        let err = temporal_split(&cohort, &[2010], &[2010]).unwrap_err();
        assert!(matches!(err, CohortError::OverlappingYears(y) if y == vec![2010]));
    }

    #[test]
    fn temporal_split_rejects_empty_side() {
        let cohort = Cohort {
            records: vec![sample_record("a", 2015)],
            grade_scale: (5.0, 14.0),
        };
        let err = temporal_split(&cohort, &[2009], &[2014]).unwrap_err();
        assert!(matches!(err, CohortError::EmptySplitSide(_)));
    }

    #[test]
    fn partition_by_gender_counts() {
        let mut records = Vec::new();
        for i in 0..20 {
            let mut r = sample_record(&format!("s{i}"), 2009);
            r.gender = if i < 2 { Gender::Female } else { Gender::Male };
            records.push(r);
        }
        let cohort = Cohort { records, grade_scale: (5.0, 14.0) };
        let spec =
            GroupSpec::attribute_equals("gender", "female", "male", Attribute::Gender, "female");
        let (first, second) = partition(&cohort, &spec, &cohort).unwrap();
        assert_eq!((first.len(), second.len()), (2, 18));
    }

    #[test]
    fn partition_median_ties_go_to_le_side() {
        // grades: 7, 9, 9, 11 -> median 9; ties at 9 belong to the <= side
        let mut records = Vec::new();
        for (i, g) in [7.0, 9.0, 9.0, 11.0].iter().enumerate() {
            let mut r = sample_record(&format!("s{i}"), 2009);
            r.admission_grade = *g;
            records.push(r);
        }
        let cohort = Cohort { records, grade_scale: (5.0, 14.0) };
        let spec = GroupSpec::threshold(
            "admission_grade",
            "low",
            "high",
            Attribute::AdmissionGrade,
            CutoffSource::MedianOfTraining,
            Direction::Le,
        );
        let (low, high) = partition(&cohort, &spec, &cohort).unwrap();
        assert_eq!(low, vec![0, 1, 2]);
        assert_eq!(high, vec![3]);
    }

    #[test]
    fn partition_age_cutoff_matches_direct_count() {
        let ages = [17u32, 18, 19, 19, 20, 21, 23, 19, 25, 18];
        let records: Vec<StudentRecord> = ages
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                let mut r = sample_record(&format!("s{i}"), 2009);
                r.age = a;
                r
            })
            .collect();
        let cohort = Cohort { records, grade_scale: (5.0, 14.0) };
        let (le, gt) = partition(&cohort, &GroupSpec::age_spec(), &cohort).unwrap();
        let expect_le = ages.iter().filter(|&&a| a <= 19).count();
        assert_eq!(le.len(), expect_le);
        assert_eq!(gt.len(), ages.len() - expect_le);
    }

    #[test]
    fn partition_rejects_mismatched_rule() {
        let cohort = Cohort {
            records: vec![sample_record("a", 2009)],
            grade_scale: (5.0, 14.0),
        };
        let spec = GroupSpec::threshold(
            "bad",
            "x",
            "y",
            Attribute::Gender,
            CutoffSource::Fixed { value: 1.0 },
            Direction::Le,
        );
        assert!(matches!(
            partition(&cohort, &spec, &cohort).unwrap_err(),
            CohortError::AttributeMismatch { .. }
        ));
    }

    #[test]
    fn base_rate_examples() {
        let mut records = Vec::new();
        for (i, d) in [true, false, true, false, false].iter().enumerate() {
            let mut r = sample_record(&format!("s{i}"), 2009);
            r.dropout = *d;
            records.push(r);
        }
        let cohort = Cohort { records, grade_scale: (5.0, 14.0) };
        let all: Vec<usize> = (0..5).collect();
        let rate = base_rate(&cohort, OutcomeTask::Dropout, &all).unwrap();
        assert!((rate - 0.4).abs() < 1e-15);

        let positives: Vec<usize> = vec![0, 2];
        assert_eq!(base_rate(&cohort, OutcomeTask::Dropout, &positives).unwrap(), 1.0);

        assert!(matches!(
            base_rate(&cohort, OutcomeTask::Dropout, &[]).unwrap_err(),
            CohortError::EmptyIndices
        ));
    }

    #[test]
    fn median_conventions() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[3.0]), Some(3.0));
        assert_eq!(median(&[1.0, 2.0, 3.0, 4.0]), Some(2.5));
        assert_eq!(median(&[5.0, 1.0, 3.0]), Some(3.0));
    }
}
