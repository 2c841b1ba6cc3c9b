//! Synthetic cohort generation.
//!
//! Attributes are sampled independently from configured marginals, grades
//! from a clipped normal, and outcomes from two logistic heads (dropout,
//! and underperformance among non-dropouts). Coefficients can be fitted so
//! that simulated per-group risk rates hit a target table; group rates are
//! evaluated in closed form by enumerating the binary-attribute
//! combinations and integrating over the grade distribution, which makes
//! the fit deterministic and smooth enough for bisection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohort::{
    Cohort, Gender, HsLocation, HsType, Nationality, OutcomeTask, StudentRecord,
};
use crate::numeric::{normal_cdf, sigmoid};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("coefficient fit did not converge; worst deviations: {}",
        .deviations.iter().map(|d| format!("{} target {:.4} achieved {:.4}", d.name, d.target, d.achieved))
            .collect::<Vec<_>>().join(", "))]
    FitNotConverged { deviations: Vec<FitDeviation> },
}

#[derive(Debug, Clone)]
pub struct FitDeviation {
    pub name: String,
    pub target: f64,
    pub achieved: f64,
}

/// The five independently sampled binary attributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinaryAttr {
    Female,
    Foreign,
    AgeGt19,
    InState,
    PublicHs,
}

impl BinaryAttr {
    pub const ALL: [BinaryAttr; 5] = [
        BinaryAttr::Female,
        BinaryAttr::Foreign,
        BinaryAttr::AgeGt19,
        BinaryAttr::InState,
        BinaryAttr::PublicHs,
    ];

    fn index(self) -> usize {
        match self {
            BinaryAttr::Female => 0,
            BinaryAttr::Foreign => 1,
            BinaryAttr::AgeGt19 => 2,
            BinaryAttr::InState => 3,
            BinaryAttr::PublicHs => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BinaryAttr::Female => "female",
            BinaryAttr::Foreign => "foreign",
            BinaryAttr::AgeGt19 => "age_gt_19",
            BinaryAttr::InState => "in_state",
            BinaryAttr::PublicHs => "public_hs",
        }
    }

    pub fn holds(self, r: &StudentRecord) -> bool {
        match self {
            BinaryAttr::Female => r.gender == Gender::Female,
            BinaryAttr::Foreign => r.nationality == Nationality::Foreign,
            BinaryAttr::AgeGt19 => r.age > 19,
            BinaryAttr::InState => r.hs_location == HsLocation::InState,
            BinaryAttr::PublicHs => r.hs_type == HsType::Public,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttributeMarginals {
    pub female: f64,
    pub foreign: f64,
    pub age_gt_19: f64,
    pub in_state: f64,
    pub public_hs: f64,
}

impl AttributeMarginals {
    fn get(&self, attr: BinaryAttr) -> f64 {
        match attr {
            BinaryAttr::Female => self.female,
            BinaryAttr::Foreign => self.foreign,
            BinaryAttr::AgeGt19 => self.age_gt_19,
            BinaryAttr::InState => self.in_state,
            BinaryAttr::PublicHs => self.public_hs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradeDistribution {
    pub mean: f64,
    pub sd: f64,
    pub clip_min: f64,
    pub clip_max: f64,
}

impl GradeDistribution {
    fn z_bounds(&self) -> (f64, f64) {
        (
            (self.clip_min - self.mean) / self.sd,
            (self.clip_max - self.mean) / self.sd,
        )
    }
}

/// Population median of the clipped grade distribution.
pub fn grade_median(g: &GradeDistribution) -> f64 {
    let (z_lo, z_hi) = g.z_bounds();
    if normal_cdf(z_lo) >= 0.5 {
        g.clip_min
    } else if normal_cdf(z_hi) <= 0.5 {
        g.clip_max
    } else {
        g.mean
    }
}

/// Logistic weights for one outcome head over the five binary attributes
/// plus the standardized grade.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadCoefficients {
    pub intercept: f64,
    pub female: f64,
    pub foreign: f64,
    pub age_gt_19: f64,
    pub in_state: f64,
    pub public_hs: f64,
    pub grade_z: f64,
}

impl HeadCoefficients {
    pub fn zeros() -> Self {
        HeadCoefficients {
            intercept: 0.0,
            female: 0.0,
            foreign: 0.0,
            age_gt_19: 0.0,
            in_state: 0.0,
            public_hs: 0.0,
            grade_z: 0.0,
        }
    }

    fn linear(&self, bits: &[f64; 5], z: f64) -> f64 {
        self.intercept
            + self.female * bits[0]
            + self.foreign * bits[1]
            + self.age_gt_19 * bits[2]
            + self.in_state * bits[3]
            + self.public_hs * bits[4]
            + self.grade_z * z
    }

    fn weight_mut(&mut self, slot: WeightSlot) -> &mut f64 {
        match slot {
            WeightSlot::Binary(BinaryAttr::Female) => &mut self.female,
            WeightSlot::Binary(BinaryAttr::Foreign) => &mut self.foreign,
            WeightSlot::Binary(BinaryAttr::AgeGt19) => &mut self.age_gt_19,
            WeightSlot::Binary(BinaryAttr::InState) => &mut self.in_state,
            WeightSlot::Binary(BinaryAttr::PublicHs) => &mut self.public_hs,
            WeightSlot::GradeZ => &mut self.grade_z,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeCoefficients {
    pub dropout: HeadCoefficients,
    pub underperform: HeadCoefficients,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YearWeight {
    pub year: i32,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n: usize,
    pub seed: u64,
    pub attribute_marginals: AttributeMarginals,
    pub grade_distribution: GradeDistribution,
    pub outcome_coefficients: OutcomeCoefficients,
    pub year_weights: Vec<YearWeight>,
}

impl Default for GeneratorConfig {
    /// Defaults match the audited cohort's attribute marginals and carry
    /// outcome coefficients tuned so the generative model's own scores
    /// reach an AUC of about 0.80 on the dropout task, leaving trained
    /// models real signal to recover.
    fn default() -> Self {
        GeneratorConfig {
            n: 10_000,
            seed: 7,
            attribute_marginals: AttributeMarginals {
                female: 0.09,
                foreign: 0.12,
                age_gt_19: 0.45,
                in_state: 0.76,
                public_hs: 0.42,
            },
            grade_distribution: GradeDistribution {
                mean: 9.0,
                sd: 1.5,
                clip_min: 5.0,
                clip_max: 14.0,
            },
            outcome_coefficients: OutcomeCoefficients {
                dropout: HeadCoefficients {
                    intercept: -1.1997,
                    female: 0.0,
                    foreign: 2.8,
                    age_gt_19: -1.6,
                    in_state: 1.1,
                    public_hs: 1.0,
                    grade_z: -0.30,
                },
                underperform: HeadCoefficients {
                    intercept: -1.9596,
                    female: 0.0,
                    foreign: 1.68,
                    age_gt_19: -0.96,
                    in_state: 0.66,
                    public_hs: 0.60,
                    grade_z: -0.18,
                },
            },
            year_weights: default_year_weights(),
        }
    }
}

pub fn default_year_weights() -> Vec<YearWeight> {
    [2009, 2010, 2011, 2012, 2013, 2014, 2016, 2017]
        .iter()
        .map(|&year| YearWeight { year, weight: 0.125 })
        .collect()
}

/// One side of a binary population split, used for risk-rate targets and
/// marginal validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthGroup {
    Female,
    Male,
    National,
    Foreign,
    AgeLe19,
    AgeGt19,
    InState,
    OutOfState,
    PublicHs,
    NonPublicHs,
    LowGrade,
    HighGrade,
}

impl SynthGroup {
    pub fn name(self) -> &'static str {
        match self {
            SynthGroup::Female => "female",
            SynthGroup::Male => "male",
            SynthGroup::National => "national",
            SynthGroup::Foreign => "foreign",
            SynthGroup::AgeLe19 => "age_le_19",
            SynthGroup::AgeGt19 => "age_gt_19",
            SynthGroup::InState => "in_state",
            SynthGroup::OutOfState => "out_of_state",
            SynthGroup::PublicHs => "public_hs",
            SynthGroup::NonPublicHs => "non_public_hs",
            SynthGroup::LowGrade => "low_grade",
            SynthGroup::HighGrade => "high_grade",
        }
    }

    pub fn selects(self, r: &StudentRecord, grade_median: f64) -> bool {
        match self {
            SynthGroup::Female => BinaryAttr::Female.holds(r),
            SynthGroup::Male => !BinaryAttr::Female.holds(r),
            SynthGroup::National => !BinaryAttr::Foreign.holds(r),
            SynthGroup::Foreign => BinaryAttr::Foreign.holds(r),
            SynthGroup::AgeLe19 => !BinaryAttr::AgeGt19.holds(r),
            SynthGroup::AgeGt19 => BinaryAttr::AgeGt19.holds(r),
            SynthGroup::InState => BinaryAttr::InState.holds(r),
            SynthGroup::OutOfState => !BinaryAttr::InState.holds(r),
            SynthGroup::PublicHs => BinaryAttr::PublicHs.holds(r),
            SynthGroup::NonPublicHs => !BinaryAttr::PublicHs.holds(r),
            SynthGroup::LowGrade => r.admission_grade <= grade_median,
            SynthGroup::HighGrade => r.admission_grade > grade_median,
        }
    }

    fn condition(self) -> RateCondition {
        match self {
            SynthGroup::Female => RateCondition::Binary(BinaryAttr::Female, true),
            SynthGroup::Male => RateCondition::Binary(BinaryAttr::Female, false),
            SynthGroup::National => RateCondition::Binary(BinaryAttr::Foreign, false),
            SynthGroup::Foreign => RateCondition::Binary(BinaryAttr::Foreign, true),
            SynthGroup::AgeLe19 => RateCondition::Binary(BinaryAttr::AgeGt19, false),
            SynthGroup::AgeGt19 => RateCondition::Binary(BinaryAttr::AgeGt19, true),
            SynthGroup::InState => RateCondition::Binary(BinaryAttr::InState, true),
            SynthGroup::OutOfState => RateCondition::Binary(BinaryAttr::InState, false),
            SynthGroup::PublicHs => RateCondition::Binary(BinaryAttr::PublicHs, true),
            SynthGroup::NonPublicHs => RateCondition::Binary(BinaryAttr::PublicHs, false),
            SynthGroup::LowGrade => RateCondition::GradeSide { low: true },
            SynthGroup::HighGrade => RateCondition::GradeSide { low: false },
        }
    }

    fn slot(self) -> WeightSlot {
        match self {
            SynthGroup::Female | SynthGroup::Male => WeightSlot::Binary(BinaryAttr::Female),
            SynthGroup::National | SynthGroup::Foreign => WeightSlot::Binary(BinaryAttr::Foreign),
            SynthGroup::AgeLe19 | SynthGroup::AgeGt19 => WeightSlot::Binary(BinaryAttr::AgeGt19),
            SynthGroup::InState | SynthGroup::OutOfState => WeightSlot::Binary(BinaryAttr::InState),
            SynthGroup::PublicHs | SynthGroup::NonPublicHs => {
                WeightSlot::Binary(BinaryAttr::PublicHs)
            }
            SynthGroup::LowGrade | SynthGroup::HighGrade => WeightSlot::GradeZ,
        }
    }

    /// Whether this side is the one its weight is fitted against when both
    /// sides appear in a target table.
    fn canonical(self) -> bool {
        matches!(
            self,
            SynthGroup::Female
                | SynthGroup::Foreign
                | SynthGroup::AgeGt19
                | SynthGroup::InState
                | SynthGroup::PublicHs
                | SynthGroup::LowGrade
        )
    }
}

/// Per-group risk-rate targets for both outcome heads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskRow {
    pub group: SynthGroup,
    pub dropout: f64,
    pub dropout_or_under: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskTargets {
    pub overall_dropout: f64,
    pub overall_dropout_or_under: f64,
    pub groups: Vec<RiskRow>,
}

impl RiskTargets {
    /// The default shipped target table. Gender rows are deliberately
    /// absent: the two sides differ by two points on a nine-percent
    /// subpopulation, which is noise at the source sample size, so the
    /// gender weights stay at zero unless a caller supplies targets.
    pub fn default_targets() -> Self {
        let row = |group, dropout, dropout_or_under| RiskRow {
            group,
            dropout,
            dropout_or_under,
        };
        RiskTargets {
            overall_dropout: 0.43,
            overall_dropout_or_under: 0.52,
            groups: vec![
                row(SynthGroup::Foreign, 0.58, 0.69),
                row(SynthGroup::National, 0.41, 0.50),
                row(SynthGroup::LowGrade, 0.49, 0.59),
                row(SynthGroup::HighGrade, 0.37, 0.45),
                row(SynthGroup::AgeGt19, 0.41, 0.48),
                row(SynthGroup::AgeLe19, 0.44, 0.55),
                row(SynthGroup::InState, 0.44, 0.53),
                row(SynthGroup::OutOfState, 0.41, 0.49),
                row(SynthGroup::PublicHs, 0.44, 0.55),
                row(SynthGroup::NonPublicHs, 0.42, 0.50),
            ],
        }
    }
}

fn validate_config(config: &GeneratorConfig) -> Result<(), SynthError> {
    let m = &config.attribute_marginals;
    for attr in BinaryAttr::ALL {
        let p = m.get(attr);
        if !(p > 0.0 && p < 1.0) {
            return Err(SynthError::InvalidConfig(format!(
                "prevalence for {} must lie in (0, 1), got {p}",
                attr.name()
            )));
        }
    }
    let g = &config.grade_distribution;
    if g.sd.is_nan() || g.sd <= 0.0 {
        return Err(SynthError::InvalidConfig(format!(
            "grade sd must be positive, got {}",
            g.sd
        )));
    }
    if g.clip_min.is_nan() || g.clip_max.is_nan() || g.clip_min >= g.clip_max {
        return Err(SynthError::InvalidConfig(format!(
            "grade clip bounds must satisfy min < max, got [{}, {}]",
            g.clip_min, g.clip_max
        )));
    }
    if !(g.clip_min < g.mean && g.mean < g.clip_max) {
        return Err(SynthError::InvalidConfig(format!(
            "grade mean {} must lie strictly inside the clip bounds [{}, {}]",
            g.mean, g.clip_min, g.clip_max
        )));
    }
    if config.year_weights.is_empty() {
        return Err(SynthError::InvalidConfig("year_weights is empty".to_string()));
    }
    let total: f64 = config.year_weights.iter().map(|w| w.weight).sum();
    if config.year_weights.iter().any(|w| w.weight < 0.0) || (total - 1.0).abs() > 1e-9 {
        return Err(SynthError::InvalidConfig(format!(
            "year weights must be non-negative and sum to 1, got sum {total}"
        )));
    }
    Ok(())
}

/// Generates a cohort. Sampling is single-threaded with a fixed per-record
/// draw order, so an identical (config, seed) pair yields a bitwise
/// identical cohort.
pub fn generate(config: &GeneratorConfig) -> Result<Cohort, SynthError> {
    validate_config(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let g = &config.grade_distribution;
    let normal = Normal::new(g.mean, g.sd).expect("validated sd");
    let m = &config.attribute_marginals;
    let coeffs = &config.outcome_coefficients;

    let mut records = Vec::with_capacity(config.n);
    for i in 0..config.n {
        let female = rng.random::<f64>() < m.female;
        let foreign = rng.random::<f64>() < m.foreign;
        let age_gt_19 = rng.random::<f64>() < m.age_gt_19;
        let in_state = rng.random::<f64>() < m.in_state;
        let public_hs = rng.random::<f64>() < m.public_hs;
        let age: u32 = if age_gt_19 {
            20 + rng.random_range(0..5)
        } else {
            17 + rng.random_range(0..3)
        };
        let grade = normal.sample(&mut rng).clamp(g.clip_min, g.clip_max);
        let year = sample_year(&config.year_weights, rng.random::<f64>());

        let bits = [
            female as u8 as f64,
            foreign as u8 as f64,
            age_gt_19 as u8 as f64,
            in_state as u8 as f64,
            public_hs as u8 as f64,
        ];
        let z = (grade - g.mean) / g.sd;
        let p_dropout = sigmoid(coeffs.dropout.linear(&bits, z));
        let dropout = rng.random::<f64>() < p_dropout;
        let underperform = if dropout {
            false
        } else {
            let p_under = sigmoid(coeffs.underperform.linear(&bits, z));
            rng.random::<f64>() < p_under
        };

        records.push(StudentRecord {
            id: format!("s{:06}", i + 1),
            year,
            gender: if female { Gender::Female } else { Gender::Male },
            age,
            nationality: if foreign {
                Nationality::Foreign
            } else {
                Nationality::National
            },
            hs_location: if in_state {
                HsLocation::InState
            } else {
                HsLocation::OutOfState
            },
            hs_type: if public_hs { HsType::Public } else { HsType::NonPublic },
            admission_grade: grade,
            dropout,
            underperform,
        });
    }

    Ok(Cohort {
        records,
        grade_scale: (g.clip_min, g.clip_max),
    })
}

fn sample_year(weights: &[YearWeight], u: f64) -> i32 {
    let mut acc = 0.0;
    for w in weights {
        acc += w.weight;
        if u < acc {
            return w.year;
        }
    }
    weights.last().expect("validated nonempty").year
}

/// The generative model's own conditional outcome probability for each
/// record: the score no classifier trained on the same features can beat.
pub fn bayes_scores(config: &GeneratorConfig, cohort: &Cohort, task: OutcomeTask) -> Vec<f64> {
    let g = &config.grade_distribution;
    let coeffs = &config.outcome_coefficients;
    cohort
        .records
        .iter()
        .map(|r| {
            let bits = [
                BinaryAttr::Female.holds(r) as u8 as f64,
                BinaryAttr::Foreign.holds(r) as u8 as f64,
                BinaryAttr::AgeGt19.holds(r) as u8 as f64,
                BinaryAttr::InState.holds(r) as u8 as f64,
                BinaryAttr::PublicHs.holds(r) as u8 as f64,
            ];
            let z = (r.admission_grade - g.mean) / g.sd;
            let pd = sigmoid(coeffs.dropout.linear(&bits, z));
            match task {
                OutcomeTask::Dropout => pd,
                OutcomeTask::DropoutOrUnderperformance => {
                    pd + (1.0 - pd) * sigmoid(coeffs.underperform.linear(&bits, z))
                }
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Closed-form group rates under the generative model.

#[derive(Debug, Clone, Copy, PartialEq)]
enum RateCondition {
    Overall,
    Binary(BinaryAttr, bool),
    GradeSide { low: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum WeightSlot {
    Binary(BinaryAttr),
    GradeZ,
}

#[derive(Debug, Clone, Copy)]
enum RateKind {
    Dropout,
    DropoutOrUnder,
}

const SIMPSON_INTERVALS: usize = 192;

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + h * i as f64);
    }
    acc * h / 3.0
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// E[rate | condition] under the generative model, by exact enumeration of
/// binary-attribute combinations and quadrature over the censored grade.
fn expected_rate(
    coeffs: &OutcomeCoefficients,
    kind: RateKind,
    marginals: &AttributeMarginals,
    grade: &GradeDistribution,
    cond: RateCondition,
) -> f64 {
    let (z_lo, z_hi) = grade.z_bounds();
    let probs: [f64; 5] = [
        marginals.female,
        marginals.foreign,
        marginals.age_gt_19,
        marginals.in_state,
        marginals.public_hs,
    ];
    let record_rate = |bits: &[f64; 5], z: f64| -> f64 {
        let pd = sigmoid(coeffs.dropout.linear(bits, z));
        match kind {
            RateKind::Dropout => pd,
            RateKind::DropoutOrUnder => {
                pd + (1.0 - pd) * sigmoid(coeffs.underperform.linear(bits, z))
            }
        }
    };

    let mut total = 0.0;
    'combos: for combo in 0u32..32 {
        let mut pi = 1.0;
        let mut bits = [0.0f64; 5];
        for j in 0..5 {
            let on = (combo >> j) & 1 == 1;
            bits[j] = if on { 1.0 } else { 0.0 };
            match cond {
                RateCondition::Binary(attr, side) if attr.index() == j => {
                    if on != side {
                        continue 'combos;
                    }
                }
                _ => pi *= if on { probs[j] } else { 1.0 - probs[j] },
            }
        }

        let integrand = |z: f64| normal_pdf(z) * record_rate(&bits, z);
        let mass_lo = normal_cdf(z_lo) * record_rate(&bits, z_lo);
        let mass_hi = (1.0 - normal_cdf(z_hi)) * record_rate(&bits, z_hi);
        let z_part = match cond {
            RateCondition::GradeSide { low: true } => {
                simpson(integrand, z_lo, 0.0, SIMPSON_INTERVALS) + mass_lo
            }
            RateCondition::GradeSide { low: false } => {
                simpson(integrand, 0.0, z_hi, SIMPSON_INTERVALS) + mass_hi
            }
            _ => simpson(integrand, z_lo, z_hi, SIMPSON_INTERVALS) + mass_lo + mass_hi,
        };
        total += pi * z_part;
    }

    match cond {
        // Conditioning on a grade half costs probability mass 1/2; the
        // grade mean sits strictly inside the clip bounds, so the median
        // of the censored distribution is exactly the mean.
        RateCondition::GradeSide { .. } => total / 0.5,
        _ => total,
    }
}

fn bisect<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, target: f64, iters: usize) -> f64 {
    let increasing = f(hi) >= f(lo);
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        if (f(mid) < target) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

const WEIGHT_BOUND: f64 = 12.0;
const BISECT_ITERS: usize = 50;
const FIT_SWEEPS: usize = 80;
const FIT_TOL: f64 = 1e-6;

/// Fits outcome coefficients so the model's per-group rates hit `targets`.
///
/// Coordinate-wise moment matching: each targeted weight is bisected
/// against its group's rate, then the intercept against the overall rate,
/// sweeping until all rates converge. The dropout head is fitted first and
/// held fixed while the underperformance head is fitted against the
/// combined rates. Weights without a target row keep their configured
/// value. When both sides of a split have target rows, the canonical side
/// (foreign, age > 19, in-state, public, low grade) drives the fit and the
/// other side is left as a consistency check for [`validate_marginals`].
pub fn fit_outcome_coefficients(
    targets: &RiskTargets,
    config: &GeneratorConfig,
) -> Result<OutcomeCoefficients, SynthError> {
    validate_config(config)?;
    let mut coeffs = config.outcome_coefficients;
    let marginals = &config.attribute_marginals;
    let grade = &config.grade_distribution;

    let drivers = select_drivers(targets);
    for kind in [RateKind::Dropout, RateKind::DropoutOrUnder] {
        let overall_target = match kind {
            RateKind::Dropout => targets.overall_dropout,
            RateKind::DropoutOrUnder => targets.overall_dropout_or_under,
        };
        let mut converged = false;
        let mut deviations = Vec::new();
        for _ in 0..FIT_SWEEPS {
            for &(slot, group) in &drivers {
                let target = driver_target(targets, group, kind);
                let cond = group.condition();
                let fitted = bisect(
                    |w| {
                        let mut c = coeffs;
                        *head_mut(&mut c, kind).weight_mut(slot) = w;
                        expected_rate(&c, kind, marginals, grade, cond)
                    },
                    -WEIGHT_BOUND,
                    WEIGHT_BOUND,
                    target,
                    BISECT_ITERS,
                );
                *head_mut(&mut coeffs, kind).weight_mut(slot) = fitted;
            }
            let intercept = bisect(
                |b| {
                    let mut c = coeffs;
                    head_mut(&mut c, kind).intercept = b;
                    expected_rate(&c, kind, marginals, grade, RateCondition::Overall)
                },
                -WEIGHT_BOUND,
                WEIGHT_BOUND,
                overall_target,
                BISECT_ITERS,
            );
            head_mut(&mut coeffs, kind).intercept = intercept;

            deviations = fit_deviations(&coeffs, kind, marginals, grade, targets, &drivers);
            if deviations
                .iter()
                .all(|d| (d.achieved - d.target).abs() < FIT_TOL)
            {
                converged = true;
                break;
            }
        }
        if !converged {
            deviations.retain(|d| (d.achieved - d.target).abs() >= FIT_TOL);
            return Err(SynthError::FitNotConverged { deviations });
        }
    }

    Ok(coeffs)
}

fn head_mut(coeffs: &mut OutcomeCoefficients, kind: RateKind) -> &mut HeadCoefficients {
    match kind {
        RateKind::Dropout => &mut coeffs.dropout,
        RateKind::DropoutOrUnder => &mut coeffs.underperform,
    }
}

fn driver_target(targets: &RiskTargets, group: SynthGroup, kind: RateKind) -> f64 {
    let row = targets
        .groups
        .iter()
        .find(|r| r.group == group)
        .expect("driver selected from target rows");
    match kind {
        RateKind::Dropout => row.dropout,
        RateKind::DropoutOrUnder => row.dropout_or_under,
    }
}

/// One driving group per weight slot, preferring the canonical side.
fn select_drivers(targets: &RiskTargets) -> Vec<(WeightSlot, SynthGroup)> {
    let mut drivers: Vec<(WeightSlot, SynthGroup)> = Vec::new();
    for row in &targets.groups {
        let slot = row.group.slot();
        match drivers.iter_mut().find(|(s, _)| *s == slot) {
            None => drivers.push((slot, row.group)),
            Some((_, g)) => {
                if row.group.canonical() && !g.canonical() {
                    *g = row.group;
                }
            }
        }
    }
    drivers
}

fn fit_deviations(
    coeffs: &OutcomeCoefficients,
    kind: RateKind,
    marginals: &AttributeMarginals,
    grade: &GradeDistribution,
    targets: &RiskTargets,
    drivers: &[(WeightSlot, SynthGroup)],
) -> Vec<FitDeviation> {
    let overall_target = match kind {
        RateKind::Dropout => targets.overall_dropout,
        RateKind::DropoutOrUnder => targets.overall_dropout_or_under,
    };
    let mut out = vec![FitDeviation {
        name: "overall".to_string(),
        target: overall_target,
        achieved: expected_rate(coeffs, kind, marginals, grade, RateCondition::Overall),
    }];
    for &(_, group) in drivers {
        out.push(FitDeviation {
            name: group.name().to_string(),
            target: driver_target(targets, group, kind),
            achieved: expected_rate(coeffs, kind, marginals, grade, group.condition()),
        });
    }
    out
}

// ---------------------------------------------------------------------------
// Marginal validation.

#[derive(Debug, Clone, Serialize)]
pub struct MarginalReportRow {
    pub name: String,
    pub target: f64,
    pub achieved: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MarginalReport {
    pub rows: Vec<MarginalReportRow>,
}

impl MarginalReport {
    pub fn max_deviation(&self) -> f64 {
        self.rows.iter().map(|r| r.deviation).fold(0.0, f64::max)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("name,target,achieved,deviation\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.6}\n",
                r.name, r.target, r.achieved, r.deviation
            ));
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("marginal fit report\n");
        let width = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(4);
        for r in &self.rows {
            out.push_str(&format!(
                "  {:<width$}  target {:>6.3}  achieved {:>6.3}  deviation {:>6.3}\n",
                r.name,
                r.target,
                r.achieved,
                r.deviation,
                width = width
            ));
        }
        out.push_str(&format!("  max deviation: {:.4}\n", self.max_deviation()));
        out
    }
}

/// Prevalence and risk-rate targets a generated cohort is checked against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalTargets {
    pub prevalences: Vec<(BinaryAttr, f64)>,
    pub risks: Option<RiskTargets>,
}

impl MarginalTargets {
    pub fn from_config(config: &GeneratorConfig) -> Self {
        MarginalTargets {
            prevalences: BinaryAttr::ALL
                .iter()
                .map(|&a| (a, config.attribute_marginals.get(a)))
                .collect(),
            risks: None,
        }
    }

    pub fn with_risks(config: &GeneratorConfig, risks: RiskTargets) -> Self {
        MarginalTargets {
            risks: Some(risks),
            ..Self::from_config(config)
        }
    }
}

/// Compares achieved cohort marginals and per-group risk rates against
/// targets. `grade_median` bounds the low/high grade split; pass
/// [`grade_median`] of the generating distribution for generated cohorts.
pub fn validate_marginals(
    cohort: &Cohort,
    targets: &MarginalTargets,
    grade_median: f64,
) -> MarginalReport {
    let n = cohort.records.len().max(1) as f64;
    let mut rows = Vec::new();

    for &(attr, target) in &targets.prevalences {
        let achieved = cohort.records.iter().filter(|r| attr.holds(r)).count() as f64 / n;
        rows.push(MarginalReportRow {
            name: format!("prevalence:{}", attr.name()),
            target,
            achieved,
            deviation: (achieved - target).abs(),
        });
    }

    if let Some(risks) = &targets.risks {
        let mut push_rate = |name: String, target: f64, selector: &dyn Fn(&StudentRecord) -> bool, task: OutcomeTask| {
            let selected: Vec<&StudentRecord> =
                cohort.records.iter().filter(|r| selector(r)).collect();
            let achieved = if selected.is_empty() {
                f64::NAN
            } else {
                selected.iter().filter(|r| task.label(r)).count() as f64 / selected.len() as f64
            };
            rows.push(MarginalReportRow {
                name,
                target,
                achieved,
                deviation: (achieved - target).abs(),
            });
        };

        push_rate(
            "dropout:overall".to_string(),
            risks.overall_dropout,
            &|_| true,
            OutcomeTask::Dropout,
        );
        push_rate(
            "dropout_or_under:overall".to_string(),
            risks.overall_dropout_or_under,
            &|_| true,
            OutcomeTask::DropoutOrUnderperformance,
        );
        for row in &risks.groups {
            let group = row.group;
            push_rate(
                format!("dropout:{}", group.name()),
                row.dropout,
                &|r| group.selects(r, grade_median),
                OutcomeTask::Dropout,
            );
            push_rate(
                format!("dropout_or_under:{}", group.name()),
                row.dropout_or_under,
                &|r| group.selects(r, grade_median),
                OutcomeTask::DropoutOrUnderperformance,
            );
        }
    }

    MarginalReport { rows }
}
