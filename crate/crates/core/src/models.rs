//! Probabilistic binary classifiers: logistic regression and a
//! one-hidden-layer MLP, trained by seeded mini-batch gradient descent
//! with momentum. Double precision throughout; scores are clamped a
//! machine epsilon away from 0 and 1.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibrate::CalibrationMap;
use crate::numeric::sigmoid;
use crate::preprocess::{EncodingSchema, FeatureMatrix};

pub const DEFAULT_HIDDEN_UNITS: usize = 100;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training data is empty")]
    EmptyMatrix,
    #[error("training data contains a single class only")]
    SingleClass,
    #[error("feature width mismatch: model expects {expected}, matrix has {got}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("training diverged: loss became non-finite")]
    Divergence,
    #[error("invalid train config: {0}")]
    InvalidConfig(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("model document error: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Early-stop patience in epochs without validation improvement;
    /// ignored when `validation_fraction` is zero.
    pub patience: usize,
    pub validation_fraction: f64,
    pub seed: u64,
    pub l2_penalty: f64,
    pub momentum: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            batch_size: 32,
            max_epochs: 200,
            patience: 20,
            validation_fraction: 0.15,
            seed: 0,
            l2_penalty: 1e-4,
            momentum: 0.9,
        }
    }
}

fn validate_train_inputs(matrix: &FeatureMatrix, config: &TrainConfig) -> Result<(), ModelError> {
    if matrix.n_rows() == 0 {
        return Err(ModelError::EmptyMatrix);
    }
    let positives = matrix.positives();
    if positives == 0 || positives == matrix.n_rows() {
        return Err(ModelError::SingleClass);
    }
    if config.learning_rate.is_nan() || config.learning_rate <= 0.0 {
        return Err(ModelError::InvalidConfig("learning_rate must be positive".into()));
    }
    if config.batch_size == 0 {
        return Err(ModelError::InvalidConfig("batch_size must be at least 1".into()));
    }
    if !(0.0..=0.5).contains(&config.validation_fraction) {
        return Err(ModelError::InvalidConfig(
            "validation_fraction must lie in [0, 0.5]".into(),
        ));
    }
    if !(0.0..1.0).contains(&config.momentum) {
        return Err(ModelError::InvalidConfig("momentum must lie in [0, 1)".into()));
    }
    if config.l2_penalty < 0.0 {
        return Err(ModelError::InvalidConfig("l2_penalty must be non-negative".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub n_features: usize,
    pub hidden_units: usize,
    /// Flat `n_features x hidden_units` matrix, feature-major.
    pub hidden_weights: Vec<f64>,
    pub hidden_bias: Vec<f64>,
    pub output_weights: Vec<f64>,
    pub output_bias: f64,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Model {
    Logistic(LogisticModel),
    Mlp(MlpModel),
}

impl Model {
    pub fn family(&self) -> &'static str {
        match self {
            Model::Logistic(_) => "logistic",
            Model::Mlp(_) => "mlp",
        }
    }

    pub fn width(&self) -> usize {
        match self {
            Model::Logistic(m) => m.weights.len(),
            Model::Mlp(m) => m.n_features,
        }
    }

    pub fn predict_proba(&self, matrix: &FeatureMatrix) -> Result<Vec<f64>, ModelError> {
        if matrix.width() != self.width() {
            return Err(ModelError::WidthMismatch {
                expected: self.width(),
                got: matrix.width(),
            });
        }
        Ok((0..matrix.n_rows())
            .map(|i| self.predict_row(matrix.row(i)))
            .collect())
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let z = match self {
            Model::Logistic(m) => logistic_logit(row, &m.weights, m.bias),
            Model::Mlp(m) => mlp_logit(row, m),
        };
        clamp_proba(sigmoid(z))
    }
}

/// Scores stay strictly inside (0, 1); exact 0/1 would break the
/// cross-entropy and generalized-error arithmetic downstream.
fn clamp_proba(p: f64) -> f64 {
    p.clamp(f64::EPSILON, 1.0 - f64::EPSILON)
}

fn logistic_logit(row: &[f64], weights: &[f64], bias: f64) -> f64 {
    bias + row.iter().zip(weights).map(|(x, w)| x * w).sum::<f64>()
}

fn mlp_logit(row: &[f64], m: &MlpModel) -> f64 {
    let mut z = m.output_bias;
    for j in 0..m.hidden_units {
        let mut pre = m.hidden_bias[j];
        for (i, x) in row.iter().enumerate() {
            pre += x * m.hidden_weights[i * m.hidden_units + j];
        }
        if pre > 0.0 {
            z += m.output_weights[j] * pre;
        }
    }
    z
}

/// Stable binary cross-entropy from the logit.
fn ce_from_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (1.0 + (-z.abs()).exp()).ln()
}

// ---------------------------------------------------------------------------
// Loss and gradient, exposed for finite-difference verification.

/// Regularized mean cross-entropy of a logistic model over the whole
/// matrix. The bias is not penalized.
pub fn logistic_loss(matrix: &FeatureMatrix, weights: &[f64], bias: f64, l2: f64) -> f64 {
    let idx: Vec<usize> = (0..matrix.n_rows()).collect();
    logistic_loss_idx(matrix, &idx, weights, bias, l2)
}

/// Loss plus analytic gradient `(loss, grad_weights, grad_bias)`.
pub fn logistic_loss_grad(
    matrix: &FeatureMatrix,
    weights: &[f64],
    bias: f64,
    l2: f64,
) -> (f64, Vec<f64>, f64) {
    let idx: Vec<usize> = (0..matrix.n_rows()).collect();
    logistic_loss_grad_idx(matrix, &idx, weights, bias, l2)
}

fn logistic_loss_idx(
    matrix: &FeatureMatrix,
    idx: &[usize],
    weights: &[f64],
    bias: f64,
    l2: f64,
) -> f64 {
    let mut loss = 0.0;
    for &i in idx {
        let z = logistic_logit(matrix.row(i), weights, bias);
        loss += ce_from_logit(z, matrix.label_f64(i));
    }
    loss / idx.len() as f64 + 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>()
}

fn logistic_loss_grad_idx(
    matrix: &FeatureMatrix,
    idx: &[usize],
    weights: &[f64],
    bias: f64,
    l2: f64,
) -> (f64, Vec<f64>, f64) {
    let mut loss = 0.0;
    let mut grad_w = vec![0.0; weights.len()];
    let mut grad_b = 0.0;
    for &i in idx {
        let row = matrix.row(i);
        let y = matrix.label_f64(i);
        let z = logistic_logit(row, weights, bias);
        loss += ce_from_logit(z, y);
        let d = sigmoid(z) - y;
        for (g, x) in grad_w.iter_mut().zip(row) {
            *g += d * x;
        }
        grad_b += d;
    }
    let m = idx.len() as f64;
    loss = loss / m + 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>();
    for (g, w) in grad_w.iter_mut().zip(weights) {
        *g = *g / m + l2 * w;
    }
    (loss, grad_w, grad_b / m)
}

#[derive(Debug, Clone)]
pub struct MlpGradients {
    pub hidden_weights: Vec<f64>,
    pub hidden_bias: Vec<f64>,
    pub output_weights: Vec<f64>,
    pub output_bias: f64,
}

/// Regularized mean cross-entropy of an MLP over the whole matrix.
pub fn mlp_loss(matrix: &FeatureMatrix, model: &MlpModel, l2: f64) -> f64 {
    let idx: Vec<usize> = (0..matrix.n_rows()).collect();
    mlp_loss_idx(matrix, &idx, model, l2)
}

/// Loss plus analytic backpropagation gradients.
pub fn mlp_loss_grad(matrix: &FeatureMatrix, model: &MlpModel, l2: f64) -> (f64, MlpGradients) {
    let idx: Vec<usize> = (0..matrix.n_rows()).collect();
    mlp_loss_grad_idx(matrix, &idx, model, l2)
}

fn l2_term(model: &MlpModel, l2: f64) -> f64 {
    0.5 * l2
        * (model.hidden_weights.iter().map(|w| w * w).sum::<f64>()
            + model.output_weights.iter().map(|w| w * w).sum::<f64>())
}

fn mlp_loss_idx(matrix: &FeatureMatrix, idx: &[usize], model: &MlpModel, l2: f64) -> f64 {
    let mut loss = 0.0;
    for &i in idx {
        let z = mlp_logit(matrix.row(i), model);
        loss += ce_from_logit(z, matrix.label_f64(i));
    }
    loss / idx.len() as f64 + l2_term(model, l2)
}

fn mlp_loss_grad_idx(
    matrix: &FeatureMatrix,
    idx: &[usize],
    model: &MlpModel,
    l2: f64,
) -> (f64, MlpGradients) {
    let h = model.hidden_units;
    let mut loss = 0.0;
    let mut gw1 = vec![0.0; model.hidden_weights.len()];
    let mut gb1 = vec![0.0; h];
    let mut gw2 = vec![0.0; h];
    let mut gb2 = 0.0;
    let mut hidden = vec![0.0; h];

    for &i in idx {
        let row = matrix.row(i);
        let y = matrix.label_f64(i);
        let mut z = model.output_bias;
        for (j, slot) in hidden.iter_mut().enumerate() {
            let mut pre = model.hidden_bias[j];
            for (f, x) in row.iter().enumerate() {
                pre += x * model.hidden_weights[f * h + j];
            }
            let act = if pre > 0.0 { pre } else { 0.0 };
            *slot = act;
            z += model.output_weights[j] * act;
        }
        loss += ce_from_logit(z, y);
        let dz = sigmoid(z) - y;
        gb2 += dz;
        for (j, &act) in hidden.iter().enumerate() {
            gw2[j] += dz * act;
            if act > 0.0 {
                let dh = dz * model.output_weights[j];
                gb1[j] += dh;
                for (f, x) in row.iter().enumerate() {
                    gw1[f * h + j] += dh * x;
                }
            }
        }
    }

    let m = idx.len() as f64;
    loss = loss / m + l2_term(model, l2);
    for (g, w) in gw1.iter_mut().zip(&model.hidden_weights) {
        *g = *g / m + l2 * w;
    }
    for g in gb1.iter_mut() {
        *g /= m;
    }
    for (g, w) in gw2.iter_mut().zip(&model.output_weights) {
        *g = *g / m + l2 * w;
    }
    (
        loss,
        MlpGradients {
            hidden_weights: gw1,
            hidden_bias: gb1,
            output_weights: gw2,
            output_bias: gb2 / m,
        },
    )
}

// ---------------------------------------------------------------------------
// Training driver.

/// Shared mini-batch gradient descent loop over a flat parameter vector.
/// `enforce_monotone` reverts any epoch whose full training loss regressed
/// and halves the learning rate, which keeps the epoch-checkpoint loss
/// sequence non-increasing.
fn run_gradient_descent(
    config: &TrainConfig,
    n_rows: usize,
    init: Vec<f64>,
    rng: &mut ChaCha8Rng,
    mut grad_fn: impl FnMut(&[f64], &[usize]) -> (f64, Vec<f64>),
    mut loss_fn: impl FnMut(&[f64], &[usize], bool) -> f64,
    enforce_monotone: bool,
) -> Result<Vec<f64>, ModelError> {
    let mut indices: Vec<usize> = (0..n_rows).collect();
    indices.shuffle(rng);
    let n_val = ((config.validation_fraction * n_rows as f64).round() as usize).min(n_rows - 1);
    let (val_idx, train_idx) = indices.split_at(n_val);
    let mut train_idx = train_idx.to_vec();
    let val_idx = val_idx.to_vec();

    let mut params = init;
    let mut velocity = vec![0.0; params.len()];
    let mut lr = config.learning_rate;

    let mut prev_train_loss = loss_fn(&params, &train_idx, true);
    if !prev_train_loss.is_finite() {
        return Err(ModelError::Divergence);
    }
    let mut best_val = f64::INFINITY;
    let mut best_params = params.clone();
    let mut wait = 0usize;

    for _epoch in 0..config.max_epochs {
        train_idx.shuffle(rng);
        let epoch_start = params.clone();

        for batch in train_idx.chunks(config.batch_size) {
            let (_, grad) = grad_fn(&params, batch);
            for ((p, v), g) in params.iter_mut().zip(&mut velocity).zip(&grad) {
                *v = config.momentum * *v - lr * g;
                *p += *v;
            }
        }

        let train_loss = loss_fn(&params, &train_idx, true);
        if !train_loss.is_finite() {
            return Err(ModelError::Divergence);
        }
        if enforce_monotone && train_loss > prev_train_loss + 1e-12 {
            params = epoch_start;
            velocity.iter_mut().for_each(|v| *v = 0.0);
            lr *= 0.5;
            if lr < 1e-12 {
                break;
            }
            continue;
        }
        prev_train_loss = train_loss;

        if !val_idx.is_empty() {
            let val_loss = loss_fn(&params, &val_idx, false);
            if val_loss + 1e-12 < best_val {
                best_val = val_loss;
                best_params = params.clone();
                wait = 0;
            } else {
                wait += 1;
                if config.patience > 0 && wait >= config.patience {
                    break;
                }
            }
        }
    }

    if !val_idx.is_empty() && best_val.is_finite() {
        params = best_params;
    }
    Ok(params)
}

/// Trains an L2-regularized logistic regression by mini-batch gradient
/// descent. Deterministic given the config seed; the full-data training
/// loss is non-increasing over epoch checkpoints.
pub fn train_logistic(
    matrix: &FeatureMatrix,
    config: &TrainConfig,
) -> Result<LogisticModel, ModelError> {
    validate_train_inputs(matrix, config)?;
    let width = matrix.width();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = vec![0.0; width + 1];

    let params = run_gradient_descent(
        config,
        matrix.n_rows(),
        init,
        &mut rng,
        |params, batch| {
            let (w, b) = params.split_at(width);
            let (loss, gw, gb) = logistic_loss_grad_idx(matrix, batch, w, b[0], config.l2_penalty);
            let mut grad = gw;
            grad.push(gb);
            (loss, grad)
        },
        |params, idx, with_l2| {
            let (w, b) = params.split_at(width);
            let l2 = if with_l2 { config.l2_penalty } else { 0.0 };
            logistic_loss_idx(matrix, idx, w, b[0], l2)
        },
        true,
    )?;

    let (w, b) = params.split_at(width);
    Ok(LogisticModel {
        weights: w.to_vec(),
        bias: b[0],
    })
}

/// Trains a one-hidden-layer ReLU MLP. Weights are initialized from a
/// seeded uniform distribution scaled by fan-in; early stopping watches a
/// held-out validation slice when `validation_fraction > 0`.
pub fn train_mlp(
    matrix: &FeatureMatrix,
    config: &TrainConfig,
    hidden_units: usize,
) -> Result<MlpModel, ModelError> {
    validate_train_inputs(matrix, config)?;
    if hidden_units == 0 {
        return Err(ModelError::InvalidConfig("hidden_units must be at least 1".into()));
    }
    let width = matrix.width();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut init = Vec::with_capacity(width * hidden_units + 2 * hidden_units + 1);
    let bound1 = 1.0 / (width as f64).sqrt();
    for _ in 0..width * hidden_units {
        init.push(rng.random_range(-bound1..bound1));
    }
    init.resize(width * hidden_units + hidden_units, 0.0);
    let bound2 = 1.0 / (hidden_units as f64).sqrt();
    for _ in 0..hidden_units {
        init.push(rng.random_range(-bound2..bound2));
    }
    init.push(0.0);

    let unpack = |params: &[f64]| -> MlpModel {
        let (w1, rest) = params.split_at(width * hidden_units);
        let (b1, rest) = rest.split_at(hidden_units);
        let (w2, b2) = rest.split_at(hidden_units);
        MlpModel {
            n_features: width,
            hidden_units,
            hidden_weights: w1.to_vec(),
            hidden_bias: b1.to_vec(),
            output_weights: w2.to_vec(),
            output_bias: b2[0],
            activation: Activation::Relu,
        }
    };

    let params = run_gradient_descent(
        config,
        matrix.n_rows(),
        init,
        &mut rng,
        |params, batch| {
            let model = unpack(params);
            let (loss, g) = mlp_loss_grad_idx(matrix, batch, &model, config.l2_penalty);
            let mut grad = g.hidden_weights;
            grad.extend(g.hidden_bias);
            grad.extend(g.output_weights);
            grad.push(g.output_bias);
            (loss, grad)
        },
        |params, idx, with_l2| {
            let model = unpack(params);
            let l2 = if with_l2 { config.l2_penalty } else { 0.0 };
            mlp_loss_idx(matrix, idx, &model, l2)
        },
        false,
    )?;

    Ok(unpack(&params))
}

// ---------------------------------------------------------------------------
// Model document: self-describing JSON for reproducible audits.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub model: Model,
    pub encoding: EncodingSchema,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationMap>,
    pub train_seed: u64,
}

impl ModelDocument {
    pub fn to_json_string(&self) -> Result<String, ModelError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json_str(s: &str) -> Result<Self, ModelError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), ModelError> {
        std::fs::write(path, self.to_json_string()? + "\n")?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ModelError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}
