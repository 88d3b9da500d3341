//! Probabilistic binary classifiers and their training loop.
//!
//! Two classifier shapes are supported, both small enough to train
//! hundreds of times per experiment:
//!
//! * `MlpHead`: dense(D -> H) with ReLU, then dense(H -> 2) with
//!   softmax. H defaults to 64.
//! * `Logistic`: a single sigmoid unit, kept as the convex baseline.
//!
//! Parameters live in one flat `Vec<f64>`. For the MLP the layout is
//! `[W1 row-major, b1, W2 row-major, b2]`; for the logistic model
//! `[w, b]`. Training minimizes mean cross-entropy with Adam
//! (beta1 0.9, beta2 0.999, eps 1e-8), a per-epoch learning-rate decay
//! and seeded shuffling, and stops early when validation loss has not
//! improved for `patience` epochs. The returned parameters are the
//! ones from the best validation epoch, not the last.
//!
//! Everything is deterministic given the config seed: initialization
//! and shuffling come from one ChaCha stream, so two trainings with
//! identical inputs produce bitwise identical parameters.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{Label, Sample};
use crate::error::{PersistError, TrainError};

/// Default hidden width of the MLP head.
pub const DEFAULT_HIDDEN_UNITS: usize = 64;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

const UNIT_FORMAT: &str = "classifier-unit";
const UNIT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    MlpHead,
    Logistic,
}

/// Architecture of one classifier unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    pub input_dim: usize,
    /// Hidden width; must be 0 for `Logistic`.
    pub hidden_units: usize,
}

impl ClassifierSpec {
    pub fn mlp_head(input_dim: usize) -> ClassifierSpec {
        ClassifierSpec {
            kind: ClassifierKind::MlpHead,
            input_dim,
            hidden_units: DEFAULT_HIDDEN_UNITS,
        }
    }

    pub fn logistic(input_dim: usize) -> ClassifierSpec {
        ClassifierSpec {
            kind: ClassifierKind::Logistic,
            input_dim,
            hidden_units: 0,
        }
    }

    pub fn param_count(&self) -> usize {
        let d = self.input_dim;
        match self.kind {
            ClassifierKind::MlpHead => {
                let h = self.hidden_units;
                h * d + h + 2 * h + 2
            }
            ClassifierKind::Logistic => d + 1,
        }
    }

    pub(crate) fn validate(&self) -> Result<(), TrainError> {
        if self.input_dim == 0 {
            return Err(TrainError::InvalidSpec("input_dim must be positive".into()));
        }
        match self.kind {
            ClassifierKind::MlpHead if self.hidden_units == 0 => Err(TrainError::InvalidSpec(
                "MLP head needs at least one hidden unit".into(),
            )),
            ClassifierKind::Logistic if self.hidden_units != 0 => Err(TrainError::InvalidSpec(
                "logistic classifier has no hidden layer; set hidden_units to 0".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Optimizer and schedule settings for [`train`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Multiplicative learning-rate decay applied after every epoch.
    pub lr_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            lr_decay: 0.99,
            batch_size: 1,
            max_epochs: 100,
            patience: 5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub(crate) fn validate(&self) -> Result<(), TrainError> {
        let fail = |msg: String| Err(TrainError::InvalidConfig(msg));
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return fail(format!(
                "learning_rate must be finite and >= 0, got {}",
                self.learning_rate
            ));
        }
        if !self.lr_decay.is_finite() || self.lr_decay <= 0.0 || self.lr_decay > 1.0 {
            return fail(format!(
                "lr_decay must lie in (0, 1], got {}",
                self.lr_decay
            ));
        }
        if self.batch_size == 0 {
            return fail("batch_size must be positive".into());
        }
        if self.max_epochs == 0 {
            return fail("max_epochs must be positive".into());
        }
        Ok(())
    }
}

/// Losses recorded at the end of one training epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_loss: f64,
}

/// A trained classifier: parameters from the best validation epoch
/// plus the full training record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedUnit {
    pub spec: ClassifierSpec,
    pub config: TrainConfig,
    pub parameters: Vec<f64>,
    pub history: Vec<EpochStats>,
    /// Last epoch that actually ran (1-based). Smaller than
    /// `config.max_epochs` when early stopping triggered.
    pub stopped_epoch: usize,
}

impl TrainedUnit {
    pub fn input_dim(&self) -> usize {
        self.spec.input_dim
    }

    /// Class probabilities `(p_healthy, p_positive)` for one feature
    /// vector.
    pub fn forward(&self, x: &[f64]) -> Result<(f64, f64), TrainError> {
        forward(&self.spec, &self.parameters, x)
    }

    /// Probability of the positive class.
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64, TrainError> {
        self.forward(x).map(|(_, p)| p)
    }

    /// Serializes the unit as JSON. Parameters survive a round trip
    /// bit for bit (shortest round-trip float encoding).
    pub fn save(&self, path: &Path) -> Result<(), PersistError> {
        let file = UnitFile {
            format: UNIT_FORMAT.to_string(),
            version: UNIT_VERSION,
            unit: self.clone(),
        };
        let json = serde_json::to_string_pretty(&file).map_err(|source| PersistError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        std::fs::write(path, json).map_err(|source| PersistError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Loads and validates a unit saved by [`TrainedUnit::save`].
    pub fn load(path: &Path) -> Result<TrainedUnit, PersistError> {
        let invalid = |message: String| PersistError::Invalid {
            path: path.to_path_buf(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|source| PersistError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let file: UnitFile = serde_json::from_str(&text).map_err(|source| PersistError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        if file.format != UNIT_FORMAT {
            return Err(invalid(format!("unexpected format {:?}", file.format)));
        }
        if file.version != UNIT_VERSION {
            return Err(invalid(format!(
                "unsupported version {} (expected {UNIT_VERSION})",
                file.version
            )));
        }
        let unit = file.unit;
        unit.spec.validate().map_err(|e| invalid(e.to_string()))?;
        if unit.parameters.len() != unit.spec.param_count() {
            return Err(invalid(format!(
                "parameter count {} does not match spec ({})",
                unit.parameters.len(),
                unit.spec.param_count()
            )));
        }
        if !unit.parameters.iter().all(|p| p.is_finite()) {
            return Err(invalid("non-finite parameter".into()));
        }
        if unit.history.is_empty() {
            return Err(invalid("empty training history".into()));
        }
        if unit.history.last().map(|e| e.epoch) != Some(unit.stopped_epoch) {
            return Err(invalid("history does not end at stopped_epoch".into()));
        }
        Ok(unit)
    }
}

#[derive(Serialize, Deserialize)]
struct UnitFile {
    format: String,
    version: u32,
    unit: TrainedUnit,
}

fn check_dim(spec: &ClassifierSpec, found: usize) -> Result<(), TrainError> {
    if found != spec.input_dim {
        return Err(TrainError::DimensionMismatch {
            expected: spec.input_dim,
            found,
        });
    }
    Ok(())
}

fn check_params(spec: &ClassifierSpec, params: &[f64]) -> Result<(), TrainError> {
    if params.len() != spec.param_count() {
        return Err(TrainError::InvalidSpec(format!(
            "parameter vector has {} entries, spec needs {}",
            params.len(),
            spec.param_count()
        )));
    }
    Ok(())
}

/// Numerically stable `(p_healthy, p_positive)` from a logit pair.
fn softmax2(l0: f64, l1: f64) -> (f64, f64) {
    let m = l0.max(l1);
    let e0 = (l0 - m).exp();
    let e1 = (l1 - m).exp();
    let z = e0 + e1;
    (e0 / z, e1 / z)
}

/// Cross-entropy of one sample expressed through its logit pair,
/// computed as logsumexp(l) - l_label to stay finite for any logits.
fn ce_from_logits(l0: f64, l1: f64, label: Label) -> f64 {
    let m = l0.max(l1);
    let lse = m + ((l0 - m).exp() + (l1 - m).exp()).ln();
    lse - if label.is_positive() { l1 } else { l0 }
}

/// Parameter slice offsets for the MLP layout.
struct MlpLayout {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

fn mlp_layout(spec: &ClassifierSpec) -> MlpLayout {
    let d = spec.input_dim;
    let h = spec.hidden_units;
    MlpLayout {
        w1: 0,
        b1: h * d,
        w2: h * d + h,
        b2: h * d + h + 2 * h,
    }
}

/// Hidden pre-activations and output logits of the MLP.
fn mlp_pass(spec: &ClassifierSpec, params: &[f64], x: &[f64]) -> (Vec<f64>, [f64; 2]) {
    let d = spec.input_dim;
    let h = spec.hidden_units;
    let at = mlp_layout(spec);
    let mut pre = Vec::with_capacity(h);
    for j in 0..h {
        let row = &params[at.w1 + j * d..at.w1 + (j + 1) * d];
        let mut acc = params[at.b1 + j];
        for (w, v) in row.iter().zip(x) {
            acc += w * v;
        }
        pre.push(acc);
    }
    let mut logits = [params[at.b2], params[at.b2 + 1]];
    for (c, logit) in logits.iter_mut().enumerate() {
        let row = &params[at.w2 + c * h..at.w2 + (c + 1) * h];
        for (w, p) in row.iter().zip(&pre) {
            *logit += w * p.max(0.0);
        }
    }
    (pre, logits)
}

/// The logistic model seen as a logit pair `(0, z)`, which makes its
/// loss and gradient share the softmax code path.
fn logistic_logit(spec: &ClassifierSpec, params: &[f64], x: &[f64]) -> f64 {
    let d = spec.input_dim;
    let mut z = params[d];
    for (w, v) in params[..d].iter().zip(x) {
        z += w * v;
    }
    z
}

/// Class probabilities `(p_healthy, p_positive)`. The pair always
/// sums to 1 up to rounding.
pub fn forward(spec: &ClassifierSpec, params: &[f64], x: &[f64]) -> Result<(f64, f64), TrainError> {
    spec.validate()?;
    check_params(spec, params)?;
    check_dim(spec, x.len())?;
    match spec.kind {
        ClassifierKind::MlpHead => {
            let (_, logits) = mlp_pass(spec, params, x);
            Ok(softmax2(logits[0], logits[1]))
        }
        ClassifierKind::Logistic => {
            let z = logistic_logit(spec, params, x);
            Ok(softmax2(0.0, z))
        }
    }
}

fn sample_logits(spec: &ClassifierSpec, params: &[f64], x: &[f64]) -> (f64, f64) {
    match spec.kind {
        ClassifierKind::MlpHead => {
            let (_, logits) = mlp_pass(spec, params, x);
            (logits[0], logits[1])
        }
        ClassifierKind::Logistic => (0.0, logistic_logit(spec, params, x)),
    }
}

/// Mean cross-entropy of `params` over `samples`.
pub fn cross_entropy(
    spec: &ClassifierSpec,
    params: &[f64],
    samples: &[Sample],
) -> Result<f64, TrainError> {
    spec.validate()?;
    check_params(spec, params)?;
    if samples.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    let mut total = 0.0;
    for sample in samples {
        check_dim(spec, sample.features.len())?;
        let (l0, l1) = sample_logits(spec, params, &sample.features);
        total += ce_from_logits(l0, l1, sample.label);
    }
    Ok(total / samples.len() as f64)
}

fn batch_loss_grad(
    spec: &ClassifierSpec,
    params: &[f64],
    batch: &[&Sample],
) -> Result<(f64, Vec<f64>), TrainError> {
    let mut grad = vec![0.0; params.len()];
    let mut total = 0.0;
    let d = spec.input_dim;
    for sample in batch {
        check_dim(spec, sample.features.len())?;
        let x = &sample.features;
        let y = if sample.label.is_positive() { 1.0 } else { 0.0 };
        match spec.kind {
            ClassifierKind::MlpHead => {
                let at = mlp_layout(spec);
                let h = spec.hidden_units;
                let (pre, logits) = mlp_pass(spec, params, x);
                total += ce_from_logits(logits[0], logits[1], sample.label);
                let (p0, p1) = softmax2(logits[0], logits[1]);
                let dlogits = [p0 - (1.0 - y), p1 - y];
                for (c, &dl) in dlogits.iter().enumerate() {
                    grad[at.b2 + c] += dl;
                    let row = &mut grad[at.w2 + c * h..at.w2 + (c + 1) * h];
                    for (g, p) in row.iter_mut().zip(&pre) {
                        *g += dl * p.max(0.0);
                    }
                }
                for (j, &p) in pre.iter().enumerate() {
                    // ReLU gate: units at or below zero pass no gradient.
                    if p <= 0.0 {
                        continue;
                    }
                    let dh = dlogits[0] * params[at.w2 + j] + dlogits[1] * params[at.w2 + h + j];
                    grad[at.b1 + j] += dh;
                    let row = &mut grad[at.w1 + j * d..at.w1 + (j + 1) * d];
                    for (g, v) in row.iter_mut().zip(x) {
                        *g += dh * v;
                    }
                }
            }
            ClassifierKind::Logistic => {
                let z = logistic_logit(spec, params, x);
                total += ce_from_logits(0.0, z, sample.label);
                let (_, p1) = softmax2(0.0, z);
                let dz = p1 - y;
                for (g, v) in grad[..d].iter_mut().zip(x) {
                    *g += dz * v;
                }
                grad[d] += dz;
            }
        }
    }
    let scale = 1.0 / batch.len() as f64;
    for g in &mut grad {
        *g *= scale;
    }
    Ok((total * scale, grad))
}

/// Mean cross-entropy and its analytic gradient with respect to the
/// parameters.
pub fn cross_entropy_grad(
    spec: &ClassifierSpec,
    params: &[f64],
    samples: &[Sample],
) -> Result<(f64, Vec<f64>), TrainError> {
    spec.validate()?;
    check_params(spec, params)?;
    if samples.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    let refs: Vec<&Sample> = samples.iter().collect();
    batch_loss_grad(spec, params, &refs)
}

/// Weights drawn from N(0, 2 / fan_in), biases zero. One fixed draw
/// order (first layer row-major, then the output layer), so the same
/// seed always produces the same initialization.
fn init_params(spec: &ClassifierSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    use rand::Rng;
    let mut params = vec![0.0; spec.param_count()];
    let d = spec.input_dim;
    match spec.kind {
        ClassifierKind::MlpHead => {
            let h = spec.hidden_units;
            let at = mlp_layout(spec);
            let std1 = (2.0 / d as f64).sqrt();
            for w in &mut params[at.w1..at.w1 + h * d] {
                *w = std1 * rng.sample::<f64, _>(StandardNormal);
            }
            let std2 = (2.0 / h as f64).sqrt();
            for w in &mut params[at.w2..at.w2 + 2 * h] {
                *w = std2 * rng.sample::<f64, _>(StandardNormal);
            }
        }
        ClassifierKind::Logistic => {
            let std = (2.0 / d as f64).sqrt();
            for w in &mut params[..d] {
                *w = std * rng.sample::<f64, _>(StandardNormal);
            }
        }
    }
    params
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl AdamState {
    fn new(n: usize) -> AdamState {
        AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(self.t);
        let bc2 = 1.0 - ADAM_BETA2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = ADAM_BETA1 * self.m[i] + (1.0 - ADAM_BETA1) * grad[i];
            self.v[i] = ADAM_BETA2 * self.v[i] + (1.0 - ADAM_BETA2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
}

/// Trains one classifier unit.
///
/// Each epoch shuffles the training samples with the config's ChaCha
/// stream, applies Adam updates per mini-batch, then records
/// end-of-epoch mean cross-entropy on the training and validation
/// sets. When the validation loss fails to improve for
/// `config.patience` consecutive epochs, training stops and the
/// parameters of the best validation epoch are returned. A non-finite
/// loss or gradient anywhere aborts with [`TrainError::Diverged`].
pub fn train(
    spec: &ClassifierSpec,
    config: &TrainConfig,
    train_samples: &[Sample],
    validation: &[Sample],
) -> Result<TrainedUnit, TrainError> {
    spec.validate()?;
    config.validate()?;
    if train_samples.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    if validation.is_empty() {
        return Err(TrainError::EmptyValidation);
    }
    for sample in train_samples.iter().chain(validation) {
        check_dim(spec, sample.features.len())?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = init_params(spec, &mut rng);
    let mut adam = AdamState::new(params.len());
    let mut lr = config.learning_rate;
    let mut order: Vec<usize> = (0..train_samples.len()).collect();

    let mut history: Vec<EpochStats> = Vec::new();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut wait = 0usize;
    let mut stopped_epoch = 0usize;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &train_samples[i]).collect();
            let (loss, grad) = batch_loss_grad(spec, &params, &batch)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(TrainError::Diverged { epoch });
            }
            adam.step(&mut params, &grad, lr);
        }
        let train_loss = cross_entropy(spec, &params, train_samples)?;
        let validation_loss = cross_entropy(spec, &params, validation)?;
        if !train_loss.is_finite() || !validation_loss.is_finite() {
            return Err(TrainError::Diverged { epoch });
        }
        history.push(EpochStats {
            epoch,
            train_loss,
            validation_loss,
        });
        stopped_epoch = epoch;

        let improved = best
            .as_ref()
            .is_none_or(|(best_loss, _)| validation_loss < *best_loss);
        if improved {
            best = Some((validation_loss, params.clone()));
            wait = 0;
        } else {
            wait += 1;
            if wait >= config.patience {
                break;
            }
        }
        lr *= config.lr_decay;
    }

    let (_, parameters) = best.expect("at least one epoch ran");
    Ok(TrainedUnit {
        spec: *spec,
        config: *config,
        parameters,
        history,
        stopped_epoch,
    })
}

// ============================================================================
// Tests
// ============================================================================
