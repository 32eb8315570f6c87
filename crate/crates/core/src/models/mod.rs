//! Hypothesis classes: enumerable finite classes for exact ERM, and
//! differentiable scorers (linear, MLP) trained by gradient descent.

pub mod finite;
pub mod linear;
pub mod mlp;

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::LossValue;
use crate::types::{FeatureVector, RngSeed, Scorer};

pub use finite::*;
pub use linear::*;
pub use mlp::*;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// A scorer in `[0, 1]` with a flat parameter vector.
pub trait Differentiable: Scorer + Clone {
    fn num_params(&self) -> usize;
    fn params(&self) -> Vec<f64>;
    fn set_params(&mut self, p: &[f64]) -> Result<()>;
    fn scores(&self, xs: &[&FeatureVector]) -> Result<Vec<f64>>;
    /// Gradient of `sum_i dscore[i] * score(x_i)` with respect to the parameters.
    fn backward(&self, xs: &[&FeatureVector], dscore: &[f64]) -> Result<Vec<f64>>;
}

/// Runtime choice between the two differentiable families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScoreModel {
    Linear(LinearModel),
    Mlp(MlpModel),
}

impl ScoreModel {
    /// `hidden` empty gives a sigmoid linear model initialised at zero.
    pub fn build(input_dim: usize, hidden: &[usize], seed: RngSeed) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::arg("input dimension must be positive"));
        }
        if hidden.is_empty() {
            return Ok(ScoreModel::Linear(LinearModel::zeros(input_dim, Link::Sigmoid)));
        }
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden);
        dims.push(1);
        Ok(ScoreModel::Mlp(MlpModel::new_random(&dims, seed)?))
    }
}

impl Scorer for ScoreModel {
    fn score(&self, x: &FeatureVector) -> f64 {
        match self {
            ScoreModel::Linear(m) => m.score(x),
            ScoreModel::Mlp(m) => m.score(x),
        }
    }
}

impl Differentiable for ScoreModel {
    fn num_params(&self) -> usize {
        match self {
            ScoreModel::Linear(m) => m.num_params(),
            ScoreModel::Mlp(m) => m.num_params(),
        }
    }

    fn params(&self) -> Vec<f64> {
        match self {
            ScoreModel::Linear(m) => m.params(),
            ScoreModel::Mlp(m) => m.params(),
        }
    }

    fn set_params(&mut self, p: &[f64]) -> Result<()> {
        match self {
            ScoreModel::Linear(m) => m.set_params(p),
            ScoreModel::Mlp(m) => m.set_params(p),
        }
    }

    fn scores(&self, xs: &[&FeatureVector]) -> Result<Vec<f64>> {
        match self {
            ScoreModel::Linear(m) => m.scores(xs),
            ScoreModel::Mlp(m) => m.scores(xs),
        }
    }

    fn backward(&self, xs: &[&FeatureVector], dscore: &[f64]) -> Result<Vec<f64>> {
        match self {
            ScoreModel::Linear(m) => m.backward(xs, dscore),
            ScoreModel::Mlp(m) => m.backward(xs, dscore),
        }
    }
}

/// One gradient step with L2 decay. Returns the batch loss before the step.
pub fn gradient_step<M, F>(model: &mut M, xs: &[&FeatureVector], lr: f64, weight_decay: f64, loss_fn: F) -> Result<LossValue>
where
    M: Differentiable,
    F: FnOnce(&[f64]) -> Result<LossValue>,
{
    let scores = model.scores(xs)?;
    let loss = loss_fn(&scores)?;
    let dscore = loss
        .gradient
        .as_ref()
        .ok_or_else(|| Error::arg("loss did not provide a gradient"))?;
    let grad = model.backward(xs, dscore)?;
    let mut p = model.params();
    for (v, g) in p.iter_mut().zip(&grad) {
        *v -= lr * (g + weight_decay * *v);
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence(f64::INFINITY));
    }
    model.set_params(&p)?;
    Ok(loss)
}

/// Minibatch epochs of [`gradient_step`]. `loss_fn(indices, scores)` sees the
/// dataset indices of the batch. `epoch_offset` selects the schedule position
/// and reseeds the shuffle. Returns the mean batch loss of the last epoch.
pub fn fit_epochs<M, F>(
    model: &mut M,
    xs: &[FeatureVector],
    cfg: &TrainConfig,
    epochs: usize,
    epoch_offset: usize,
    mut loss_fn: F,
) -> Result<f64>
where
    M: Differentiable,
    F: FnMut(&[usize], &[f64]) -> Result<LossValue>,
{
    cfg.validate()?;
    let n = xs.len();
    if n == 0 {
        return Err(Error::EmptyData);
    }
    let batch = cfg.batch_size.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut last = f64::NAN;
    for e in 0..epochs {
        let epoch = epoch_offset + e;
        let lr = cfg.lr_at(epoch);
        let mut rng = RngSeed(cfg.seed).derive(epoch as u64).rng();
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(batch) {
            let bx: Vec<&FeatureVector> = chunk.iter().map(|&i| &xs[i]).collect();
            let loss = gradient_step(model, &bx, lr, cfg.weight_decay, |s| loss_fn(chunk, s))?;
            total += loss.value;
            batches += 1;
        }
        last = total / batches as f64;
        if !(last <= linear::DIVERGENCE_LIMIT) {
            return Err(Error::Divergence(last));
        }
    }
    Ok(last)
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    model: ScoreModel,
}

pub fn save_model(model: &ScoreModel, path: impl AsRef<Path>) -> Result<()> {
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        model: model.clone(),
    };
    fs::write(path, serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ScoreModel> {
    let file: ModelFile = serde_json::from_str(&fs::read_to_string(path)?)?;
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::Config(format!(
            "model format_version {} is not supported (expected {MODEL_FORMAT_VERSION})",
            file.format_version
        )));
    }
    if let ScoreModel::Mlp(m) = &file.model {
        m.validate()?;
    }
    Ok(file.model)
}
