use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Differentiable;
use crate::error::{Error, Result};
use crate::types::{FeatureVector, Label, RngSeed, Scorer};

/// Training loss above this aborts a fit.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    /// Raw margin; decisions use its sign.
    Identity,
    #[default]
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateLoss {
    Hinge,
    Logistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Clamped to the sample count.
    pub batch_size: usize,
    pub weight_decay: f64,
    /// `(epoch, factor)` pairs; from `epoch` on the rate is multiplied by `factor`.
    pub lr_schedule: Vec<(usize, f64)>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            epochs: 50,
            batch_size: 64,
            weight_decay: 0.0,
            lr_schedule: Vec::new(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::arg(format!("learning_rate={} must be positive", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::arg("batch_size must be at least 1"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::arg(format!("weight_decay={} must be non-negative", self.weight_decay)));
        }
        for &(_, f) in &self.lr_schedule {
            if !(f > 0.0 && f.is_finite()) {
                return Err(Error::arg(format!("lr_schedule factor {f} must be positive")));
            }
        }
        Ok(())
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr_schedule
            .iter()
            .filter(|(e, _)| *e <= epoch)
            .fold(self.learning_rate, |lr, (_, f)| lr * f)
    }
}

pub fn sigmoid(m: f64) -> f64 {
    if m >= 0.0 {
        1.0 / (1.0 + (-m).exp())
    } else {
        let e = m.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(v))` without overflow.
fn softplus(v: f64) -> f64 {
    if v > 0.0 {
        v + (-v).exp().ln_1p()
    } else {
        v.exp().ln_1p()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub link: Link,
    /// Weighted mean training loss after the last epoch, if fitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_loss: Option<f64>,
}

impl LinearModel {
    pub fn zeros(dim: usize, link: Link) -> Self {
        LinearModel {
            weights: vec![0.0; dim],
            bias: 0.0,
            link,
            final_loss: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn margin(&self, x: &FeatureVector) -> f64 {
        self.weights
            .iter()
            .zip(x.as_slice())
            .map(|(w, v)| w * v)
            .sum::<f64>()
            + self.bias
    }

    fn check_dim(&self, x: &FeatureVector) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.dim(),
            });
        }
        Ok(())
    }
}

/// Scores are `sigmoid(margin)` for both links, so thresholding at 0.5 is the
/// sign of the margin.
impl Scorer for LinearModel {
    fn score(&self, x: &FeatureVector) -> f64 {
        sigmoid(self.margin(x))
    }
}

impl Differentiable for LinearModel {
    fn num_params(&self) -> usize {
        self.weights.len() + 1
    }

    fn params(&self) -> Vec<f64> {
        let mut p = self.weights.clone();
        p.push(self.bias);
        p
    }

    fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.num_params() {
            return Err(Error::DimensionMismatch {
                expected: self.num_params(),
                got: p.len(),
            });
        }
        let d = self.weights.len();
        self.weights.copy_from_slice(&p[..d]);
        self.bias = p[d];
        Ok(())
    }

    fn scores(&self, xs: &[&FeatureVector]) -> Result<Vec<f64>> {
        xs.iter()
            .map(|x| {
                self.check_dim(x)?;
                Ok(sigmoid(self.margin(x)))
            })
            .collect()
    }

    fn backward(&self, xs: &[&FeatureVector], dscore: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        let mut grad = vec![0.0; d + 1];
        for (x, &ds) in xs.iter().zip(dscore) {
            self.check_dim(x)?;
            let s = sigmoid(self.margin(x));
            let dm = ds * s * (1.0 - s);
            for (g, v) in grad.iter_mut().zip(x.as_slice()) {
                *g += dm * v;
            }
            grad[d] += dm;
        }
        Ok(grad)
    }
}

/// Per-sample surrogate value and derivative with respect to the margin.
fn margin_loss(loss: SurrogateLoss, y: Label, m: f64) -> (f64, f64) {
    let ym = y.signf() * m;
    match loss {
        SurrogateLoss::Hinge => {
            if ym < 1.0 {
                (1.0 - ym, -y.signf())
            } else {
                (0.0, 0.0)
            }
        }
        SurrogateLoss::Logistic => (softplus(-ym), -y.signf() * sigmoid(-ym)),
    }
}

/// One subgradient step on `(1/|B|) sum_{i in B} w_i loss_i + (wd/2) |w|^2`.
/// Returns the batch loss before the step.
pub fn linear_step(
    model: &mut LinearModel,
    xs: &[&FeatureVector],
    ys: &[Label],
    weights: Option<&[f64]>,
    loss: SurrogateLoss,
    lr: f64,
    weight_decay: f64,
) -> Result<f64> {
    let b = xs.len();
    if b == 0 {
        return Err(Error::EmptyData);
    }
    let d = model.dim();
    let mut grad = vec![0.0; d + 1];
    let mut total = 0.0;
    for (i, x) in xs.iter().enumerate() {
        model.check_dim(x)?;
        let w = weights.map_or(1.0, |w| w[i]);
        if w == 0.0 {
            continue;
        }
        let (l, dl) = margin_loss(loss, ys[i], model.margin(x));
        total += w * l;
        for (g, v) in grad.iter_mut().zip(x.as_slice()) {
            *g += w * dl * v;
        }
        grad[d] += w * dl;
    }
    let bf = b as f64;
    for (wj, g) in model.weights.iter_mut().zip(&grad) {
        *wj -= lr * (g / bf + weight_decay * *wj);
    }
    model.bias -= lr * grad[d] / bf;
    Ok(total / bf)
}

fn weighted_mean_loss(model: &LinearModel, xs: &[FeatureVector], ys: &[Label], weights: Option<&[f64]>, loss: SurrogateLoss) -> f64 {
    xs.iter()
        .zip(ys)
        .enumerate()
        .map(|(i, (x, &y))| weights.map_or(1.0, |w| w[i]) * margin_loss(loss, y, model.margin(x)).0)
        .sum::<f64>()
        / xs.len() as f64
}

/// Minibatch subgradient descent from the zero vector.
pub fn fit_linear_subgradient(
    xs: &[FeatureVector],
    ys: &[Label],
    loss: SurrogateLoss,
    weights: Option<&[f64]>,
    cfg: &TrainConfig,
) -> Result<LinearModel> {
    cfg.validate()?;
    let n = xs.len();
    if n == 0 {
        return Err(Error::EmptyData);
    }
    if ys.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: ys.len() });
    }
    if let Some(w) = weights {
        if w.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: w.len() });
        }
        if let Some(bad) = w.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::arg(format!("sample weight {bad} must be finite and non-negative")));
        }
    }
    let link = match loss {
        SurrogateLoss::Hinge => Link::Identity,
        SurrogateLoss::Logistic => Link::Sigmoid,
    };
    let mut model = LinearModel::zeros(xs[0].dim(), link);
    let batch = cfg.batch_size.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = RngSeed(cfg.seed).rng();
    let mut bx = Vec::with_capacity(batch);
    let mut by = Vec::with_capacity(batch);
    let mut bw = Vec::with_capacity(batch);
    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at(epoch);
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            bx.clear();
            by.clear();
            bw.clear();
            for &i in chunk {
                bx.push(&xs[i]);
                by.push(ys[i]);
                bw.push(weights.map_or(1.0, |w| w[i]));
            }
            linear_step(&mut model, &bx, &by, Some(&bw), loss, lr, cfg.weight_decay)?;
        }
        let epoch_loss = weighted_mean_loss(&model, xs, ys, weights, loss);
        if !(epoch_loss <= DIVERGENCE_LIMIT) {
            return Err(Error::Divergence(epoch_loss));
        }
        model.final_loss = Some(epoch_loss);
    }
    if model.final_loss.is_none() {
        model.final_loss = Some(weighted_mean_loss(&model, xs, ys, weights, loss));
    }
    Ok(model)
}
