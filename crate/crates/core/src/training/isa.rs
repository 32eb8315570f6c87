use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::erm::pseudo_labels_from_scores;
use super::trace::{EpochRecord, TrainTrace};
use crate::error::{Error, Result};
use crate::eval::average_precision;
use crate::losses::{selector_risk_from_decisions, selector_surrogate, weighted_classifier_ce_loss, LossVariant, Normalization};
use crate::models::{fit_epochs, Differentiable, TrainConfig};
use crate::types::{label_to_unit, FeatureVector, LabeledSample, Region, Scorer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IsaConfig {
    pub beta: f64,
    pub pretrain_epochs: usize,
    pub total_epochs: usize,
    /// Selector is refit every this many epochs after pretraining.
    pub selector_update_period: usize,
    pub z_window: usize,
    pub g_window: usize,
    pub selector_variant: LossVariant,
    /// `epochs` is ignored; the loop runs `total_epochs`.
    pub predictor_cfg: TrainConfig,
    pub selector_cfg: TrainConfig,
}

impl Default for IsaConfig {
    fn default() -> Self {
        IsaConfig {
            beta: 3.0,
            pretrain_epochs: 10,
            total_epochs: 40,
            selector_update_period: 1,
            z_window: 10,
            g_window: 10,
            selector_variant: LossVariant::CrossEntropy,
            predictor_cfg: TrainConfig::default(),
            selector_cfg: TrainConfig {
                seed: 1,
                ..TrainConfig::default()
            },
        }
    }
}

impl IsaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::arg(format!("beta={} must be positive", self.beta)));
        }
        if self.pretrain_epochs >= self.total_epochs {
            return Err(Error::arg(format!(
                "pretrain_epochs={} must be below total_epochs={}",
                self.pretrain_epochs, self.total_epochs
            )));
        }
        if self.z_window == 0 || self.g_window == 0 {
            return Err(Error::arg("rolling windows must be at least 1"));
        }
        if self.selector_update_period == 0 {
            return Err(Error::arg("selector_update_period must be at least 1"));
        }
        if self.selector_variant == LossVariant::ZeroOne {
            return Err(Error::arg("selector_variant must be cross_entropy or focal"));
        }
        self.predictor_cfg.validate()?;
        self.selector_cfg.validate()
    }
}

#[derive(Debug, Clone)]
pub struct IsaOutcome<P, S> {
    pub predictor: P,
    pub selector: S,
    pub trace: TrainTrace,
}

/// Per-sample running mean over the last `window` vectors.
#[derive(Debug)]
struct Rolling {
    window: usize,
    history: VecDeque<Vec<f64>>,
}

impl Rolling {
    fn new(window: usize) -> Self {
        Rolling {
            window,
            history: VecDeque::with_capacity(window),
        }
    }

    fn push(&mut self, v: Vec<f64>) {
        if self.history.len() == self.window {
            self.history.pop_front();
        }
        self.history.push_back(v);
    }

    fn mean(&self) -> Vec<f64> {
        let k = self.history.len() as f64;
        let n = self.history.front().map_or(0, Vec::len);
        (0..n)
            .map(|i| self.history.iter().map(|v| v[i]).sum::<f64>() / k)
            .collect()
    }
}

fn all_scores<M: Scorer>(m: &M, xs: &[FeatureVector]) -> Result<Vec<f64>> {
    xs.iter()
        .map(|x| {
            let s = m.score(x);
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::InvalidHypothesisOutput(s));
            }
            Ok(s)
        })
        .collect()
}

/// Iterative soft abstain.
///
/// Pretraining epochs fit the predictor with unit weights. Every later epoch
/// fits the predictor on cross-entropy weighted by the rolling mean of the
/// selector's scores, and every `selector_update_period` epochs the selector is
/// fit to the rolling mean of the pseudo-labels `1{1{f > 1/2} = y}`.
/// `oracle` adds the selector AP against the true regions to the trace.
pub fn isa_train<P, S>(
    data: &[LabeledSample],
    mut predictor: P,
    mut selector: S,
    cfg: &IsaConfig,
    oracle: Option<&[Region]>,
) -> Result<IsaOutcome<P, S>>
where
    P: Differentiable,
    S: Differentiable,
{
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    if let Some(r) = oracle {
        if r.len() != data.len() {
            return Err(Error::DimensionMismatch {
                expected: data.len(),
                got: r.len(),
            });
        }
    }
    let n = data.len();
    let xs: Vec<FeatureVector> = data.iter().map(|s| s.x.clone()).collect();
    let ys: Vec<_> = data.iter().map(|s| s.y).collect();
    let y_unit: Vec<f64> = ys.iter().map(|&y| label_to_unit(y)).collect();
    let relevance: Option<Vec<bool>> = oracle.map(|r| r.iter().map(|g| g.is_informative()).collect());
    let has_positive = relevance.as_ref().is_some_and(|r| r.iter().any(|&b| b));

    let mut g_hist = Rolling::new(cfg.g_window);
    let mut z_hist = Rolling::new(cfg.z_window);
    let mut soft_z: Option<Vec<f64>> = None;
    let mut trace = TrainTrace::default();
    let ones = vec![1.0; n];

    for epoch in 0..cfg.total_epochs {
        let warm = epoch < cfg.pretrain_epochs;
        let weights = if warm {
            ones.clone()
        } else {
            g_hist.push(all_scores(&selector, &xs)?);
            g_hist.mean()
        };
        let predictor_loss = fit_epochs(&mut predictor, &xs, &cfg.predictor_cfg, 1, epoch, |idx, s| {
            let y: Vec<f64> = idx.iter().map(|&i| y_unit[i]).collect();
            let w: Vec<f64> = idx.iter().map(|&i| weights[i]).collect();
            weighted_classifier_ce_loss(s, &y, &w)
        })?;

        let f_scores = all_scores(&predictor, &xs)?;
        let z_hard = pseudo_labels_from_scores(&f_scores, &ys)?;
        if !warm && (epoch - cfg.pretrain_epochs).is_multiple_of(cfg.selector_update_period) {
            z_hist.push(z_hard.iter().map(|&z| f64::from(z)).collect());
            let z = z_hist.mean();
            fit_epochs(&mut selector, &xs, &cfg.selector_cfg, 1, epoch, |idx, s| {
                let t: Vec<f64> = idx.iter().map(|&i| z[i]).collect();
                selector_surrogate(cfg.selector_variant, s, &t, cfg.beta)
            })?;
            soft_z = Some(z);
        }

        let g_scores = all_scores(&selector, &xs)?;
        let target: Vec<f64> = soft_z
            .clone()
            .unwrap_or_else(|| z_hard.iter().map(|&z| f64::from(z)).collect());
        let selector_loss = selector_surrogate(cfg.selector_variant, &g_scores, &target, cfg.beta)?.value;
        let correct: Vec<bool> = z_hard.iter().map(|&z| z == 1).collect();
        let select: Vec<bool> = g_scores.iter().map(|&s| s > 0.5).collect();
        let selector_risk = selector_risk_from_decisions(&correct, &select, cfg.beta, Normalization::Mean)?;
        let ap = match (&relevance, has_positive) {
            (Some(rel), true) => Some(average_precision(&g_scores, rel)?),
            _ => None,
        };
        trace.push(EpochRecord {
            epoch,
            predictor_loss,
            selector_loss,
            selector_risk,
            ap,
            coverage: select.iter().filter(|&&s| s).count() as f64 / n as f64,
        });
    }
    Ok(IsaOutcome {
        predictor,
        selector,
        trace,
    })
}

/// Plain predictor training with unit weights, as used by the confidence baseline.
pub fn train_predictor<P: Differentiable>(data: &[LabeledSample], mut predictor: P, cfg: &TrainConfig) -> Result<(P, TrainTrace)> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    let xs: Vec<FeatureVector> = data.iter().map(|s| s.x.clone()).collect();
    let y_unit: Vec<f64> = data.iter().map(|s| label_to_unit(s.y)).collect();
    let mut trace = TrainTrace::default();
    for epoch in 0..cfg.epochs {
        let loss = fit_epochs(&mut predictor, &xs, cfg, 1, epoch, |idx, s| {
            let y: Vec<f64> = idx.iter().map(|&i| y_unit[i]).collect();
            weighted_classifier_ce_loss(s, &y, &vec![1.0; idx.len()])
        })?;
        let f_scores = all_scores(&predictor, &xs)?;
        let conf: Vec<f64> = f_scores.iter().map(|&f| confidence_score(f)).collect();
        let wrong = data.iter().zip(&f_scores).filter(|(s, &f)| (f > 0.5) != s.y.is_pos()).count();
        trace.push(EpochRecord {
            epoch,
            predictor_loss: loss,
            selector_loss: 0.0,
            selector_risk: wrong as f64 / data.len() as f64,
            ap: None,
            coverage: conf.iter().filter(|&&c| c > 0.5).count() as f64 / data.len() as f64,
        });
    }
    Ok((predictor, trace))
}

/// `max(f, 1 - f)` rescaled from `[1/2, 1]` onto `[0, 1]`.
pub fn confidence_score(f: f64) -> f64 {
    2.0 * f.max(1.0 - f) - 1.0
}

/// Selector whose score is the predictor's confidence.
#[derive(Debug, Clone)]
pub struct ConfidenceSelector<P>(pub P);

impl<P: Scorer> Scorer for ConfidenceSelector<P> {
    fn score(&self, x: &FeatureVector) -> f64 {
        confidence_score(self.0.score(x))
    }
}
