use std::sync::Arc;

use super::trace::{EpochRecord, TrainTrace};
use crate::error::{Error, Result};
use crate::losses::{selector_risk_from_decisions, Normalization};
use crate::models::{fit_linear_subgradient, DecisionRule, FiniteClass, SurrogateLoss, TrainConfig};
use crate::types::{sign_decision, FeatureVector, Label, LabeledSample, Role, ScoredHypothesis};

/// Where a hypothesis comes from: exhaustive search over a finite class, or a
/// surrogate fit of a linear model.
#[derive(Debug, Clone)]
pub enum Learner {
    Finite(FiniteClass),
    Linear { loss: SurrogateLoss, cfg: TrainConfig },
}

#[derive(Debug, Clone)]
pub struct Fitted {
    pub hypothesis: ScoredHypothesis,
    /// Position in the class for finite learners.
    pub index: Option<usize>,
    /// Empirical 0-1 objective of the returned hypothesis.
    pub objective: f64,
}

fn check_data(data: &[LabeledSample]) -> Result<()> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    Ok(())
}

/// Per-sample `1{f(x_i) = y_i}`.
pub fn correctness(f: &ScoredHypothesis, data: &[LabeledSample]) -> Result<Vec<bool>> {
    data.iter().map(|s| Ok(sign_decision(f, &s.x)? == s.y)).collect()
}

/// Per-sample `1{g(x_i) > 0}`.
pub fn selection(g: &ScoredHypothesis, data: &[LabeledSample]) -> Result<Vec<bool>> {
    data.iter().map(|s| Ok(sign_decision(g, &s.x)?.is_pos())).collect()
}

/// Exhaustive argmin; strict comparison keeps the lowest index on ties.
fn argmin_by<F>(class: &FiniteClass, mut objective: F) -> (usize, f64)
where
    F: FnMut(&dyn DecisionRule) -> f64,
{
    let mut best = (0, f64::INFINITY);
    for (i, h) in class.rules().iter().enumerate() {
        let v = objective(h.as_ref());
        if v < best.1 {
            best = (i, v);
        }
    }
    best
}

fn masked_errors(rule: &dyn DecisionRule, data: &[LabeledSample], mask: Option<&[bool]>) -> usize {
    data.iter()
        .enumerate()
        .filter(|(i, s)| mask.is_none_or(|m| m[*i]) && rule.decide(&s.x) != s.y)
        .count()
}

fn fit_linear(
    data: &[LabeledSample],
    targets: &[Label],
    weights: Option<&[f64]>,
    loss: SurrogateLoss,
    cfg: &TrainConfig,
    role: Role,
) -> Result<ScoredHypothesis> {
    let xs: Vec<FeatureVector> = data.iter().map(|s| s.x.clone()).collect();
    let model = fit_linear_subgradient(&xs, targets, loss, weights, cfg)?;
    Ok(ScoredHypothesis::new(role, Arc::new(model)))
}

/// Minimizer of the empirical 0-1 error `(1/n) sum 1{f(x_i) != y_i}`.
pub fn erm_classifier(data: &[LabeledSample], learner: &Learner) -> Result<Fitted> {
    subset_fit(data, None, learner)
}

/// Minimizer of `(1/n) sum 1{g(x_i) > 0} 1{f(x_i) != y_i}`; unselected samples
/// carry no weight at all.
pub fn subset_erm_classifier(data: &[LabeledSample], g_hat: &ScoredHypothesis, learner: &Learner) -> Result<Fitted> {
    check_data(data)?;
    let mask = selection(g_hat, data)?;
    if !mask.iter().any(|&m| m) {
        return Err(Error::EmptySelection);
    }
    subset_fit(data, Some(&mask), learner)
}

fn subset_fit(data: &[LabeledSample], mask: Option<&[bool]>, learner: &Learner) -> Result<Fitted> {
    check_data(data)?;
    let n = data.len() as f64;
    match learner {
        Learner::Finite(class) => {
            let (i, errs) = argmin_by(class, |h| masked_errors(h, data, mask) as f64);
            Ok(Fitted {
                hypothesis: class.hypothesis(i, Role::Predictor),
                index: Some(i),
                objective: errs / n,
            })
        }
        Learner::Linear { loss, cfg } => {
            let ys: Vec<Label> = data.iter().map(|s| s.y).collect();
            let weights: Option<Vec<f64>> = mask.map(|m| m.iter().map(|&b| f64::from(u8::from(b))).collect());
            let h = fit_linear(data, &ys, weights.as_deref(), *loss, cfg, Role::Predictor)?;
            let correct = correctness(&h, data)?;
            let errs = correct
                .iter()
                .enumerate()
                .filter(|(i, ok)| mask.is_none_or(|m| m[*i]) && !**ok)
                .count();
            Ok(Fitted {
                hypothesis: h,
                index: None,
                objective: errs as f64 / n,
            })
        }
    }
}

/// Minimizer of the empirical selector risk `R_S(g; f_hat, beta)` with `f_hat` fixed.
/// The linear learner fits pseudo-labels `1{f_hat(x_i) = y_i}` with the
/// abstain-side samples weighted by `beta`.
pub fn erm_selector(data: &[LabeledSample], f_hat: &ScoredHypothesis, learner: &Learner, beta: f64) -> Result<Fitted> {
    check_data(data)?;
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::arg(format!("beta={beta} must be positive")));
    }
    let correct = correctness(f_hat, data)?;
    match learner {
        Learner::Finite(class) => {
            let mut select = vec![false; data.len()];
            let (i, risk) = argmin_by(class, |h| {
                for (s, out) in data.iter().zip(select.iter_mut()) {
                    *out = h.decide(&s.x).is_pos();
                }
                selector_risk_from_decisions(&correct, &select, beta, Normalization::Mean).expect("non-empty, equal lengths")
            });
            Ok(Fitted {
                hypothesis: class.hypothesis(i, Role::Selector),
                index: Some(i),
                objective: risk,
            })
        }
        Learner::Linear { loss, cfg } => {
            let z: Vec<Label> = correct.iter().map(|&c| Label::from_bool(c)).collect();
            let w: Vec<f64> = correct.iter().map(|&c| if c { 1.0 } else { beta }).collect();
            let h = fit_linear(data, &z, Some(&w), *loss, cfg, Role::Selector)?;
            let select = selection(&h, data)?;
            Ok(Fitted {
                objective: selector_risk_from_decisions(&correct, &select, beta, Normalization::Mean)?,
                hypothesis: h,
                index: None,
            })
        }
    }
}

#[derive(Debug, Clone)]
pub struct Alternation {
    /// Plain ERM predictor the loop starts from.
    pub f_erm: Fitted,
    /// Predictor after the last subset-ERM step.
    pub f_tilde: Fitted,
    pub g_hat: Fitted,
    /// One record per round: `selector_risk` is the selector step's objective,
    /// `predictor_loss` the masked training error of the subset step.
    pub trace: TrainTrace,
}

/// Alternates the selector ERM and the subset-ERM classifier, feeding each new
/// predictor back in. Stops early once a finite pair repeats.
pub fn alternate_minimize(
    data: &[LabeledSample],
    class_f: &Learner,
    class_g: &Learner,
    beta: f64,
    rounds: usize,
) -> Result<Alternation> {
    if rounds == 0 {
        return Err(Error::arg("rounds must be at least 1"));
    }
    let f_erm = erm_classifier(data, class_f)?;
    let mut f = f_erm.clone();
    let mut g: Option<Fitted> = None;
    let mut trace = TrainTrace::default();
    let mut last_pair: Option<(usize, usize)> = None;
    for round in 0..rounds {
        let g_next = erm_selector(data, &f.hypothesis, class_g, beta)?;
        let f_next = subset_erm_classifier(data, &g_next.hypothesis, class_f)?;
        let sel = selection(&g_next.hypothesis, data)?;
        trace.push(EpochRecord {
            epoch: round,
            predictor_loss: f_next.objective,
            selector_loss: g_next.objective,
            selector_risk: g_next.objective,
            ap: None,
            coverage: sel.iter().filter(|&&s| s).count() as f64 / data.len() as f64,
        });
        let pair = f_next.index.zip(g_next.index);
        f = f_next;
        g = Some(g_next);
        if pair.is_some() && pair == last_pair {
            break;
        }
        last_pair = pair;
    }
    Ok(Alternation {
        f_erm,
        f_tilde: f,
        g_hat: g.expect("at least one round"),
        trace,
    })
}

/// `z_i = 1{1{f(x_i) > 1/2} = 1{y_i = +1}}`.
pub fn pseudo_labels(f_hat: &ScoredHypothesis, data: &[LabeledSample]) -> Result<Vec<u8>> {
    Ok(correctness(f_hat, data)?.into_iter().map(u8::from).collect())
}

/// Pseudo-labels from raw predictor scores, threshold 1/2.
pub fn pseudo_labels_from_scores(scores: &[f64], ys: &[Label]) -> Result<Vec<u8>> {
    if scores.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: ys.len(),
            got: scores.len(),
        });
    }
    scores
        .iter()
        .zip(ys)
        .map(|(&s, &y)| {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::InvalidHypothesisOutput(s));
            }
            Ok(u8::from((s > 0.5) == y.is_pos()))
        })
        .collect()
}
