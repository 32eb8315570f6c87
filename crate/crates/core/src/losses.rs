//! Selector risk and surrogate losses.
//!
//! The weighted 0-1 selector risk of `g` given a predictor `f` charges `beta` for
//! every selected point that `f` gets wrong and `1` for every abstained point that
//! `f` gets right. Its population version under the noisy generative process with
//! `f = f*` is evaluated exactly on discrete supports using
//! `P[f* != y | x] = 1/4 - g*(x) lambda(x)/2`.
//!
//! Differentiable surrogates take scores in `(0, 1)`. Scores are clamped to
//! `[SCORE_EPS, 1 - SCORE_EPS]` before any logarithm; the number of clamped entries
//! is reported in [`LossValue::clamped`]. All surrogate losses are mean-normalized
//! and their gradients are with respect to the scores of the mean loss.

use serde::{Deserialize, Serialize};

use crate::datagen::DiscreteSpec;
use crate::error::{Error, Result};
use crate::types::{sign_decision, Label, LabeledSample, ScoredHypothesis};

pub const SCORE_EPS: f64 = 1e-7;

/// Upper cap on the admissible interval.
pub const BETA_CAP: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossVariant {
    ZeroOne,
    CrossEntropy,
    Focal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    Sum,
    #[default]
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectorLossParams {
    pub beta: f64,
    pub variant: LossVariant,
    #[serde(default)]
    pub normalization: Normalization,
}

impl SelectorLossParams {
    pub fn zero_one(beta: f64) -> Self {
        SelectorLossParams {
            beta,
            variant: LossVariant::ZeroOne,
            normalization: Normalization::Mean,
        }
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaInterval {
    pub lo: f64,
    pub hi: f64,
}

impl BetaInterval {
    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }

    pub fn contains(&self, beta: f64) -> bool {
        !self.is_empty() && beta >= self.lo && beta <= self.hi
    }
}

/// Range of `beta` for which `g*` minimizes the population selector risk with a
/// margin, given the uniform noise gap `lambda_bar`.
///
/// `[ (3 - 2l)/(1 + 2l) + l, min((3 + 2l)/(1 - 2l) - l/(1 - 4l^2), 10) ]`, and
/// `[2, 10]` at `l = 1/2` where the upper expression diverges.
pub fn beta_interval(lambda_bar: f64) -> Result<BetaInterval> {
    if !(lambda_bar > 0.0 && lambda_bar <= 0.5) {
        return Err(Error::arg(format!("lambda_bar={lambda_bar} outside (0, 0.5]")));
    }
    if lambda_bar == 0.5 {
        return Ok(BetaInterval { lo: 2.0, hi: BETA_CAP });
    }
    let l = lambda_bar;
    let lo = (3.0 - 2.0 * l) / (1.0 + 2.0 * l) + l;
    let hi = (3.0 + 2.0 * l) / (1.0 - 2.0 * l) - l / (1.0 - 4.0 * l * l);
    Ok(BetaInterval {
        lo,
        hi: hi.min(BETA_CAP),
    })
}

/// Weighted 0-1 selector risk from per-sample predictor correctness and selector
/// decisions.
pub fn selector_risk_from_decisions(
    f_correct: &[bool],
    g_select: &[bool],
    beta: f64,
    normalization: Normalization,
) -> Result<f64> {
    if f_correct.is_empty() {
        return Err(Error::EmptyData);
    }
    if f_correct.len() != g_select.len() {
        return Err(Error::DimensionMismatch {
            expected: f_correct.len(),
            got: g_select.len(),
        });
    }
    let total: f64 = f_correct
        .iter()
        .zip(g_select)
        .map(|(&ok, &sel)| match (ok, sel) {
            (false, true) => beta,
            (true, false) => 1.0,
            _ => 0.0,
        })
        .fold(0.0, |acc, v| acc + v);
    Ok(match normalization {
        Normalization::Sum => total,
        Normalization::Mean => total / f_correct.len() as f64,
    })
}

/// Empirical selector risk of `g` given predictor `f`. Only the `ZeroOne` variant
/// is meaningful here.
pub fn selector_risk_empirical(
    g: &ScoredHypothesis,
    f: &ScoredHypothesis,
    data: &[LabeledSample],
    params: &SelectorLossParams,
) -> Result<f64> {
    if params.variant != LossVariant::ZeroOne {
        return Err(Error::arg("empirical selector risk is defined for the zero_one variant"));
    }
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    let mut correct = Vec::with_capacity(data.len());
    let mut select = Vec::with_capacity(data.len());
    for s in data {
        correct.push(sign_decision(f, &s.x)? == s.y);
        select.push(sign_decision(g, &s.x)?.is_pos());
    }
    selector_risk_from_decisions(&correct, &select, params.beta, params.normalization)
}

fn check_atoms(g: &[Label], spec: &DiscreteSpec) -> Result<()> {
    if g.len() != spec.len() {
        return Err(Error::DimensionMismatch {
            expected: spec.len(),
            got: g.len(),
        });
    }
    Ok(())
}

/// Exact population selector risk `R(g; f*, beta)` for per-atom selector decisions.
pub fn selector_risk_population(g: &[Label], spec: &DiscreteSpec, beta: f64) -> Result<f64> {
    check_atoms(g, spec)?;
    Ok(spec
        .atoms()
        .iter()
        .zip(g)
        .map(|(a, d)| {
            if d.is_pos() {
                a.mass * beta * a.p_flip()
            } else {
                a.mass * a.p_agree()
            }
        })
        .fold(0.0, |acc, v| acc + v))
}

/// `R(g; f*, beta) - R(g*; f*, beta)`, summed atom by atom over the disagreement set.
pub fn risk_gap(g: &[Label], spec: &DiscreteSpec, beta: f64) -> Result<f64> {
    check_atoms(g, spec)?;
    Ok(spec
        .atoms()
        .iter()
        .zip(g)
        .filter(|(a, d)| a.region.g_star() != **d)
        .map(|(a, d)| {
            let lam = a.lambda;
            if d.is_pos() {
                // selected although uninformative
                a.mass * (beta * (0.25 + lam / 2.0) - 0.75 + lam / 2.0)
            } else {
                // abstained although informative
                a.mass * (0.75 + lam / 2.0 - beta * (0.25 - lam / 2.0))
            }
        })
        .fold(0.0, |acc, v| acc + v))
}

/// `E[(l(g) - l(g*))^2]` where `l` is the per-sample selector loss with `f = f*`.
pub fn excess_loss_second_moment(g: &[Label], spec: &DiscreteSpec, beta: f64) -> Result<f64> {
    check_atoms(g, spec)?;
    Ok(spec
        .atoms()
        .iter()
        .zip(g)
        .filter(|(a, d)| a.region.g_star() != **d)
        .map(|(a, _)| a.mass * (beta * beta * a.p_flip() + a.p_agree()))
        .fold(0.0, |acc, v| acc + v))
}

/// Margin constant `lambda_bar / (4 (1 + 2 lambda_bar))`.
pub fn margin_constant(lambda_bar: f64) -> f64 {
    lambda_bar / (4.0 * (1.0 + 2.0 * lambda_bar))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub gradient: Option<Vec<f64>>,
    /// Number of scores that had to be clamped away from 0 or 1.
    pub clamped: usize,
}

fn check_pair(a: usize, b: usize) -> Result<()> {
    if a == 0 {
        return Err(Error::EmptyData);
    }
    if a != b {
        return Err(Error::DimensionMismatch { expected: a, got: b });
    }
    Ok(())
}

fn check_target(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::arg(format!("target {t} outside [0, 1]")));
    }
    Ok(())
}

fn clamp_score(s: f64, clamped: &mut usize) -> Result<f64> {
    if !s.is_finite() {
        return Err(Error::InvalidHypothesisOutput(s));
    }
    let c = s.clamp(SCORE_EPS, 1.0 - SCORE_EPS);
    if c != s {
        *clamped += 1;
    }
    Ok(c)
}

/// `-(1/n) sum { z log g + beta (1 - z) log(1 - g) }`. Targets may be soft.
pub fn selector_ce_loss(g_scores: &[f64], z: &[f64], beta: f64) -> Result<LossValue> {
    check_pair(g_scores.len(), z.len())?;
    let n = g_scores.len() as f64;
    let mut clamped = 0;
    let mut value = 0.0;
    let mut grad = Vec::with_capacity(g_scores.len());
    for (&s, &t) in g_scores.iter().zip(z) {
        check_target(t)?;
        let g = clamp_score(s, &mut clamped)?;
        value -= t * g.ln() + beta * (1.0 - t) * (1.0 - g).ln();
        grad.push(-(t / g - beta * (1.0 - t) / (1.0 - g)) / n);
    }
    Ok(LossValue {
        value: value / n,
        gradient: Some(grad),
        clamped,
    })
}

/// `-(1/n) sum { z (1 - g) log g + beta (1 - z) g log(1 - g) }`.
pub fn selector_focal_loss(g_scores: &[f64], z: &[f64], beta: f64) -> Result<LossValue> {
    check_pair(g_scores.len(), z.len())?;
    let n = g_scores.len() as f64;
    let mut clamped = 0;
    let mut value = 0.0;
    let mut grad = Vec::with_capacity(g_scores.len());
    for (&s, &t) in g_scores.iter().zip(z) {
        check_target(t)?;
        let g = clamp_score(s, &mut clamped)?;
        let (lg, l1g) = (g.ln(), (1.0 - g).ln());
        value -= t * (1.0 - g) * lg + beta * (1.0 - t) * g * l1g;
        let d_pos = -lg + (1.0 - g) / g;
        let d_neg = l1g - g / (1.0 - g);
        grad.push(-(t * d_pos + beta * (1.0 - t) * d_neg) / n);
    }
    Ok(LossValue {
        value: value / n,
        gradient: Some(grad),
        clamped,
    })
}

/// `-(1/n) sum w_i { y log f + (1 - y) log(1 - f) }` with `y` in `{0, 1}`.
pub fn weighted_classifier_ce_loss(f_scores: &[f64], y_unit: &[f64], weights: &[f64]) -> Result<LossValue> {
    check_pair(f_scores.len(), y_unit.len())?;
    check_pair(f_scores.len(), weights.len())?;
    let n = f_scores.len() as f64;
    let mut clamped = 0;
    let mut value = 0.0;
    let mut grad = Vec::with_capacity(f_scores.len());
    for ((&s, &y), &w) in f_scores.iter().zip(y_unit).zip(weights) {
        check_target(y)?;
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::arg(format!("sample weight {w} must be finite and non-negative")));
        }
        let f = clamp_score(s, &mut clamped)?;
        if w == 0.0 {
            grad.push(0.0);
            continue;
        }
        value -= w * (y * f.ln() + (1.0 - y) * (1.0 - f).ln());
        grad.push(-w * (y / f - (1.0 - y) / (1.0 - f)) / n);
    }
    Ok(LossValue {
        value: value / n,
        gradient: Some(grad),
        clamped,
    })
}

/// Mean hinge loss on raw margins; the subgradient is taken as 0 at the kink.
pub fn hinge_loss(margin_scores: &[f64], y: &[Label]) -> Result<LossValue> {
    check_pair(margin_scores.len(), y.len())?;
    let n = margin_scores.len() as f64;
    let mut value = 0.0;
    let mut grad = Vec::with_capacity(y.len());
    for (&s, &l) in margin_scores.iter().zip(y) {
        let m = 1.0 - l.signf() * s;
        if m > 0.0 {
            value += m;
            grad.push(-l.signf() / n);
        } else {
            grad.push(0.0);
        }
    }
    Ok(LossValue {
        value: value / n,
        gradient: Some(grad),
        clamped: 0,
    })
}

/// Selector surrogate dispatch used by the training loops.
pub fn selector_surrogate(variant: LossVariant, g_scores: &[f64], z: &[f64], beta: f64) -> Result<LossValue> {
    match variant {
        LossVariant::CrossEntropy => selector_ce_loss(g_scores, z, beta),
        LossVariant::Focal => selector_focal_loss(g_scores, z, beta),
        LossVariant::ZeroOne => Err(Error::arg("zero_one selector loss is not differentiable")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::Atom;
    use crate::types::{FeatureVector, Region};

    fn two_atom() -> DiscreteSpec {
        DiscreteSpec::new(
            vec![
                Atom::new(FeatureVector::scalar(0.0), 0.5, Region::Informative, 0.5, Label::Pos),
                Atom::new(FeatureVector::scalar(1.0), 0.5, Region::Uninformative, 0.5, Label::Pos),
            ],
            0.5,
        )
        .unwrap()
    }

    #[test]
    fn beta_interval_closed_forms() {
        let b = beta_interval(0.5).unwrap();
        assert_eq!((b.lo, b.hi), (2.0, 10.0));
        let b = beta_interval(0.3).unwrap();
        assert!((b.lo - 1.8).abs() < 1e-12);
        assert!((b.hi - 8.53125).abs() < 1e-12);
        for k in 1..=5 {
            assert!(beta_interval(k as f64 / 10.0).unwrap().contains(3.0), "lambda {k}/10");
        }
        assert!(beta_interval(0.0).is_err());
        assert!(beta_interval(0.6).is_err());
    }

    #[test]
    fn empirical_risk_branches() {
        let mean = Normalization::Mean;
        assert_eq!(selector_risk_from_decisions(&[true], &[true], 3.0, mean).unwrap(), 0.0);
        assert_eq!(selector_risk_from_decisions(&[false], &[true], 3.0, mean).unwrap(), 3.0);
        let c = [true, false];
        let s = [false, false];
        assert_eq!(selector_risk_from_decisions(&c, &s, 3.0, Normalization::Sum).unwrap(), 1.0);
        assert_eq!(selector_risk_from_decisions(&c, &s, 3.0, mean).unwrap(), 0.5);
        assert!(matches!(
            selector_risk_from_decisions(&[], &[], 3.0, mean),
            Err(Error::EmptyData)
        ));
    }

    #[test]
    fn population_risk_two_atom() {
        let spec = two_atom();
        let g_star = spec.g_star();
        let all = vec![Label::Pos; 2];
        let r_star = selector_risk_population(&g_star, &spec, 3.0).unwrap();
        let r_all = selector_risk_population(&all, &spec, 3.0).unwrap();
        assert!((r_star - 0.25).abs() < 1e-12);
        assert!((r_all - 0.75).abs() < 1e-12);
        assert!((risk_gap(&all, &spec, 3.0).unwrap() - 0.5).abs() < 1e-12);
        assert!((margin_constant(0.5) * 0.5 - 0.03125).abs() < 1e-15);
    }

    #[test]
    fn ce_point_values() {
        let v = selector_ce_loss(&[0.999999], &[1.0], 3.0).unwrap();
        assert!(v.value < 1e-5);
        let v = selector_ce_loss(&[0.5], &[0.0], 3.0).unwrap();
        assert!((v.value - 3.0 * 2f64.ln()).abs() < 1e-12);
        let v = selector_ce_loss(&[0.5, 0.3], &[1.0, 0.0], 3.0).unwrap();
        assert!((v.gradient.unwrap()[0] - (-2.0 / 2.0)).abs() < 1e-12);
    }

    #[test]
    fn clamping_is_reported() {
        let v = selector_ce_loss(&[0.0, 1.0, 0.5], &[1.0, 0.0, 1.0], 3.0).unwrap();
        assert_eq!(v.clamped, 2);
        assert!(v.value.is_finite());
    }

    #[test]
    fn focal_point_values() {
        let v = selector_focal_loss(&[0.5], &[1.0], 3.0).unwrap();
        assert!((v.value - 0.5 * 2f64.ln()).abs() < 1e-12);
        let ce = selector_ce_loss(&[0.99], &[1.0], 3.0).unwrap().value;
        let fl = selector_focal_loss(&[0.99], &[1.0], 3.0).unwrap().value;
        assert!(fl < ce);
        assert!(selector_focal_loss(&[0.999999], &[1.0], 3.0).unwrap().value < 1e-10);
    }

    #[test]
    fn weighted_ce_point_values() {
        let v = weighted_classifier_ce_loss(&[0.3, 0.9], &[1.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(v.value, 0.0);
        assert!(v.gradient.unwrap().iter().all(|g| *g == 0.0));
        let v = weighted_classifier_ce_loss(&[0.5], &[1.0], &[1.0]).unwrap();
        assert!((v.value - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn hinge_point_values() {
        let v = hinge_loss(&[2.0], &[Label::Pos]).unwrap();
        assert_eq!(v.value, 0.0);
        let v = hinge_loss(&[0.0], &[Label::Pos]).unwrap();
        assert_eq!(v.value, 1.0);
        let v = hinge_loss(&[0.5], &[Label::Neg]).unwrap();
        assert_eq!(v.value, 1.5);
        // kink: 1 - y s == 0
        let v = hinge_loss(&[1.0], &[Label::Pos]).unwrap();
        assert_eq!(v.gradient.unwrap()[0], 0.0);
    }
}
