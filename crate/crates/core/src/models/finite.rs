use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{FeatureVector, Label, Role, ScoredHypothesis, Scorer};

/// Largest class the exact ERM routines will enumerate.
pub const MAX_CLASS_SIZE: usize = 1_000_000;

/// A binary decision function.
pub trait DecisionRule: Send + Sync + fmt::Debug {
    fn decide(&self, x: &FeatureVector) -> Label;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// `+1` iff `x_feature >= t`
    AtLeast,
    /// `+1` iff `x_feature <= t`
    AtMost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientations {
    AtLeast,
    AtMost,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdRule {
    pub feature: usize,
    pub t: f64,
    pub orientation: Orientation,
}

impl DecisionRule for ThresholdRule {
    fn decide(&self, x: &FeatureVector) -> Label {
        let v = x[self.feature];
        Label::from_bool(match self.orientation {
            Orientation::AtLeast => v >= self.t,
            Orientation::AtMost => v <= self.t,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstantRule(pub Label);

impl DecisionRule for ConstantRule {
    fn decide(&self, _x: &FeatureVector) -> Label {
        self.0
    }
}

/// Wraps an arbitrary closure.
#[derive(Clone)]
pub struct FnRule {
    name: String,
    f: Arc<dyn Fn(&FeatureVector) -> Label + Send + Sync>,
}

impl FnRule {
    pub fn new(name: impl Into<String>, f: impl Fn(&FeatureVector) -> Label + Send + Sync + 'static) -> Self {
        FnRule {
            name: name.into(),
            f: Arc::new(f),
        }
    }
}

impl fmt::Debug for FnRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FnRule({})", self.name)
    }
}

impl DecisionRule for FnRule {
    fn decide(&self, x: &FeatureVector) -> Label {
        (self.f)(x)
    }
}

/// Adapter: `+1 -> 1.0`, `-1 -> 0.0`, so the default 0.5 threshold recovers the rule.
#[derive(Debug, Clone)]
pub struct RuleScorer(pub Arc<dyn DecisionRule>);

impl Scorer for RuleScorer {
    fn score(&self, x: &FeatureVector) -> f64 {
        if self.0.decide(x).is_pos() {
            1.0
        } else {
            0.0
        }
    }
}

/// Enumerable hypothesis class.
#[derive(Debug, Clone)]
pub struct FiniteClass {
    hypotheses: Vec<Arc<dyn DecisionRule>>,
    pub description: String,
}

impl FiniteClass {
    pub fn new(hypotheses: Vec<Arc<dyn DecisionRule>>, description: impl Into<String>) -> Result<Self> {
        if hypotheses.is_empty() {
            return Err(Error::arg("finite class must be non-empty"));
        }
        if hypotheses.len() > MAX_CLASS_SIZE {
            return Err(Error::arg(format!(
                "finite class of size {} exceeds enumeration guard {MAX_CLASS_SIZE}",
                hypotheses.len()
            )));
        }
        Ok(FiniteClass {
            hypotheses,
            description: description.into(),
        })
    }

    /// `{always +1, always -1}`.
    pub fn constants() -> Self {
        FiniteClass::new(
            vec![Arc::new(ConstantRule(Label::Pos)), Arc::new(ConstantRule(Label::Neg))],
            "constants",
        )
        .expect("non-empty")
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    pub fn rule(&self, i: usize) -> &Arc<dyn DecisionRule> {
        &self.hypotheses[i]
    }

    pub fn rules(&self) -> &[Arc<dyn DecisionRule>] {
        &self.hypotheses
    }

    pub fn hypothesis(&self, i: usize, role: Role) -> ScoredHypothesis {
        ScoredHypothesis::new(role, Arc::new(RuleScorer(self.hypotheses[i].clone())))
    }
}

/// Threshold hypotheses on feature 0 over a uniform grid of `steps` points in
/// `[lo, hi]`; with `Both`, the `AtLeast` block comes first.
pub fn enumerate_threshold_selectors(lo: f64, hi: f64, steps: usize, orientation: Orientations) -> Result<FiniteClass> {
    enumerate_feature_thresholds(0, lo, hi, steps, orientation)
}

/// Same grid as [`enumerate_threshold_selectors`] on an arbitrary coordinate.
pub fn enumerate_feature_thresholds(
    feature: usize,
    lo: f64,
    hi: f64,
    steps: usize,
    orientation: Orientations,
) -> Result<FiniteClass> {
    if steps == 0 {
        return Err(Error::arg("steps must be at least 1"));
    }
    if !(lo < hi) {
        return Err(Error::arg(format!("grid_lo={lo} must be below grid_hi={hi}")));
    }
    let grid: Vec<f64> = if steps == 1 {
        vec![lo]
    } else {
        (0..steps)
            .map(|k| lo + (hi - lo) * k as f64 / (steps - 1) as f64)
            .collect()
    };
    let orients: &[Orientation] = match orientation {
        Orientations::AtLeast => &[Orientation::AtLeast],
        Orientations::AtMost => &[Orientation::AtMost],
        Orientations::Both => &[Orientation::AtLeast, Orientation::AtMost],
    };
    let mut hyps: Vec<Arc<dyn DecisionRule>> = Vec::with_capacity(grid.len() * orients.len());
    for &o in orients {
        for &t in &grid {
            hyps.push(Arc::new(ThresholdRule {
                feature,
                t,
                orientation: o,
            }));
        }
    }
    FiniteClass::new(hyps, format!("thresholds on x{feature} over [{lo}, {hi}] x {steps} ({orientation:?})"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_points() {
        let c = enumerate_threshold_selectors(0.0, 1.0, 3, Orientations::AtLeast).unwrap();
        assert_eq!(c.len(), 3);
        let ts: Vec<f64> = [0.0, 0.5, 1.0].to_vec();
        for (i, t) in ts.iter().enumerate() {
            // each rule flips exactly at its threshold
            let rule = c.rule(i);
            assert_eq!(rule.decide(&FeatureVector::scalar(*t)), Label::Pos);
            if *t > 0.0 {
                assert_eq!(rule.decide(&FeatureVector::scalar(t - 1e-9)), Label::Neg);
            }
        }
    }

    #[test]
    fn single_rule_decision() {
        let r = ThresholdRule {
            feature: 0,
            t: 0.5,
            orientation: Orientation::AtLeast,
        };
        assert_eq!(r.decide(&FeatureVector::scalar(0.7)), Label::Pos);
        assert_eq!(r.decide(&FeatureVector::scalar(0.3)), Label::Neg);
    }

    #[test]
    fn both_orientations_double_the_class() {
        let c = enumerate_threshold_selectors(0.0, 1.0, 101, Orientations::Both).unwrap();
        assert_eq!(c.len(), 202);
    }

    #[test]
    fn bad_grid_rejected() {
        assert!(enumerate_threshold_selectors(1.0, 1.0, 3, Orientations::Both).is_err());
        assert!(enumerate_threshold_selectors(0.0, 1.0, 0, Orientations::Both).is_err());
    }

    #[test]
    fn scored_adapter_agrees_with_rule() {
        let c = enumerate_threshold_selectors(0.0, 1.0, 11, Orientations::Both).unwrap();
        for i in 0..c.len() {
            let h = c.hypothesis(i, Role::Selector);
            for k in 0..=20 {
                let x = FeatureVector::scalar(k as f64 / 20.0);
                assert_eq!(h.decide(&x).unwrap(), c.rule(i).decide(&x));
            }
        }
    }
}
