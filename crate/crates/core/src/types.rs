//! Shared domain types: labels, feature vectors, oracle samples, scored hypotheses
//! and the seeded RNG contract.
//!
//! Labels are stored as `{+1, -1}`. The `{0, 1}` view only appears at loss
//! boundaries through [`label_to_unit`] / [`label_from_unit`].

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Deterministic generator used everywhere in the crate.
pub type SeededRng = ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::arg("feature vector must have at least one entry"));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::arg(format!("non-finite feature value {v}")));
        }
        Ok(FeatureVector(values))
    }

    /// One-dimensional vector. Panics on a non-finite value.
    pub fn scalar(x: f64) -> Self {
        assert!(x.is_finite(), "non-finite feature value {x}");
        FeatureVector(vec![x])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl std::ops::Index<usize> for FeatureVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for FeatureVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        FeatureVector::new(v)
    }
}

impl From<FeatureVector> for Vec<f64> {
    fn from(v: FeatureVector) -> Self {
        v.0
    }
}

/// Binary label in `{+1, -1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Label {
    Pos,
    Neg,
}

impl Label {
    pub fn from_sign(v: i64) -> Result<Self> {
        match v {
            1 => Ok(Label::Pos),
            -1 => Ok(Label::Neg),
            other => Err(Error::arg(format!("label must be +1 or -1, got {other}"))),
        }
    }

    pub fn from_bool(positive: bool) -> Self {
        if positive {
            Label::Pos
        } else {
            Label::Neg
        }
    }

    pub fn sign(self) -> i8 {
        match self {
            Label::Pos => 1,
            Label::Neg => -1,
        }
    }

    pub fn signf(self) -> f64 {
        f64::from(self.sign())
    }

    pub fn is_pos(self) -> bool {
        self == Label::Pos
    }

    pub fn flip(self) -> Self {
        match self {
            Label::Pos => Label::Neg,
            Label::Neg => Label::Pos,
        }
    }
}

impl TryFrom<i8> for Label {
    type Error = Error;

    fn try_from(v: i8) -> Result<Self> {
        Label::from_sign(i64::from(v))
    }
}

impl From<Label> for i8 {
    fn from(l: Label) -> i8 {
        l.sign()
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.sign())
    }
}

/// `+1 -> 1.0`, `-1 -> 0.0`.
pub fn label_to_unit(y: Label) -> f64 {
    match y {
        Label::Pos => 1.0,
        Label::Neg => 0.0,
    }
}

/// Exact inverse of [`label_to_unit`]; only `0.0` and `1.0` are accepted.
pub fn label_from_unit(u: f64) -> Result<Label> {
    if u == 1.0 {
        Ok(Label::Pos)
    } else if u == 0.0 {
        Ok(Label::Neg)
    } else {
        Err(Error::arg(format!("unit label must be 0 or 1, got {u}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    Informative,
    Uninformative,
}

impl Region {
    pub fn is_informative(self) -> bool {
        self == Region::Informative
    }

    /// Ground-truth selector value on this region.
    pub fn g_star(self) -> Label {
        Label::from_bool(self.is_informative())
    }

    pub fn tag(self) -> &'static str {
        match self {
            Region::Informative => "I",
            Region::Uninformative => "U",
        }
    }

    pub fn from_tag(s: &str) -> Result<Self> {
        match s.trim() {
            "I" => Ok(Region::Informative),
            "U" => Ok(Region::Uninformative),
            other => Err(Error::arg(format!("region must be I or U, got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub x: FeatureVector,
    pub y: Label,
}

impl LabeledSample {
    pub fn new(x: FeatureVector, y: Label) -> Self {
        LabeledSample { x, y }
    }
}

/// A labeled sample together with the hidden draw that produced it. Only
/// evaluation code may look at `z` and `region`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSample {
    pub sample: LabeledSample,
    pub z: Label,
    pub region: Region,
}

impl OracleSample {
    pub fn x(&self) -> &FeatureVector {
        &self.sample.x
    }

    pub fn y(&self) -> Label {
        self.sample.y
    }
}

/// Strips the oracle fields.
pub fn observed(data: &[OracleSample]) -> Vec<LabeledSample> {
    data.iter().map(|o| o.sample.clone()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Predictor,
    Selector,
}

/// Anything that maps a feature vector to a score in `[0, 1]`.
pub trait Scorer: Send + Sync + fmt::Debug {
    fn score(&self, x: &FeatureVector) -> f64;
}

#[derive(Clone)]
pub struct ScoredHypothesis {
    pub role: Role,
    pub threshold: f64,
    scorer: Arc<dyn Scorer>,
}

impl fmt::Debug for ScoredHypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScoredHypothesis")
            .field("role", &self.role)
            .field("threshold", &self.threshold)
            .field("scorer", &self.scorer)
            .finish()
    }
}

impl ScoredHypothesis {
    pub fn new(role: Role, scorer: Arc<dyn Scorer>) -> Self {
        ScoredHypothesis {
            role,
            threshold: 0.5,
            scorer,
        }
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn scorer(&self) -> &Arc<dyn Scorer> {
        &self.scorer
    }

    pub fn score(&self, x: &FeatureVector) -> f64 {
        self.scorer.score(x)
    }

    /// Same as [`sign_decision`].
    pub fn decide(&self, x: &FeatureVector) -> Result<Label> {
        sign_decision(self, x)
    }

    /// Decisions for a whole batch, in order.
    pub fn decide_all<'a, I>(&self, xs: I) -> Result<Vec<Label>>
    where
        I: IntoIterator<Item = &'a FeatureVector>,
    {
        xs.into_iter().map(|x| self.decide(x)).collect()
    }
}

/// `+1` iff `score(x) > threshold`; a tie goes to `-1`.
pub fn sign_decision(h: &ScoredHypothesis, x: &FeatureVector) -> Result<Label> {
    let s = h.score(x);
    if !s.is_finite() || !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidHypothesisOutput(s));
    }
    Ok(Label::from_bool(s > h.threshold))
}

/// Seed for every random stream in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn rng(self) -> SeededRng {
        SeededRng::seed_from_u64(self.0)
    }

    /// Independent child stream, e.g. one per seed in a sweep or per model.
    pub fn derive(self, stream: u64) -> RngSeed {
        // splitmix64 finalizer over (seed, stream)
        let mut z = self
            .0
            .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
            .wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        RngSeed(z ^ (z >> 31))
    }
}

impl From<u64> for RngSeed {
    fn from(v: u64) -> Self {
        RngSeed(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug)]
    struct Const(f64);

    impl Scorer for Const {
        fn score(&self, _x: &FeatureVector) -> f64 {
            self.0
        }
    }

    fn hyp(s: f64) -> ScoredHypothesis {
        ScoredHypothesis::new(Role::Predictor, Arc::new(Const(s)))
    }

    #[test]
    fn unit_label_mapping() {
        assert_eq!(label_to_unit(Label::Pos), 1.0);
        assert_eq!(label_to_unit(Label::Neg), 0.0);
        for y in [Label::Pos, Label::Neg] {
            assert_eq!(label_from_unit(label_to_unit(y)).unwrap(), y);
        }
        assert!(label_from_unit(0.5).is_err());
    }

    #[test]
    fn sign_decision_threshold_cases() {
        let x = FeatureVector::scalar(0.0);
        assert_eq!(sign_decision(&hyp(0.7), &x).unwrap(), Label::Pos);
        assert_eq!(sign_decision(&hyp(0.5), &x).unwrap(), Label::Neg);
        assert_eq!(sign_decision(&hyp(0.0), &x).unwrap(), Label::Neg);
    }

    #[test]
    fn sign_decision_rejects_nan() {
        let x = FeatureVector::scalar(0.0);
        assert!(matches!(
            sign_decision(&hyp(f64::NAN), &x),
            Err(Error::InvalidHypothesisOutput(_))
        ));
    }

    #[test]
    fn raising_threshold_never_turns_negative_into_positive() {
        let x = FeatureVector::scalar(0.0);
        for s in [0.0, 0.1, 0.5, 0.6, 0.99, 1.0] {
            let mut prev = Label::Pos;
            for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
                let d = sign_decision(&hyp(s).with_threshold(t), &x).unwrap();
                assert!(!(prev == Label::Neg && d == Label::Pos));
                prev = d;
            }
        }
    }

    #[test]
    fn feature_vector_rejects_non_finite() {
        assert!(FeatureVector::new(vec![1.0, f64::INFINITY]).is_err());
        assert!(FeatureVector::new(vec![]).is_err());
        assert_eq!(FeatureVector::new(vec![1.0, 2.0]).unwrap().dim(), 2);
    }

    #[test]
    fn derived_seeds_are_distinct_and_stable() {
        let s = RngSeed(80);
        assert_eq!(s.derive(3), s.derive(3));
        assert_ne!(s.derive(3), s.derive(4));
        assert_ne!(s.derive(0), s);
    }
}
