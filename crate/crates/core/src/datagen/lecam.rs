//! Hard instance for the sample-complexity lower bound.
//!
//! Support is the set of scaled basis vectors `tau * e^j` with `|tau| <= 1`.
//! Coordinate `j = 1` carries mass `1 - epsilon / lambda_bar`, the rest is spread
//! uniformly over `j = 2..d`. A Rademacher vector `sigma` decides, per coordinate,
//! whether the low-norm band (`|tau| <= alpha`, `sigma^j = +1`) or the high-norm
//! band (`|tau| >= 1 - alpha`, `sigma^j = -1`) is informative; the middle band is
//! always uninformative.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{GenerativeModel, ProcessSpec};
use crate::error::{Error, Result};
use crate::types::{FeatureVector, Label, Region, RngSeed, SeededRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeCamSpec {
    pub d: usize,
    pub alpha: f64,
    pub lambda_bar: f64,
    pub epsilon: f64,
    /// Drawn uniformly from the seed when absent.
    #[serde(default)]
    pub sigma: Option<Vec<Label>>,
}

/// Band rule for a point on coordinate `j` with `|tau| = norm`.
pub fn lecam_g_star(sigma_j: Label, alpha: f64, norm: f64) -> Label {
    if norm >= 1.0 - alpha {
        sigma_j.flip()
    } else if norm <= alpha {
        sigma_j
    } else {
        Label::Neg
    }
}

#[derive(Debug, Clone)]
pub struct LeCamModel {
    d: usize,
    alpha: f64,
    lambda_bar: f64,
    sigma: Vec<Label>,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
}

impl LeCamModel {
    pub fn sigma(&self) -> &[Label] {
        &self.sigma
    }

    /// Categorical weights of the coordinate draw.
    pub fn coordinate_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Coordinate holding the non-zero entry; the origin is assigned to `j = 0`.
    fn coordinate(&self, x: &FeatureVector) -> usize {
        x.as_slice().iter().position(|v| *v != 0.0).unwrap_or(0)
    }

    pub fn g_star(&self, x: &FeatureVector) -> Label {
        let j = self.coordinate(x);
        lecam_g_star(self.sigma[j], self.alpha, x[j].abs())
    }

    fn band_mass(&self, sigma_j: Label) -> f64 {
        // mass of {|tau| : g* = +1} under tau ~ Unif[-1, 1]
        let a = self.alpha;
        match sigma_j {
            Label::Neg => a.min(1.0),
            Label::Pos => a.min(1.0 - a).max(0.0),
        }
    }
}

impl GenerativeModel for LeCamModel {
    fn dim(&self) -> usize {
        self.d
    }

    fn alpha(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.sigma)
            .map(|(w, s)| w * self.band_mass(*s))
            .sum()
    }

    fn draw_x(&self, rng: &mut SeededRng) -> (FeatureVector, Region) {
        let u: f64 = rng.random();
        let j = self
            .cumulative
            .partition_point(|&c| c <= u)
            .min(self.d - 1);
        let tau: f64 = rng.random_range(-1.0..=1.0);
        let mut v = vec![0.0; self.d];
        v[j] = tau;
        let region = if lecam_g_star(self.sigma[j], self.alpha, tau.abs()).is_pos() {
            Region::Informative
        } else {
            Region::Uninformative
        };
        (FeatureVector::new(v).expect("finite"), region)
    }

    fn lambda(&self, _x: &FeatureVector, _region: Region) -> f64 {
        self.lambda_bar
    }

    /// `2 * 1{w . x > 0} - 1` with `w` the all-ones vector.
    fn f_star(&self, x: &FeatureVector) -> Label {
        Label::from_bool(x.as_slice().iter().sum::<f64>() > 0.0)
    }

    fn region_of(&self, x: &FeatureVector) -> Option<Region> {
        Some(if self.g_star(x).is_pos() {
            Region::Informative
        } else {
            Region::Uninformative
        })
    }
}

pub fn lecam_model(params: &LeCamSpec, seed: RngSeed) -> Result<LeCamModel> {
    if params.d < 2 {
        return Err(Error::arg("lecam instance needs d >= 2"));
    }
    if !(params.alpha > 0.0 && params.alpha < 1.0) {
        return Err(Error::InvalidProcessSpec(format!(
            "alpha={} outside (0, 1)",
            params.alpha
        )));
    }
    if !(params.lambda_bar > 0.0 && params.lambda_bar <= 0.5) {
        return Err(Error::InvalidProcessSpec(format!(
            "lambda_bar={} outside (0, 0.5]",
            params.lambda_bar
        )));
    }
    if params.epsilon > params.lambda_bar {
        return Err(Error::EpsilonExceedsNoiseGap {
            epsilon: params.epsilon,
            lambda_bar: params.lambda_bar,
        });
    }
    if params.epsilon <= 0.0 {
        return Err(Error::arg(format!("epsilon={} must be positive", params.epsilon)));
    }
    let sigma = match &params.sigma {
        Some(s) if s.len() == params.d => s.clone(),
        Some(s) => {
            return Err(Error::DimensionMismatch {
                expected: params.d,
                got: s.len(),
            })
        }
        None => {
            let mut rng = seed.rng();
            (0..params.d)
                .map(|_| Label::from_bool(rng.random_bool(0.5)))
                .collect()
        }
    };
    let tail = params.epsilon / params.lambda_bar;
    let mut weights = vec![tail / (params.d - 1) as f64; params.d];
    weights[0] = 1.0 - tail;
    let mut acc = 0.0;
    let cumulative = weights
        .iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect();
    Ok(LeCamModel {
        d: params.d,
        alpha: params.alpha,
        lambda_bar: params.lambda_bar,
        sigma,
        weights,
        cumulative,
    })
}

pub fn make_lecam_spec(params: &LeCamSpec, seed: RngSeed) -> Result<ProcessSpec> {
    let model = lecam_model(params, seed)?;
    ProcessSpec::new(Arc::new(model), params.lambda_bar)
}
