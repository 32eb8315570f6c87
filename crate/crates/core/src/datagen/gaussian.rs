use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{GenerativeModel, ProcessSpec};
use crate::error::{Error, Result};
use crate::types::{FeatureVector, Label, Region, SeededRng};

/// Noise-gap function `lambda(x)`.
#[derive(Clone)]
pub enum LambdaFn {
    Constant(f64),
    PerRegion { informative: f64, uninformative: f64 },
    Custom(Arc<dyn Fn(&FeatureVector, Region) -> f64 + Send + Sync>),
}

impl fmt::Debug for LambdaFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LambdaFn::Constant(v) => write!(f, "Constant({v})"),
            LambdaFn::PerRegion {
                informative,
                uninformative,
            } => write!(f, "PerRegion({informative}, {uninformative})"),
            LambdaFn::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl LambdaFn {
    pub fn eval(&self, x: &FeatureVector, region: Region) -> f64 {
        match self {
            LambdaFn::Constant(v) => *v,
            LambdaFn::PerRegion {
                informative,
                uninformative,
            } => {
                if region.is_informative() {
                    *informative
                } else {
                    *uninformative
                }
            }
            LambdaFn::Custom(f) => f(x, region),
        }
    }
}

/// `f*(x) = +1` iff `w . x + b > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearBoundary {
    pub w: Vec<f64>,
    pub b: f64,
}

impl LinearBoundary {
    pub fn new(w: Vec<f64>, b: f64) -> Self {
        LinearBoundary { w, b }
    }

    pub fn margin(&self, x: &FeatureVector) -> f64 {
        self.w.iter().zip(x.as_slice()).map(|(w, v)| w * v).sum::<f64>() + self.b
    }

    pub fn label(&self, x: &FeatureVector) -> Label {
        Label::from_bool(self.margin(x) > 0.0)
    }
}

/// Isotropic Gaussian mixture: the informative component is chosen with
/// probability `alpha`, then a center uniformly from that component's list.
#[derive(Debug, Clone)]
pub struct GaussianMixture {
    informative: Vec<Vec<f64>>,
    uninformative: Vec<Vec<f64>>,
    stddev: f64,
    alpha: f64,
    lambda: LambdaFn,
    boundary: LinearBoundary,
}

impl GaussianMixture {
    pub fn new(
        informative: Vec<Vec<f64>>,
        uninformative: Vec<Vec<f64>>,
        stddev: f64,
        alpha: f64,
        lambda: LambdaFn,
        boundary: LinearBoundary,
    ) -> Result<Self> {
        if informative.is_empty() || uninformative.is_empty() {
            return Err(Error::arg("gaussian mixture needs centers for both regions"));
        }
        if !(stddev > 0.0 && stddev.is_finite()) {
            return Err(Error::arg(format!("stddev must be positive, got {stddev}")));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidProcessSpec(format!("alpha={alpha} outside (0, 1)")));
        }
        let d = informative[0].len();
        if d == 0 {
            return Err(Error::arg("centers must have at least one coordinate"));
        }
        for c in informative.iter().chain(&uninformative) {
            if c.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: c.len(),
                });
            }
        }
        if boundary.w.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: boundary.w.len(),
            });
        }
        Ok(GaussianMixture {
            informative,
            uninformative,
            stddev,
            alpha,
            lambda,
            boundary,
        })
    }

    pub fn boundary(&self) -> &LinearBoundary {
        &self.boundary
    }
}

impl GenerativeModel for GaussianMixture {
    fn dim(&self) -> usize {
        self.informative[0].len()
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn draw_x(&self, rng: &mut SeededRng) -> (FeatureVector, Region) {
        let informative = rng.random_bool(self.alpha);
        let (centers, region) = if informative {
            (&self.informative, Region::Informative)
        } else {
            (&self.uninformative, Region::Uninformative)
        };
        let c = &centers[rng.random_range(0..centers.len())];
        let values = c
            .iter()
            .map(|m| {
                let e: f64 = rng.sample(StandardNormal);
                m + self.stddev * e
            })
            .collect();
        (FeatureVector::new(values).expect("finite draw"), region)
    }

    fn lambda(&self, x: &FeatureVector, region: Region) -> f64 {
        self.lambda.eval(x, region)
    }

    fn f_star(&self, x: &FeatureVector) -> Label {
        self.boundary.label(x)
    }
}

/// Gaussian-mixture process with a constant noise gap.
pub fn make_gaussian_mixture_spec(
    centers_informative: Vec<Vec<f64>>,
    centers_uninformative: Vec<Vec<f64>>,
    stddev: f64,
    alpha: f64,
    lambda_const: f64,
    boundary: LinearBoundary,
) -> Result<ProcessSpec> {
    if !(lambda_const > 0.0 && lambda_const <= 0.5) {
        return Err(Error::InvalidProcessSpec(format!(
            "lambda={lambda_const} outside (0, 0.5]"
        )));
    }
    let gm = GaussianMixture::new(
        centers_informative,
        centers_uninformative,
        stddev,
        alpha,
        LambdaFn::Constant(lambda_const),
        boundary,
    )?;
    ProcessSpec::new(Arc::new(gm), lambda_const)
}

/// Two-dimensional instance: informative clusters on the left half-plane,
/// uninformative clusters on the right, `f*(x) = sign` of the second coordinate.
pub fn quadrant_mixture_spec(alpha: f64, lambda: f64) -> Result<ProcessSpec> {
    make_gaussian_mixture_spec(
        vec![vec![-3.0, 2.0], vec![-3.0, -2.0]],
        vec![vec![3.0, 2.0], vec![3.0, -2.0]],
        1.0,
        alpha,
        lambda,
        LinearBoundary::new(vec![0.0, 1.0], 0.0),
    )
}
