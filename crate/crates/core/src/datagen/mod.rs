//! Noisy generative processes and dataset plumbing.
//!
//! A process draws `x` from the informative/uninformative mixture, then the latent
//! status `z` with `P[z = +1 | x] = 1/2 + lambda(x)` on the informative region and
//! `1/2 - lambda(x)` on the uninformative one, then `y = f*(x)` when `z = +1` and a
//! fair coin otherwise. The region of every draw is recorded at generation time.

mod csv_io;
mod discrete;
mod gaussian;
mod lecam;
mod noise;

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::types::{FeatureVector, Label, LabeledSample, OracleSample, Region, RngSeed, SeededRng};

pub use csv_io::{load_feature_csv, read_feature_csv, write_oracle_csv, CsvDataset};
pub use discrete::{Atom, DiscreteSpec, Side, ThresholdInstance};
pub use gaussian::{quadrant_mixture_spec, make_gaussian_mixture_spec, GaussianMixture, LambdaFn, LinearBoundary};
pub use lecam::{lecam_g_star, make_lecam_spec, LeCamModel, LeCamSpec};
pub use noise::{inject_class_noise, lambda_bar_from_taus, NoiseInjection};

/// Slack allowed when checking `lambda_bar <= lambda(x) <= 1/2`.
const LAMBDA_SLACK: f64 = 1e-12;

/// The pieces of a noisy generative process that differ between instance families.
pub trait GenerativeModel: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    /// Probability mass of the informative region.
    fn alpha(&self) -> f64;

    /// Draws `x` together with the region that generated it.
    fn draw_x(&self, rng: &mut SeededRng) -> (FeatureVector, Region);

    fn lambda(&self, x: &FeatureVector, region: Region) -> f64;

    fn f_star(&self, x: &FeatureVector) -> Label;

    /// Region membership as a function of `x`, where that is well defined.
    /// Overlapping mixtures return `None`.
    fn region_of(&self, _x: &FeatureVector) -> Option<Region> {
        None
    }
}

/// A validated noisy generative process.
#[derive(Clone)]
pub struct ProcessSpec {
    lambda_bar: f64,
    model: Arc<dyn GenerativeModel>,
}

impl fmt::Debug for ProcessSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProcessSpec")
            .field("lambda_bar", &self.lambda_bar)
            .field("model", &self.model)
            .finish()
    }
}

impl ProcessSpec {
    pub fn new(model: Arc<dyn GenerativeModel>, lambda_bar: f64) -> Result<Self> {
        if !(lambda_bar > 0.0 && lambda_bar <= 0.5) {
            return Err(Error::InvalidProcessSpec(format!(
                "lambda_bar={lambda_bar} outside (0, 0.5]"
            )));
        }
        let alpha = model.alpha();
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidProcessSpec(format!("alpha={alpha} outside (0, 1)")));
        }
        Ok(ProcessSpec { lambda_bar, model })
    }

    pub fn alpha(&self) -> f64 {
        self.model.alpha()
    }

    pub fn lambda_bar(&self) -> f64 {
        self.lambda_bar
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn model(&self) -> &Arc<dyn GenerativeModel> {
        &self.model
    }

    pub fn f_star(&self, x: &FeatureVector) -> Label {
        self.model.f_star(x)
    }

    pub fn lambda(&self, x: &FeatureVector, region: Region) -> f64 {
        self.model.lambda(x, region)
    }

    fn checked_lambda(&self, x: &FeatureVector, region: Region) -> Result<f64> {
        let lam = self.model.lambda(x, region);
        if !(lam >= self.lambda_bar - LAMBDA_SLACK && lam <= 0.5 + LAMBDA_SLACK) {
            return Err(Error::InvalidProcessSpec(format!(
                "lambda(x)={lam} outside [lambda_bar={}, 0.5]",
                self.lambda_bar
            )));
        }
        Ok(lam)
    }
}

/// `P[z = +1 | x]` for a point with noise gap `lambda` on `region`.
pub fn posterior_z(lambda: f64, region: Region) -> f64 {
    match region {
        Region::Informative => 0.5 + lambda,
        Region::Uninformative => 0.5 - lambda,
    }
}

/// `P[y = f*(x) | x] = 3/4 + g*(x) lambda(x) / 2`.
pub fn label_agreement(lambda: f64, region: Region) -> f64 {
    0.75 + region.g_star().signf() * lambda / 2.0
}

/// Draws `n` oracle samples. Every point consumes the same number of RNG calls
/// regardless of the branch taken, so streams stay aligned across specs.
pub fn sample_process(spec: &ProcessSpec, n: usize, seed: RngSeed) -> Result<Vec<OracleSample>> {
    if n == 0 {
        return Err(Error::arg("sample_process needs n >= 1"));
    }
    let mut rng = seed.rng();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let (x, region) = spec.model.draw_x(&mut rng);
        let lam = spec.checked_lambda(&x, region)?;
        let u_z: f64 = rng.random();
        let coin: bool = rng.random();
        let z = Label::from_bool(u_z < posterior_z(lam, region));
        let y = match z {
            Label::Pos => spec.model.f_star(&x),
            Label::Neg => Label::from_bool(coin),
        };
        out.push(OracleSample {
            sample: LabeledSample::new(x, y),
            z,
            region,
        });
    }
    Ok(out)
}
