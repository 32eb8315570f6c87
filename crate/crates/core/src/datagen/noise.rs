use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Region, RngSeed};

/// Per-region corruption rates for semi-synthetic label noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseInjection {
    pub tau_informative: f64,
    pub tau_uninformative: f64,
    pub num_classes: usize,
}

impl NoiseInjection {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::arg("noise injection needs at least two classes"));
        }
        if !(0.0..1.0).contains(&self.tau_informative) {
            return Err(Error::arg(format!(
                "tau_informative={} outside [0, 1)",
                self.tau_informative
            )));
        }
        if !(self.tau_uninformative > 0.0 && self.tau_uninformative <= 1.0) {
            return Err(Error::arg(format!(
                "tau_uninformative={} outside (0, 1]",
                self.tau_uninformative
            )));
        }
        if self.tau_informative >= self.tau_uninformative {
            return Err(Error::arg("tau_informative must be below tau_uninformative"));
        }
        Ok(())
    }
}

/// Replaces each label with probability `tau` (per region) by a uniform draw
/// over the other `K - 1` classes. Two RNG calls per label, whatever the branch.
pub fn inject_class_noise(
    labels: &[usize],
    regions: &[Region],
    inj: &NoiseInjection,
    seed: RngSeed,
) -> Result<Vec<usize>> {
    inj.validate()?;
    if labels.len() != regions.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: regions.len(),
        });
    }
    let k = inj.num_classes;
    let mut rng = seed.rng();
    labels
        .iter()
        .zip(regions)
        .map(|(&y, region)| {
            if y >= k {
                return Err(Error::arg(format!("class {y} outside [0, {k})")));
            }
            let tau = if region.is_informative() {
                inj.tau_informative
            } else {
                inj.tau_uninformative
            };
            let u: f64 = rng.random();
            let r = rng.random_range(0..k - 1);
            Ok(if u < tau {
                if r >= y {
                    r + 1
                } else {
                    r
                }
            } else {
                y
            })
        })
        .collect()
}

/// `(0.9 - tau_I) / 1.8`, which must coincide with `tau_U / 1.8`.
pub fn lambda_bar_from_taus(tau_i: f64, tau_u: f64) -> Result<f64> {
    let from_i = (0.9 - tau_i) / 1.8;
    let from_u = tau_u / 1.8;
    if !from_i.is_finite() || !from_u.is_finite() || (from_i - from_u).abs() > 1e-9 {
        return Err(Error::InconsistentTaus { tau_i, tau_u });
    }
    Ok(from_u)
}
