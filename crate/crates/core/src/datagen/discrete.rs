use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{GenerativeModel, ProcessSpec, LAMBDA_SLACK};
use crate::error::{Error, Result};
use crate::types::{FeatureVector, Label, Region, SeededRng};

/// One support point of a finite process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: FeatureVector,
    pub mass: f64,
    pub region: Region,
    pub lambda: f64,
    pub f_star: Label,
}

impl Atom {
    pub fn new(x: FeatureVector, mass: f64, region: Region, lambda: f64, f_star: Label) -> Self {
        Atom {
            x,
            mass,
            region,
            lambda,
            f_star,
        }
    }

    /// `P[f*(x) != y | x] = 1/4 - g*(x) lambda(x) / 2`.
    pub fn p_flip(&self) -> f64 {
        0.25 - self.region.g_star().signf() * self.lambda / 2.0
    }

    /// `P[f*(x) = y | x] = 3/4 + g*(x) lambda(x) / 2`.
    pub fn p_agree(&self) -> f64 {
        0.75 + self.region.g_star().signf() * self.lambda / 2.0
    }
}

/// Finite-support process; every population quantity is an exact atom sum.
#[derive(Debug, Clone)]
pub struct DiscreteSpec {
    atoms: Vec<Atom>,
    lambda_bar: f64,
    cumulative: Vec<f64>,
}

impl DiscreteSpec {
    pub fn new(atoms: Vec<Atom>, lambda_bar: f64) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidProcessSpec("no atoms".into()));
        }
        if !(lambda_bar > 0.0 && lambda_bar <= 0.5) {
            return Err(Error::InvalidProcessSpec(format!(
                "lambda_bar={lambda_bar} outside (0, 0.5]"
            )));
        }
        let dim = atoms[0].x.dim();
        for (i, a) in atoms.iter().enumerate() {
            if a.x.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: a.x.dim(),
                });
            }
            if !(a.mass > 0.0 && a.mass.is_finite()) {
                return Err(Error::InvalidProcessSpec(format!("atom {i} has mass {}", a.mass)));
            }
            if !(a.lambda >= lambda_bar - LAMBDA_SLACK && a.lambda <= 0.5 + LAMBDA_SLACK) {
                return Err(Error::InvalidProcessSpec(format!(
                    "atom {i} has lambda {} outside [{lambda_bar}, 0.5]",
                    a.lambda
                )));
            }
            if atoms[..i].iter().any(|b| b.x == a.x) {
                return Err(Error::InvalidProcessSpec(format!("atom {i} is a duplicate")));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.mass).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidProcessSpec(format!("masses sum to {total}, not 1")));
        }
        let mut acc = 0.0;
        let cumulative = atoms
            .iter()
            .map(|a| {
                acc += a.mass;
                acc
            })
            .collect();
        Ok(DiscreteSpec {
            atoms,
            lambda_bar,
            cumulative,
        })
    }

    /// Random spec over `m` scalar atoms `0, 1, ..., m-1` with both regions present.
    /// Masses are normalized uniform draws; `lambda` per atom is uniform on
    /// `[lambda_bar, 1/2]`.
    pub fn random(m: usize, lambda_bar: f64, rng: &mut SeededRng) -> Result<Self> {
        if m < 2 {
            return Err(Error::arg("random discrete spec needs at least two atoms"));
        }
        let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let mut regions: Vec<Region> = (0..m)
            .map(|_| {
                if rng.random_bool(0.5) {
                    Region::Informative
                } else {
                    Region::Uninformative
                }
            })
            .collect();
        // force both regions so alpha lies strictly inside (0, 1)
        let k = rng.random_range(0..m);
        regions[k] = Region::Informative;
        regions[(k + 1) % m] = Region::Uninformative;
        let atoms = (0..m)
            .map(|i| {
                let lambda = if lambda_bar >= 0.5 {
                    0.5
                } else {
                    rng.random_range(lambda_bar..=0.5)
                };
                Atom::new(
                    FeatureVector::scalar(i as f64),
                    raw[i] / total,
                    regions[i],
                    lambda,
                    Label::from_bool(rng.random_bool(0.5)),
                )
            })
            .collect::<Vec<_>>();
        // renormalize the last atom so the masses sum to one within rounding
        let mut atoms = atoms;
        let head: f64 = atoms[..m - 1].iter().map(|a| a.mass).sum();
        atoms[m - 1].mass = 1.0 - head;
        DiscreteSpec::new(atoms, lambda_bar)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn lambda_bar(&self) -> f64 {
        self.lambda_bar
    }

    pub fn informative_mass(&self) -> f64 {
        self.atoms
            .iter()
            .filter(|a| a.region.is_informative())
            .map(|a| a.mass)
            .fold(0.0, |acc, v| acc + v)
    }

    /// Ground-truth selector decisions, one per atom.
    pub fn g_star(&self) -> Vec<Label> {
        self.atoms.iter().map(|a| a.region.g_star()).collect()
    }

    pub fn atom_index(&self, x: &FeatureVector) -> Option<usize> {
        self.atoms.iter().position(|a| &a.x == x)
    }

    fn nearest_atom(&self, x: &FeatureVector) -> &Atom {
        if let Some(i) = self.atom_index(x) {
            return &self.atoms[i];
        }
        let dist = |a: &Atom| {
            a.x.as_slice()
                .iter()
                .zip(x.as_slice())
                .map(|(p, q)| (p - q) * (p - q))
                .sum::<f64>()
        };
        self.atoms
            .iter()
            .min_by(|a, b| dist(a).total_cmp(&dist(b)))
            .expect("non-empty")
    }

    pub fn to_process(&self) -> Result<ProcessSpec> {
        ProcessSpec::new(Arc::new(self.clone()), self.lambda_bar)
    }
}

impl GenerativeModel for DiscreteSpec {
    fn dim(&self) -> usize {
        self.atoms[0].x.dim()
    }

    fn alpha(&self) -> f64 {
        self.informative_mass()
    }

    fn draw_x(&self, rng: &mut SeededRng) -> (FeatureVector, Region) {
        let u: f64 = rng.random();
        let i = self
            .cumulative
            .partition_point(|&c| c <= u)
            .min(self.atoms.len() - 1);
        (self.atoms[i].x.clone(), self.atoms[i].region)
    }

    fn lambda(&self, x: &FeatureVector, _region: Region) -> f64 {
        self.nearest_atom(x).lambda
    }

    fn f_star(&self, x: &FeatureVector) -> Label {
        self.nearest_atom(x).f_star
    }

    fn region_of(&self, x: &FeatureVector) -> Option<Region> {
        self.atom_index(x).map(|i| self.atoms[i].region)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

/// One-dimensional threshold instance on `[0, 1]`, discretized into `atoms`
/// equal-mass points at `(k + 1/2) / atoms`.
///
/// The informative region is `x < alpha` (`Left`) or `x > 1 - alpha` (`Right`);
/// `f*(x) = +1` iff `x >= f_boundary`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdInstance {
    pub atoms: usize,
    pub alpha: f64,
    pub lambda_bar: f64,
    /// Noise gap on the informative region; defaults to `lambda_bar`.
    pub lambda_informative: Option<f64>,
    /// Noise gap on the uninformative region; defaults to `lambda_bar`.
    pub lambda_uninformative: Option<f64>,
    pub f_boundary: f64,
    pub informative_side: Side,
}

impl Default for ThresholdInstance {
    fn default() -> Self {
        ThresholdInstance {
            atoms: 1000,
            alpha: 0.5,
            lambda_bar: 0.5,
            lambda_informative: None,
            lambda_uninformative: None,
            f_boundary: 0.25,
            informative_side: Side::Left,
        }
    }
}

impl ThresholdInstance {
    pub fn with_lambda_bar(lambda_bar: f64) -> Self {
        ThresholdInstance {
            lambda_bar,
            ..Default::default()
        }
    }

    pub fn region_at(&self, x: f64) -> Region {
        let informative = match self.informative_side {
            Side::Left => x < self.alpha,
            Side::Right => x > 1.0 - self.alpha,
        };
        if informative {
            Region::Informative
        } else {
            Region::Uninformative
        }
    }

    pub fn build(&self) -> Result<DiscreteSpec> {
        if self.atoms < 2 {
            return Err(Error::arg("threshold instance needs at least two atoms"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidProcessSpec(format!("alpha={} outside (0, 1)", self.alpha)));
        }
        let li = self.lambda_informative.unwrap_or(self.lambda_bar);
        let lu = self.lambda_uninformative.unwrap_or(self.lambda_bar);
        let m = self.atoms as f64;
        let atoms = (0..self.atoms)
            .map(|k| {
                let x = (k as f64 + 0.5) / m;
                let region = self.region_at(x);
                let lambda = if region.is_informative() { li } else { lu };
                Atom::new(
                    FeatureVector::scalar(x),
                    1.0 / m,
                    region,
                    lambda,
                    Label::from_bool(x >= self.f_boundary),
                )
            })
            .collect();
        DiscreteSpec::new(atoms, self.lambda_bar)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::RngSeed;

    #[test]
    fn rejects_bad_masses() {
        let a = |x: f64, m: f64| {
            Atom::new(FeatureVector::scalar(x), m, Region::Informative, 0.5, Label::Pos)
        };
        assert!(DiscreteSpec::new(vec![a(0.0, 0.5), a(1.0, 0.4)], 0.5).is_err());
        assert!(DiscreteSpec::new(vec![a(0.0, 0.5), a(0.0, 0.5)], 0.5).is_err());
        assert!(DiscreteSpec::new(vec![a(0.0, 0.5), a(1.0, 0.5)], 0.5).is_ok());
    }

    #[test]
    fn atom_conditionals() {
        let i = Atom::new(FeatureVector::scalar(0.0), 1.0, Region::Informative, 0.3, Label::Pos);
        let u = Atom { region: Region::Uninformative, ..i.clone() };
        assert!((i.p_flip() - 0.1).abs() < 1e-15);
        assert!((i.p_agree() - 0.9).abs() < 1e-15);
        assert!((u.p_flip() - 0.4).abs() < 1e-15);
        assert!((u.p_agree() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn random_specs_are_valid() {
        let mut rng = RngSeed(5).rng();
        for m in 2..=12 {
            let s = DiscreteSpec::random(m, 0.2, &mut rng).unwrap();
            assert_eq!(s.len(), m);
            let alpha = s.informative_mass();
            assert!(alpha > 0.0 && alpha < 1.0);
        }
    }

    #[test]
    fn threshold_instance_layout() {
        let spec = ThresholdInstance::default().build().unwrap();
        assert_eq!(spec.len(), 1000);
        assert!((spec.informative_mass() - 0.5).abs() < 1e-12);
        let right = ThresholdInstance {
            informative_side: Side::Right,
            alpha: 0.3,
            ..Default::default()
        }
        .build()
        .unwrap();
        assert!((right.informative_mass() - 0.3).abs() < 1e-12);
        assert_eq!(right.atoms()[999].region, Region::Informative);
        assert_eq!(right.atoms()[0].region, Region::Uninformative);
    }
}
