use std::fs;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::run::{pool, SCHEMA_VERSION};
use crate::datagen::{lambda_bar_from_taus, Atom, DiscreteSpec};
use crate::error::{Error, Result};
use crate::eval::{margin_bound_check, MARGIN_TOLERANCE};
use crate::losses::{beta_interval, risk_gap, selector_risk_population};
use crate::types::{FeatureVector, Label, Region, RngSeed};

/// Outcome of one check of the theory suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyCheck {
    pub name: String,
    pub cases: usize,
    pub violations: usize,
    /// Smallest slack seen; negative means a violation.
    pub worst_slack: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub schema_version: u32,
    pub checks: Vec<VerifyCheck>,
    pub all_passed: bool,
}

/// Two atoms of mass 1/2 with `lambda = 1/2`, the first informative.
pub fn two_atom_spec() -> DiscreteSpec {
    DiscreteSpec::new(
        vec![
            Atom::new(FeatureVector::scalar(0.0), 0.5, Region::Informative, 0.5, Label::Pos),
            Atom::new(FeatureVector::scalar(1.0), 0.5, Region::Uninformative, 0.5, Label::Pos),
        ],
        0.5,
    )
    .expect("valid two-atom spec")
}

/// A random discrete spec with `2..=max_atoms` atoms, `lambda_bar` uniform on
/// `[0.05, 0.5]` and a `beta` drawn uniformly from its admissible interval.
pub fn random_admissible_case(max_atoms: usize, seed: RngSeed) -> Result<(DiscreteSpec, f64)> {
    let mut rng = seed.rng();
    let m = rng.random_range(2..=max_atoms);
    let lb = rng.random_range(0.05..=0.5);
    let spec = DiscreteSpec::random(m, lb, &mut rng)?;
    let iv = beta_interval(lb)?;
    let beta = rng.random_range(iv.lo..=iv.hi);
    Ok((spec, beta))
}

/// Every selector on `m` atoms, bit `i` of the index deciding atom `i`.
pub fn all_selectors(m: usize) -> impl Iterator<Item = Vec<Label>> {
    (0u64..1 << m).map(move |mask| (0..m).map(|i| Label::from_bool(mask >> i & 1 == 1)).collect())
}

/// Worst margin slack `R(g) - R(g*) - c P[g != g*]` over all selectors, and
/// the number of selectors whose risk falls below that of `g*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExhaustiveScan {
    pub selectors: usize,
    pub margin_violations: usize,
    pub worst_margin_slack: f64,
    pub beats_g_star: usize,
    pub worst_gap: f64,
}

pub fn exhaustive_scan(spec: &DiscreteSpec, beta: f64) -> Result<ExhaustiveScan> {
    let g_star = spec.g_star();
    let r_star = selector_risk_population(&g_star, spec, beta)?;
    let mut scan = ExhaustiveScan {
        selectors: 0,
        margin_violations: 0,
        worst_margin_slack: f64::INFINITY,
        beats_g_star: 0,
        worst_gap: f64::INFINITY,
    };
    for g in all_selectors(spec.len()) {
        let check = margin_bound_check(spec, &g, beta, "")?;
        let slack = check.risk_gap - check.margin_lower_bound;
        scan.selectors += 1;
        scan.worst_margin_slack = scan.worst_margin_slack.min(slack);
        if !check.passed {
            scan.margin_violations += 1;
        }
        let gap = selector_risk_population(&g, spec, beta)? - r_star;
        scan.worst_gap = scan.worst_gap.min(gap);
        if gap < -MARGIN_TOLERANCE {
            scan.beats_g_star += 1;
        }
    }
    Ok(scan)
}

fn check(name: &str, cases: usize, violations: usize, worst_slack: f64) -> VerifyCheck {
    VerifyCheck {
        name: name.into(),
        cases,
        violations,
        worst_slack,
        passed: violations == 0,
    }
}

fn two_atom_values() -> Result<VerifyCheck> {
    let spec = two_atom_spec();
    let r = |g: &[Label]| selector_risk_population(g, &spec, 3.0);
    let errs = [
        (r(&spec.g_star())? - 0.25).abs(),
        (r(&[Label::Pos, Label::Pos])? - 0.75).abs(),
        (risk_gap(&[Label::Pos, Label::Pos], &spec, 3.0)? - 0.5).abs(),
    ];
    let bad = errs.iter().filter(|&&e| e > 1e-12).count();
    let worst = errs.iter().fold(0.0_f64, |m, &e| m.max(e));
    Ok(check("two_atom_exact_risks", errs.len(), bad, 1e-12 - worst))
}

fn random_family(count: usize, max_atoms: usize, seed: RngSeed) -> Result<(VerifyCheck, VerifyCheck)> {
    let scans: Vec<ExhaustiveScan> = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let (spec, beta) = random_admissible_case(max_atoms, seed.derive(i))?;
            exhaustive_scan(&spec, beta)
        })
        .collect::<Result<_>>()?;
    let selectors: usize = scans.iter().map(|s| s.selectors).sum();
    let margin = check(
        "margin_exhaustive",
        selectors,
        scans.iter().map(|s| s.margin_violations).sum(),
        scans.iter().fold(f64::INFINITY, |m, s| m.min(s.worst_margin_slack)),
    );
    let minimal = check(
        "g_star_minimizes_risk",
        count,
        scans.iter().filter(|s| s.beats_g_star > 0).count(),
        scans.iter().fold(f64::INFINITY, |m, s| m.min(s.worst_gap)),
    );
    Ok((margin, minimal))
}

/// Below the interval (`beta = 1/2` on the two-atom spec) selecting everything
/// beats `g*`; this check passes when that failure is observed.
fn below_interval_failure() -> Result<VerifyCheck> {
    let spec = two_atom_spec();
    let beta = 0.5;
    let inadmissible = !beta_interval(spec.lambda_bar())?.contains(beta);
    let gap = risk_gap(&[Label::Pos, Label::Pos], &spec, beta)?;
    let refused = matches!(
        margin_bound_check(&spec, &spec.g_star(), beta, ""),
        Err(Error::InadmissibleBeta { .. })
    );
    let ok = inadmissible && gap < 0.0 && refused;
    Ok(check("beta_below_interval_fails", 1, usize::from(!ok), -gap))
}

fn tau_mapping() -> VerifyCheck {
    let cases = [(0.3, 0.6, 1.0 / 3.0), (0.2, 0.7, 0.7 / 1.8), (0.1, 0.8, 0.8 / 1.8)];
    let errs: Vec<f64> = cases
        .iter()
        .map(|&(ti, tu, want)| lambda_bar_from_taus(ti, tu).map_or(f64::INFINITY, |v| (v - want).abs()))
        .collect();
    let bad = errs.iter().filter(|&&e| e > 1e-12).count();
    let worst = errs.iter().fold(0.0_f64, |m, &e| m.max(e));
    check("lambda_bar_from_taus", cases.len(), bad, 1e-12 - worst)
}

/// Runs the standalone theory suite on `jobs` workers. The random family is
/// drawn from the first configured seed.
pub fn verify(cfg: &ExperimentConfig, jobs: usize) -> Result<VerifyReport> {
    cfg.validate()?;
    let seed = RngSeed(cfg.eval.seeds[0]);
    let (margin, minimal) =
        pool(jobs)?.install(|| random_family(cfg.eval.verify_specs, cfg.eval.verify_max_atoms, seed))?;
    let checks = vec![two_atom_values()?, margin, minimal, below_interval_failure()?, tau_mapping()];
    Ok(VerifyReport {
        schema_version: SCHEMA_VERSION,
        all_passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

pub fn write_verify_report(report: &VerifyReport, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    fs::write(out.join("verify.json"), serde_json::to_string_pretty(report)?)?;
    Ok(())
}
