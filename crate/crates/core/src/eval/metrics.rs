use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::datagen::DiscreteSpec;
use crate::error::{Error, Result};
use crate::losses::{beta_interval, risk_gap};
use crate::types::{sign_decision, Label, LabeledSample, OracleSample, ScoredHypothesis};

fn check_scores(scores: &[f64]) -> Result<()> {
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::InvalidHypothesisOutput(*bad));
    }
    Ok(())
}

/// Indices in descending score order; equal scores keep their original order.
fn descending_order(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal));
    idx
}

/// Mean of precision@k over the ranks `k` that hold a relevant item.
pub fn average_precision(scores: &[f64], relevance: &[bool]) -> Result<f64> {
    if scores.len() != relevance.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            got: relevance.len(),
        });
    }
    check_scores(scores)?;
    let positives = relevance.iter().filter(|&&r| r).count();
    if positives == 0 {
        return Err(Error::UndefinedAp);
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in descending_order(scores).iter().enumerate() {
        if relevance[i] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(sum / positives as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectiveRisk {
    pub risk: f64,
    /// Samples with score strictly above this are selected.
    pub threshold: f64,
    /// Fraction actually selected.
    pub achieved: f64,
}

/// Selective risk from selector scores and per-sample predictor errors.
///
/// The threshold is the largest one whose selected fraction is at least
/// `coverage`, i.e. the smallest achievable fraction not below the target.
pub fn selective_risk_from_scores(g_scores: &[f64], f_wrong: &[bool], coverage: f64) -> Result<SelectiveRisk> {
    let n = g_scores.len();
    if n == 0 {
        return Err(Error::EmptyData);
    }
    if f_wrong.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: f_wrong.len() });
    }
    if !(coverage > 0.0 && coverage <= 1.0) {
        return Err(Error::arg(format!("coverage={coverage} outside (0, 1]")));
    }
    check_scores(g_scores)?;
    let order = descending_order(g_scores);
    let target = ((coverage * n as f64) - 1e-9).ceil().max(1.0) as usize;
    // grow to the end of the tie block so that "score > q" selects exactly `count`
    let mut count = target.min(n);
    while count < n && g_scores[order[count]] == g_scores[order[count - 1]] {
        count += 1;
    }
    let threshold = if count < n {
        g_scores[order[count]]
    } else {
        g_scores[order[n - 1]] - 1.0
    };
    if count == 0 {
        return Err(Error::EmptySelection);
    }
    let errors = order[..count].iter().filter(|&&i| f_wrong[i]).count();
    Ok(SelectiveRisk {
        risk: errors as f64 / count as f64,
        threshold,
        achieved: count as f64 / n as f64,
    })
}

fn selector_scores(g: &ScoredHypothesis, data: &[LabeledSample]) -> Vec<f64> {
    data.iter().map(|s| g.score(&s.x)).collect()
}

fn predictor_errors(f: &ScoredHypothesis, data: &[LabeledSample]) -> Result<Vec<bool>> {
    data.iter().map(|s| Ok(sign_decision(f, &s.x)? != s.y)).collect()
}

pub fn selective_risk_at_coverage(
    f: &ScoredHypothesis,
    g: &ScoredHypothesis,
    data: &[LabeledSample],
    coverage: f64,
) -> Result<SelectiveRisk> {
    selective_risk_from_scores(&selector_scores(g, data), &predictor_errors(f, data)?, coverage)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveragePoint {
    pub coverage: f64,
    pub selective_risk: f64,
    pub threshold: f64,
    pub achieved: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CoverageCurve {
    pub points: Vec<CoveragePoint>,
}

/// Selective risk on a strictly increasing coverage grid.
pub fn coverage_curve_from_scores(g_scores: &[f64], f_wrong: &[bool], grid: &[f64]) -> Result<CoverageCurve> {
    if grid.is_empty() {
        return Err(Error::arg("coverage grid is empty"));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::arg("coverage grid must be strictly increasing"));
    }
    let points = grid
        .iter()
        .map(|&c| {
            let sr = selective_risk_from_scores(g_scores, f_wrong, c)?;
            Ok(CoveragePoint {
                coverage: c,
                selective_risk: sr.risk,
                threshold: sr.threshold,
                achieved: sr.achieved,
            })
        })
        .collect::<Result<_>>()?;
    Ok(CoverageCurve { points })
}

pub fn coverage_curve(f: &ScoredHypothesis, g: &ScoredHypothesis, data: &[LabeledSample], grid: &[f64]) -> Result<CoverageCurve> {
    coverage_curve_from_scores(&selector_scores(g, data), &predictor_errors(f, data)?, grid)
}

/// Ground truth used to score a selector.
#[derive(Debug, Clone, Copy)]
pub enum Oracle<'a> {
    Spec(&'a DiscreteSpec),
    Samples(&'a [OracleSample]),
}

/// Atom-weighted `P[g != g*]`.
pub fn disagreement_mass_atoms(g: &[Label], spec: &DiscreteSpec) -> Result<f64> {
    if g.len() != spec.len() {
        return Err(Error::DimensionMismatch {
            expected: spec.len(),
            got: g.len(),
        });
    }
    Ok(spec
        .atoms()
        .iter()
        .zip(g)
        .filter(|(a, d)| a.region.g_star() != **d)
        .map(|(a, _)| a.mass)
        .fold(0.0, |acc, v| acc + v))
}

/// `P[g(x) != g*(x)]`: exact on a discrete spec, the sample mean otherwise.
pub fn disagreement_mass(g: &ScoredHypothesis, oracle: Oracle<'_>) -> Result<f64> {
    match oracle {
        Oracle::Spec(spec) => {
            let decisions = spec
                .atoms()
                .iter()
                .map(|a| sign_decision(g, &a.x))
                .collect::<Result<Vec<_>>>()?;
            disagreement_mass_atoms(&decisions, spec)
        }
        Oracle::Samples(data) => {
            if data.is_empty() {
                return Err(Error::EmptyData);
            }
            let mut wrong = 0usize;
            for o in data {
                wrong += usize::from(sign_decision(g, o.x())? != o.region.g_star());
            }
            Ok(wrong as f64 / data.len() as f64)
        }
    }
}

/// `P[f(x) != f*(x) | x informative]`, exact on a discrete spec.
pub fn informative_conditional_risk(f: &ScoredHypothesis, spec: &DiscreteSpec) -> Result<f64> {
    let mass_i = spec.informative_mass();
    let mut wrong = 0.0;
    for a in spec.atoms().iter().filter(|a| a.region.is_informative()) {
        if sign_decision(f, &a.x)? != a.f_star {
            wrong += a.mass;
        }
    }
    Ok(wrong / mass_i)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryCheckResult {
    pub description: String,
    pub risk_gap: f64,
    pub margin_lower_bound: f64,
    pub disagreement: f64,
    pub beta_used: f64,
    pub passed: bool,
}

pub const MARGIN_TOLERANCE: f64 = 1e-12;

/// Checks `R(g) - R(g*) >= lambda_bar / (4 (1 + 2 lambda_bar)) * P[g != g*]`
/// exactly; `beta` must be admissible for the spec's noise gap.
pub fn margin_bound_check(spec: &DiscreteSpec, g: &[Label], beta: f64, description: impl Into<String>) -> Result<TheoryCheckResult> {
    let interval = beta_interval(spec.lambda_bar())?;
    if !interval.contains(beta) {
        return Err(Error::InadmissibleBeta {
            beta,
            lo: interval.lo,
            hi: interval.hi,
        });
    }
    let gap = risk_gap(g, spec, beta)?;
    let disagreement = disagreement_mass_atoms(g, spec)?;
    let bound = crate::losses::margin_constant(spec.lambda_bar()) * disagreement;
    Ok(TheoryCheckResult {
        description: description.into(),
        risk_gap: gap,
        margin_lower_bound: bound,
        disagreement,
        beta_used: beta,
        passed: gap >= bound - MARGIN_TOLERANCE,
    })
}

/// Disagreement bound `4 eps (1 + 2 lambda_bar) / lambda_bar` implied by a
/// selector risk gap of `eps`.
pub fn recovery_bound(epsilon: f64, lambda_bar: f64) -> f64 {
    4.0 * epsilon * (1.0 + 2.0 * lambda_bar) / lambda_bar
}

/// Average ranks, 1-based.
fn ranks(v: &[f64]) -> Vec<f64> {
    let order = {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap_or(Ordering::Equal));
        idx
    };
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::arg("spearman needs at least two points"));
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let (mut va, mut vb) = (0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    if va == 0.0 || vb == 0.0 {
        return Err(Error::arg("spearman is undefined for a constant series"));
    }
    Ok(cov / (va * vb).sqrt())
}

pub fn mean_sd(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}
