use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{
    average_precision, disagreement_mass, informative_conditional_risk, mean_sd, selective_risk_from_scores, Oracle,
};
use crate::datagen::{sample_process, DiscreteSpec};
use crate::error::{Error, Result};
use crate::training::{alternate_minimize, correctness, Learner};
use crate::types::{observed, RngSeed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub lambda_bar: f64,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub disagreement: f64,
    /// Selector AP against the sample's true regions; empty when the sample
    /// holds no informative point.
    pub ap: Option<f64>,
    pub sr_at_alpha: f64,
    pub sr_full: f64,
    pub f_hat_cond_risk: f64,
    pub f_tilde_cond_risk: f64,
}

impl SweepRow {
    /// Reduction in informative-conditional risk from the subset refit.
    pub fn gain(&self) -> f64 {
        self.f_hat_cond_risk - self.f_tilde_cond_risk
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub lambda_bar: f64,
    pub n: usize,
    pub seeds: usize,
    pub mean_disagreement: f64,
    pub sd_disagreement: f64,
    pub mean_gain: f64,
    pub sd_gain: f64,
}

#[derive(Debug, Clone)]
pub struct SweepPlan<'a> {
    pub specs: &'a [DiscreteSpec],
    pub class_f: &'a Learner,
    pub class_g: &'a Learner,
    pub beta: f64,
    pub rounds: usize,
    pub n_grid: &'a [usize],
    pub seeds: &'a [u64],
}

/// One alternation run per `(spec, n, seed)` cell, scored against the exact
/// oracle. Cells run on the current rayon pool; row order is spec, then n,
/// then seed.
pub fn sample_complexity_sweep(plan: &SweepPlan<'_>) -> Result<Vec<SweepRow>> {
    if plan.specs.is_empty() || plan.n_grid.is_empty() || plan.seeds.is_empty() {
        return Err(Error::arg("sweep grids must be non-empty"));
    }
    let cells: Vec<(usize, usize, u64)> = (0..plan.specs.len())
        .flat_map(|s| plan.n_grid.iter().flat_map(move |&n| plan.seeds.iter().map(move |&seed| (s, n, seed))))
        .collect();
    cells
        .par_iter()
        .map(|&(s, n, seed)| sweep_cell(plan, &plan.specs[s], n, seed))
        .collect()
}

fn sweep_cell(plan: &SweepPlan<'_>, spec: &DiscreteSpec, n: usize, seed: u64) -> Result<SweepRow> {
    let process = spec.to_process()?;
    let data = sample_process(&process, n, RngSeed(seed).derive(n as u64))?;
    let obs = observed(&data);
    let alt = alternate_minimize(&obs, plan.class_f, plan.class_g, plan.beta, plan.rounds)?;
    let g = &alt.g_hat.hypothesis;
    let g_scores: Vec<f64> = obs.iter().map(|s| g.score(&s.x)).collect();
    let wrong: Vec<bool> = correctness(&alt.f_tilde.hypothesis, &obs)?.into_iter().map(|c| !c).collect();
    let relevance: Vec<bool> = data.iter().map(|o| o.region.is_informative()).collect();
    let ap = if relevance.iter().any(|&r| r) {
        Some(average_precision(&g_scores, &relevance)?)
    } else {
        None
    };
    let alpha = spec.informative_mass();
    Ok(SweepRow {
        n,
        lambda_bar: spec.lambda_bar(),
        alpha,
        beta: plan.beta,
        seed,
        disagreement: disagreement_mass(g, Oracle::Spec(spec))?,
        ap,
        sr_at_alpha: selective_risk_from_scores(&g_scores, &wrong, alpha)?.risk,
        sr_full: selective_risk_from_scores(&g_scores, &wrong, 1.0)?.risk,
        f_hat_cond_risk: informative_conditional_risk(&alt.f_erm.hypothesis, spec)?,
        f_tilde_cond_risk: informative_conditional_risk(&alt.f_tilde.hypothesis, spec)?,
    })
}

/// Mean and sample standard deviation per `(lambda_bar, n)`, in first-seen order.
pub fn aggregate_sweep(rows: &[SweepRow]) -> Vec<SweepSummary> {
    let mut keys: Vec<(f64, usize)> = Vec::new();
    for r in rows {
        if !keys.contains(&(r.lambda_bar, r.n)) {
            keys.push((r.lambda_bar, r.n));
        }
    }
    keys.into_iter()
        .map(|(lb, n)| {
            let cell: Vec<&SweepRow> = rows.iter().filter(|r| r.lambda_bar == lb && r.n == n).collect();
            let dis: Vec<f64> = cell.iter().map(|r| r.disagreement).collect();
            let gain: Vec<f64> = cell.iter().map(|r| r.gain()).collect();
            let (md, sd) = mean_sd(&dis);
            let (mg, sg) = mean_sd(&gain);
            SweepSummary {
                lambda_bar: lb,
                n,
                seeds: cell.len(),
                mean_disagreement: md,
                sd_disagreement: sd,
                mean_gain: mg,
                sd_gain: sg,
            }
        })
        .collect()
}

/// Columns `n,lambda_bar,alpha,beta,seed,disagreement,ap,sr_at_alpha,sr_full,f_hat_cond_risk,f_tilde_cond_risk`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    if rows.is_empty() {
        w.write_record([
            "n",
            "lambda_bar",
            "alpha",
            "beta",
            "seed",
            "disagreement",
            "ap",
            "sr_at_alpha",
            "sr_full",
            "f_hat_cond_risk",
            "f_tilde_cond_risk",
        ])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sweep_csv<R: Read>(reader: R) -> Result<Vec<SweepRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    Ok(rdr.deserialize().collect::<std::result::Result<Vec<SweepRow>, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::ThresholdInstance;
    use crate::models::{enumerate_threshold_selectors, Orientations};

    #[test]
    fn rows_are_ordered_and_round_trip() {
        let specs = vec![ThresholdInstance::with_lambda_bar(0.5).build().unwrap()];
        let class = Learner::Finite(enumerate_threshold_selectors(0.0, 1.0, 21, Orientations::Both).unwrap());
        let plan = SweepPlan {
            specs: &specs,
            class_f: &class,
            class_g: &class,
            beta: 3.0,
            rounds: 2,
            n_grid: &[100, 200],
            seeds: &[0, 1, 2],
        };
        let rows = sample_complexity_sweep(&plan).unwrap();
        let order: Vec<(usize, u64)> = rows.iter().map(|r| (r.n, r.seed)).collect();
        assert_eq!(order, vec![(100, 0), (100, 1), (100, 2), (200, 0), (200, 1), (200, 2)]);
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        assert_eq!(read_sweep_csv(buf.as_slice()).unwrap(), rows);
        let summary = aggregate_sweep(&rows);
        assert_eq!(summary.len(), 2);
        assert_eq!(summary[0].seeds, 3);
        let mean: f64 = rows[..3].iter().map(|r| r.disagreement).sum::<f64>() / 3.0;
        assert!((summary[0].mean_disagreement - mean).abs() < 1e-15);
    }

    #[test]
    fn empty_grid_rejected() {
        let specs = vec![ThresholdInstance::default().build().unwrap()];
        let class = Learner::Finite(enumerate_threshold_selectors(0.0, 1.0, 3, Orientations::Both).unwrap());
        let plan = SweepPlan {
            specs: &specs,
            class_f: &class,
            class_g: &class,
            beta: 3.0,
            rounds: 1,
            n_grid: &[],
            seeds: &[0],
        };
        assert!(sample_complexity_sweep(&plan).is_err());
    }
}
