//! Acceptance gate. Each test checks one criterion and writes a single
//! `criterion N: PASS|FAIL ...` line to stderr (bypassing output capture) before
//! asserting.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use abstain_core::datagen::{
    lambda_bar_from_taus, quadrant_mixture_spec, sample_process, Atom, DiscreteSpec, ThresholdInstance,
};
use abstain_core::eval::{
    aggregate_sweep, average_precision, disagreement_mass_atoms, informative_conditional_risk, recovery_bound,
    sample_complexity_sweep, selective_risk_from_scores, spearman, SweepPlan,
};
use abstain_core::experiment::{self, ExperimentConfig};
use abstain_core::losses::{
    beta_interval, risk_gap, selector_ce_loss, selector_focal_loss, selector_risk_population,
    weighted_classifier_ce_loss, LossValue,
};
use abstain_core::models::{enumerate_threshold_selectors, Differentiable, MlpModel, Orientations, ScoreModel};
use abstain_core::training::{alternate_minimize, isa_train, IsaConfig, Learner};
use abstain_core::types::{observed, FeatureVector, Label, Region, RngSeed, Scorer};
use rand::Rng;

fn verdict(n: u32, passed: bool, detail: &str, elapsed: Duration) {
    let line = format!(
        "criterion {n}: {} {detail} [{:.2}s]\n",
        if passed { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
    assert!(passed, "criterion {n} failed: {detail}");
}

fn two_atom() -> DiscreteSpec {
    DiscreteSpec::new(
        vec![
            Atom::new(FeatureVector::scalar(0.0), 0.5, Region::Informative, 0.5, Label::Pos),
            Atom::new(FeatureVector::scalar(1.0), 0.5, Region::Uninformative, 0.5, Label::Pos),
        ],
        0.5,
    )
    .unwrap()
}

fn selectors(m: usize) -> impl Iterator<Item = Vec<Label>> {
    (0u64..1 << m).map(move |mask| (0..m).map(|i| Label::from_bool(mask >> i & 1 == 1)).collect())
}

/// Random spec family shared by criteria 2 and 3: `m` in `2..=12`, `lambda_bar`
/// uniform on `[0.05, 0.5]`.
fn random_spec(i: u64) -> DiscreteSpec {
    let mut rng = RngSeed(0x00AC_CE97).derive(i).rng();
    let m = rng.random_range(2..=12);
    let lb = rng.random_range(0.05..=0.5);
    DiscreteSpec::random(m, lb, &mut rng).unwrap()
}

fn threshold_class() -> Learner {
    // 101 grid points in each orientation
    Learner::Finite(enumerate_threshold_selectors(0.0, 1.0, 101, Orientations::Both).unwrap())
}

#[test]
fn criterion_01_exact_risk_oracle() {
    let t = Instant::now();
    let spec = two_atom();
    let all = [Label::Pos, Label::Pos];
    let r_star = selector_risk_population(&spec.g_star(), &spec, 3.0).unwrap();
    let r_all = selector_risk_population(&all, &spec, 3.0).unwrap();
    let gap = risk_gap(&all, &spec, 3.0).unwrap();
    let elapsed = t.elapsed();
    let ok = (r_star - 0.25).abs() <= 1e-12
        && (r_all - 0.75).abs() <= 1e-12
        && (gap - 0.5).abs() <= 1e-12
        && elapsed < Duration::from_secs(1);
    verdict(1, ok, &format!("R(g*)={r_star} R(all)={r_all} gap={gap}"), elapsed);
}

#[test]
fn criterion_02_margin_inequality_exhaustive() {
    let t = Instant::now();
    let mut violations = 0usize;
    let mut selectors_seen = 0usize;
    let mut worst = f64::INFINITY;
    for i in 0..1000u64 {
        let spec = random_spec(i);
        let lb = spec.lambda_bar();
        let iv = beta_interval(lb).unwrap();
        let beta = RngSeed(i).rng().random_range(iv.lo..=iv.hi);
        let c = lb / (4.0 * (1.0 + 2.0 * lb));
        let g_star = spec.g_star();
        let r_star = selector_risk_population(&g_star, &spec, beta).unwrap();
        for g in selectors(spec.len()) {
            let gap = selector_risk_population(&g, &spec, beta).unwrap() - r_star;
            let dis: f64 = spec
                .atoms()
                .iter()
                .zip(&g)
                .zip(&g_star)
                .filter(|((_, a), b)| a != b)
                .map(|((atom, _), _)| atom.mass)
                .sum();
            let slack = gap - c * dis;
            worst = worst.min(slack);
            if slack < -1e-12 {
                violations += 1;
            }
            selectors_seen += 1;
        }
    }
    let elapsed = t.elapsed();
    verdict(
        2,
        violations == 0 && elapsed < Duration::from_secs(60),
        &format!("specs=1000 selectors={selectors_seen} violations={violations} worst_slack={worst:.3e}"),
        elapsed,
    );
}

#[test]
fn criterion_03_beta_admissibility() {
    let t = Instant::now();
    let mut failures = 0usize;
    let mut cases = 0usize;
    for i in 0..1000u64 {
        let spec = random_spec(i);
        let iv = beta_interval(spec.lambda_bar()).unwrap();
        let mut rng = RngSeed(i).derive(1).rng();
        let betas = [iv.lo, iv.hi, 0.5 * (iv.lo + iv.hi), rng.random_range(iv.lo..=iv.hi)];
        for beta in betas {
            let r_star = selector_risk_population(&spec.g_star(), &spec, beta).unwrap();
            let min = selectors(spec.len())
                .map(|g| selector_risk_population(&g, &spec, beta).unwrap())
                .fold(f64::INFINITY, f64::min);
            if r_star > min + 1e-12 {
                failures += 1;
            }
            cases += 1;
        }
    }
    // below the interval selecting the uninformative atom too is strictly better
    let spec = two_atom();
    let beta = 0.5;
    let below = beta < beta_interval(0.5).unwrap().lo;
    let crafted_gap = risk_gap(&[Label::Pos, Label::Pos], &spec, beta).unwrap();
    let crafted_fails = below && crafted_gap < 0.0;
    let elapsed = t.elapsed();
    verdict(
        3,
        failures == 0 && crafted_fails && elapsed < Duration::from_secs(60),
        &format!("admissible cases={cases} g*-not-minimal={failures}; beta=0.5 select-all gap={crafted_gap}"),
        elapsed,
    );
}

#[test]
fn criterion_04_g_star_recovery() {
    let t = Instant::now();
    let spec = ThresholdInstance {
        alpha: 0.5,
        ..ThresholdInstance::with_lambda_bar(0.5)
    }
    .build()
    .unwrap();
    let process = spec.to_process().unwrap();
    let class = threshold_class();
    let Learner::Finite(fc) = &class else { unreachable!() };
    assert_eq!(fc.len(), 202);
    let (mut within, mut bound_violations, mut max_dis) = (0, 0, 0.0_f64);
    for seed in 0..100u64 {
        let data = observed(&sample_process(&process, 2000, RngSeed(seed)).unwrap());
        let alt = alternate_minimize(&data, &class, &class, 3.0, 10).unwrap();
        let g: Vec<Label> = spec
            .atoms()
            .iter()
            .map(|a| alt.g_hat.hypothesis.decide(&a.x).unwrap())
            .collect();
        let dis = disagreement_mass_atoms(&g, &spec).unwrap();
        let eps = risk_gap(&g, &spec, 3.0).unwrap();
        if dis <= 0.05 {
            within += 1;
        }
        if dis > recovery_bound(eps, 0.5) + 1e-12 {
            bound_violations += 1;
        }
        max_dis = max_dis.max(dis);
    }
    let elapsed = t.elapsed();
    verdict(
        4,
        within >= 95 && bound_violations == 0 && elapsed < Duration::from_secs(300),
        &format!("disagreement<=0.05 in {within}/100 seeds, bound violations={bound_violations}, max disagreement={max_dis:.4}"),
        elapsed,
    );
}

#[test]
fn criterion_05_subset_erm_gain() {
    let t = Instant::now();
    let spec = ThresholdInstance::with_lambda_bar(0.3).build().unwrap();
    let process = spec.to_process().unwrap();
    let class = threshold_class();
    let (mut no_worse, mut total_gain) = (0, 0.0);
    for seed in 0..100u64 {
        let data = observed(&sample_process(&process, 1000, RngSeed(seed)).unwrap());
        let alt = alternate_minimize(&data, &class, &class, 3.0, 10).unwrap();
        let hat = informative_conditional_risk(&alt.f_erm.hypothesis, &spec).unwrap();
        let tilde = informative_conditional_risk(&alt.f_tilde.hypothesis, &spec).unwrap();
        if tilde <= hat + 1e-12 {
            no_worse += 1;
        }
        total_gain += hat - tilde;
    }
    let mean_gain = total_gain / 100.0;
    let elapsed = t.elapsed();
    verdict(
        5,
        no_worse >= 80 && mean_gain > 0.0 && elapsed < Duration::from_secs(300),
        &format!("f~ no worse than f^ in {no_worse}/100 seeds, mean improvement={mean_gain:.5} (needs > 0)"),
        elapsed,
    );
}

#[test]
fn criterion_06_isa_on_gaussian_mixture() {
    let spec = quadrant_mixture_spec(0.5, 0.5).unwrap();
    let cfg = IsaConfig::default();
    let mut ok = true;
    let mut details = Vec::new();
    let t_all = Instant::now();
    for seed in 0..3u64 {
        let t = Instant::now();
        let train = sample_process(&spec, 4000, RngSeed(seed).derive(0)).unwrap();
        let test = sample_process(&spec, 4000, RngSeed(seed).derive(1)).unwrap();
        let regions: Vec<Region> = train.iter().map(|o| o.region).collect();
        let p = ScoreModel::build(2, &[], RngSeed(seed).derive(2)).unwrap();
        let s = ScoreModel::build(2, &[], RngSeed(seed).derive(3)).unwrap();
        let out = isa_train(&observed(&train), p, s, &cfg, Some(&regions)).unwrap();
        let g: Vec<f64> = test.iter().map(|o| out.selector.score(o.x())).collect();
        let relevant: Vec<bool> = test.iter().map(|o| o.region.is_informative()).collect();
        let wrong: Vec<bool> = test
            .iter()
            .map(|o| (out.predictor.score(o.x()) > 0.5) != o.y().is_pos())
            .collect();
        let ap = average_precision(&g, &relevant).unwrap();
        let sr = selective_risk_from_scores(&g, &wrong, 0.5).unwrap().risk;
        let full = selective_risk_from_scores(&g, &wrong, 1.0).unwrap().risk;
        let el = t.elapsed();
        ok &= ap >= 0.95 && sr <= 0.05 && (0.2..=0.35).contains(&full) && el < Duration::from_secs(180);
        details.push(format!("seed {seed}: AP={ap:.4} SR@0.5={sr:.4} SR@1={full:.4}"));
    }
    verdict(6, ok, &details.join("; "), t_all.elapsed());
}

#[test]
fn criterion_07_trend_reproduction() {
    let t = Instant::now();
    let class = threshold_class();
    let seeds: Vec<u64> = (0..50).collect();
    let n_grid = [125, 250, 500, 1000, 2000, 4000];
    let specs = vec![ThresholdInstance::with_lambda_bar(0.5).build().unwrap()];
    let rows = sample_complexity_sweep(&SweepPlan {
        specs: &specs,
        class_f: &class,
        class_g: &class,
        beta: 3.0,
        rounds: 10,
        n_grid: &n_grid,
        seeds: &seeds,
    })
    .unwrap();
    let by_n = aggregate_sweep(&rows);
    let ns: Vec<f64> = by_n.iter().map(|s| s.n as f64).collect();
    let dis_n: Vec<f64> = by_n.iter().map(|s| s.mean_disagreement).collect();
    let rho = spearman(&ns, &dis_n).unwrap();

    let gaps = [0.1, 0.2, 0.3, 0.5];
    let specs: Vec<DiscreteSpec> = gaps
        .iter()
        .map(|&l| ThresholdInstance::with_lambda_bar(l).build().unwrap())
        .collect();
    let rows = sample_complexity_sweep(&SweepPlan {
        specs: &specs,
        class_f: &class,
        class_g: &class,
        beta: 3.0,
        rounds: 10,
        n_grid: &[1000],
        seeds: &seeds,
    })
    .unwrap();
    let dis_l: Vec<f64> = aggregate_sweep(&rows).iter().map(|s| s.mean_disagreement).collect();
    let monotone_l = dis_l.windows(2).all(|w| w[1] <= w[0]);
    let elapsed = t.elapsed();
    verdict(
        7,
        rho <= -0.8 && monotone_l && elapsed < Duration::from_secs(600),
        &format!("spearman(n, disagreement)={rho:.3} over {dis_n:.4?}; disagreement at lambda_bar {gaps:?} = {dis_l:.4?}"),
        elapsed,
    );
}

/// Worst relative error between an analytic and a central-difference gradient.
fn worst_rel(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| {
            let scale = a.abs().max(n.abs());
            if scale < 1e-8 {
                0.0
            } else {
                (a - n).abs() / scale
            }
        })
        .fold(0.0, f64::max)
}

fn fd_scores(s: &[f64], h: f64, f: impl Fn(&[f64]) -> LossValue) -> Vec<f64> {
    (0..s.len())
        .map(|i| {
            let mut p = s.to_vec();
            let mut m = s.to_vec();
            p[i] += h;
            m[i] -= h;
            (f(&p).value - f(&m).value) / (2.0 * h)
        })
        .collect()
}

#[test]
fn criterion_08_gradient_suite() {
    let t = Instant::now();
    let cases = 100;
    let h = 1e-6;
    let mut worst = [0.0_f64; 4];
    for case in 0..cases {
        let mut rng = RngSeed(case).rng();
        let n = rng.random_range(1..=16);
        let s: Vec<f64> = (0..n).map(|_| rng.random_range(0.02..0.98)).collect();
        let z: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=1.0)).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
        let beta = rng.random_range(0.5..10.0);

        let ce = |s: &[f64]| selector_ce_loss(s, &z, beta).unwrap();
        worst[0] = worst[0].max(worst_rel(ce(&s).gradient.as_ref().unwrap(), &fd_scores(&s, h, ce)));
        let focal = |s: &[f64]| selector_focal_loss(s, &z, beta).unwrap();
        worst[1] = worst[1].max(worst_rel(focal(&s).gradient.as_ref().unwrap(), &fd_scores(&s, h, focal)));
        let wce = |s: &[f64]| weighted_classifier_ce_loss(s, &z, &w).unwrap();
        worst[2] = worst[2].max(worst_rel(wce(&s).gradient.as_ref().unwrap(), &fd_scores(&s, h, wce)));

        let d_in = rng.random_range(1..=5);
        let mut dims = vec![d_in];
        for _ in 0..rng.random_range(1..=2) {
            dims.push(rng.random_range(2..=8));
        }
        dims.push(1);
        let model = MlpModel::new_random(&dims, RngSeed(case).derive(7)).unwrap();
        let xs: Vec<FeatureVector> = (0..n)
            .map(|_| FeatureVector::new((0..d_in).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap())
            .collect();
        let refs: Vec<&FeatureVector> = xs.iter().collect();
        let loss_at = |m: &MlpModel| {
            let sc = m.scores(&refs).unwrap();
            selector_ce_loss(&sc, &z, beta).unwrap()
        };
        let scores = model.scores(&refs).unwrap();
        let dscore = selector_ce_loss(&scores, &z, beta).unwrap().gradient.unwrap();
        let analytic = model.backward(&refs, &dscore).unwrap();
        let theta = model.params();
        let numeric: Vec<f64> = (0..theta.len())
            .map(|i| {
                let mut mp = model.clone();
                let mut mm = model.clone();
                let mut tp = theta.clone();
                let mut tm = theta.clone();
                tp[i] += h;
                tm[i] -= h;
                mp.set_params(&tp).unwrap();
                mm.set_params(&tm).unwrap();
                (loss_at(&mp).value - loss_at(&mm).value) / (2.0 * h)
            })
            .collect();
        worst[3] = worst[3].max(worst_rel(&analytic, &numeric));
    }
    let elapsed = t.elapsed();
    verdict(
        8,
        worst.iter().all(|&e| e <= 1e-4) && elapsed < Duration::from_secs(30),
        &format!(
            "{cases} cases each, worst relative error: selector CE {:.2e}, focal {:.2e}, weighted CE {:.2e}, MLP backward {:.2e}",
            worst[0], worst[1], worst[2], worst[3]
        ),
        elapsed,
    );
}

fn csv_tree(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(csv_tree(&p));
        } else if p.extension().is_some_and(|x| x == "csv") {
            out.push(p);
        }
    }
    out.sort();
    out
}

#[test]
fn criterion_09_determinism() {
    let t = Instant::now();
    let configs = [
        r#"
        [process]
        kind = "threshold"
        atoms = 500
        [method]
        kind = "alternating"
        [eval]
        n = 1000
        seeds = [0, 1, 2, 3]
        n_grid = [200, 800]
        "#,
        r#"
        [process]
        kind = "gaussian_mixture"
        [method]
        kind = "isa"
        hidden = [6]
        [method.isa]
        pretrain_epochs = 3
        total_epochs = 10
        [eval]
        n = 1500
        test_n = 500
        seeds = [0, 1, 2]
        "#,
        r#"
        [process]
        kind = "lecam"
        d = 5
        [noise]
        alpha = 0.3
        lambda_bar = 0.4
        [method]
        kind = "confidence_baseline"
        [eval]
        n = 800
        seeds = [4, 9]
        "#,
    ];
    let mut files = 0;
    let mut mismatches = Vec::new();
    for (k, text) in configs.iter().enumerate() {
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        experiment::run(&cfg, a.path(), 1).unwrap();
        experiment::run(&cfg, b.path(), 4).unwrap();
        let fa = csv_tree(a.path());
        let fb = csv_tree(b.path());
        if fa.len() != fb.len() {
            mismatches.push(format!("config {k}: file count {} vs {}", fa.len(), fb.len()));
        }
        for p in &fa {
            files += 1;
            let q = b.path().join(p.strip_prefix(a.path()).unwrap());
            if fs::read(p).ok() != fs::read(&q).ok() {
                mismatches.push(format!("config {k}: {}", p.strip_prefix(a.path()).unwrap().display()));
            }
        }
    }
    verdict(
        9,
        mismatches.is_empty() && files > 0,
        &format!("{files} CSV files compared across reruns (1 vs 4 workers), mismatches: {mismatches:?}"),
        t.elapsed(),
    );
}

#[test]
fn criterion_10_lambda_bar_mapping() {
    let t = Instant::now();
    let cases = [(0.3, 0.6, 1.0 / 3.0), (0.2, 0.7, 0.388_888_888_888_888_9), (0.1, 0.8, 0.444_444_444_444_444_4)];
    let mut worst = 0.0_f64;
    for (ti, tu, want) in cases {
        worst = worst.max((lambda_bar_from_taus(ti, tu).unwrap() - want).abs());
    }
    verdict(10, worst <= 1e-12, &format!("worst error {worst:.2e} over 3 columns"), t.elapsed());
}

/// Not a numbered criterion: the paired-seed boundary example for the subset
/// refit (clean informative half, coin-flip uninformative half, `f*` boundary at
/// the region border). Reported on the same `example` line format.
#[test]
fn example_subset_erm_boundary_closer() {
    let t = Instant::now();
    let spec = ThresholdInstance {
        f_boundary: 0.5,
        ..ThresholdInstance::with_lambda_bar(0.5)
    }
    .build()
    .unwrap();
    let process = spec.to_process().unwrap();
    let class = threshold_class();
    // index -> distance of the threshold to the true boundary; wrong orientation is maximal
    let dist = |i: usize| if i < 101 { (i as f64 / 100.0 - 0.5).abs() } else { 1.0 };
    let (mut closer, mut ties) = (0, 0);
    for seed in 0..100u64 {
        let data = observed(&sample_process(&process, 500, RngSeed(seed)).unwrap());
        let alt = alternate_minimize(&data, &class, &class, 3.0, 10).unwrap();
        let full = dist(alt.f_erm.index.unwrap());
        let sub = dist(alt.f_tilde.index.unwrap());
        if sub < full {
            closer += 1;
        } else if sub == full {
            ties += 1;
        }
    }
    let passed = closer >= 90;
    let line = format!(
        "example subset-ERM boundary: {} strictly closer in {closer}/100 seeds (ties {ties}), needs >= 90 [{:.2}s]\n",
        if passed { "PASS" } else { "FAIL" },
        t.elapsed().as_secs_f64()
    );
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
    assert!(passed, "{line}");
}
