use std::path::PathBuf;
use std::process::ExitCode;

use abstain_core::experiment::{self, ExperimentConfig};
use abstain_core::Error;
use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

/// Experiments on selective classification under data-dependent label noise.
#[derive(Debug, Parser)]
#[command(name = "abstain-lab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train and evaluate every seed; writes report.json and per-seed CSVs.
    Run(Common),
    /// Emit the training draw of every seed as a dataset CSV.
    Gen(Common),
    /// Run the exact theory-check suite; exits nonzero if any check fails.
    Verify(Common),
    /// Sample-complexity grid over n and the noise gap.
    Sweep(Common),
    /// Re-aggregate the per-seed metrics CSVs of an earlier run.
    Report(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// TOML experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated seeds; overrides `eval.seeds`.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Worker threads. ABSTAIN_LAB_JOBS takes precedence.
    #[arg(long)]
    jobs: Option<usize>,
}

const JOBS_ENV: &str = "ABSTAIN_LAB_JOBS";

impl Common {
    fn load(&self) -> Result<(ExperimentConfig, PathBuf)> {
        let mut cfg = ExperimentConfig::load(&self.config)
            .with_context(|| format!("loading {}", self.config.display()))?;
        if let Some(seeds) = &self.seeds {
            cfg.eval.seeds = seeds.clone();
        }
        if let Some(out) = &self.out {
            cfg.output.dir = out.clone();
        }
        cfg.validate().context("after command-line overrides")?;
        let out = cfg.output.dir.clone();
        Ok((cfg, out))
    }

    fn jobs(&self) -> Result<usize> {
        let jobs = match std::env::var(JOBS_ENV) {
            Ok(v) => v
                .trim()
                .parse::<usize>()
                .with_context(|| format!("{JOBS_ENV}={v:?} is not a thread count"))?,
            Err(_) => match self.jobs {
                Some(j) => j,
                None => std::thread::available_parallelism().map_or(1, |n| n.get()),
            },
        };
        anyhow::ensure!(jobs >= 1, "--jobs must be at least 1");
        Ok(jobs)
    }
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run(c) => {
            let (cfg, out) = c.load()?;
            let report = experiment::run(&cfg, &out, c.jobs()?)?;
            for (name, a) in &report.aggregates {
                println!("{name:>16}  mean {:.6}  sd {:.6}  (n={})", a.mean, a.sd, a.count);
            }
            for chk in &report.theory_checks {
                println!("{}: {}", chk.description, if chk.passed { "passed" } else { "FAILED" });
            }
            for f in &report.failures {
                eprintln!("seed {} failed: {}", f.seed, f.error);
            }
            println!("report: {}", out.join("report.json").display());
            Ok(report.complete && report.theory_checks.iter().all(|c| c.passed))
        }
        Command::Gen(c) => {
            let (cfg, out) = c.load()?;
            for p in experiment::gen(&cfg, &out)? {
                println!("{}", p.display());
            }
            Ok(true)
        }
        Command::Verify(c) => {
            let (cfg, out) = c.load()?;
            let report = experiment::verify(&cfg, c.jobs()?)?;
            experiment::write_verify_report(&report, &out)?;
            for chk in &report.checks {
                println!(
                    "{:<28} {}  cases={} violations={} worst_slack={:.3e}",
                    chk.name,
                    if chk.passed { "PASS" } else { "FAIL" },
                    chk.cases,
                    chk.violations,
                    chk.worst_slack
                );
            }
            Ok(report.all_passed)
        }
        Command::Sweep(c) => {
            let (cfg, out) = c.load()?;
            let report = experiment::sweep(&cfg, &out, c.jobs()?)?;
            println!("lambda_bar       n  seeds  disagreement (sd)       gain (sd)");
            for s in &report.summary {
                println!(
                    "{:>10.4} {:>7} {:>6}  {:.5} ({:.5})  {:+.5} ({:.5})",
                    s.lambda_bar, s.n, s.seeds, s.mean_disagreement, s.sd_disagreement, s.mean_gain, s.sd_gain
                );
            }
            Ok(true)
        }
        Command::Report(c) => {
            let (_, out) = c.load()?;
            let agg = experiment::report(&out)?;
            println!("{}", format_aggregates(&agg));
            Ok(true)
        }
    }
}

fn format_aggregates(agg: &experiment::AggregateReport) -> String {
    agg.aggregates
        .iter()
        .map(|(name, a)| format!("{name}: mean={} sd={} n={}", a.mean, a.sd, a.count))
        .collect::<Vec<_>>()
        .join("\n")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            let config_error = e.chain().any(|c| matches!(c.downcast_ref::<Error>(), Some(Error::Config(_))));
            ExitCode::from(if config_error { 2 } else { 1 })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_seed_list_and_jobs() {
        let cli = Cli::try_parse_from(["abstain-lab", "sweep", "--config", "c.toml", "--seeds", "3,1,2", "--jobs", "4"])
            .unwrap();
        let Command::Sweep(c) = cli.command else { panic!("wrong subcommand") };
        assert_eq!(c.seeds, Some(vec![3, 1, 2]));
        assert_eq!(c.jobs, Some(4));
        assert!(Cli::try_parse_from(["abstain-lab", "run"]).is_err());
    }
}
