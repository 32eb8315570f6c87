use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datagen::{lambda_bar_from_taus, Side};
use crate::error::{Error, Result};
use crate::models::{Orientations, SurrogateLoss, TrainConfig};
use crate::training::IsaConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub process: ProcessConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub method: MethodConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_name() -> String {
    "experiment".into()
}

/// Data source; `alpha` and `lambda_bar` come from [`NoiseConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProcessConfig {
    /// One-dimensional grid of atoms with a threshold labeling rule.
    Threshold(ThresholdProcess),
    /// Random small discrete spec drawn from `spec_seed`.
    Discrete(DiscreteProcess),
    GaussianMixture(GaussianProcess),
    Lecam(LecamProcess),
    Csv(CsvProcess),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdProcess {
    pub atoms: usize,
    pub f_boundary: f64,
    pub informative_side: Side,
}

impl Default for ThresholdProcess {
    fn default() -> Self {
        ThresholdProcess {
            atoms: 1000,
            f_boundary: 0.25,
            informative_side: Side::Left,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscreteProcess {
    pub atoms: usize,
    pub spec_seed: u64,
}

impl Default for DiscreteProcess {
    fn default() -> Self {
        DiscreteProcess { atoms: 8, spec_seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaussianProcess {
    pub centers_informative: Vec<Vec<f64>>,
    pub centers_uninformative: Vec<Vec<f64>>,
    pub stddev: f64,
    /// `f*(x) = +1` iff `w . x + b > 0`.
    pub boundary_w: Vec<f64>,
    pub boundary_b: f64,
}

impl Default for GaussianProcess {
    fn default() -> Self {
        GaussianProcess {
            centers_informative: vec![vec![-3.0, 2.0], vec![-3.0, -2.0]],
            centers_uninformative: vec![vec![3.0, 2.0], vec![3.0, -2.0]],
            stddev: 1.0,
            boundary_w: vec![0.0, 1.0],
            boundary_b: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LecamProcess {
    pub d: usize,
    pub epsilon: f64,
}

impl Default for LecamProcess {
    fn default() -> Self {
        LecamProcess { d: 8, epsilon: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvProcess {
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub alpha: f64,
    /// Resolved from the taus when both are given.
    pub lambda_bar: Option<f64>,
    pub tau_informative: Option<f64>,
    pub tau_uninformative: Option<f64>,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            alpha: 0.5,
            lambda_bar: None,
            tau_informative: None,
            tau_uninformative: None,
        }
    }
}

impl NoiseConfig {
    pub fn resolved_lambda_bar(&self) -> Result<f64> {
        match (self.tau_informative, self.tau_uninformative, self.lambda_bar) {
            (Some(ti), Some(tu), declared) => {
                let lb = lambda_bar_from_taus(ti, tu)?;
                if let Some(d) = declared {
                    if (d - lb).abs() > 1e-9 {
                        return Err(Error::Config(format!(
                            "noise.lambda_bar={d} contradicts the taus, which give {lb}"
                        )));
                    }
                }
                Ok(lb)
            }
            (None, None, declared) => Ok(declared.unwrap_or(0.5)),
            _ => Err(Error::Config(
                "noise.tau_informative and noise.tau_uninformative must be given together".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    /// Plain ERM predictor plus one selector ERM.
    Erm,
    #[default]
    Alternating,
    Isa,
    ConfidenceBaseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClassConfig {
    /// Axis-aligned thresholds on one coordinate.
    Thresholds {
        #[serde(default)]
        feature: usize,
        lo: f64,
        hi: f64,
        steps: usize,
        orientation: Orientations,
    },
    Linear {
        loss: SurrogateLoss,
        #[serde(default)]
        train: TrainConfig,
    },
}

impl Default for ClassConfig {
    fn default() -> Self {
        ClassConfig::Thresholds {
            feature: 0,
            lo: 0.0,
            hi: 1.0,
            steps: 101,
            orientation: Orientations::Both,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MethodConfig {
    pub kind: MethodKind,
    pub beta: f64,
    pub rounds: usize,
    pub predictor_class: ClassConfig,
    pub selector_class: ClassConfig,
    /// Hidden widths of the ISA / baseline networks; empty means linear.
    pub hidden: Vec<usize>,
    pub isa: IsaConfig,
}

impl Default for MethodConfig {
    fn default() -> Self {
        MethodConfig {
            kind: MethodKind::Alternating,
            beta: 3.0,
            rounds: 10,
            predictor_class: ClassConfig::default(),
            selector_class: ClassConfig::default(),
            hidden: Vec::new(),
            isa: IsaConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Training sample size (ignored for csv sources).
    pub n: usize,
    /// Held-out evaluation sample size; 0 evaluates on the training sample.
    pub test_n: usize,
    pub coverage_grid: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Sweep only: sample sizes and noise gaps.
    pub n_grid: Vec<usize>,
    pub lambda_grid: Vec<f64>,
    /// Verify only: number of random discrete specs and their largest size.
    pub verify_specs: usize,
    pub verify_max_atoms: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            n: 2000,
            test_n: 0,
            coverage_grid: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
            seeds: vec![0],
            n_grid: vec![125, 250, 500, 1000, 2000, 4000],
            lambda_grid: Vec::new(),
            verify_specs: 1000,
            verify_max_atoms: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out") }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Relative csv paths are resolved against the config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let ProcessConfig::Csv(c) = &mut cfg.process {
            if c.path.is_relative() {
                if let Some(parent) = path.parent() {
                    c.path = parent.join(&c.path);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Copy with every optional value filled in. The ISA loop always uses
    /// `method.beta`.
    pub fn resolved(&self) -> Result<Self> {
        let mut out = self.clone();
        out.noise.lambda_bar = Some(self.noise.resolved_lambda_bar()?);
        out.method.isa.beta = self.method.beta;
        Ok(out)
    }

    pub fn lambda_bar(&self) -> Result<f64> {
        self.noise.resolved_lambda_bar()
    }

    pub fn validate(&self) -> Result<()> {
        let field = |name: &str, msg: String| Err(Error::Config(format!("{name}: {msg}")));
        let lb = self.noise.resolved_lambda_bar()?;
        if !(lb > 0.0 && lb <= 0.5) {
            return field("noise.lambda_bar", format!("{lb} outside (0, 0.5]"));
        }
        if !(self.noise.alpha > 0.0 && self.noise.alpha < 1.0) {
            return field("noise.alpha", format!("{} outside (0, 1)", self.noise.alpha));
        }
        if self.eval.seeds.is_empty() {
            return field("eval.seeds", "must not be empty".into());
        }
        if self.eval.n == 0 && !matches!(self.process, ProcessConfig::Csv(_)) {
            return field("eval.n", "must be positive".into());
        }
        if self.eval.coverage_grid.is_empty() {
            return field("eval.coverage_grid", "must not be empty".into());
        }
        if self.eval.coverage_grid.iter().any(|c| !(*c > 0.0 && *c <= 1.0)) {
            return field("eval.coverage_grid", "values must lie in (0, 1]".into());
        }
        if self.eval.coverage_grid.windows(2).any(|w| w[0] >= w[1]) {
            return field("eval.coverage_grid", "must be strictly increasing".into());
        }
        if self.eval.lambda_grid.iter().any(|l| !(*l > 0.0 && *l <= 0.5)) {
            return field("eval.lambda_grid", "values must lie in (0, 0.5]".into());
        }
        if self.eval.verify_max_atoms < 2 {
            return field("eval.verify_max_atoms", "must be at least 2".into());
        }
        if !(self.method.beta > 0.0 && self.method.beta.is_finite()) {
            return field("method.beta", format!("{} must be positive", self.method.beta));
        }
        if self.method.rounds == 0 {
            return field("method.rounds", "must be at least 1".into());
        }
        if self.method.hidden.contains(&0) {
            return field("method.hidden", "widths must be positive".into());
        }
        for (name, c) in [
            ("method.predictor_class", &self.method.predictor_class),
            ("method.selector_class", &self.method.selector_class),
        ] {
            match c {
                ClassConfig::Thresholds { lo, hi, steps, .. } => {
                    if !(lo < hi) || *steps == 0 {
                        return field(name, format!("need lo < hi and steps >= 1, got lo={lo} hi={hi} steps={steps}"));
                    }
                }
                ClassConfig::Linear { train, .. } => {
                    train.validate().map_err(|e| Error::Config(format!("{name}.train: {e}")))?;
                }
            }
        }
        if matches!(self.method.kind, MethodKind::Isa | MethodKind::ConfidenceBaseline) {
            self.method
                .isa
                .validate()
                .map_err(|e| Error::Config(format!("method.isa: {e}")))?;
        }
        match &self.process {
            ProcessConfig::Threshold(t) => {
                if t.atoms < 2 {
                    return field("process.atoms", "must be at least 2".into());
                }
            }
            ProcessConfig::Discrete(d) => {
                if d.atoms < 2 {
                    return field("process.atoms", "must be at least 2".into());
                }
            }
            ProcessConfig::GaussianMixture(g) => {
                if g.stddev <= 0.0 {
                    return field("process.stddev", "must be positive".into());
                }
            }
            ProcessConfig::Lecam(l) => {
                if l.d < 2 {
                    return field("process.d", "must be at least 2".into());
                }
                if l.epsilon > lb {
                    return field("process.epsilon", format!("{} exceeds lambda_bar={lb}", l.epsilon));
                }
            }
            ProcessConfig::Csv(_) => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [process]
        kind = "threshold"
    "#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.method.kind, MethodKind::Alternating);
        assert_eq!(cfg.method.beta, 3.0);
        assert_eq!(cfg.lambda_bar().unwrap(), 0.5);
        assert_eq!(cfg.eval.seeds, vec![0]);
    }

    #[test]
    fn resolved_config_round_trips() {
        let text = r#"
            name = "mix"
            [process]
            kind = "gaussian_mixture"
            stddev = 0.5
            [noise]
            alpha = 0.4
            tau_informative = 0.3
            tau_uninformative = 0.6
            [method]
            kind = "isa"
            hidden = [8]
            [method.isa]
            total_epochs = 20
            [eval]
            seeds = [1, 2]
            coverage_grid = [0.1, 0.5]
        "#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap().resolved().unwrap();
        assert!((cfg.noise.lambda_bar.unwrap() - 1.0 / 3.0).abs() < 1e-12);
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn field_level_errors() {
        let bad = "[process]\nkind = \"threshold\"\n[eval]\nseeds = []\n";
        match ExperimentConfig::from_toml_str(bad) {
            Err(Error::Config(msg)) => assert!(msg.contains("eval.seeds"), "{msg}"),
            other => panic!("{other:?}"),
        }
        let unknown = "[process]\nkind = \"threshold\"\nbogus = 1\n";
        assert!(ExperimentConfig::from_toml_str(unknown).is_err());
        let half = "[process]\nkind = \"threshold\"\n[noise]\ntau_informative = 0.3\n";
        assert!(ExperimentConfig::from_toml_str(half).is_err());
        let clash = "[process]\nkind = \"threshold\"\n[noise]\nlambda_bar = 0.2\ntau_informative = 0.3\ntau_uninformative = 0.6\n";
        assert!(ExperimentConfig::from_toml_str(clash).is_err());
    }
}
