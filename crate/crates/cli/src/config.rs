//! Run configuration: one TOML file, with `--set key=value` overrides
//! applied to the parsed table before deserialization.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use newsamp_core::baselines::LineStep;
use newsamp_core::{BaselineMethod, ConvexSet, ObjectiveKind, SampleScheme, SpikedModelSpec, StepMode};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds every sampling scheme and the stochastic baselines. The data
    /// generator uses `problem.spiked.seed`.
    #[serde(default)]
    pub seed: u64,
    /// Stop once ‖θ^{t+1} − θ^t‖₂ ≤ eps.
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Distance to θ* counted as converged in benchmark tables.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Worker threads for `benchmark`; 0 picks the available parallelism.
    #[serde(default)]
    pub threads: usize,
    #[serde(default)]
    pub problem: ProblemSpec,
    pub method: Option<MethodSpec>,
    #[serde(default)]
    pub methods: Vec<MethodSpec>,
    #[serde(default)]
    pub set: ConvexSet,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_eps() -> f64 {
    1e-10
}

fn default_max_iters() -> usize {
    100
}

fn default_tolerance() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Csv,
    Libsvm,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    #[serde(default = "default_kind")]
    pub kind: ObjectiveKind,
    /// Dataset file. When absent, `spiked` is generated in memory.
    pub dataset: Option<PathBuf>,
    /// Inferred from the extension when absent (`.svm`, `.libsvm` → libsvm).
    pub format: Option<DataFormat>,
    /// CSV label column; defaults to the last one.
    pub label_column: Option<usize>,
    /// Feature count for LIBSVM files.
    pub features: Option<usize>,
    #[serde(default)]
    pub standardize: bool,
    /// C of the SVM objectives.
    #[serde(default = "default_penalty")]
    pub svm_penalty: f64,
    /// θ* as a JSON array or an object with a `theta` array.
    pub reference: Option<PathBuf>,
    pub spiked: Option<SpikedModelSpec>,
}

fn default_kind() -> ObjectiveKind {
    ObjectiveKind::Logistic
}

fn default_penalty() -> f64 {
    1.0
}

impl Default for ProblemSpec {
    fn default() -> Self {
        Self {
            kind: default_kind(),
            dataset: None,
            format: None,
            label_column: None,
            features: None,
            standardize: false,
            svm_penalty: default_penalty(),
            reference: None,
            spiked: None,
        }
    }
}

/// One optimizer with its parameters. `name` is one of `newsamp`,
/// `plain-subsampled`, or a baseline (`gd`, `agd`, `newton`, `bfgs`,
/// `lbfgs`, `sgd`, `adagrad`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    pub name: String,
    /// Row name in benchmark tables and trace file stem; defaults to `name`.
    pub label: Option<String>,
    /// Rank threshold r (newsamp).
    pub rank: Option<usize>,
    /// Sampling scheme (newsamp, plain-subsampled). Its seed is replaced by
    /// the run seed.
    pub sample: Option<SampleScheme>,
    /// Constant step. NewSamp uses the adaptive rule when absent.
    pub eta: Option<f64>,
    /// c in γ = c·√(log p/|S|) of the adaptive step.
    pub c_step: Option<f64>,
    /// Constant steps to sweep; the fastest-converging one is kept.
    pub step_grid: Option<Vec<f64>>,
    pub memory: Option<usize>,
    pub line: Option<LineStep>,
    pub gamma: Option<f64>,
    pub c: Option<f64>,
    pub delta: Option<f64>,
}

/// A fully resolved optimizer.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    NewSamp { rank: usize, scheme: SampleScheme, step: StepMode },
    PlainSubsampled { scheme: SampleScheme, eta: Option<f64> },
    Baseline { method: BaselineMethod, eta: f64 },
}

impl MethodSpec {
    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(&self.name)
    }

    fn scheme(&self, seed: u64) -> Result<SampleScheme> {
        let s = self
            .sample
            .as_ref()
            .with_context(|| format!("method '{}' needs a `sample` table", self.name))?;
        Ok(s.with_seed(seed))
    }

    fn step(&self) -> Result<StepMode> {
        match (self.eta, self.c_step) {
            (Some(_), Some(_)) => bail!("method '{}': give either eta or c_step, not both", self.name),
            (Some(eta), None) => Ok(StepMode::Fixed { eta }),
            (None, Some(c_step)) => Ok(StepMode::Adaptive { c_step }),
            (None, None) => Ok(StepMode::default()),
        }
    }

    /// Resolves the spec with `eta` in place of the configured step.
    pub fn resolve_with(&self, seed: u64, eta: Option<f64>) -> Result<Method> {
        let mut spec = self.clone();
        if eta.is_some() {
            spec.eta = eta;
            spec.c_step = None;
        }
        spec.resolve(seed)
    }

    pub fn resolve(&self, seed: u64) -> Result<Method> {
        let need = |v: Option<f64>, field: &str| {
            v.with_context(|| format!("method '{}' needs `{field}`", self.name))
        };
        let baseline = |method| Method::Baseline {
            method,
            eta: self.eta.unwrap_or(1.0),
        };
        Ok(match self.name.as_str() {
            "newsamp" => Method::NewSamp {
                rank: self
                    .rank
                    .with_context(|| "method 'newsamp' needs `rank`".to_string())?,
                scheme: self.scheme(seed)?,
                step: self.step()?,
            },
            "plain-subsampled" => Method::PlainSubsampled {
                scheme: self.scheme(seed)?,
                eta: self.eta,
            },
            "gd" => baseline(BaselineMethod::Gd),
            "agd" => baseline(BaselineMethod::Agd),
            "newton" => baseline(BaselineMethod::Newton),
            "bfgs" => baseline(BaselineMethod::Bfgs {
                line: self.line.unwrap_or_default(),
            }),
            "lbfgs" => baseline(BaselineMethod::Lbfgs {
                memory: self.memory.unwrap_or(10),
            }),
            "sgd" => baseline(BaselineMethod::Sgd {
                gamma: need(self.gamma, "gamma")?,
                c: need(self.c, "c")?,
            }),
            "adagrad" => baseline(BaselineMethod::AdaGrad {
                gamma: need(self.gamma, "gamma")?,
                delta: self.delta.unwrap_or(1e-8),
            }),
            other => bail!("unknown method '{other}'"),
        })
    }

    /// Whether a step grid applies: batch baselines with a constant step.
    pub fn grid_applies(&self, method: &Method) -> bool {
        matches!(method, Method::Baseline { method, .. } if method.uses_step())
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Directory for files without an explicit path; defaults to `.`.
    pub dir: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub table: Option<PathBuf>,
    pub report: Option<PathBuf>,
    /// Where reference solutions are cached; defaults to `<dir>/cache`.
    pub cache_dir: Option<PathBuf>,
}

impl OutputSpec {
    pub fn dir(&self) -> PathBuf {
        self.dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn or_default(&self, path: &Option<PathBuf>, file: &str) -> PathBuf {
        path.clone().unwrap_or_else(|| self.dir().join(file))
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache_dir.clone().unwrap_or_else(|| self.dir().join("cache"))
    }
}

/// Reads `path` (if any), applies the overrides and deserializes.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            text.parse::<toml::Table>()
                .with_context(|| format!("parsing config {}", p.display()))?
        }
        None => toml::Table::new(),
    };
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    toml::Value::Table(table)
        .try_into()
        .context("invalid configuration")
}

/// `a.b.c=value`: the value is read as a TOML literal, falling back to a
/// bare string.
pub fn apply_override(table: &mut toml::Table, item: &str) -> Result<()> {
    let (key, raw) = item
        .split_once('=')
        .with_context(|| format!("override '{item}' is not of the form key=value"))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|k| k.is_empty()) {
        bail!("override '{item}' has an empty key segment");
    }
    let value = parse_value(raw.trim());
    let (last, parents) = path.split_last().expect("split yields at least one segment");
    let mut cur = table;
    for k in parents {
        let entry = cur
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => bail!("override '{item}': '{k}' is not a table"),
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_nest_and_type() {
        let mut t = toml::Table::new();
        apply_override(&mut t, "problem.kind=ols").unwrap();
        apply_override(&mut t, "max_iters=7").unwrap();
        apply_override(&mut t, "problem.spiked.spike_values=[5.0, 3.0]").unwrap();
        apply_override(&mut t, "problem.spiked.n=10").unwrap();
        apply_override(&mut t, "problem.spiked.p=4").unwrap();
        let cfg: RunConfig = toml::Value::Table(t).try_into().unwrap();
        assert_eq!(cfg.problem.kind, ObjectiveKind::Ols);
        assert_eq!(cfg.max_iters, 7);
        assert_eq!(cfg.problem.spiked.unwrap().spike_values, vec![5.0, 3.0]);
        assert!(apply_override(&mut toml::Table::new(), "novalue").is_err());
    }

    #[test]
    fn method_resolution() {
        let m: MethodSpec = toml::from_str(
            r#"
            name = "newsamp"
            rank = 3
            sample = { kind = "independent", size = 50 }
            "#,
        )
        .unwrap();
        match m.resolve(9).unwrap() {
            Method::NewSamp { rank, scheme, step } => {
                assert_eq!(rank, 3);
                assert_eq!(scheme.seed(), 9);
                assert_eq!(step, StepMode::default());
            }
            other => panic!("{other:?}"),
        }
        let bad: MethodSpec = toml::from_str("name = \"sgd\"").unwrap();
        assert!(bad.resolve(0).is_err());
        let unknown: MethodSpec = toml::from_str("name = \"lasso\"").unwrap();
        assert!(unknown.resolve(0).is_err());
    }
}
