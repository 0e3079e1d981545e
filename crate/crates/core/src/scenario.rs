//! The scenario file: a versioned TOML document naming a model, a base seed,
//! an output directory and a list of experiments.
//!
//! ```toml
//! schema = 1
//! seed = 20240611
//! output = "out/frechet-exact"
//!
//! [model]
//! alpha = 1.0
//! weights = { kind = "power", beta = 1.0 }
//! perturbation = { kind = "uniform_decay", params = { amplitude = 0.5, rate = 1.0 } }
//! bounds = { m_lo = 0.0, M_hi = 0.5 }
//!
//! [[experiment]]
//! kind = "argmax"
//! n = [50, 200, 2000]
//! replicates = 100000
//! ```
//!
//! Unknown fields anywhere are errors.

use std::collections::HashSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lab::{CountBox, ExperimentConfig, ExperimentKind, JointLevel};
use crate::measures::{LimitMeasure, WeightScheme};
use crate::point_process::TestFunction;
use crate::tail_models::{DeltaBounds, Perturbation, TailModel};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    pub model: ModelSpec,
    #[serde(rename = "experiment", default)]
    pub experiments: Vec<ExperimentSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub alpha: f64,
    pub weights: WeightScheme,
    #[serde(default)]
    pub perturbation: PerturbationSpec,
    #[serde(default)]
    pub bounds: BoundsSpec,
    /// Exponent of the limit location measure `t^{β+1}`; required for
    /// explicit weight tables, defaults to the scheme's own limit otherwise.
    #[serde(default)]
    pub limit_beta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum PerturbationSpec {
    #[default]
    Zero,
    UniformDecay {
        amplitude: f64,
        rate: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSpec {
    pub m_lo: f64,
    #[serde(rename = "M_hi")]
    pub m_hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindName {
    Argmax,
    Max,
    Ladder,
    PoissonCounts,
    Laplace,
}

impl KindName {
    fn as_str(self) -> &'static str {
        match self {
            KindName::Argmax => "argmax",
            KindName::Max => "max",
            KindName::Ladder => "ladder",
            KindName::PoissonCounts => "poisson_counts",
            KindName::Laplace => "laplace",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: KindName,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub n: Vec<usize>,
    pub replicates: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Replaces the scenario model for this experiment.
    #[serde(default)]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub limit_ks: Option<f64>,
    #[serde(default)]
    pub oracle_alpha: Option<f64>,
    #[serde(default)]
    pub grid: Option<Vec<f64>>,
    #[serde(default)]
    pub joint: Option<Vec<JointLevel>>,
    #[serde(default)]
    pub boxes: Option<Vec<CountBox>>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub functions: Option<Vec<TestFunction>>,
}

/// Command-line values that replace scenario fields of the same name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    /// Replaces `n` of every experiment that uses rows.
    pub n: Vec<usize>,
    pub replicates: Option<usize>,
    /// Replaces `alpha` of the scenario model and of per-experiment models.
    pub alpha: Option<f64>,
    pub output: Option<PathBuf>,
}

impl ModelSpec {
    pub fn build(&self) -> Result<(TailModel, LimitMeasure)> {
        let perturbation = match self.perturbation {
            PerturbationSpec::Zero => Perturbation::Zero,
            PerturbationSpec::UniformDecay { amplitude, rate } => Perturbation::UniformDecay { amplitude, rate },
        };
        let bounds = DeltaBounds { m_lo: self.bounds.m_lo, m_hi: self.bounds.m_hi };
        let model = TailModel::new(self.alpha, self.weights.clone(), perturbation, bounds)?;
        let limit = match self.limit_beta {
            Some(beta) => LimitMeasure::power(beta)?,
            None => self.weights.limit_measure().ok_or_else(|| {
                Error::config("explicit weights need `limit_beta` to name the limit location measure")
            })?,
        };
        Ok((model, limit))
    }
}

impl Scenario {
    /// Parses and checks the schema version. TOML syntax and type errors
    /// carry the line and column of the offending field.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        if scenario.schema != SCHEMA_VERSION {
            return Err(Error::config(format!(
                "schema: unsupported version {}, expected {SCHEMA_VERSION}",
                scenario.schema
            )));
        }
        Ok(scenario)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(seed) = overrides.seed {
            self.seed = Some(seed);
        }
        if let Some(output) = &overrides.output {
            self.output = Some(output.clone());
        }
        if let Some(alpha) = overrides.alpha {
            self.model.alpha = alpha;
        }
        for e in &mut self.experiments {
            if !overrides.n.is_empty() && e.kind != KindName::PoissonCounts {
                e.n = overrides.n.clone();
            }
            if let Some(r) = overrides.replicates {
                e.replicates = r;
            }
            if let (Some(alpha), Some(model)) = (overrides.alpha, e.model.as_mut()) {
                model.alpha = alpha;
            }
        }
    }

    /// Builds and validates every experiment. Errors name the offending
    /// field, e.g. `experiment[2].grid`.
    pub fn experiment_configs(&self) -> Result<Vec<ExperimentConfig>> {
        let seed = self.seed.ok_or_else(|| {
            Error::config("seed: missing; set `seed` in the scenario or pass --seed (or --allow-entropy)")
        })?;
        if self.experiments.is_empty() {
            return Err(Error::config("experiment: the scenario lists no experiments"));
        }
        let base = self.model.build().map_err(|e| Error::config(format!("model: {}", strip(e))))?;
        let mut names = HashSet::new();
        self.experiments
            .iter()
            .enumerate()
            .map(|(k, spec)| {
                let at = |field: &str, e: Error| Error::config(format!("experiment[{}].{field}: {}", k + 1, strip(e)));
                let name = spec.name.clone().unwrap_or_else(|| format!("{}-{}", spec.kind.as_str(), k + 1));
                if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
                    return Err(at("name", Error::config(format!("{name:?} must be non-empty [A-Za-z0-9_-]"))));
                }
                if !names.insert(name.clone()) {
                    return Err(at("name", Error::config(format!("duplicate experiment name {name:?}"))));
                }
                let (model, limit) = match &spec.model {
                    Some(m) => m.build().map_err(|e| at("model", e))?,
                    None => base.clone(),
                };
                let kind = spec.kind(k)?;
                let mut config = ExperimentConfig::with_measure(name, model, limit, kind);
                config.n_values = spec.n.clone();
                config.replicates = spec.replicates;
                config.seed = spec.seed.unwrap_or(seed);
                if let Some(limit_ks) = spec.limit_ks {
                    config.limit_ks = limit_ks;
                }
                config.validate().map_err(|e| at(spec.kind.as_str(), e))?;
                Ok(config)
            })
            .collect()
    }
}

fn strip(e: Error) -> String {
    match e {
        Error::Config(msg) | Error::Domain(msg) | Error::UnsupportedTestFunction(msg) => msg,
        other => other.to_string(),
    }
}

impl ExperimentSpec {
    fn kind(&self, k: usize) -> Result<ExperimentKind> {
        let kind = self.kind.as_str();
        let stray = |field: &str, present: bool| -> Result<()> {
            if present {
                Err(Error::config(format!("experiment[{}].{field}: not a field of kind `{kind}`", k + 1)))
            } else {
                Ok(())
            }
        };
        stray("oracle_alpha", self.oracle_alpha.is_some() && self.kind != KindName::Max)?;
        stray("grid", self.grid.is_some() && self.kind != KindName::Ladder)?;
        stray("joint", self.joint.is_some() && self.kind != KindName::Ladder)?;
        stray("boxes", self.boxes.is_some() && self.kind != KindName::PoissonCounts)?;
        stray("epsilon", self.epsilon.is_some() && self.kind != KindName::PoissonCounts)?;
        stray("functions", self.functions.is_some() && self.kind != KindName::Laplace)?;
        stray("n", !self.n.is_empty() && self.kind == KindName::PoissonCounts)?;
        Ok(match self.kind {
            KindName::Argmax => ExperimentKind::Argmax,
            KindName::Max => ExperimentKind::Max { oracle_alpha: self.oracle_alpha },
            KindName::Ladder => ExperimentKind::Ladder {
                grid: self.grid.clone().unwrap_or_default(),
                joint: self.joint.clone().unwrap_or_default(),
            },
            KindName::PoissonCounts => {
                ExperimentKind::PoissonCounts { boxes: self.boxes.clone().unwrap_or_default(), epsilon: self.epsilon }
            }
            KindName::Laplace => ExperimentKind::Laplace { functions: self.functions.clone().unwrap_or_default() },
        })
    }
}
