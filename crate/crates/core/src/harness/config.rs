//! Experiment configuration and validation.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Clearing,
    Cascade,
    Theory,
    Debtrank,
    Firesale,
    Structure,
}

/// One swept parameter and its grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub param: String,
    pub values: Vec<f64>,
}

fn default_trials() -> usize {
    100
}

/// A Monte Carlo sweep. Grid points are the cartesian product of the sweep
/// axes, first axis slowest; an empty sweep is a single grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: Model,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    /// Categorical choices such as the network generator or fire-sale mode.
    #[serde(default)]
    pub options: BTreeMap<String, String>,
    #[serde(default)]
    pub sweep: Vec<SweepAxis>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

pub(crate) struct ParamSpec {
    pub name: &'static str,
    pub default: Option<f64>,
}

macro_rules! req {
    ($name:literal) => {
        ParamSpec { name: $name, default: None }
    };
}

macro_rules! opt {
    ($name:literal, $v:expr) => {
        ParamSpec { name: $name, default: Some($v) }
    };
}

pub(crate) struct OptionSpec {
    pub name: &'static str,
    /// The first choice is the default.
    pub choices: &'static [&'static str],
}

impl Model {
    pub(crate) fn params(self) -> &'static [ParamSpec] {
        match self {
            Model::Clearing => &[opt!("n", 20.0), opt!("z", 4.0), opt!("external", 1.0), opt!("alpha", 1.0), opt!("beta", 1.0)],
            Model::Cascade => &[
                req!("n"),
                req!("z"),
                req!("R_bar"),
                req!("rho0"),
                opt!("A_IB", 1.0),
                opt!("external_ratio", 4.0),
            ],
            Model::Theory => &[req!("z"), req!("R"), opt!("rho0", 1e-4)],
            Model::Debtrank => &[
                req!("n"),
                req!("z"),
                req!("leverage"),
                opt!("shock", 0.1),
                opt!("shocked_fraction", 0.1),
                opt!("alpha", 0.0),
            ],
            Model::Firesale => &[
                opt!("n_banks", 100.0),
                opt!("m_assets", 100.0),
                req!("leverage"),
                req!("diversification"),
                opt!("alpha", 1.0),
                opt!("xi", 0.3),
                opt!("gamma", 1.0),
                opt!("buffer", 0.1),
            ],
            Model::Structure => &[opt!("n", 60.0), opt!("core", 15.0), opt!("links", 3.0), opt!("noise", 0.05)],
        }
    }

    pub(crate) fn options(self) -> &'static [OptionSpec] {
        match self {
            Model::Clearing => &[OptionSpec {
                name: "method",
                choices: &["eisenberg_noe", "rogers_veraart", "fictitious_default"],
            }],
            Model::Cascade => &[OptionSpec {
                name: "network",
                choices: &["undirected_er", "directed_er"],
            }],
            Model::Theory => &[OptionSpec {
                name: "distribution",
                choices: &["poisson", "regular"],
            }],
            Model::Debtrank => &[OptionSpec {
                name: "variant",
                choices: &["original", "iterated", "nonlinear"],
            }],
            Model::Firesale => &[
                OptionSpec {
                    name: "mode",
                    choices: &["threshold", "target", "buffered"],
                },
                OptionSpec {
                    name: "impact",
                    choices: &["log_linear", "linear"],
                },
            ],
            Model::Structure => &[],
        }
    }

    /// Column names of a trial row, in output order.
    pub fn metrics(self) -> &'static [&'static str] {
        match self {
            Model::Clearing => &["default_fraction", "iterations", "shortfall", "unique"],
            Model::Cascade => &["default_fraction", "rounds", "seeds", "theory_rho"],
            Model::Theory => &["q_star", "rho", "first_order", "second_order", "watts_margin"],
            Model::Debtrank => &["mean_h", "default_fraction", "steps", "spectral_radius"],
            Model::Firesale => &["default_fraction", "global_cascade", "rounds", "transfer_radius", "transfer_branching"],
            Model::Structure => &["accuracy", "error", "normalized_error", "core_size"],
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Collects every problem rather than stopping at the first.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let specs = self.model.params();
        let known = |name: &str| specs.iter().any(|s| s.name == name);
        if self.trials == 0 {
            problems.push("trials: must be at least 1".to_string());
        }
        for (name, v) in &self.params {
            if !known(name) {
                problems.push(format!("params.{name}: unknown parameter for {:?}", self.model));
            } else if !v.is_finite() {
                problems.push(format!("params.{name}: must be finite"));
            }
        }
        for (i, axis) in self.sweep.iter().enumerate() {
            if !known(&axis.param) {
                problems.push(format!("sweep[{i}].param: unknown parameter `{}`", axis.param));
            }
            if axis.values.is_empty() {
                problems.push(format!("sweep[{i}].values: grid is empty"));
            }
            if axis.values.iter().any(|v| !v.is_finite()) {
                problems.push(format!("sweep[{i}].values: must be finite"));
            }
            if self.sweep[..i].iter().any(|a| a.param == axis.param) {
                problems.push(format!("sweep[{i}].param: `{}` swept twice", axis.param));
            }
            if self.params.contains_key(&axis.param) {
                problems.push(format!("sweep[{i}].param: `{}` also fixed in params", axis.param));
            }
        }
        for spec in specs {
            if spec.default.is_none()
                && !self.params.contains_key(spec.name)
                && !self.sweep.iter().any(|a| a.param == spec.name)
            {
                problems.push(format!("params.{}: required", spec.name));
            }
        }
        let option_specs = self.model.options();
        for (name, value) in &self.options {
            match option_specs.iter().find(|o| o.name == name) {
                None => problems.push(format!("options.{name}: unknown option for {:?}", self.model)),
                Some(o) if !o.choices.contains(&value.as_str()) => {
                    problems.push(format!("options.{name}: `{value}` not one of {:?}", o.choices))
                }
                Some(_) => {}
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }

    pub fn grid_size(&self) -> usize {
        self.sweep.iter().map(|a| a.values.len()).product()
    }

    /// Full parameter set at grid point `index`, defaults filled in.
    pub fn grid_point(&self, index: usize) -> BTreeMap<String, f64> {
        let mut point: BTreeMap<String, f64> = self
            .model
            .params()
            .iter()
            .filter_map(|s| s.default.map(|d| (s.name.to_string(), d)))
            .collect();
        point.extend(self.params.iter().map(|(k, v)| (k.clone(), *v)));
        let mut rest = index;
        for axis in self.sweep.iter().rev() {
            let len = axis.values.len();
            point.insert(axis.param.clone(), axis.values[rest % len]);
            rest /= len;
        }
        point
    }

    pub fn option(&self, name: &str) -> &str {
        self.options.get(name).map(String::as_str).unwrap_or_else(|| {
            self.model
                .options()
                .iter()
                .find(|o| o.name == name)
                .map_or("", |o| o.choices[0])
        })
    }

    /// SHA-256 of the canonical JSON encoding, hex encoded.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }
}
