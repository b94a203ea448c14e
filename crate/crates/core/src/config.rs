//! JSON model configs.
//!
//! ```json
//! {
//!   "label": "gamma-mixing",
//!   "generator": {"family": "mixing", "law": {"kind": "gamma", "params": {"a": 2}}, "ratio": 0.1},
//!   "core": {"lambda": 0.1, "alpha": 1, "gamma1": 0.1, "gamma2": 0.1, "alpha1": 0.3, "alpha2": 0.2},
//!   "validation_slack": 1e-9
//! }
//! ```
//!
//! Unknown fields and unknown parameter names are rejected.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distorted::Model;
use crate::error::{Error, Result};
use crate::generators::{Family, Generator, MixingLaw};
use crate::lmp::{CoreParams, DEFAULT_SLACK};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawConfig {
    pub kind: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub family: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
    /// Polynomial coefficients `c_0, c_1, …`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub law: Option<LawConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoreConfig {
    pub lambda: f64,
    pub alpha: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub alpha1: f64,
    pub alpha2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub label: String,
    pub generator: GeneratorConfig,
    pub core: CoreConfig,
    #[serde(default = "default_slack")]
    pub validation_slack: f64,
}

fn default_slack() -> f64 {
    DEFAULT_SLACK
}

fn bad(msg: String) -> Error {
    Error::Config(msg)
}

/// Takes exactly the parameters `names` out of `params`.
fn take<const N: usize>(what: &str, params: &BTreeMap<String, f64>, names: [&str; N]) -> Result<[f64; N]> {
    if let Some(extra) = params.keys().find(|k| !names.contains(&k.as_str())) {
        return Err(bad(format!(
            "{what}: unknown parameter `{extra}` (expected {names:?})"
        )));
    }
    let mut out = [0.0; N];
    for (slot, name) in out.iter_mut().zip(names) {
        *slot = *params
            .get(name)
            .ok_or_else(|| bad(format!("{what}: missing parameter `{name}`")))?;
    }
    Ok(out)
}

impl LawConfig {
    pub fn to_law(&self) -> Result<MixingLaw> {
        let p = &self.params;
        let law = match self.kind.as_str() {
            "gamma" => MixingLaw::Gamma { a: take("gamma", p, ["a"])?[0] },
            "positive_stable" => MixingLaw::PositiveStable { a: take("positive_stable", p, ["a"])?[0] },
            "sibuya" => MixingLaw::Sibuya { a: take("sibuya", p, ["a"])?[0] },
            "log_series" => MixingLaw::LogSeries { theta: take("log_series", p, ["theta"])?[0] },
            other => return Err(bad(format!("unknown mixing law `{other}`"))),
        };
        law.validate()?;
        Ok(law)
    }

    pub fn from_law(law: &MixingLaw) -> Self {
        let (name, value) = match *law {
            MixingLaw::Gamma { a } | MixingLaw::PositiveStable { a } | MixingLaw::Sibuya { a } => ("a", a),
            MixingLaw::LogSeries { theta } => ("theta", theta),
        };
        LawConfig {
            kind: law.name().to_string(),
            params: BTreeMap::from([(name.to_string(), value)]),
        }
    }
}

impl GeneratorConfig {
    fn simple(family: &str, params: &[(&str, f64)]) -> Self {
        GeneratorConfig {
            family: family.to_string(),
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            coeffs: None,
            law: None,
            ratio: None,
        }
    }

    /// `ratio` defaults to `γ₁/α` of the core when a mixing generator omits it.
    pub fn to_generator(&self, core: &CoreParams) -> Result<Generator> {
        let f = self.family.as_str();
        let p = &self.params;
        if f != "mixing" && (self.law.is_some() || self.ratio.is_some()) {
            return Err(bad(format!("`law`/`ratio` only apply to the mixing family, not `{f}`")));
        }
        if f != "polynomial" && self.coeffs.is_some() {
            return Err(bad(format!("`coeffs` only applies to the polynomial family, not `{f}`")));
        }
        let family = match f {
            "identity" => {
                take(f, p, [])?;
                Family::Identity
            }
            "power" => Family::Power { beta: take(f, p, ["beta"])?[0] },
            "weibull" => {
                let [a, alpha] = take(f, p, ["a", "alpha"])?;
                Family::Weibull { a, alpha }
            }
            "gompertz" => {
                let [xi, mu] = take(f, p, ["xi", "mu"])?;
                Family::Gompertz { xi, mu }
            }
            "mo15" => Family::Mo15 { xi: take(f, p, ["xi"])?[0] },
            "pareto" => {
                let [a, mu] = take(f, p, ["a", "mu"])?;
                Family::Pareto { a, mu }
            }
            "logistic" => {
                let [a, theta] = take(f, p, ["a", "theta"])?;
                Family::Logistic { a, theta }
            }
            "log_series" => {
                let [a, theta] = take(f, p, ["a", "theta"])?;
                Family::LogSeries { a, theta }
            }
            "arctan" => Family::Arctan { a: take(f, p, ["a"])?[0] },
            "sine" => Family::Sine { theta: take(f, p, ["theta"])?[0] },
            "polynomial" => {
                take(f, p, [])?;
                let coeffs = self
                    .coeffs
                    .clone()
                    .ok_or_else(|| bad("polynomial: missing `coeffs`".into()))?;
                Family::Polynomial { coeffs }
            }
            "mixing" => {
                take(f, p, [])?;
                let law = self
                    .law
                    .as_ref()
                    .ok_or_else(|| bad("mixing: missing `law`".into()))?
                    .to_law()?;
                let ratio = self.ratio.unwrap_or(core.gamma1 / core.alpha);
                Family::Mixing { law, ratio }
            }
            other => return Err(bad(format!("unknown generator family `{other}`"))),
        };
        Generator::new(family)
    }

    pub fn from_generator(g: &Generator) -> Result<Self> {
        Ok(match g.family() {
            Family::Identity => Self::simple("identity", &[]),
            Family::Power { beta } => Self::simple("power", &[("beta", *beta)]),
            Family::Weibull { a, alpha } => Self::simple("weibull", &[("a", *a), ("alpha", *alpha)]),
            Family::Gompertz { xi, mu } => Self::simple("gompertz", &[("xi", *xi), ("mu", *mu)]),
            Family::Mo15 { xi } => Self::simple("mo15", &[("xi", *xi)]),
            Family::Pareto { a, mu } => Self::simple("pareto", &[("a", *a), ("mu", *mu)]),
            Family::Logistic { a, theta } => Self::simple("logistic", &[("a", *a), ("theta", *theta)]),
            Family::LogSeries { a, theta } => Self::simple("log_series", &[("a", *a), ("theta", *theta)]),
            Family::Arctan { a } => Self::simple("arctan", &[("a", *a)]),
            Family::Sine { theta } => Self::simple("sine", &[("theta", *theta)]),
            Family::Polynomial { coeffs } => GeneratorConfig {
                coeffs: Some(coeffs.clone()),
                ..Self::simple("polynomial", &[])
            },
            Family::Mixing { law, ratio } => GeneratorConfig {
                law: Some(LawConfig::from_law(law)),
                ratio: Some(*ratio),
                ..Self::simple("mixing", &[])
            },
            Family::FromSurvival(_) => {
                return Err(Error::Capability(
                    "generators built from a survival function have no config form".into(),
                ))
            }
        })
    }
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| bad(format!("config: {e}")))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn core_params(&self) -> CoreParams {
        let c = self.core;
        CoreParams::new(c.lambda, c.alpha, c.gamma1, c.gamma2, c.alpha1, c.alpha2)
            .with_slack(self.validation_slack)
    }

    pub fn to_model(&self) -> Result<Model> {
        let core = self.core_params();
        let g = self.generator.to_generator(&core)?;
        Model::new(g, core, self.label.clone())
    }

    pub fn from_model(m: &Model) -> Result<Self> {
        let c = m.core();
        Ok(ModelConfig {
            label: m.label().to_string(),
            generator: GeneratorConfig::from_generator(m.generator())?,
            core: CoreConfig {
                lambda: c.lambda,
                alpha: c.alpha,
                gamma1: c.gamma1,
                gamma2: c.gamma2,
                alpha1: c.alpha1,
                alpha2: c.alpha2,
            },
            validation_slack: c.slack,
        })
    }
}
