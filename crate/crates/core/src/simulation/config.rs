//! The experiment file format.
//!
//! A config is TOML; see the crate README for a full example. Parsing only
//! checks syntax and field types. [`super::Experiment::new`] does the semantic
//! validation (parameter ranges, bound/scenario compatibility).

use std::fmt;
use std::str::FromStr;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::forward::{BercuForm, ForwardKind};
use crate::schedule::LambdaSchedule;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub reps: u64,
    pub horizon: u64,
    pub delta: f64,
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub posterior: PosteriorRule,
    /// Prior weights over `Θ`; uniform when omitted.
    #[serde(default)]
    pub prior: Option<Vec<f64>>,
    pub bounds: Vec<BoundConfig>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| {
                text.as_bytes()[..s.start.min(text.len())]
                    .iter()
                    .filter(|&&b| b == b'\n')
                    .count()
                    + 1
            });
            let msg = e.message().replace('\n', " ");
            match line {
                Some(l) => Error::Config(format!("line {l}: {msg}")),
                None => Error::Config(msg),
            }
        })
    }
}

/// Loss-stream generators. Every parameter vector has one entry per `θ`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScenarioConfig {
    /// `f(Z, θ) ~ Bernoulli(p_θ)`, i.i.d. over time.
    Bernoulli { p: Vec<f64> },
    /// `f(Z, θ) ~ Uniform[0, range_θ]`.
    Uniform { range: Vec<f64> },
    /// `N(mean_θ, sd_θ²)` conditioned on being nonnegative; needs `mean_θ ≥ 0`.
    Gaussian { mean: Vec<f64>, sd: Vec<f64> },
    /// `scale_θ · U^{−1/shape_θ}`; `shape_θ > 2` keeps the variance finite.
    /// `p` is the central moment order handed to the p-th moment bound.
    Pareto {
        shape: Vec<f64>,
        scale: Vec<f64>,
        #[serde(default = "default_pareto_p")]
        p: f64,
    },
    /// Draws without replacement from a binary urn of `size` items, `ones_θ`
    /// of them equal to one. Exchangeable but not independent.
    WithoutReplacement { size: u64, ones: Vec<u64> },
    /// Mean-zero two-point increments on `{a·low_θ, a·high_θ}`, where the
    /// amplitude `a ∈ {1, 1/2}` depends on the sign of the previous increment.
    Mds { low: Vec<f64>, high: Vec<f64> },
}

fn default_pareto_p() -> f64 {
    1.5
}

impl ScenarioConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioConfig::Bernoulli { .. } => "bernoulli",
            ScenarioConfig::Uniform { .. } => "uniform",
            ScenarioConfig::Gaussian { .. } => "gaussian",
            ScenarioConfig::Pareto { .. } => "pareto",
            ScenarioConfig::WithoutReplacement { .. } => "without-replacement",
            ScenarioConfig::Mds { .. } => "mds",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PosteriorRule {
    /// `ρ_t ∝ ν·exp(−λ·cumulative loss)`, recomputed every step.
    Gibbs { lambda: f64 },
    /// A data-free posterior; defaults to the prior.
    Fixed {
        #[serde(default)]
        weights: Option<Vec<f64>>,
    },
}

impl Default for PosteriorRule {
    fn default() -> Self {
        PosteriorRule::Gibbs { lambda: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScheduleConfig {
    Constant { lambda: f64 },
    Target { lambda: f64, n: u64 },
    SqrtLog { c: f64 },
    Explicit { values: Vec<f64> },
}

impl ScheduleConfig {
    pub fn build(&self) -> Result<LambdaSchedule> {
        match self {
            ScheduleConfig::Constant { lambda } => LambdaSchedule::constant(*lambda),
            ScheduleConfig::Target { lambda, n } => LambdaSchedule::target(*lambda, *n),
            ScheduleConfig::SqrtLog { c } => LambdaSchedule::sqrt_log(*c),
            ScheduleConfig::Explicit { values } => LambdaSchedule::explicit(values.clone()),
        }
    }
}

/// Every bound the harness can track.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(try_from = "String")]
pub enum BoundKind {
    Forward(ForwardKind),
    Seeger,
    McAllester,
    Thiemann,
    ConvexPhi,
    Renyi,
    Ipm,
    SubGaussianCs,
    StitchedCs,
}

impl BoundKind {
    pub fn name(self) -> &'static str {
        match self {
            BoundKind::Forward(k) => k.name(),
            BoundKind::Seeger => "seeger",
            BoundKind::McAllester => "mcallester",
            BoundKind::Thiemann => "thiemann",
            BoundKind::ConvexPhi => "convex-phi",
            BoundKind::Renyi => "renyi",
            BoundKind::Ipm => "ipm",
            BoundKind::SubGaussianCs => "subgaussian-cs",
            BoundKind::StitchedCs => "stitched-cs",
        }
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BoundKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Ok(k) = s.parse::<ForwardKind>() {
            return Ok(BoundKind::Forward(k));
        }
        [
            BoundKind::Seeger,
            BoundKind::McAllester,
            BoundKind::Thiemann,
            BoundKind::ConvexPhi,
            BoundKind::Renyi,
            BoundKind::Ipm,
            BoundKind::SubGaussianCs,
            BoundKind::StitchedCs,
        ]
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| Error::Config(format!("unknown bound kind `{s}`")))
    }
}

impl TryFrom<String> for BoundKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundConfig {
    pub kind: BoundKind,
    /// Column label in the outputs; defaults to the kind, suffixed `@n` for target-time forms.
    #[serde(default)]
    pub label: Option<String>,
    /// Target time `n` for the reverse bounds; the bound is then checked only for `t ≥ n`.
    #[serde(default)]
    pub target: Option<u64>,
    /// `λ` schedule for the forward bounds and the subGaussian CS.
    #[serde(default)]
    pub schedule: Option<ScheduleConfig>,
    /// `kl`, `quadratic` or `catoni:<c>` for the convex-φ, Rényi and IPM bounds.
    #[serde(default)]
    pub phi: Option<String>,
    /// Rényi order.
    #[serde(default)]
    pub alpha: Option<f64>,
    /// Fixed Thiemann `λ`; the grid minimum is used when omitted.
    #[serde(default)]
    pub lambda: Option<f64>,
    /// Moment order for the p-th moment bound.
    #[serde(default)]
    pub p: Option<f64>,
    /// `tight` or `simplified`.
    #[serde(default, deserialize_with = "de_bercu")]
    pub bercu: Option<BercuForm>,
}

impl BoundConfig {
    pub fn new(kind: BoundKind) -> Self {
        Self {
            kind,
            label: None,
            target: None,
            schedule: None,
            phi: None,
            alpha: None,
            lambda: None,
            p: None,
            bercu: None,
        }
    }

    pub fn label(&self) -> String {
        match (&self.label, self.target) {
            (Some(l), _) => l.clone(),
            (None, Some(n)) => format!("{}@{n}", self.kind),
            (None, None) => self.kind.to_string(),
        }
    }
}

fn de_bercu<'de, D: serde::Deserializer<'de>>(
    d: D,
) -> std::result::Result<Option<BercuForm>, D::Error> {
    let s = Option::<String>::deserialize(d)?;
    match s.as_deref() {
        None => Ok(None),
        Some("tight") => Ok(Some(BercuForm::Tight)),
        Some("simplified") => Ok(Some(BercuForm::Simplified)),
        Some(other) => Err(serde::de::Error::custom(format!(
            "unknown bercu form `{other}`, expected `tight` or `simplified`"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
seed = 7
reps = 10
horizon = 50
delta = 0.05

[scenario]
kind = "bernoulli"
p = [0.2, 0.6]

[posterior]
rule = "gibbs"
lambda = 0.5

[[bounds]]
kind = "seeger"
target = 16

[[bounds]]
kind = "subgaussian"
schedule = { kind = "constant", lambda = 0.1 }

[[bounds]]
kind = "bercu-touati"
bercu = "simplified"
"#;

    #[test]
    fn parses_example() {
        let c = ExperimentConfig::from_toml(EXAMPLE).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.scenario, ScenarioConfig::Bernoulli { p: vec![0.2, 0.6] });
        assert_eq!(c.posterior, PosteriorRule::Gibbs { lambda: 0.5 });
        assert_eq!(c.bounds.len(), 3);
        assert_eq!(c.bounds[0].label(), "seeger@16");
        assert_eq!(
            c.bounds[1].kind,
            BoundKind::Forward(ForwardKind::SubGaussian)
        );
        assert_eq!(
            c.bounds[1].schedule,
            Some(ScheduleConfig::Constant { lambda: 0.1 })
        );
        assert_eq!(c.bounds[2].bercu, Some(BercuForm::Simplified));
        assert_eq!(c.prior, None);
    }

    #[test]
    fn rejects_unknown_fields_and_kinds() {
        let bad = EXAMPLE.replace("lambda = 0.5", "lambda = 0.5\ncolour = 1");
        assert!(matches!(
            ExperimentConfig::from_toml(&bad),
            Err(Error::Config(_))
        ));
        let bad = EXAMPLE.replace("\"seeger\"", "\"segeer\"");
        let err = ExperimentConfig::from_toml(&bad).unwrap_err().to_string();
        assert!(err.contains("segeer"), "{err}");
        assert!(!err.contains('\n'));
        let bad = EXAMPLE.replace("kind = \"bernoulli\"", "kind = \"poisson\"");
        assert!(ExperimentConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn error_reports_line() {
        let err = ExperimentConfig::from_toml("seed = 1\nreps = \"x\"\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn bound_kind_names_roundtrip() {
        for k in ForwardKind::ALL {
            let b = BoundKind::Forward(k);
            assert_eq!(b.name().parse::<BoundKind>().unwrap(), b);
        }
        for name in [
            "seeger",
            "mcallester",
            "thiemann",
            "convex-phi",
            "renyi",
            "ipm",
            "subgaussian-cs",
            "stitched-cs",
        ] {
            assert_eq!(name.parse::<BoundKind>().unwrap().name(), name);
        }
    }
}
