//! Experiment configuration: what to build, which solvers to run, how long.

use std::path::{Path, PathBuf};

use hetvr::problems::LossKind;
use hetvr::trace::StopRule;
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

/// Problem family and its generator parameters, written as `{"family": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemDescriptor {
    /// Weighted least squares / logistic regression with skewed weights.
    Glm {
        m: usize,
        n: usize,
        ridge: f64,
        loss: LossKind,
    },
    /// `min Σ ½yᵢᵀPᵢyᵢ + aᵢᵀyᵢ  s.t. Σ yᵢ = m·b`, solved through its dual.
    MultiBlock {
        m: usize,
        n: usize,
        #[serde(default = "unit_range")]
        eig_range: (f64, f64),
        mu: f64,
    },
    /// `f(g(x))` with `f(y) = yᵀQy` and quadratic inners.
    Composite {
        m: usize,
        n: usize,
        mu: f64,
        #[serde(default = "default_margin")]
        margin: f64,
        #[serde(default = "default_certify")]
        certify_samples: usize,
    },
    /// Zero-chain worst-case finite sum with per-component constants.
    Adversarial {
        smoothness: Vec<f64>,
        strong_convexity: Vec<f64>,
        #[serde(default)]
        d: Option<usize>,
    },
}

fn unit_range() -> (f64, f64) {
    (0.0, 1.0)
}

fn default_margin() -> f64 {
    1e5
}

fn default_certify() -> usize {
    64
}

impl ProblemDescriptor {
    pub fn family(&self) -> &'static str {
        match self {
            ProblemDescriptor::Glm { .. } => "glm",
            ProblemDescriptor::MultiBlock { .. } => "multi_block",
            ProblemDescriptor::Composite { .. } => "composite",
            ProblemDescriptor::Adversarial { .. } => "adversarial",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    /// Nonuniform negative-momentum method.
    Gssnm,
    /// Same method with uniform sampling and `L_max` everywhere.
    Ssnm,
    Svrg,
    Saga,
    Katyusha,
    Agd,
    /// Accelerated block coordinate descent on the eliminated primal.
    Arcd,
    /// Accelerated snapshot method with the general composite estimator.
    Gkatyusha,
    /// Same with the reduced estimator (needs certified constants).
    GkatyushaReduced,
}

impl SolverKind {
    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::Gssnm => "gssnm",
            SolverKind::Ssnm => "ssnm",
            SolverKind::Svrg => "svrg",
            SolverKind::Saga => "saga",
            SolverKind::Katyusha => "katyusha",
            SolverKind::Agd => "agd",
            SolverKind::Arcd => "arcd",
            SolverKind::Gkatyusha => "gkatyusha",
            SolverKind::GkatyushaReduced => "gkatyusha_reduced",
        }
    }

    fn supports(&self, family: &str) -> bool {
        use SolverKind::*;
        match family {
            "glm" | "adversarial" => matches!(self, Gssnm | Ssnm | Svrg | Saga | Katyusha | Agd),
            "multi_block" => matches!(self, Gssnm | Ssnm | Svrg | Saga | Katyusha | Agd | Arcd),
            "composite" => matches!(self, Gkatyusha | GkatyushaReduced | Agd),
            _ => false,
        }
    }
}

/// One solver with its parameter overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub solver: SolverKind,
    /// Multiplier on the theoretical step size (η, learning rate, or `1/L'`).
    #[serde(default = "one")]
    pub scale: f64,
    /// Multiplier on λ for the negative-momentum methods; kept fixed during tuning.
    #[serde(default = "one")]
    pub lambda_scale: f64,
}

fn one() -> f64 {
    1.0
}

impl SolverSpec {
    pub fn new(solver: SolverKind) -> Self {
        Self {
            solver,
            scale: 1.0,
            lambda_scale: 1.0,
        }
    }
}

/// Scales `{10^{-k}, 3·10^{-k}}` for `k ∈ [k_min, k_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "k_min")]
    pub k_min: i32,
    #[serde(default = "k_max")]
    pub k_max: i32,
}

fn k_min() -> i32 {
    -3
}

fn k_max() -> i32 {
    3
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            k_min: k_min(),
            k_max: k_max(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub problem: ProblemDescriptor,
    pub solvers: Vec<SolverSpec>,
    pub seed: u64,
    pub stop: StopRule,
    /// When present, `run` tunes every solver's scale on this grid first.
    #[serde(default)]
    pub grid: Option<GridSpec>,
    pub output: PathBuf,
}

fn invalid(field: &str, msg: impl Into<String>) -> HarnessError {
    HarnessError::Config {
        field: field.to_string(),
        message: msg.into(),
    }
}

fn positive(field: &str, v: f64) -> Result<(), HarnessError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be positive and finite, got {v}")))
    }
}

fn nonzero(field: &str, v: usize) -> Result<(), HarnessError> {
    if v == 0 {
        Err(invalid(field, "must be at least 1"))
    } else {
        Ok(())
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            let inner = e.into_inner();
            HarnessError::Config {
                field,
                message: format!("{inner} (line {}, column {})", inner.line(), inner.column()),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid("<file>", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        match &self.problem {
            ProblemDescriptor::Glm { m, n, ridge, .. } => {
                nonzero("problem.m", *m)?;
                nonzero("problem.n", *n)?;
                positive("problem.ridge", *ridge)?;
            }
            ProblemDescriptor::MultiBlock { m, n, eig_range, mu } => {
                nonzero("problem.m", *m)?;
                nonzero("problem.n", *n)?;
                positive("problem.mu", *mu)?;
                if !(eig_range.0 <= eig_range.1) {
                    return Err(invalid("problem.eig_range", "lower end exceeds upper end"));
                }
            }
            ProblemDescriptor::Composite { m, n, mu, margin, .. } => {
                nonzero("problem.m", *m)?;
                nonzero("problem.n", *n)?;
                positive("problem.mu", *mu)?;
                positive("problem.margin", *margin)?;
            }
            ProblemDescriptor::Adversarial {
                smoothness,
                strong_convexity,
                ..
            } => {
                if smoothness.is_empty() {
                    return Err(invalid("problem.smoothness", "needs at least one component"));
                }
                if smoothness.len() != strong_convexity.len() {
                    return Err(invalid("problem.strong_convexity", "length differs from smoothness"));
                }
            }
        }
        if self.solvers.is_empty() {
            return Err(invalid("solvers", "at least one solver is required"));
        }
        let family = self.problem.family();
        for (k, s) in self.solvers.iter().enumerate() {
            if !s.solver.supports(family) {
                return Err(invalid(
                    &format!("solvers[{k}].solver"),
                    format!("{} cannot run on a {family} problem", s.solver.name()),
                ));
            }
            positive(&format!("solvers[{k}].scale"), s.scale)?;
            positive(&format!("solvers[{k}].lambda_scale"), s.lambda_scale)?;
        }
        self.stop.validate().map_err(|e| invalid("stop", e.to_string()))?;
        if let Some(g) = &self.grid {
            if g.k_min > g.k_max {
                return Err(invalid("grid", "k_min exceeds k_max"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ExperimentConfig {
        ExperimentConfig {
            name: "t".into(),
            problem: ProblemDescriptor::Glm {
                m: 20,
                n: 3,
                ridge: 1e-2,
                loss: LossKind::Squared,
            },
            solvers: vec![SolverSpec::new(SolverKind::Gssnm)],
            seed: 1,
            stop: StopRule::passes(5.0),
            grid: None,
            output: "out".into(),
        }
    }

    #[test]
    fn round_trips_through_json() {
        let cfg = sample();
        assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn reports_the_offending_field() {
        let text = sample().to_json().replace("\"ridge\": 0.01", "\"ridge\": \"x\"");
        match ExperimentConfig::from_json(&text).unwrap_err() {
            HarnessError::Config { field, message } => {
                assert_eq!(field, "problem.glm.ridge");
                assert!(message.contains("line"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let mut cfg = sample();
        cfg.solvers[0].solver = SolverKind::Gkatyusha;
        assert!(matches!(cfg.validate(), Err(HarnessError::Config { field, .. }) if field == "solvers[0].solver"));
    }
}
