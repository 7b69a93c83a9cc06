//! `generate`: materializes a worst-case instance from a JSON description.

use hetvr::adversarial::{DualAdversarialInstance, FiniteSumAdversarialInstance};
use hetvr::solvers::arcd::stack;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversarialKind {
    /// Block-separable chains sharing one variable.
    #[default]
    FiniteSum,
    /// Paired chains for the constrained (dual) setting.
    Paired,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversarialSpec {
    #[serde(default)]
    pub kind: AdversarialKind,
    pub smoothness: Vec<f64>,
    pub strong_convexity: Vec<f64>,
    #[serde(default)]
    pub d: Option<usize>,
    /// When set, also report the fewest per-block queries compatible with this gap.
    #[serde(default)]
    pub epsilon: Option<f64>,
}

impl AdversarialSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            let inner = e.into_inner();
            HarnessError::Config {
                field,
                message: format!("{inner} (line {}, column {})", inner.line(), inner.column()),
            }
        })
    }
}

/// Instance constants, the truncated optimum and its value as JSON.
pub fn generate(spec: &AdversarialSpec) -> Result<Value> {
    let invalid = |e: hetvr::Error| HarnessError::Config {
        field: "smoothness".into(),
        message: e.to_string(),
    };
    Ok(match spec.kind {
        AdversarialKind::FiniteSum => {
            let inst = FiniteSumAdversarialInstance::build(&spec.smoothness, &spec.strong_convexity, spec.d)
                .map_err(invalid)?;
            let optimum = inst.truncated_optimum();
            json!({
                "kind": spec.kind,
                "instance": inst,
                "optimal_value": inst.optimal_value(),
                "optimum": optimum.as_slice(),
                "min_queries": spec.epsilon.map(|e| inst.min_queries(e)),
            })
        }
        AdversarialKind::Paired => {
            let inst = DualAdversarialInstance::build(&spec.smoothness, &spec.strong_convexity, spec.d)
                .map_err(invalid)?;
            let optimum = stack(&inst.truncated_optimum());
            json!({
                "kind": spec.kind,
                "instance": inst,
                "optimal_value": inst.optimal_value(),
                "optimum": optimum.as_slice(),
            })
        }
    })
}
