//! Configurations for the four experiment families, shrinkable to desk scale.

use std::path::PathBuf;

use hetvr::problems::LossKind;
use hetvr::trace::StopRule;

use crate::config::{ExperimentConfig, GridSpec, ProblemDescriptor, SolverKind, SolverSpec};
use crate::error::{HarnessError, Result};

pub const PRESETS: [&str; 4] = ["fig1", "fig2", "fig3", "fig4"];

/// `max(10, round(v·scale))`.
pub fn scaled_size(v: usize, scale: f64) -> usize {
    ((v as f64 * scale).round() as usize).max(10)
}

fn specs(kinds: &[SolverKind]) -> Vec<SolverSpec> {
    kinds.iter().map(|&k| SolverSpec::new(k)).collect()
}

pub fn preset(name: &str, scale: f64, seed: u64) -> Result<ExperimentConfig> {
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(HarnessError::Config {
            field: "scale".into(),
            message: format!("must lie in (0, 1], got {scale}"),
        });
    }
    let size = |v| scaled_size(v, scale);
    use SolverKind::*;
    let (problem, solvers, stop, grid) = match name {
        "fig1" | "fig2" => (
            ProblemDescriptor::Glm {
                m: size(10_000),
                n: size(100),
                ridge: 1e-5,
                loss: if name == "fig1" { LossKind::Squared } else { LossKind::Logistic },
            },
            specs(&[Gssnm, Ssnm, Svrg, Saga, Katyusha]),
            StopRule::passes(1000.0).with_gap(1e-10),
            Some(GridSpec::default()),
        ),
        "fig3" => (
            ProblemDescriptor::MultiBlock {
                m: size(10),
                n: size(10),
                eig_range: (0.0, 1.0),
                mu: 1e-3,
            },
            specs(&[Gssnm, Ssnm, Agd, Arcd]),
            StopRule::passes(5000.0).with_distance(1e-8),
            None,
        ),
        "fig4" => (
            ProblemDescriptor::Composite {
                m: size(80),
                n: size(80),
                mu: 1e-5,
                margin: 1e5,
                certify_samples: 64,
            },
            specs(&[Gkatyusha, GkatyushaReduced, Agd]),
            StopRule::passes(3000.0).with_gap(1e-8),
            None,
        ),
        other => return Err(HarnessError::UnknownPreset(other.to_string())),
    };
    let cfg = ExperimentConfig {
        name: name.to_string(),
        problem,
        solvers,
        seed,
        stop,
        grid,
        output: PathBuf::from(format!("results/{name}")),
    };
    cfg.validate()?;
    Ok(cfg)
}
