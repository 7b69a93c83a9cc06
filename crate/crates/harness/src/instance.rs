//! Problem instances built from a descriptor, with their gap references.
//!
//! Solvers consume a fresh counted [`Problem`] per run so that every trace
//! starts its oracle accounting at zero; composite instances are reused
//! and their counter is reset instead.

use hetvr::adversarial::FiniteSumAdversarialInstance;
use hetvr::composite::{generate_composite, CompositeInstance, CompositeSpec};
use hetvr::dual::{build_dual, DualProblem, MultiBlockProblem, MultiBlockSpec};
use hetvr::problems::{Problem, Quadratic, QuadraticSum, WeightedGlm};
use hetvr::{Error, Vector};
use serde::Serialize;

use crate::config::ProblemDescriptor;
use crate::error::Result;

/// Where the optimum used for gaps came from and how accurate it is.
#[derive(Debug, Clone, Serialize)]
pub struct Reference {
    pub method: String,
    pub optimal_value: f64,
    /// `‖∇F(x*)‖` (or the KKT residual) at the reference point.
    pub residual: f64,
    #[serde(skip)]
    pub optimum: Vector,
}

#[derive(Debug)]
pub enum Instance {
    Glm {
        family: WeightedGlm,
        reference: Reference,
    },
    Adversarial {
        family: FiniteSumAdversarialInstance,
        reference: Reference,
    },
    /// Solved through the dual by the finite-sum methods, directly by block descent.
    MultiBlock {
        primal: MultiBlockProblem,
        dual: DualProblem,
        y_star: Vec<Vector>,
        x_star: Vector,
        reference: Reference,
    },
    Composite {
        instance: CompositeInstance,
        reference: Reference,
    },
}

/// Summary written to the metadata.
#[derive(Debug, Clone, Serialize)]
pub struct InstanceSummary {
    pub family: String,
    pub components: usize,
    pub dim: usize,
    pub mu_total: f64,
    pub max_smoothness: f64,
    pub reference: Reference,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certification_error: Option<String>,
}

impl Instance {
    pub fn build(desc: &ProblemDescriptor, seed: u64) -> Result<Self> {
        Ok(match desc {
            ProblemDescriptor::Glm { m, n, ridge, loss } => {
                let family = WeightedGlm::synthetic(*m, *n, *ridge, *loss, seed)?;
                let reference = newton_reference(&family)?;
                Instance::Glm { family, reference }
            }
            ProblemDescriptor::Adversarial {
                smoothness,
                strong_convexity,
                d,
            } => {
                let family = FiniteSumAdversarialInstance::build(smoothness, strong_convexity, *d)?;
                let optimum = family.truncated_optimum();
                let p = Problem::new(family.clone());
                let reference = Reference {
                    method: "truncated closed-form optimum".into(),
                    optimal_value: family.optimal_value(),
                    residual: p.full_gradient_uncounted(&optimum).norm(),
                    optimum,
                };
                Instance::Adversarial { family, reference }
            }
            ProblemDescriptor::MultiBlock { m, n, eig_range, mu } => {
                let primal = MultiBlockProblem::random(&MultiBlockSpec {
                    m: *m,
                    n: *n,
                    eig_range: *eig_range,
                    mu: *mu,
                    seed,
                })?;
                let dual = build_dual(&primal)?;
                let (y_star, x_star) = primal.kkt_direct_solve()?;
                let reference = Reference {
                    method: "direct KKT solve".into(),
                    optimal_value: dual.dual_objective(&x_star),
                    residual: primal.infeasibility(&y_star),
                    optimum: x_star.clone(),
                };
                Instance::MultiBlock {
                    primal,
                    dual,
                    y_star,
                    x_star,
                    reference,
                }
            }
            ProblemDescriptor::Composite {
                m,
                n,
                mu,
                margin,
                certify_samples,
            } => {
                let mut spec = CompositeSpec::new(*m, *n, seed);
                spec.mu = *mu;
                spec.margin = *margin;
                spec.certify_samples = *certify_samples;
                let instance = generate_composite(&spec)?;
                let p = &instance.problem;
                let reference = Reference {
                    method: "Newton on the composite objective".into(),
                    optimal_value: p.objective(&instance.optimum),
                    residual: p.gradient_uncounted(&instance.optimum).norm(),
                    optimum: instance.optimum.clone(),
                };
                Instance::Composite { instance, reference }
            }
        })
    }

    pub fn reference(&self) -> &Reference {
        match self {
            Instance::Glm { reference, .. }
            | Instance::Adversarial { reference, .. }
            | Instance::MultiBlock { reference, .. }
            | Instance::Composite { reference, .. } => reference,
        }
    }

    /// Fresh counted finite-sum problem (the dual for multi-block instances).
    /// `None` for composite instances.
    pub fn finite_sum(&self) -> Option<Problem> {
        match self {
            Instance::Glm { family, .. } => Some(Problem::new(family.clone())),
            Instance::Adversarial { family, .. } => Some(Problem::new(family.clone())),
            Instance::MultiBlock { dual, .. } => Some(Problem::new(dual.clone())),
            Instance::Composite { .. } => None,
        }
    }

    /// The primal blocks as a finite sum, for block coordinate descent.
    pub fn primal_blocks(&self) -> Option<Result<Problem>> {
        let Instance::MultiBlock { primal, .. } = self else {
            return None;
        };
        Some((|| {
            let parts = primal
                .blocks()
                .iter()
                .map(|b| Quadratic::new(b.matrix().clone(), b.linear().clone(), 0.0))
                .collect::<hetvr::Result<Vec<_>>>()?;
            Ok(Problem::new(QuadraticSum::new(parts)?))
        })())
    }

    pub fn summary(&self) -> InstanceSummary {
        let (family, certification_error, p) = match self {
            Instance::Glm { family, .. } => (family_name(family.loss()), None, self.finite_sum()),
            Instance::Adversarial { .. } => ("adversarial".to_string(), None, self.finite_sum()),
            Instance::MultiBlock { .. } => ("multi_block".to_string(), None, self.finite_sum()),
            Instance::Composite { instance, .. } => {
                ("composite".to_string(), instance.certification_error.clone(), None)
            }
        };
        let (components, dim, mu_total, max_smoothness) = match (&p, self) {
            (Some(p), _) => (p.len(), p.dim(), p.mu_total(), p.max_smoothness()),
            (None, Instance::Composite { instance, .. }) => {
                let c = &instance.problem;
                (c.len(), c.dim(), c.sigma(), c.smoothness())
            }
            _ => unreachable!("only composite instances lack a finite sum"),
        };
        InstanceSummary {
            family,
            components,
            dim,
            mu_total,
            max_smoothness,
            reference: self.reference().clone(),
            certification_error,
        }
    }
}

fn family_name(loss: hetvr::problems::LossKind) -> String {
    match loss {
        hetvr::problems::LossKind::Squared => "glm_squared".into(),
        hetvr::problems::LossKind::Logistic => "glm_logistic".into(),
    }
}

/// Damped Newton on the full objective; converges to machine precision in a
/// handful of steps for these smooth, strongly convex GLMs.
pub fn newton_reference(family: &WeightedGlm) -> Result<Reference> {
    let p = Problem::new(family.clone());
    let mut x = Vector::zeros(p.dim());
    let mut value = p.objective(&x);
    let g0 = p.full_gradient_uncounted(&x).norm().max(1.0);
    for _ in 0..200 {
        let g = p.full_gradient_uncounted(&x);
        if g.norm() <= 1e-14 * g0 {
            break;
        }
        let dir = family
            .hessian(&x)
            .cholesky()
            .ok_or_else(|| Error::Singular("GLM Hessian is not positive definite".into()))?
            .solve(&g);
        let slope = g.dot(&dir);
        let mut t = 1.0;
        loop {
            let trial = &x - &dir * t;
            let v = p.objective(&trial);
            if v <= value - 0.25 * t * slope || t < 1e-12 {
                x = trial;
                value = v;
                break;
            }
            t *= 0.5;
        }
        if t < 1e-12 {
            break;
        }
    }
    Ok(Reference {
        method: "damped Newton".into(),
        optimal_value: value,
        residual: p.full_gradient_uncounted(&x).norm(),
        optimum: x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use hetvr::problems::LossKind;

    #[test]
    fn newton_reaches_stationarity() {
        for loss in [LossKind::Squared, LossKind::Logistic] {
            let family = WeightedGlm::synthetic(50, 5, 1e-3, loss, 9).unwrap();
            let r = newton_reference(&family).unwrap();
            assert!(r.residual <= 1e-12, "{loss:?}: {:e}", r.residual);
        }
    }

    #[test]
    fn multiblock_reference_is_feasible() {
        let desc = ProblemDescriptor::MultiBlock {
            m: 4,
            n: 3,
            eig_range: (0.0, 1.0),
            mu: 1e-2,
        };
        let inst = Instance::build(&desc, 2).unwrap();
        assert!(inst.reference().residual <= 1e-10);
        assert_eq!(inst.primal_blocks().unwrap().unwrap().len(), 4);
    }
}
