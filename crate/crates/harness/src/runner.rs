//! Runs one solver on one instance and reconciles its trace with the oracle counter.

use std::cell::RefCell;
use std::time::Instant;

use hetvr::composite::{
    composite_agd_config, composite_katyusha_config, run_composite_agd, run_composite_katyusha,
    CompositeGapEvaluator, EstimatorKind,
};
use hetvr::dual::CertifiedDualEvaluator;
use hetvr::problems::{OracleCounter, Problem};
use hetvr::solvers::arcd::{arcd_parameters, best_eliminated_index, run_arcd_eliminated, stack, unstack};
use hetvr::solvers::{
    run_agd, run_katyusha, run_saga, run_ssnm, run_svrg, run_uniform_ssnm, saga_step, ssnm_parameters, svrg_step,
    uniform_ssnm_config, AgdConfig, KatyushaConfig, SsnmConfig, SvrgEstimator,
};
use hetvr::trace::{ConvergenceTrace, Evaluator, GapEvaluator, Metrics, Outcome, StopRule};
use hetvr::{Error, Vector};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{SolverKind, SolverSpec};
use crate::error::{HarnessError, Result};
use crate::instance::Instance;

/// A finished run with the parameters it actually used.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub spec: SolverSpec,
    pub trace: ConvergenceTrace,
    pub parameters: Value,
    /// Gradient calls the oracle counter saw during the run.
    pub counter_total: u64,
    /// Recovery-certificate violations (dual runs only).
    pub certificate_violations: Option<usize>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub solver: String,
    pub scale: f64,
    pub lambda_scale: f64,
    pub parameters: Value,
    pub outcome: Outcome,
    pub records: usize,
    pub final_passes: f64,
    pub final_gap: Option<f64>,
    pub grad_calls: u64,
    pub counter_total: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate_violations: Option<usize>,
    pub wall_seconds: f64,
}

impl RunOutput {
    pub fn summary(&self) -> RunSummary {
        let last = self.trace.last();
        RunSummary {
            solver: self.spec.solver.name().to_string(),
            scale: self.spec.scale,
            lambda_scale: self.spec.lambda_scale,
            parameters: self.parameters.clone(),
            outcome: self.trace.outcome,
            records: self.trace.records.len(),
            final_passes: last.map_or(0.0, |r| r.passes),
            final_gap: last.map(|r| r.gap),
            grad_calls: last.map_or(0, |r| r.grad_calls),
            counter_total: self.counter_total,
            certificate_violations: self.certificate_violations,
            wall_seconds: self.wall_seconds,
        }
    }
}

/// Wraps an evaluator and snapshots the per-component counters at every record.
struct Reconciling<'a> {
    inner: &'a dyn Evaluator,
    counter: &'a OracleCounter,
    seen: RefCell<Vec<u64>>,
}

impl<'a> Reconciling<'a> {
    fn new(inner: &'a dyn Evaluator, counter: &'a OracleCounter) -> Self {
        Self {
            inner,
            counter,
            seen: RefCell::new(Vec::new()),
        }
    }

    fn check(&self, solver: &str, trace: &ConvergenceTrace) -> Result<()> {
        let seen = self.seen.borrow();
        let mismatch = |detail: String| HarnessError::Accounting {
            solver: solver.to_string(),
            detail,
        };
        if seen.len() != trace.records.len() {
            return Err(mismatch(format!("{} records but {} evaluations", trace.records.len(), seen.len())));
        }
        for (r, &s) in trace.records.iter().zip(seen.iter()) {
            if r.grad_calls != s {
                return Err(mismatch(format!(
                    "pass {}: trace says {} calls, counters sum to {s}",
                    r.passes, r.grad_calls
                )));
            }
        }
        if let Some(last) = trace.last() {
            if last.grad_calls != self.counter.total() {
                return Err(mismatch(format!(
                    "final record {} vs counter total {}",
                    last.grad_calls,
                    self.counter.total()
                )));
            }
        }
        Ok(())
    }
}

impl Evaluator for Reconciling<'_> {
    fn evaluate(&self, x: &Vector) -> Metrics {
        self.seen.borrow_mut().push(self.counter.per_component().iter().sum());
        self.inner.evaluate(x)
    }
}

fn ssnm_json(cfg: &SsnmConfig) -> Value {
    let (lo, hi) = cfg.tau.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &t| (lo.min(t), hi.max(t)));
    json!({
        "lambda": cfg.lambda,
        "eta": cfg.eta,
        "tau_min": lo,
        "tau_max": hi,
        "case": cfg.case.map(|c| format!("{c:?}")),
        "certified": cfg.certified,
    })
}

fn scaled_ssnm(base: SsnmConfig, spec: &SolverSpec) -> hetvr::Result<SsnmConfig> {
    if spec.scale == 1.0 && spec.lambda_scale == 1.0 {
        Ok(base)
    } else {
        base.scaled(spec.scale, spec.lambda_scale)
    }
}

/// Baseline Katyusha: uniform sampling, so the smoothness estimate is `max{L, m·L_max}`.
pub fn uniform_katyusha_config(p: &Problem) -> hetvr::Result<KatyushaConfig> {
    let l_prime = p.sum_smoothness().max(p.len() as f64 * p.max_smoothness());
    KatyushaConfig::new(p.mu_total(), l_prime, p.len())
}

fn run_finite_sum(
    p: &Problem,
    spec: &SolverSpec,
    stop: StopRule,
    seed: u64,
    ev: &dyn Evaluator,
) -> hetvr::Result<(ConvergenceTrace, Value)> {
    let x0 = Vector::zeros(p.dim());
    let s = spec.scale;
    Ok(match spec.solver {
        SolverKind::Gssnm => {
            let cfg = scaled_ssnm(ssnm_parameters(&p.smoothness(), p.mu_total())?, spec)?;
            (run_ssnm(p, &cfg, &x0, stop, seed, ev)?, ssnm_json(&cfg))
        }
        SolverKind::Ssnm => {
            let cfg = scaled_ssnm(uniform_ssnm_config(p)?, spec)?;
            (run_uniform_ssnm(p, &cfg, &x0, stop, seed, ev)?, ssnm_json(&cfg))
        }
        SolverKind::Svrg => {
            let step = svrg_step(p) * s;
            (run_svrg(p, step, &x0, stop, seed, ev)?, json!({ "step": step, "epoch": 2 * p.len() }))
        }
        SolverKind::Saga => {
            let step = saga_step(p) * s;
            (run_saga(p, step, &x0, stop, seed, ev)?, json!({ "step": step }))
        }
        SolverKind::Agd => {
            let cfg = AgdConfig::for_problem(p)?.scaled(s)?;
            (run_agd(p, &cfg, &x0, stop, ev)?, serde_json::to_value(cfg).expect("plain struct"))
        }
        SolverKind::Katyusha => {
            let cfg = uniform_katyusha_config(p)?.scaled(s)?;
            let mut est = SvrgEstimator::uniform(p)?;
            let trace = run_katyusha("katyusha", &mut est, p.counter(), &cfg, &x0, stop, seed, ev)?;
            (trace, serde_json::to_value(cfg).expect("plain struct"))
        }
        other => {
            return Err(Error::InvalidParameter(format!(
                "{} does not run on finite sums",
                other.name()
            )))
        }
    })
}

/// Primal gap, distance and infeasibility of stacked blocks.
struct PrimalEvaluator<'a> {
    primal: &'a hetvr::dual::MultiBlockProblem,
    y_star: Vector,
    value: f64,
}

impl Evaluator for PrimalEvaluator<'_> {
    fn evaluate(&self, x: &Vector) -> Metrics {
        let blocks = unstack(x, self.primal.len());
        Metrics {
            gap: self.primal.primal_objective(&blocks) - self.value,
            distance: Some((x - &self.y_star).norm()),
            infeasibility: Some(self.primal.infeasibility(&blocks)),
        }
    }
}

/// Runs `spec` on the instance. `seed` drives the solver's sampling only.
pub fn run_solver(instance: &Instance, spec: &SolverSpec, stop: StopRule, seed: u64) -> Result<RunOutput> {
    let started = Instant::now();
    let name = spec.solver.name();
    let (trace, parameters, counter_total, violations) = match (instance, spec.solver) {
        (Instance::MultiBlock { primal, y_star, .. }, SolverKind::Arcd) => {
            if spec.scale != 1.0 {
                return Err(HarnessError::Config {
                    field: "scale".into(),
                    message: "block coordinate descent has no step-size scale".into(),
                });
            }
            let p = instance.primal_blocks().expect("multi-block")?;
            let j = best_eliminated_index(&p);
            let params = arcd_parameters(&p, j)?;
            let inner = PrimalEvaluator {
                primal,
                y_star: stack(y_star),
                value: primal.primal_objective(y_star),
            };
            let ev = Reconciling::new(&inner, p.counter());
            let sol = run_arcd_eliminated(&p, primal.rhs(), j, stop, seed, &ev)?;
            ev.check(name, &sol.trace)?;
            let parameters = json!({
                "eliminated": params.eliminated,
                "alpha": params.alpha,
                "weighted_mu": params.weighted_mu,
            });
            (sol.trace, parameters, p.counter().total(), None)
        }
        (Instance::MultiBlock { dual, x_star, .. }, _) => {
            let p = instance.finite_sum().expect("dual");
            let inner = CertifiedDualEvaluator::new(dual, x_star.clone());
            let ev = Reconciling::new(&inner, p.counter());
            let (trace, parameters) = run_finite_sum(&p, spec, stop, seed, &ev)?;
            ev.check(name, &trace)?;
            (trace, parameters, p.counter().total(), Some(inner.violations()))
        }
        (Instance::Composite { instance: c, .. }, kind) => {
            let p = &c.problem;
            p.counter().reset();
            let inner = CompositeGapEvaluator::new(p, c.optimum.clone());
            let ev = Reconciling::new(&inner, p.counter());
            let x0 = Vector::zeros(p.dim());
            let (trace, parameters) = match kind {
                SolverKind::Gkatyusha | SolverKind::GkatyushaReduced => {
                    let est = if kind == SolverKind::Gkatyusha {
                        EstimatorKind::General
                    } else {
                        EstimatorKind::Reduced
                    };
                    if est == EstimatorKind::Reduced && p.reduced().is_none() {
                        return Err(Error::InvalidParameter(format!(
                            "reduced estimator unavailable: {}",
                            c.certification_error.as_deref().unwrap_or("constants not certified")
                        ))
                        .into());
                    }
                    let cfg = composite_katyusha_config(p, est)?.scaled(spec.scale)?;
                    let trace = run_composite_katyusha(p, est, &cfg, &x0, stop, seed, &ev)?;
                    (trace, serde_json::to_value(cfg).expect("plain struct"))
                }
                SolverKind::Agd => {
                    let cfg = composite_agd_config(p)?.scaled(spec.scale)?;
                    let trace = run_composite_agd(p, &cfg, &x0, stop, &ev)?;
                    (trace, serde_json::to_value(cfg).expect("plain struct"))
                }
                other => {
                    return Err(Error::InvalidParameter(format!("{} does not run on composite problems", other.name())).into())
                }
            };
            ev.check(name, &trace)?;
            (trace, parameters, p.counter().total(), None)
        }
        (_, _) => {
            let p = instance.finite_sum().expect("finite sum");
            let r = instance.reference();
            let inner = GapEvaluator::new(|x| p.objective(x), r.optimal_value, Some(r.optimum.clone()));
            let ev = Reconciling::new(&inner, p.counter());
            let (trace, parameters) = run_finite_sum(&p, spec, stop, seed, &ev)?;
            ev.check(name, &trace)?;
            (trace, parameters, p.counter().total(), None)
        }
    };
    let mut trace = trace;
    // the solvers label themselves; keep the configured name so outputs line up
    trace.solver = name.to_string();
    Ok(RunOutput {
        spec: spec.clone(),
        trace,
        parameters,
        counter_total,
        certificate_violations: violations,
        wall_seconds: started.elapsed().as_secs_f64(),
    })
}
