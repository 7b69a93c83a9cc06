//! Convergence traces and the per-pass recorder shared by every solver.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::problems::OracleCounter;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: u64,
    /// Component-gradient calls issued by this run so far.
    pub grad_calls: u64,
    pub value_calls: u64,
    pub passes: f64,
    pub gap: f64,
    pub distance: Option<f64>,
    pub infeasibility: Option<f64>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Converged,
    BudgetExhausted,
    Diverged,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub solver: String,
    pub components: usize,
    pub records: Vec<TraceRecord>,
    pub outcome: Outcome,
    pub final_iterate: Vec<f64>,
}

impl ConvergenceTrace {
    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn final_gap(&self) -> f64 {
        self.last().map_or(f64::INFINITY, |r| r.gap)
    }

    pub fn final_point(&self) -> Vector {
        Vector::from_column_slice(&self.final_iterate)
    }

    /// First recorded pass count at which the gap is at most `target`.
    pub fn passes_to(&self, target: f64) -> Option<f64> {
        self.records.iter().find(|r| r.gap <= target).map(|r| r.passes)
    }

    /// First recorded gradient-call count at which the gap is at most `target`.
    pub fn grad_calls_to(&self, target: f64) -> Option<u64> {
        self.records.iter().find(|r| r.gap <= target).map(|r| r.grad_calls)
    }
}

/// When a run stops. Budgets are in effective passes (`m` gradient calls each).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub max_passes: f64,
    #[serde(default)]
    pub gap_tolerance: Option<f64>,
    #[serde(default)]
    pub distance_tolerance: Option<f64>,
    /// A run that ends its budget with a gap above this multiple of the initial
    /// gap is reported as diverged. Accelerated methods may overshoot transiently,
    /// so the run itself is only cut short by non-finite or runaway gaps.
    #[serde(default = "default_divergence")]
    pub divergence_factor: f64,
}

fn default_divergence() -> f64 {
    10.0
}

/// Gap growth that aborts a run immediately.
pub const RUNAWAY_FACTOR: f64 = 1e10;

impl StopRule {
    pub fn passes(max_passes: f64) -> Self {
        Self {
            max_passes,
            gap_tolerance: None,
            distance_tolerance: None,
            divergence_factor: default_divergence(),
        }
    }

    pub fn with_gap(mut self, tol: f64) -> Self {
        self.gap_tolerance = Some(tol);
        self
    }

    pub fn with_distance(mut self, tol: f64) -> Self {
        self.distance_tolerance = Some(tol);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.max_passes >= 0.0) {
            return Err(Error::InvalidParameter(format!("pass budget {}", self.max_passes)));
        }
        if !(self.divergence_factor > 1.0) {
            return Err(Error::InvalidParameter("divergence factor must exceed 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Metrics {
    pub gap: f64,
    pub distance: Option<f64>,
    pub infeasibility: Option<f64>,
}

/// Turns an iterate into the metrics written to a trace.
pub trait Evaluator {
    fn evaluate(&self, x: &Vector) -> Metrics;
}

/// `F(x) − F*` against a known optimal value, plus distance when `x*` is known.
pub struct GapEvaluator<'a> {
    objective: Box<dyn Fn(&Vector) -> f64 + 'a>,
    optimal_value: f64,
    optimum: Option<Vector>,
}

impl<'a> GapEvaluator<'a> {
    pub fn new(objective: impl Fn(&Vector) -> f64 + 'a, optimal_value: f64, optimum: Option<Vector>) -> Self {
        Self {
            objective: Box::new(objective),
            optimal_value,
            optimum,
        }
    }
}

impl Evaluator for GapEvaluator<'_> {
    fn evaluate(&self, x: &Vector) -> Metrics {
        Metrics {
            gap: (self.objective)(x) - self.optimal_value,
            distance: self.optimum.as_ref().map(|o| (x - o).norm()),
            infeasibility: None,
        }
    }
}

/// Records metrics once per effective pass and decides when to stop.
pub struct Recorder<'a> {
    solver: String,
    m: usize,
    stop: StopRule,
    evaluator: &'a dyn Evaluator,
    counter: &'a OracleCounter,
    grad_base: u64,
    value_base: u64,
    records: Vec<TraceRecord>,
    next_pass: f64,
    initial_gap: Option<f64>,
    started: Instant,
}

impl<'a> Recorder<'a> {
    pub fn new(
        solver: impl Into<String>,
        counter: &'a OracleCounter,
        m: usize,
        stop: StopRule,
        evaluator: &'a dyn Evaluator,
    ) -> Result<Self> {
        stop.validate()?;
        if m == 0 {
            return Err(Error::Empty("components"));
        }
        Ok(Self {
            solver: solver.into(),
            m,
            stop,
            evaluator,
            counter,
            grad_base: counter.total(),
            value_base: counter.values(),
            records: Vec::new(),
            next_pass: 0.0,
            initial_gap: None,
            started: Instant::now(),
        })
    }

    pub fn grad_calls(&self) -> u64 {
        self.counter.total() - self.grad_base
    }

    pub fn passes(&self) -> f64 {
        self.grad_calls() as f64 / self.m as f64
    }

    /// A zero budget means nothing is run or recorded.
    pub fn budget_is_zero(&self) -> bool {
        self.stop.max_passes <= 0.0
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    fn record(&mut self, iteration: u64, x: &Vector) -> Option<Outcome> {
        let passes = self.passes();
        let metrics = self.evaluator.evaluate(x);
        self.records.push(TraceRecord {
            iteration,
            grad_calls: self.grad_calls(),
            value_calls: self.counter.values() - self.value_base,
            passes,
            gap: metrics.gap,
            distance: metrics.distance,
            infeasibility: metrics.infeasibility,
            wall_seconds: self.started.elapsed().as_secs_f64(),
        });
        self.next_pass = passes.floor() + 1.0;
        let initial = *self.initial_gap.get_or_insert(metrics.gap.abs());
        if !metrics.gap.is_finite() || metrics.distance.is_some_and(|d| !d.is_finite()) {
            return Some(Outcome::Diverged);
        }
        if initial > 0.0 && metrics.gap > RUNAWAY_FACTOR.max(self.stop.divergence_factor) * initial {
            return Some(Outcome::Diverged);
        }
        let gap_ok = self.stop.gap_tolerance.map(|t| metrics.gap <= t);
        let dist_ok = self
            .stop
            .distance_tolerance
            .map(|t| metrics.distance.is_some_and(|d| d <= t));
        match (gap_ok, dist_ok) {
            (Some(true), None) | (None, Some(true)) | (Some(true), Some(true)) => {
                return Some(Outcome::Converged)
            }
            _ => {}
        }
        if passes >= self.stop.max_passes {
            if initial > 0.0 && metrics.gap > self.stop.divergence_factor * initial {
                return Some(Outcome::Diverged);
            }
            return Some(Outcome::BudgetExhausted);
        }
        None
    }

    /// Records the starting point unconditionally.
    pub fn start(&mut self, x: &Vector) -> Option<Outcome> {
        if self.budget_is_zero() {
            return Some(Outcome::BudgetExhausted);
        }
        self.record(0, x)
    }

    /// Call after every iteration; records when a new effective pass has been completed.
    pub fn observe(&mut self, iteration: u64, x: &Vector) -> Option<Outcome> {
        if self.passes() >= self.next_pass {
            self.record(iteration, x)
        } else {
            None
        }
    }

    pub fn finish(mut self, iteration: u64, x: &Vector, outcome: Outcome) -> ConvergenceTrace {
        let stale = self
            .records
            .last()
            .is_some_and(|r| r.iteration != iteration || r.grad_calls != self.grad_calls());
        if stale && !self.budget_is_zero() {
            // final state differs from the last record; the outcome is already decided
            let _ = self.record(iteration, x);
        }
        ConvergenceTrace {
            solver: self.solver,
            components: self.m,
            records: self.records,
            outcome,
            final_iterate: x.iter().copied().collect(),
        }
    }
}

/// Drives a solver loop: `step` performs one iteration and returns the current
/// iterate. Handles the recording cadence and stop rule uniformly.
pub fn drive<S>(mut recorder: Recorder<'_>, x0: &Vector, mut step: S) -> Result<ConvergenceTrace>
where
    S: FnMut(u64) -> Result<Vector>,
{
    if let Some(outcome) = recorder.start(x0) {
        return Ok(recorder.finish(0, x0, outcome));
    }
    let mut k = 0u64;
    loop {
        let x = step(k)?;
        k += 1;
        if let Some(outcome) = recorder.observe(k, &x) {
            return Ok(recorder.finish(k, &x, outcome));
        }
    }
}
