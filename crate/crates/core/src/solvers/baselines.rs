//! Reference methods that ignore per-component smoothness: SAGA, SVRG,
//! uniform-sampling SSNM and Nesterov's accelerated gradient method.
//!
//! Step sizes are the textbook settings for `F = Σ g_i` with every
//! component treated as `L_max`-smooth; the harness multiplies them by
//! grid scales.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::Vector;
use crate::problems::{OracleCounter, Problem};
use crate::sampling::{SamplingDistribution, SeededRng};
use crate::solvers::ssnm::{run_named, uniform_ssnm_parameters, SsnmConfig};
use crate::trace::{drive, ConvergenceTrace, Evaluator, Recorder, StopRule};

fn positive_step(step: f64) -> Result<()> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidParameter(format!("step size must be positive, got {step}")));
    }
    Ok(())
}

/// `1/(3m²L_max)`: the SAGA step `1/(3L)` for the average `F/m`, rescaled to the sum.
pub fn saga_step(problem: &Problem) -> f64 {
    let m = problem.len() as f64;
    1.0 / (3.0 * m * m * problem.max_smoothness())
}

/// `0.1/(m²L_max)`, the usual SVRG step expressed for the sum.
pub fn svrg_step(problem: &Problem) -> f64 {
    let m = problem.len() as f64;
    0.1 / (m * m * problem.max_smoothness())
}

/// SAGA with uniform sampling and a gradient table; one gradient call per iteration.
pub fn run_saga(
    problem: &Problem,
    step: f64,
    x0: &Vector,
    stop: StopRule,
    seed: u64,
    evaluator: &dyn Evaluator,
) -> Result<ConvergenceTrace> {
    positive_step(step)?;
    check_dim(problem.dim(), x0.len())?;
    let m = problem.len();
    let dist = SamplingDistribution::uniform(m)?;
    let recorder = Recorder::new("saga", problem.counter(), m, stop, evaluator)?;
    let mut rng = SeededRng::new(seed);
    let mut table: Vec<Vector> = Vec::new();
    let mut sum = Vector::zeros(problem.dim());
    let mut x = x0.clone();
    let mut g = Vector::zeros(problem.dim());
    drive(recorder, x0, |k| {
        if table.is_empty() {
            for i in 0..m {
                let gi = problem.grad_component(i, &x)?;
                sum += &gi;
                table.push(gi);
            }
        }
        let i = dist.sample(&mut rng);
        problem.grad_component_into(i, &x, &mut g)?;
        let mut est = (&g - &table[i]) * m as f64;
        est += &sum;
        x.axpy(-step, &est, 1.0);
        problem.set().project_in_place(&mut x);
        sum += &g;
        sum -= &table[i];
        table[i].copy_from(&g);
        if (k + 1) % m as u64 == 0 {
            sum = table.iter().fold(Vector::zeros(x.len()), |acc, t| acc + t);
        }
        Ok(x.clone())
    })
}

/// The gradient table SAGA would hold after visiting each index in `order` once.
/// Exposed for bookkeeping checks.
pub fn saga_table_after(problem: &Problem, step: f64, x0: &Vector, order: &[usize]) -> Result<(Vec<Vector>, Vec<Vector>)> {
    let m = problem.len();
    let mut table: Vec<Vector> = (0..m).map(|i| problem.grad_component(i, x0)).collect::<Result<_>>()?;
    let mut sum = table.iter().fold(Vector::zeros(x0.len()), |acc, t| acc + t);
    let mut x = x0.clone();
    let mut visited = vec![x0.clone(); m];
    for &i in order {
        let g = problem.grad_component(i, &x)?;
        visited[i] = x.clone();
        let est = (&g - &table[i]) * m as f64 + &sum;
        x.axpy(-step, &est, 1.0);
        sum += &g - &table[i];
        table[i] = g;
    }
    Ok((table, visited))
}

/// SVRG with uniform sampling, epochs of `2m`, the last iterate as the next snapshot,
/// and the snapshot gradients memorized (one call per inner iteration).
pub fn run_svrg(
    problem: &Problem,
    step: f64,
    x0: &Vector,
    stop: StopRule,
    seed: u64,
    evaluator: &dyn Evaluator,
) -> Result<ConvergenceTrace> {
    positive_step(step)?;
    check_dim(problem.dim(), x0.len())?;
    let m = problem.len();
    let dist = SamplingDistribution::uniform(m)?;
    let recorder = Recorder::new("svrg", problem.counter(), m, stop, evaluator)?;
    let mut rng = SeededRng::new(seed);
    let mut table: Vec<Vector> = Vec::with_capacity(m);
    let mut full = Vector::zeros(problem.dim());
    let mut x = x0.clone();
    let mut g = Vector::zeros(problem.dim());
    let mut inner = 2 * m;
    drive(recorder, x0, |_| {
        if inner == 2 * m {
            table.clear();
            full.fill(0.0);
            for i in 0..m {
                let gi = problem.grad_component(i, &x)?;
                full += &gi;
                table.push(gi);
            }
            inner = 0;
        }
        let i = dist.sample(&mut rng);
        problem.grad_component_into(i, &x, &mut g)?;
        let mut est = (&g - &table[i]) * m as f64;
        est += &full;
        x.axpy(-step, &est, 1.0);
        problem.set().project_in_place(&mut x);
        inner += 1;
        Ok(x.clone())
    })
}

/// Negative-momentum method with uniform sampling and `L_i ← L_max`.
pub fn uniform_ssnm_config(problem: &Problem) -> Result<SsnmConfig> {
    uniform_ssnm_parameters(&problem.smoothness(), problem.mu_total())
}

pub fn run_uniform_ssnm(
    problem: &Problem,
    config: &SsnmConfig,
    x0: &Vector,
    stop: StopRule,
    seed: u64,
    evaluator: &dyn Evaluator,
) -> Result<ConvergenceTrace> {
    run_named("ssnm", problem, config, x0, stop, seed, evaluator)
}

/// Constant-momentum accelerated gradient: `y = x + β(x − x_prev)`, `x⁺ = Π(y − s∇F(y))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgdConfig {
    pub step: f64,
    pub momentum: f64,
}

impl AgdConfig {
    /// `s = 1/L`, `β = (√κ−1)/(√κ+1)` with `κ = L/μ`.
    pub fn new(smoothness: f64, strong_convexity: f64) -> Result<Self> {
        if !(smoothness > 0.0) || !(strong_convexity > 0.0) || strong_convexity > smoothness {
            return Err(Error::InvalidParameter(format!(
                "need 0 < μ ≤ L, got L = {smoothness}, μ = {strong_convexity}"
            )));
        }
        let root = (smoothness / strong_convexity).sqrt();
        Ok(Self {
            step: 1.0 / smoothness,
            momentum: (root - 1.0) / (root + 1.0),
        })
    }

    pub fn for_problem(problem: &Problem) -> Result<Self> {
        let l = problem.sum_smoothness();
        Self::new(l, problem.mu_total().min(l))
    }

    pub fn scaled(&self, scale: f64) -> Result<Self> {
        positive_step(self.step * scale)?;
        Ok(Self {
            step: self.step * scale,
            momentum: self.momentum,
        })
    }
}

/// Accelerated gradient on any full-gradient oracle. `m` sets the pass unit
/// and `counter` is the component counter the oracle increments.
#[allow(clippy::too_many_arguments)]
pub fn run_agd_with<G, P>(
    m: usize,
    counter: &OracleCounter,
    mut gradient: G,
    mut project: P,
    config: &AgdConfig,
    x0: &Vector,
    stop: StopRule,
    evaluator: &dyn Evaluator,
) -> Result<ConvergenceTrace>
where
    G: FnMut(&Vector) -> Result<Vector>,
    P: FnMut(&mut Vector),
{
    positive_step(config.step)?;
    let recorder = Recorder::new("agd", counter, m, stop, evaluator)?;
    let mut x = x0.clone();
    let mut prev = x0.clone();
    drive(recorder, x0, |_| {
        let y = &x + (&x - &prev) * config.momentum;
        let g = gradient(&y)?;
        let mut next = y;
        next.axpy(-config.step, &g, 1.0);
        project(&mut next);
        prev = std::mem::replace(&mut x, next);
        Ok(x.clone())
    })
}

pub fn run_agd(
    problem: &Problem,
    config: &AgdConfig,
    x0: &Vector,
    stop: StopRule,
    evaluator: &dyn Evaluator,
) -> Result<ConvergenceTrace> {
    check_dim(problem.dim(), x0.len())?;
    run_agd_with(
        problem.len(),
        problem.counter(),
        |y| problem.full_gradient(y),
        |x| problem.set().project_in_place(x),
        config,
        x0,
        stop,
        evaluator,
    )
}
