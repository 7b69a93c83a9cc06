//! Stochastic negative-momentum method with nonuniform sampling.
//!
//! Each iteration samples `i` from `π`, forms the negative-momentum point
//! `y_i = τ_i x + (1−τ_i)φ_i`, builds the SAGA-style estimate
//! `(∇ĝ_i(y_i) − ∇ĝ_i(φ_i))/π_i + Σ_j ∇ĝ_j(φ_j)`, takes a prox step on
//! `h = (μ/2)‖x‖²`, then moves one independently sampled anchor toward the
//! new iterate. That is two component-gradient calls per iteration, plus
//! `m` to initialize the anchor table.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::Vector;
use crate::problems::{prox_step_in_place, Problem};
use crate::sampling::{ssnm_distribution, SamplingDistribution, SeededRng};
use crate::trace::{drive, ConvergenceTrace, Evaluator, Recorder, StopRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParameterCase {
    /// `√μ ≤ Σ√L_j / m`: many components relative to conditioning.
    SmallMu,
    /// `√μ > Σ√L_j / m`.
    LargeMu,
}

#[derive(Debug, Clone)]
pub struct SsnmConfig {
    pub lambda: f64,
    pub eta: f64,
    pub tau: Vec<f64>,
    pub dist: SamplingDistribution,
    /// Whether the step-size inequality was verified for these parameters.
    pub certified: bool,
    pub case: Option<ParameterCase>,
}

impl SsnmConfig {
    /// Builds a config and checks `τ_i ∈ (0,1)` and
    /// `1/η − Σ_j τ_jL_j ≥ L_iτ_i/(π_i(1−τ_i))` for every `i`.
    pub fn certified(lambda: f64, eta: f64, dist: SamplingDistribution, smoothness: &[f64]) -> Result<Self> {
        let mut cfg = Self::unchecked(lambda, eta, dist)?;
        cfg.check(smoothness)?;
        cfg.certified = true;
        Ok(cfg)
    }

    /// Only requires `0 < τ_i ≤ 1`; used for rate-grid points off the certified setting.
    pub fn unchecked(lambda: f64, eta: f64, dist: SamplingDistribution) -> Result<Self> {
        if !(lambda > 0.0) || !(eta > 0.0) || !lambda.is_finite() || !eta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "need λ, η > 0, got λ = {lambda}, η = {eta}"
            )));
        }
        let tau: Vec<f64> = dist.probs().iter().map(|p| lambda / p).collect();
        if let Some((i, t)) = tau.iter().enumerate().find(|(_, t)| **t > 1.0) {
            return Err(Error::ParameterCheck(format!(
                "τ_{i} = λ/π_{i} = {t} exceeds 1"
            )));
        }
        Ok(Self {
            lambda,
            eta,
            tau,
            dist,
            certified: false,
            case: None,
        })
    }

    pub fn check(&self, smoothness: &[f64]) -> Result<()> {
        check_dim(self.tau.len(), smoothness.len())?;
        let lhs = 1.0 / self.eta
            - self
                .tau
                .iter()
                .zip(smoothness)
                .map(|(t, l)| t * l)
                .sum::<f64>();
        for (i, (&t, &l)) in self.tau.iter().zip(smoothness).enumerate() {
            if t >= 1.0 {
                return Err(Error::ParameterCheck(format!("τ_{i} = {t} must be below 1")));
            }
            let rhs = l * t / (self.dist.prob(i) * (1.0 - t));
            if lhs < rhs * (1.0 - 1e-12) {
                return Err(Error::ParameterCheck(format!(
                    "1/η − Σ τ_jL_j = {lhs} < L_iτ_i/(π_i(1−τ_i)) = {rhs} at i = {i}"
                )));
            }
        }
        Ok(())
    }

    /// Grid point: `η·eta_scale`, `λ·lambda_scale`, same sampling law.
    pub fn scaled(&self, eta_scale: f64, lambda_scale: f64) -> Result<Self> {
        let mut cfg = Self::unchecked(self.lambda * lambda_scale, self.eta * eta_scale, self.dist.clone())?;
        cfg.case = self.case;
        Ok(cfg)
    }

    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }
}

/// Case I/II parameter choice, certified against the step-size inequality.
pub fn ssnm_parameters(smoothness: &[f64], mu_total: f64) -> Result<SsnmConfig> {
    let dist = ssnm_distribution(smoothness)?;
    parameters_with(smoothness, mu_total, dist)
}

/// Plain SSNM: uniform sampling and every `L_i` replaced by `max L_i`.
pub fn uniform_ssnm_parameters(smoothness: &[f64], mu_total: f64) -> Result<SsnmConfig> {
    if smoothness.is_empty() {
        return Err(Error::Empty("smoothness constants"));
    }
    let lmax = smoothness.iter().copied().fold(0.0, f64::max);
    let flat = vec![lmax; smoothness.len()];
    let dist = SamplingDistribution::uniform(smoothness.len())?;
    parameters_with(&flat, mu_total, dist)
}

fn parameters_with(smoothness: &[f64], mu_total: f64, dist: SamplingDistribution) -> Result<SsnmConfig> {
    if !(mu_total > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "total strong convexity must be positive, got {mu_total}"
        )));
    }
    let m = smoothness.len() as f64;
    let root_sum: f64 = smoothness.iter().map(|l| l.sqrt()).sum();
    let root_mu = mu_total.sqrt();
    let (lambda, eta, case) = if root_mu <= root_sum / m {
        (root_mu / (4.0 * root_sum), 1.0 / (4.0 * root_mu * root_sum), ParameterCase::SmallMu)
    } else {
        (1.0 / (4.0 * m), 1.0 / (4.0 * mu_total * m), ParameterCase::LargeMu)
    };
    let mut cfg = SsnmConfig::certified(lambda, eta, dist, smoothness)?;
    cfg.case = Some(case);
    Ok(cfg)
}

/// Iterate, anchor table and the running sum of stored anchor gradients.
#[derive(Debug, Clone)]
pub struct SsnmState {
    pub x: Vector,
    pub anchors: Vec<Vector>,
    pub stored: Vec<Vector>,
    pub running_sum: Vector,
    pub iteration: u64,
}

impl SsnmState {
    /// All anchors at `x0`; costs `m` gradient calls.
    pub fn new(problem: &Problem, x0: &Vector) -> Result<Self> {
        check_dim(problem.dim(), x0.len())?;
        let mut stored = Vec::with_capacity(problem.len());
        for i in 0..problem.len() {
            stored.push(problem.hat_grad_component(i, x0)?);
        }
        Ok(Self::from_parts(x0.clone(), vec![x0.clone(); problem.len()], stored))
    }

    /// Arbitrary anchors with their stored gradients supplied by the caller.
    pub fn from_parts(x: Vector, anchors: Vec<Vector>, stored: Vec<Vector>) -> Self {
        let n = x.len();
        let running_sum = stored.iter().fold(Vector::zeros(n), |acc, g| acc + g);
        Self {
            x,
            anchors,
            stored,
            running_sum,
            iteration: 0,
        }
    }

    pub fn refresh_sum(&mut self) {
        self.running_sum.fill(0.0);
        for g in &self.stored {
            self.running_sum += g;
        }
    }

    pub fn sum_drift(&self) -> f64 {
        let exact = self
            .stored
            .iter()
            .fold(Vector::zeros(self.x.len()), |acc, g| acc + g);
        (exact - &self.running_sum).norm()
    }
}

/// `y_i = τ_i x + (1−τ_i)φ_i`.
pub fn momentum_point(state: &SsnmState, config: &SsnmConfig, i: usize) -> Vector {
    let t = config.tau[i];
    &state.x * t + &state.anchors[i] * (1.0 - t)
}

/// The estimator for a given sampled index; one gradient call.
pub fn ssnm_estimator(problem: &Problem, state: &SsnmState, config: &SsnmConfig, i: usize) -> Result<Vector> {
    let y = momentum_point(state, config, i);
    let g = problem.hat_grad_component(i, &y)?;
    let mut est = (g - &state.stored[i]) / config.dist.prob(i);
    est += &state.running_sum;
    Ok(est)
}

/// One iteration; exactly two component-gradient calls.
pub fn ssnm_step(problem: &Problem, state: &mut SsnmState, config: &SsnmConfig, rng: &mut SeededRng) -> Result<()> {
    let m = problem.len();
    let i = config.dist.sample(rng);
    let est = ssnm_estimator(problem, state, config, i)?;
    prox_step_in_place(&mut state.x, &est, config.eta, problem.mu_total(), problem.set())?;

    let j = config.dist.sample(rng);
    let t = config.tau[j];
    let anchor = &mut state.anchors[j];
    *anchor *= 1.0 - t;
    anchor.axpy(t, &state.x, 1.0);
    let fresh = problem.hat_grad_component(j, &state.anchors[j])?;
    state.running_sum += &fresh;
    state.running_sum -= &state.stored[j];
    state.stored[j] = fresh;

    state.iteration += 1;
    if state.iteration % m as u64 == 0 {
        state.refresh_sum();
    }
    Ok(())
}

/// Runs from `x0` until the stop rule fires. Returns the last iterate.
pub fn run_ssnm(
    problem: &Problem,
    config: &SsnmConfig,
    x0: &Vector,
    stop: StopRule,
    seed: u64,
    evaluator: &dyn Evaluator,
) -> Result<ConvergenceTrace> {
    run_named("gssnm", problem, config, x0, stop, seed, evaluator)
}

pub(crate) fn run_named(
    name: &str,
    problem: &Problem,
    config: &SsnmConfig,
    x0: &Vector,
    stop: StopRule,
    seed: u64,
    evaluator: &dyn Evaluator,
) -> Result<ConvergenceTrace> {
    if !(problem.mu_total() > 0.0) {
        return Err(Error::InvalidParameter("SSNM needs Σμ_i > 0".into()));
    }
    check_dim(problem.len(), config.len())?;
    check_dim(problem.dim(), x0.len())?;
    let recorder = Recorder::new(name, problem.counter(), problem.len(), stop, evaluator)?;
    let mut rng = SeededRng::new(seed);
    let mut state: Option<SsnmState> = None;
    drive(recorder, x0, |_| {
        let st = match state.as_mut() {
            Some(s) => s,
            None => state.insert(SsnmState::new(problem, x0)?),
        };
        ssnm_step(problem, st, config, &mut rng)?;
        Ok(st.x.clone())
    })
}

/// `Σ_i π_i · estimator(i)` by enumeration; equals `Σ_i ∇ĝ_i(y_i)` in exact arithmetic.
pub fn expected_ssnm_estimate(problem: &Problem, state: &SsnmState, config: &SsnmConfig) -> Result<Vector> {
    let mut total = Vector::zeros(problem.dim());
    for i in 0..problem.len() {
        total.axpy(config.dist.prob(i), &ssnm_estimator(problem, state, config, i)?, 1.0);
    }
    Ok(total)
}

/// Both sides of the SSNM variance bound at a fixed state, by enumeration:
/// `E‖∇̃ − Σ∇ĝ_i(y_i)‖²` and `Σ (2L_i/π_i)(ĝ_i(φ_i) − ĝ_i(y_i) − ⟨∇ĝ_i(y_i), φ_i − y_i⟩)`.
/// Uncounted.
pub fn ssnm_variance_sides(problem: &Problem, state: &SsnmState, config: &SsnmConfig) -> (f64, f64) {
    let m = problem.len();
    let ys: Vec<Vector> = (0..m).map(|i| momentum_point(state, config, i)).collect();
    let grads: Vec<Vector> = (0..m).map(|i| problem.hat_gradient_uncounted(i, &ys[i])).collect();
    let mean = grads.iter().fold(Vector::zeros(problem.dim()), |acc, g| acc + g);
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for i in 0..m {
        let p = config.dist.prob(i);
        let est = (&grads[i] - &state.stored[i]) / p + &state.running_sum;
        lhs += p * (est - &mean).norm_squared();
        let breg = problem.hat_value(i, &state.anchors[i])
            - problem.hat_value(i, &ys[i])
            - grads[i].dot(&(&state.anchors[i] - &ys[i]));
        rhs += 2.0 * problem.spec(i).smoothness / p * breg;
    }
    (lhs, rhs)
}

/// Anchor suboptimality `D` and squared distance `P` for a known optimum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovDiagnostics {
    pub anchor_gap: f64,
    pub distance_sq: f64,
}

impl LyapunovDiagnostics {
    /// `D/λ + ((1+ημ)/(2η))·P`, the potential contracted by `(1+ημ)⁻¹` in expectation.
    pub fn potential(&self, config: &SsnmConfig, mu: f64) -> f64 {
        self.anchor_gap / config.lambda + (1.0 + config.eta * mu) / (2.0 * config.eta) * self.distance_sq
    }
}

/// `D = Σ F_i(φ_i) − F(x*) − Σ⟨∇F_i(x*), φ_i − x*⟩` with `F_i = ĝ_i + h/m`. Uncounted.
pub fn lyapunov(problem: &Problem, state: &SsnmState, x_star: &Vector) -> LyapunovDiagnostics {
    let m = problem.len() as f64;
    let mu = problem.mu_total();
    let f_i = |i: usize, x: &Vector| problem.hat_value(i, x) + 0.5 * mu / m * x.norm_squared();
    let mut d = -problem.objective(x_star);
    for (i, phi) in state.anchors.iter().enumerate() {
        let grad = problem.hat_gradient_uncounted(i, x_star) + x_star * (mu / m);
        d += f_i(i, phi) - grad.dot(&(phi - x_star));
    }
    LyapunovDiagnostics {
        anchor_gap: d,
        distance_sq: (&state.x - x_star).norm_squared(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_mu_case_example() {
        let cfg = ssnm_parameters(&[1.0; 4], 1.0 / 16.0).unwrap();
        assert_eq!(cfg.case, Some(ParameterCase::SmallMu));
        assert!((cfg.lambda - 1.0 / 64.0).abs() < 1e-15);
        assert!((cfg.eta - 0.25).abs() < 1e-15);
        assert!(cfg.certified);
    }

    #[test]
    fn large_mu_case_example() {
        let cfg = ssnm_parameters(&[1.0, 1.0], 4.0).unwrap();
        assert_eq!(cfg.case, Some(ParameterCase::LargeMu));
        assert!((cfg.lambda - 0.125).abs() < 1e-15);
        assert!((cfg.eta - 1.0 / 32.0).abs() < 1e-15);
    }

    #[test]
    fn single_component_tau_is_lambda() {
        for mu in [1e-4, 0.5, 3.0, 100.0] {
            let cfg = ssnm_parameters(&[5.0], mu).unwrap();
            assert!((cfg.tau[0] - cfg.lambda).abs() < 1e-15);
            assert!(cfg.tau[0] < 1.0);
        }
    }

    #[test]
    fn violated_inequality_is_reported() {
        let dist = SamplingDistribution::uniform(2).unwrap();
        let err = SsnmConfig::certified(0.1, 10.0, dist, &[1.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::ParameterCheck(_)));
    }

    #[test]
    fn rejects_nonpositive_mu() {
        assert!(ssnm_parameters(&[1.0], 0.0).is_err());
    }
}
