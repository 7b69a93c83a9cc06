//! Katyusha-style accelerated method with a pluggable snapshot estimator.
//!
//! The momentum skeleton is fixed: couple `x = τ₁z + τ₂x̃ + (1−τ₁−τ₂)y`,
//! take a long mirror step on `z` and a short gradient step on `y`, and
//! refresh the snapshot `x̃` every `2m` inner iterations with a
//! `(1+ασ)^j`-weighted average of the `y` iterates. The estimator of
//! `∇F̂(x)` comes from a [`SnapshotEstimator`]: the finite-sum SVRG
//! estimator lives here, the composite estimators in `composite`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::Vector;
use crate::problems::{OracleCounter, Problem};
use crate::sampling::{katyusha_distribution, SamplingDistribution, SeededRng};
use crate::trace::{drive, ConvergenceTrace, Evaluator, Recorder, StopRule};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KatyushaConfig {
    pub sigma: f64,
    pub l_prime: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub alpha: f64,
    pub epoch_len: usize,
}

impl KatyushaConfig {
    /// `τ₂ = 1/2`, `τ₁ = min{√(2mσ)/√(3L'), 1/2}`, `α = 1/(3τ₁L')`, epochs of `2m`.
    pub fn new(sigma: f64, l_prime: f64, m: usize) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidParameter(format!("σ must be positive, got {sigma}")));
        }
        if !(l_prime > 0.0) || !l_prime.is_finite() {
            return Err(Error::InvalidParameter(format!("L' must be positive, got {l_prime}")));
        }
        if m == 0 {
            return Err(Error::Empty("components"));
        }
        let tau2 = 0.5;
        let tau1 = ((2.0 * m as f64 * sigma).sqrt() / (3.0 * l_prime).sqrt()).min(0.5);
        Ok(Self {
            sigma,
            l_prime,
            tau1,
            tau2,
            alpha: 1.0 / (3.0 * tau1 * l_prime),
            epoch_len: 2 * m,
        })
    }

    /// Rate-grid point: the smoothness estimate `L'` is divided by `scale`,
    /// so every step length grows with it while the momentum structure is kept.
    pub fn scaled(&self, scale: f64) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(Error::InvalidParameter(format!("scale must be positive, got {scale}")));
        }
        Self::new(self.sigma, self.l_prime / scale, self.epoch_len / 2)
    }

    /// `(1+ασ)^j` for `j = 0..2m`, normalized to sum to one.
    /// Finite-sum constants: `σ = Σμ_i`, `L' = max{L, ΣL_i}`.
    pub fn for_finite_sum(problem: &Problem) -> Result<Self> {
        let total: f64 = problem.smoothness().iter().sum();
        Self::new(problem.mu_total(), problem.sum_smoothness().max(total), problem.len())
    }

    pub fn snapshot_weights(&self) -> Vec<f64> {
        let r = 1.0 + self.alpha * self.sigma;
        let raw: Vec<f64> = (0..self.epoch_len as i32).map(|j| r.powi(j)).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / total).collect()
    }
}

/// Supplies an unbiased estimate of `∇F̂(x)` relative to an epoch snapshot.
pub trait SnapshotEstimator {
    fn dim(&self) -> usize;
    fn components(&self) -> usize;
    fn distribution(&self) -> &SamplingDistribution;
    /// Memorizes whatever the estimator needs at `x̃`.
    fn snapshot(&mut self, x_tilde: &Vector) -> Result<()>;
    fn estimate(&mut self, x: &Vector, i: usize) -> Result<Vector>;
}

/// SVRG estimator `(∇ĝ_i(x) − ∇ĝ_i(x̃))/π_i + Σ_j ∇ĝ_j(x̃)` for a plain finite sum.
pub struct SvrgEstimator<'a> {
    problem: &'a Problem,
    dist: SamplingDistribution,
    table: Vec<Vector>,
    sum: Vector,
}

impl<'a> SvrgEstimator<'a> {
    pub fn new(problem: &'a Problem, dist: SamplingDistribution) -> Result<Self> {
        check_dim(problem.len(), dist.len())?;
        if !problem.set().is_whole_space() {
            return Err(Error::InvalidParameter(
                "the accelerated snapshot method is implemented for unconstrained problems".into(),
            ));
        }
        Ok(Self {
            problem,
            dist,
            table: Vec::new(),
            sum: Vector::zeros(problem.dim()),
        })
    }

    /// Sampling `∝ L_i`, the composite law with every outer bound equal to one.
    pub fn proportional(problem: &'a Problem) -> Result<Self> {
        let ones = vec![1.0; problem.len()];
        Self::new(problem, katyusha_distribution(&ones, &problem.smoothness())?)
    }

    pub fn uniform(problem: &'a Problem) -> Result<Self> {
        Self::new(problem, SamplingDistribution::uniform(problem.len())?)
    }
}

impl SnapshotEstimator for SvrgEstimator<'_> {
    fn dim(&self) -> usize {
        self.problem.dim()
    }

    fn components(&self) -> usize {
        self.problem.len()
    }

    fn distribution(&self) -> &SamplingDistribution {
        &self.dist
    }

    fn snapshot(&mut self, x_tilde: &Vector) -> Result<()> {
        self.table.clear();
        self.sum.fill(0.0);
        for i in 0..self.problem.len() {
            let g = self.problem.hat_grad_component(i, x_tilde)?;
            self.sum += &g;
            self.table.push(g);
        }
        Ok(())
    }

    fn estimate(&mut self, x: &Vector, i: usize) -> Result<Vector> {
        if self.table.is_empty() {
            return Err(Error::InvalidParameter("estimate requested before the first snapshot".into()));
        }
        let g = self.problem.hat_grad_component(i, x)?;
        let mut est = (g - &self.table[i]) / self.dist.prob(i);
        est += &self.sum;
        Ok(est)
    }
}

#[derive(Debug, Clone)]
pub struct KatyushaState {
    pub y: Vector,
    pub z: Vector,
    pub snapshot: Vector,
    pub inner: usize,
    weighted: Vector,
    needs_snapshot: bool,
}

impl KatyushaState {
    pub fn new(x0: &Vector) -> Self {
        Self {
            y: x0.clone(),
            z: x0.clone(),
            snapshot: x0.clone(),
            inner: 0,
            weighted: Vector::zeros(x0.len()),
            needs_snapshot: true,
        }
    }
}

/// One inner iteration (taking a snapshot first when an epoch starts).
pub fn katyusha_step<E: SnapshotEstimator + ?Sized>(
    est: &mut E,
    state: &mut KatyushaState,
    config: &KatyushaConfig,
    weights: &[f64],
    rng: &mut SeededRng,
) -> Result<()> {
    if state.needs_snapshot {
        est.snapshot(&state.snapshot)?;
        state.weighted.fill(0.0);
        state.inner = 0;
        state.needs_snapshot = false;
    }
    let c = config;
    let x = &state.z * c.tau1 + &state.snapshot * c.tau2 + &state.y * (1.0 - c.tau1 - c.tau2);
    let i = est.distribution().sample(rng);
    let g = est.estimate(&x, i)?;

    // z ← argmin ‖z − z_k‖²/(2α) + ⟨g, z⟩ + (σ/2)‖z‖²
    state.z.axpy(-c.alpha, &g, 1.0);
    state.z /= 1.0 + c.alpha * c.sigma;
    // y ← argmin (3L'/2)‖y − x‖² + ⟨g, y⟩ + (σ/2)‖y‖²
    let three_l = 3.0 * c.l_prime;
    state.y = (x * three_l - g) / (three_l + c.sigma);

    state.weighted.axpy(weights[state.inner], &state.y, 1.0);
    state.inner += 1;
    if state.inner == c.epoch_len {
        state.snapshot.copy_from(&state.weighted);
        state.needs_snapshot = true;
    }
    Ok(())
}

/// Runs epochs until the stop rule fires; the reported iterate is the latest snapshot.
/// `counter` is the gradient counter of the components the estimator queries.
pub fn run_katyusha<E: SnapshotEstimator + ?Sized>(
    name: &str,
    est: &mut E,
    counter: &OracleCounter,
    config: &KatyushaConfig,
    x0: &Vector,
    stop: StopRule,
    seed: u64,
    evaluator: &dyn Evaluator,
) -> Result<ConvergenceTrace> {
    check_dim(est.dim(), x0.len())?;
    if config.epoch_len != 2 * est.components() {
        return Err(Error::InvalidParameter(format!(
            "epoch length {} does not match 2m = {}",
            config.epoch_len,
            2 * est.components()
        )));
    }
    let weights = config.snapshot_weights();
    let mut state = KatyushaState::new(x0);
    let mut rng = SeededRng::new(seed);
    let recorder = Recorder::new(name, counter, est.components(), stop, evaluator)?;
    drive(recorder, x0, |_| {
        katyusha_step(est, &mut state, config, &weights, &mut rng)?;
        Ok(state.snapshot.clone())
    })
}
