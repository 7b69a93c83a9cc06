//! Composite objectives `F(x) = f(g_1(x), …, g_m(x))` with a coordinatewise
//! increasing convex outer `f` and strongly convex quadratic inners.
//!
//! With `b_i ≤ ∂_i f ≤ B_i` on the region of interest, `F` is
//! `σ = Σ b_iμ_i`-strongly convex. The accelerated snapshot method runs on
//! `F̂ = F − (σ/2)‖·‖²` with one of two estimators:
//!
//! * the general estimator, which needs every `∂_j f` and every `g_j` value
//!   per iteration but only one inner gradient, sampled `∝ B_iL_i`;
//! * the reduced estimator built on the per-component pieces
//!   `∇̂_iF(x) = ∂_i f(g(x))∇g_i(x) − b_iμ_i x`, sampled `∝ l_i`, valid when
//!   the pieces satisfy the integral co-coercivity condition with constants `l_i`.
//!
//! Objective gaps are computed from the offset-free parts of the inners so
//! that instances with large constant terms keep full precision.

use std::fmt::Debug;

use gauss_quad::legendre::GaussLegendre;
use nalgebra::SymmetricEigen;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_index, Error, Result};
use crate::linalg::{eig_extremes, gaussian_vector, uniform_spectrum, with_spectrum, Matrix, Vector};
use crate::problems::{ComponentSpec, OracleCounter, Problem, Quadratic, QuadraticSum};
use crate::sampling::{katyusha_distribution, reduced_distribution, SamplingDistribution, SeededRng};
use crate::solvers::{run_agd_with, run_katyusha, AgdConfig, KatyushaConfig, SnapshotEstimator};
use crate::trace::{ConvergenceTrace, Evaluator, Metrics, StopRule};

/// Outer function `f : ℝ^m → ℝ`, convex and increasing in each coordinate.
pub trait OuterFunction: Send + Sync + Debug {
    fn arity(&self) -> usize;

    fn value(&self, g: &Vector) -> f64;

    fn partial(&self, g: &Vector, i: usize) -> f64;

    fn partials(&self, g: &Vector) -> Vector {
        Vector::from_fn(self.arity(), |i, _| self.partial(g, i))
    }

    fn hessian(&self, g: &Vector) -> Matrix;

    /// `f(base + u) − f(base + v)`. Override when `base` is large compared to `u`, `v`.
    fn difference(&self, base: &Vector, u: &Vector, v: &Vector) -> f64 {
        self.value(&(base + u)) - self.value(&(base + v))
    }

    fn in_domain(&self, _g: &Vector) -> bool {
        true
    }

    fn name(&self) -> &str;
}

/// `f(y) = Σ y_i`: the plain finite sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SumOuter {
    pub m: usize,
}

impl OuterFunction for SumOuter {
    fn arity(&self) -> usize {
        self.m
    }

    fn value(&self, g: &Vector) -> f64 {
        g.sum()
    }

    fn partial(&self, _g: &Vector, _i: usize) -> f64 {
        1.0
    }

    fn hessian(&self, _g: &Vector) -> Matrix {
        Matrix::zeros(self.m, self.m)
    }

    fn difference(&self, _base: &Vector, u: &Vector, v: &Vector) -> f64 {
        (u - v).sum()
    }

    fn name(&self) -> &str {
        "sum"
    }
}

/// `f(y) = yᵀQy` with `Q` symmetric positive definite and entrywise positive;
/// increasing wherever `Qy > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticOuter {
    q: Matrix,
}

impl QuadraticOuter {
    pub fn new(q: Matrix) -> Result<Self> {
        if !q.is_square() {
            return Err(Error::InvalidParameter("outer matrix must be square".into()));
        }
        if q.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidParameter("outer matrix must be entrywise positive".into()));
        }
        let (lo, _) = eig_extremes(&q);
        if !(lo > 0.0) {
            return Err(Error::InvalidParameter(format!("outer matrix is not positive definite (λ_min = {lo})")));
        }
        Ok(Self { q })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.q
    }
}

impl OuterFunction for QuadraticOuter {
    fn arity(&self) -> usize {
        self.q.nrows()
    }

    fn value(&self, g: &Vector) -> f64 {
        g.dot(&(&self.q * g))
    }

    fn partial(&self, g: &Vector, i: usize) -> f64 {
        2.0 * self.q.row(i).transpose().dot(g)
    }

    fn partials(&self, g: &Vector) -> Vector {
        &self.q * g * 2.0
    }

    fn hessian(&self, _g: &Vector) -> Matrix {
        &self.q * 2.0
    }

    fn difference(&self, base: &Vector, u: &Vector, v: &Vector) -> f64 {
        // (u − v)ᵀQ(u + v + 2·base)
        let s = u + v + base * 2.0;
        (u - v).dot(&(&self.q * s))
    }

    fn in_domain(&self, g: &Vector) -> bool {
        (&self.q * g).iter().all(|v| *v > 0.0)
    }

    fn name(&self) -> &str {
        "quadratic"
    }
}

/// Ball on which the outer bounds were certified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Debug)]
pub struct CompositeProblem {
    outer: Box<dyn OuterFunction>,
    inner: Problem,
    parts: Vec<Quadratic>,
    offsets: Vector,
    lower: Vec<f64>,
    upper: Vec<f64>,
    smoothness: f64,
    reduced: Option<Vec<f64>>,
    region: Option<Region>,
}

impl CompositeProblem {
    /// `lower`/`upper` are the bounds `b_i ≤ ∂_i f ≤ B_i`; `smoothness` is `L` of `F`.
    pub fn new(
        outer: Box<dyn OuterFunction>,
        parts: Vec<Quadratic>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        smoothness: f64,
    ) -> Result<Self> {
        let m = parts.len();
        if m == 0 {
            return Err(Error::Empty("inner components"));
        }
        check_dim(m, outer.arity())?;
        check_dim(m, lower.len())?;
        check_dim(m, upper.len())?;
        for i in 0..m {
            if !(lower[i] > 0.0) || lower[i] > upper[i] || !upper[i].is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "need 0 < b_i ≤ B_i, got b_{i} = {}, B_{i} = {}",
                    lower[i], upper[i]
                )));
            }
        }
        if !(smoothness > 0.0) || !smoothness.is_finite() {
            return Err(Error::InvalidParameter(format!("L must be positive, got {smoothness}")));
        }
        let offsets = Vector::from_iterator(m, parts.iter().map(|q| q.r));
        let inner = Problem::new(QuadraticSum::new(parts.clone())?);
        Ok(Self {
            outer,
            inner,
            parts,
            offsets,
            lower,
            upper,
            smoothness,
            reduced: None,
            region: None,
        })
    }

    /// Finite sum `Σ g_i` as a composite with `f = Σ y_i`: `b = B = 1`, `L = λ_max(ΣP_i)`.
    pub fn finite_sum(parts: Vec<Quadratic>) -> Result<Self> {
        let m = parts.len();
        let sum = QuadraticSum::new(parts.clone())?;
        let l = eig_extremes(&sum.hessian()).1;
        Self::new(Box::new(SumOuter { m }), parts, vec![1.0; m], vec![1.0; m], l)
    }

    /// Attaches reduced-estimator constants `l_i`.
    pub fn with_reduced(mut self, l: Vec<f64>) -> Result<Self> {
        check_dim(self.len(), l.len())?;
        if let Some(i) = l.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("l_{i} must be positive, got {}", l[i])));
        }
        self.reduced = Some(l);
        Ok(self)
    }

    pub fn with_region(mut self, region: Region) -> Result<Self> {
        check_dim(self.dim(), region.center.len())?;
        self.region = Some(region);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn outer(&self) -> &dyn OuterFunction {
        self.outer.as_ref()
    }

    /// The inner components behind the counted oracle.
    pub fn inner(&self) -> &Problem {
        &self.inner
    }

    pub fn parts(&self) -> &[Quadratic] {
        &self.parts
    }

    pub fn counter(&self) -> &OracleCounter {
        self.inner.counter()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    pub fn reduced(&self) -> Option<&[f64]> {
        self.reduced.as_deref()
    }

    pub fn region(&self) -> Option<&Region> {
        self.region.as_ref()
    }

    pub fn inner_spec(&self, i: usize) -> ComponentSpec {
        self.inner.spec(i)
    }

    fn mu(&self, i: usize) -> f64 {
        self.inner.spec(i).strong_convexity
    }

    /// `σ = Σ b_iμ_i`.
    pub fn sigma(&self) -> f64 {
        strong_convexity_constant(&self.lower, &self.inner.specs().iter().map(|s| s.strong_convexity).collect::<Vec<_>>())
    }

    /// `max{L, Σ B_iL_i}`.
    pub fn l_prime(&self) -> f64 {
        let s: f64 = (0..self.len()).map(|i| self.upper[i] * self.inner.spec(i).smoothness).sum();
        self.smoothness.max(s)
    }

    /// `max{L, Σ l_i}` when reduced constants are attached.
    pub fn l_prime_reduced(&self) -> Option<f64> {
        self.reduced.as_ref().map(|l| self.smoothness.max(l.iter().sum()))
    }

    /// `g_i(x) − r_i` for every `i`, uncounted.
    pub fn excess(&self, x: &Vector) -> Vector {
        Vector::from_iterator(self.len(), self.parts.iter().map(|q| 0.5 * x.dot(&(&q.p * x)) + q.c.dot(x)))
    }

    /// `(g_1(x), …, g_m(x))`, uncounted.
    pub fn inner_values_uncounted(&self, x: &Vector) -> Vector {
        &self.offsets + self.excess(x)
    }

    /// All inner values; counts `m` value calls.
    pub fn inner_values(&self, x: &Vector) -> Result<Vector> {
        check_dim(self.dim(), x.len())?;
        self.counter().record_values(self.len() as u64);
        let g = self.inner_values_uncounted(x);
        if !self.outer.in_domain(&g) {
            return Err(Error::Domain("inner values left the domain of the outer function".into()));
        }
        Ok(g)
    }

    /// All `∂_i f(g)`; counts `m` partials.
    pub fn partials(&self, g: &Vector) -> Vector {
        self.counter().record_partials(self.len() as u64);
        self.outer.partials(g)
    }

    /// One `∂_i f(g)`; counts one partial.
    pub fn partial(&self, g: &Vector, i: usize) -> f64 {
        self.counter().record_partials(1);
        self.outer.partial(g, i)
    }

    /// `F(x)`, uncounted. Loses precision for large offsets; prefer [`Self::objective_difference`].
    pub fn objective(&self, x: &Vector) -> f64 {
        self.outer.value(&self.inner_values_uncounted(x))
    }

    /// `F(x) − F(y)` evaluated stably, uncounted.
    pub fn objective_difference(&self, x: &Vector, y: &Vector) -> f64 {
        self.outer.difference(&self.offsets, &self.excess(x), &self.excess(y))
    }

    /// `∇F(x) = Σ ∂_i f(g(x))∇g_i(x)`; counts `m` inner gradients, `m` values and `m` partials.
    pub fn full_gradient(&self, x: &Vector) -> Result<Vector> {
        let g = self.inner_values(x)?;
        let d = self.partials(&g);
        let mut total = Vector::zeros(self.dim());
        let mut gi = Vector::zeros(self.dim());
        for i in 0..self.len() {
            self.inner.grad_component_into(i, x, &mut gi)?;
            total.axpy(d[i], &gi, 1.0);
        }
        Ok(total)
    }

    pub fn gradient_uncounted(&self, x: &Vector) -> Vector {
        let d = self.outer.partials(&self.inner_values_uncounted(x));
        let mut total = Vector::zeros(self.dim());
        for (i, q) in self.parts.iter().enumerate() {
            total.axpy(d[i], &q.gradient(x), 1.0);
        }
        total
    }

    /// `∇F̂(x) = ∇F(x) − σx`, uncounted.
    pub fn hat_gradient_uncounted(&self, x: &Vector) -> Vector {
        self.gradient_uncounted(x) - x * self.sigma()
    }

    /// `∇̂_iF(x) = ∂_i f(g(x))∇g_i(x) − b_iμ_i x`, uncounted.
    pub fn piece_uncounted(&self, i: usize, x: &Vector) -> Vector {
        let d = self.outer.partial(&self.inner_values_uncounted(x), i);
        self.parts[i].gradient(x) * d - x * (self.lower[i] * self.mu(i))
    }

    /// `∇²F(x) = Σ ∂_i f P_i + Jᵀ∇²f J`, uncounted.
    pub fn hessian_uncounted(&self, x: &Vector) -> Matrix {
        let n = self.dim();
        let m = self.len();
        let g = self.inner_values_uncounted(x);
        let d = self.outer.partials(&g);
        let mut h = Matrix::zeros(n, n);
        let mut jac = Matrix::zeros(m, n);
        for (i, q) in self.parts.iter().enumerate() {
            h += &q.p * d[i];
            jac.row_mut(i).copy_from(&q.gradient(x).transpose());
        }
        h += jac.transpose() * self.outer.hessian(&g) * &jac;
        h
    }

    /// Newton's method from `x0`, used as the high-accuracy reference solve.
    pub fn newton_minimize(&self, x0: &Vector, tol: f64, max_iter: usize) -> Result<Vector> {
        check_dim(self.dim(), x0.len())?;
        let mut x = x0.clone();
        for _ in 0..max_iter {
            let grad = self.gradient_uncounted(&x);
            if grad.norm() <= tol {
                return Ok(x);
            }
            let step = self
                .hessian_uncounted(&x)
                .cholesky()
                .ok_or_else(|| Error::Singular("Hessian of the composite objective is not positive definite".into()))?
                .solve(&grad);
            x -= step;
        }
        let g = self.gradient_uncounted(&x).norm();
        if g <= tol * 1e3 {
            Ok(x)
        } else {
            Err(Error::Domain(format!("Newton reference solve stalled at ‖∇F‖ = {g:e}")))
        }
    }

    /// Spot-checks `∂_i f > 0` at the given points.
    pub fn is_monotone_at(&self, points: &[Vector]) -> bool {
        points
            .iter()
            .all(|x| self.outer.partials(&self.inner_values_uncounted(x)).iter().all(|v| *v > 0.0))
    }
}

/// `σ = Σ b_iμ_i`.
pub fn strong_convexity_constant(lower: &[f64], mu: &[f64]) -> f64 {
    lower.iter().zip(mu).map(|(b, m)| b * m).sum()
}

/// General estimator
/// `Σ_j ∂_j f (∇ĝ_j(x̃) + μ_j x) + (∂_i f/π_i)(∇ĝ_i(x) − ∇ĝ_i(x̃)) − σx`.
pub struct GeneralEstimator<'a> {
    problem: &'a CompositeProblem,
    dist: SamplingDistribution,
    table: Vec<Vector>,
    mu: Vec<f64>,
    sigma: f64,
}

impl<'a> GeneralEstimator<'a> {
    /// Sampling `∝ B_iL_i`.
    pub fn new(problem: &'a CompositeProblem) -> Result<Self> {
        let l: Vec<f64> = (0..problem.len()).map(|i| problem.inner_spec(i).smoothness).collect();
        let dist = katyusha_distribution(problem.upper(), &l)?;
        Ok(Self {
            problem,
            dist,
            table: Vec::new(),
            mu: (0..problem.len()).map(|i| problem.mu(i)).collect(),
            sigma: problem.sigma(),
        })
    }
}

impl SnapshotEstimator for GeneralEstimator<'_> {
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
        for j in 0..self.problem.len() {
            self.table.push(self.problem.inner().hat_grad_component(j, x_tilde)?);
        }
        Ok(())
    }

    fn estimate(&mut self, x: &Vector, i: usize) -> Result<Vector> {
        check_index(i, self.problem.len())?;
        if self.table.is_empty() {
            return Err(Error::InvalidParameter("estimate requested before the first snapshot".into()));
        }
        let g = self.problem.inner_values(x)?;
        let d = self.problem.partials(&g);
        let gi = self.problem.inner().hat_grad_component(i, x)?;
        let mut est = Vector::zeros(x.len());
        let mut coef = -self.sigma;
        for (j, t) in self.table.iter().enumerate() {
            est.axpy(d[j], t, 1.0);
            coef += d[j] * self.mu[j];
        }
        est.axpy(coef, x, 1.0);
        est.axpy(d[i] / self.dist.prob(i), &(gi - &self.table[i]), 1.0);
        Ok(est)
    }
}

/// Reduced estimator `∇F̂(x̃) + (∇̂_iF(x) − ∇̂_iF(x̃))/π_i`, sampling `∝ l_i`.
/// Only `∇F̂(x̃)` and the snapshot partials `∂_j f(g(x̃))` are kept between
/// iterations; each iteration evaluates `∇g_i` at both `x` and `x̃`.
pub struct ReducedEstimator<'a> {
    problem: &'a CompositeProblem,
    dist: SamplingDistribution,
    snapshot: Vector,
    full: Vector,
    snapshot_partials: Vector,
}

impl<'a> ReducedEstimator<'a> {
    pub fn new(problem: &'a CompositeProblem) -> Result<Self> {
        let l = problem
            .reduced()
            .ok_or_else(|| Error::InvalidParameter("reduced estimator needs certified constants l_i".into()))?;
        Ok(Self {
            problem,
            dist: reduced_distribution(l)?,
            snapshot: Vector::zeros(0),
            full: Vector::zeros(problem.dim()),
            snapshot_partials: Vector::zeros(0),
        })
    }

    fn piece(&self, i: usize, x: &Vector, d: f64) -> Result<Vector> {
        let mut p = self.problem.inner().grad_component(i, x)? * d;
        p.axpy(-self.problem.lower()[i] * self.problem.mu(i), x, 1.0);
        Ok(p)
    }
}

impl SnapshotEstimator for ReducedEstimator<'_> {
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
        let g = self.problem.inner_values(x_tilde)?;
        self.snapshot_partials = self.problem.partials(&g);
        self.full.fill(0.0);
        for j in 0..self.problem.len() {
            let p = self.piece(j, x_tilde, self.snapshot_partials[j])?;
            self.full += &p;
        }
        self.snapshot = x_tilde.clone();
        Ok(())
    }

    fn estimate(&mut self, x: &Vector, i: usize) -> Result<Vector> {
        check_index(i, self.problem.len())?;
        if self.snapshot.is_empty() {
            return Err(Error::InvalidParameter("estimate requested before the first snapshot".into()));
        }
        let g = self.problem.inner_values(x)?;
        let d = self.problem.partial(&g, i);
        let now = self.piece(i, x, d)?;
        let then = self.piece(i, &self.snapshot, self.snapshot_partials[i])?;
        Ok(&self.full + (now - then) / self.dist.prob(i))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    General,
    Reduced,
}

/// Katyusha constants for the chosen estimator: `σ = Σb_iμ_i`, `L' = max{L, ΣB_iL_i}`
/// (general) or `max{L, Σl_i}` (reduced).
pub fn composite_katyusha_config(problem: &CompositeProblem, kind: EstimatorKind) -> Result<KatyushaConfig> {
    let l_prime = match kind {
        EstimatorKind::General => problem.l_prime(),
        EstimatorKind::Reduced => problem
            .l_prime_reduced()
            .ok_or_else(|| Error::InvalidParameter("reduced estimator needs certified constants l_i".into()))?,
    };
    KatyushaConfig::new(problem.sigma(), l_prime, problem.len())
}

pub fn run_composite_katyusha(
    problem: &CompositeProblem,
    kind: EstimatorKind,
    config: &KatyushaConfig,
    x0: &Vector,
    stop: StopRule,
    seed: u64,
    evaluator: &dyn Evaluator,
) -> Result<ConvergenceTrace> {
    match kind {
        EstimatorKind::General => {
            let mut est = GeneralEstimator::new(problem)?;
            run_katyusha("gkatyusha", &mut est, problem.counter(), config, x0, stop, seed, evaluator)
        }
        EstimatorKind::Reduced => {
            let mut est = ReducedEstimator::new(problem)?;
            run_katyusha("gkatyusha-reduced", &mut est, problem.counter(), config, x0, stop, seed, evaluator)
        }
    }
}

/// Accelerated gradient with `s = 1/L`, momentum from `κ = L/σ`.
pub fn composite_agd_config(problem: &CompositeProblem) -> Result<AgdConfig> {
    AgdConfig::new(problem.smoothness(), problem.sigma().min(problem.smoothness()))
}

pub fn run_composite_agd(
    problem: &CompositeProblem,
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
        |_| {},
        config,
        x0,
        stop,
        evaluator,
    )
}

/// Stable `F(x) − F(x*)` and `‖x − x*‖`.
pub struct CompositeGapEvaluator<'a> {
    problem: &'a CompositeProblem,
    optimum: Vector,
}

impl<'a> CompositeGapEvaluator<'a> {
    pub fn new(problem: &'a CompositeProblem, optimum: Vector) -> Self {
        Self { problem, optimum }
    }
}

impl Evaluator for CompositeGapEvaluator<'_> {
    fn evaluate(&self, x: &Vector) -> Metrics {
        Metrics {
            gap: self.problem.objective_difference(x, &self.optimum),
            distance: Some((x - &self.optimum).norm()),
            infeasibility: None,
        }
    }
}

/// `Σ_i π_i · estimate(i)` by enumeration, with the estimator snapshotted at `x̃`.
pub fn expected_estimate<E: SnapshotEstimator + ?Sized>(est: &mut E, x: &Vector, x_tilde: &Vector) -> Result<Vector> {
    est.snapshot(x_tilde)?;
    let mut total = Vector::zeros(x.len());
    for i in 0..est.components() {
        let p = est.distribution().prob(i);
        total.axpy(p, &est.estimate(x, i)?, 1.0);
    }
    Ok(total)
}

/// `Σ_i π_i ‖estimate(i) − ∇F̂(x)‖²`.
pub fn enumerated_variance<E: SnapshotEstimator + ?Sized>(
    est: &mut E,
    problem: &CompositeProblem,
    x: &Vector,
    x_tilde: &Vector,
) -> Result<f64> {
    est.snapshot(x_tilde)?;
    let exact = problem.hat_gradient_uncounted(x);
    let mut total = 0.0;
    for i in 0..est.components() {
        let p = est.distribution().prob(i);
        total += p * (est.estimate(x, i)? - &exact).norm_squared();
    }
    Ok(total)
}

/// `F̂(x̃) − F̂(x) − ⟨∇F̂(x), x̃ − x⟩`, evaluated stably.
pub fn hat_bregman(problem: &CompositeProblem, x: &Vector, x_tilde: &Vector) -> f64 {
    let d = x_tilde - x;
    problem.objective_difference(x_tilde, x) - problem.gradient_uncounted(x).dot(&d) - 0.5 * problem.sigma() * d.norm_squared()
}

/// Both sides of the variance bounds at `(x, x̃)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceCheck {
    pub general: (f64, f64),
    pub reduced: Option<(f64, f64)>,
}

impl VarianceCheck {
    pub fn holds(&self, slack: f64) -> bool {
        let ok = |(l, r): (f64, f64)| l <= r + slack;
        ok(self.general) && self.reduced.is_none_or(ok)
    }
}

/// General: `rhs = 2(ΣB_iL_i)·Bregman`; reduced (if constants are attached): `rhs = 2(Σl_i)·Bregman`.
pub fn variance_check(problem: &CompositeProblem, x: &Vector, x_tilde: &Vector) -> Result<VarianceCheck> {
    let bregman = hat_bregman(problem, x, x_tilde);
    let sum_bl: f64 = (0..problem.len())
        .map(|i| problem.upper()[i] * problem.inner_spec(i).smoothness)
        .sum();
    let mut general = GeneralEstimator::new(problem)?;
    let g = (enumerated_variance(&mut general, problem, x, x_tilde)?, 2.0 * sum_bl * bregman);
    let reduced = match problem.reduced() {
        Some(l) => {
            let mut est = ReducedEstimator::new(problem)?;
            Some((enumerated_variance(&mut est, problem, x, x_tilde)?, 2.0 * l.iter().sum::<f64>() * bregman))
        }
        None => None,
    };
    Ok(VarianceCheck { general: g, reduced })
}

/// 64-point Gauss–Legendre rule used for the co-coercivity integral.
pub fn quadrature() -> GaussLegendre {
    GaussLegendre::new(64).expect("64-point rule")
}

/// `‖∇̂_iF(y) − ∇̂_iF(x)‖²` and `2∫₀¹⟨∇̂_iF(x + t(y−x)) − ∇̂_iF(x), y − x⟩dt`.
pub fn cocoercivity_sides(problem: &CompositeProblem, i: usize, x: &Vector, y: &Vector, rule: &GaussLegendre) -> (f64, f64) {
    let d = y - x;
    let base = problem.piece_uncounted(i, x);
    let lhs = (problem.piece_uncounted(i, y) - &base).norm_squared();
    let integral = rule.integrate(0.0, 1.0, |t| {
        let p = x + &d * t;
        (problem.piece_uncounted(i, &p) - &base).dot(&d)
    });
    (lhs, 2.0 * integral)
}

fn sample_ball(center: &Vector, radius: f64, rng: &mut SeededRng) -> Vector {
    let n = center.len();
    let dir = gaussian_vector(n, rng);
    let u: f64 = Uniform::new(0.0, 1.0).expect("unit interval").sample(rng);
    center + dir.normalize() * (radius * u.powf(1.0 / n as f64))
}

/// Pairs used to probe the co-coercivity condition: random pairs in the
/// region, plus pairs displaced along the extreme eigenvectors of each `P_i`.
fn probe_pairs(problem: &CompositeProblem, samples: usize, seed: u64) -> Result<Vec<(Vector, Vector)>> {
    let region = problem
        .region()
        .ok_or_else(|| Error::InvalidParameter("certification needs a region".into()))?;
    let center = Vector::from_column_slice(&region.center);
    let mut rng = SeededRng::new(seed);
    let mut pairs = Vec::with_capacity(samples + 4 * problem.len());
    for _ in 0..samples {
        pairs.push((sample_ball(&center, region.radius, &mut rng), sample_ball(&center, region.radius, &mut rng)));
    }
    for q in problem.parts() {
        let eig = SymmetricEigen::new(q.p.clone());
        let (lo, hi) = (eig.eigenvalues.imin(), eig.eigenvalues.imax());
        for k in [lo, hi] {
            let v = eig.eigenvectors.column(k).into_owned();
            let x = sample_ball(&center, 0.5 * region.radius, &mut rng);
            pairs.push((x.clone(), &x + &v * (0.5 * region.radius)));
            pairs.push((x.clone(), &x - &v * (0.5 * region.radius)));
        }
    }
    Ok(pairs)
}

/// Estimates `l_i` as `safety ×` the largest observed ratio `lhs/rhs` over
/// probe pairs in the region. Errors if some integral is not positive, i.e.
/// the condition cannot hold for any `l_i` at that pair.
pub fn certify_reduced_constants(problem: &CompositeProblem, samples: usize, safety: f64, seed: u64) -> Result<Vec<f64>> {
    if !(safety >= 1.0) {
        return Err(Error::InvalidParameter(format!("safety factor must be ≥ 1, got {safety}")));
    }
    let rule = quadrature();
    let pairs = probe_pairs(problem, samples, seed)?;
    let mut l = vec![0.0f64; problem.len()];
    for i in 0..problem.len() {
        for (x, y) in &pairs {
            let (lhs, rhs) = cocoercivity_sides(problem, i, x, y, &rule);
            if !(rhs > 0.0) {
                return Err(Error::AssumptionViolated(format!(
                    "component {i}: co-coercivity integral is {rhs:e} ≤ 0 at a probe pair"
                )));
            }
            l[i] = l[i].max(lhs / rhs);
        }
        l[i] *= safety;
    }
    Ok(l)
}

/// Largest violation `lhs − l_i·rhs` over fresh probe pairs (non-positive when the condition holds).
pub fn reduced_condition_violation(problem: &CompositeProblem, samples: usize, seed: u64) -> Result<f64> {
    let l = problem
        .reduced()
        .ok_or_else(|| Error::InvalidParameter("no reduced constants attached".into()))?;
    let rule = quadrature();
    let pairs = probe_pairs(problem, samples, seed)?;
    let mut worst = f64::NEG_INFINITY;
    for i in 0..problem.len() {
        for (x, y) in &pairs {
            let (lhs, rhs) = cocoercivity_sides(problem, i, x, y, &rule);
            worst = worst.max(lhs - l[i] * rhs);
        }
    }
    Ok(worst)
}

/// Random instance `f(y) = yᵀQy`, `g_i(x) = ½xᵀP_ix + a_iᵀx + r_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeSpec {
    pub m: usize,
    pub n: usize,
    pub eig_range: (f64, f64),
    /// Smallest eigenvalue of every `P_i`.
    pub mu: f64,
    /// Minimum value of every inner: `r_i = ½a_iᵀP_i⁻¹a_i + margin`, so each `g_i ≥ margin`.
    pub margin: f64,
    pub seed: u64,
    /// Random probe pairs used to certify the reduced constants (0 skips certification).
    pub certify_samples: usize,
}

impl CompositeSpec {
    pub fn new(m: usize, n: usize, seed: u64) -> Self {
        Self {
            m,
            n,
            eig_range: (0.0, 1.0),
            mu: 1e-5,
            margin: 1e5,
            seed,
            certify_samples: 64,
        }
    }
}

#[derive(Debug)]
pub struct CompositeInstance {
    pub problem: CompositeProblem,
    /// Newton reference minimizer.
    pub optimum: Vector,
    /// Reduced-estimator certification failure, if any.
    pub certification_error: Option<String>,
}

/// Builds the instance and derives every constant on the ball of radius
/// `2‖x*‖ + 1` about the origin:
///
/// * `g_i ∈ [max{margin, r_i − ‖a_i‖ρ}, r_i + ½L_iρ² + ‖a_i‖ρ]`, hence `∂_i f ∈ [lo_i, hi_i]`
///   (entrywise positive `Q`); `B_i = hi_i` and `b_i = lo_i/2`, the halving
///   leaving the pieces room to stay co-coercive along flat directions;
/// * `L = λ_max(Σ B_iP_i) + λ_max(∇²f)·Σ(L_iρ + ‖a_i‖)²`;
/// * `l_i` from [`certify_reduced_constants`] with safety factor 1.5.
pub fn generate_composite(spec: &CompositeSpec) -> Result<CompositeInstance> {
    let CompositeSpec { m, n, eig_range, mu, margin, seed, certify_samples } = *spec;
    if m == 0 || n == 0 {
        return Err(Error::Empty("components"));
    }
    if !(mu > 0.0) || !(margin > 0.0) || eig_range.0 > eig_range.1 {
        return Err(Error::InvalidParameter(format!(
            "need μ > 0, margin > 0 and a valid eigenvalue range, got μ = {mu}, margin = {margin}, range = {eig_range:?}"
        )));
    }
    let mut rng = SeededRng::new(seed);
    let unit = Uniform::new(0.0, 1.0).expect("unit interval");
    let mut parts = Vec::with_capacity(m);
    for _ in 0..m {
        let eigs = uniform_spectrum(n, eig_range.0, eig_range.1, mu, &mut rng);
        let p = with_spectrum(&eigs, &mut rng);
        let a = gaussian_vector(n, &mut rng);
        let depth = 0.5 * a.dot(
            &p.clone()
                .cholesky()
                .ok_or_else(|| Error::Singular("inner Hessian is not positive definite".into()))?
                .solve(&a),
        );
        parts.push(Quadratic::new(p, a, depth + margin)?);
    }
    let b = Matrix::from_fn(m, m, |_, _| unit.sample(&mut rng));
    let mut q = b.transpose() * &b / m as f64 + Matrix::identity(m, m);
    let r = Vector::from_iterator(m, parts.iter().map(|p| p.r));
    // normalize so the mean of ∂f at the offsets is one
    let mean = (&q * &r * 2.0).mean();
    q /= mean;
    let outer = QuadraticOuter::new(q.clone())?;

    let provisional = CompositeProblem::new(Box::new(outer.clone()), parts.clone(), vec![1.0; m], vec![1.0; m], 1.0)?;
    let optimum = provisional.newton_minimize(&Vector::zeros(n), 1e-12, 100)?;
    let rho = 2.0 * optimum.norm() + 1.0;

    let lo_ex: Vec<f64> = parts.iter().map(|p| -p.c.norm() * rho).collect();
    let hi_ex: Vec<f64> = parts
        .iter()
        .map(|p| 0.5 * p.spec().smoothness * rho * rho + p.c.norm() * rho)
        .collect();
    let lo_g = (&r + Vector::from_column_slice(&lo_ex)).map(|v| v.max(margin));
    let hi_g = &r + Vector::from_column_slice(&hi_ex);
    let lower: Vec<f64> = (&q * lo_g * 2.0).iter().map(|v| 0.5 * v).collect();
    let upper: Vec<f64> = (&q * hi_g * 2.0).iter().copied().collect();

    let weighted = parts
        .iter()
        .zip(&upper)
        .fold(Matrix::zeros(n, n), |acc, (p, bu)| acc + &p.p * *bu);
    let grad_bound: f64 = parts
        .iter()
        .map(|p| (p.spec().smoothness * rho + p.c.norm()).powi(2))
        .sum();
    let l = eig_extremes(&weighted).1 + eig_extremes(&(&q * 2.0)).1 * grad_bound;

    let problem = CompositeProblem::new(Box::new(outer), parts, lower, upper, l)?.with_region(Region {
        center: vec![0.0; n],
        radius: rho,
    })?;
    let (problem, certification_error) = if certify_samples == 0 {
        (problem, Some("certification skipped".to_string()))
    } else {
        match certify_reduced_constants(&problem, certify_samples, 1.5, mix(seed)) {
            Ok(lc) => (problem.with_reduced(lc)?, None),
            Err(e) => (problem, Some(e.to_string())),
        }
    };
    Ok(CompositeInstance {
        problem,
        optimum,
        certification_error,
    })
}

fn mix(seed: u64) -> u64 {
    crate::sampling::mix_seed(seed, 0x636f_6d70)
}
