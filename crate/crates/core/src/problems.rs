//! Finite-sum problem families and the counted oracle surface every solver consumes.
//!
//! A problem is `F(x) = Σ_i g_i(x)` over a feasible set `Γ`, where each
//! component is `L_i`-smooth and `μ_i`-strongly convex. Solvers reach the
//! components only through [`Problem`], which counts every gradient call
//! per component. The split view `ĝ_i(x) = g_i(x) − (μ_i/2)‖x‖²`,
//! `h(x) = (μ/2)‖x‖²` with `μ = Σ μ_i` is exposed through
//! [`Problem::hat_grad_component_into`] and [`prox_step`].

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_index, Error, Result};
use crate::linalg::{eig_extremes, gaussian_matrix, gaussian_vector, Matrix, Vector};
use crate::sampling::SeededRng;

/// Smoothness and strong-convexity constants of one component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentSpec {
    pub smoothness: f64,
    pub strong_convexity: f64,
}

impl ComponentSpec {
    pub fn new(smoothness: f64, strong_convexity: f64) -> Result<Self> {
        if !(smoothness > 0.0) || !smoothness.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "smoothness must be positive, got {smoothness}"
            )));
        }
        if !(strong_convexity >= 0.0) || strong_convexity > smoothness * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "need L ≥ μ ≥ 0, got L = {smoothness}, μ = {strong_convexity}"
            )));
        }
        Ok(Self {
            smoothness,
            strong_convexity,
        })
    }
}

/// Raw component math. Implementations do no counting and may assume valid
/// indices and dimensions; [`Problem`] checks both before delegating.
pub trait FiniteSum: Send + Sync {
    fn dim(&self) -> usize;

    fn len(&self) -> usize;

    fn spec(&self, i: usize) -> ComponentSpec;

    fn value(&self, i: usize, x: &Vector) -> f64;

    /// Overwrites `out` with `∇g_i(x)`.
    fn gradient_into(&self, i: usize, x: &Vector, out: &mut Vector);

    fn objective(&self, x: &Vector) -> f64 {
        (0..self.len()).map(|i| self.value(i, x)).sum()
    }

    /// Gradient-Lipschitz constant of the whole sum. `Σ L_i` unless a family knows better.
    fn sum_smoothness(&self) -> f64 {
        (0..self.len()).map(|i| self.spec(i).smoothness).sum()
    }

    fn name(&self) -> &str {
        "finite-sum"
    }
}

/// Closed convex feasible set with an exact Euclidean projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeasibleSet {
    #[default]
    WholeSpace,
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl FeasibleSet {
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            FeasibleSet::WholeSpace => Ok(()),
            FeasibleSet::Ball { center, radius } => {
                check_dim(n, center.len())?;
                if !(*radius >= 0.0) {
                    return Err(Error::InvalidParameter(format!("ball radius {radius}")));
                }
                Ok(())
            }
            FeasibleSet::Box { lo, hi } => {
                check_dim(n, lo.len())?;
                check_dim(n, hi.len())?;
                if lo.iter().zip(hi).any(|(l, h)| l > h) {
                    return Err(Error::InvalidParameter("box with lo > hi".into()));
                }
                Ok(())
            }
        }
    }

    pub fn is_whole_space(&self) -> bool {
        matches!(self, FeasibleSet::WholeSpace)
    }

    pub fn project_in_place(&self, x: &mut Vector) {
        match self {
            FeasibleSet::WholeSpace => {}
            FeasibleSet::Ball { center, radius } => {
                let c = Vector::from_column_slice(center);
                let d = &*x - &c;
                let norm = d.norm();
                if norm > *radius {
                    *x = c + d * (*radius / norm);
                }
            }
            FeasibleSet::Box { lo, hi } => {
                for (k, v) in x.iter_mut().enumerate() {
                    *v = v.clamp(lo[k], hi[k]);
                }
            }
        }
    }

    pub fn project(&self, x: &Vector) -> Vector {
        let mut y = x.clone();
        self.project_in_place(&mut y);
        y
    }

    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        (self.project(x) - x).norm() <= tol
    }
}

/// Per-component gradient-call counts plus separate value-call and
/// outer-partial counts (the latter used by composite problems).
#[derive(Debug)]
pub struct OracleCounter {
    grads: Vec<AtomicU64>,
    values: AtomicU64,
    partials: AtomicU64,
}

impl OracleCounter {
    pub fn new(m: usize) -> Self {
        Self {
            grads: (0..m).map(|_| AtomicU64::new(0)).collect(),
            values: AtomicU64::new(0),
            partials: AtomicU64::new(0),
        }
    }

    pub fn record_partials(&self, n: u64) {
        self.partials.fetch_add(n, Ordering::Relaxed);
    }

    pub fn partials(&self) -> u64 {
        self.partials.load(Ordering::Relaxed)
    }

    pub fn record_gradient(&self, i: usize) {
        self.grads[i].fetch_add(1, Ordering::Relaxed);
    }

    pub fn record_values(&self, n: u64) {
        self.values.fetch_add(n, Ordering::Relaxed);
    }

    pub fn component(&self, i: usize) -> u64 {
        self.grads[i].load(Ordering::Relaxed)
    }

    pub fn per_component(&self) -> Vec<u64> {
        self.grads.iter().map(|c| c.load(Ordering::Relaxed)).collect()
    }

    pub fn total(&self) -> u64 {
        self.grads.iter().map(|c| c.load(Ordering::Relaxed)).sum()
    }

    pub fn values(&self) -> u64 {
        self.values.load(Ordering::Relaxed)
    }

    pub fn effective_passes(&self) -> f64 {
        self.total() as f64 / self.grads.len() as f64
    }

    pub fn reset(&self) {
        for c in &self.grads {
            c.store(0, Ordering::Relaxed);
        }
        self.values.store(0, Ordering::Relaxed);
        self.partials.store(0, Ordering::Relaxed);
    }
}

/// A finite-sum family, its feasible set and the oracle counter.
pub struct Problem {
    family: Box<dyn FiniteSum>,
    set: FeasibleSet,
    specs: Vec<ComponentSpec>,
    counter: OracleCounter,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("family", &self.family.name())
            .field("m", &self.len())
            .field("n", &self.dim())
            .field("set", &self.set)
            .finish()
    }
}

impl Problem {
    pub fn new(family: impl FiniteSum + 'static) -> Self {
        Self::from_boxed(Box::new(family))
    }

    pub fn from_boxed(family: Box<dyn FiniteSum>) -> Self {
        let m = family.len();
        let specs = (0..m).map(|i| family.spec(i)).collect();
        Self {
            family,
            set: FeasibleSet::WholeSpace,
            specs,
            counter: OracleCounter::new(m),
        }
    }

    pub fn with_set(mut self, set: FeasibleSet) -> Result<Self> {
        set.validate(self.dim())?;
        self.set = set;
        Ok(self)
    }

    pub fn family(&self) -> &dyn FiniteSum {
        self.family.as_ref()
    }

    pub fn set(&self) -> &FeasibleSet {
        &self.set
    }

    pub fn dim(&self) -> usize {
        self.family.dim()
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn spec(&self, i: usize) -> ComponentSpec {
        self.specs[i]
    }

    pub fn specs(&self) -> &[ComponentSpec] {
        &self.specs
    }

    pub fn smoothness(&self) -> Vec<f64> {
        self.specs.iter().map(|s| s.smoothness).collect()
    }

    /// `μ = Σ μ_i`, the strong-convexity constant carried by `h`.
    pub fn mu_total(&self) -> f64 {
        self.specs.iter().map(|s| s.strong_convexity).sum()
    }

    pub fn max_smoothness(&self) -> f64 {
        self.specs.iter().map(|s| s.smoothness).fold(0.0, f64::max)
    }

    pub fn sum_smoothness(&self) -> f64 {
        self.family.sum_smoothness()
    }

    pub fn counter(&self) -> &OracleCounter {
        &self.counter
    }

    fn check(&self, i: usize, x: &Vector) -> Result<()> {
        check_index(i, self.len())?;
        check_dim(self.dim(), x.len())
    }

    /// `∇g_i(x)`; one counted gradient call.
    pub fn grad_component(&self, i: usize, x: &Vector) -> Result<Vector> {
        let mut out = Vector::zeros(self.dim());
        self.grad_component_into(i, x, &mut out)?;
        Ok(out)
    }

    pub fn grad_component_into(&self, i: usize, x: &Vector, out: &mut Vector) -> Result<()> {
        self.check(i, x)?;
        check_dim(self.dim(), out.len())?;
        self.family.gradient_into(i, x, out);
        self.counter.record_gradient(i);
        Ok(())
    }

    /// `∇ĝ_i(x) = ∇g_i(x) − μ_i x`; one counted gradient call.
    pub fn hat_grad_component(&self, i: usize, x: &Vector) -> Result<Vector> {
        let mut out = Vector::zeros(self.dim());
        self.hat_grad_component_into(i, x, &mut out)?;
        Ok(out)
    }

    pub fn hat_grad_component_into(&self, i: usize, x: &Vector, out: &mut Vector) -> Result<()> {
        self.grad_component_into(i, x, out)?;
        let mu = self.specs[i].strong_convexity;
        if mu != 0.0 {
            out.axpy(-mu, x, 1.0);
        }
        Ok(())
    }

    /// `g_i(x)`; one counted value call.
    pub fn value_component(&self, i: usize, x: &Vector) -> Result<f64> {
        self.check(i, x)?;
        self.counter.record_values(1);
        Ok(self.family.value(i, x))
    }

    /// `ĝ_i(x)`, uncounted. Used by diagnostics and inequality checks.
    pub fn hat_value(&self, i: usize, x: &Vector) -> f64 {
        self.family.value(i, x) - 0.5 * self.specs[i].strong_convexity * x.norm_squared()
    }

    /// `F(x)`, uncounted. Metrics only.
    pub fn objective(&self, x: &Vector) -> f64 {
        self.family.objective(x)
    }

    /// `∇F(x)`; counts `m` gradient calls.
    pub fn full_gradient(&self, x: &Vector) -> Result<Vector> {
        check_dim(self.dim(), x.len())?;
        let mut total = Vector::zeros(self.dim());
        let mut g = Vector::zeros(self.dim());
        for i in 0..self.len() {
            self.grad_component_into(i, x, &mut g)?;
            total += &g;
        }
        Ok(total)
    }

    /// `∇F(x)` without touching the counter.
    pub fn full_gradient_uncounted(&self, x: &Vector) -> Vector {
        let mut total = Vector::zeros(self.dim());
        let mut g = Vector::zeros(self.dim());
        for i in 0..self.len() {
            self.family.gradient_into(i, x, &mut g);
            total += &g;
        }
        total
    }

    pub fn gradient_uncounted(&self, i: usize, x: &Vector) -> Vector {
        let mut g = Vector::zeros(self.dim());
        self.family.gradient_into(i, x, &mut g);
        g
    }

    pub fn hat_gradient_uncounted(&self, i: usize, x: &Vector) -> Vector {
        let mut g = self.gradient_uncounted(i, x);
        g.axpy(-self.specs[i].strong_convexity, x, 1.0);
        g
    }
}

/// `argmin_{x∈Γ} (μ/2)‖x‖² + ⟨∇̃, x⟩ + ‖x_k − x‖²/(2η)`.
///
/// The objective equals `((1+ημ)/(2η))‖x − v‖² + const` with
/// `v = (x_k − η∇̃)/(1+ημ)`, an isotropic quadratic centred at `v`. Its
/// minimizer over any closed convex `Γ` is therefore the Euclidean
/// projection of `v` onto `Γ`, which is exact for the ball and the box.
pub fn prox_step(
    x_k: &Vector,
    grad_estimate: &Vector,
    eta: f64,
    mu: f64,
    set: &FeasibleSet,
) -> Result<Vector> {
    let mut out = x_k.clone();
    prox_step_in_place(&mut out, grad_estimate, eta, mu, set)?;
    Ok(out)
}

/// In-place form of [`prox_step`]: `x` holds `x_k` on entry and the prox point on exit.
pub fn prox_step_in_place(
    x: &mut Vector,
    grad_estimate: &Vector,
    eta: f64,
    mu: f64,
    set: &FeasibleSet,
) -> Result<()> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::InvalidParameter(format!("step size η must be positive, got {eta}")));
    }
    if !(mu >= 0.0) {
        return Err(Error::InvalidParameter(format!("μ must be nonnegative, got {mu}")));
    }
    check_dim(x.len(), grad_estimate.len())?;
    x.axpy(-eta, grad_estimate, 1.0);
    *x /= 1.0 + eta * mu;
    set.project_in_place(x);
    Ok(())
}

/// Slack of the prox inequality at `x⁺ = prox_step(x_k, ∇̃, η, μ, Γ)` for a comparison point `u ∈ Γ`:
/// right side minus left side of
/// `⟨∇̃, x⁺ − u⟩ ≤ −‖x⁺ − x_k‖²/(2η) + ‖x_k − u‖²/(2η) − (1+ημ)‖x⁺ − u‖²/(2η) + h(u) − h(x⁺)`
/// with `h = (μ/2)‖·‖²`. Nonnegative when the inequality holds.
pub fn prox_inequality_slack(
    x_k: &Vector,
    grad_estimate: &Vector,
    eta: f64,
    mu: f64,
    set: &FeasibleSet,
    u: &Vector,
) -> Result<f64> {
    let next = prox_step(x_k, grad_estimate, eta, mu, set)?;
    check_dim(x_k.len(), u.len())?;
    let h = |v: &Vector| 0.5 * mu * v.norm_squared();
    let lhs = grad_estimate.dot(&(&next - u));
    let rhs = -(&next - x_k).norm_squared() / (2.0 * eta) + (x_k - u).norm_squared() / (2.0 * eta)
        - (1.0 + eta * mu) / (2.0 * eta) * (&next - u).norm_squared()
        + h(u)
        - h(&next);
    Ok(rhs - lhs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Squared,
    Logistic,
}

/// `g_i(x) = (w_i/m)·ℓ(a_iᵀx, b_i) + (μ/(2m))‖x‖²` with the ridge split evenly.
#[derive(Debug, Clone)]
pub struct WeightedGlm {
    // column i is a_i, so each row of the data matrix is contiguous
    rows: Matrix,
    targets: Vector,
    weights: Vector,
    ridge: f64,
    loss: LossKind,
    specs: Vec<ComponentSpec>,
}

impl WeightedGlm {
    pub fn new(a: &Matrix, targets: Vector, weights: Vector, ridge: f64, loss: LossKind) -> Result<Self> {
        let m = a.nrows();
        if m == 0 || a.ncols() == 0 {
            return Err(Error::Empty("data matrix"));
        }
        check_dim(m, targets.len())?;
        check_dim(m, weights.len())?;
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidParameter("weights must be positive".into()));
        }
        if !(ridge >= 0.0) {
            return Err(Error::InvalidParameter(format!("ridge must be nonnegative, got {ridge}")));
        }
        let rows = a.transpose();
        let mf = m as f64;
        let mut specs = Vec::with_capacity(m);
        for i in 0..m {
            let sq = rows.column(i).norm_squared();
            let data = match loss {
                LossKind::Squared => 2.0 * weights[i] * sq / mf,
                LossKind::Logistic => weights[i] * targets[i] * targets[i] * sq / (4.0 * mf),
            };
            let mu_i = ridge / mf;
            let l = data + mu_i;
            specs.push(ComponentSpec::new(l.max(f64::MIN_POSITIVE), mu_i.min(l))?);
        }
        Ok(Self {
            rows,
            targets,
            weights,
            ridge,
            loss,
            specs,
        })
    }

    /// Gaussian data, `⌊√m⌋` components with weight `m` and the rest weight 1,
    /// then the design matrix rescaled so the largest data-term `L_i` is 1.
    pub fn synthetic(m: usize, n: usize, ridge: f64, loss: LossKind, seed: u64) -> Result<Self> {
        let mut rng = SeededRng::new(seed);
        let a = gaussian_matrix(m, n, &mut rng);
        let weights = skewed_weights(m);
        let targets = match loss {
            LossKind::Squared => gaussian_vector(m, &mut rng),
            LossKind::Logistic => {
                let truth = gaussian_vector(n, &mut rng);
                let noise = gaussian_vector(m, &mut rng);
                Vector::from_fn(m, |i, _| {
                    if a.row(i).dot(&truth.transpose()) + noise[i] >= 0.0 {
                        1.0
                    } else {
                        -1.0
                    }
                })
            }
        };
        let (scaled, _) = scale_design_matrix(&a, &weights, loss)?;
        Self::new(&scaled, targets, weights, ridge, loss)
    }

    pub fn loss(&self) -> LossKind {
        self.loss
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn weights(&self) -> &Vector {
        &self.weights
    }

    pub fn targets(&self) -> &Vector {
        &self.targets
    }

    /// Data matrix `A` (m×n).
    pub fn design(&self) -> Matrix {
        self.rows.transpose()
    }

    fn margin(&self, i: usize, x: &Vector) -> f64 {
        self.rows.column(i).dot(x)
    }

    /// Hessian of the full objective; exact for squared loss.
    pub fn hessian(&self, x: &Vector) -> Matrix {
        let n = self.rows.nrows();
        let mf = self.len() as f64;
        let mut h = Matrix::identity(n, n) * self.ridge;
        for i in 0..self.len() {
            let a = self.rows.column(i);
            let c = match self.loss {
                LossKind::Squared => 2.0 * self.weights[i] / mf,
                LossKind::Logistic => {
                    let z = self.targets[i] * self.margin(i, x);
                    let s = sigmoid(z);
                    self.weights[i] * self.targets[i] * self.targets[i] * s * (1.0 - s) / mf
                }
            };
            h.ger(c, &a, &a, 1.0);
        }
        h
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^{-z})` without overflow.
pub fn log1p_exp_neg(z: f64) -> f64 {
    if z >= 0.0 {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

impl FiniteSum for WeightedGlm {
    fn dim(&self) -> usize {
        self.rows.nrows()
    }

    fn len(&self) -> usize {
        self.rows.ncols()
    }

    fn spec(&self, i: usize) -> ComponentSpec {
        self.specs[i]
    }

    fn value(&self, i: usize, x: &Vector) -> f64 {
        let mf = self.len() as f64;
        let z = self.margin(i, x);
        let data = match self.loss {
            LossKind::Squared => {
                let r = z - self.targets[i];
                r * r
            }
            LossKind::Logistic => log1p_exp_neg(self.targets[i] * z),
        };
        self.weights[i] * data / mf + 0.5 * self.ridge / mf * x.norm_squared()
    }

    fn gradient_into(&self, i: usize, x: &Vector, out: &mut Vector) {
        let mf = self.len() as f64;
        let z = self.margin(i, x);
        let coef = match self.loss {
            LossKind::Squared => 2.0 * self.weights[i] * (z - self.targets[i]) / mf,
            LossKind::Logistic => {
                let b = self.targets[i];
                -self.weights[i] * b * sigmoid(-b * z) / mf
            }
        };
        out.copy_from(x);
        *out *= self.ridge / mf;
        out.axpy(coef, &self.rows.column(i), 1.0);
    }

    fn sum_smoothness(&self) -> f64 {
        match self.loss {
            LossKind::Squared => eig_extremes(&self.hessian(&Vector::zeros(self.dim()))).1,
            LossKind::Logistic => self.specs.iter().map(|s| s.smoothness).sum(),
        }
    }

    fn name(&self) -> &str {
        match self.loss {
            LossKind::Squared => "weighted-least-squares",
            LossKind::Logistic => "weighted-logistic",
        }
    }
}

/// `⌊√m⌋` weights equal to `m` followed by ones.
pub fn skewed_weights(m: usize) -> Vector {
    let heavy = (m as f64).sqrt().floor() as usize;
    Vector::from_fn(m, |i, _| if i < heavy { m as f64 } else { 1.0 })
}

/// Rescales `A` so that the largest per-component data-term smoothness
/// constant equals 1. Returns the scaled matrix and the scalar applied.
pub fn scale_design_matrix(a: &Matrix, weights: &Vector, loss: LossKind) -> Result<(Matrix, f64)> {
    let m = a.nrows();
    if m == 0 || a.ncols() == 0 {
        return Err(Error::Empty("data matrix"));
    }
    check_dim(m, weights.len())?;
    let mf = m as f64;
    let max_l = (0..m)
        .map(|i| {
            let sq = a.row(i).norm_squared();
            match loss {
                LossKind::Squared => 2.0 * weights[i] * sq / mf,
                LossKind::Logistic => weights[i] * sq / (4.0 * mf),
            }
        })
        .fold(0.0, f64::max);
    if max_l == 0.0 {
        return Err(Error::InvalidParameter("cannot scale a zero data matrix".into()));
    }
    let s = 1.0 / max_l.sqrt();
    Ok((a * s, s))
}

/// `g(x) = ½xᵀPx + cᵀx + r` with `P` symmetric positive semidefinite.
#[derive(Debug, Clone)]
pub struct Quadratic {
    pub p: Matrix,
    pub c: Vector,
    pub r: f64,
    spec: ComponentSpec,
}

impl Quadratic {
    pub fn new(p: Matrix, c: Vector, r: f64) -> Result<Self> {
        if !p.is_square() {
            return Err(Error::InvalidParameter("quadratic needs a square matrix".into()));
        }
        check_dim(p.nrows(), c.len())?;
        let (lo, hi) = eig_extremes(&p);
        if lo < -1e-10 * hi.abs().max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "quadratic is not convex: λ_min = {lo}"
            )));
        }
        let spec = ComponentSpec::new(hi.max(f64::MIN_POSITIVE), lo.max(0.0))?;
        Ok(Self { p, c, r, spec })
    }

    pub fn spec(&self) -> ComponentSpec {
        self.spec
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn value(&self, x: &Vector) -> f64 {
        0.5 * x.dot(&(&self.p * x)) + self.c.dot(x) + self.r
    }

    pub fn gradient_into(&self, x: &Vector, out: &mut Vector) {
        out.gemv(1.0, &self.p, x, 0.0);
        *out += &self.c;
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        &self.p * x + &self.c
    }
}

/// Sum of quadratics sharing one variable.
#[derive(Debug, Clone)]
pub struct QuadraticSum {
    parts: Vec<Quadratic>,
}

impl QuadraticSum {
    pub fn new(parts: Vec<Quadratic>) -> Result<Self> {
        let first = parts.first().ok_or(Error::Empty("quadratic components"))?;
        let n = first.dim();
        for q in &parts {
            check_dim(n, q.dim())?;
        }
        Ok(Self { parts })
    }

    pub fn parts(&self) -> &[Quadratic] {
        &self.parts
    }

    pub fn hessian(&self) -> Matrix {
        let n = self.dim();
        self.parts.iter().fold(Matrix::zeros(n, n), |acc, q| acc + &q.p)
    }

    /// Unconstrained minimizer of the sum.
    pub fn minimizer(&self) -> Result<Vector> {
        let c = self.parts.iter().fold(Vector::zeros(self.dim()), |acc, q| acc + &q.c);
        self.hessian()
            .cholesky()
            .map(|ch| ch.solve(&(-c)))
            .ok_or_else(|| Error::Singular("sum of quadratics is not positive definite".into()))
    }
}

impl FiniteSum for QuadraticSum {
    fn dim(&self) -> usize {
        self.parts[0].dim()
    }

    fn len(&self) -> usize {
        self.parts.len()
    }

    fn spec(&self, i: usize) -> ComponentSpec {
        self.parts[i].spec()
    }

    fn value(&self, i: usize, x: &Vector) -> f64 {
        self.parts[i].value(x)
    }

    fn gradient_into(&self, i: usize, x: &Vector, out: &mut Vector) {
        self.parts[i].gradient_into(x, out)
    }

    fn sum_smoothness(&self) -> f64 {
        eig_extremes(&self.hessian()).1
    }

    fn name(&self) -> &str {
        "quadratic-sum"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e1(n: usize) -> Vector {
        let mut v = Vector::zeros(n);
        v[0] = 1.0;
        v
    }

    #[test]
    fn squared_loss_gradient_example() {
        let a = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let glm = WeightedGlm::new(&a, Vector::zeros(1), Vector::from_element(1, 1.0), 0.0, LossKind::Squared).unwrap();
        let p = Problem::new(glm);
        let g = p.grad_component(0, &e1(2)).unwrap();
        assert!((g - e1(2) * 2.0).norm() < 1e-15);
        assert_eq!(p.counter().component(0), 1);
    }

    #[test]
    fn logistic_gradient_at_zero_margin() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 2.0, -0.5, 1.0]);
        let w = Vector::from_vec(vec![3.0, 1.0]);
        let b = Vector::from_vec(vec![-1.0, 1.0]);
        let glm = WeightedGlm::new(&a, b, w, 0.0, LossKind::Logistic).unwrap();
        let p = Problem::new(glm);
        let g = p.grad_component(0, &Vector::zeros(2)).unwrap();
        let expected = Vector::from_vec(vec![1.0, 2.0]) * (-(3.0 / 2.0) * 0.5 * -1.0);
        assert!((g - expected).norm() < 1e-15);
    }

    #[test]
    fn gradient_vanishes_at_component_minimizer() {
        let a = Matrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let glm = WeightedGlm::new(&a, Vector::from_element(1, 2.0), Vector::from_element(1, 1.0), 0.0, LossKind::Squared).unwrap();
        let p = Problem::new(glm);
        let g = p.grad_component(0, &Vector::from_vec(vec![1.0, 1.0])).unwrap();
        assert!(g.norm() < 1e-15);
    }

    #[test]
    fn index_and_dimension_errors() {
        let q = Quadratic::new(Matrix::identity(2, 2), Vector::zeros(2), 0.0).unwrap();
        let p = Problem::new(QuadraticSum::new(vec![q]).unwrap());
        assert!(matches!(
            p.grad_component(1, &Vector::zeros(2)),
            Err(Error::IndexOutOfRange { index: 1, len: 1 })
        ));
        assert!(matches!(
            p.grad_component(0, &Vector::zeros(3)),
            Err(Error::DimensionMismatch { expected: 2, got: 3 })
        ));
        assert_eq!(p.counter().total(), 0);
    }

    #[test]
    fn hat_gradient_examples() {
        let pm = Matrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]);
        let q = Quadratic::new(pm.clone(), Vector::from_vec(vec![0.5, -1.0]), 0.0).unwrap();
        let mu = q.spec().strong_convexity;
        let p = Problem::new(QuadraticSum::new(vec![q]).unwrap());
        // origin: correction vanishes
        let at0 = p.hat_grad_component(0, &Vector::zeros(2)).unwrap();
        assert!((at0 - Vector::from_vec(vec![0.5, -1.0])).norm() < 1e-15);

        let q2 = Quadratic::new(pm.clone(), Vector::zeros(2), 0.0).unwrap();
        let p2 = Problem::new(QuadraticSum::new(vec![q2]).unwrap());
        let g = p2.hat_grad_component(0, &e1(2)).unwrap();
        let expected = (&pm - Matrix::identity(2, 2) * mu) * e1(2);
        assert!((g - expected).norm() < 1e-14);

        // g = (μ/2)‖x‖² exactly
        let iso = Quadratic::new(Matrix::identity(3, 3) * 0.7, Vector::zeros(3), 0.0).unwrap();
        let p3 = Problem::new(QuadraticSum::new(vec![iso]).unwrap());
        let g = p3.hat_grad_component(0, &Vector::from_vec(vec![1.0, -2.0, 4.0])).unwrap();
        assert!(g.norm() < 1e-14);
    }

    #[test]
    fn prox_examples() {
        let v = Vector::from_vec(vec![2.0, -1.0]);
        let x = prox_step(&Vector::zeros(2), &v, 1.0, 1.0, &FeasibleSet::WholeSpace).unwrap();
        assert!((x + &v / 2.0).norm() < 1e-15);

        let set = FeasibleSet::Box { lo: vec![-1.0, 0.0], hi: vec![1.0, 0.5] };
        let xk = Vector::from_vec(vec![3.0, 0.25]);
        let x = prox_step(&xk, &Vector::zeros(2), 0.7, 0.0, &set).unwrap();
        assert_eq!(x, Vector::from_vec(vec![1.0, 0.25]));

        let ball = FeasibleSet::Ball { center: vec![0.0, 0.0], radius: 1.0 };
        let x = prox_step(&Vector::zeros(2), &(e1(2) * 2.0), 1.0, 0.0, &ball).unwrap();
        assert!((x + e1(2)).norm() < 1e-15);

        assert!(prox_step(&Vector::zeros(2), &v, 0.0, 1.0, &ball).is_err());
        assert!(prox_step(&Vector::zeros(2), &v, -1.0, 1.0, &ball).is_err());
    }

    #[test]
    fn scaling_examples() {
        // unit rows, squared loss: factor √(m/2)
        let m = 8;
        let a = Matrix::from_fn(m, 3, |i, j| if j == i % 3 { 1.0 } else { 0.0 });
        let (scaled, s) = scale_design_matrix(&a, &Vector::from_element(m, 1.0), LossKind::Squared).unwrap();
        assert!((s - (m as f64 / 2.0).sqrt()).abs() < 1e-14);
        assert!((scaled - &a * s).norm() < 1e-14);

        // single row: a / (√2 ‖a‖)
        let row = Matrix::from_row_slice(1, 2, &[3.0, 4.0]);
        let (scaled, _) = scale_design_matrix(&row, &Vector::from_element(1, 1.0), LossKind::Squared).unwrap();
        let expected = &row / (2f64.sqrt() * 5.0);
        assert!((scaled.clone() - expected).norm() < 1e-15);

        // fixed point
        let (again, s2) = scale_design_matrix(&scaled, &Vector::from_element(1, 1.0), LossKind::Squared).unwrap();
        assert!((s2 - 1.0).abs() < 1e-14);
        assert!((again - scaled).norm() < 1e-14);

        assert!(scale_design_matrix(&Matrix::zeros(2, 2), &Vector::from_element(2, 1.0), LossKind::Squared).is_err());
    }

    #[test]
    fn skewed_weight_counts() {
        let w = skewed_weights(100);
        assert_eq!(w.iter().filter(|&&v| v == 100.0).count(), 10);
        assert_eq!(w.iter().filter(|&&v| v == 1.0).count(), 90);
    }

    #[test]
    fn synthetic_glm_is_scaled() {
        let glm = WeightedGlm::synthetic(100, 5, 1e-3, LossKind::Squared, 3).unwrap();
        let max_data = (0..100)
            .map(|i| glm.spec(i).smoothness - 1e-3 / 100.0)
            .fold(0.0, f64::max);
        assert!((max_data - 1.0).abs() < 1e-12);
        let glm = WeightedGlm::synthetic(100, 5, 1e-3, LossKind::Logistic, 3).unwrap();
        assert!(glm.targets().iter().all(|b| b.abs() == 1.0));
    }
}
