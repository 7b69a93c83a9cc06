//! Fenchel duality for the coupled multi-block quadratic model
//! `min Σ f_i(y_i) s.t. Σ A_i y_i = b`.
//!
//! The dual `min_x Σ f_i*(A_iᵀx) − ⟨x, b⟩` is a finite sum over blocks and is
//! handed to the generic solvers unchanged; primal blocks are recovered as
//! `y_i = ∇f_i*(A_iᵀx)`. Conjugates are closed form because every block is
//! a quadratic `½yᵀPy + aᵀy`.

use std::cell::RefCell;

use nalgebra::linalg::Cholesky;
use nalgebra::Dyn;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{
    eig_extremes, gaussian_matrix, gaussian_vector, lambda_min_gram, spectral_norm, symmetrize, uniform_spectrum, with_spectrum,
    Matrix, Vector,
};
use crate::problems::{ComponentSpec, FiniteSum, Problem};
use crate::sampling::SeededRng;
use crate::solvers::{run_ssnm, ssnm_parameters};
use crate::trace::{ConvergenceTrace, Evaluator, Metrics, StopRule};

/// `f(y) = ½yᵀPy + aᵀy` with a cached Cholesky factor when `P ≻ 0`.
#[derive(Debug, Clone)]
pub struct QuadraticBlock {
    p: Matrix,
    a: Vector,
    chol: Option<Cholesky<f64, Dyn>>,
    /// `λ_min(P)`, clamped at zero.
    pub strong_convexity: f64,
    /// `λ_max(P)`.
    pub smoothness: f64,
}

impl QuadraticBlock {
    pub fn new(p: Matrix, a: Vector) -> Result<Self> {
        if !p.is_square() {
            return Err(Error::DimensionMismatch {
                expected: p.nrows(),
                got: p.ncols(),
            });
        }
        check_dim(p.nrows(), a.len())?;
        let p = symmetrize(&p);
        let (lo, hi) = eig_extremes(&p);
        if lo < -1e-12 * hi.abs().max(1.0) {
            return Err(Error::Domain(format!("block matrix is indefinite (λ_min = {lo})")));
        }
        let chol = if lo > 0.0 { Cholesky::new(p.clone()) } else { None };
        Ok(Self {
            p,
            a,
            chol,
            strong_convexity: lo.max(0.0),
            smoothness: hi,
        })
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.p
    }

    pub fn linear(&self) -> &Vector {
        &self.a
    }

    pub fn is_strongly_convex(&self) -> bool {
        self.chol.is_some()
    }

    pub fn value(&self, y: &Vector) -> f64 {
        0.5 * y.dot(&(&self.p * y)) + self.a.dot(y)
    }

    pub fn gradient(&self, y: &Vector) -> Vector {
        &self.p * y + &self.a
    }

    fn factor(&self) -> Result<&Cholesky<f64, Dyn>> {
        self.chol.as_ref().ok_or_else(|| {
            Error::Singular("block matrix is singular; add a proximal term with `perturb` first".into())
        })
    }

    /// `(f*(p), ∇f*(p))` with `∇f*(p) = P⁻¹(p − a)` and `f*(p) = ½(p−a)ᵀP⁻¹(p−a)`.
    pub fn conjugate_value_grad(&self, p: &Vector) -> Result<(f64, Vector)> {
        check_dim(self.dim(), p.len())?;
        let shifted = p - &self.a;
        let y = self.factor()?.solve(&shifted);
        Ok((0.5 * shifted.dot(&y), y))
    }

    pub fn conjugate_gradient(&self, p: &Vector) -> Result<Vector> {
        Ok(self.conjugate_value_grad(p)?.1)
    }

    /// Adds `(δ/2)‖y‖²`.
    pub fn shifted(&self, delta: f64) -> Result<Self> {
        let n = self.dim();
        Self::new(&self.p + Matrix::identity(n, n) * delta, self.a.clone())
    }
}

/// `min Σ f_i(y_i) s.t. Σ A_i y_i = b` with quadratic blocks.
#[derive(Debug, Clone)]
pub struct MultiBlockProblem {
    blocks: Vec<QuadraticBlock>,
    coupling: Vec<Matrix>,
    rhs: Vector,
}

/// JSON description of a random multi-block instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiBlockSpec {
    pub m: usize,
    pub n: usize,
    /// Eigenvalues are drawn uniformly from this range …
    pub eig_range: (f64, f64),
    /// … and the smallest one is then set to this value.
    pub mu: f64,
    pub seed: u64,
}

impl MultiBlockProblem {
    pub fn new(blocks: Vec<QuadraticBlock>, coupling: Vec<Matrix>, rhs: Vector) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::Empty("blocks"));
        }
        check_dim(blocks.len(), coupling.len())?;
        for (b, a) in blocks.iter().zip(&coupling) {
            check_dim(rhs.len(), a.nrows())?;
            check_dim(b.dim(), a.ncols())?;
        }
        Ok(Self { blocks, coupling, rhs })
    }

    /// All couplings equal to the identity.
    pub fn identity_coupled(blocks: Vec<QuadraticBlock>, rhs: Vector) -> Result<Self> {
        let coupling = blocks.iter().map(|b| Matrix::identity(rhs.len(), b.dim())).collect();
        Self::new(blocks, coupling, rhs)
    }

    /// Random SPD blocks with spectra uniform on `eig_range` and the smallest
    /// eigenvalue set to `mu`; Gaussian `a_i` and `b`; constraint `Σ y_i = m·b`.
    pub fn random(spec: &MultiBlockSpec) -> Result<Self> {
        let MultiBlockSpec { m, n, eig_range, mu, seed } = *spec;
        if m == 0 || n == 0 {
            return Err(Error::Empty("blocks"));
        }
        if !(mu > 0.0) || eig_range.0 > eig_range.1 {
            return Err(Error::InvalidParameter(format!(
                "need μ > 0 and a valid eigenvalue range, got μ = {mu}, range = {eig_range:?}"
            )));
        }
        let mut rng = SeededRng::new(seed);
        let mut blocks = Vec::with_capacity(m);
        for _ in 0..m {
            let eigs = uniform_spectrum(n, eig_range.0, eig_range.1, mu, &mut rng);
            let p = with_spectrum(&eigs, &mut rng);
            let a = gaussian_vector(n, &mut rng);
            blocks.push(QuadraticBlock::new(p, a)?);
        }
        let b = gaussian_vector(n, &mut rng);
        Self::identity_coupled(blocks, b * m as f64)
    }

    /// Weakly convex instance: each block is `P_i = B_iB_iᵀ` with `B_i ∈ ℝ^{n×rank}`,
    /// identity coupling; `B_i`, `a_i` and `b` are Gaussian scaled by `1/√n`. With `m(n − rank) ≤ n` the KKT
    /// system stays nonsingular almost surely, so the exact optimum is available.
    pub fn rank_deficient(m: usize, n: usize, rank: usize, seed: u64) -> Result<Self> {
        if m == 0 || n == 0 || rank == 0 || rank > n {
            return Err(Error::InvalidParameter(format!("need m, n ≥ 1 and 1 ≤ rank ≤ n, got m = {m}, n = {n}, rank = {rank}")));
        }
        let mut rng = SeededRng::new(seed);
        // 1/√n keeps the spectrum and the solution norm O(1), so the perturbed dual stays tractable
        let s = (n as f64).sqrt();
        let mut blocks = Vec::with_capacity(m);
        for _ in 0..m {
            let b = gaussian_matrix(n, rank, &mut rng) / s;
            let a = gaussian_vector(n, &mut rng) / s;
            blocks.push(QuadraticBlock::new(&b * b.transpose(), a)?);
        }
        let b = gaussian_vector(n, &mut rng) / s;
        Self::identity_coupled(blocks, b)
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn blocks(&self) -> &[QuadraticBlock] {
        &self.blocks
    }

    pub fn coupling(&self) -> &[Matrix] {
        &self.coupling
    }

    pub fn rhs(&self) -> &Vector {
        &self.rhs
    }

    /// Dimension of the constraint (and of the dual variable).
    pub fn constraint_dim(&self) -> usize {
        self.rhs.len()
    }

    pub fn primal_objective(&self, ys: &[Vector]) -> f64 {
        self.blocks.iter().zip(ys).map(|(b, y)| b.value(y)).sum()
    }

    pub fn residual(&self, ys: &[Vector]) -> Vector {
        let mut r = -self.rhs.clone();
        for (a, y) in self.coupling.iter().zip(ys) {
            r += a * y;
        }
        r
    }

    pub fn infeasibility(&self, ys: &[Vector]) -> f64 {
        self.residual(ys).norm()
    }

    /// Adds `(δ/2)‖y_i‖²` to every block with `δ = ε/(mD²)`; returns the new problem and `δ`.
    pub fn perturb(&self, eps: f64, radius: f64) -> Result<(Self, f64)> {
        if !(eps > 0.0) || !(radius > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "perturbation needs ε > 0 and D > 0, got ε = {eps}, D = {radius}"
            )));
        }
        let delta = perturbation_delta(eps, self.len(), radius);
        let blocks = self.blocks.iter().map(|b| b.shifted(delta)).collect::<Result<_>>()?;
        Ok((Self::new(blocks, self.coupling.clone(), self.rhs.clone())?, delta))
    }

    /// Solves the KKT system `P_i y_i + a_i − A_iᵀx = 0`, `Σ A_i y_i = b` by dense LU.
    /// Returns `(y*, x*)`.
    pub fn kkt_direct_solve(&self) -> Result<(Vec<Vector>, Vector)> {
        let dims: Vec<usize> = self.blocks.iter().map(|b| b.dim()).collect();
        let total: usize = dims.iter().sum();
        let nc = self.constraint_dim();
        let size = total + nc;
        let mut k = Matrix::zeros(size, size);
        let mut rhs = Vector::zeros(size);
        let mut off = 0;
        for (i, b) in self.blocks.iter().enumerate() {
            let d = dims[i];
            k.view_mut((off, off), (d, d)).copy_from(b.matrix());
            let a = &self.coupling[i];
            k.view_mut((off, total), (d, nc)).copy_from(&(-a.transpose()));
            k.view_mut((total, off), (nc, d)).copy_from(a);
            rhs.rows_mut(off, d).copy_from(&(-b.linear()));
            off += d;
        }
        rhs.rows_mut(total, nc).copy_from(&self.rhs);
        let sol = k
            .clone()
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Singular("KKT matrix is singular".into()))?;
        let resid = (&k * &sol - &rhs).norm() / rhs.norm().max(1.0);
        if !(resid <= 1e-10) {
            return Err(Error::Singular(format!("KKT solve is inaccurate (relative residual {resid:e})")));
        }
        let mut ys = Vec::with_capacity(self.len());
        let mut off = 0;
        for &d in &dims {
            ys.push(sol.rows(off, d).into_owned());
            off += d;
        }
        Ok((ys, sol.rows(total, nc).into_owned()))
    }
}

/// `δ = ε/(mD²)`.
pub fn perturbation_delta(eps: f64, m: usize, radius: f64) -> f64 {
    eps / (m as f64 * radius * radius)
}

/// Dual components `g_i(x) = f_i*(A_iᵀx) − ⟨x, b⟩/m` with constants
/// `L̂_i = ‖A_i‖²/μ_i` and `μ̂_i = λ_min(A_iA_iᵀ)/L_i`.
#[derive(Debug, Clone)]
pub struct DualProblem {
    primal: MultiBlockProblem,
    specs: Vec<ComponentSpec>,
    norms: Vec<f64>,
}

pub fn build_dual(problem: &MultiBlockProblem) -> Result<DualProblem> {
    let mut specs = Vec::with_capacity(problem.len());
    let mut norms = Vec::with_capacity(problem.len());
    for (i, (b, a)) in problem.blocks.iter().zip(&problem.coupling).enumerate() {
        if !b.is_strongly_convex() {
            return Err(Error::InvalidParameter(format!(
                "block {i} is not strongly convex; perturb the problem first"
            )));
        }
        let (norm, gram_min) = if is_identity(a) {
            (1.0, 1.0)
        } else {
            (spectral_norm(a), lambda_min_gram(a))
        };
        norms.push(norm);
        specs.push(ComponentSpec::new(norm * norm / b.strong_convexity, gram_min / b.smoothness)?);
    }
    Ok(DualProblem {
        primal: problem.clone(),
        specs,
        norms,
    })
}

fn is_identity(a: &Matrix) -> bool {
    a.is_square() && *a == Matrix::identity(a.nrows(), a.ncols())
}

impl DualProblem {
    pub fn primal(&self) -> &MultiBlockProblem {
        &self.primal
    }

    /// `‖A_i‖₂` per block.
    pub fn coupling_norms(&self) -> &[f64] {
        &self.norms
    }

    /// `Σ f_i*(A_iᵀx) − ⟨x, b⟩`.
    pub fn dual_objective(&self, x: &Vector) -> f64 {
        (0..self.primal.len()).map(|i| self.value(i, x)).sum()
    }

    /// `y_i = ∇f_i*(A_iᵀx)`.
    pub fn recover_primal(&self, x: &Vector) -> Vec<Vector> {
        self.primal
            .blocks
            .iter()
            .zip(&self.primal.coupling)
            .map(|(b, a)| b.conjugate_gradient(&(a.transpose() * x)).expect("factor checked at build"))
            .collect()
    }

    /// Recovery error bounds against a reference dual solution.
    pub fn error_certificate(&self, x: &Vector, x_star: &Vector) -> ErrorCertificate {
        let ys = self.recover_primal(x);
        let ys_star = self.recover_primal(x_star);
        let dx = (x - x_star).norm();
        let block_errors: Vec<f64> = ys.iter().zip(&ys_star).map(|(y, s)| (y - s).norm()).collect();
        let block_bounds: Vec<f64> = self
            .norms
            .iter()
            .zip(&self.primal.blocks)
            .map(|(n, b)| n / b.strong_convexity * dx)
            .collect();
        let infeasibility_bound = self
            .norms
            .iter()
            .zip(&self.primal.blocks)
            .map(|(n, b)| n * n / b.strong_convexity)
            .sum::<f64>()
            * dx;
        ErrorCertificate {
            dual_distance: dx,
            block_errors,
            block_bounds,
            infeasibility: self.primal.infeasibility(&ys),
            infeasibility_bound,
            reference_infeasibility: self.primal.infeasibility(&ys_star),
        }
    }
}

impl FiniteSum for DualProblem {
    fn dim(&self) -> usize {
        self.primal.constraint_dim()
    }

    fn len(&self) -> usize {
        self.primal.len()
    }

    fn spec(&self, i: usize) -> ComponentSpec {
        self.specs[i]
    }

    fn value(&self, i: usize, x: &Vector) -> f64 {
        let a = &self.primal.coupling[i];
        let (v, _) = self.primal.blocks[i]
            .conjugate_value_grad(&(a.transpose() * x))
            .expect("factor checked at build");
        v - x.dot(&self.primal.rhs) / self.primal.len() as f64
    }

    fn gradient_into(&self, i: usize, x: &Vector, out: &mut Vector) {
        let a = &self.primal.coupling[i];
        let y = self.primal.blocks[i]
            .conjugate_gradient(&(a.transpose() * x))
            .expect("factor checked at build");
        out.copy_from(&(a * y));
        out.axpy(-1.0 / self.primal.len() as f64, &self.primal.rhs, 1.0);
    }

    fn name(&self) -> &str {
        "multiblock-dual"
    }
}

/// Measured recovery errors next to their a-priori bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCertificate {
    pub dual_distance: f64,
    pub block_errors: Vec<f64>,
    pub block_bounds: Vec<f64>,
    pub infeasibility: f64,
    pub infeasibility_bound: f64,
    /// Infeasibility of the reference point itself (numerical floor).
    pub reference_infeasibility: f64,
}

impl ErrorCertificate {
    /// True when every measured quantity sits within its bound up to `slack`.
    pub fn holds(&self, slack: f64) -> bool {
        self.block_errors
            .iter()
            .zip(&self.block_bounds)
            .all(|(e, b)| *e <= b + slack)
            && self.infeasibility <= self.infeasibility_bound + self.reference_infeasibility + slack
    }
}

/// Evaluator for dual runs: dual gap and distance against a KKT reference,
/// primal infeasibility of the recovered blocks, and a certificate check per record.
pub struct CertifiedDualEvaluator<'a> {
    dual: &'a DualProblem,
    x_star: Vector,
    optimal_value: f64,
    slack: f64,
    certificates: RefCell<Vec<ErrorCertificate>>,
}

impl<'a> CertifiedDualEvaluator<'a> {
    pub fn new(dual: &'a DualProblem, x_star: Vector) -> Self {
        let optimal_value = dual.dual_objective(&x_star);
        Self {
            dual,
            x_star,
            optimal_value,
            slack: 1e-9,
            certificates: RefCell::new(Vec::new()),
        }
    }

    pub fn certificates(&self) -> Vec<ErrorCertificate> {
        self.certificates.borrow().clone()
    }

    pub fn violations(&self) -> usize {
        self.certificates.borrow().iter().filter(|c| !c.holds(self.slack)).count()
    }
}

impl Evaluator for CertifiedDualEvaluator<'_> {
    fn evaluate(&self, x: &Vector) -> Metrics {
        let cert = self.dual.error_certificate(x, &self.x_star);
        let metrics = Metrics {
            gap: self.dual.dual_objective(x) - self.optimal_value,
            distance: Some(cert.dual_distance),
            infeasibility: Some(cert.infeasibility),
        };
        self.certificates.borrow_mut().push(cert);
        metrics
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViaDualOptions {
    /// Stop once the dual iterate is this close to the reference dual solution.
    pub tolerance: f64,
    pub max_passes: f64,
    pub seed: u64,
    pub eta_scale: f64,
    pub lambda_scale: f64,
}

impl Default for ViaDualOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_passes: 10_000.0,
            seed: 0,
            eta_scale: 1.0,
            lambda_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ViaDualSolution {
    pub y: Vec<Vector>,
    pub x: Vector,
    pub trace: ConvergenceTrace,
    pub certificates: Vec<ErrorCertificate>,
    pub certificate_violations: usize,
    /// KKT reference `(y*, x*)`.
    pub reference: (Vec<Vector>, Vector),
}

/// Runs SSNM with nonuniform sampling on the dual from `x = 0`, then recovers the primal blocks.
pub fn solve_multiblock_via_dual(problem: &MultiBlockProblem, options: &ViaDualOptions) -> Result<ViaDualSolution> {
    let dual = build_dual(problem)?;
    let reference = problem.kkt_direct_solve()?;
    let solver = Problem::new(dual.clone());
    let config = ssnm_parameters(&solver.smoothness(), solver.mu_total())?.scaled(options.eta_scale, options.lambda_scale)?;
    let evaluator = CertifiedDualEvaluator::new(&dual, reference.1.clone());
    let stop = StopRule::passes(options.max_passes).with_distance(options.tolerance);
    let x0 = Vector::zeros(dual.dim());
    let trace = run_ssnm(&solver, &config, &x0, stop, options.seed, &evaluator)?;
    let x = trace.final_point();
    Ok(ViaDualSolution {
        y: dual.recover_primal(&x),
        x,
        trace,
        certificates: evaluator.certificates(),
        certificate_violations: evaluator.violations(),
        reference,
    })
}

/// Result of solving a weakly convex instance through its `δ`-perturbation.
#[derive(Debug, Clone)]
pub struct PerturbedSolution {
    pub delta: f64,
    pub perturbed: MultiBlockProblem,
    pub solution: ViaDualSolution,
}

/// Adds `(δ/2)‖y_i‖²` with `δ = ε/(mD²)` to every block and solves the result
/// through the dual. For `D ≥ max‖y_i*‖` the perturbation moves the optimal
/// value by at most `ε/2`.
pub fn solve_via_perturbation(
    problem: &MultiBlockProblem,
    eps: f64,
    radius: f64,
    options: &ViaDualOptions,
) -> Result<PerturbedSolution> {
    let (perturbed, delta) = problem.perturb(eps, radius)?;
    let solution = solve_multiblock_via_dual(&perturbed, options)?;
    Ok(PerturbedSolution {
        delta,
        perturbed,
        solution,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(p: Matrix) -> QuadraticBlock {
        let n = p.nrows();
        QuadraticBlock::new(p, Vector::zeros(n)).unwrap()
    }

    #[test]
    fn conjugate_examples() {
        let b = block(Matrix::identity(3, 3));
        let p = Vector::from_vec(vec![1.0, -2.0, 0.5]);
        let (v, g) = b.conjugate_value_grad(&p).unwrap();
        assert!((v - 0.5 * p.norm_squared()).abs() < 1e-15);
        assert!((g - &p).norm() < 1e-15);
        let b = block(Matrix::identity(3, 3) * 2.0);
        let (v, g) = b.conjugate_value_grad(&p).unwrap();
        assert!((v - 0.25 * p.norm_squared()).abs() < 1e-15);
        assert!((g - &p / 2.0).norm() < 1e-15);
    }

    #[test]
    fn singular_block_needs_perturbation() {
        let b = block(Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 0.0])));
        assert!(matches!(b.conjugate_value_grad(&Vector::zeros(2)), Err(Error::Singular(_))));
        let shifted = b.shifted(1e-3).unwrap();
        assert!((shifted.strong_convexity - 1e-3).abs() < 1e-15);
        assert!((shifted.smoothness - (1.0 + 1e-3)).abs() < 1e-15);
    }

    #[test]
    fn delta_example() {
        assert!((perturbation_delta(1e-2, 10, 1.0) - 1e-3).abs() < 1e-18);
    }

    #[test]
    fn identity_coupling_constants() {
        let p = MultiBlockProblem::random(&MultiBlockSpec {
            m: 3,
            n: 4,
            eig_range: (0.0, 1.0),
            mu: 1e-2,
            seed: 5,
        })
        .unwrap();
        let d = build_dual(&p).unwrap();
        for i in 0..3 {
            let b = &p.blocks()[i];
            assert!((d.spec(i).smoothness - 1.0 / b.strong_convexity).abs() < 1e-9);
            assert!((d.spec(i).strong_convexity - 1.0 / b.smoothness).abs() < 1e-12);
        }
    }

    #[test]
    fn kkt_trivial_cases() {
        let v = Vector::from_vec(vec![1.0, 2.0]);
        let p = MultiBlockProblem::identity_coupled(vec![block(Matrix::identity(2, 2))], v.clone()).unwrap();
        let (y, x) = p.kkt_direct_solve().unwrap();
        assert!((&y[0] - &v).norm() < 1e-14);
        assert!((x - &v).norm() < 1e-14);
        let p = MultiBlockProblem::identity_coupled(
            vec![block(Matrix::identity(2, 2)), block(Matrix::identity(2, 2) * 3.0)],
            Vector::zeros(2),
        )
        .unwrap();
        let (y, x) = p.kkt_direct_solve().unwrap();
        assert_eq!(x.norm() + y[0].norm() + y[1].norm(), 0.0);
    }
}
