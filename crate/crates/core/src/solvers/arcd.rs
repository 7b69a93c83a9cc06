//! Accelerated randomized block coordinate descent on the eliminated form of
//! `min Σ g_i(p_i) s.t. Σ p_i = r`.
//!
//! Substituting `p_j = r − Σ_{i≠j} p_i` leaves an unconstrained problem in the
//! remaining blocks whose block `i` is `(L_j + L_i)`-Lipschitz, and which is
//! `min_i μ_i/(L_j+L_i)`-strongly convex in the matching weighted norm. The
//! solver is the strongly convex accelerated proximal coordinate gradient
//! scheme with uniform block sampling; each iteration evaluates `∇g_i` and
//! `∇g_j`.

use crate::error::{check_dim, check_index, Error, Result};
use crate::linalg::Vector;
use crate::problems::Problem;
use crate::sampling::{SamplingDistribution, SeededRng};
use crate::trace::{drive, ConvergenceTrace, Evaluator, Recorder, StopRule};

#[derive(Debug, Clone, PartialEq)]
pub struct ArcdParameters {
    pub eliminated: usize,
    /// Blocks that remain free, in order.
    pub free: Vec<usize>,
    /// `L_j + L_i` for each free block.
    pub block_smoothness: Vec<f64>,
    /// Strong convexity in the weighted norm.
    pub weighted_mu: f64,
    pub alpha: f64,
}

pub fn arcd_parameters(problem: &Problem, eliminated: usize) -> Result<ArcdParameters> {
    let m = problem.len();
    check_index(eliminated, m)?;
    if m < 2 {
        return Err(Error::InvalidParameter("elimination needs at least two blocks".into()));
    }
    if let Some(i) = (0..m).find(|&i| problem.spec(i).strong_convexity <= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "block {i} is not strongly convex"
        )));
    }
    let lj = problem.spec(eliminated).smoothness;
    let free: Vec<usize> = (0..m).filter(|&i| i != eliminated).collect();
    let block_smoothness: Vec<f64> = free.iter().map(|&i| lj + problem.spec(i).smoothness).collect();
    let weighted_mu = free
        .iter()
        .zip(&block_smoothness)
        .map(|(&i, l)| problem.spec(i).strong_convexity / l)
        .fold(f64::INFINITY, f64::min);
    let alpha = weighted_mu.sqrt() / free.len() as f64;
    Ok(ArcdParameters {
        eliminated,
        free,
        block_smoothness,
        weighted_mu,
        alpha,
    })
}

/// The block whose elimination gives the smallest `max_{i≠j} √((L_j+L_i)/μ_i)`.
pub fn best_eliminated_index(problem: &Problem) -> usize {
    let m = problem.len();
    (0..m)
        .map(|j| {
            let lj = problem.spec(j).smoothness;
            let worst = (0..m)
                .filter(|&i| i != j)
                .map(|i| ((lj + problem.spec(i).smoothness) / problem.spec(i).strong_convexity).sqrt())
                .fold(0.0, f64::max);
            (j, worst)
        })
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
        .0
}

#[derive(Debug, Clone)]
pub struct EliminatedSolution {
    /// All `m` blocks, the eliminated one reconstructed from the constraint.
    pub blocks: Vec<Vector>,
    pub trace: ConvergenceTrace,
}

/// Concatenates blocks `p_1, …, p_m` into one vector.
pub fn stack(blocks: &[Vector]) -> Vector {
    let n = blocks.first().map_or(0, |b| b.len());
    let mut out = Vector::zeros(n * blocks.len());
    for (i, b) in blocks.iter().enumerate() {
        out.rows_mut(i * n, n).copy_from(b);
    }
    out
}

pub fn unstack(v: &Vector, m: usize) -> Vec<Vector> {
    let n = v.len() / m;
    (0..m).map(|i| v.rows(i * n, n).into_owned()).collect()
}

/// Rebuilds the eliminated block so the constraint holds: `p_j = r − Σ_{i≠j} p_i`.
fn complete(free_blocks: &[Vector], params: &ArcdParameters, rhs: &Vector) -> Vec<Vector> {
    let m = free_blocks.len() + 1;
    let mut out = Vec::with_capacity(m);
    let mut pj = rhs.clone();
    for b in free_blocks {
        pj -= b;
    }
    let mut it = free_blocks.iter();
    for i in 0..m {
        if i == params.eliminated {
            out.push(pj.clone());
        } else {
            out.push(it.next().expect("free block").clone());
        }
    }
    out
}

/// Minimizes `Σ g_i(p_i)` subject to `Σ p_i = rhs`, starting from all free blocks at zero.
/// The evaluator receives the stacked blocks `(p_1, …, p_m)`.
pub fn run_arcd_eliminated(
    problem: &Problem,
    rhs: &Vector,
    eliminated: usize,
    stop: StopRule,
    seed: u64,
    evaluator: &dyn Evaluator,
) -> Result<EliminatedSolution> {
    let params = arcd_parameters(problem, eliminated)?;
    let n = problem.dim();
    check_dim(n, rhs.len())?;
    let nb = params.free.len();
    let nf = nb as f64;
    let a = params.alpha;
    let dist = SamplingDistribution::uniform(nb)?;
    let mut rng = SeededRng::new(seed);

    let mut x: Vec<Vector> = vec![Vector::zeros(n); nb];
    let mut z: Vec<Vector> = x.clone();
    let x0 = stack(&complete(&x, &params, rhs));
    let recorder = Recorder::new("arcd", problem.counter(), problem.len(), stop, evaluator)?;

    let trace = drive(recorder, &x0, |_| {
        let y: Vec<Vector> = x
            .iter()
            .zip(&z)
            .map(|(xb, zb)| (xb + zb * a) / (1.0 + a))
            .collect();
        let k = dist.sample(&mut rng);
        let i = params.free[k];
        let mut pj = rhs.clone();
        for b in &y {
            pj -= b;
        }
        let grad = problem.grad_component(i, &y[k])? - problem.grad_component(params.eliminated, &pj)?;

        let mut z_next: Vec<Vector> = z
            .iter()
            .zip(&y)
            .map(|(zb, yb)| zb * (1.0 - a) + yb * a)
            .collect();
        z_next[k].axpy(-1.0 / (nf * a * params.block_smoothness[k]), &grad, 1.0);

        for b in 0..nb {
            // x⁺ = y + nα(z⁺ − z) + nα²(z − y)
            let mut xb = y[b].clone();
            xb.axpy(nf * a, &(&z_next[b] - &z[b]), 1.0);
            xb.axpy(nf * a * a, &(&z[b] - &y[b]), 1.0);
            x[b] = xb;
        }
        z = z_next;
        Ok(stack(&complete(&x, &params, rhs)))
    })?;
    let blocks = unstack(&trace.final_point(), problem.len());
    Ok(EliminatedSolution { blocks, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::problems::{Quadratic, QuadraticSum};

    #[test]
    fn stacking_round_trip() {
        let blocks = vec![Vector::from_vec(vec![1.0, 2.0]), Vector::from_vec(vec![3.0, 4.0])];
        assert_eq!(unstack(&stack(&blocks), 2), blocks);
    }

    #[test]
    fn rejects_weak_blocks() {
        let flat = Quadratic::new(Matrix::zeros(2, 2), Vector::zeros(2), 0.0).unwrap();
        let ok = Quadratic::new(Matrix::identity(2, 2), Vector::zeros(2), 0.0).unwrap();
        let weak = Problem::new(QuadraticSum::new(vec![ok.clone(), flat]).unwrap());
        assert!(arcd_parameters(&weak, 0).is_err());
        let p = Problem::new(QuadraticSum::new(vec![ok.clone(), ok]).unwrap());
        assert!(arcd_parameters(&p, 2).is_err());
        let params = arcd_parameters(&p, 0).unwrap();
        assert_eq!(params.free, vec![1]);
        assert_eq!(params.block_smoothness, vec![2.0]);
        assert!((params.alpha - 0.5f64.sqrt()).abs() < 1e-15);
    }
}
