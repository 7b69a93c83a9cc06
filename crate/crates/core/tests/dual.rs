use hetvr::dual::*;
use hetvr::linalg::{gaussian_vector, Matrix, Vector};
use hetvr::problems::{FiniteSum, Problem, Quadratic, QuadraticSum};
use hetvr::sampling::SeededRng;
use hetvr::solvers::arcd::{stack, unstack};
use hetvr::solvers::run_arcd_eliminated;
use hetvr::trace::{GapEvaluator, StopRule};
use proptest::prelude::*;

fn fig3(seed: u64) -> MultiBlockProblem {
    MultiBlockProblem::random(&MultiBlockSpec { m: 10, n: 10, eig_range: (0.0, 1.0), mu: 1e-3, seed }).unwrap()
}

fn max_block_error(a: &[Vector], b: &[Vector]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).amax()).fold(0.0, f64::max)
}

#[test]
fn fig3_pipeline_matches_kkt() {
    let p = fig3(1);
    let sol = solve_multiblock_via_dual(&p, &ViaDualOptions::default()).unwrap();
    let err = max_block_error(&sol.y, &sol.reference.0);
    assert!(err <= 1e-5, "‖y − y*‖∞ = {err:e}");
    assert_eq!(sol.certificate_violations, 0);
    assert_eq!(sol.certificates.len(), sol.trace.records.len());
}

#[test]
fn perturbation_path_is_near_optimal() {
    let p = MultiBlockProblem::rank_deficient(3, 4, 3, 3).unwrap();
    let (y_star, _) = p.kkt_direct_solve().unwrap();
    let radius = y_star.iter().map(|y| y.norm()).fold(0.0, f64::max);
    let eps = 1e-4;
    let options = ViaDualOptions { tolerance: 1e-11, max_passes: 2e5, ..Default::default() };
    let out = solve_via_perturbation(&p, eps, radius, &options).unwrap();
    let gap = p.primal_objective(&out.solution.y) - p.primal_objective(&y_star);
    assert!(gap.abs() <= 2.0 * eps, "objective gap {gap:e}");
    assert!(p.infeasibility(&out.solution.y) <= 1e-4);
    assert!((out.delta - eps / (3.0 * radius * radius)).abs() < 1e-18);
}

#[test]
fn weak_blocks_are_rejected_by_the_dual() {
    let p = MultiBlockProblem::rank_deficient(2, 3, 2, 1).unwrap();
    assert!(build_dual(&p).is_err());
}

#[test]
fn strong_duality_at_the_kkt_point() {
    let p = fig3(4);
    let dual = build_dual(&p).unwrap();
    let (y, x) = p.kkt_direct_solve().unwrap();
    // dual objective is the negated dual function, so the optimal values sum to zero
    let primal = p.primal_objective(&y);
    let d = dual.dual_objective(&x);
    assert!((primal + d).abs() <= 1e-8 * primal.abs().max(1.0), "{primal} vs {d}");
    let rec = dual.recover_primal(&x);
    assert!(max_block_error(&rec, &y) < 1e-9);
}

#[test]
fn dual_constants_match_conjugate_duality() {
    let mut rng = SeededRng::new(9);
    let n = 3;
    let coupling = Matrix::from_fn(n, n, |_, _| rng.uniform() + if rng.uniform() > 0.5 { 1.0 } else { 0.0 });
    let block = QuadraticBlock::new(Matrix::from_diagonal(&Vector::from_vec(vec![0.5, 1.0, 4.0])), gaussian_vector(n, &mut rng)).unwrap();
    let p = MultiBlockProblem::new(vec![block.clone(), block], vec![coupling.clone(), coupling.clone()], Vector::zeros(n)).unwrap();
    let dual = build_dual(&p).unwrap();
    let s = dual.spec(0);
    let norm = coupling.clone().svd(false, false).singular_values.max();
    let gram = (coupling.clone() * coupling.transpose()).symmetric_eigenvalues().min();
    assert!((s.smoothness - norm * norm / 0.5).abs() < 1e-9 * s.smoothness);
    assert!((s.strong_convexity - gram / 4.0).abs() < 1e-9);
}

#[test]
fn elimination_agrees_with_dual_route() {
    // min Σ ½‖p_i‖²_{P_i} + a_iᵀp_i  s.t. Σ p_i = b, solved by block elimination
    let p = MultiBlockProblem::random(&MultiBlockSpec { m: 3, n: 3, eig_range: (0.5, 2.0), mu: 0.5, seed: 8 }).unwrap();
    let (y_star, _) = p.kkt_direct_solve().unwrap();
    let parts: Vec<Quadratic> = p
        .blocks()
        .iter()
        .map(|b| Quadratic::new(b.matrix().clone(), b.linear().clone(), 0.0).unwrap())
        .collect();
    let sum = QuadraticSum::new(parts).unwrap();
    let inner = Problem::new(sum.clone());
    let target = p.primal_objective(&y_star);
    let stacked_star = stack(&y_star);
    let ev = GapEvaluator::new(
        |v: &Vector| {
            let blocks = unstack(v, 3);
            (0..3).map(|i| sum.value(i, &blocks[i])).sum()
        },
        target,
        Some(stacked_star),
    );
    let sol = run_arcd_eliminated(&inner, p.rhs(), 0, StopRule::passes(20_000.0).with_gap(1e-12), 2, &ev).unwrap();
    assert!((p.primal_objective(&sol.blocks) - target).abs() <= 1e-8);
    assert!(p.infeasibility(&sol.blocks) < 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn conjugate_satisfies_fenchel_young(seed in 0u64..1000, n in 1usize..5) {
        let mut rng = SeededRng::new(seed);
        let b = Matrix::from_fn(n, n, |_, _| rng.uniform() - 0.5);
        let block = QuadraticBlock::new(b.transpose() * b + Matrix::identity(n, n) * 0.3, gaussian_vector(n, &mut rng)).unwrap();
        let s = gaussian_vector(n, &mut rng);
        let (fs, y) = block.conjugate_value_grad(&s).unwrap();
        // equality at the maximizer, inequality elsewhere
        prop_assert!((fs + block.value(&y) - s.dot(&y)).abs() < 1e-9 * (1.0 + fs.abs()));
        let z = gaussian_vector(n, &mut rng);
        prop_assert!(fs + block.value(&z) >= s.dot(&z) - 1e-9);
        // biconjugate: ∇f(∇f*(s)) = s
        prop_assert!((block.gradient(&y) - &s).norm() < 1e-9 * (1.0 + s.norm()));
    }

    #[test]
    fn recovered_blocks_stay_within_certificates(seed in 0u64..200, shift in 0.01f64..1.0) {
        let p = MultiBlockProblem::random(&MultiBlockSpec { m: 4, n: 3, eig_range: (0.0, 1.0), mu: 0.05, seed }).unwrap();
        let dual = build_dual(&p).unwrap();
        let (_, x_star) = p.kkt_direct_solve().unwrap();
        let mut rng = SeededRng::new(seed + 1);
        let x = &x_star + gaussian_vector(3, &mut rng) * shift;
        prop_assert!(dual.error_certificate(&x, &x_star).holds(1e-9));
    }
}
