use hetvr::adversarial::*;
use hetvr::linalg::Vector;
use hetvr::problems::{FiniteSum, Problem};
use hetvr::solvers::arcd::stack;
use hetvr::solvers::baselines::{run_agd, run_saga, run_svrg, saga_step, svrg_step, AgdConfig};
use hetvr::solvers::*;
use hetvr::trace::{ConvergenceTrace, StopRule};
use proptest::prelude::*;

const L: [f64; 4] = [40.0, 10.0, 4.0, 100.0];
const MU: [f64; 4] = [0.05, 0.1, 0.02, 0.03];

fn instance() -> FiniteSumAdversarialInstance {
    FiniteSumAdversarialInstance::build(&L, &MU, None).unwrap()
}

fn check_reports(name: &str, inst: &FiniteSumAdversarialInstance, reports: &[LowerBoundReport], last: &Vector) {
    assert!(!reports.is_empty());
    let x_star = inst.truncated_optimum();
    for r in reports {
        assert!(r.zero_chain_holds(), "{name}: zero-chain violated, prefix {:?} vs queries {:?}", r.prefix, r.queries);
        assert!(r.floor_holds(1e-12), "{name}: gap {:e} below floor {:e}", r.gap, r.floor);
    }
    let queries = &reports.last().unwrap().queries;
    for i in 0..inst.len() {
        let block = |v: &Vector| Vector::from_column_slice(inst.block(v, i));
        let dist = (block(last) - block(&x_star)).norm_squared();
        let start = block(&x_star).norm_squared();
        let floor = inst.q[i].powf(2.0 * queries[i] as f64) * start;
        assert!(dist >= floor - 1e-10, "{name}: block {i} distance {dist:e} below {floor:e}");
    }
}

fn audited(name: &str, run: impl Fn(&Problem, &AuditingEvaluator) -> ConvergenceTrace) {
    let inst = instance();
    let p = Problem::new(inst.clone());
    let ev = AuditingEvaluator::new(&inst, p.counter());
    let trace = run(&p, &ev);
    check_reports(name, &inst, &ev.reports(), &trace.final_point());
}

#[test]
fn span_respecting_solvers_obey_the_zero_chain_and_floors() {
    let x0 = Vector::zeros(instance().dim());
    let stop = StopRule::passes(60.0);
    audited("gssnm", |p, ev| {
        let cfg = ssnm_parameters(&p.smoothness(), p.mu_total()).unwrap();
        run_ssnm(p, &cfg, &x0, stop, 1, ev).unwrap()
    });
    audited("ssnm", |p, ev| run_uniform_ssnm(p, &uniform_ssnm_config(p).unwrap(), &x0, stop, 2, ev).unwrap());
    audited("svrg", |p, ev| run_svrg(p, svrg_step(p), &x0, stop, 3, ev).unwrap());
    audited("saga", |p, ev| run_saga(p, saga_step(p), &x0, stop, 4, ev).unwrap());
    audited("agd", |p, ev| run_agd(p, &AgdConfig::for_problem(p).unwrap(), &x0, stop, ev).unwrap());
    audited("katyusha", |p, ev| {
        let cfg = KatyushaConfig::for_finite_sum(p).unwrap();
        let mut est = SvrgEstimator::proportional(p).unwrap();
        run_katyusha("katyusha", &mut est, p.counter(), &cfg, &x0, stop, 5, ev).unwrap()
    });
}

#[test]
fn optimum_is_stationary_and_unit_distance_from_origin() {
    let inst = instance();
    let x_star = inst.truncated_optimum();
    let mut grad = Vector::zeros(inst.dim());
    let mut g = Vector::zeros(inst.dim());
    for i in 0..inst.len() {
        inst.gradient_into(i, &x_star, &mut g);
        grad += &g;
    }
    assert!(grad.norm() <= 1e-8);
    let closed = inst.closed_form_optimum();
    for i in 0..inst.len() {
        let b = Vector::from_column_slice(inst.block(&closed, i));
        assert!((b.norm_squared() - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn origin_sits_above_the_zero_query_floor() {
    let inst = instance();
    let report = audit_lower_bound(&inst, &[0; 4], &Vector::zeros(inst.dim()));
    assert!((report.floor - 0.5 * inst.mu_total()).abs() < 1e-15);
    assert!(report.floor_holds(0.0));
    assert!(report.zero_chain_holds());
}

#[test]
fn gradient_descent_on_a_single_chain_respects_the_floor() {
    let chain = ChainQuadratic::new(9.0, 1.0, None).unwrap();
    let inst = FiniteSumAdversarialInstance::build(&[9.0], &[1.0], Some(chain.d)).unwrap();
    let mut x = Vector::zeros(inst.dim());
    let mut g = Vector::zeros(inst.dim());
    for k in 1..=20u64 {
        inst.gradient_into(0, &x, &mut g);
        x.axpy(-1.0 / 9.0, &g, 1.0);
        assert!(prefix_nonzero(x.as_slice(), 0.0) as u64 <= k);
    }
    let report = audit_lower_bound(&inst, &[20], &x);
    assert!((report.floor - 0.5 * 0.5f64.powi(40)).abs() < 1e-25);
    assert!(report.gap >= report.floor);
}

#[test]
fn paired_instance_audit_under_elimination() {
    let inst = DualAdversarialInstance::build(&[4.0, 50.0, 2.0, 20.0, 3.0], &[1.0, 0.5, 0.5, 0.2, 0.3], None).unwrap();
    let p = Problem::new(inst.clone());
    let ev = DualAuditingEvaluator::new(&inst, p.counter());
    let rhs = Vector::zeros(inst.dim());
    let sol = run_arcd_eliminated(&p, &rhs, best_eliminated_index(&p), StopRule::passes(100.0), 7, &ev).unwrap();
    let reports = ev.reports();
    assert!(reports.len() > 10);
    for r in &reports {
        assert!(r.zero_chain_holds(), "prefix {:?} vs pair queries {:?}", r.prefix, r.queries);
        assert!(r.gap >= -1e-12);
    }
    // the run actually moves towards the paired optimum
    let start = inst.separable_objective(&vec![Vector::zeros(inst.dim()); 5]) - inst.optimal_value();
    let end = inst.separable_objective(&sol.blocks) - inst.optimal_value();
    assert!(end < 1e-3 * start, "{end:e} vs {start:e}");
    let total = sol.blocks.iter().fold(Vector::zeros(inst.dim()), |acc, b| acc + b);
    assert!(total.norm() <= 1e-12);
    assert_eq!(stack(&sol.blocks).len(), 5 * inst.dim());
}

#[test]
fn paired_optimum_has_the_predicted_offsets() {
    let inst = DualAdversarialInstance::build(&[4.0, 9.0, 3.0, 16.0], &[1.0, 1.0, 0.5, 2.0], None).unwrap();
    let opt = inst.closed_form_optimum();
    let d = inst.d;
    for k in 0..inst.pairs() {
        let lead = opt[2 * k].rows(k * d, d).into_owned();
        let trail = opt[2 * k + 1].rows(k * d, d).into_owned();
        assert_eq!(&lead + &trail, Vector::zeros(d));
        let mu = inst.strong_convexity[2 * k + 1];
        assert!((trail.norm_squared() - 2.0 / mu).abs() <= 1e-10 * (2.0 / mu));
    }
}

#[test]
fn chain_operator_is_bounded() {
    // 0 ⪯ A ⪯ 4I on the truncated d×d minor
    let d = 30;
    let a = hetvr::Matrix::from_fn(d, d, |r, c| {
        let mut e = Vector::zeros(d);
        e[c] = 1.0;
        tridiag_apply(&e)[r]
    });
    let eig = a.symmetric_eigenvalues();
    assert!(eig.min() > 0.0 && eig.max() < 4.0);
}

proptest! {
    #[test]
    fn closed_form_optimum_is_stationary(kappa in 1.5f64..400.0) {
        let chain = ChainQuadratic::new(kappa, 1.0, None).unwrap();
        let x_star = chain.closed_form_optimum();
        let mut g = Vector::zeros(chain.d);
        chain.gradient_into(0, &x_star, &mut g);
        prop_assert!(g.norm() <= 1e-8);
        prop_assert!((x_star.norm_squared() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn gradient_steps_light_one_coordinate_each(kappa in 2.0f64..100.0, steps in 1u64..30) {
        let chain = ChainQuadratic::new(kappa, 1.0, None).unwrap();
        let mut x = Vector::zeros(chain.d);
        let mut g = Vector::zeros(chain.d);
        for k in 1..=steps {
            chain.gradient_into(0, &x, &mut g);
            x.axpy(-1.0 / kappa, &g, 1.0);
            prop_assert!(prefix_nonzero(x.as_slice(), 0.0) as u64 <= k);
        }
    }
}
