//! Iterative methods. Every solver reads components only through the counted
//! oracle surface of [`Problem`](crate::problems::Problem) and reports a
//! [`ConvergenceTrace`](crate::trace::ConvergenceTrace).

pub mod arcd;
pub mod baselines;
pub mod katyusha;
pub mod ssnm;

pub use arcd::{arcd_parameters, best_eliminated_index, run_arcd_eliminated, EliminatedSolution};
pub use baselines::{
    run_agd, run_agd_with, run_saga, run_svrg, run_uniform_ssnm, saga_step, svrg_step, uniform_ssnm_config,
    AgdConfig,
};
pub use katyusha::{run_katyusha, KatyushaConfig, SnapshotEstimator, SvrgEstimator};
pub use ssnm::{
    expected_ssnm_estimate, lyapunov, run_ssnm, ssnm_estimator, ssnm_parameters, ssnm_step, ssnm_variance_sides,
    LyapunovDiagnostics, SsnmConfig, SsnmState,
};
