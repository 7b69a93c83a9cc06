//! Rate-grid tuning: theoretical settings times `{10^{-k}, 3·10^{-k}}`.

use hetvr::trace::{Outcome, StopRule};
use serde::Serialize;

use crate::config::{GridSpec, SolverKind, SolverSpec};
use crate::error::{HarnessError, Result};
use crate::instance::Instance;
use crate::runner::{run_solver, RunOutput};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridScale {
    pub k: i32,
    /// 1 or 3.
    pub multiplier: u8,
    pub scale: f64,
}

/// All grid scales in ascending `k`, `1·10^{-k}` before `3·10^{-k}`.
pub fn grid_scales(grid: &GridSpec) -> Vec<GridScale> {
    (grid.k_min..=grid.k_max)
        .flat_map(|k| {
            [1u8, 3].map(|multiplier| GridScale {
                k,
                multiplier,
                scale: multiplier as f64 * 10f64.powi(-k),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct GridPoint {
    pub solver: String,
    #[serde(flatten)]
    pub at: GridScale,
    pub final_gap: Option<f64>,
    pub passes: Option<f64>,
    /// Passes at which the gap tolerance was first met.
    pub passes_to_tolerance: Option<f64>,
    /// `None` when the run could not start (e.g. parameters out of range).
    pub outcome: Option<Outcome>,
    pub error: Option<String>,
}

impl GridPoint {
    pub fn diverged(&self) -> bool {
        !matches!(self.outcome, Some(Outcome::Converged | Outcome::BudgetExhausted))
            || self.final_gap.is_some_and(|g| !g.is_finite())
    }
}

#[derive(Debug, Clone)]
pub struct TuneResult {
    pub points: Vec<GridPoint>,
    pub best: usize,
    /// The winning run, kept so callers need not rerun it.
    pub run: RunOutput,
}

impl TuneResult {
    pub fn best_point(&self) -> &GridPoint {
        &self.points[self.best]
    }
}

/// Index of the best non-diverged point. With a gap tolerance, points that met
/// it beat those that did not and fewer passes wins; otherwise (or among
/// points that missed it) the smaller final gap wins. Exact ties go to scale 1,
/// then to smaller `|k|`, then to the smaller multiplier.
pub fn select_best(points: &[GridPoint], gap_tolerance: Option<f64>) -> Option<usize> {
    let key = |p: &GridPoint| -> (u8, f64) {
        match (gap_tolerance, p.passes_to_tolerance) {
            (Some(_), Some(passes)) => (0, passes),
            _ => (1, p.final_gap.unwrap_or(f64::INFINITY)),
        }
    };
    let tie = |p: &GridPoint| (p.at.scale != 1.0, p.at.k.unsigned_abs(), p.at.multiplier);
    points
        .iter()
        .enumerate()
        .filter(|(_, p)| !p.diverged())
        .min_by(|(_, a), (_, b)| {
            let (ka, kb) = (key(a), key(b));
            ka.0.cmp(&kb.0)
                .then(ka.1.total_cmp(&kb.1))
                .then(tie(a).cmp(&tie(b)))
        })
        .map(|(i, _)| i)
}

/// Runs every grid point with the same seed and keeps the best.
pub fn tune_solver(
    instance: &Instance,
    base: &SolverSpec,
    stop: StopRule,
    seed: u64,
    grid: &GridSpec,
) -> Result<TuneResult> {
    // block coordinate descent has no step-size knob
    let scales = if base.solver == SolverKind::Arcd {
        vec![GridScale {
            k: 0,
            multiplier: 1,
            scale: 1.0,
        }]
    } else {
        grid_scales(grid)
    };
    let mut points = Vec::with_capacity(scales.len());
    let mut runs = Vec::with_capacity(scales.len());
    for at in scales {
        let spec = SolverSpec {
            scale: at.scale,
            ..base.clone()
        };
        let solver = base.solver.name().to_string();
        match run_solver(instance, &spec, stop, seed) {
            Ok(out) => {
                let last = out.trace.last();
                points.push(GridPoint {
                    solver,
                    at,
                    final_gap: last.map(|r| r.gap),
                    passes: last.map(|r| r.passes),
                    passes_to_tolerance: stop.gap_tolerance.and_then(|t| out.trace.passes_to(t)),
                    outcome: Some(out.trace.outcome),
                    error: None,
                });
                runs.push(Some(out));
            }
            Err(HarnessError::Solver(e)) => {
                points.push(GridPoint {
                    solver,
                    at,
                    final_gap: None,
                    passes: None,
                    passes_to_tolerance: None,
                    outcome: None,
                    error: Some(e.to_string()),
                });
                runs.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    let best = select_best(&points, stop.gap_tolerance).ok_or_else(|| HarnessError::AllDiverged {
        solver: base.solver.name().to_string(),
    })?;
    let run = runs[best].take().expect("selected point ran");
    Ok(TuneResult { points, best, run })
}
