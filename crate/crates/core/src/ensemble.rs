//! Parallel ensembles over independent noise paths.

use std::panic::{catch_unwind, AssertUnwindSafe};

use rayon::prelude::*;
use serde::Serialize;

use crate::diagnostics::{
    gamma_moment_estimator, moment_estimator, tail_estimator, Estimate, GammaEstimate, TailEstimate,
};
use crate::error::{invalid, Error, Result};
use crate::fields::lp_norm_pow;
use crate::integrator::{run_trajectory, Status, TrajectoryOptions, TrajectoryRecord};
use crate::model::{ModelParams, Noise};
use crate::noise::SeedCtx;
use crate::operators::log_grid;

#[derive(Debug, Clone)]
pub struct EnsembleSpec {
    pub paths: usize,
    pub seed: u64,
    pub workers: usize,
    pub t_end: f64,
    pub dt: f64,
}

/// One path's outcome. A path that errors or panics keeps its slot.
#[derive(Debug, Clone)]
pub enum PathOutcome {
    Ok(Box<TrajectoryRecord>),
    Failed(String),
}

impl PathOutcome {
    pub fn record(&self) -> Option<&TrajectoryRecord> {
        match self {
            PathOutcome::Ok(r) => Some(r),
            PathOutcome::Failed(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Ensemble {
    pub spec: EnsembleSpec,
    /// Indexed by path.
    pub outcomes: Vec<PathOutcome>,
}

impl Ensemble {
    pub fn records(&self) -> Vec<TrajectoryRecord> {
        self.outcomes.iter().filter_map(|o| o.record().cloned()).collect()
    }
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "panic".to_string()
    }
}

/// Runs `spec.paths` trajectories with seed contexts `(spec.seed, i)` on a
/// pool of `spec.workers` threads. Outcomes come back in path order.
pub fn run_ensemble(params: &ModelParams, spec: &EnsembleSpec, opts: &TrajectoryOptions) -> Result<Ensemble> {
    if spec.paths == 0 {
        return Err(invalid("ensemble needs at least one path"));
    }
    if spec.workers == 0 {
        return Err(invalid("ensemble needs at least one worker"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| invalid(format!("thread pool: {e}")))?;
    let run = |i: usize| {
        let ctx = SeedCtx::new(spec.seed, i as u64);
        match catch_unwind(AssertUnwindSafe(|| run_trajectory(params, spec.t_end, spec.dt, &ctx, opts))) {
            Ok(Ok(rec)) => PathOutcome::Ok(Box::new(rec)),
            Ok(Err(e)) => PathOutcome::Failed(e.to_string()),
            Err(p) => PathOutcome::Failed(panic_message(p)),
        }
    };
    let outcomes = pool.install(|| (0..spec.paths).into_par_iter().map(run).collect());
    Ok(Ensemble { spec: spec.clone(), outcomes })
}

/// Which estimators to evaluate on an ensemble.
#[derive(Debug, Clone, Default)]
pub struct EstimatorRequest {
    pub p0: Option<f64>,
    pub gamma: Option<f64>,
    pub tail_q: Option<f64>,
    /// `[lo, hi]`; defaults to `[R0, 100 R0]` with `R0 = |u0|_q^q`.
    pub tail_range: Option<[f64; 2]>,
    pub tail_points: usize,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct PathSummary {
    pub path: usize,
    pub status: String,
    pub final_time: f64,
    pub final_sup: f64,
    pub final_mass: f64,
    pub max_sup: f64,
    pub min_value: f64,
    pub tau_hits: Vec<(f64, Option<f64>)>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct EstimateSummary {
    pub mean: f64,
    pub ci: (f64, f64),
    pub per_path: Vec<f64>,
}

impl From<&Estimate> for EstimateSummary {
    fn from(e: &Estimate) -> Self {
        Self { mean: e.mean, ci: e.ci, per_path: e.per_path.clone() }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct TailSummary {
    pub q: f64,
    pub r_grid: Vec<f64>,
    pub survival: Vec<f64>,
    pub slope: Option<f64>,
    pub insufficient_data: bool,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct GammaSummary {
    pub gamma: f64,
    pub window_upper: f64,
    pub in_window: bool,
    pub estimate: EstimateSummary,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct EnsembleStats {
    pub paths: usize,
    pub seed: u64,
    pub completed: usize,
    pub stopped: usize,
    pub diverged: usize,
    pub failed: usize,
    pub summaries: Vec<PathSummary>,
    pub moment: Option<(f64, EstimateSummary)>,
    pub tail: Option<TailSummary>,
    pub gamma: Option<GammaSummary>,
}

fn summarize(path: usize, outcome: &PathOutcome) -> PathSummary {
    match outcome {
        PathOutcome::Ok(r) => PathSummary {
            path,
            status: r.status.to_string(),
            final_time: r.final_time(),
            final_sup: r.sup_norms.last().copied().unwrap_or(f64::NAN),
            final_mass: r.masses.last().copied().unwrap_or(f64::NAN),
            max_sup: r.running_sup.last().copied().unwrap_or(f64::NAN),
            min_value: r.min_values.iter().copied().fold(f64::INFINITY, f64::min),
            tau_hits: r.tau_m_hits.iter().map(|(m, h)| (*m, h.map(|h| h.time))).collect(),
            error: None,
        },
        PathOutcome::Failed(msg) => PathSummary {
            path,
            status: "failed".into(),
            final_time: f64::NAN,
            final_sup: f64::NAN,
            final_mass: f64::NAN,
            max_sup: f64::NAN,
            min_value: f64::NAN,
            tau_hits: Vec::new(),
            error: Some(msg.clone()),
        },
    }
}

/// Reduces an ensemble in path order.
pub fn ensemble_stats(ens: &Ensemble, params: &ModelParams, req: &EstimatorRequest) -> Result<EnsembleStats> {
    let summaries: Vec<PathSummary> = ens.outcomes.iter().enumerate().map(|(i, o)| summarize(i, o)).collect();
    let count =
        |f: &dyn Fn(&Status) -> bool| ens.outcomes.iter().filter_map(|o| o.record()).filter(|r| f(&r.status)).count();
    let records = ens.records();
    let have = !records.is_empty();

    let moment = match req.p0 {
        Some(p0) if have => Some((p0, EstimateSummary::from(&moment_estimator(&records, p0)?))),
        _ => None,
    };
    let tail = match req.tail_q {
        Some(q) if have => {
            let [lo, hi] = match req.tail_range {
                Some(r) => r,
                None => {
                    let r0 = lp_norm_pow(params.u0(), q)?;
                    [r0, 100.0 * r0]
                }
            };
            let t: TailEstimate = tail_estimator(&records, q, &log_grid(lo, hi, req.tail_points.max(2)))?;
            Some(TailSummary {
                q,
                r_grid: t.r_grid,
                survival: t.survival,
                slope: t.slope,
                insufficient_data: t.insufficient_data,
            })
        }
        _ => None,
    };
    let gamma = match req.gamma {
        Some(g) if have => {
            let (n, r) = match &params.noise {
                Noise::Nonlinear(nl) => (nl.n(), nl.spec().r),
                _ => (2.0, 0.0),
            };
            let e: GammaEstimate = gamma_moment_estimator(&records, g, n, r)?;
            Some(GammaSummary {
                gamma: g,
                window_upper: e.window_upper,
                in_window: e.in_window,
                estimate: EstimateSummary::from(&e.estimate),
            })
        }
        _ => None,
    };
    Ok(EnsembleStats {
        paths: ens.outcomes.len(),
        seed: ens.spec.seed,
        completed: count(&|s| *s == Status::Completed),
        stopped: count(&|s| matches!(s, Status::StoppedAtTau { .. })),
        diverged: count(&|s| *s == Status::Diverged),
        failed: ens.outcomes.len() - records.len(),
        summaries,
        moment,
        tail,
        gamma,
    })
}

impl EnsembleStats {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(Error::from)
    }
}
