//! The acceptance suite: eleven numbered checks with fixed tolerances.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::diagnostics::{
    cancellation_check, gamma_moment_estimator, ito_ledger, mass_balance_check, moment_estimator,
    moment_estimator_until, tail_estimator,
};
use crate::ensemble::{ensemble_stats, run_ensemble, EnsembleSpec, EstimatorRequest};
use crate::error::Result;
use crate::fields::{from_spectral, lp_norm_pow, to_spectral, Grid2D, ScalarField};
use crate::integrator::{run_trajectory, CutoffSpec, NonnegPolicy, Status, TrajectoryOptions};
use crate::model::{
    p0_window, validate_a1, validate_a1_a2, validate_h1, validate_h2, LinearNoiseSpec, ModelParams, Noise,
    NonlinearNoiseSpec, Profile, SourceSpec, DEFAULT_S_MAX,
};
use crate::noise::SeedCtx;
use crate::operators::{certify_semigroup_estimates, green_solve, heat_semigroup, log_grid, Estimate};
use crate::output::write_series_csv;
use crate::picard::picard_solve;
use crate::stats::ls_fit;

pub const ROUNDTRIP_TOL: f64 = 1e-12;
pub const GREEN_TOL: f64 = 1e-12;
pub const HEAT_TOL: f64 = 1e-10;
pub const CERT_REFINE_TOL: f64 = 0.10;
pub const CANCELLATION_TOL: f64 = 1e-8;
pub const MASS_TOL: f64 = 1e-8;
pub const LEDGER_MIN_ORDER: f64 = 0.5 - 0.15;
pub const PICARD_TOL: f64 = 1e-9;
pub const PICARD_MAX_ITER: usize = 20;
/// Allowed deviation of the CI-width ratio from `1/sqrt(2)`.
pub const CI_RATIO_TOL: f64 = 0.2;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CriterionResult {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct VerifySummary {
    pub passed: bool,
    pub criteria: Vec<CriterionResult>,
}

impl std::fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{}] {:>2} {} ({:.1} s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds,
            self.detail
        )
    }
}

type Check = fn() -> Result<(bool, String)>;

pub const CRITERIA: [(u32, &str, Check); 11] = [
    (1, "spectral exactness", criterion_spectral),
    (2, "operator-estimate certification", criterion_certification),
    (3, "cancellation identity", criterion_cancellation),
    (4, "discrete mass balance", criterion_mass_balance),
    (5, "Ito ledger convergence", criterion_ledger),
    (6, "Picard contraction", criterion_picard),
    (7, "global-regime phenomenology", criterion_global),
    (8, "blow-up contrast", criterion_blowup),
    (9, "nonlinear-noise regime", criterion_nonlinear_noise),
    (10, "determinism", criterion_determinism),
    (11, "validator truth table", criterion_validators),
];

pub fn run_criterion(id: u32) -> Option<CriterionResult> {
    let &(id, name, check) = CRITERIA.iter().find(|c| c.0 == id)?;
    let start = Instant::now();
    let (passed, detail) = match std::panic::catch_unwind(check) {
        Ok(Ok(v)) => v,
        Ok(Err(e)) => (false, format!("error: {e}")),
        Err(_) => (false, "panicked".to_string()),
    };
    Some(CriterionResult { id, name: name.to_string(), passed, detail, seconds: start.elapsed().as_secs_f64() })
}

/// Runs every criterion in order, calling `each` as results arrive.
pub fn run_acceptance(mut each: impl FnMut(&CriterionResult)) -> VerifySummary {
    let criteria: Vec<CriterionResult> =
        CRITERIA.iter().filter_map(|c| run_criterion(c.0)).inspect(|r| each(r)).collect();
    VerifySummary { passed: criteria.iter().all(|c| c.passed), criteria }
}

fn square(n: usize) -> Grid2D {
    Grid2D::new(n, n, PI, PI).expect("valid grid")
}

fn max_abs_diff(a: &ScalarField, b: &ScalarField) -> f64 {
    a.values().iter().zip(b.values()).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// χ = 1, logistic μ = 1, linear noise κ = (0.08, 0.06), u0 = 1 + 0.5 cos x.
pub fn desk_params(n: usize) -> ModelParams {
    let noise = validate_h1(&LinearNoiseSpec::new(vec![0.08, 0.06], Profile::Linear), 1e3).expect("desk noise");
    let u0 = ScalarField::from_fn(&square(n), |x, _| 1.0 + 0.5 * x.cos());
    ModelParams::new(1.0, SourceSpec::logistic(1.0), Noise::Linear(noise), u0).expect("desk model")
}

fn unclipped() -> TrajectoryOptions {
    TrajectoryOptions { nonneg: NonnegPolicy::Off, ..Default::default() }
}

fn criterion_spectral() -> Result<(bool, String)> {
    let g = Grid2D::new(64, 64, PI, 2.0).expect("valid grid");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let vals: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let f = ScalarField::from_values(&g, vals)?;
    let back = from_spectral(&to_spectral(&f)?)?;
    let roundtrip = max_abs_diff(&f, &back) / f.sup_norm();

    let mut green = 0.0f64;
    for (k, l) in [(1usize, 0usize), (3, 2), (10, 7)] {
        let lam = (k as f64 * PI / g.lx()).powi(2) + (l as f64 * PI / g.ly()).powi(2);
        let u =
            ScalarField::from_fn(&g, |x, y| (k as f64 * PI * x / g.lx()).cos() * (l as f64 * PI * y / g.ly()).cos());
        let v = green_solve(&u)?;
        green = green.max(max_abs_diff(&v, &u.scaled(1.0 / (1.0 + lam))));
    }

    let u0 = ScalarField::from_fn(&g, |x, y| 2.0 + (PI * x / g.lx()).cos() + 0.5 * (3.0 * PI * y / g.ly()).cos());
    let heat = ModelParams::new(0.0, SourceSpec::zero(), Noise::None, u0.clone())?;
    let rec = run_trajectory(&heat, 1.0, 1e-2, &SeedCtx::new(0, 0), &unclipped())?;
    let exact = heat_semigroup(&u0, 1.0)?;
    let heat_err = max_abs_diff(&rec.final_field, &exact) / exact.sup_norm();

    let ok = roundtrip <= ROUNDTRIP_TOL && green <= GREEN_TOL && heat_err <= HEAT_TOL;
    Ok((ok, format!("roundtrip {roundtrip:.2e}, green {green:.2e}, heat {heat_err:.2e}")))
}

fn criterion_certification() -> Result<(bool, String)> {
    let t = log_grid(1e-3, 1.0, 10);
    let ps = [2.0, 4.0, f64::INFINITY];
    let betas = [0.0, 0.25, 0.45];
    let coarse = certify_semigroup_estimates(&square(64), 100, &t, &ps, &betas, 0.05, 7)?;
    let fine = certify_semigroup_estimates(&square(128), 100, &t, &ps, &betas, 0.05, 7)?;
    let mut worst = 0.0f64;
    let mut finite = true;
    let mut cells = 0;
    for (e, p, b) in coarse.cells() {
        if !matches!(e, Estimate::A1 | Estimate::A2 | Estimate::A4 | Estimate::A5) {
            continue;
        }
        let (Some(a), Some(c)) = (coarse.max_over_t(e, p, b), fine.max_over_t(e, p, b)) else {
            finite = false;
            continue;
        };
        finite &= a.is_finite() && c.is_finite() && a > 0.0;
        worst = worst.max((c - a).abs() / a);
        cells += 1;
    }
    let ok = finite && worst < CERT_REFINE_TOL;
    Ok((ok, format!("{cells} cells, all finite: {finite}, max relative change 64->128: {worst:.2e}")))
}

fn criterion_cancellation() -> Result<(bool, String)> {
    let bump =
        |g: &Grid2D| ScalarField::from_fn(g, |x, y| 1.0 + (-((x - 1.0).powi(2) + (y - 1.5).powi(2)) / 0.02).exp());
    let mut detail = Vec::new();
    let mut ok = true;
    for p in [2.0, 3.0] {
        let rel: Vec<f64> = [32, 64, 128]
            .iter()
            .map(|&n| cancellation_check(&bump(&square(n)), p).map(|c| c.relative()))
            .collect::<Result<_>>()?;
        let cos = cancellation_check(&ScalarField::from_fn(&square(64), |x, _| 1.0 + 0.3 * x.cos()), p)?.relative();
        let decreasing = rel.windows(2).all(|w| w[1] < w[0] || w[1] < 1e-13);
        ok &= rel[1] <= CANCELLATION_TOL && cos <= CANCELLATION_TOL && decreasing;
        detail.push(format!("p={p}: bump {:.1e}/{:.1e}/{:.1e} at 32/64/128, cosine {cos:.1e}", rel[0], rel[1], rel[2]));
    }
    Ok((ok, detail.join("; ")))
}

fn criterion_mass_balance() -> Result<(bool, String)> {
    let p = desk_params(64);
    let opts = TrajectoryOptions { store_fields: true, ..unclipped() };
    let rec = run_trajectory(&p, 1.0, 1e-3, &SeedCtx::new(2, 0), &opts)?;
    let worst = mass_balance_check(&rec, &p)?;
    let ok = worst <= MASS_TOL && rec.status == Status::Completed;
    Ok((ok, format!("max per-step residual {worst:.2e} over {} steps ({})", rec.steps(), rec.status)))
}

fn criterion_ledger() -> Result<(bool, String)> {
    let p = desk_params(64);
    let dts = [4e-3, 2e-3, 1e-3];
    let paths = 32;
    let opts = TrajectoryOptions { store_fields: true, brownian_base_dt: Some(1e-3), ..unclipped() };
    let mut means = Vec::new();
    for &dt in &dts {
        let mut total = 0.0;
        for i in 0..paths {
            let rec = run_trajectory(&p, 1.0, dt, &SeedCtx::new(5, i), &opts)?;
            total += ito_ledger(&rec, &p, 2.0)?.max_abs_residual();
        }
        means.push(total / paths as f64);
    }
    let xs: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = means.iter().map(|m| m.ln()).collect();
    let order = ls_fit(&xs, &ys).map(|(b, _)| b).unwrap_or(f64::NAN);
    Ok((
        order >= LEDGER_MIN_ORDER,
        format!("mean max residual {:.2e}/{:.2e}/{:.2e}, fitted order {order:.2}", means[0], means[1], means[2]),
    ))
}

fn criterion_picard() -> Result<(bool, String)> {
    let p = desk_params(64);
    let cutoff = CutoffSpec::new(2.0 * p.u0().sup_norm())?;
    let ctx = SeedCtx::new(3, 0);
    let short = picard_solve(&p, &cutoff, 0.05, 1e-3, &ctx, PICARD_TOL, PICARD_MAX_ITER, None)?;
    let long = picard_solve(&p, &cutoff, 0.2, 1e-3, &ctx, PICARD_TOL, PICARD_MAX_ITER, None)?;
    let contracting = short.ratios.iter().all(|r| *r < 1.0);
    let ok = short.converged && contracting && long.max_ratio() > short.max_ratio();
    Ok((
        ok,
        format!(
            "T=0.05: converged {} in {} iterations, max ratio {:.3}; T=0.2: max ratio {:.3}",
            short.converged,
            short.iterations(),
            short.max_ratio(),
            long.max_ratio()
        ),
    ))
}

fn criterion_global() -> Result<(bool, String)> {
    let p = desk_params(64);
    let mu_tilde = 0.9;
    let cert = validate_h2(&p.source, mu_tilde, None, DEFAULT_S_MAX)?;
    let p0 = 3.0;
    let in_window = matches!(p0_window(p.chi, cert.mu_tilde), Some((lo, hi)) if p0 > lo && p0 < hi);
    let spec = EnsembleSpec { paths: 64, seed: 17, workers: rayon::current_num_threads(), t_end: 10.0, dt: 5e-3 };
    let opts = TrajectoryOptions { lp_norms: vec![p0], ..unclipped() };
    let records = run_ensemble(&p, &spec, &opts)?.records();
    let diverged = spec.paths - records.iter().filter(|r| r.status == Status::Completed).count();
    let half = moment_estimator_until(&records, p0, 5.0)?;
    let full = moment_estimator(&records, p0)?;
    let ok = cert.mu_tilde > p.chi / 2.0 && in_window && diverged == 0 && half.overlaps(&full);
    Ok((
        ok,
        format!(
            "mu~={} c1={:.3}, diverged {diverged}/64, E sup|u|_3^3: T=5 {:.3} [{:.3}, {:.3}], T=10 {:.3} [{:.3}, {:.3}]",
            cert.mu_tilde, cert.c1, half.mean, half.ci.0, half.ci.1, full.mean, full.ci.0, full.ci.1
        ),
    ))
}

fn criterion_blowup() -> Result<(bool, String)> {
    let g = square(64);
    let peak = |a: f64| ScalarField::from_fn(&g, move |x, y| a * (-(x * x + y * y) / (2.0 * 0.09)).exp());
    let run = |a: f64, source: SourceSpec| -> Result<(Status, f64, f64)> {
        let u0 = peak(a);
        let mass = u0.integral();
        let p = ModelParams::new(1.0, source, Noise::None, u0)?;
        let rec = run_trajectory(&p, 1.0, 1e-3, &SeedCtx::new(0, 0), &unclipped())?;
        Ok((rec.status, rec.final_time(), mass))
    };
    let (bare, t_bare, mass) = run(100.0, SourceSpec::zero())?;
    let (damped, _, _) = run(100.0, SourceSpec::logistic(1.0))?;
    let (small, _, small_mass) = run(10.0, SourceSpec::zero())?;
    let ok = bare == Status::Diverged && t_bare < 1.0 && damped == Status::Completed && small == Status::Completed;
    Ok((
        ok,
        format!(
            "mass {mass:.2}: g=0 {bare} at t={t_bare:.3}, logistic {damped}; control mass {small_mass:.2}: {small}"
        ),
    ))
}

fn criterion_nonlinear_noise() -> Result<(bool, String)> {
    let g = square(32);
    let spec = NonlinearNoiseSpec::new(vec![0.5], 4.0, 1.0);
    let noise = validate_a1_a2(&spec, &SourceSpec::zero(), 0.0, 1.0, 2.0, DEFAULT_S_MAX)?;
    let u0 = ScalarField::from_fn(&g, |x, _| 1.0 + 0.5 * x.cos());
    let r0 = lp_norm_pow(&u0, 4.0)?;
    let p = ModelParams::new(1.0, SourceSpec::zero(), Noise::Nonlinear(noise), u0)?;
    let ens = EnsembleSpec { paths: 256, seed: 11, workers: rayon::current_num_threads(), t_end: 1.0, dt: 5e-4 };
    let opts = TrajectoryOptions { lp_norms: vec![4.0], ..unclipped() };
    let records = run_ensemble(&p, &ens, &opts)?.records();
    let diverged = records.iter().filter(|r| r.status == Status::Diverged).count();
    let tail = tail_estimator(&records, 4.0, &log_grid(r0, 100.0 * r0, 21))?;
    let half = gamma_moment_estimator(&records[..128], 0.2, 2.0, 1.0)?;
    let full = gamma_moment_estimator(&records, 0.2, 2.0, 1.0)?;
    let ratio = full.estimate.ci_width() / half.estimate.ci_width();
    let slope_ok = matches!(tail.slope, Some(s) if s < 0.0);
    let finite = full.estimate.mean.is_finite() && full.estimate.ci.1.is_finite();
    let ratio_ok = (ratio - std::f64::consts::FRAC_1_SQRT_2).abs() <= CI_RATIO_TOL;
    let ok = records.len() == 256 && slope_ok && finite && ratio_ok && full.in_window;
    Ok((
        ok,
        format!(
            "diverged {diverged}/256, tail slope {}, E sup|u|^0.2 = {:.4} [{:.4}, {:.4}], CI width 256/128 = {ratio:.3}",
            tail.slope.map_or("n/a".into(), |s| format!("{s:.3}")),
            full.estimate.mean,
            full.estimate.ci.0,
            full.estimate.ci.1
        ),
    ))
}

fn criterion_determinism() -> Result<(bool, String)> {
    let p = desk_params(64);
    let opts = TrajectoryOptions { lp_norms: vec![2.0, 3.0], ..unclipped() };
    let req =
        EstimatorRequest { p0: Some(3.0), gamma: Some(0.2), tail_q: Some(3.0), tail_points: 21, ..Default::default() };
    let mut outputs = Vec::new();
    for workers in [1, 4, 8] {
        let spec = EnsembleSpec { paths: 8, seed: 23, workers, t_end: 1.0, dt: 1e-3 };
        let ens = run_ensemble(&p, &spec, &opts)?;
        let mut bytes = ensemble_stats(&ens, &p, &req)?.to_json()?.into_bytes();
        for rec in ens.records() {
            write_series_csv(&rec, &mut bytes)?;
            for v in rec.final_field.values() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        outputs.push(bytes);
    }
    let ok = outputs.windows(2).all(|w| w[0] == w[1]);
    Ok((ok, format!("8 paths with 1/4/8 workers, {} bytes each, identical: {ok}", outputs[0].len())))
}

fn criterion_validators() -> Result<(bool, String)> {
    let mut failures = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok {
            failures.push(name.to_string());
        }
    };

    let lin = validate_h1(&LinearNoiseSpec::new(vec![1.0, 0.5, 0.25], Profile::Linear), 1e3);
    check("H1 linear K", matches!(&lin, Ok(c) if (c.k() - 21f64.sqrt() / 4.0).abs() < 1e-12));
    let sat = validate_h1(&LinearNoiseSpec::new(vec![1.0], Profile::Saturating), 1e3);
    check("H1 saturating", matches!(&sat, Ok(c) if (c.lipschitz() - 1.0).abs() < 1e-6));
    let shifted = validate_h1(&LinearNoiseSpec::new(vec![1.0], Profile::Affine { slope: 1.0, offset: 1.0 }), 1e3);
    check("H1 h(0) != 0", shifted.is_err());

    let logistic = validate_h2(&SourceSpec::logistic(1.0), 0.9, None, DEFAULT_S_MAX);
    check("H2 logistic", matches!(&logistic, Ok(c) if (c.c1 - 2.5).abs() < 1e-12));
    if let Ok(c) = &logistic {
        check("H2 recheck", validate_h2(&SourceSpec::logistic(1.0), c.mu_tilde, Some(c.c1), DEFAULT_S_MAX).is_ok());
    }
    check(
        "H2 g(s) = s",
        validate_h2(&SourceSpec::Polynomial { coeffs: vec![0.0, 1.0] }, 0.5, None, DEFAULT_S_MAX).is_err(),
    );
    check("H2 g = 0", validate_h2(&SourceSpec::zero(), 0.5, Some(1.0), DEFAULT_S_MAX).is_err());

    let a1 = |q: f64, r: f64| validate_a1(&NonlinearNoiseSpec::new(vec![0.5], q, r), 2.0);
    check("A1 n=2 r=1 q=4", a1(4.0, 1.0).is_ok());
    check("A1 q = 2r with r=1", matches!(a1(2.0, 1.0), Err(v) if v.condition.starts_with("q > 2")));
    check("A1 q = 2r with r=2", a1(4.0, 2.0).is_ok());
    check("A1 r=1/4", matches!(a1(8.0, 0.25), Err(v) if v.condition.starts_with("r >")));
    check(
        "A2 growth",
        validate_a1_a2(
            &NonlinearNoiseSpec::new(vec![0.5], 4.0, 1.0),
            &SourceSpec::Polynomial { coeffs: vec![0.0, 0.0, 0.0, 1.0] },
            1.0,
            1.0,
            2.0,
            DEFAULT_S_MAX,
        )
        .is_err(),
    );

    check("window mu=0.75", p0_window(1.0, 0.75) == Some((2.0, 4.0)));
    check("window mu=1.5", p0_window(1.0, 1.5) == Some((2.0, f64::INFINITY)));
    check("window mu=chi/2", p0_window(1.0, 0.5).is_none());

    let total = 15;
    Ok((
        failures.is_empty(),
        if failures.is_empty() {
            format!("{total} rows as stated")
        } else {
            format!("failed: {}", failures.join(", "))
        },
    ))
}
