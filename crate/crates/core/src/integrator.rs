//! Exponential Euler–Maruyama stepping of the mild equation.
//!
//! One step is `u+ = e^{-dt A} [u + B(u)]` with the left-point bracket
//! `B(u) = dt (g(u) - div(chi u grad G u)) + sum_i sigma_i(u) dW_i`,
//! assembled in cosine coefficients.

use std::fmt;

use crate::error::{invalid, Error, Result};
use crate::fields::{from_spectral_unchecked, lp_norm_of, to_spectral_unchecked, ScalarField, SpectralCoeffs};
use crate::model::{ModelParams, Noise};
use crate::noise::{aggregated_increment, noise_term, sample_increment, SeedCtx, WienerIncrement};
use crate::operators::flux_div_coeffs;

pub const DEFAULT_CEILING: f64 = 1e8;

/// Fixed `C^2` cutoff profile: 1 on `[0, 1]`, `1 - S(r - 1)` on `[1, 2]`
/// with the quintic smoothstep `S(x) = 6x^5 - 15x^4 + 10x^3`, 0 beyond.
pub fn theta(r: f64) -> f64 {
    if r <= 1.0 {
        1.0
    } else if r >= 2.0 {
        0.0
    } else {
        let x = r - 1.0;
        1.0 - x * x * x * (x * (6.0 * x - 15.0) + 10.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffSpec {
    m: f64,
}

impl CutoffSpec {
    pub fn new(m: f64) -> Result<Self> {
        if !(m > 0.0) || !m.is_finite() {
            return Err(invalid(format!("cutoff threshold must be > 0, got {m}")));
        }
        Ok(Self { m })
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    /// `theta(x / m)`.
    pub fn theta_m(&self, x: f64) -> f64 {
        theta(x / self.m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NonnegPolicy {
    #[default]
    Clip,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Status {
    Completed,
    StoppedAtTau { m: f64 },
    Diverged,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Status::Completed => f.write_str("completed"),
            Status::StoppedAtTau { m } => write!(f, "stopped_at_tau(m={m})"),
            Status::Diverged => f.write_str("diverged"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrajectoryOptions {
    pub nonneg: NonnegPolicy,
    pub ceiling: f64,
    pub cutoff: Option<CutoffSpec>,
    /// Stop at the first grid time whose sup norm reaches this threshold.
    pub stop_at: Option<f64>,
    /// Thresholds whose first hitting times are reported.
    pub m_thresholds: Vec<f64>,
    /// Extra `L^p` norms recorded per time; `f64::INFINITY` is allowed.
    pub lp_norms: Vec<f64>,
    pub snapshot_times: Vec<f64>,
    /// Keep every recorded field and increment (needed by the ledger checks).
    pub store_fields: bool,
    /// Build increments from a finer Brownian path with this step.
    pub brownian_base_dt: Option<f64>,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        Self {
            nonneg: NonnegPolicy::Clip,
            ceiling: DEFAULT_CEILING,
            cutoff: None,
            stop_at: None,
            m_thresholds: Vec::new(),
            lp_norms: Vec::new(),
            snapshot_times: Vec::new(),
            store_fields: false,
            brownian_base_dt: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub index: usize,
    pub time: f64,
}

#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub dt: f64,
    pub times: Vec<f64>,
    pub sup_norms: Vec<f64>,
    pub masses: Vec<f64>,
    /// Nodal minimum before any clipping.
    pub min_values: Vec<f64>,
    pub running_sup: Vec<f64>,
    pub lp_exponents: Vec<f64>,
    /// `lp_series[i][j]` is the norm for `lp_exponents[i]` at `times[j]`.
    pub lp_series: Vec<Vec<f64>>,
    pub tau_m_hits: Vec<(f64, Option<Hit>)>,
    pub status: Status,
    pub snapshots: Vec<(f64, ScalarField)>,
    pub final_field: ScalarField,
    /// Per step: drift cutoff factor, noise factor and mass added by clipping.
    pub thetas: Vec<f64>,
    pub noise_scales: Vec<f64>,
    pub clip_masses: Vec<f64>,
    /// Present with `store_fields`: one field per recorded time and one
    /// increment per step.
    pub fields: Option<Vec<ScalarField>>,
    pub increments: Option<Vec<WienerIncrement>>,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.thetas.len()
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn lp_series_for(&self, p: f64) -> Option<&[f64]> {
        self.lp_exponents.iter().position(|&q| q == p).map(|i| self.lp_series[i].as_slice())
    }
}

/// First index with `sup_norms[j] >= m`.
pub fn first_crossing(sup_norms: &[f64], times: &[f64], m: f64) -> Option<Hit> {
    sup_norms.iter().position(|&s| s >= m).map(|index| Hit { index, time: times[index] })
}

pub fn detect_stopping(record: &TrajectoryRecord, m: f64) -> Option<Hit> {
    first_crossing(&record.sup_norms, &record.times, m)
}

/// Spectral bracket `B(u)` with the drift scaled by `drift_scale` and the
/// noise by `noise_scale`.
pub(crate) fn bracket(
    params: &ModelParams,
    u_hat: &SpectralCoeffs,
    values: &[f64],
    dt: f64,
    drift_scale: f64,
    noise_scale: f64,
    dws: &[f64],
) -> SpectralCoeffs {
    let grid = u_hat.grid();
    let mut out = if params.chi > 0.0 && drift_scale > 0.0 {
        let eig = grid.spectrum().eigenvalues();
        let mut v_hat = u_hat.clone();
        for (a, lam) in v_hat.coeffs_mut().iter_mut().zip(eig) {
            *a /= 1.0 + lam;
        }
        let mut f = flux_div_coeffs(u_hat, &v_hat, params.chi);
        for a in f.coeffs_mut() {
            *a *= -dt * drift_scale;
        }
        f
    } else {
        SpectralCoeffs::zeros(grid)
    };

    let has_source = drift_scale > 0.0 && !params.source.is_zero();
    let has_noise = noise_scale > 0.0 && !matches!(params.noise, Noise::None) && dws.iter().any(|w| *w != 0.0);
    if has_source || has_noise {
        let mut r = if has_noise {
            let mut n = noise_term(values, grid.cell_area(), &params.noise, dws);
            if noise_scale != 1.0 {
                n.iter_mut().for_each(|v| *v *= noise_scale);
            }
            n
        } else {
            vec![0.0; values.len()]
        };
        if has_source {
            let c = dt * drift_scale;
            for (r, &z) in r.iter_mut().zip(values) {
                *r += c * params.source.eval(z);
            }
        }
        let rc = to_spectral_unchecked(&ScalarField::from_raw(grid, r));
        for (a, b) in out.coeffs_mut().iter_mut().zip(rc.coeffs()) {
            *a += b;
        }
    }
    out
}

/// `e^{-dt A} (u_hat + b)` in place on `u_hat`.
pub(crate) fn propagate(u_hat: &mut SpectralCoeffs, b: &SpectralCoeffs, dt: f64) {
    let grid = u_hat.grid().clone();
    let eig = grid.spectrum().eigenvalues();
    for ((a, bb), lam) in u_hat.coeffs_mut().iter_mut().zip(b.coeffs()).zip(eig) {
        *a = (-dt * lam).exp() * (*a + bb);
    }
}

fn check_step_inputs(u: &ScalarField, params: &ModelParams, dt: f64, inc: &WienerIncrement) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(invalid(format!("dt must be > 0, got {dt}")));
    }
    if !u.is_finite() {
        return Err(Error::NonFinite("step input"));
    }
    if !u.grid().same_as(params.u0().grid()) {
        return Err(Error::GridMismatch);
    }
    if inc.dws.len() != params.noise.k_modes() {
        return Err(invalid(format!("increment has {} modes, noise has {}", inc.dws.len(), params.noise.k_modes())));
    }
    Ok(())
}

fn finish_step(u_hat: &SpectralCoeffs, ceiling: f64) -> ScalarField {
    let mut out = from_spectral_unchecked(u_hat);
    if !out.is_finite() || out.sup_norm() > ceiling {
        out.mark_diverged();
    }
    out
}

/// One exponential Euler–Maruyama step. The output is flagged diverged when
/// a value is non-finite or exceeds `ceiling`.
pub fn step_mild(
    u: &ScalarField,
    params: &ModelParams,
    dt: f64,
    inc: &WienerIncrement,
    ceiling: f64,
) -> Result<ScalarField> {
    check_step_inputs(u, params, dt, inc)?;
    let mut u_hat = to_spectral_unchecked(u);
    let b = bracket(params, &u_hat, u.values(), dt, 1.0, 1.0, &inc.dws);
    propagate(&mut u_hat, &b, dt);
    Ok(finish_step(&u_hat, ceiling))
}

/// Factors `(drift, noise)` applied at running sup `running_sup`; the noise
/// is cut off only for the norm-nonlinear system.
pub fn cutoff_factors(params: &ModelParams, cutoff: &CutoffSpec, running_sup: f64) -> (f64, f64) {
    let th = cutoff.theta_m(running_sup);
    let noise = if params.noise.is_nonlinear() { th } else { 1.0 };
    (th, noise)
}

pub fn step_mild_cutoff(
    u: &ScalarField,
    params: &ModelParams,
    dt: f64,
    inc: &WienerIncrement,
    cutoff: &CutoffSpec,
    running_sup: f64,
    ceiling: f64,
) -> Result<ScalarField> {
    check_step_inputs(u, params, dt, inc)?;
    let (th, s) = cutoff_factors(params, cutoff, running_sup);
    let mut u_hat = to_spectral_unchecked(u);
    let b = bracket(params, &u_hat, u.values(), dt, th, s, &inc.dws);
    propagate(&mut u_hat, &b, dt);
    Ok(finish_step(&u_hat, ceiling))
}

/// Increment for step `step` of a path.
pub fn path_increment(
    ctx: &SeedCtx,
    step: u64,
    dt: f64,
    k_modes: usize,
    base_dt: Option<f64>,
) -> Result<WienerIncrement> {
    if k_modes == 0 {
        return Ok(WienerIncrement::zero(dt, 0));
    }
    match base_dt {
        Some(fine) => aggregated_increment(ctx, step, dt, fine, k_modes),
        None => sample_increment(ctx, step, dt, k_modes),
    }
}

/// Number of steps covering `[0, t_end]`: `ceil(t_end / dt)` up to rounding.
pub fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(invalid(format!("horizon must be > 0, got {t_end}")));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(invalid(format!("dt must be > 0, got {dt}")));
    }
    Ok(((t_end / dt) - 1e-9).ceil().max(1.0) as usize)
}

struct Recorder<'a> {
    rec: TrajectoryRecord,
    opts: &'a TrajectoryOptions,
    snapshot_steps: Vec<usize>,
}

impl Recorder<'_> {
    fn push(&mut self, j: usize, field: &ScalarField, min_value: f64) {
        let r = &mut self.rec;
        let area = field.grid().cell_area();
        let sup = if field.is_finite() { field.sup_norm() } else { f64::INFINITY };
        r.times.push(j as f64 * r.dt);
        r.sup_norms.push(sup);
        r.masses.push(field.integral());
        r.min_values.push(min_value);
        let prev = r.running_sup.last().copied().unwrap_or(0.0);
        r.running_sup.push(prev.max(sup));
        for (series, &p) in r.lp_series.iter_mut().zip(&self.opts.lp_norms) {
            series.push(lp_norm_of(field.values(), area, p));
        }
        if self.snapshot_steps.contains(&j) {
            r.snapshots.push((j as f64 * r.dt, field.clone()));
        }
        if let Some(fs) = r.fields.as_mut() {
            fs.push(field.clone());
        }
    }
}

/// Runs one path on `[0, t_end]`.
pub fn run_trajectory(
    params: &ModelParams,
    t_end: f64,
    dt: f64,
    ctx: &SeedCtx,
    opts: &TrajectoryOptions,
) -> Result<TrajectoryRecord> {
    let n_steps = step_count(t_end, dt)?;
    if !(opts.ceiling > 0.0) {
        return Err(invalid("divergence ceiling must be > 0"));
    }
    if opts.lp_norms.iter().any(|p| p.is_nan() || *p < 1.0) {
        return Err(invalid("recorded norm exponents must be >= 1"));
    }
    if let Some(base) = opts.brownian_base_dt {
        crate::noise::refinement_ratio(dt, base)?;
    }
    let grid = params.u0().grid().clone();
    let k_modes = params.noise.k_modes();
    let area = grid.cell_area();

    let snapshot_steps = opts
        .snapshot_times
        .iter()
        .filter(|t| **t >= 0.0 && **t <= t_end * (1.0 + 1e-12))
        .map(|t| (t / dt).round() as usize)
        .collect();
    let mut recorder = Recorder {
        rec: TrajectoryRecord {
            dt,
            times: Vec::with_capacity(n_steps + 1),
            sup_norms: Vec::with_capacity(n_steps + 1),
            masses: Vec::with_capacity(n_steps + 1),
            min_values: Vec::with_capacity(n_steps + 1),
            running_sup: Vec::with_capacity(n_steps + 1),
            lp_exponents: opts.lp_norms.clone(),
            lp_series: vec![Vec::with_capacity(n_steps + 1); opts.lp_norms.len()],
            tau_m_hits: Vec::new(),
            status: Status::Completed,
            snapshots: Vec::new(),
            final_field: params.u0().clone(),
            thetas: Vec::with_capacity(n_steps),
            noise_scales: Vec::with_capacity(n_steps),
            clip_masses: Vec::with_capacity(n_steps),
            fields: opts.store_fields.then(Vec::new),
            increments: opts.store_fields.then(Vec::new),
        },
        opts,
        snapshot_steps,
    };

    let mut u = params.u0().clone();
    recorder.push(0, &u, u.min());
    let mut status = Status::Completed;

    for j in 0..n_steps {
        let running = *recorder.rec.running_sup.last().unwrap();
        if let Some(m) = opts.stop_at {
            if *recorder.rec.sup_norms.last().unwrap() >= m {
                status = Status::StoppedAtTau { m };
                break;
            }
        }
        let (th, s) = match &opts.cutoff {
            Some(c) => cutoff_factors(params, c, running),
            None => (1.0, 1.0),
        };
        let inc = path_increment(ctx, j as u64, dt, k_modes, opts.brownian_base_dt)?;

        let mut u_hat = to_spectral_unchecked(&u);
        let b = bracket(params, &u_hat, u.values(), dt, th, s, &inc.dws);
        propagate(&mut u_hat, &b, dt);
        let mut next = from_spectral_unchecked(&u_hat);

        recorder.rec.thetas.push(th);
        recorder.rec.noise_scales.push(s);
        if let Some(incs) = recorder.rec.increments.as_mut() {
            incs.push(inc);
        }

        if !next.is_finite() || next.sup_norm() > opts.ceiling {
            next.mark_diverged();
            recorder.rec.clip_masses.push(0.0);
            let min = next.min();
            recorder.push(j + 1, &next, min);
            u = next;
            status = Status::Diverged;
            break;
        }

        let pre_min = next.min();
        let mut clip = 0.0;
        if opts.nonneg == NonnegPolicy::Clip && pre_min < 0.0 {
            for v in next.values_mut() {
                if *v < 0.0 {
                    clip -= *v;
                    *v = 0.0;
                }
            }
            clip *= area;
        }
        recorder.rec.clip_masses.push(clip);
        recorder.push(j + 1, &next, pre_min);
        u = next;
    }

    if status == Status::Completed {
        if let Some(m) = opts.stop_at {
            if *recorder.rec.sup_norms.last().unwrap() >= m {
                status = Status::StoppedAtTau { m };
            }
        }
    }

    let mut rec = recorder.rec;
    rec.tau_m_hits = opts.m_thresholds.iter().map(|&m| (m, first_crossing(&rec.sup_norms, &rec.times, m))).collect();
    rec.status = status;
    rec.final_field = u;
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid2D;
    use crate::model::{validate_h1, LinearNoiseSpec, Profile, SourceSpec};
    use crate::operators::{green_solve, heat_semigroup};
    use std::f64::consts::PI;

    fn grid() -> Grid2D {
        Grid2D::new(32, 32, PI, PI).unwrap()
    }

    fn heat_params(u0: ScalarField) -> ModelParams {
        ModelParams::new(0.0, SourceSpec::zero(), Noise::None, u0).unwrap()
    }

    fn max_diff(a: &ScalarField, b: &ScalarField) -> f64 {
        a.values().iter().zip(b.values()).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn theta_profile() {
        let c = CutoffSpec::new(2.0).unwrap();
        assert_eq!(c.theta_m(1.0), 1.0);
        assert_eq!(c.theta_m(6.0), 0.0);
        let mid = c.theta_m(3.0);
        assert!(mid > 0.0 && mid < 1.0);
        assert!((mid - 0.5).abs() < 1e-15);
        // second differences continuous across the junctions
        let h = 1e-4;
        let d2 = |r: f64| (theta(r + h) - 2.0 * theta(r) + theta(r - h)) / (h * h);
        for r in [1.0, 2.0] {
            let left = d2(r - 2.0 * h);
            let right = d2(r + 2.0 * h);
            assert!((left - right).abs() < 1e-1, "jump at {r}: {left} vs {right}");
        }
        assert!(CutoffSpec::new(0.0).is_err());
    }

    #[test]
    fn heat_step_matches_semigroup() {
        let g = grid();
        let u0 = ScalarField::from_fn(&g, |x, y| 1.2 + x.cos() * (2.0 * y).cos() + 0.1 * (x * y).sin());
        let p = heat_params(u0.clone());
        let out = step_mild(&u0, &p, 0.01, &WienerIncrement::zero(0.01, 0), DEFAULT_CEILING).unwrap();
        assert!(max_diff(&out, &heat_semigroup(&u0, 0.01).unwrap()) < 1e-13);
    }

    #[test]
    fn steady_states() {
        let g = grid();
        let c = ScalarField::constant(&g, 2.5);
        let p = ModelParams::new(3.0, SourceSpec::zero(), Noise::None, c.clone()).unwrap();
        let out = step_mild(&c, &p, 0.01, &WienerIncrement::zero(0.01, 0), DEFAULT_CEILING).unwrap();
        assert!(max_diff(&out, &c) < 1e-13);

        let one = ScalarField::constant(&g, 1.0);
        let p = ModelParams::new(1.0, SourceSpec::logistic(1.0), Noise::None, one.clone()).unwrap();
        let out = step_mild(&one, &p, 0.01, &WienerIncrement::zero(0.01, 0), DEFAULT_CEILING).unwrap();
        assert!(max_diff(&out, &one) < 1e-13);
    }

    #[test]
    fn step_rejects_bad_inputs() {
        let g = grid();
        let u = ScalarField::constant(&g, 1.0);
        let p = heat_params(u.clone());
        let z = WienerIncrement::zero(0.01, 0);
        assert!(step_mild(&u, &p, 0.0, &z, DEFAULT_CEILING).is_err());
        assert!(step_mild(&u, &p, 0.01, &WienerIncrement::zero(0.01, 2), DEFAULT_CEILING).is_err());
        let bad = u.map(|_| f64::NAN);
        assert!(step_mild(&bad, &p, 0.01, &z, DEFAULT_CEILING).is_err());
        let spike = ScalarField::constant(&g, 10.0);
        assert!(step_mild(&spike, &p, 0.01, &z, 5.0).unwrap().is_diverged());
    }

    fn desk_params(g: &Grid2D) -> ModelParams {
        let noise = validate_h1(&LinearNoiseSpec::new(vec![0.08, 0.06], Profile::Linear), 1e3).unwrap();
        let u0 = ScalarField::from_fn(g, |x, _| 1.0 + 0.5 * x.cos());
        ModelParams::new(1.0, SourceSpec::logistic(1.0), Noise::Linear(noise), u0).unwrap()
    }

    #[test]
    fn cutoff_step_regimes() {
        let g = grid();
        let p = desk_params(&g);
        let u = p.u0().clone();
        let inc = sample_increment(&SeedCtx::new(1, 0), 0, 0.01, 2).unwrap();
        let c = CutoffSpec::new(2.0).unwrap();
        let plain = step_mild(&u, &p, 0.01, &inc, DEFAULT_CEILING).unwrap();
        let below = step_mild_cutoff(&u, &p, 0.01, &inc, &c, 1.5, DEFAULT_CEILING).unwrap();
        assert_eq!(plain.values(), below.values());

        // drift removed, noise kept
        let above = step_mild_cutoff(&u, &p, 0.01, &inc, &c, 4.0, DEFAULT_CEILING).unwrap();
        let w: f64 = 0.08 * inc.dws[0] + 0.06 * inc.dws[1];
        let expect = heat_semigroup(&u.map(|z| z + w * z), 0.01).unwrap();
        assert!(max_diff(&above, &expect) < 1e-13);
    }

    #[test]
    fn stopping_detection() {
        let times = [0.0, 0.1, 0.2, 0.3];
        let sup = [0.5, 0.9, 1.2, 1.1];
        assert_eq!(first_crossing(&sup, &times, 1.0), Some(Hit { index: 2, time: 0.2 }));
        assert_eq!(first_crossing(&[0.5; 4], &times, 1.0), None);
        assert_eq!(first_crossing(&sup, &times, 0.0).unwrap().index, 0);
    }

    #[test]
    fn heat_trajectory_is_time_exact() {
        let g = grid();
        let u0 = ScalarField::from_fn(&g, |x, y| 2.0 + (2.0 * x).cos() * y.cos());
        let p = heat_params(u0);
        let rec = run_trajectory(&p, 1.0, 0.01, &SeedCtx::new(0, 0), &TrajectoryOptions::default()).unwrap();
        assert_eq!(rec.status, Status::Completed);
        assert_eq!(rec.len(), 101);
        assert!((rec.final_time() - 1.0).abs() < 1e-12);
        let exact = ScalarField::from_fn(&g, |x, y| 2.0 + (-5.0f64).exp() * (2.0 * x).cos() * y.cos());
        assert!(max_diff(&rec.final_field, &exact) < 1e-10);
        assert!(rec.running_sup.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn logistic_ode_follows_closed_form() {
        let g = Grid2D::new(8, 8, 1.0, 1.0).unwrap();
        let p = ModelParams::new(1.0, SourceSpec::logistic(1.0), Noise::None, ScalarField::constant(&g, 0.5)).unwrap();
        let errs: Vec<f64> = [0.02, 0.01]
            .iter()
            .map(|&dt| {
                let rec = run_trajectory(&p, 1.0, dt, &SeedCtx::new(0, 0), &TrajectoryOptions::default()).unwrap();
                let exact = 1.0 / (1.0 + (-1.0f64).exp());
                (rec.final_field.values()[0] - exact).abs()
            })
            .collect();
        assert!(errs[0] < 0.02);
        let ratio = errs[0] / errs[1];
        assert!(ratio > 1.7 && ratio < 2.3, "ratio {ratio}");
    }

    #[test]
    fn runs_are_reproducible_and_record_everything() {
        let g = Grid2D::new(16, 16, PI, PI).unwrap();
        let p = desk_params(&g);
        let opts = TrajectoryOptions {
            lp_norms: vec![2.0, f64::INFINITY],
            m_thresholds: vec![1.0, 100.0],
            snapshot_times: vec![0.05],
            store_fields: true,
            ..Default::default()
        };
        let ctx = SeedCtx::new(9, 2);
        let a = run_trajectory(&p, 0.1, 0.01, &ctx, &opts).unwrap();
        let b = run_trajectory(&p, 0.1, 0.01, &ctx, &opts).unwrap();
        assert_eq!(a.sup_norms, b.sup_norms);
        assert_eq!(a.final_field.values(), b.final_field.values());
        assert_eq!(a.lp_series_for(f64::INFINITY).unwrap(), a.sup_norms.as_slice());
        assert_eq!(a.snapshots.len(), 1);
        assert!((a.snapshots[0].0 - 0.05).abs() < 1e-12);
        assert_eq!(a.fields.as_ref().unwrap().len(), 11);
        assert_eq!(a.increments.as_ref().unwrap().len(), 10);
        assert_eq!(a.tau_m_hits[0].1.unwrap().index, 0);
        assert!(a.tau_m_hits[1].1.is_none());
    }

    #[test]
    fn stop_at_threshold() {
        let g = Grid2D::new(16, 16, PI, PI).unwrap();
        let p = ModelParams::new(
            0.0,
            SourceSpec::Polynomial { coeffs: vec![0.0, 1.0] },
            Noise::None,
            ScalarField::constant(&g, 1.0),
        )
        .unwrap();
        let opts = TrajectoryOptions { stop_at: Some(1.5), ..Default::default() };
        let rec = run_trajectory(&p, 5.0, 0.01, &SeedCtx::new(0, 0), &opts).unwrap();
        assert_eq!(rec.status, Status::StoppedAtTau { m: 1.5 });
        let n = rec.len();
        assert!(rec.running_sup[n - 1] >= 1.5);
        assert!(rec.running_sup[..n - 1].iter().all(|&s| s < 1.5));
    }

    #[test]
    fn divergence_is_recorded() {
        let g = Grid2D::new(16, 16, PI, PI).unwrap();
        let cubic = SourceSpec::Polynomial { coeffs: vec![0.0, 0.0, 0.0, 1.0] };
        let p = ModelParams::new(0.0, cubic, Noise::None, ScalarField::constant(&g, 2.0)).unwrap();
        let rec = run_trajectory(&p, 1.0, 0.001, &SeedCtx::new(0, 0), &TrajectoryOptions::default()).unwrap();
        assert_eq!(rec.status, Status::Diverged);
        assert!(rec.final_field.is_diverged());
    }

    #[test]
    fn elliptic_relation_holds() {
        let g = grid();
        let u = ScalarField::from_fn(&g, |x, y| 1.0 + 0.5 * x.cos() + 0.2 * (3.0 * y).cos());
        let v = green_solve(&u).unwrap();
        let lap = crate::operators::laplacian(&v).unwrap();
        let resid = lap.add(&u).unwrap().sub(&v).unwrap();
        assert!(resid.sup_norm() < 1e-12);
    }
}
