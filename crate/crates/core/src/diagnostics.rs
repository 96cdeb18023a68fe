//! Checks of the pathwise identities and ensemble estimators.

use crate::error::{invalid, Error, Result};
use crate::fields::{from_spectral_unchecked, to_spectral_unchecked, ScalarField, SpectralCoeffs};
use crate::integrator::{bracket, Status, TrajectoryRecord};
use crate::model::{gamma_upper, ModelParams};
use crate::noise::{noise_term, sigma_values};
use crate::operators::{flux_div_coeffs, gradient_from_coeffs};
use crate::stats::{bootstrap_ci, ls_fit, mean, BOOTSTRAP_RESAMPLES, BOOTSTRAP_SEED};

/// `|u|^{p-2} u`.
fn signed_pow(z: f64, p: f64) -> f64 {
    if p == 2.0 {
        z
    } else {
        z.abs().powf(p - 2.0) * z
    }
}

fn abs_pow(z: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else {
        z.abs().powf(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cancellation {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

impl Cancellation {
    pub fn relative(&self) -> f64 {
        self.residual.abs() / (1.0 + self.lhs.abs())
    }
}

/// Both sides of `p int u^{p-1} grad u . grad G u = -int u^p G u + int u^{p+1}`.
pub fn cancellation_check(u: &ScalarField, p: f64) -> Result<Cancellation> {
    if !(p >= 2.0) || !p.is_finite() {
        return Err(invalid(format!("cancellation exponent must be finite and >= 2, got {p}")));
    }
    if !u.is_finite() {
        return Err(Error::NonFinite("cancellation input"));
    }
    let grid = u.grid();
    let u_hat = to_spectral_unchecked(u);
    let eig = grid.spectrum().eigenvalues();
    let mut v_hat = u_hat.clone();
    for (a, lam) in v_hat.coeffs_mut().iter_mut().zip(eig) {
        *a /= 1.0 + lam;
    }
    let v = from_spectral_unchecked(&v_hat);
    let gu = gradient_from_coeffs(&u_hat);
    let gv = gradient_from_coeffs(&v_hat);
    let area = grid.cell_area();
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for n in 0..grid.len() {
        let z = u.values()[n];
        let dot = gu.x()[n] * gv.x()[n] + gu.y()[n] * gv.y()[n];
        lhs += p * signed_pow(z, p) * dot;
        let up = abs_pow(z, p);
        rhs += -up * v.values()[n] + up * z;
    }
    let (lhs, rhs) = (lhs * area, rhs * area);
    Ok(Cancellation { lhs, rhs, residual: lhs - rhs })
}

/// Per-time terms of the `L^p` Itô balance along a stored trajectory.
#[derive(Debug, Clone)]
pub struct ItoLedger {
    pub p: f64,
    pub times: Vec<f64>,
    pub lhs_norm: Vec<f64>,
    pub dissipation: Vec<f64>,
    pub chemo_term: Vec<f64>,
    pub source_term: Vec<f64>,
    pub martingale_term: Vec<f64>,
    pub quadratic_term: Vec<f64>,
    pub residual: Vec<f64>,
}

impl ItoLedger {
    pub fn max_abs_residual(&self) -> f64 {
        self.residual.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    /// CSV with columns `t,norm,dissipation,chemo,source,martingale,quadratic,residual`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,norm,dissipation,chemo,source,martingale,quadratic,residual")?;
        for j in 0..self.times.len() {
            writeln!(
                w,
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                self.times[j],
                self.lhs_norm[j],
                self.dissipation[j],
                self.chemo_term[j],
                self.source_term[j],
                self.martingale_term[j],
                self.quadratic_term[j],
                self.residual[j]
            )?;
        }
        Ok(())
    }
}

const GAUSS3: [(f64, f64); 3] =
    [(0.112_701_665_379_258_31, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.887_298_334_620_741_7, 5.0 / 18.0)];

/// `p (p-1) int_0^dt int |w|^{p-2} |grad w|^2` along `w(s) = e^{-sA} x`.
fn step_dissipation(x_hat: &SpectralCoeffs, p: f64, dt: f64) -> f64 {
    let grid = x_hat.grid();
    let eig = grid.spectrum().eigenvalues();
    let nx = grid.nx();
    if p == 2.0 {
        let mut s = 0.0;
        for (idx, (&a, &lam)) in x_hat.coeffs().iter().zip(eig).enumerate() {
            let w = if idx % nx == 0 { 1.0 } else { 0.5 } * if idx / nx == 0 { 1.0 } else { 0.5 };
            s += a * a * w * -(-2.0 * lam * dt).exp_m1();
        }
        return s * grid.area();
    }
    let area = grid.cell_area();
    let mut total = 0.0;
    for (node, weight) in GAUSS3 {
        let s = node * dt;
        let w_hat = x_hat.apply_multiplier(|lam| (-s * lam).exp());
        let w = from_spectral_unchecked(&w_hat);
        let g = gradient_from_coeffs(&w_hat);
        let mut integrand = 0.0;
        for n in 0..grid.len() {
            let grad2 = g.x()[n] * g.x()[n] + g.y()[n] * g.y()[n];
            integrand += abs_pow(w.values()[n], p - 2.0) * grad2;
        }
        total += weight * dt * p * (p - 1.0) * integrand * area;
    }
    total
}

fn stored(record: &TrajectoryRecord) -> Result<(&[ScalarField], &[crate::noise::WienerIncrement])> {
    let fields = record.fields.as_deref().ok_or(Error::MissingData("stored fields"))?;
    let incs = record.increments.as_deref().ok_or(Error::MissingData("stored increments"))?;
    Ok((fields, incs))
}

/// Steps entering the checks: all of them, except the final crossing step
/// of a stopped or diverged run.
fn evaluated_steps(record: &TrajectoryRecord, fields: usize) -> usize {
    let steps = record.steps().min(fields.saturating_sub(1));
    match record.status {
        Status::Completed => steps,
        Status::StoppedAtTau { .. } | Status::Diverged => steps.saturating_sub(1),
    }
}

/// Left-point Itô ledger for `|u|_p^p` on the record's own increments.
///
/// The chemotactic term is evaluated as `-p int |u|^{p-2} u div(chi u grad v)`
/// with the stepper's discrete divergence; integrating by parts gives the
/// gradient form. Dissipation is integrated exactly along the scheme's
/// semigroup interpolant.
pub fn ito_ledger(record: &TrajectoryRecord, params: &ModelParams, p: f64) -> Result<ItoLedger> {
    if !(p >= 2.0) || !p.is_finite() {
        return Err(invalid(format!("ledger exponent must be finite and >= 2, got {p}")));
    }
    let (fields, incs) = stored(record)?;
    let steps = evaluated_steps(record, fields.len());
    let dt = record.dt;
    let grid = params.u0().grid();
    let area = grid.cell_area();

    let norm_p = |f: &ScalarField| f.values().iter().map(|&z| abs_pow(z, p)).sum::<f64>() * area;
    let mut led = ItoLedger {
        p,
        times: vec![0.0],
        lhs_norm: vec![norm_p(&fields[0])],
        dissipation: vec![0.0],
        chemo_term: vec![0.0],
        source_term: vec![0.0],
        martingale_term: vec![0.0],
        quadratic_term: vec![0.0],
        residual: vec![0.0],
    };
    let (mut diss, mut chemo, mut source, mut mart, mut quad) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for j in 0..steps {
        let u = &fields[j];
        let vals = u.values();
        let (th, s) = (record.thetas[j], record.noise_scales[j]);
        let dws = &incs[j].dws;
        let phi: Vec<f64> = vals.iter().map(|&z| signed_pow(z, p)).collect();
        let u_hat = to_spectral_unchecked(u);

        if params.chi > 0.0 && th > 0.0 {
            let eig = grid.spectrum().eigenvalues();
            let mut v_hat = u_hat.clone();
            for (a, lam) in v_hat.coeffs_mut().iter_mut().zip(eig) {
                *a /= 1.0 + lam;
            }
            let f = from_spectral_unchecked(&flux_div_coeffs(&u_hat, &v_hat, params.chi));
            chemo += -dt * th * p * phi.iter().zip(f.values()).map(|(a, b)| a * b).sum::<f64>() * area;
        }
        if th > 0.0 && !params.source.is_zero() {
            source += dt * th * p * phi.iter().zip(vals).map(|(a, &z)| a * params.source.eval(z)).sum::<f64>() * area;
        }
        if s > 0.0 && params.noise.k_modes() > 0 {
            let n = noise_term(vals, area, &params.noise, dws);
            mart += s * p * phi.iter().zip(&n).map(|(a, b)| a * b).sum::<f64>() * area;
            let sig = sigma_values(vals, area, &params.noise);
            let mut q = 0.0;
            for (i, &z) in vals.iter().enumerate() {
                let s2: f64 = sig.iter().map(|sk| (s * sk[i]).powi(2)).sum();
                q += s2 * abs_pow(z, p - 2.0);
            }
            quad += dt * p * (p - 1.0) / 2.0 * q * area;
        }

        let mut x_hat = u_hat.clone();
        let b = bracket(params, &u_hat, vals, dt, th, s, dws);
        for (a, bb) in x_hat.coeffs_mut().iter_mut().zip(b.coeffs()) {
            *a += bb;
        }
        diss += step_dissipation(&x_hat, p, dt);

        let lhs = norm_p(&fields[j + 1]);
        led.times.push(record.times[j + 1]);
        led.lhs_norm.push(lhs);
        led.dissipation.push(diss);
        led.chemo_term.push(chemo);
        led.source_term.push(source);
        led.martingale_term.push(mart);
        led.quadratic_term.push(quad);
        led.residual.push(lhs - led.lhs_norm[0] + diss - (chemo + source + mart + quad));
    }
    if led.residual.iter().any(|r| !r.is_finite()) {
        return Err(Error::NonFinite("ledger"));
    }
    Ok(led)
}

/// Max over steps of
/// `|d int u - dt theta int g(u) - s sum_i int sigma_i(u) dW_i - clip| / (1 + |int u|)`.
pub fn mass_balance_check(record: &TrajectoryRecord, params: &ModelParams) -> Result<f64> {
    let (fields, incs) = stored(record)?;
    let steps = evaluated_steps(record, fields.len());
    let area = params.u0().grid().cell_area();
    let mut worst = 0.0f64;
    for j in 0..steps {
        let vals = fields[j].values();
        let (th, s) = (record.thetas[j], record.noise_scales[j]);
        let dm = fields[j + 1].integral() - fields[j].integral();
        let src = if th > 0.0 {
            record.dt * th * vals.iter().map(|&z| params.source.eval(z)).sum::<f64>() * area
        } else {
            0.0
        };
        let noise = s * noise_term(vals, area, &params.noise, &incs[j].dws).iter().sum::<f64>() * area;
        let r = (dm - src - noise - record.clip_masses[j]).abs() / (1.0 + fields[j + 1].integral().abs());
        worst = worst.max(r);
    }
    Ok(worst)
}

#[derive(Debug, Clone)]
pub struct Estimate {
    pub mean: f64,
    pub ci: (f64, f64),
    pub per_path: Vec<f64>,
}

impl Estimate {
    fn from_samples(per_path: Vec<f64>) -> Self {
        let m = mean(&per_path);
        let ci = bootstrap_ci(&per_path, BOOTSTRAP_RESAMPLES, 0.95, BOOTSTRAP_SEED);
        Self { mean: m, ci, per_path }
    }

    pub fn ci_width(&self) -> f64 {
        self.ci.1 - self.ci.0
    }

    pub fn overlaps(&self, other: &Estimate) -> bool {
        self.ci.0 <= other.ci.1 && other.ci.0 <= self.ci.1
    }
}

/// Per-path `sup_{t <= t_max} |u(t)|_{p0}^{p0}` from the recorded series.
fn path_sups(records: &[TrajectoryRecord], p: f64, t_max: f64) -> Result<Vec<f64>> {
    if records.is_empty() {
        return Err(invalid("empty ensemble"));
    }
    records
        .iter()
        .map(|r| {
            let series = r.lp_series_for(p).ok_or(Error::MissingData("L^p series for the requested exponent"))?;
            Ok(series
                .iter()
                .zip(&r.times)
                .filter(|(_, t)| **t <= t_max * (1.0 + 1e-12))
                .fold(0.0f64, |m, (v, _)| m.max(v.powf(p))))
        })
        .collect()
}

/// Estimate of `E sup_t |u|_{p0}^{p0}` with a bootstrap interval.
pub fn moment_estimator(records: &[TrajectoryRecord], p0: f64) -> Result<Estimate> {
    moment_estimator_until(records, p0, f64::INFINITY)
}

/// As [`moment_estimator`], restricted to `t <= t_max`.
pub fn moment_estimator_until(records: &[TrajectoryRecord], p0: f64, t_max: f64) -> Result<Estimate> {
    Ok(Estimate::from_samples(path_sups(records, p0, t_max)?))
}

#[derive(Debug, Clone)]
pub struct TailEstimate {
    pub r_grid: Vec<f64>,
    pub survival: Vec<f64>,
    /// Slope of `log S` against `log R` over `R >= max(R) / 10`.
    pub slope: Option<f64>,
    pub insufficient_data: bool,
}

/// Empirical survival of `samples` on `r_grid` and its upper-decade slope.
pub fn tail_from_samples(samples: &[f64], r_grid: &[f64]) -> Result<TailEstimate> {
    if samples.is_empty() {
        return Err(invalid("empty ensemble"));
    }
    if r_grid.is_empty() || r_grid.windows(2).any(|w| w[0] >= w[1]) || r_grid[0] <= 0.0 {
        return Err(invalid("R grid must be positive and increasing"));
    }
    let n = samples.len() as f64;
    let survival: Vec<f64> = r_grid.iter().map(|&r| samples.iter().filter(|&&x| x >= r).count() as f64 / n).collect();
    let r_top = *r_grid.last().unwrap();
    let (xs, ys): (Vec<f64>, Vec<f64>) = r_grid
        .iter()
        .zip(&survival)
        .filter(|(r, s)| **r >= r_top / 10.0 && **s > 0.0)
        .map(|(r, s)| (r.ln(), s.ln()))
        .unzip();
    let slope = if xs.len() >= 3 { ls_fit(&xs, &ys).map(|(b, _)| b) } else { None };
    Ok(TailEstimate { r_grid: r_grid.to_vec(), survival, insufficient_data: slope.is_none(), slope })
}

/// Tail of `sup_t |u|_q^q` across the ensemble.
pub fn tail_estimator(records: &[TrajectoryRecord], q: f64, r_grid: &[f64]) -> Result<TailEstimate> {
    tail_from_samples(&path_sups(records, q, f64::INFINITY)?, r_grid)
}

#[derive(Debug, Clone)]
pub struct GammaEstimate {
    pub estimate: Estimate,
    pub gamma: f64,
    pub window_upper: f64,
    pub in_window: bool,
}

/// `E sup_t |u|_inf^gamma`; `gamma` outside `(0, 1 / (2 max(2, n, r + 1)))`
/// is computed anyway and flagged.
pub fn gamma_moment_estimator(records: &[TrajectoryRecord], gamma: f64, n: f64, r: f64) -> Result<GammaEstimate> {
    if records.is_empty() {
        return Err(invalid("empty ensemble"));
    }
    let per_path = records.iter().map(|rec| rec.running_sup.last().copied().unwrap_or(0.0).powf(gamma)).collect();
    let upper = gamma_upper(n, r);
    Ok(GammaEstimate {
        estimate: Estimate::from_samples(per_path),
        gamma,
        window_upper: upper,
        in_window: gamma > 0.0 && gamma < upper,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaSignReport {
    pub delta: f64,
    /// Constant `C` of `c1 p0 int u^{p0-1} <= delta/2 int u^{p0+1} + C`.
    pub young_constant: f64,
    pub threshold: f64,
    pub checked: usize,
    pub violations: usize,
}

/// Along stored fields, checks
/// `(p0-1) chi int u^{p0+1} + p0 int u^{p0-1} g(u) <= 0`
/// whenever `int u^{p0+1} > 2 C / delta`.
pub fn delta_sign_check(
    record: &TrajectoryRecord,
    params: &ModelParams,
    p0: f64,
    mu_tilde: f64,
    c1: f64,
) -> Result<DeltaSignReport> {
    let (fields, _) = stored(record)?;
    let delta = crate::model::delta(p0, params.chi, mu_tilde);
    if !(delta > 0.0) {
        return Err(invalid(format!("delta = {delta} is not positive for p0 = {p0}")));
    }
    let s_star = (2.0 * p0 * c1 * (p0 - 1.0) / (delta * (p0 + 1.0))).sqrt();
    let pointwise = c1 * p0 * s_star.powf(p0 - 1.0) - delta / 2.0 * s_star.powf(p0 + 1.0);
    let young = pointwise.max(0.0) * params.u0().grid().area();
    let threshold = 2.0 * young / delta;
    let area = params.u0().grid().cell_area();
    let (mut checked, mut violations) = (0, 0);
    for f in fields.iter().filter(|f| f.is_finite()) {
        let mut top = 0.0;
        let mut mixed = 0.0;
        for &z in f.values() {
            let s = z.max(0.0);
            top += s.powf(p0 + 1.0);
            mixed += s.powf(p0 - 1.0) * params.source.eval(s);
        }
        let (top, mixed) = (top * area, mixed * area);
        if top > threshold {
            checked += 1;
            if (p0 - 1.0) * params.chi * top + p0 * mixed > 0.0 {
                violations += 1;
            }
        }
    }
    Ok(DeltaSignReport { delta, young_constant: young, threshold, checked, violations })
}
