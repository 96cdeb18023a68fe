//! Fixed-point iteration of the cutoff mild equation on a frozen noise path.

use std::io::Write;

use crate::error::{invalid, Error, Result};
use crate::fields::{from_spectral_unchecked, to_spectral_unchecked, ScalarField, SpectralCoeffs};
use crate::integrator::{bracket, cutoff_factors, path_increment, propagate, step_count, CutoffSpec};
use crate::model::ModelParams;
use crate::noise::{SeedCtx, WienerIncrement};

/// Discrete Duhamel map
/// `Phi(u)(t_j) = e^{-t_j A} u0 + sum_{i<j} e^{-(t_j - t_i) A} B_i(u)`
/// where `B_i` is the left-point bracket at `u(t_i)` with the cutoff taken at
/// the running sup of the input. The sum is accumulated by the recursion
/// `Phi_{j+1} = e^{-dt A} (Phi_j + B_j)`.
pub fn phi_apply(
    u_traj: &[ScalarField],
    params: &ModelParams,
    cutoff: &CutoffSpec,
    increments: &[WienerIncrement],
    dt: f64,
) -> Result<Vec<ScalarField>> {
    if !(dt > 0.0) {
        return Err(invalid(format!("dt must be > 0, got {dt}")));
    }
    let steps = increments.len();
    if u_traj.len() < steps + 1 {
        return Err(invalid(format!(
            "input trajectory has {} times, the frozen path needs {}",
            u_traj.len(),
            steps + 1
        )));
    }
    let grid = params.u0().grid();
    let mut out = Vec::with_capacity(steps + 1);
    out.push(params.u0().clone());
    let mut acc = to_spectral_unchecked(params.u0());
    let mut running = 0.0f64;
    for (i, inc) in increments.iter().enumerate() {
        let ui = &u_traj[i];
        if !ui.grid().same_as(grid) {
            return Err(Error::GridMismatch);
        }
        if !ui.is_finite() {
            return Err(Error::NonFinite("picard input"));
        }
        running = running.max(ui.sup_norm());
        let (th, s) = cutoff_factors(params, cutoff, running);
        let ui_hat = to_spectral_unchecked(ui);
        let b: SpectralCoeffs = bracket(params, &ui_hat, ui.values(), dt, th, s, &inc.dws);
        propagate(&mut acc, &b, dt);
        let next = from_spectral_unchecked(&acc);
        if !next.is_finite() {
            return Err(Error::NonFinite("picard iterate"));
        }
        out.push(next);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct PicardReport {
    /// `d_k = max_j |u^{k+1}(t_j) - u^k(t_j)|_inf`.
    pub diffs: Vec<f64>,
    /// `d_{k+1} / d_k` for each `d_k > 0`.
    pub ratios: Vec<f64>,
    pub converged: bool,
    pub solution: Vec<ScalarField>,
    pub increments: Vec<WienerIncrement>,
    pub t_end: f64,
    pub m: f64,
}

impl PicardReport {
    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn iterations(&self) -> usize {
        self.diffs.len()
    }

    /// CSV with columns `iter,diff_sup,ratio`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "iter,diff_sup,ratio")?;
        for (k, d) in self.diffs.iter().enumerate() {
            let ratio =
                if k > 0 && self.diffs[k - 1] > 0.0 { format!("{:e}", d / self.diffs[k - 1]) } else { String::new() };
            writeln!(w, "{},{:e},{}", k, d, ratio)?;
        }
        Ok(())
    }
}

fn sup_diff(a: &[ScalarField], b: &[ScalarField]) -> f64 {
    a.iter().zip(b).flat_map(|(x, y)| x.values().iter().zip(y.values()).map(|(p, q)| (p - q).abs())).fold(0.0, f64::max)
}

/// Iterates `u^{k+1} = Phi(u^k)` from the constant-in-time trajectory `u0`
/// until `d_k < tol` or `max_iter` applications.
#[allow(clippy::too_many_arguments)]
pub fn picard_solve(
    params: &ModelParams,
    cutoff: &CutoffSpec,
    t_end: f64,
    dt: f64,
    ctx: &SeedCtx,
    tol: f64,
    max_iter: usize,
    brownian_base_dt: Option<f64>,
) -> Result<PicardReport> {
    let steps = step_count(t_end, dt)?;
    let k_modes = params.noise.k_modes();
    let increments =
        (0..steps as u64).map(|j| path_increment(ctx, j, dt, k_modes, brownian_base_dt)).collect::<Result<Vec<_>>>()?;
    let mut u = vec![params.u0().clone(); steps + 1];
    let mut diffs = Vec::new();
    let mut converged = false;
    for _ in 0..max_iter {
        let next = phi_apply(&u, params, cutoff, &increments, dt)?;
        let d = sup_diff(&next, &u);
        diffs.push(d);
        u = next;
        if d < tol {
            converged = true;
            break;
        }
    }
    let ratios = diffs.windows(2).filter(|w| w[0] > 0.0).map(|w| w[1] / w[0]).collect();
    Ok(PicardReport { diffs, ratios, converged, solution: u, increments, t_end, m: cutoff.m() })
}
