//! Brownian increments and the diffusion terms of both noise regimes.
//!
//! Increments are keyed by `(master_seed, path_index)` as the ChaCha key and
//! the step index as the stream id, so any single increment can be
//! regenerated without replaying the path.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::fields::{from_spectral_unchecked, lp_norm_of, to_spectral_unchecked, ScalarField, SpectralCoeffs};
use crate::model::{LinearNoise, Noise, NonlinearNoise};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedCtx {
    pub master_seed: u64,
    pub path_index: u64,
}

impl SeedCtx {
    pub fn new(master_seed: u64, path_index: u64) -> Self {
        Self { master_seed, path_index }
    }

    fn rng(&self, step: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.master_seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.path_index.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(step);
        rng
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WienerIncrement {
    pub dt: f64,
    pub dws: Vec<f64>,
}

impl WienerIncrement {
    pub fn zero(dt: f64, k_modes: usize) -> Self {
        Self { dt, dws: vec![0.0; k_modes] }
    }
}

pub fn sample_increment(ctx: &SeedCtx, step_index: u64, dt: f64, k_modes: usize) -> Result<WienerIncrement> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(invalid(format!("increment dt must be > 0, got {dt}")));
    }
    let mut rng = ctx.rng(step_index);
    let scale = dt.sqrt();
    let dws = (0..k_modes).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
    Ok(WienerIncrement { dt, dws })
}

/// Increment over coarse step `step_index` of size `dt`, summed from the
/// underlying fine increments of size `fine_dt`; `dt` must be an integer
/// multiple of `fine_dt`. Paths at different `dt` then share one Brownian
/// motion.
pub fn aggregated_increment(
    ctx: &SeedCtx,
    step_index: u64,
    dt: f64,
    fine_dt: f64,
    k_modes: usize,
) -> Result<WienerIncrement> {
    let ratio = refinement_ratio(dt, fine_dt)?;
    let mut dws = vec![0.0; k_modes];
    for sub in 0..ratio {
        let inc = sample_increment(ctx, step_index * ratio + sub, fine_dt, k_modes)?;
        for (a, b) in dws.iter_mut().zip(&inc.dws) {
            *a += b;
        }
    }
    Ok(WienerIncrement { dt, dws })
}

pub(crate) fn refinement_ratio(dt: f64, fine_dt: f64) -> Result<u64> {
    if !(fine_dt > 0.0) || !(dt > 0.0) {
        return Err(invalid("increment steps must be > 0"));
    }
    let ratio = (dt / fine_dt).round();
    if ratio < 1.0 || ((ratio * fine_dt - dt) / dt).abs() > 1e-9 {
        return Err(invalid(format!("dt = {dt} is not a multiple of the base step {fine_dt}")));
    }
    Ok(ratio as u64)
}

/// Fields `kappa_i h(u)`.
pub fn diffusion_fields(u: &ScalarField, noise: &LinearNoise) -> Vec<ScalarField> {
    let hu = u.map(|z| noise.spec().profile.eval(z));
    noise.spec().kappas.iter().map(|&k| hu.scaled(k)).collect()
}

/// Fields `b_i |u|_q^r u`.
pub fn nonlinear_diffusion_fields(u: &ScalarField, noise: &NonlinearNoise) -> Vec<ScalarField> {
    let spec = noise.spec();
    let amp = lp_norm_of(u.values(), u.grid().cell_area(), spec.q).powf(spec.r);
    spec.bs.iter().map(|&b| u.scaled(b * amp)).collect()
}

/// Nodal values of `sum_i sigma_i(u) dW_i`.
pub(crate) fn noise_term(values: &[f64], cell_area: f64, noise: &Noise, dws: &[f64]) -> Vec<f64> {
    match noise {
        Noise::None => vec![0.0; values.len()],
        Noise::Linear(n) => {
            let w: f64 = n.spec().kappas.iter().zip(dws).map(|(k, d)| k * d).sum();
            values.iter().map(|&z| w * n.spec().profile.eval(z)).collect()
        }
        Noise::Nonlinear(n) => {
            let spec = n.spec();
            let w: f64 = spec.bs.iter().zip(dws).map(|(b, d)| b * d).sum();
            let amp = lp_norm_of(values, cell_area, spec.q).powf(spec.r);
            values.iter().map(|&z| w * amp * z).collect()
        }
    }
}

/// Nodal values of each `sigma_i(u)`.
pub(crate) fn sigma_values(values: &[f64], cell_area: f64, noise: &Noise) -> Vec<Vec<f64>> {
    match noise {
        Noise::None => Vec::new(),
        Noise::Linear(n) => {
            let hu: Vec<f64> = values.iter().map(|&z| n.spec().profile.eval(z)).collect();
            n.spec().kappas.iter().map(|&k| hu.iter().map(|h| k * h).collect()).collect()
        }
        Noise::Nonlinear(n) => {
            let spec = n.spec();
            let amp = lp_norm_of(values, cell_area, spec.q).powf(spec.r);
            spec.bs.iter().map(|&b| values.iter().map(|z| b * amp * z).collect()).collect()
        }
    }
}

/// Left-point discretization of `int_0^t e^{-(t-s)A} h(s) dW_s` at
/// `t = t_index * dt`, through the recursion
/// `M_{j+1} = e^{-dt A} (M_j + sum_i h_i(t_j) dW_i^j)`.
pub fn stochastic_convolution(
    h_path: &[Vec<ScalarField>],
    increments: &[WienerIncrement],
    t_index: usize,
) -> Result<ScalarField> {
    if t_index > h_path.len() || t_index > increments.len() {
        return Err(invalid(format!(
            "time index {t_index} beyond stored path of length {}",
            h_path.len().min(increments.len())
        )));
    }
    let grid = h_path
        .first()
        .and_then(|hs| hs.first())
        .map(|f| f.grid().clone())
        .ok_or(Error::MissingData("diffusion fields"))?;
    let mut m = SpectralCoeffs::zeros(&grid);
    for j in 0..t_index {
        let (hs, inc) = (&h_path[j], &increments[j]);
        if hs.len() != inc.dws.len() {
            return Err(invalid("diffusion fields and increments disagree on the mode count"));
        }
        let mut forcing = vec![0.0; grid.len()];
        for (h, dw) in hs.iter().zip(&inc.dws) {
            if !h.grid().same_as(&grid) {
                return Err(Error::GridMismatch);
            }
            for (f, v) in forcing.iter_mut().zip(h.values()) {
                *f += v * dw;
            }
        }
        let fc = to_spectral_unchecked(&ScalarField::from_raw(&grid, forcing));
        let eig = grid.spectrum().eigenvalues();
        for ((a, f), lam) in m.coeffs_mut().iter_mut().zip(fc.coeffs()).zip(eig) {
            *a = (-inc.dt * lam).exp() * (*a + f);
        }
    }
    let out = from_spectral_unchecked(&m);
    if !out.is_finite() {
        return Err(Error::NonFinite("stochastic convolution"));
    }
    Ok(out)
}
