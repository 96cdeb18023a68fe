//! Empirical certification of the smoothing estimates of the Neumann heat
//! semigroup. The constants in those estimates are existential, so the
//! report gives the largest observed ratio of left side to right-side shape;
//! what is checked is that these ratios stay bounded on the time grid and are
//! stable when the grid is refined.
//!
//! Test fields are band-limited (modes below [`BAND`]) with random amplitudes
//! drawn from a seed, so the same continuum function is sampled at every
//! resolution.

use std::fmt;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{divergence_coeffs, gradient_from_coeffs};
use crate::error::{invalid, Result};
use crate::fields::transform::{self, Basis};
use crate::fields::{from_spectral_unchecked, lp_norm_of, Grid2D, SpectralCoeffs};

/// Number of modes per axis carrying random amplitude in the test fields.
pub const BAND: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Estimate {
    /// `|(A+1)^b e^{-tA} w|_p <= C t^{-b} e^{-nu1 t} |w|_p`
    A1,
    /// `|grad e^{-tA} w|_p <= C (1 + t^{-1/2}) e^{-nu1 t} |w|_p`
    A2,
    /// `|grad e^{-tA} w|_p <= C e^{-nu1 t} |w|_{W^{1,p}}`, p >= 2
    A3,
    /// `|(A+1)^b e^{-tA} div w|_p <= C t^{-1/2-b-eps} e^{-nu1 t} |w|_p`
    A4,
    /// `|e^{-tA} div w|_p <= C t^{-1/2} e^{-nu1 t} |w|_p`
    A5,
}

impl fmt::Display for Estimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Estimate::A1 => "A1",
            Estimate::A2 => "A2",
            Estimate::A3 => "A3",
            Estimate::A4 => "A4",
            Estimate::A5 => "A5",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificationRow {
    pub estimate: Estimate,
    pub p: f64,
    pub beta: f64,
    pub t: f64,
    pub max_ratio: f64,
    pub trials: usize,
}

#[derive(Debug, Clone)]
pub struct CertificationReport {
    pub rows: Vec<CertificationRow>,
    pub epsilon: f64,
}

impl CertificationReport {
    /// Largest ratio over the time grid for one `(estimate, p, beta)` cell.
    pub fn max_over_t(&self, estimate: Estimate, p: f64, beta: f64) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.estimate == estimate && r.p == p && r.beta == beta)
            .map(|r| r.max_ratio)
            .reduce(f64::max)
    }

    /// Distinct `(estimate, p, beta)` cells in row order.
    pub fn cells(&self) -> Vec<(Estimate, f64, f64)> {
        let mut out: Vec<(Estimate, f64, f64)> = Vec::new();
        for r in &self.rows {
            if !out.iter().any(|&(e, p, b)| e == r.estimate && p == r.p && b == r.beta) {
                out.push((r.estimate, r.p, r.beta));
            }
        }
        out
    }

    pub fn all_finite(&self) -> bool {
        self.rows.iter().all(|r| r.max_ratio.is_finite())
    }

    /// CSV with columns `estimate_id,p,beta,t,max_ratio,trials`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "estimate_id,p,beta,t,max_ratio,trials")?;
        for r in &self.rows {
            let p = if r.p.is_infinite() { "inf".to_string() } else { r.p.to_string() };
            writeln!(w, "{},{},{},{:e},{:e},{}", r.estimate, p, r.beta, r.t, r.max_ratio, r.trials)?;
        }
        Ok(())
    }
}

fn band_limited(grid: &Grid2D, rng: &mut ChaCha8Rng, bx: Basis, by: Basis) -> Vec<f64> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut c = vec![0.0; nx * ny];
    for l in 0..BAND {
        for k in 0..BAND {
            let z: f64 = StandardNormal.sample(rng);
            // drawn unconditionally so the stream does not depend on resolution
            if k < nx && l < ny {
                let kk = if bx == Basis::Sin { k + 1 } else { k } as f64;
                let ll = if by == Basis::Sin { l + 1 } else { l } as f64;
                c[l * nx + k] = z / (1.0 + kk * kk + ll * ll);
            }
        }
    }
    c
}

fn vector_norm(x: &[f64], y: &[f64], area: f64, p: f64) -> f64 {
    let mag: Vec<f64> = x.iter().zip(y).map(|(a, b)| a.hypot(*b)).collect();
    lp_norm_of(&mag, area, p)
}

/// Ratios for each estimate over `trials` random fields, every `t` in
/// `t_grid`, every `p` in `p_list` and every `beta` in `beta_list`
/// (`A2`, `A3`, `A5` carry no power and report `beta = 0`; `A3` only for
/// finite `p >= 2`).
pub fn certify_semigroup_estimates(
    grid: &Grid2D,
    trials: usize,
    t_grid: &[f64],
    p_list: &[f64],
    beta_list: &[f64],
    epsilon: f64,
    seed: u64,
) -> Result<CertificationReport> {
    if trials == 0 || t_grid.is_empty() || p_list.is_empty() || beta_list.is_empty() {
        return Err(invalid("certification needs trials >= 1 and nonempty lists"));
    }
    if t_grid.iter().any(|&t| !(t > 0.0)) {
        return Err(invalid("certification times must be positive"));
    }
    if p_list.iter().any(|&p| !(p >= 1.0)) {
        return Err(invalid("norm exponents must be >= 1"));
    }
    let nu1 = grid.spectrum().nu1();
    let area = grid.cell_area();

    let mut cells: Vec<(Estimate, f64, f64)> = Vec::new();
    for &p in p_list {
        for &b in beta_list {
            cells.push((Estimate::A1, p, b));
        }
        cells.push((Estimate::A2, p, 0.0));
        if p >= 2.0 && p.is_finite() {
            cells.push((Estimate::A3, p, 0.0));
        }
        for &b in beta_list {
            cells.push((Estimate::A4, p, b));
        }
        cells.push((Estimate::A5, p, 0.0));
    }
    let mut best = vec![vec![0.0f64; t_grid.len()]; cells.len()];

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let omega = SpectralCoeffs::from_coeffs(grid, band_limited(grid, &mut rng, Basis::Cos, Basis::Cos))?;
        let wx_c = band_limited(grid, &mut rng, Basis::Sin, Basis::Cos);
        let wy_c = band_limited(grid, &mut rng, Basis::Cos, Basis::Sin);
        let wx = transform::synthesize(grid, &wx_c, Basis::Sin, Basis::Cos);
        let wy = transform::synthesize(grid, &wy_c, Basis::Cos, Basis::Sin);
        let div_w = divergence_coeffs(grid, &wx, &wy);

        let omega_nodal = from_spectral_unchecked(&omega);
        let omega_grad = gradient_from_coeffs(&omega);

        for (ti, &t) in t_grid.iter().enumerate() {
            let decay = (nu1 * t).exp();
            let heat = omega.apply_multiplier(|lam| (-t * lam).exp());
            let grad_heat = gradient_from_coeffs(&heat);
            let heat_div = from_spectral_unchecked(&div_w.apply_multiplier(|lam| (-t * lam).exp()));
            let powered: Vec<(f64, Vec<f64>, Vec<f64>)> = beta_list
                .iter()
                .map(|&b| {
                    let a1 =
                        from_spectral_unchecked(&omega.apply_multiplier(|lam| (lam + 1.0).powf(b) * (-t * lam).exp()));
                    let a4 =
                        from_spectral_unchecked(&div_w.apply_multiplier(|lam| (lam + 1.0).powf(b) * (-t * lam).exp()));
                    (b, a1.into_values(), a4.into_values())
                })
                .collect();

            for (ci, &(est, p, beta)) in cells.iter().enumerate() {
                let omega_p = lp_norm_of(omega_nodal.values(), area, p);
                let w_p = vector_norm(&wx, &wy, area, p);
                let ratio = match est {
                    Estimate::A1 => {
                        let (_, a1, _) = powered.iter().find(|(b, _, _)| *b == beta).unwrap();
                        lp_norm_of(a1, area, p) * t.powf(beta) * decay / omega_p
                    }
                    Estimate::A2 => {
                        vector_norm(grad_heat.x(), grad_heat.y(), area, p) * decay / ((1.0 + t.powf(-0.5)) * omega_p)
                    }
                    Estimate::A3 => {
                        let w1p = (omega_p.powf(p)
                            + lp_norm_of(omega_grad.x(), area, p).powf(p)
                            + lp_norm_of(omega_grad.y(), area, p).powf(p))
                        .powf(1.0 / p);
                        vector_norm(grad_heat.x(), grad_heat.y(), area, p) * decay / w1p
                    }
                    Estimate::A4 => {
                        let (_, _, a4) = powered.iter().find(|(b, _, _)| *b == beta).unwrap();
                        lp_norm_of(a4, area, p) * t.powf(0.5 + beta + epsilon) * decay / w_p
                    }
                    Estimate::A5 => lp_norm_of(heat_div.values(), area, p) * t.sqrt() * decay / w_p,
                };
                let slot = &mut best[ci][ti];
                *slot = if ratio.is_nan() { f64::NAN } else { slot.max(ratio) };
            }
        }
    }

    let mut rows = Vec::with_capacity(cells.len() * t_grid.len());
    for (ci, &(estimate, p, beta)) in cells.iter().enumerate() {
        for (ti, &t) in t_grid.iter().enumerate() {
            rows.push(CertificationRow { estimate, p, beta, t, max_ratio: best[ci][ti], trials });
        }
    }
    Ok(CertificationReport { rows, epsilon })
}

/// `count` log-spaced points between `lo` and `hi`, inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_mode_ratio_is_closed_form() {
        // With a constant field every power-semigroup output equals the input,
        // so the A1 ratio is t^beta e^{nu1 t}.
        let g = Grid2D::new(16, 16, PI, PI).unwrap();
        let omega = SpectralCoeffs::from_coeffs(&g, {
            let mut c = vec![0.0; 256];
            c[0] = 2.0;
            c
        })
        .unwrap();
        let t: f64 = 0.3;
        let beta = 0.45;
        let out = from_spectral_unchecked(&omega.apply_multiplier(|lam| (lam + 1.0).powf(beta) * (-t * lam).exp()));
        let ratio = lp_norm_of(out.values(), g.cell_area(), 4.0) * t.powf(beta) * (t).exp()
            / lp_norm_of(from_spectral_unchecked(&omega).values(), g.cell_area(), 4.0);
        assert!((ratio - t.powf(beta) * t.exp()).abs() < 1e-13);
    }

    #[test]
    fn single_mode_gradient_ratio_is_closed_form() {
        // omega = cos(2x) on [0, pi]^2: lambda = 4, ratio
        // sqrt(lambda) e^{(nu1 - lambda) t} / (1 + t^{-1/2}) in L2.
        let g = Grid2D::new(64, 64, PI, PI).unwrap();
        for &t in &[1e-3, 0.1, 1.0] {
            let mut c = vec![0.0; g.len()];
            c[2] = 1.0;
            let omega = SpectralCoeffs::from_coeffs(&g, c).unwrap();
            let grad = gradient_from_coeffs(&omega.apply_multiplier(|lam| (-t * lam).exp()));
            let num = vector_norm(grad.x(), grad.y(), g.cell_area(), 2.0);
            let den = lp_norm_of(from_spectral_unchecked(&omega).values(), g.cell_area(), 2.0);
            let ratio = num * t.exp() / ((1.0 + t.powf(-0.5)) * den);
            let want = 2.0 * (-3.0 * t).exp() / (1.0 + t.powf(-0.5));
            assert!((ratio - want).abs() < 1e-12, "t = {t}: {ratio} vs {want}");
        }
    }

    #[test]
    fn report_is_finite_and_shaped() {
        let g = Grid2D::new(16, 16, PI, PI).unwrap();
        let ts = log_grid(1e-3, 1.0, 4);
        let rep = certify_semigroup_estimates(&g, 3, &ts, &[2.0, f64::INFINITY], &[0.0, 0.25], 0.05, 9).unwrap();
        assert!(rep.all_finite());
        // per p: 2 A1 + A2 + (A3 for p = 2) + 2 A4 + A5
        assert_eq!(rep.cells().len(), 7 + 6);
        assert_eq!(rep.rows.len(), rep.cells().len() * ts.len());
        let mut csv = Vec::new();
        rep.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("estimate_id,p,beta,t,max_ratio,trials\n"));
        assert!(text.contains("A5,inf,0,"));
    }

    #[test]
    fn rejects_empty_inputs() {
        let g = Grid2D::new(8, 8, 1.0, 1.0).unwrap();
        assert!(certify_semigroup_estimates(&g, 0, &[0.1], &[2.0], &[0.0], 0.05, 1).is_err());
        assert!(certify_semigroup_estimates(&g, 1, &[], &[2.0], &[0.0], 0.05, 1).is_err());
        assert!(certify_semigroup_estimates(&g, 1, &[0.0], &[2.0], &[0.0], 0.05, 1).is_err());
    }

    #[test]
    fn log_grid_endpoints() {
        let ts = log_grid(1e-3, 1.0, 7);
        assert_eq!(ts.len(), 7);
        assert!((ts[0] - 1e-3).abs() < 1e-15);
        assert!((ts[6] - 1.0).abs() < 1e-12);
        assert!((ts[3] - 10f64.powf(-1.5)).abs() < 1e-12);
    }
}
