//! Functional calculus of the Neumann Laplacian on the rectangle.
//!
//! `A = -Laplacian` with zero normal derivative is diagonal in the cosine
//! basis with eigenvalues `(k pi / lx)^2 + (l pi / ly)^2`, so every operator
//! here is a coefficient-wise multiplier, except the first-order operators,
//! which move between the cosine and sine bases.

mod certify;

pub use certify::{certify_semigroup_estimates, log_grid, CertificationReport, CertificationRow, Estimate};

use crate::error::{invalid, Error, Result};
use crate::fields::transform::{self, Basis};
use crate::fields::{from_spectral_unchecked, to_spectral, Grid2D, ScalarField, SpectralCoeffs, VectorField};

/// Neumann spectrum of the grid's rectangle, truncated to the resolved modes.
#[derive(Debug, Clone)]
pub struct SpectrumInfo {
    eigenvalues: Vec<f64>,
    nu1: f64,
}

impl SpectrumInfo {
    pub(crate) fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Self {
        let pi = std::f64::consts::PI;
        let mut eigenvalues = Vec::with_capacity(nx * ny);
        for l in 0..ny {
            let ql = (l as f64 * pi / ly).powi(2);
            for k in 0..nx {
                eigenvalues.push((k as f64 * pi / lx).powi(2) + ql);
            }
        }
        let nu1 = (pi / lx).min(pi / ly).powi(2);
        Self { eigenvalues, nu1 }
    }

    /// Eigenvalue table indexed like the coefficients, `l * nx + k`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// First nonzero eigenvalue.
    pub fn nu1(&self) -> f64 {
        self.nu1
    }
}

fn multiply(field: &ScalarField, f: impl Fn(f64) -> f64) -> Result<ScalarField> {
    let c = to_spectral(field)?;
    Ok(from_spectral_unchecked(&c.apply_multiplier(f)))
}

/// `e^{-tA} u`.
pub fn heat_semigroup(field: &ScalarField, t: f64) -> Result<ScalarField> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(invalid(format!("semigroup time must be >= 0, got {t}")));
    }
    multiply(field, |lam| (-t * lam).exp())
}

/// `(A + 1)^beta e^{-tA} u`.
pub fn frac_power_semigroup(field: &ScalarField, beta: f64, t: f64) -> Result<ScalarField> {
    if !(beta >= 0.0) {
        return Err(invalid(format!("fractional power must be >= 0, got {beta}")));
    }
    if !(t >= 0.0) || (t == 0.0 && beta > 0.0) {
        return Err(invalid(format!("fractional semigroup needs t > 0, got {t}")));
    }
    multiply(field, |lam| (lam + 1.0).powf(beta) * (-t * lam).exp())
}

/// Solves `-Lap v + v = u` with Neumann conditions, `v = G * u`.
pub fn green_solve(u: &ScalarField) -> Result<ScalarField> {
    multiply(u, |lam| 1.0 / (1.0 + lam))
}

/// Spectral Neumann Laplacian.
pub fn laplacian(u: &ScalarField) -> Result<ScalarField> {
    multiply(u, |lam| -lam)
}

/// Yosida approximation `n (n + A)^{-1}`, defined for `n > nu1`.
pub fn yosida_apply(field: &ScalarField, n: f64) -> Result<ScalarField> {
    let nu1 = field.grid().spectrum().nu1();
    if !(n > nu1) {
        return Err(invalid(format!("Yosida parameter {n} must exceed nu1 = {nu1}")));
    }
    multiply(field, |lam| n / (n + lam))
}

pub(crate) fn gradient_from_coeffs(c: &SpectralCoeffs) -> VectorField {
    let grid = c.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let a = c.coeffs();
    let mut sx = vec![0.0; nx * ny];
    let mut sy = vec![0.0; nx * ny];
    for l in 0..ny {
        for k in 1..nx {
            sx[l * nx + k - 1] = -a[l * nx + k] * grid.wavenumber_x(k);
        }
    }
    for l in 1..ny {
        for k in 0..nx {
            sy[(l - 1) * nx + k] = -a[l * nx + k] * grid.wavenumber_y(l);
        }
    }
    let x = transform::synthesize(grid, &sx, Basis::Sin, Basis::Cos);
    let y = transform::synthesize(grid, &sy, Basis::Cos, Basis::Sin);
    VectorField::new(grid, x, y).expect("component lengths match grid")
}

pub(crate) fn divergence_coeffs(grid: &Grid2D, fx: &[f64], fy: &[f64]) -> SpectralCoeffs {
    let (nx, ny) = (grid.nx(), grid.ny());
    let bx = transform::analyze(grid, fx, Basis::Sin, Basis::Cos);
    let by = transform::analyze(grid, fy, Basis::Cos, Basis::Sin);
    let mut a = vec![0.0; nx * ny];
    // Sine slot nx - 1 (wavenumber nx) differentiates to a cosine that
    // vanishes at every cell centre, so it is dropped.
    for l in 0..ny {
        for k in 1..nx {
            a[l * nx + k] += bx[l * nx + k - 1] * grid.wavenumber_x(k);
        }
    }
    for l in 1..ny {
        for k in 0..nx {
            a[l * nx + k] += by[(l - 1) * nx + k] * grid.wavenumber_y(l);
        }
    }
    SpectralCoeffs::from_coeffs(grid, a).expect("length matches grid")
}

/// Spectral gradient of a cosine series, returned at the cell centres.
pub fn gradient(field: &ScalarField) -> Result<VectorField> {
    Ok(gradient_from_coeffs(&to_spectral(field)?))
}

/// Spectral divergence; each component is re-analysed in the basis that
/// vanishes on the walls it is normal to.
pub fn divergence(vf: &VectorField) -> Result<ScalarField> {
    if !vf.is_finite() {
        return Err(Error::NonFinite("divergence input"));
    }
    Ok(from_spectral_unchecked(&divergence_coeffs(vf.grid(), vf.x(), vf.y())))
}

/// Highest retained wavenumber index under the two-thirds rule for an axis
/// with `n` cosine modes (aliases of `k` land on `2n - k`).
pub(crate) fn dealias_cutoff(n: usize) -> usize {
    (2 * n).div_ceil(3) - 1
}

pub(crate) fn truncate(c: &mut SpectralCoeffs) {
    let grid = c.grid().clone();
    let (nx, kx, ky) = (grid.nx(), dealias_cutoff(grid.nx()), dealias_cutoff(grid.ny()));
    for (idx, v) in c.coeffs_mut().iter_mut().enumerate() {
        if idx % nx > kx || idx / nx > ky {
            *v = 0.0;
        }
    }
}

/// `div(chi u grad v)` in spectral space, with both factors and the product
/// truncated by the two-thirds rule.
pub(crate) fn flux_div_coeffs(u: &SpectralCoeffs, v: &SpectralCoeffs, chi: f64) -> SpectralCoeffs {
    let grid = u.grid();
    let mut uf = u.clone();
    truncate(&mut uf);
    let mut vf = v.clone();
    truncate(&mut vf);
    let u_nodal = from_spectral_unchecked(&uf);
    let (gx, gy) = gradient_from_coeffs(&vf).into_parts();
    let fx: Vec<f64> = u_nodal.values().iter().zip(&gx).map(|(a, b)| chi * a * b).collect();
    let fy: Vec<f64> = u_nodal.values().iter().zip(&gy).map(|(a, b)| chi * a * b).collect();
    let mut out = divergence_coeffs(grid, &fx, &fy);
    truncate(&mut out);
    out
}

/// Chemotactic flux divergence `div(chi u grad v)`, pseudo-spectral with
/// two-thirds dealiasing of the quadratic product.
pub fn chemotaxis_flux_div(u: &ScalarField, v: &ScalarField, chi: f64) -> Result<ScalarField> {
    if !u.grid().same_as(v.grid()) {
        return Err(Error::GridMismatch);
    }
    if !(chi >= 0.0) || !chi.is_finite() {
        return Err(invalid(format!("chemotactic sensitivity must be >= 0, got {chi}")));
    }
    let uc = to_spectral(u)?;
    let vc = to_spectral(v)?;
    Ok(from_spectral_unchecked(&flux_div_coeffs(&uc, &vc, chi)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::lp_norm;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn square(n: usize) -> Grid2D {
        Grid2D::new(n, n, PI, PI).unwrap()
    }

    fn max_diff(a: &ScalarField, b: &ScalarField) -> f64 {
        a.sub(b).unwrap().sup_norm()
    }

    fn smooth(grid: &Grid2D) -> ScalarField {
        ScalarField::from_fn(grid, |x, y| {
            1.0 + 0.4 * (x.cos() * (2.0 * y).cos()) + 0.2 * (3.0 * x).cos() - 0.1 * (y.cos() * (x).cos()).powi(2)
        })
    }

    #[test]
    fn spectrum_matches_geometry() {
        let g = Grid2D::new(8, 6, 2.0, 3.0).unwrap();
        let s = g.spectrum();
        assert_eq!(s.eigenvalues()[0], 0.0);
        assert!(s.eigenvalues()[1..].iter().all(|&l| l > 0.0));
        assert!((s.nu1() - (PI / 3.0).powi(2)).abs() < 1e-15);
        assert!((square(16).spectrum().nu1() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn heat_semigroup_examples() {
        let g = square(32);
        let u = smooth(&g);
        assert!(max_diff(&heat_semigroup(&u, 0.0).unwrap(), &u) < 1e-14);

        let c = ScalarField::constant(&g, 2.5);
        assert!(max_diff(&heat_semigroup(&c, 3.0).unwrap(), &c) < 1e-14);

        let mode = ScalarField::from_fn(&g, |x, _| x.cos());
        let out = heat_semigroup(&mode, 1.0).unwrap();
        assert!(max_diff(&out, &mode.scaled((-1.0f64).exp())) < 1e-14);

        assert!(heat_semigroup(&u, -1e-3).is_err());
    }

    #[test]
    fn fractional_semigroup_examples() {
        let g = square(32);
        let u = smooth(&g);
        let a = frac_power_semigroup(&u, 0.0, 0.3).unwrap();
        assert!(max_diff(&a, &heat_semigroup(&u, 0.3).unwrap()) < 1e-14);

        let c = ScalarField::constant(&g, 0.7);
        assert!(max_diff(&frac_power_semigroup(&c, 1.0, 0.5).unwrap(), &c) < 1e-14);

        let mode = ScalarField::from_fn(&g, |x, _| x.cos());
        let out = frac_power_semigroup(&mode, 0.5, 1.0).unwrap();
        let factor = 2f64.sqrt() * (-1.0f64).exp();
        assert!(max_diff(&out, &mode.scaled(factor)) < 1e-14);

        assert!(frac_power_semigroup(&u, 0.5, 0.0).is_err());
        assert!(frac_power_semigroup(&u, -0.5, 1.0).is_err());
    }

    #[test]
    fn green_solve_examples() {
        let g = square(64);
        let c = ScalarField::constant(&g, 4.0);
        assert!(max_diff(&green_solve(&c).unwrap(), &c) < 1e-14);

        let mode = ScalarField::from_fn(&g, |x, _| x.cos());
        let v = green_solve(&mode).unwrap();
        assert!(max_diff(&v, &mode.scaled(0.5)) < 1e-14);

        // residual of -Lap v + v - u in coefficient space
        let u = smooth(&g);
        let v = green_solve(&u).unwrap();
        let resid = v.sub(&laplacian(&v).unwrap()).unwrap().sub(&u).unwrap();
        assert!(resid.sup_norm() < 1e-12 * u.sup_norm());
    }

    #[test]
    fn green_solve_preserves_positivity() {
        let g = square(32);
        let mut state = 12345u64;
        let values = (0..g.len())
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
                (state >> 11) as f64 / (1u64 << 53) as f64
            })
            .collect();
        let u = ScalarField::from_values(&g, values).unwrap();
        assert!(green_solve(&u).unwrap().min() >= -1e-12);
    }

    #[test]
    fn gradient_examples() {
        let g = Grid2D::new(48, 32, PI, 2.0).unwrap();
        let zero = gradient(&ScalarField::constant(&g, 3.0)).unwrap();
        assert!(zero.x().iter().chain(zero.y()).all(|v| v.abs() < 1e-13));

        let mode = ScalarField::from_fn(&g, |x, _| x.cos());
        let grad = gradient(&mode).unwrap();
        let expected = VectorField::from_fn(&g, |x, _| (-x.sin(), 0.0));
        for (a, b) in grad.x().iter().zip(expected.x()) {
            assert!((a - b).abs() < 1e-13);
        }
        assert!(grad.y().iter().all(|v| v.abs() < 1e-13));

        let ymode = ScalarField::from_fn(&g, |_, y| (PI * y / 2.0).cos());
        let gy = gradient(&ymode).unwrap();
        for j in 0..g.ny() {
            let want = -(PI / 2.0) * (PI * g.y(j) / 2.0).sin();
            assert!((gy.y()[j * g.nx()] - want).abs() < 1e-13);
        }
    }

    #[test]
    fn divergence_examples() {
        let g = square(32);
        let zero = divergence(&VectorField::zeros(&g)).unwrap();
        assert_eq!(zero.sup_norm(), 0.0);

        let mode = ScalarField::from_fn(&g, |x, _| x.cos());
        let lap = divergence(&gradient(&mode).unwrap()).unwrap();
        assert!(max_diff(&lap, &mode.scaled(-1.0)) < 1e-13);
    }

    #[test]
    fn flux_with_constant_density_is_scaled_laplacian() {
        let g = square(64);
        let c = 1.3;
        let v = smooth(&g);
        let flux = chemotaxis_flux_div(&ScalarField::constant(&g, c), &v, 2.0).unwrap();
        let want = laplacian(&v).unwrap().scaled(2.0 * c);
        assert!(max_diff(&flux, &want) < 1e-11);
    }

    #[test]
    fn flux_vanishes_for_constant_attractant() {
        let g = square(32);
        let flux = chemotaxis_flux_div(&smooth(&g), &ScalarField::constant(&g, 5.0), 1.0).unwrap();
        assert!(flux.sup_norm() < 1e-13);
    }

    #[test]
    fn flux_integrates_to_zero() {
        let g = square(64);
        let u = smooth(&g).map(|v| v * v);
        let v = green_solve(&u).unwrap();
        let flux = chemotaxis_flux_div(&u, &v, 1.0).unwrap();
        let scale = 1.0 + u.sup_norm() * v.sup_norm();
        assert!(flux.integral().abs() < 1e-10 * scale);
    }

    #[test]
    fn yosida_examples() {
        let g = square(32);
        let c = ScalarField::constant(&g, 1.1);
        assert!(max_diff(&yosida_apply(&c, 5.0).unwrap(), &c) < 1e-14);

        let u = smooth(&g);
        let errs: Vec<f64> = [10.0, 100.0, 1000.0]
            .iter()
            .map(|&n| lp_norm(&yosida_apply(&u, n).unwrap().sub(&u).unwrap(), 2.0).unwrap())
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2]);
        assert!(errs[2] < 1e-2);
        assert!(lp_norm(&yosida_apply(&u, 2.0).unwrap(), 2.0).unwrap() <= lp_norm(&u, 2.0).unwrap());

        // nu1 = 1 on [0, pi]^2
        assert!(yosida_apply(&u, 1.0).is_err());
        assert!(yosida_apply(&u, 1.0 + 1e-9).is_ok());
    }

    #[test]
    fn dealias_cutoff_values() {
        assert_eq!(dealias_cutoff(64), 42);
        assert_eq!(dealias_cutoff(6), 3);
        // aliases of the product modes land strictly above the cutoff
        for n in 4..200 {
            let k = dealias_cutoff(n);
            assert!(2 * n - 2 * k > k, "n = {n}");
            assert!(3 * k < 2 * n);
        }
    }

    fn field_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-2.0f64..2.0, n * n)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn semigroup_law_and_mass(values in field_strategy(16), s in 0.0f64..0.5, t in 0.0f64..0.5) {
            let g = square(16);
            let u = ScalarField::from_values(&g, values).unwrap();
            let two = heat_semigroup(&heat_semigroup(&u, s).unwrap(), t).unwrap();
            let one = heat_semigroup(&u, s + t).unwrap();
            prop_assert!(max_diff(&two, &one) <= 1e-12 * (1.0 + u.sup_norm()));
            let m = u.integral();
            prop_assert!((one.integral() - m).abs() <= 1e-12 * (1.0 + m.abs()));
            prop_assert!((green_solve(&u).unwrap().integral() - m).abs() <= 1e-12 * (1.0 + m.abs()));
        }

        #[test]
        fn green_and_heat_commute(values in field_strategy(12), t in 0.0f64..1.0) {
            let g = square(12);
            let u = ScalarField::from_values(&g, values).unwrap();
            let a = green_solve(&heat_semigroup(&u, t).unwrap()).unwrap();
            let b = heat_semigroup(&green_solve(&u).unwrap(), t).unwrap();
            prop_assert!(max_diff(&a, &b) < 1e-13);
        }

        #[test]
        fn heat_keeps_nonnegative_data_nonnegative(values in prop::collection::vec(0.0f64..3.0, 256), t in 0.01f64..1.0) {
            let g = square(16);
            let u = ScalarField::from_values(&g, values).unwrap();
            prop_assert!(heat_semigroup(&u, t).unwrap().min() >= -1e-12);
        }

        #[test]
        fn gradient_is_minus_adjoint_of_divergence(
            values in field_strategy(12), wx in field_strategy(12), wy in field_strategy(12)
        ) {
            let g = Grid2D::new(12, 12, 1.5, 2.5).unwrap();
            let u = ScalarField::from_values(&g, values).unwrap();
            let w = VectorField::new(&g, wx, wy).unwrap();
            let lhs = gradient(&u).unwrap().inner(&w).unwrap();
            let rhs = -u.inner(&divergence(&w).unwrap()).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
            prop_assert!(divergence(&w).unwrap().integral().abs() <= 1e-10 * (1.0 + w.inner(&w).unwrap().sqrt()));
        }

        #[test]
        fn gradient_is_linear(a in field_strategy(8), b in field_strategy(8)) {
            let g = square(8);
            let u = ScalarField::from_values(&g, a).unwrap();
            let w = ScalarField::from_values(&g, b).unwrap();
            let lhs = gradient(&u.add(&w).unwrap()).unwrap();
            let rhs = gradient(&u).unwrap().add(&gradient(&w).unwrap()).unwrap();
            for (p, q) in lhs.x().iter().chain(lhs.y()).zip(rhs.x().iter().chain(rhs.y())) {
                prop_assert!((p - q).abs() < 1e-12);
            }
        }
    }
}
