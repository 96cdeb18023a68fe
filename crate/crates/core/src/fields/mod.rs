//! Grid, nodal fields, their cosine-spectral representation and norm quadrature.

mod grid;
pub mod snapshot;
pub(crate) mod transform;

pub use grid::{build_grid, Grid2D};

use crate::error::{invalid, Error, Result};
use crate::operators;
use transform::Basis;

/// Nodal values of a scalar quantity at the cell centres of a grid.
#[derive(Clone, Debug)]
pub struct ScalarField {
    grid: Grid2D,
    values: Vec<f64>,
    diverged: bool,
}

/// Cosine-basis amplitudes `a[l * nx + k]` of a field,
/// `u(x, y) = sum a_kl cos(k pi x / lx) cos(l pi y / ly)`.
#[derive(Clone, Debug)]
pub struct SpectralCoeffs {
    grid: Grid2D,
    coeffs: Vec<f64>,
}

/// Two nodal components at the cell centres.
#[derive(Clone, Debug)]
pub struct VectorField {
    grid: Grid2D,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Grid2D) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Grid2D, c: f64) -> Self {
        Self { grid: grid.clone(), values: vec![c; grid.len()], diverged: false }
    }

    pub fn from_values(grid: &Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid(format!("expected {} nodal values, got {}", grid.len(), values.len())));
        }
        Ok(Self { grid: grid.clone(), values, diverged: false })
    }

    /// Samples `f(x, y)` at every cell centre.
    pub fn from_fn(grid: &Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny() {
            let y = grid.y(j);
            for i in 0..grid.nx() {
                values.push(f(grid.x(i), y));
            }
        }
        Self { grid: grid.clone(), values, diverged: false }
    }

    pub(crate) fn from_raw(grid: &Grid2D, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid: grid.clone(), values, diverged: false }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.grid.nx() + i]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn is_diverged(&self) -> bool {
        self.diverged
    }

    pub fn mark_diverged(&mut self) {
        self.diverged = true;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn add(&self, other: &ScalarField) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn zip_with(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self::from_raw(&self.grid, values))
    }

    /// Cell-average quadrature of the field over the rectangle.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Cell-average inner product.
    pub fn inner(&self, other: &ScalarField) -> Result<f64> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        Ok(s * self.grid.cell_area())
    }
}

impl SpectralCoeffs {
    pub fn zeros(grid: &Grid2D) -> Self {
        Self { grid: grid.clone(), coeffs: vec![0.0; grid.len()] }
    }

    pub fn from_coeffs(grid: &Grid2D, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(invalid(format!("expected {} coefficients, got {}", grid.len(), coeffs.len())));
        }
        Ok(Self { grid: grid.clone(), coeffs })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    /// Amplitude of mode `(k, l)`.
    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.coeffs[l * self.grid.nx() + k]
    }

    /// Multiplies every coefficient by `f(eigenvalue)`.
    pub fn apply_multiplier(&self, f: impl Fn(f64) -> f64) -> Self {
        let eig = self.grid.spectrum().eigenvalues();
        let coeffs = self.coeffs.iter().zip(eig).map(|(&c, &lam)| c * f(lam)).collect();
        Self { grid: self.grid.clone(), coeffs }
    }

    /// Squared cell-average L2 norm of the synthesised field, computed from
    /// the coefficients: `area * sum a_kl^2 w_k w_l` with `w_0 = 1`, `w_k = 1/2`.
    pub fn l2_norm_sq(&self) -> f64 {
        let nx = self.grid.nx();
        let mut s = 0.0;
        for (idx, &c) in self.coeffs.iter().enumerate() {
            let (k, l) = (idx % nx, idx / nx);
            let wk = if k == 0 { 1.0 } else { 0.5 };
            let wl = if l == 0 { 1.0 } else { 0.5 };
            s += c * c * wk * wl;
        }
        s * self.grid.area()
    }
}

impl VectorField {
    pub fn new(grid: &Grid2D, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != grid.len() || y.len() != grid.len() {
            return Err(invalid("vector field component length does not match grid"));
        }
        Ok(Self { grid: grid.clone(), x, y })
    }

    pub fn zeros(grid: &Grid2D) -> Self {
        Self { grid: grid.clone(), x: vec![0.0; grid.len()], y: vec![0.0; grid.len()] }
    }

    pub fn from_fn(grid: &Grid2D, f: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        let mut x = Vec::with_capacity(grid.len());
        let mut y = Vec::with_capacity(grid.len());
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let (a, b) = f(grid.x(i), grid.y(j));
                x.push(a);
                y.push(b);
            }
        }
        Self { grid: grid.clone(), x, y }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.y).all(|v| v.is_finite())
    }

    /// Pointwise Euclidean magnitude.
    pub fn magnitude(&self) -> ScalarField {
        let values = self.x.iter().zip(&self.y).map(|(a, b)| a.hypot(*b)).collect();
        ScalarField::from_raw(&self.grid, values)
    }

    pub fn inner(&self, other: &VectorField) -> Result<f64> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        let sx: f64 = self.x.iter().zip(&other.x).map(|(a, b)| a * b).sum();
        let sy: f64 = self.y.iter().zip(&other.y).map(|(a, b)| a * b).sum();
        Ok((sx + sy) * self.grid.cell_area())
    }

    pub fn add(&self, other: &VectorField) -> Result<Self> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        let x = self.x.iter().zip(&other.x).map(|(a, b)| a + b).collect();
        let y = self.y.iter().zip(&other.y).map(|(a, b)| a + b).collect();
        Ok(Self { grid: self.grid.clone(), x, y })
    }

    pub(crate) fn into_parts(self) -> (Vec<f64>, Vec<f64>) {
        (self.x, self.y)
    }
}

pub fn to_spectral(field: &ScalarField) -> Result<SpectralCoeffs> {
    if !field.is_finite() {
        return Err(Error::NonFinite("to_spectral input"));
    }
    Ok(to_spectral_unchecked(field))
}

pub(crate) fn to_spectral_unchecked(field: &ScalarField) -> SpectralCoeffs {
    let coeffs = transform::analyze(&field.grid, &field.values, Basis::Cos, Basis::Cos);
    SpectralCoeffs { grid: field.grid.clone(), coeffs }
}

pub fn from_spectral(coeffs: &SpectralCoeffs) -> Result<ScalarField> {
    if coeffs.coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("from_spectral input"));
    }
    Ok(from_spectral_unchecked(coeffs))
}

pub(crate) fn from_spectral_unchecked(coeffs: &SpectralCoeffs) -> ScalarField {
    let values = transform::synthesize(&coeffs.grid, &coeffs.coeffs, Basis::Cos, Basis::Cos);
    ScalarField::from_raw(&coeffs.grid, values)
}

fn check_exponent(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        return Err(invalid(format!("norm exponent must be >= 1, got {p}")));
    }
    Ok(())
}

/// Cell-average `L^p` norm; `p = f64::INFINITY` gives the nodal maximum of `|u|`.
pub fn lp_norm(field: &ScalarField, p: f64) -> Result<f64> {
    check_exponent(p)?;
    Ok(lp_norm_of(field.values(), field.grid().cell_area(), p))
}

pub(crate) fn lp_norm_of(values: &[f64], cell_area: f64, p: f64) -> f64 {
    if p.is_infinite() {
        return values.iter().fold(0.0, |m, v| m.max(v.abs()));
    }
    if p == 1.0 {
        return values.iter().map(|v| v.abs()).sum::<f64>() * cell_area;
    }
    if p == 2.0 {
        return (values.iter().map(|v| v * v).sum::<f64>() * cell_area).sqrt();
    }
    // Scale by the max to keep large exponents from overflowing.
    let m = values.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    let s: f64 = values.iter().map(|v| (v.abs() / m).powf(p)).sum();
    m * (s * cell_area).powf(1.0 / p)
}

/// `p`-th power of the `L^p` norm, `sum |u|^p dx dy`, for finite `p`.
pub fn lp_norm_pow(field: &ScalarField, p: f64) -> Result<f64> {
    check_exponent(p)?;
    if p.is_infinite() {
        return Err(invalid("lp_norm_pow needs a finite exponent"));
    }
    Ok(field.values().iter().map(|v| v.abs().powf(p)).sum::<f64>() * field.grid().cell_area())
}

/// `W^{1,p}` norm with spectral derivatives:
/// `(|u|_p^p + |u_x|_p^p + |u_y|_p^p)^{1/p}`, or the max of the three sup norms.
pub fn w1p_norm(field: &ScalarField, p: f64) -> Result<f64> {
    check_exponent(p)?;
    let grad = operators::gradient(field)?;
    let area = field.grid().cell_area();
    let parts = [lp_norm_of(field.values(), area, p), lp_norm_of(grad.x(), area, p), lp_norm_of(grad.y(), area, p)];
    if p.is_infinite() {
        return Ok(parts.into_iter().fold(0.0, f64::max));
    }
    Ok(parts.iter().map(|n| n.powf(p)).sum::<f64>().powf(1.0 / p))
}
