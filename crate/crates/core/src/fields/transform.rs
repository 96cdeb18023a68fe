//! Separable cosine/sine transforms on the cell-centred grid.
//!
//! Along an axis with `n` nodes the cosine basis is `cos(k pi (i + 1/2) / n)`
//! for `k = 0..n`, the Neumann eigenfunctions sampled at cell centres. The
//! sine basis slot `s` holds `sin((s + 1) pi (i + 1/2) / n)`, i.e. wavenumbers
//! `1..=n`; derivatives of cosine series land there. Coefficients are
//! amplitudes: synthesis is the plain sum of coefficient times basis function.

use super::grid::{AxisPlans, Grid2D};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Basis {
    Cos,
    Sin,
}

fn analyze_line(plans: &AxisPlans, basis: Basis, buf: &mut [f64], scratch: &mut [f64]) {
    let n = buf.len();
    let scale = 2.0 / n as f64;
    match basis {
        Basis::Cos => {
            plans.dct2.process_dct2_with_scratch(buf, scratch);
            buf[0] *= 0.5 * scale;
            for c in &mut buf[1..] {
                *c *= scale;
            }
        }
        Basis::Sin => {
            plans.dst2.process_dst2_with_scratch(buf, scratch);
            for c in &mut buf[..n - 1] {
                *c *= scale;
            }
            buf[n - 1] *= 0.5 * scale;
        }
    }
}

fn synthesize_line(plans: &AxisPlans, basis: Basis, buf: &mut [f64], scratch: &mut [f64]) {
    let n = buf.len();
    match basis {
        Basis::Cos => {
            buf[0] *= 2.0;
            plans.dct3.process_dct3_with_scratch(buf, scratch);
        }
        Basis::Sin => {
            buf[n - 1] *= 2.0;
            plans.dst3.process_dst3_with_scratch(buf, scratch);
        }
    }
}

#[derive(Clone, Copy)]
enum Direction {
    Analyze,
    Synthesize,
}

fn apply(grid: &Grid2D, data: &[f64], bx: Basis, by: Basis, dir: Direction) -> Vec<f64> {
    let (nx, ny) = (grid.nx(), grid.ny());
    debug_assert_eq!(data.len(), nx * ny);
    let px = grid.plans_x();
    let py = grid.plans_y();
    let mut out = data.to_vec();
    let mut scratch = vec![0.0; px.scratch_len.max(py.scratch_len)];

    for row in out.chunks_exact_mut(nx) {
        match dir {
            Direction::Analyze => analyze_line(px, bx, row, &mut scratch),
            Direction::Synthesize => synthesize_line(px, bx, row, &mut scratch),
        }
    }

    let mut col = vec![0.0; ny];
    for i in 0..nx {
        for (j, c) in col.iter_mut().enumerate() {
            *c = out[j * nx + i];
        }
        match dir {
            Direction::Analyze => analyze_line(py, by, &mut col, &mut scratch),
            Direction::Synthesize => synthesize_line(py, by, &mut col, &mut scratch),
        }
        for (j, c) in col.iter().enumerate() {
            out[j * nx + i] = *c;
        }
    }
    out
}

/// Nodal values to basis amplitudes.
pub(crate) fn analyze(grid: &Grid2D, values: &[f64], bx: Basis, by: Basis) -> Vec<f64> {
    apply(grid, values, bx, by, Direction::Analyze)
}

/// Basis amplitudes to nodal values.
pub(crate) fn synthesize(grid: &Grid2D, coeffs: &[f64], bx: Basis, by: Basis) -> Vec<f64> {
    apply(grid, coeffs, bx, by, Direction::Synthesize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn basis_value(b: Basis, slot: usize, i: usize, n: usize) -> f64 {
        let arg = (i as f64 + 0.5) * PI / n as f64;
        match b {
            Basis::Cos => (slot as f64 * arg).cos(),
            Basis::Sin => ((slot + 1) as f64 * arg).sin(),
        }
    }

    // Naive double sum; independent of the fast transforms.
    fn naive_synthesis(grid: &Grid2D, coeffs: &[f64], bx: Basis, by: Basis) -> Vec<f64> {
        let (nx, ny) = (grid.nx(), grid.ny());
        let mut out = vec![0.0; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let mut s = 0.0;
                for l in 0..ny {
                    for k in 0..nx {
                        s += coeffs[l * nx + k] * basis_value(bx, k, i, nx) * basis_value(by, l, j, ny);
                    }
                }
                out[j * nx + i] = s;
            }
        }
        out
    }

    fn pseudo_random(n: usize, seed: u64) -> Vec<f64> {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (0..n)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
            })
            .collect()
    }

    #[test]
    fn synthesis_matches_naive_sum_for_every_basis_pair() {
        let grid = Grid2D::new(6, 5, 1.3, 0.7).unwrap();
        let coeffs = pseudo_random(30, 3);
        for &bx in &[Basis::Cos, Basis::Sin] {
            for &by in &[Basis::Cos, Basis::Sin] {
                let fast = synthesize(&grid, &coeffs, bx, by);
                let slow = naive_synthesis(&grid, &coeffs, bx, by);
                for (a, b) in fast.iter().zip(&slow) {
                    assert!((a - b).abs() < 1e-12, "{bx:?}/{by:?}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn analysis_inverts_synthesis() {
        let grid = Grid2D::new(8, 12, 2.0, 1.0).unwrap();
        let coeffs = pseudo_random(96, 11);
        for &bx in &[Basis::Cos, Basis::Sin] {
            for &by in &[Basis::Cos, Basis::Sin] {
                let values = synthesize(&grid, &coeffs, bx, by);
                let back = analyze(&grid, &values, bx, by);
                for (a, b) in back.iter().zip(&coeffs) {
                    assert!((a - b).abs() < 1e-13);
                }
            }
        }
    }
}
