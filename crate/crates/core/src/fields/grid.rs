use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustdct::{Dct2, Dct3, DctPlanner, Dst2, Dst3};

use crate::error::{Error, Result};
use crate::operators::SpectrumInfo;

/// Uniform cell-centred grid on the rectangle `[0, lx] x [0, ly]`.
///
/// Nodes sit at `((i + 1/2) dx, (j + 1/2) dy)`. Values are stored y-major:
/// index `j * nx + i`. The grid is cheap to clone; spectrum tables and
/// transform plans are shared between clones.
#[derive(Clone)]
pub struct Grid2D {
    inner: Arc<GridInner>,
}

struct GridInner {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    dx: f64,
    dy: f64,
    spectrum: SpectrumInfo,
    plans_x: AxisPlans,
    plans_y: AxisPlans,
}

pub(crate) struct AxisPlans {
    pub dct2: Arc<dyn Dct2<f64>>,
    pub dct3: Arc<dyn Dct3<f64>>,
    pub dst2: Arc<dyn Dst2<f64>>,
    pub dst3: Arc<dyn Dst3<f64>>,
    pub scratch_len: usize,
}

impl AxisPlans {
    fn new(planner: &mut DctPlanner<f64>, n: usize) -> Self {
        let dct2 = planner.plan_dct2(n);
        let dct3 = planner.plan_dct3(n);
        let dst2 = planner.plan_dst2(n);
        let dst3 = planner.plan_dst3(n);
        let scratch_len =
            [dct2.get_scratch_len(), dct3.get_scratch_len(), dst2.get_scratch_len(), dst3.get_scratch_len()]
                .into_iter()
                .max()
                .unwrap_or(0);
        Self { dct2, dct3, dst2, dst3, scratch_len }
    }
}

/// Builds a grid with `nx * ny` cells on `[0, lx] x [0, ly]`.
pub fn build_grid(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Grid2D> {
    Grid2D::new(nx, ny, lx, ly)
}

impl Grid2D {
    pub const MIN_NODES: usize = 4;

    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < Self::MIN_NODES || ny < Self::MIN_NODES {
            return Err(Error::InvalidGrid(format!(
                "need at least {} nodes per axis, got {nx} x {ny}",
                Self::MIN_NODES
            )));
        }
        if !(lx > 0.0 && lx.is_finite() && ly > 0.0 && ly.is_finite()) {
            return Err(Error::InvalidGrid(format!("side lengths must be positive and finite, got {lx} x {ly}")));
        }
        let mut planner = DctPlanner::new();
        let plans_x = AxisPlans::new(&mut planner, nx);
        let plans_y = AxisPlans::new(&mut planner, ny);
        let spectrum = SpectrumInfo::new(nx, ny, lx, ly);
        Ok(Self {
            inner: Arc::new(GridInner {
                nx,
                ny,
                lx,
                ly,
                dx: lx / nx as f64,
                dy: ly / ny as f64,
                spectrum,
                plans_x,
                plans_y,
            }),
        })
    }

    pub fn nx(&self) -> usize {
        self.inner.nx
    }

    pub fn ny(&self) -> usize {
        self.inner.ny
    }

    pub fn lx(&self) -> f64 {
        self.inner.lx
    }

    pub fn ly(&self) -> f64 {
        self.inner.ly
    }

    pub fn dx(&self) -> f64 {
        self.inner.dx
    }

    pub fn dy(&self) -> f64 {
        self.inner.dy
    }

    pub fn len(&self) -> usize {
        self.inner.nx * self.inner.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_area(&self) -> f64 {
        self.inner.dx * self.inner.dy
    }

    pub fn area(&self) -> f64 {
        self.inner.lx * self.inner.ly
    }

    /// Cell-centre coordinate of node `i` along x.
    pub fn x(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.inner.dx
    }

    pub fn y(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.inner.dy
    }

    /// Angular wavenumber `k pi / lx` of cosine mode `k`.
    pub fn wavenumber_x(&self, k: usize) -> f64 {
        k as f64 * PI / self.inner.lx
    }

    pub fn wavenumber_y(&self, l: usize) -> f64 {
        l as f64 * PI / self.inner.ly
    }

    pub fn spectrum(&self) -> &SpectrumInfo {
        &self.inner.spectrum
    }

    pub(crate) fn plans_x(&self) -> &AxisPlans {
        &self.inner.plans_x
    }

    pub(crate) fn plans_y(&self) -> &AxisPlans {
        &self.inner.plans_y
    }

    /// Two grids are compatible when they describe the same geometry.
    pub fn same_as(&self, other: &Grid2D) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.nx == other.inner.nx
                && self.inner.ny == other.inner.ny
                && self.inner.lx == other.inner.lx
                && self.inner.ly == other.inner.ly)
    }
}

impl PartialEq for Grid2D {
    fn eq(&self, other: &Self) -> bool {
        self.same_as(other)
    }
}

impl fmt::Debug for Grid2D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid2D")
            .field("nx", &self.inner.nx)
            .field("ny", &self.inner.ny)
            .field("lx", &self.inner.lx)
            .field("ly", &self.inner.ly)
            .finish()
    }
}
