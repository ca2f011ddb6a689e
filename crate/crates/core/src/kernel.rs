//! Collocation discretization of the free-space Laplace single-layer volume
//! operator on a uniform grid.
//!
//! Off-diagonal entries are `h^d K(x_i - x_j)`; the diagonal is the integral
//! of `K` over one grid cell, evaluated by singular quadrature.

use std::f64::consts::PI;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Grid, MAX_DIM};
use crate::quadrature;

/// Default cap on the number of points for which dense matrices are formed.
pub const DEFAULT_DENSE_LIMIT: usize = 4096;

/// Free-space Laplace kernel. Dimension 1 uses the planar logarithmic kernel.
pub fn kernel_value(dim: usize, r: &[f64]) -> Result<f64> {
    let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::config("kernel evaluated at zero separation"));
    }
    match dim {
        1 | 2 => Ok(log_kernel(norm)),
        3 => Ok(newton_kernel(norm)),
        _ => Err(Error::config(format!("unsupported dimension {dim}"))),
    }
}

#[inline]
fn log_kernel(r: f64) -> f64 {
    -r.ln() / (2.0 * PI)
}

#[inline]
fn newton_kernel(r: f64) -> f64 {
    1.0 / (4.0 * PI * r)
}

/// Integral of the kernel over the cell `[-h/2, h/2]^dim` centred at the origin.
pub fn diagonal_entry(dim: usize, h: f64) -> Result<f64> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::config(format!("cell width must be positive (got {h})")));
    }
    let a = 0.5 * h;
    match dim {
        // -(1/2pi) int_{-a}^{a} ln|t| dt
        1 => Ok(h / (2.0 * PI) * (1.0 - a.ln())),
        2 => {
            // Eight congruent triangles with apex at the origin; the radial
            // integral of r ln r is done in closed form, the angle numerically.
            let radial = |theta: f64| {
                let big_r = a / theta.cos();
                0.5 * big_r * big_r * (big_r.ln() - 0.5)
            };
            let angular = quadrature::adaptive_gauss(radial, 0.0, PI / 4.0, 1e-15)?;
            Ok(-8.0 * angular / (2.0 * PI))
        }
        3 => {
            // Six pyramids with apex at the origin; after the Duffy transform
            // the integrand over each face is smooth.
            let face = quadrature::adaptive_gauss_2d(
                |u, v| 1.0 / (1.0 + u * u + v * v).sqrt(),
                (-1.0, 1.0),
                (-1.0, 1.0),
                1e-15,
            )?;
            Ok(6.0 * 0.5 * a * a * face / (4.0 * PI))
        }
        _ => Err(Error::config(format!("unsupported dimension {dim}"))),
    }
}

/// Where the kernel is evaluated for off-diagonal entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointLayout {
    /// Cell centres `h (j - 1/2)`, `h = 1/n`.
    #[default]
    Centered,
    /// Nodes of the closed grid with spacing `1/(n-1)`. Weights and the
    /// diagonal cell integral still use `h = 1/n`. For the logarithmic
    /// kernel this shifts every off-diagonal entry by `h² ln(1 - h) / 2π`.
    Nodal,
}

impl PointLayout {
    /// Factor applied to physical distances before evaluating the kernel.
    pub fn distance_scale(self, grid: &Grid) -> f64 {
        match self {
            PointLayout::Centered => 1.0,
            PointLayout::Nodal => {
                let n = grid.n_per_dim() as f64;
                n / (n - 1.0)
            }
        }
    }
}

impl std::fmt::Display for PointLayout {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PointLayout::Centered => "centered",
            PointLayout::Nodal => "nodal",
        })
    }
}

impl std::str::FromStr for PointLayout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "centered" => Ok(PointLayout::Centered),
            "nodal" => Ok(PointLayout::Nodal),
            other => Err(Error::config(format!("unknown point layout '{other}'"))),
        }
    }
}

/// Entry-wise access to the discretized operator on a uniform grid.
///
/// Entries depend only on the absolute per-axis index offset, so they are
/// served from a precomputed table of `n^dim` values. Symmetry and
/// translation invariance hold exactly.
#[derive(Debug, Clone)]
pub struct KernelOperator {
    grid: Grid,
    layout: PointLayout,
    scale: f64,
    diag: f64,
    weight: f64,
    table: Vec<f64>,
}

impl KernelOperator {
    pub fn new(grid: &Grid) -> Result<Self> {
        Self::with_layout(grid, PointLayout::Centered)
    }

    pub fn with_layout(grid: &Grid, layout: PointLayout) -> Result<Self> {
        let dim = grid.dim();
        let scale = layout.distance_scale(grid);
        let h = grid.spacing();
        let diag = diagonal_entry(dim, h)?;
        let weight = h.powi(dim as i32);
        let n = grid.n_per_dim();
        let mut table = vec![0.0; grid.len()];
        for (k, slot) in table.iter_mut().enumerate() {
            let off = grid.multi_index(k);
            if k == 0 {
                *slot = diag;
                continue;
            }
            let r = (0..dim)
                .map(|a| (off[a] as f64 * h).powi(2))
                .sum::<f64>()
                .sqrt()
                * scale;
            *slot = weight * if dim == 3 { newton_kernel(r) } else { log_kernel(r) };
        }
        debug_assert_eq!(table.len(), n.pow(dim as u32));
        Ok(Self {
            grid: *grid,
            layout,
            scale,
            diag,
            weight,
            table,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn layout(&self) -> PointLayout {
        self.layout
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn diag_value(&self) -> f64 {
        self.diag
    }

    /// Quadrature weight `h^dim` of off-diagonal entries.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Entry for the absolute per-axis offset `off` (in grid steps).
    #[inline]
    pub fn offset_entry(&self, off: &[usize; MAX_DIM]) -> f64 {
        self.table[self.grid.linear_index(off)]
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let n = self.grid.n_per_dim();
        let (mut a, mut b) = (i, j);
        let mut idx = 0;
        let mut stride = 1;
        for _ in 0..self.grid.dim() {
            idx += (a % n).abs_diff(b % n) * stride;
            a /= n;
            b /= n;
            stride *= n;
        }
        self.table[idx]
    }

    /// `h^dim K(x - x_j)` for an arbitrary point `x` (not a grid point).
    #[inline]
    pub fn point_entry(&self, x: &[f64; MAX_DIM], j: usize) -> f64 {
        let y = self.grid.point(j);
        let r = (0..self.grid.dim())
            .map(|a| (x[a] - y[a]).powi(2))
            .sum::<f64>()
            .sqrt()
            * self.scale;
        self.weight
            * if self.grid.dim() == 3 {
                newton_kernel(r)
            } else {
                log_kernel(r)
            }
    }

    pub fn assemble_block(&self, rows: &[usize], cols: &[usize]) -> Mat<f64> {
        Mat::from_fn(rows.len(), cols.len(), |i, j| self.entry(rows[i], cols[j]))
    }

    /// The full dense matrix. Callers are expected to respect a dense limit.
    pub fn assemble_full(&self) -> Mat<f64> {
        let n = self.len();
        Mat::from_fn(n, n, |i, j| self.entry(i, j))
    }
}
