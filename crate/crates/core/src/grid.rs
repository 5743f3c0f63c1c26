//! Uniform vertex-centered grids on rectangles, nodal scalar fields, the
//! five-point Laplacian, central-difference Hessians and discrete balls.
//!
//! Node `(i, j)` sits at `(xmin + i·hx, ymin + j·hy)` and is stored at
//! `j·nx + i` (row-major, rows are lines of constant `y`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expression;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64, nx: usize, ny: usize) -> Result<Self> {
        let finite = [xmin, xmax, ymin, ymax].iter().all(|v| v.is_finite());
        if !finite || xmax <= xmin || ymax <= ymin {
            return Err(Error::InvalidGrid(format!(
                "degenerate rectangle [{xmin}, {xmax}] x [{ymin}, {ymax}]"
            )));
        }
        if nx < 3 || ny < 3 {
            return Err(Error::InvalidGrid(format!("need nx, ny >= 3, got {nx} x {ny}")));
        }
        Ok(Self {
            xmin,
            xmax,
            ymin,
            ymax,
            nx,
            ny,
        })
    }

    /// `[-half, half]²` with `n` nodes per axis.
    pub fn square(half: f64, n: usize) -> Result<Self> {
        Self::new(-half, half, -half, half, n, n)
    }

    pub fn hx(&self) -> f64 {
        (self.xmax - self.xmin) / (self.nx - 1) as f64
    }

    pub fn hy(&self) -> f64 {
        (self.ymax - self.ymin) / (self.ny - 1) as f64
    }

    pub fn h(&self) -> f64 {
        self.hx().max(self.hy())
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn x(&self, i: usize) -> f64 {
        self.xmin + i as f64 * self.hx()
    }

    pub fn y(&self, j: usize) -> f64 {
        self.ymin + j as f64 * self.hy()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn coords(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.nx - 1 || j == self.ny - 1
    }

    /// Nodes at least `margin` steps away from the boundary.
    pub fn is_inside(&self, i: usize, j: usize, margin: usize) -> bool {
        i >= margin && j >= margin && i + margin < self.nx && j + margin < self.ny
    }

    /// Node closest to a point, clamped into the grid.
    pub fn nearest(&self, x: f64, y: f64) -> (usize, usize) {
        let fi = ((x - self.xmin) / self.hx()).round().clamp(0.0, (self.nx - 1) as f64);
        let fj = ((y - self.ymin) / self.hy()).round().clamp(0.0, (self.ny - 1) as f64);
        (fi as usize, fj as usize)
    }

    /// Index ranges covering the bounding box of the disk `B_r(center)`.
    fn ball_box(&self, cx: f64, cy: f64, r: f64) -> (usize, usize, usize, usize) {
        let (hx, hy) = (self.hx(), self.hy());
        let lo = |c: f64, min: f64, h: f64| ((c - r - min) / h).floor().max(0.0) as usize;
        let hi = |c: f64, min: f64, h: f64, n: usize| {
            (((c + r - min) / h).ceil().max(0.0) as usize).min(n - 1)
        };
        (
            lo(cx, self.xmin, hx),
            hi(cx, self.xmin, hx, self.nx),
            lo(cy, self.ymin, hy),
            hi(cy, self.ymin, hy, self.ny),
        )
    }

    /// Visits nodes of the discrete ball `{|node - center| <= r}` in
    /// lexicographic order.
    pub fn for_each_in_ball(&self, cx: f64, cy: f64, r: f64, mut f: impl FnMut(usize, usize)) {
        if !(r >= 0.0) {
            return;
        }
        let (i0, i1, j0, j1) = self.ball_box(cx, cy, r);
        // Relative slack so that nodes lying exactly on the sphere are kept
        // symmetrically despite rounding in the node coordinates.
        let r2 = r * r * (1.0 + 1e-12);
        for j in j0..=j1 {
            let dy = self.y(j) - cy;
            for i in i0..=i1 {
                let dx = self.x(i) - cx;
                if dx * dx + dy * dy <= r2 {
                    f(i, j);
                }
            }
        }
    }
}

/// Nodal values on a grid. Masked nodes (boundary margins of difference
/// operators, singular sample points) carry `NaN` and are excluded from all
/// norms and averages.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
    active: Vec<bool>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        let active = values.iter().map(|v| v.is_finite()).collect();
        Ok(Self {
            grid,
            values,
            active,
        })
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
            active: vec![true; grid.len()],
        }
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            let y = grid.y(j);
            for i in 0..grid.nx {
                values.push(f(grid.x(i), y));
            }
        }
        let active = values.iter().map(|v: &f64| v.is_finite()).collect();
        Self {
            grid,
            values,
            active,
        }
    }

    /// Like [`ScalarField::from_fn`], masking nodes where `f` returns `None`.
    pub fn from_fn_masked(grid: GridSpec, mut f: impl FnMut(f64, f64) -> Option<f64>) -> Self {
        Self::from_fn(grid, |x, y| f(x, y).unwrap_or(f64::NAN))
    }

    pub fn grid(&self) -> &GridSpec {
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

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    #[inline]
    pub fn is_active(&self, k: usize) -> bool {
        self.active[k]
    }

    pub fn masked_count(&self) -> usize {
        self.active.iter().filter(|a| !**a).count()
    }

    pub fn mask(&mut self, k: usize) {
        self.values[k] = f64::NAN;
        self.active[k] = false;
    }

    /// Restores the active flags after direct writes through `values_mut`.
    pub fn refresh_mask(&mut self) {
        for (a, v) in self.active.iter_mut().zip(&self.values) {
            *a = v.is_finite();
        }
    }

    pub fn same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Max-norm over active nodes (0 for a fully masked field).
    pub fn max_abs(&self) -> f64 {
        self.active_values().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_interior(&self) -> f64 {
        let g = self.grid;
        let mut m: f64 = 0.0;
        for j in 1..g.ny - 1 {
            for i in 1..g.nx - 1 {
                let k = g.index(i, j);
                if self.active[k] {
                    m = m.max(self.values[k].abs());
                }
            }
        }
        m
    }

    pub fn min_active(&self) -> Option<f64> {
        self.active_values().reduce(f64::min)
    }

    pub fn max_active(&self) -> Option<f64> {
        self.active_values().reduce(f64::max)
    }

    fn active_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values
            .iter()
            .zip(&self.active)
            .filter(|(_, a)| **a)
            .map(|(v, _)| *v)
    }

    /// Pointwise combination; the result is masked wherever either input is.
    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.same_grid(other)?;
        let mut values = Vec::with_capacity(self.values.len());
        let mut active = Vec::with_capacity(self.values.len());
        for k in 0..self.values.len() {
            let a = self.active[k] && other.active[k];
            let v = if a {
                f(self.values[k], other.values[k])
            } else {
                f64::NAN
            };
            values.push(v);
            active.push(a && v.is_finite());
        }
        Ok(Self {
            grid: self.grid,
            values,
            active,
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let values: Vec<f64> = self
            .values
            .iter()
            .zip(&self.active)
            .map(|(v, a)| if *a { f(*v) } else { f64::NAN })
            .collect();
        let active = values.iter().map(|v| v.is_finite()).collect();
        Self {
            grid: self.grid,
            values,
            active,
        }
    }

    pub fn add(&self, other: &ScalarField) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| s * v)
    }
}

/// Evaluates an expression at every node.
pub fn sample(expr: &Expression, grid: &GridSpec) -> Result<ScalarField> {
    let mut values = Vec::with_capacity(grid.len());
    for j in 0..grid.ny {
        let y = grid.y(j);
        for i in 0..grid.nx {
            let x = grid.x(i);
            let v = expr.evaluate(x, y).map_err(|e| Error::SampleEval {
                i,
                j,
                x,
                y,
                msg: match e {
                    Error::Eval(m) => m,
                    other => other.to_string(),
                },
            })?;
            values.push(v);
        }
    }
    ScalarField::new(*grid, values)
}

/// Five-point Laplacian on interior nodes; boundary nodes (and nodes whose
/// stencil touches a masked node) are masked.
pub fn laplacian(u: &ScalarField) -> ScalarField {
    let g = *u.grid();
    let (ihx2, ihy2) = (1.0 / (g.hx() * g.hx()), 1.0 / (g.hy() * g.hy()));
    let v = u.values();
    let mut out = vec![f64::NAN; g.len()];
    for j in 1..g.ny - 1 {
        for i in 1..g.nx - 1 {
            let k = g.index(i, j);
            out[k] = (v[k + 1] + v[k - 1] - 2.0 * v[k]) * ihx2
                + (v[k + g.nx] + v[k - g.nx] - 2.0 * v[k]) * ihy2;
        }
    }
    ScalarField::new(g, out).expect("same grid")
}

/// Discrete second derivatives.
#[derive(Debug, Clone)]
pub struct Hessian {
    pub uxx: ScalarField,
    pub uxy: ScalarField,
    pub uyy: ScalarField,
}

impl Hessian {
    pub fn trace(&self) -> ScalarField {
        self.uxx.add(&self.uyy).expect("same grid")
    }
}

/// Central second differences; the mixed derivative uses the four corner
/// nodes. A one-node boundary margin is masked.
pub fn hessian(u: &ScalarField) -> Hessian {
    let g = *u.grid();
    let (hx, hy) = (g.hx(), g.hy());
    let v = u.values();
    let n = g.len();
    let (mut uxx, mut uxy, mut uyy) = (vec![f64::NAN; n], vec![f64::NAN; n], vec![f64::NAN; n]);
    let nx = g.nx;
    for j in 1..g.ny - 1 {
        for i in 1..g.nx - 1 {
            let k = g.index(i, j);
            uxx[k] = (v[k + 1] + v[k - 1] - 2.0 * v[k]) / (hx * hx);
            uyy[k] = (v[k + nx] + v[k - nx] - 2.0 * v[k]) / (hy * hy);
            uxy[k] = (v[k + nx + 1] - v[k - nx + 1] - v[k + nx - 1] + v[k - nx - 1])
                / (4.0 * hx * hy);
        }
    }
    Hessian {
        uxx: ScalarField::new(g, uxx).expect("same grid"),
        uxy: ScalarField::new(g, uxy).expect("same grid"),
        uyy: ScalarField::new(g, uyy).expect("same grid"),
    }
}

/// Central first differences with a masked one-node margin.
pub fn gradient(u: &ScalarField) -> (ScalarField, ScalarField) {
    let g = *u.grid();
    let v = u.values();
    let (mut ux, mut uy) = (vec![f64::NAN; g.len()], vec![f64::NAN; g.len()]);
    for j in 1..g.ny - 1 {
        for i in 1..g.nx - 1 {
            let k = g.index(i, j);
            ux[k] = (v[k + 1] - v[k - 1]) / (2.0 * g.hx());
            uy[k] = (v[k + g.nx] - v[k - g.nx]) / (2.0 * g.hy());
        }
    }
    (
        ScalarField::new(g, ux).expect("same grid"),
        ScalarField::new(g, uy).expect("same grid"),
    )
}

/// Sums over a discrete ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallStats {
    pub sum: f64,
    pub sum_sq: f64,
    /// Unmasked nodes used.
    pub count: usize,
    /// Nodes inside the ball that were skipped because they are masked.
    pub masked: usize,
}

pub fn ball_stats(u: &ScalarField, center: (f64, f64), r: f64) -> BallStats {
    let g = *u.grid();
    let mut s = BallStats {
        sum: 0.0,
        sum_sq: 0.0,
        count: 0,
        masked: 0,
    };
    g.for_each_in_ball(center.0, center.1, r, |i, j| {
        let k = g.index(i, j);
        if u.is_active(k) {
            let v = u.values()[k];
            s.sum += v;
            s.sum_sq += v * v;
            s.count += 1;
        } else {
            s.masked += 1;
        }
    });
    s
}

/// Arithmetic mean of the unmasked nodal values in `B_r(center)`.
pub fn ball_average(u: &ScalarField, center: (f64, f64), r: f64) -> Result<f64> {
    let s = ball_stats(u, center, r);
    if s.count == 0 {
        return Err(Error::EmptyBall {
            cx: center.0,
            cy: center.1,
            radius: r,
        });
    }
    Ok(s.sum / s.count as f64)
}

/// `sqrt(Σ u² hx hy)` over the unmasked nodes of `B_r(center)`.
pub fn ball_l2(u: &ScalarField, center: (f64, f64), r: f64) -> Result<f64> {
    let s = ball_stats(u, center, r);
    if s.count == 0 {
        return Err(Error::EmptyBall {
            cx: center.0,
            cy: center.1,
            radius: r,
        });
    }
    let g = u.grid();
    Ok((s.sum_sq * g.hx() * g.hy()).sqrt())
}
