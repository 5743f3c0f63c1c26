//! Scalar elliptic building blocks: SOR for the Dirichlet Poisson problem
//! `-Δ_h u = rhs` and projected SOR for the two-sided obstacle problem
//!
//! ```text
//! lower <= U <= upper
//! -Δ_h U - forcing <= 0  where U > lower
//! -Δ_h U - forcing >= 0  where U < upper
//! ```
//!
//! Both use lexicographic Gauss-Seidel ordering; for the obstacle solver the
//! projection onto `[lower, upper]` is the last step of every node update, so
//! the bounds hold exactly after each sweep.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField};

/// Residuals are evaluated every this many sweeps.
const CHECK_EVERY: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipticConfig {
    /// Poisson stopping threshold, relative to `1 + ‖rhs‖∞`.
    pub tol: f64,
    /// Complementarity threshold of the obstacle solver, relative to the
    /// obstacle problem's scale.
    pub ctol: f64,
    /// Defaults to `200 · max(nx, ny)`.
    pub max_iter: Option<usize>,
    /// Relaxation factor in (0, 2); defaults to the optimal SOR factor of the
    /// five-point Laplacian on the grid.
    pub omega: Option<f64>,
}

impl Default for EllipticConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            ctol: 1e-6,
            max_iter: None,
            omega: None,
        }
    }
}

impl EllipticConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !(self.ctol > 0.0) {
            return Err(Error::Precondition("tolerances must be positive".into()));
        }
        if let Some(w) = self.omega {
            if !(w > 0.0 && w < 2.0) {
                return Err(Error::Precondition(format!("omega {w} outside (0, 2)")));
            }
        }
        if self.max_iter == Some(0) {
            return Err(Error::Precondition("max_iter must be positive".into()));
        }
        Ok(())
    }

    pub fn max_iter_for(&self, grid: &GridSpec) -> usize {
        self.max_iter.unwrap_or(200 * grid.nx.max(grid.ny))
    }

    pub fn omega_for(&self, grid: &GridSpec) -> f64 {
        self.omega.unwrap_or_else(|| optimal_omega(grid))
    }
}

/// `2 / (1 + sqrt(1 - ρ²))` with ρ the spectral radius of Jacobi iteration
/// for the five-point Laplacian with Dirichlet data.
pub fn optimal_omega(grid: &GridSpec) -> f64 {
    let (ax, ay) = (1.0 / grid.hx().powi(2), 1.0 / grid.hy().powi(2));
    let rho = (ax * (PI / (grid.nx - 1) as f64).cos() + ay * (PI / (grid.ny - 1) as f64).cos())
        / (ax + ay);
    2.0 / (1.0 + (1.0 - rho * rho).sqrt())
}

/// A relaxed field plus iteration metadata.
#[derive(Debug, Clone)]
pub struct Relaxed {
    pub field: ScalarField,
    pub sweeps: usize,
    /// Final stopping residual (Poisson residual or complementarity residual).
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitialGuess {
    /// Transfinite interpolation of the boundary values, clamped.
    Interpolated,
    Lower,
    Upper,
}

/// Transfinite (Coons) interpolation of the boundary values of `g`; exact on
/// the boundary and bilinear-blended inside.
pub fn boundary_interpolant(g: &ScalarField) -> ScalarField {
    let grid = *g.grid();
    let (nx, ny) = (grid.nx, grid.ny);
    let mut out = g.clone();
    let vals = out.values_mut();
    for j in 1..ny - 1 {
        let t = j as f64 / (ny - 1) as f64;
        for i in 1..nx - 1 {
            let s = i as f64 / (nx - 1) as f64;
            let west = g.at(0, j);
            let east = g.at(nx - 1, j);
            let south = g.at(i, 0);
            let north = g.at(i, ny - 1);
            let corners = (1.0 - s) * (1.0 - t) * g.at(0, 0)
                + s * (1.0 - t) * g.at(nx - 1, 0)
                + (1.0 - s) * t * g.at(0, ny - 1)
                + s * t * g.at(nx - 1, ny - 1);
            vals[grid.index(i, j)] =
                (1.0 - s) * west + s * east + (1.0 - t) * south + t * north - corners;
        }
    }
    out.refresh_mask();
    out
}

fn check_boundary_finite(g: &ScalarField) -> Result<()> {
    let grid = g.grid();
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            if grid.is_boundary(i, j) && !g.at(i, j).is_finite() {
                return Err(Error::Precondition(format!(
                    "boundary value at node ({i}, {j}) is not finite"
                )));
            }
        }
    }
    Ok(())
}

fn check_interior_finite(f: &ScalarField, what: &str) -> Result<()> {
    let grid = f.grid();
    for j in 1..grid.ny - 1 {
        for i in 1..grid.nx - 1 {
            if !f.at(i, j).is_finite() {
                return Err(Error::Precondition(format!(
                    "{what} at interior node ({i}, {j}) is not finite"
                )));
            }
        }
    }
    Ok(())
}

/// `max_interior |-Δ_h u - rhs|`.
pub fn poisson_residual(u: &ScalarField, rhs: &ScalarField) -> f64 {
    let g = *u.grid();
    let (ax, ay) = (1.0 / (g.hx() * g.hx()), 1.0 / (g.hy() * g.hy()));
    let (v, f) = (u.values(), rhs.values());
    let mut m: f64 = 0.0;
    for j in 1..g.ny - 1 {
        for i in 1..g.nx - 1 {
            let k = g.index(i, j);
            let lap = (v[k + 1] + v[k - 1] - 2.0 * v[k]) * ax
                + (v[k + g.nx] + v[k - g.nx] - 2.0 * v[k]) * ay;
            m = m.max((-lap - f[k]).abs());
        }
    }
    m
}

/// One lexicographic SOR sweep, optionally projected onto `[lo, hi]`.
fn sweep(
    grid: &GridSpec,
    u: &mut [f64],
    rhs: &[f64],
    omega: f64,
    bounds: Option<(&[f64], &[f64])>,
) {
    let (ax, ay) = (1.0 / grid.hx().powi(2), 1.0 / grid.hy().powi(2));
    let diag = 2.0 * (ax + ay);
    let nx = grid.nx;
    for j in 1..grid.ny - 1 {
        for i in 1..nx - 1 {
            let k = j * nx + i;
            let gs = (rhs[k] + (u[k + 1] + u[k - 1]) * ax + (u[k + nx] + u[k - nx]) * ay) / diag;
            let mut next = u[k] + omega * (gs - u[k]);
            if let Some((lo, hi)) = bounds {
                next = next.max(lo[k]).min(hi[k]);
            }
            u[k] = next;
        }
    }
}

/// Solves `-Δ_h u = rhs` on interior nodes with `u = g` on the boundary.
/// Converged when the residual max-norm is at most `tol · (1 + ‖rhs‖∞)`.
pub fn solve_poisson(rhs: &ScalarField, g: &ScalarField, cfg: &EllipticConfig) -> Result<Relaxed> {
    cfg.validate()?;
    rhs.same_grid(g)?;
    check_boundary_finite(g)?;
    check_interior_finite(rhs, "rhs")?;
    let grid = *g.grid();
    let threshold = cfg.tol * (1.0 + rhs.max_abs_interior());
    let omega = cfg.omega_for(&grid);
    let max_iter = cfg.max_iter_for(&grid);

    let mut u = boundary_interpolant(g);
    let rhs_v = rhs.values();
    let mut residual = poisson_residual(&u, rhs);
    let mut sweeps = 0;
    while residual > threshold {
        if sweeps >= max_iter {
            return Err(Error::NonConvergence {
                solver: "SOR Poisson",
                iterations: sweeps,
                residual,
                threshold,
            });
        }
        for _ in 0..CHECK_EVERY.min(max_iter - sweeps) {
            sweep(&grid, u.values_mut(), rhs_v, omega, None);
            sweeps += 1;
        }
        residual = poisson_residual(&u, rhs);
    }
    u.refresh_mask();
    Ok(Relaxed {
        field: u,
        sweeps,
        residual,
    })
}

/// Largest nodal violation of the double-obstacle complementarity
/// conditions: at each interior node the smallest of
/// `|r|`, `max(0, -r)` if `U = lower`, `max(0, r)` if `U = upper`,
/// where `r = -Δ_h U - forcing`.
pub fn complementarity_residual(
    u: &ScalarField,
    forcing: &ScalarField,
    lower: &ScalarField,
    upper: &ScalarField,
) -> f64 {
    let g = *u.grid();
    let (ax, ay) = (1.0 / (g.hx() * g.hx()), 1.0 / (g.hy() * g.hy()));
    let (v, f, lo, hi) = (u.values(), forcing.values(), lower.values(), upper.values());
    let mut worst: f64 = 0.0;
    for j in 1..g.ny - 1 {
        for i in 1..g.nx - 1 {
            let k = g.index(i, j);
            let lap = (v[k + 1] + v[k - 1] - 2.0 * v[k]) * ax
                + (v[k + g.nx] + v[k - g.nx] - 2.0 * v[k]) * ay;
            let r = -lap - f[k];
            let mut viol = r.abs();
            if v[k] <= lo[k] {
                viol = viol.min((-r).max(0.0));
            }
            if v[k] >= hi[k] {
                viol = viol.min(r.max(0.0));
            }
            worst = worst.max(viol);
        }
    }
    worst
}

/// `1 + max(‖forcing‖∞, ‖lower‖∞, ‖upper‖∞, ‖g‖∞)`; the complementarity
/// threshold is `ctol` times this.
pub fn obstacle_scale(
    forcing: &ScalarField,
    lower: &ScalarField,
    upper: &ScalarField,
    g: &ScalarField,
) -> f64 {
    1.0 + forcing
        .max_abs_interior()
        .max(lower.max_abs())
        .max(upper.max_abs())
        .max(g.max_abs())
}

pub fn solve_double_obstacle(
    forcing: &ScalarField,
    lower: &ScalarField,
    upper: &ScalarField,
    g: &ScalarField,
    cfg: &EllipticConfig,
) -> Result<Relaxed> {
    solve_double_obstacle_from(forcing, lower, upper, g, cfg, InitialGuess::Interpolated)
}

/// Projected SOR for the double-obstacle problem with boundary data `g`.
pub fn solve_double_obstacle_from(
    forcing: &ScalarField,
    lower: &ScalarField,
    upper: &ScalarField,
    g: &ScalarField,
    cfg: &EllipticConfig,
    init: InitialGuess,
) -> Result<Relaxed> {
    cfg.validate()?;
    forcing.same_grid(g)?;
    lower.same_grid(g)?;
    upper.same_grid(g)?;
    check_boundary_finite(g)?;
    check_interior_finite(forcing, "forcing")?;
    let grid = *g.grid();
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let (lo, hi) = (lower.at(i, j), upper.at(i, j));
            if !(lo.is_finite() && hi.is_finite()) {
                return Err(Error::Precondition(format!(
                    "obstacle at node ({i}, {j}) is not finite"
                )));
            }
            if lo > hi {
                return Err(Error::InfeasibleObstacles {
                    i,
                    j,
                    lower: lo,
                    upper: hi,
                });
            }
            if grid.is_boundary(i, j) {
                let b = g.at(i, j);
                if b < lo || b > hi {
                    return Err(Error::Precondition(format!(
                        "boundary value {b} at node ({i}, {j}) outside [{lo}, {hi}]"
                    )));
                }
            }
        }
    }

    let threshold = cfg.ctol * obstacle_scale(forcing, lower, upper, g);
    let omega = cfg.omega_for(&grid);
    let max_iter = cfg.max_iter_for(&grid);
    let (lo, hi) = (lower.values(), upper.values());

    let mut u = match init {
        InitialGuess::Interpolated => boundary_interpolant(g),
        InitialGuess::Lower => lower.clone(),
        InitialGuess::Upper => upper.clone(),
    };
    {
        let vals = u.values_mut();
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let k = grid.index(i, j);
                vals[k] = if grid.is_boundary(i, j) {
                    g.values()[k]
                } else {
                    vals[k].max(lo[k]).min(hi[k])
                };
            }
        }
    }
    u.refresh_mask();

    let f = forcing.values();
    let mut residual = complementarity_residual(&u, forcing, lower, upper);
    let mut sweeps = 0;
    while residual > threshold {
        if sweeps >= max_iter {
            return Err(Error::NonConvergence {
                solver: "projected SOR",
                iterations: sweeps,
                residual,
                threshold,
            });
        }
        for _ in 0..CHECK_EVERY.min(max_iter - sweeps) {
            sweep(&grid, u.values_mut(), f, omega, Some((lo, hi)));
            sweeps += 1;
        }
        residual = complementarity_residual(&u, forcing, lower, upper);
    }
    Ok(Relaxed {
        field: u,
        sweeps,
        residual,
    })
}
