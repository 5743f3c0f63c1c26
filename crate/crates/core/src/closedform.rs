//! Closed-form oracles: the two-quadrant counterexample with an isolated
//! zero of the loop sum, the oscillating costs with divergent value, and the
//! harmonic gain series behind it.
//!
//! The counterexample has `f¹ = f² = 0`, `ψ¹ = ψ² = φ = ¼|x|²` and
//!
//! ```text
//! u¹ = -¼r² - ⅛r² cos2θ - F/(4π)   for 0 < θ <= π/2
//! u¹ =        ⅛r² cos2θ - F/(4π)   otherwise
//! u² = u¹ - w
//! ```
//!
//! with `F = Im(z² log z) = r²(θ cos2θ + ln r sin2θ)` on the branch
//! `θ ∈ (0, 2π]` and `w` the quadrant-wise quadratic returned by [`ce_w`].
//! `u¹` is C¹ with `-Δu¹ = χ_{Q1}`; its Hessian grows like `|ln r|` at the
//! origin, so the pair is not C^{1,1} there.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{laplacian, GridSpec, ScalarField};
use crate::switching::{
    partition_sets, validate_spec, Method, PartitionConfig, ProblemData, ProblemSpec,
    SolutionPair,
};

/// Polar coordinates with `θ ∈ (0, 2π]`; the positive x-axis has `θ = 2π`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarPoint {
    pub r: f64,
    pub theta: f64,
}

impl PolarPoint {
    pub fn new(r: f64, theta: f64) -> Self {
        let mut t = theta.rem_euclid(TAU);
        if t <= 0.0 {
            t = TAU;
        }
        Self { r, theta: t }
    }

    pub fn from_xy(x: f64, y: f64) -> Self {
        let mut t = y.atan2(x);
        if t <= 0.0 {
            t += TAU;
        }
        Self {
            r: x.hypot(y),
            theta: t,
        }
    }

    pub fn to_xy(self) -> (f64, f64) {
        (self.r * self.theta.cos(), self.r * self.theta.sin())
    }

    /// 1..=4 for the sectors `(0, π/2]`, `(π/2, π]`, `(π, 3π/2]`, `(3π/2, 2π]`.
    pub fn sector(self) -> u8 {
        if self.theta <= FRAC_PI_2 {
            1
        } else if self.theta <= PI {
            2
        } else if self.theta <= 3.0 * FRAC_PI_2 {
            3
        } else {
            4
        }
    }
}

pub fn ce_phi(x: f64, y: f64) -> f64 {
    0.25 * (x * x + y * y)
}

/// `-φ` on the first quadrant, `+φ` on the third, `±¼(x² - y²)` on the
/// second and fourth.
pub fn ce_w(x: f64, y: f64) -> f64 {
    match (x >= 0.0, y >= 0.0) {
        (true, true) => -0.25 * (x * x + y * y),
        (false, true) => 0.25 * (x * x - y * y),
        (true, false) => 0.25 * (y * y - x * x),
        (false, false) => 0.25 * (x * x + y * y),
    }
}

/// `Im(z² log z)` with `arg z ∈ (0, 2π]`.
fn im_z2_log_z(p: PolarPoint) -> f64 {
    let (s, c) = (2.0 * p.theta).sin_cos();
    p.r * p.r * (p.theta * c + p.r.ln() * s)
}

fn u1_polar(p: PolarPoint) -> f64 {
    let r2 = p.r * p.r;
    let c2 = (2.0 * p.theta).cos();
    let harmonic = -im_z2_log_z(p) / (4.0 * PI);
    if p.sector() == 1 {
        -0.25 * r2 - 0.125 * r2 * c2 + harmonic
    } else {
        0.125 * r2 * c2 + harmonic
    }
}

/// The origin is the singular point of the formula; it is reported as an
/// error. [`ce_u1_xy`] returns the continuous extension 0 there.
pub fn ce_u1(p: PolarPoint) -> Result<f64> {
    if p.r == 0.0 {
        return Err(Error::Domain("origin: value 0 by continuity".into()));
    }
    Ok(u1_polar(p))
}

pub fn ce_u2(p: PolarPoint) -> Result<f64> {
    let (x, y) = p.to_xy();
    Ok(ce_u1(p)? - ce_w(x, y))
}

pub fn ce_u1_xy(x: f64, y: f64) -> f64 {
    if x == 0.0 && y == 0.0 {
        0.0
    } else {
        u1_polar(PolarPoint::from_xy(x, y))
    }
}

pub fn ce_u2_xy(x: f64, y: f64) -> f64 {
    ce_u1_xy(x, y) - ce_w(x, y)
}

/// The counterexample data sampled on `grid`, with Dirichlet values taken
/// from the closed forms.
pub fn counterexample_spec(grid: GridSpec) -> Result<ProblemSpec> {
    let phi = ScalarField::from_fn(grid, ce_phi);
    let zero = ScalarField::zeros(grid);
    ProblemSpec::from_fields(ProblemData {
        f1: zero.clone(),
        f2: zero,
        psi1: phi.clone(),
        psi2: phi,
        g1: ScalarField::from_fn(grid, ce_u1_xy),
        g2: ScalarField::from_fn(grid, ce_u2_xy),
    })
}

pub fn counterexample_pair(grid: GridSpec) -> SolutionPair {
    SolutionPair {
        u1: ScalarField::from_fn(grid, ce_u1_xy),
        u2: ScalarField::from_fn(grid, ce_u2_xy),
        method: Method::ClosedForm,
        eps_schedule: Vec::new(),
        iterations: Vec::new(),
        residual: 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub passed: bool,
    pub grid: GridSpec,
    pub rho_excl: f64,
    pub tol: f64,
    pub checked_nodes: usize,
    /// `max |min(-Δ_h u¹, u¹ - u² + φ)|` over checked nodes
    pub eq1_max: f64,
    /// `max |min(-Δ_h u², u² - u¹ + φ)|` over checked nodes
    pub eq2_max: f64,
    /// `max |-Δ_h u¹ - χ_{Q1}|` over checked nodes
    pub lap_max: f64,
    /// Residual maxima over all interior nodes outside the exclusion disk,
    /// axes included; these carry the Hessian jumps.
    pub eq1_max_near_axes: f64,
    pub eq2_max_near_axes: f64,
    /// `max |u¹ - u² - w|` over all nodes
    pub w_identity_max: f64,
    /// `max |u¹ - u² + φ|` over first-quadrant nodes
    pub q1_identity_max: f64,
    /// `max |u² - u¹ + φ|` over third-quadrant nodes
    pub q3_identity_max: f64,
    pub identity_tol: f64,
    /// Nodes where `ψ¹ + ψ²` vanishes.
    pub loop_zero_nodes: usize,
    pub l0_nodes: usize,
    pub boundary_l_nodes: usize,
}

/// Samples the closed forms on `grid` and checks the switching equations at
/// interior nodes outside `B_ρ(0)` and at least two nodes away from both
/// axes, the identities on the first and third quadrant, and the loop-set
/// labels.
pub fn verify_counterexample(grid: GridSpec, rho_excl: f64, tol: f64) -> Result<CounterexampleReport> {
    let identity_tol = 1e-12;
    let spec = counterexample_spec(grid)?;
    let pair = counterexample_pair(grid);
    let phi = spec.psi1();
    let (l1, l2) = (laplacian(&pair.u1), laplacian(&pair.u2));
    let (hx, hy) = (grid.hx(), grid.hy());
    let margin = 2.0 * (1.0 - 1e-9);

    let mut rep = CounterexampleReport {
        passed: false,
        grid,
        rho_excl,
        tol,
        checked_nodes: 0,
        eq1_max: 0.0,
        eq2_max: 0.0,
        lap_max: 0.0,
        eq1_max_near_axes: 0.0,
        eq2_max_near_axes: 0.0,
        w_identity_max: 0.0,
        q1_identity_max: 0.0,
        q3_identity_max: 0.0,
        identity_tol,
        loop_zero_nodes: 0,
        l0_nodes: 0,
        boundary_l_nodes: 0,
    };
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let (x, y) = (grid.x(i), grid.y(j));
            let (u1, u2, p) = (pair.u1.at(i, j), pair.u2.at(i, j), phi.at(i, j));
            rep.w_identity_max = rep.w_identity_max.max((u1 - u2 - ce_w(x, y)).abs());
            let off_axes = x.abs() >= margin * hx && y.abs() >= margin * hy;
            if off_axes && x > 0.0 && y > 0.0 {
                rep.q1_identity_max = rep.q1_identity_max.max((u1 - u2 + p).abs());
            }
            if off_axes && x < 0.0 && y < 0.0 {
                rep.q3_identity_max = rep.q3_identity_max.max((u2 - u1 + p).abs());
            }
            if grid.is_boundary(i, j) || x.hypot(y) < rho_excl {
                continue;
            }
            let e1 = (-l1.at(i, j)).min(u1 - u2 + p).abs();
            let e2 = (-l2.at(i, j)).min(u2 - u1 + p).abs();
            rep.eq1_max_near_axes = rep.eq1_max_near_axes.max(e1);
            rep.eq2_max_near_axes = rep.eq2_max_near_axes.max(e2);
            if off_axes {
                rep.checked_nodes += 1;
                rep.eq1_max = rep.eq1_max.max(e1);
                rep.eq2_max = rep.eq2_max.max(e2);
                let chi = if x > 0.0 && y > 0.0 { 1.0 } else { 0.0 };
                rep.lap_max = rep.lap_max.max((-l1.at(i, j) - chi).abs());
            }
        }
    }

    let part = partition_sets(&spec, &pair, &PartitionConfig::default())?;
    rep.l0_nodes = part.counts.l0;
    rep.boundary_l_nodes = part.counts.boundary_l;
    rep.loop_zero_nodes = spec.loop_sum().values().iter().filter(|&&v| v == 0.0).count();

    rep.passed = validate_spec(&spec).passed
        && rep.checked_nodes > 0
        && rep.eq1_max <= tol
        && rep.eq2_max <= tol
        && rep.w_identity_max <= identity_tol
        && rep.q1_identity_max <= identity_tol
        && rep.q3_identity_max <= identity_tol
        && rep.l0_nodes == 0;
    Ok(rep)
}

/// Oscillating switching costs on `(-1, 1)`:
/// `ψ¹ = (1-|x|) cos(π/(1-|x|))`, `ψ² = (1-|x|)(1 - cos(π/(1-|x|)))`.
pub fn example1_costs(x: f64) -> Result<(f64, f64)> {
    if !(x.abs() < 1.0) {
        return Err(Error::Domain(format!("example costs need |x| < 1, got {x}")));
    }
    let a = 1.0 - x.abs();
    let c = (PI / a).cos();
    Ok((a * c, a * (1.0 - c)))
}

/// Expression strings of [`example1_costs`] for use as problem data.
pub const EXAMPLE1_PSI1: &str = "(1-abs(x))*cos(pi/(1-abs(x)))";
pub const EXAMPLE1_PSI2: &str = "(1-abs(x))*(1-cos(pi/(1-abs(x))))";

/// `Σ_{n<N} 1/(2n+1)`: the gain of `N` switching loops, unbounded in `N`.
pub fn loop_gain(n: usize) -> f64 {
    (0..n).map(|k| 1.0 / (2 * k + 1) as f64).sum()
}
