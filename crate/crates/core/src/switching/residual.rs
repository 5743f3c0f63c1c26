use serde::{Deserialize, Serialize};

use super::spec::ProblemSpec;
use super::SolutionPair;
use crate::error::Result;
use crate::grid::{laplacian, ScalarField};

/// Per-node residual fields; operator-based fields are masked on the
/// boundary.
#[derive(Debug, Clone)]
pub struct ResidualFields {
    /// `u¹ - u² + ψ¹`
    pub theta1: ScalarField,
    /// `u² - u¹ + ψ²`
    pub theta2: ScalarField,
    /// `-Δ_h u¹ + f¹`
    pub op1: ScalarField,
    /// `-Δ_h u² + f²`
    pub op2: ScalarField,
    /// `min(op1, θ¹)`
    pub eq1: ScalarField,
    /// `min(op2, θ²)`
    pub eq2: ScalarField,
    /// `min(op1, op2)`, the equation singling out the minimal solution
    pub eq3: ScalarField,
    pub lap1: ScalarField,
    pub lap2: ScalarField,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub eq1_max: f64,
    pub eq2_max: f64,
    pub eq3_max: f64,
    pub theta_min: f64,
    pub op_min: f64,
    /// `‖Δ_h u^i‖∞`, i = 1, 2
    pub lap_max: [f64; 2],
    /// `max‖Δ_h ψ‖∞ + 3 max‖f‖∞ + tol_sys`
    pub lap_bound: f64,
    pub lap_bound_ok: bool,
    pub tol_sys: f64,
    /// Both switching equations hold within `tol_sys`.
    pub system_ok: bool,
    /// The third equation holds within `tol_sys`.
    pub minimal_ok: bool,
}

#[derive(Debug, Clone)]
pub struct ResidualReport {
    pub fields: ResidualFields,
    pub summary: ResidualSummary,
}

/// `(lower, upper)` for `-Δ_h u^i` of penalized and minimal solutions:
/// `-max‖f‖∞` and `max‖Δ_h ψ‖∞ + 3 max‖f‖∞`.
pub fn laplacian_bounds(spec: &ProblemSpec) -> (f64, f64) {
    let mf = spec.max_f();
    (-mf, spec.max_lap_psi() + 3.0 * mf)
}

pub fn residual_report(spec: &ProblemSpec, pair: &SolutionPair) -> Result<ResidualReport> {
    pair.u1.same_grid(spec.f1())?;
    pair.u2.same_grid(spec.f1())?;
    let theta1 = pair.u1.sub(&pair.u2)?.add(spec.psi1())?;
    let theta2 = pair.u2.sub(&pair.u1)?.add(spec.psi2())?;
    let lap1 = laplacian(&pair.u1);
    let lap2 = laplacian(&pair.u2);
    let op1 = lap1.zip_map(spec.f1(), |l, f| -l + f)?;
    let op2 = lap2.zip_map(spec.f2(), |l, f| -l + f)?;
    let eq1 = op1.zip_map(&theta1, f64::min)?;
    let eq2 = op2.zip_map(&theta2, f64::min)?;
    let eq3 = op1.zip_map(&op2, f64::min)?;

    let tol_sys = spec.tol_sys();
    let (_, upper) = laplacian_bounds(spec);
    let lap_bound = upper + tol_sys;
    let lap_max = [lap1.max_abs(), lap2.max_abs()];
    let summary = ResidualSummary {
        eq1_max: eq1.max_abs(),
        eq2_max: eq2.max_abs(),
        eq3_max: eq3.max_abs(),
        theta_min: theta1.min_active().unwrap_or(0.0).min(theta2.min_active().unwrap_or(0.0)),
        op_min: op1.min_active().unwrap_or(0.0).min(op2.min_active().unwrap_or(0.0)),
        lap_max,
        lap_bound,
        lap_bound_ok: lap_max[0] <= lap_bound && lap_max[1] <= lap_bound,
        tol_sys,
        system_ok: eq1.max_abs() <= tol_sys && eq2.max_abs() <= tol_sys,
        minimal_ok: eq3.max_abs() <= tol_sys,
    };
    Ok(ResidualReport {
        fields: ResidualFields {
            theta1,
            theta2,
            op1,
            op2,
            eq1,
            eq2,
            eq3,
            lap1,
            lap2,
        },
        summary,
    })
}

/// `max(‖eq1‖∞, ‖eq2‖∞)`.
pub(crate) fn system_residual(spec: &ProblemSpec, pair: &SolutionPair) -> Result<f64> {
    let s = residual_report(spec, pair)?.summary;
    Ok(s.eq1_max.max(s.eq2_max))
}
