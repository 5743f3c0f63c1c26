use super::spec::{ProblemData, ProblemSpec};
use super::{Method, SolutionPair};
use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::grid::{laplacian, sample, GridSpec, ScalarField};
use crate::obstacle::{solve_poisson, EllipticConfig};

/// Data of the non-uniqueness family: `f¹ = -M`, `f² = M`, `ψ¹ = ψ`,
/// `ψ² = -ψ`, boundary values `g¹` and `g² = g¹ + ψ`. The loop sum
/// vanishes identically.
pub fn example2_spec(psi: &Expression, m: f64, g1: &Expression, grid: GridSpec) -> Result<ProblemSpec> {
    let psi_s = psi.source();
    let data = ProblemData {
        f1: Expression::constant(-m),
        f2: Expression::constant(m),
        psi1: psi.clone(),
        psi2: Expression::parse(&format!("-({psi_s})"))?,
        g1: g1.clone(),
        g2: Expression::parse(&format!("({}) + ({psi_s})", g1.source()))?,
    };
    ProblemSpec::from_exprs(data, grid)
}

/// A member of the non-uniqueness family: `u¹` solves `-Δ_h u¹ = M + q`
/// with `u¹ = g¹` on the boundary and `u² = u¹ + ψ`. Requires
/// `2M > ‖Δ_h ψ‖∞` and `q >= 0`.
pub fn construct_nonminimal(
    psi: &Expression,
    m: f64,
    q: &Expression,
    g1: &Expression,
    grid: GridSpec,
    cfg: &EllipticConfig,
) -> Result<SolutionPair> {
    let psi_f = sample(psi, &grid)?;
    let lap_psi = laplacian(&psi_f).max_abs();
    if !(2.0 * m > lap_psi) {
        return Err(Error::Precondition(format!(
            "need 2M > max|lap psi|: 2M = {}, max|lap psi| = {lap_psi}",
            2.0 * m
        )));
    }
    let q_f = sample(q, &grid)?;
    if let Some(qmin) = q_f.min_active() {
        if qmin < 0.0 {
            return Err(Error::Precondition(format!("q must be nonnegative, min is {qmin}")));
        }
    }
    let g1_f = sample(g1, &grid)?;
    let rhs = q_f.map(|v| v + m);
    let u1 = solve_poisson(&rhs, &g1_f, cfg)?;
    let u2 = u1.field.add(&psi_f)?;
    let u1_field: ScalarField = u1.field;
    Ok(SolutionPair {
        u1: u1_field,
        u2,
        method: Method::NonMinimal,
        eps_schedule: Vec::new(),
        iterations: vec![u1.sweeps],
        residual: u1.residual,
    })
}
