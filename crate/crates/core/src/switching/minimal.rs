use super::penalized::SolverConfig;
use super::residual::system_residual;
use super::spec::{validate_spec, ProblemSpec};
use super::{Method, SolutionPair};
use crate::error::Result;
use crate::grid::{laplacian, ScalarField};
use crate::obstacle::{solve_double_obstacle, solve_poisson};

/// Minimal solution through the double-obstacle reduction:
///
/// 1. `U` solves the double-obstacle problem for `-Δ_h U + f¹ - f²` with
///    obstacles `-ψ¹ <= U <= ψ²` and boundary values `g¹ - g²`;
/// 2. `m = -Δ_h U + f¹ - f²`;
/// 3. `u¹` solves `-Δ_h u¹ + f¹ = m⁺` with `u¹ = g¹` on the boundary;
/// 4. `u² = u¹ - U`.
///
/// Then `-Δ_h u² + f² = m⁻`, which makes the third equation
/// `min(-Δ_h u¹ + f¹, -Δ_h u² + f²) = 0` hold.
pub fn solve_minimal(spec: &ProblemSpec, cfg: &SolverConfig) -> Result<SolutionPair> {
    cfg.validate()?;
    validate_spec(spec).into_result()?;
    let grid = *spec.grid();
    let forcing = spec.f2().sub(spec.f1())?;
    let lower = spec.psi1().map(|v| -v);
    let upper = spec.psi2().clone();
    // Compatibility holds up to rounding; clamp so the boundary values lie
    // exactly inside the obstacles.
    let bc = ScalarField::new(
        grid,
        (0..grid.len())
            .map(|k| {
                let d = spec.g1().values()[k] - spec.g2().values()[k];
                d.max(lower.values()[k]).min(upper.values()[k])
            })
            .collect(),
    )?;
    let diff = solve_double_obstacle(&forcing, &lower, &upper, &bc, &cfg.elliptic)?;

    let lap_u = laplacian(&diff.field);
    let mut rhs = ScalarField::constant(grid, f64::NAN);
    for j in 1..grid.ny - 1 {
        for i in 1..grid.nx - 1 {
            let k = grid.index(i, j);
            let m = -lap_u.values()[k] - forcing.values()[k];
            rhs.values_mut()[k] = m.max(0.0) - spec.f1().values()[k];
        }
    }
    let u1 = solve_poisson(&rhs, spec.g1(), &cfg.elliptic)?;
    let mut u2 = u1.field.sub(&diff.field)?;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            if grid.is_boundary(i, j) {
                let k = grid.index(i, j);
                u2.values_mut()[k] = spec.g2().values()[k];
            }
        }
    }
    let mut pair = SolutionPair {
        u1: u1.field,
        u2,
        method: Method::Minimal,
        eps_schedule: Vec::new(),
        iterations: vec![diff.sweeps, u1.sweeps],
        residual: 0.0,
    };
    pair.residual = system_residual(spec, &pair)?;
    Ok(pair)
}
