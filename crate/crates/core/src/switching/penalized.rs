//! Damped Newton for the penalized system
//!
//! ```text
//! -Δ_h u¹ + f¹ + β_ε(u¹ - u² + ψ¹) = 0
//! -Δ_h u² + f² + β_ε(u² - u¹ + ψ²) = 0
//! ```
//!
//! on interior nodes with `u^i = g^i` on the boundary. The Jacobian
//! `[[L + D₁, -D₁], [-D₂, L + D₂]]` (`L = -Δ_h`, `D_i = β_ε'(θ^i) >= 0`) is
//! a nonsingular M-matrix; it is factorized with a sparse LU whose symbolic
//! analysis is shared by all iterations of a solve.

use faer::prelude::*;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use serde::{Deserialize, Serialize};

use super::penalty::PenaltyFunction;
use super::spec::ProblemSpec;
use super::{Method, SolutionPair};
use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::obstacle::{boundary_interpolant, EllipticConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Newton stops when the max-norm residual is at most `tol · scale`.
    pub tol: f64,
    pub max_newton: usize,
    /// Step halvings allowed per Newton iteration.
    pub max_halvings: usize,
    pub penalty: PenaltyFunction,
    /// Settings of the scalar SOR / projected SOR solvers.
    pub elliptic: EllipticConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_newton: 100,
            max_halvings: 40,
            penalty: PenaltyFunction::default(),
            elliptic: EllipticConfig::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Precondition("tol must be positive".into()));
        }
        if !(self.penalty.eta > 0.0) {
            return Err(Error::Precondition("penalty eta must be positive".into()));
        }
        if self.max_newton == 0 {
            return Err(Error::Precondition("max_newton must be positive".into()));
        }
        self.elliptic.validate()
    }
}

/// `(-Δ_h u¹ + f¹ + β_ε(θ¹), -Δ_h u² + f² + β_ε(θ²))` at interior nodes;
/// boundary entries are masked.
pub fn penalized_residual(
    spec: &ProblemSpec,
    penalty: &PenaltyFunction,
    eps: f64,
    u1: &ScalarField,
    u2: &ScalarField,
) -> (ScalarField, ScalarField) {
    let grid = *spec.grid();
    let mut r1 = ScalarField::constant(grid, f64::NAN);
    let mut r2 = ScalarField::constant(grid, f64::NAN);
    let mut e = Evaluator::new(spec, penalty, eps);
    e.residual(u1.values(), u2.values());
    for (p, &k) in e.interior.iter().enumerate() {
        r1.values_mut()[k] = e.res[2 * p];
        r2.values_mut()[k] = e.res[2 * p + 1];
    }
    r1.refresh_mask();
    r2.refresh_mask();
    (r1, r2)
}

/// Interior-node bookkeeping shared by residual and Jacobian evaluation.
struct Evaluator<'a> {
    spec: &'a ProblemSpec,
    penalty: &'a PenaltyFunction,
    eps: f64,
    /// Grid index of the p-th interior node.
    interior: Vec<usize>,
    res: Vec<f64>,
    ax: f64,
    ay: f64,
}

impl<'a> Evaluator<'a> {
    fn new(spec: &'a ProblemSpec, penalty: &'a PenaltyFunction, eps: f64) -> Self {
        let g = *spec.grid();
        let mut interior = Vec::with_capacity((g.nx - 2) * (g.ny - 2));
        for j in 1..g.ny - 1 {
            for i in 1..g.nx - 1 {
                interior.push(g.index(i, j));
            }
        }
        let n = interior.len();
        Self {
            spec,
            penalty,
            eps,
            interior,
            res: vec![0.0; 2 * n],
            ax: 1.0 / g.hx().powi(2),
            ay: 1.0 / g.hy().powi(2),
        }
    }

    fn neg_lap(&self, v: &[f64], k: usize) -> f64 {
        let nx = self.spec.grid().nx;
        -((v[k + 1] + v[k - 1] - 2.0 * v[k]) * self.ax
            + (v[k + nx] + v[k - nx] - 2.0 * v[k]) * self.ay)
    }

    /// Fills `res` and returns its max-norm.
    fn residual(&mut self, u1: &[f64], u2: &[f64]) -> f64 {
        let d = self.spec.fields();
        let (f1, f2, p1, p2) = (d.f1.values(), d.f2.values(), d.psi1.values(), d.psi2.values());
        let mut worst: f64 = 0.0;
        for p in 0..self.interior.len() {
            let k = self.interior[p];
            let t1 = u1[k] - u2[k] + p1[k];
            let t2 = u2[k] - u1[k] + p2[k];
            let r1 = self.neg_lap(u1, k) + f1[k] + self.penalty.beta_eps(self.eps, t1);
            let r2 = self.neg_lap(u2, k) + f2[k] + self.penalty.beta_eps(self.eps, t2);
            self.res[2 * p] = r1;
            self.res[2 * p + 1] = r2;
            worst = worst.max(r1.abs()).max(r2.abs());
        }
        if worst.is_nan() {
            f64::INFINITY
        } else {
            worst
        }
    }

    fn jacobian(&self, u1: &[f64], u2: &[f64]) -> Result<SparseColMat<usize, f64>> {
        let g = *self.spec.grid();
        let d = self.spec.fields();
        let (p1, p2) = (d.psi1.values(), d.psi2.values());
        let (mx, my) = (g.nx - 2, g.ny - 2);
        let diag = 2.0 * (self.ax + self.ay);
        let mut trips = Vec::with_capacity(self.interior.len() * 14);
        for p in 0..self.interior.len() {
            let k = self.interior[p];
            let (ii, jj) = (p % mx, p / mx);
            let d1 = self.penalty.beta_eps_prime(self.eps, u1[k] - u2[k] + p1[k]);
            let d2 = self.penalty.beta_eps_prime(self.eps, u2[k] - u1[k] + p2[k]);
            let (r1, r2) = (2 * p, 2 * p + 1);
            trips.push(Triplet::new(r1, r1, diag + d1));
            trips.push(Triplet::new(r1, r2, -d1));
            trips.push(Triplet::new(r2, r2, diag + d2));
            trips.push(Triplet::new(r2, r1, -d2));
            let mut link = |q: usize, a: f64| {
                trips.push(Triplet::new(r1, 2 * q, -a));
                trips.push(Triplet::new(r2, 2 * q + 1, -a));
            };
            if ii > 0 {
                link(p - 1, self.ax);
            }
            if ii + 1 < mx {
                link(p + 1, self.ax);
            }
            if jj > 0 {
                link(p - mx, self.ay);
            }
            if jj + 1 < my {
                link(p + mx, self.ay);
            }
        }
        let n = 2 * self.interior.len();
        SparseColMat::try_new_from_triplets(n, n, &trips)
            .map_err(|e| Error::Precondition(format!("jacobian assembly failed: {e:?}")))
    }
}

fn with_boundary(spec: &ProblemSpec, u1: &ScalarField, u2: &ScalarField) -> Result<(Vec<f64>, Vec<f64>)> {
    u1.same_grid(spec.g1())?;
    u2.same_grid(spec.g1())?;
    let g = *spec.grid();
    let (mut v1, mut v2) = (u1.values().to_vec(), u2.values().to_vec());
    for j in 0..g.ny {
        for i in 0..g.nx {
            let k = g.index(i, j);
            if g.is_boundary(i, j) {
                v1[k] = spec.g1().values()[k];
                v2[k] = spec.g2().values()[k];
            } else if !(v1[k].is_finite() && v2[k].is_finite()) {
                return Err(Error::Precondition(format!(
                    "initial guess not finite at node ({i}, {j})"
                )));
            }
        }
    }
    Ok((v1, v2))
}

/// Solves the penalized system for one ε from the boundary interpolants of
/// `g¹, g²`.
pub fn solve_penalized(spec: &ProblemSpec, eps: f64, cfg: &SolverConfig) -> Result<SolutionPair> {
    let u1 = boundary_interpolant(spec.g1());
    let u2 = boundary_interpolant(spec.g2());
    solve_penalized_from(spec, eps, cfg, &u1, &u2)
}

/// Damped Newton from a given initial guess (boundary values are replaced by
/// the Dirichlet data). Each step is halved until the residual max-norm
/// strictly decreases.
pub fn solve_penalized_from(
    spec: &ProblemSpec,
    eps: f64,
    cfg: &SolverConfig,
    u1: &ScalarField,
    u2: &ScalarField,
) -> Result<SolutionPair> {
    cfg.validate()?;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Precondition(format!("eps must be positive, got {eps}")));
    }
    let grid = *spec.grid();
    if grid.nx < 3 || grid.ny < 3 {
        return Err(Error::InvalidGrid("no interior nodes".into()));
    }
    let (mut v1, mut v2) = with_boundary(spec, u1, u2)?;
    let threshold = cfg.tol * spec.scale();
    let mut ev = Evaluator::new(spec, &cfg.penalty, eps);
    let n = 2 * ev.interior.len();
    let mut residual = ev.residual(&v1, &v2);
    let mut symbolic: Option<SymbolicLu<usize>> = None;
    let mut iterations = 0;
    let (mut t1, mut t2) = (v1.clone(), v2.clone());

    while residual > threshold {
        if iterations >= cfg.max_newton {
            return Err(Error::NonConvergence {
                solver: "penalized Newton",
                iterations,
                residual,
                threshold,
            });
        }
        iterations += 1;
        let jac = ev.jacobian(&v1, &v2)?;
        let sym = match &symbolic {
            Some(s) => s.clone(),
            None => {
                let s = SymbolicLu::try_new(jac.symbolic())
                    .map_err(|_| Error::SingularJacobian { eps })?;
                symbolic = Some(s.clone());
                s
            }
        };
        let lu = Lu::try_new_with_symbolic(sym, jac.as_ref())
            .map_err(|_| Error::SingularJacobian { eps })?;
        let mut step = Mat::<f64>::from_fn(n, 1, |r, _| -ev.res[r]);
        lu.solve_in_place(step.as_mut());
        if (0..n).any(|r| !step[(r, 0)].is_finite()) {
            return Err(Error::SingularJacobian { eps });
        }

        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=cfg.max_halvings {
            for (p, &k) in ev.interior.iter().enumerate() {
                t1[k] = v1[k] + t * step[(2 * p, 0)];
                t2[k] = v2[k] + t * step[(2 * p + 1, 0)];
            }
            let r = ev.residual(&t1, &t2);
            if r < residual {
                residual = r;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // restore the residual of the current iterate before reporting
            residual = ev.residual(&v1, &v2);
            return Err(Error::NonConvergence {
                solver: "penalized Newton (line search stalled)",
                iterations,
                residual,
                threshold,
            });
        }
        std::mem::swap(&mut v1, &mut t1);
        std::mem::swap(&mut v2, &mut t2);
    }

    Ok(SolutionPair {
        u1: ScalarField::new(grid, v1)?,
        u2: ScalarField::new(grid, v2)?,
        method: Method::Penalized,
        eps_schedule: vec![eps],
        iterations: vec![iterations],
        residual,
    })
}

/// Solves for each ε of a strictly decreasing positive schedule, warm
/// starting every stage from the previous one. Returns one pair per stage.
pub fn continuation_path(
    spec: &ProblemSpec,
    schedule: &[f64],
    cfg: &SolverConfig,
) -> Result<Vec<SolutionPair>> {
    check_schedule(schedule)?;
    let mut out: Vec<SolutionPair> = Vec::with_capacity(schedule.len());
    for &eps in schedule {
        let stage = match out.last() {
            None => solve_penalized(spec, eps, cfg),
            Some(prev) => solve_penalized_from(spec, eps, cfg, &prev.u1, &prev.u2),
        }
        .map_err(|e| Error::AtEpsilon {
            eps,
            source: Box::new(e),
        })?;
        out.push(stage);
    }
    Ok(out)
}

/// Continuation down a schedule; the result carries the whole schedule and
/// the Newton iteration count of each stage.
pub fn continuation_solve(
    spec: &ProblemSpec,
    schedule: &[f64],
    cfg: &SolverConfig,
) -> Result<SolutionPair> {
    let path = continuation_path(spec, schedule, cfg)?;
    let iterations = path.iter().map(|p| p.iterations[0]).collect();
    let mut last = path.into_iter().last().expect("nonempty schedule");
    last.eps_schedule = schedule.to_vec();
    last.iterations = iterations;
    Ok(last)
}

pub fn check_schedule(schedule: &[f64]) -> Result<()> {
    if schedule.is_empty() {
        return Err(Error::Precondition("empty eps schedule".into()));
    }
    if schedule.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(Error::Precondition("eps values must be positive".into()));
    }
    if schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Precondition("schedule not decreasing".into()));
    }
    Ok(())
}

/// `2^-1, 2^-2, ..., 2^-k`.
pub fn dyadic_schedule(k: u32) -> Vec<f64> {
    (1..=k).map(|e| 0.5f64.powi(e as i32)).collect()
}
