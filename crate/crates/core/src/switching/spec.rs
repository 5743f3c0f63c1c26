use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::grid::{laplacian, sample, GridSpec, ScalarField};

/// The six data items of one two-mode problem: running costs `f¹, f²`,
/// switching costs `ψ¹, ψ²` and Dirichlet data `g¹, g²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemData<T> {
    pub f1: T,
    pub f2: T,
    pub psi1: T,
    pub psi2: T,
    pub g1: T,
    pub g2: T,
}

impl<T> ProblemData<T> {
    pub fn try_map<U>(&self, mut f: impl FnMut(&T) -> Result<U>) -> Result<ProblemData<U>> {
        Ok(ProblemData {
            f1: f(&self.f1)?,
            f2: f(&self.f2)?,
            psi1: f(&self.psi1)?,
            psi2: f(&self.psi2)?,
            g1: f(&self.g1)?,
            g2: f(&self.g2)?,
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        [&self.f1, &self.f2, &self.psi1, &self.psi2, &self.g1, &self.g2].into_iter()
    }
}

impl ProblemData<&str> {
    pub fn parse(&self) -> Result<ProblemData<Expression>> {
        self.try_map(|s| Expression::parse(s))
    }
}

/// One instance of the switching system on a grid, with the data sampled at
/// every node.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    grid: GridSpec,
    exprs: Option<ProblemData<Expression>>,
    fields: ProblemData<ScalarField>,
    scale: f64,
}

impl ProblemSpec {
    pub fn from_exprs(exprs: ProblemData<Expression>, grid: GridSpec) -> Result<Self> {
        let fields = exprs.try_map(|e| sample(e, &grid))?;
        let mut spec = Self::from_fields(fields)?;
        spec.exprs = Some(exprs);
        Ok(spec)
    }

    pub fn parse(texts: ProblemData<&str>, grid: GridSpec) -> Result<Self> {
        Self::from_exprs(texts.parse()?, grid)
    }

    /// Data given directly as nodal fields (e.g. boundary values taken from
    /// closed-form solutions).
    pub fn from_fields(fields: ProblemData<ScalarField>) -> Result<Self> {
        let grid = *fields.f1.grid();
        for f in fields.iter() {
            f.same_grid(&fields.f1)?;
            if f.masked_count() > 0 {
                return Err(Error::Precondition(
                    "problem data must be finite at every node".into(),
                ));
            }
        }
        let scale = 1.0 + fields.iter().map(ScalarField::max_abs).fold(0.0, f64::max);
        Ok(Self {
            grid,
            exprs: None,
            fields,
            scale,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn exprs(&self) -> Option<&ProblemData<Expression>> {
        self.exprs.as_ref()
    }

    pub fn fields(&self) -> &ProblemData<ScalarField> {
        &self.fields
    }

    pub fn f1(&self) -> &ScalarField {
        &self.fields.f1
    }
    pub fn f2(&self) -> &ScalarField {
        &self.fields.f2
    }
    pub fn psi1(&self) -> &ScalarField {
        &self.fields.psi1
    }
    pub fn psi2(&self) -> &ScalarField {
        &self.fields.psi2
    }
    pub fn g1(&self) -> &ScalarField {
        &self.fields.g1
    }
    pub fn g2(&self) -> &ScalarField {
        &self.fields.g2
    }

    /// `1 + max(‖f^i‖∞, ‖ψ^i‖∞, ‖g^i‖∞)`; tolerances are relative to it.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// System residual tolerance `50 h² · scale`.
    pub fn tol_sys(&self) -> f64 {
        50.0 * self.grid.h().powi(2) * self.scale
    }

    /// `ψ¹ + ψ²`; its zero set is the free-switching set.
    pub fn loop_sum(&self) -> ScalarField {
        self.fields.psi1.add(&self.fields.psi2).expect("same grid")
    }

    pub fn max_f(&self) -> f64 {
        self.fields.f1.max_abs().max(self.fields.f2.max_abs())
    }

    /// `max_i ‖Δ_h ψ^i‖∞` over interior nodes.
    pub fn max_lap_psi(&self) -> f64 {
        laplacian(&self.fields.psi1)
            .max_abs()
            .max(laplacian(&self.fields.psi2).max_abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeValue {
    pub i: usize,
    pub j: usize,
    pub x: f64,
    pub y: f64,
    pub value: f64,
}

/// Result of checking the loop condition `ψ¹ + ψ² >= 0` and the boundary
/// compatibility `g¹ - g² + ψ¹ >= 0`, `g² - g¹ + ψ² >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub loop_ok: bool,
    pub compatibility_ok: bool,
    pub tolerance: f64,
    /// Node with the smallest `ψ¹ + ψ²`.
    pub worst_loop: NodeValue,
    /// Boundary node with the smallest compatibility gap.
    pub worst_compatibility: NodeValue,
}

pub fn validate_spec(spec: &ProblemSpec) -> ValidationReport {
    let g = spec.grid;
    let tolerance = f64::EPSILON * spec.scale;
    let d = &spec.fields;
    let node = |i: usize, j: usize, value: f64| NodeValue {
        i,
        j,
        x: g.x(i),
        y: g.y(j),
        value,
    };
    let mut worst_loop = node(0, 0, f64::INFINITY);
    let mut worst_compat = node(0, 0, f64::INFINITY);
    for j in 0..g.ny {
        for i in 0..g.nx {
            let s = d.psi1.at(i, j) + d.psi2.at(i, j);
            if s < worst_loop.value {
                worst_loop = node(i, j, s);
            }
            if g.is_boundary(i, j) {
                let (g1, g2) = (d.g1.at(i, j), d.g2.at(i, j));
                let gap = (g1 - g2 + d.psi1.at(i, j)).min(g2 - g1 + d.psi2.at(i, j));
                if gap < worst_compat.value {
                    worst_compat = node(i, j, gap);
                }
            }
        }
    }
    let loop_ok = worst_loop.value >= -tolerance;
    let compatibility_ok = worst_compat.value >= -tolerance;
    ValidationReport {
        passed: loop_ok && compatibility_ok,
        loop_ok,
        compatibility_ok,
        tolerance,
        worst_loop,
        worst_compatibility: worst_compat,
    }
}

impl ValidationReport {
    pub fn into_result(self) -> Result<Self> {
        if self.passed {
            Ok(self)
        } else if !self.loop_ok {
            Err(Error::Precondition(format!(
                "loop condition violated: psi1 + psi2 = {} at node ({}, {})",
                self.worst_loop.value, self.worst_loop.i, self.worst_loop.j
            )))
        } else {
            Err(Error::Precondition(format!(
                "boundary compatibility violated: gap {} at node ({}, {})",
                self.worst_compatibility.value,
                self.worst_compatibility.i,
                self.worst_compatibility.j
            )))
        }
    }
}
