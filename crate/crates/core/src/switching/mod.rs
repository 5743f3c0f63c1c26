//! The two-mode switching system: data validation, the penalized path, the
//! minimal-solution pipeline, residual reports and the set decomposition.

mod minimal;
mod nonminimal;
mod partition;
mod penalized;
mod penalty;
mod residual;
mod spec;

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

pub use minimal::solve_minimal;
pub use nonminimal::{construct_nonminimal, example2_spec};
pub use partition::{partition_sets, Label, LabelCounts, PartitionConfig, SetPartition};
pub use penalized::{
    check_schedule, continuation_path, continuation_solve, dyadic_schedule, penalized_residual,
    solve_penalized, solve_penalized_from, SolverConfig,
};
pub use penalty::PenaltyFunction;
pub use residual::{laplacian_bounds, residual_report, ResidualFields, ResidualReport, ResidualSummary};
pub use spec::{validate_spec, NodeValue, ProblemData, ProblemSpec, ValidationReport};

use crate::error::Result;
use crate::grid::{laplacian, ScalarField};
use crate::io::write_fields_csv;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Penalized,
    Minimal,
    ClosedForm,
    NonMinimal,
}

/// A pair `(u¹, u²)` with solve metadata.
#[derive(Debug, Clone)]
pub struct SolutionPair {
    pub u1: ScalarField,
    pub u2: ScalarField,
    pub method: Method,
    /// Penalty parameters used, in order; empty for other methods.
    pub eps_schedule: Vec<f64>,
    /// Newton iterations per ε for the penalized path; SOR sweeps of the
    /// obstacle and Poisson stages for the minimal path.
    pub iterations: Vec<usize>,
    /// Final stopping residual of the last stage.
    pub residual: f64,
}

impl SolutionPair {
    /// `max(‖u¹ - v¹‖∞, ‖u² - v²‖∞)`.
    pub fn max_diff(&self, other: &SolutionPair) -> Result<f64> {
        let d1 = self.u1.sub(&other.u1)?.max_abs();
        let d2 = self.u2.sub(&other.u2)?.max_abs();
        Ok(d1.max(d2))
    }

    /// CSV with columns `x,y,u1,u2,theta1,theta2,lapu1,lapu2`.
    pub fn write_csv<W: Write>(&self, spec: &ProblemSpec, w: W) -> io::Result<()> {
        let t1 = self.u1.sub(&self.u2).and_then(|d| d.add(spec.psi1()));
        let t2 = self.u2.sub(&self.u1).and_then(|d| d.add(spec.psi2()));
        let (t1, t2) = match (t1, t2) {
            (Ok(a), Ok(b)) => (a, b),
            _ => return Err(io::Error::new(io::ErrorKind::InvalidInput, "grid mismatch")),
        };
        let (l1, l2) = (laplacian(&self.u1), laplacian(&self.u2));
        write_fields_csv(
            w,
            &["u1", "u2", "theta1", "theta2", "lapu1", "lapu2"],
            &[&self.u1, &self.u2, &t1, &t2, &l1, &l2],
        )
    }
}
