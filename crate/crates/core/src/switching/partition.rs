use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::residual::residual_report;
use super::spec::ProblemSpec;
use super::SolutionPair;
use crate::error::Result;
use crate::grid::GridSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Omega1,
    Omega2,
    Omega12,
    L0,
    BoundaryL,
    Unlabeled,
}

/// Thresholds of the discrete set definitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionConfig {
    /// Threshold on `-Δ_h u^i + f^i` and `θ^i`; defaults to `10 h² · scale`.
    pub tau: Option<f64>,
    /// Threshold on `ψ¹ + ψ²`. The loop sum is data, not a discrete
    /// solution, so it only needs a rounding allowance; defaults to
    /// `1000 εmach · scale`.
    pub tau_loop: Option<f64>,
    /// Meeting points lie within this graph distance of Ω1, Ω2 and ∂L.
    pub meeting_radius: usize,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self {
            tau: None,
            tau_loop: None,
            meeting_radius: 2,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub omega1: usize,
    pub omega2: usize,
    pub omega12: usize,
    pub l0: usize,
    pub boundary_l: usize,
    pub unlabeled: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetPartition {
    pub grid: GridSpec,
    pub tau: f64,
    pub tau_loop: f64,
    /// Row-major node labels.
    pub labels: Vec<Label>,
    /// `(i, j)` of the meeting points, row-major order.
    pub meeting_points: Vec<(usize, usize)>,
    pub counts: LabelCounts,
}

impl SetPartition {
    pub fn label(&self, i: usize, j: usize) -> Label {
        self.labels[self.grid.index(i, j)]
    }
}

/// Labels every node; the loop-set labels take precedence, then Ω1, Ω2,
/// Ω12. Grid-boundary nodes carry no operator value and are only eligible
/// for the loop-set labels.
pub fn partition_sets(
    spec: &ProblemSpec,
    pair: &SolutionPair,
    cfg: &PartitionConfig,
) -> Result<SetPartition> {
    let grid = *spec.grid();
    let rep = residual_report(spec, pair)?;
    let tau = cfg.tau.unwrap_or(10.0 * grid.h().powi(2) * spec.scale());
    let tau_loop = cfg.tau_loop.unwrap_or(1000.0 * f64::EPSILON * spec.scale());
    let loop_sum = spec.loop_sum();
    let in_l = |i: usize, j: usize| loop_sum.at(i, j) <= tau_loop;

    let mut labels = vec![Label::Unlabeled; grid.len()];
    let mut counts = LabelCounts::default();
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let k = grid.index(i, j);
            let label = if in_l(i, j) {
                let interior = neighbors8(&grid, i, j).all(|(a, b)| in_l(a, b));
                let full = neighbors8(&grid, i, j).count() == 8;
                if interior && full {
                    Label::L0
                } else {
                    Label::BoundaryL
                }
            } else if grid.is_boundary(i, j) {
                Label::Unlabeled
            } else {
                let f = &rep.fields;
                let (o1, o2) = (f.op1.values()[k], f.op2.values()[k]);
                if o1 > tau {
                    Label::Omega1
                } else if o2 > tau {
                    Label::Omega2
                } else if f.theta1.values()[k] > tau && f.theta2.values()[k] > tau {
                    Label::Omega12
                } else {
                    Label::Unlabeled
                }
            };
            match label {
                Label::Omega1 => counts.omega1 += 1,
                Label::Omega2 => counts.omega2 += 1,
                Label::Omega12 => counts.omega12 += 1,
                Label::L0 => counts.l0 += 1,
                Label::BoundaryL => counts.boundary_l += 1,
                Label::Unlabeled => counts.unlabeled += 1,
            }
            labels[k] = label;
        }
    }

    let r = cfg.meeting_radius;
    let d1 = distance_to(&grid, &labels, Label::Omega1);
    let d2 = distance_to(&grid, &labels, Label::Omega2);
    let dl = distance_to(&grid, &labels, Label::BoundaryL);
    let meeting_points = (0..grid.len())
        .filter(|&k| d1[k] <= r && d2[k] <= r && dl[k] <= r)
        .map(|k| grid.coords(k))
        .collect();

    Ok(SetPartition {
        grid,
        tau,
        tau_loop,
        labels,
        meeting_points,
        counts,
    })
}

fn neighbors8(grid: &GridSpec, i: usize, j: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
    (-1i64..=1)
        .flat_map(|dj| (-1i64..=1).map(move |di| (di, dj)))
        .filter(|&(di, dj)| di != 0 || dj != 0)
        .filter_map(move |(di, dj)| {
            let (a, b) = (i as i64 + di, j as i64 + dj);
            (a >= 0 && b >= 0 && (a as usize) < grid.nx && (b as usize) < grid.ny)
                .then_some((a as usize, b as usize))
        })
}

/// Breadth-first graph distance (4-neighbour grid graph) from every node to
/// the nearest node carrying `target`; `usize::MAX` when there is none.
fn distance_to(grid: &GridSpec, labels: &[Label], target: Label) -> Vec<usize> {
    let mut dist = vec![usize::MAX; grid.len()];
    let mut queue = VecDeque::new();
    for (k, &l) in labels.iter().enumerate() {
        if l == target {
            dist[k] = 0;
            queue.push_back(k);
        }
    }
    while let Some(k) = queue.pop_front() {
        let (i, j) = grid.coords(k);
        let next = dist[k] + 1;
        let mut visit = |a: usize, b: usize| {
            let q = grid.index(a, b);
            if dist[q] == usize::MAX {
                dist[q] = next;
                queue.push_back(q);
            }
        };
        if i > 0 {
            visit(i - 1, j);
        }
        if i + 1 < grid.nx {
            visit(i + 1, j);
        }
        if j > 0 {
            visit(i, j - 1);
        }
        if j + 1 < grid.ny {
            visit(i, j + 1);
        }
    }
    dist
}
