//! Type-1 Wasserstein distance between scalar discrete distributions and
//! recovery of the worst-case distribution inside a Wasserstein ball.
//!
//! Capacities are scalars, so the ground metric is `|a - b|`. Both problems
//! are posed as transportation LPs and solved with the crate's simplex.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{AmbiguitySpec, CapacityDistribution, PROBABILITY_SUM_TOL};
use crate::milp::{LinearConstraint, MilpModel, Sense, VarRef, VariableDef};
use crate::solver::{solve_lp, LpStatus, SolverError, SolverOptions};

/// Transported mass below this is treated as zero when reading marginals.
const MASS_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WassersteinError {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("no second-stage cost for grid value {0}")]
    MissingCost(u32),
    #[error("transport LP ended with status {0:?}")]
    Status(LpStatus),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDistribution {
    atoms: Vec<(i64, f64)>,
}

impl DiscreteDistribution {
    pub fn new(mut atoms: Vec<(i64, f64)>) -> Result<Self, WassersteinError> {
        if atoms.is_empty() {
            return Err(WassersteinError::InvalidDistribution("no atoms".into()));
        }
        if atoms.iter().any(|(_, p)| !(*p > 0.0 && p.is_finite())) {
            return Err(WassersteinError::InvalidDistribution("nonpositive probability".into()));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > PROBABILITY_SUM_TOL {
            return Err(WassersteinError::InvalidDistribution(format!(
                "probabilities sum to {total}"
            )));
        }
        atoms.sort_by_key(|a| a.0);
        if atoms.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(WassersteinError::InvalidDistribution("repeated value".into()));
        }
        Ok(Self { atoms })
    }

    pub fn point(value: i64) -> Self {
        Self {
            atoms: vec![(value, 1.0)],
        }
    }

    pub fn atoms(&self) -> &[(i64, f64)] {
        &self.atoms
    }

    pub fn probability_of(&self, value: i64) -> f64 {
        self.atoms
            .binary_search_by_key(&value, |a| a.0)
            .map(|i| self.atoms[i].1)
            .unwrap_or(0.0)
    }
}

impl From<&CapacityDistribution> for DiscreteDistribution {
    fn from(d: &CapacityDistribution) -> Self {
        Self {
            atoms: d.atoms().map(|(v, p)| (v as i64, p)).collect(),
        }
    }
}

/// Mass moved from each empirical atom (rows) to each grid value (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub sources: Vec<u32>,
    pub targets: Vec<u32>,
    pub mass: Vec<Vec<f64>>,
}

impl TransportPlan {
    pub fn row_sums(&self) -> Vec<f64> {
        self.mass.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.targets.len())
            .map(|j| self.mass.iter().map(|r| r[j]).sum())
            .collect()
    }

    /// `sum_{s,xi} u_s(xi) |xi_s - xi|`.
    pub fn transport_cost(&self) -> f64 {
        self.mass
            .iter()
            .zip(&self.sources)
            .flat_map(|(row, &s)| {
                row.iter()
                    .zip(&self.targets)
                    .map(move |(u, &t)| u * (s as f64 - t as f64).abs())
            })
            .sum()
    }

    /// Distribution of the transported mass over the grid.
    pub fn marginal(&self) -> DiscreteDistribution {
        let cols = self.column_sums();
        let kept: Vec<(i64, f64)> = self
            .targets
            .iter()
            .zip(cols)
            .filter(|(_, p)| *p > MASS_EPS)
            .map(|(t, p)| (*t as i64, p))
            .collect();
        let total: f64 = kept.iter().map(|a| a.1).sum();
        DiscreteDistribution {
            atoms: kept.into_iter().map(|(t, p)| (t, p / total)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCase {
    pub plan: TransportPlan,
    pub expected_cost: f64,
}

fn lp_opts() -> SolverOptions {
    SolverOptions::default()
}

/// Minimum transport cost between `p` and `q` under `|a - b|`.
pub fn wasserstein_distance(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64, WassersteinError> {
    let mut model = MilpModel::new("transport");
    let mut cols: Vec<Vec<VarRef>> = Vec::with_capacity(p.atoms.len());
    let mut objective = Vec::new();
    for (i, (a, _)) in p.atoms.iter().enumerate() {
        let mut row = Vec::with_capacity(q.atoms.len());
        for (j, (b, _)) in q.atoms.iter().enumerate() {
            let v = model
                .add_variable(VariableDef::nonnegative(format!("pi[{i},{j}]")))
                .expect("fresh name");
            let cost = (a - b).abs() as f64;
            if cost != 0.0 {
                objective.push((v, cost));
            }
            row.push(v);
        }
        cols.push(row);
    }
    for (i, (_, pi)) in p.atoms.iter().enumerate() {
        let terms = cols[i].iter().map(|v| (*v, 1.0)).collect();
        model
            .add_constraint(LinearConstraint::new(format!("src[{i}]"), terms, Sense::Eq, *pi))
            .expect("valid refs");
    }
    for (j, (_, qj)) in q.atoms.iter().enumerate() {
        let terms = cols.iter().map(|r| (r[j], 1.0)).collect();
        model
            .add_constraint(LinearConstraint::new(format!("dst[{j}]"), terms, Sense::Eq, *qj))
            .expect("valid refs");
    }
    model.set_objective(objective, 0.0).expect("valid refs");
    let lp = solve_lp(&model, &lp_opts())?;
    if lp.status != LpStatus::Optimal {
        return Err(WassersteinError::Status(lp.status));
    }
    Ok(lp.objective.max(0.0))
}

/// Worst-case expectation of `costs` over the Wasserstein ball of `amb`.
///
/// Solves `max sum_{s,xi} cost(xi) u_s(xi)` subject to
/// `sum_xi u_s(xi) = p_s`, `sum_{s,xi} u_s(xi) |xi_s - xi| <= eps`, `u >= 0`,
/// with `xi` ranging over the grid of `amb`.
pub fn worst_case_distribution(costs: &BTreeMap<u32, f64>, amb: &AmbiguitySpec) -> Result<WorstCase, WassersteinError> {
    let grid = amb.grid().values();
    let grid_costs = grid
        .iter()
        .map(|xi| costs.get(xi).copied().ok_or(WassersteinError::MissingCost(*xi)))
        .collect::<Result<Vec<_>, _>>()?;
    let sources = amb.empirical().support().to_vec();

    let mut model = MilpModel::new("worst-case");
    let mut u: Vec<Vec<VarRef>> = Vec::with_capacity(sources.len());
    let mut objective = Vec::new();
    let mut budget = Vec::new();
    for (s, &src) in sources.iter().enumerate() {
        let mut row = Vec::with_capacity(grid.len());
        for (g, &xi) in grid.iter().enumerate() {
            let v = model
                .add_variable(VariableDef::nonnegative(format!("u[{s},{xi}]")))
                .expect("fresh name");
            if grid_costs[g] != 0.0 {
                objective.push((v, -grid_costs[g]));
            }
            let d = (src as f64 - xi as f64).abs();
            if d != 0.0 {
                budget.push((v, d));
            }
            row.push(v);
        }
        u.push(row);
    }
    for (s, p) in amb.empirical().probabilities().iter().enumerate() {
        let terms = u[s].iter().map(|v| (*v, 1.0)).collect();
        model
            .add_constraint(LinearConstraint::new(format!("mass[{s}]"), terms, Sense::Eq, *p))
            .expect("valid refs");
    }
    model
        .add_constraint(LinearConstraint::new("budget", budget, Sense::Le, amb.radius()))
        .expect("valid refs");
    model.set_objective(objective, 0.0).expect("valid refs");

    let lp = solve_lp(&model, &lp_opts())?;
    if lp.status != LpStatus::Optimal {
        return Err(WassersteinError::Status(lp.status));
    }
    let mass = u
        .iter()
        .map(|row| row.iter().map(|v| lp.values[v.index()].max(0.0)).collect())
        .collect();
    Ok(WorstCase {
        plan: TransportPlan {
            sources,
            targets: grid.to_vec(),
            mass,
        },
        expected_cost: -lp.objective,
    })
}
