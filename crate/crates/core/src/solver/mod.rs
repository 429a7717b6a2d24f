//! LP simplex and branch-and-bound MILP engine, plus a brute-force
//! enumeration oracle over first-stage slot assignments.

mod bnb;
mod simplex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::FlightSchedule;
use crate::milp::MilpModel;
use crate::models::names;

pub use bnb::solve_milp;
pub use simplex::LpOptions;
pub(crate) use simplex::{solve_bounded, LpData};

/// Enumeration refuses models with more joint assignments than this.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("numerical instability: pivot magnitude {pivot:e} below threshold")]
    NumericalInstability { pivot: f64 },
    #[error("simplex iteration limit reached")]
    IterationLimit,
    #[error("enumeration would visit {0} assignments (limit {ENUMERATION_LIMIT})")]
    CombinatorialLimit(u128),
    #[error("model does not match schedule: {0}")]
    ScheduleMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branching {
    MostFractional,
    LowestIndex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeOrder {
    BestBound,
    DepthFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub feasibility_tol: f64,
    pub integrality_tol: f64,
    /// Absolute optimality gap.
    pub optimality_gap: f64,
    pub node_limit: usize,
    pub branching: Branching,
    pub node_order: NodeOrder,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-7,
            integrality_tol: 1e-6,
            optimality_gap: 1e-6,
            node_limit: 100_000,
            branching: Branching::MostFractional,
            node_order: NodeOrder::BestBound,
        }
    }
}

impl SolverOptions {
    pub fn lp_options(&self) -> LpOptions {
        LpOptions {
            feasibility_tol: self.feasibility_tol,
            ..LpOptions::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// LP relaxation result.
///
/// Duals follow the minimization convention `y = c_B B^-1`: nonpositive on
/// binding `<=` rows, nonnegative on `>=` rows, free on equalities.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub values: Vec<f64>,
    pub objective: f64,
    pub dual_values: Vec<f64>,
    pub pivots: usize,
}

impl LpSolution {
    fn infeasible(n: usize, m: usize) -> Self {
        Self {
            status: LpStatus::Infeasible,
            values: vec![0.0; n],
            objective: f64::INFINITY,
            dual_values: vec![0.0; m],
            pivots: 0,
        }
    }
}

/// Solves the continuous relaxation of `model` (binaries relaxed to `[0, 1]`).
pub fn solve_lp(model: &MilpModel, opts: &SolverOptions) -> Result<LpSolution, SolverError> {
    let data = LpData::from_model(model);
    solve_bounded(&data, &data.lower, &data.upper, &opts.lp_options())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    NodeLimit,
    Unbounded,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    /// LP relaxations solved (branch-and-bound nodes or enumerated assignments).
    pub nodes: usize,
    pub pivots: usize,
    /// Global lower bound at termination.
    pub best_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub status: SolveStatus,
    pub values: Vec<f64>,
    pub objective: f64,
    pub stats: SolveStats,
}

impl Solution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn value(&self, model: &MilpModel, name: &str) -> Option<f64> {
        model.var_by_name(name).map(|v| self.values[v.index()])
    }

    fn without_incumbent(status: SolveStatus, n: usize, stats: SolveStats) -> Self {
        Self {
            status,
            values: vec![0.0; n],
            objective: match status {
                SolveStatus::Unbounded => f64::NEG_INFINITY,
                _ => f64::INFINITY,
            },
            stats,
        }
    }
}

/// Exact optimum by visiting every first-stage assignment of `schedule`'s
/// flights and solving the residual LP over the continuous columns.
///
/// Every binary of `model` must be an `x[f,t]` column of a flight in
/// `schedule`.
pub fn enumerate_small(model: &MilpModel, schedule: &FlightSchedule) -> Result<Solution, SolverError> {
    let count = schedule.assignment_count();
    if count > ENUMERATION_LIMIT {
        return Err(SolverError::CombinatorialLimit(count));
    }
    let mut choices: Vec<Vec<usize>> = Vec::with_capacity(schedule.flights.len());
    let mut covered = 0usize;
    for f in &schedule.flights {
        let cols = f
            .window(schedule.horizon)
            .map(|t| {
                model
                    .var_by_name(&names::x(&f.id, t))
                    .map(|v| v.index())
                    .ok_or_else(|| SolverError::ScheduleMismatch(format!("missing column {}", names::x(&f.id, t))))
            })
            .collect::<Result<Vec<_>, _>>()?;
        covered += cols.len();
        choices.push(cols);
    }
    if covered != model.num_binaries() {
        return Err(SolverError::ScheduleMismatch(format!(
            "model has {} binaries but schedule accounts for {covered}",
            model.num_binaries()
        )));
    }

    let data = LpData::from_model(model);
    let lp_opts = LpOptions::default();
    let mut lower = data.lower.clone();
    let mut upper = data.upper.clone();
    let mut pick = vec![0usize; choices.len()];
    let mut stats = SolveStats::default();
    let mut best: Option<LpSolution> = None;
    loop {
        for (cols, &k) in choices.iter().zip(&pick) {
            for (idx, &c) in cols.iter().enumerate() {
                let v = if idx == k { 1.0 } else { 0.0 };
                lower[c] = v;
                upper[c] = v;
            }
        }
        let lp = solve_bounded(&data, &lower, &upper, &lp_opts)?;
        stats.nodes += 1;
        stats.pivots += lp.pivots;
        match lp.status {
            LpStatus::Unbounded => {
                return Ok(Solution::without_incumbent(SolveStatus::Unbounded, data.n, stats));
            }
            LpStatus::Optimal if best.as_ref().is_none_or(|b| lp.objective < b.objective - 1e-12) => {
                best = Some(lp);
            }
            _ => {}
        }
        // odometer
        let mut k = 0;
        loop {
            if k == pick.len() {
                return Ok(match best {
                    Some(lp) => {
                        stats.best_bound = lp.objective;
                        Solution {
                            status: SolveStatus::Optimal,
                            values: lp.values,
                            objective: lp.objective,
                            stats,
                        }
                    }
                    None => Solution::without_incumbent(SolveStatus::Infeasible, data.n, stats),
                });
            }
            pick[k] += 1;
            if pick[k] < choices[k].len() {
                break;
            }
            pick[k] = 0;
            k += 1;
        }
    }
}

#[cfg(test)]
mod tests;
