//! Model builders for the deterministic, stochastic and distributionally
//! robust ground holding problems, and policy extraction from solutions.
//!
//! All builders share the first stage: one binary `x[f,t]` per flight and
//! admissible slot `t in r_f..=T`, one assignment row per flight, and one
//! coupling row per connection. They differ in how landing capacity enters:
//!
//! * deterministic: hard rows `sum_f x[f,t] <= K`;
//! * stochastic: an airborne queue `y[s,t]` per empirical scenario,
//!   weighted by its probability;
//! * robust: a queue `y[xi,t]` per grid capacity, priced through the dual of
//!   the worst-case expectation over the Wasserstein ball,
//!   `eps * alpha + sum_s p_s * beta[s]` with
//!   `alpha * |xi_s - xi| + beta[s] >= C_h * sum_t y[xi,t]` for every pair.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{AmbiguitySpec, CapacityDistribution, FlightSchedule, NetworkInstance};
use crate::milp::{LinearConstraint, MilpModel, ModelError, Sense, VarRef, VariableDef};
use crate::solver::{Solution, SolveStatus};

/// Upper bound applied to `alpha` when [`BuildOptions::cap_alpha`] is set.
pub const ALPHA_CAP: f64 = 1e9;

/// Column naming scheme shared by builders and extractors.
pub mod names {
    pub fn x(flight: &str, t: u32) -> String {
        format!("x[{flight},{t}]")
    }

    /// Scenario queue of the stochastic model (`s` is 1-based).
    pub fn y_scenario(s: usize, t: u32) -> String {
        format!("y[s{s},{t}]")
    }

    pub fn y_grid(xi: u32, t: u32) -> String {
        format!("y[{xi},{t}]")
    }

    pub fn y_network(airport: &str, xi: u32, t: u32) -> String {
        format!("y[{airport},{xi},{t}]")
    }

    pub fn alpha() -> String {
        "alpha".into()
    }

    pub fn alpha_network(airport: &str) -> String {
        format!("alpha[{airport}]")
    }

    pub fn beta(s: usize) -> String {
        format!("beta[{s}]")
    }

    pub fn beta_network(airport: &str, s: usize) -> String {
        format!("beta[{airport},{s}]")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildOptions {
    /// Force every airborne queue to be empty at the last slot.
    pub clear_queue_at_horizon: bool,
    /// Bound `alpha` above by [`ALPHA_CAP`].
    pub cap_alpha: bool,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("solution has status {0:?} and carries no assignment")]
    NoIncumbent(SolveStatus),
    #[error("model has no column {0}")]
    MissingColumn(String),
    #[error("flight {flight}: no slot selected (integrality failure)")]
    NoSlot { flight: String },
    #[error("flight {flight}: {count} slots selected (integrality failure)")]
    MultipleSlots { flight: String, count: usize },
    #[error("ground cost {recomputed} differs from solution first-stage cost {reported}")]
    CostMismatch { recomputed: f64, reported: f64 },
    #[error("policy does not cover flight {0}")]
    UnknownFlight(String),
    #[error("flight {flight} assigned slot {slot} outside its window")]
    OutsideWindow { flight: String, slot: u32 },
    #[error("connection {predecessor}->{successor} violated")]
    Coupling { predecessor: String, successor: String },
}

/// First-stage decision: the slot each flight lands in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundHoldingPolicy {
    pub assignments: BTreeMap<String, u32>,
    pub ground_delays: BTreeMap<String, u32>,
    pub ground_cost: f64,
}

impl GroundHoldingPolicy {
    /// Builds a policy from slot assignments, checking it against `schedule`.
    pub fn from_assignments(
        schedule: &FlightSchedule,
        assignments: BTreeMap<String, u32>,
    ) -> Result<Self, PolicyError> {
        let mut ground_delays = BTreeMap::new();
        let mut ground_cost = 0.0;
        for f in &schedule.flights {
            let slot = *assignments
                .get(&f.id)
                .ok_or_else(|| PolicyError::UnknownFlight(f.id.clone()))?;
            if !f.window(schedule.horizon).contains(&slot) {
                return Err(PolicyError::OutsideWindow {
                    flight: f.id.clone(),
                    slot,
                });
            }
            let delay = slot - f.scheduled_arrival;
            ground_cost += f.ground_cost * delay as f64;
            ground_delays.insert(f.id.clone(), delay);
        }
        if let Some(extra) = assignments.keys().find(|k| schedule.flight(k).is_none()) {
            return Err(PolicyError::UnknownFlight(extra.clone()));
        }
        let policy = Self {
            assignments,
            ground_delays,
            ground_cost,
        };
        policy.check_coupling(schedule)?;
        Ok(policy)
    }

    /// Every flight at its scheduled slot.
    pub fn no_delay(schedule: &FlightSchedule) -> Self {
        let assignments = schedule
            .flights
            .iter()
            .map(|f| (f.id.clone(), f.scheduled_arrival))
            .collect();
        Self::from_assignments(schedule, assignments).expect("zero delay satisfies every connection")
    }

    pub fn check_coupling(&self, schedule: &FlightSchedule) -> Result<(), PolicyError> {
        for c in &schedule.connections {
            let d1 = self.ground_delays.get(&c.predecessor).copied().unwrap_or(0) as i64;
            let d2 = self.ground_delays.get(&c.successor).copied().unwrap_or(0) as i64;
            if d1 - c.slack as i64 > d2 {
                return Err(PolicyError::Coupling {
                    predecessor: c.predecessor.clone(),
                    successor: c.successor.clone(),
                });
            }
        }
        Ok(())
    }

    /// Landings per slot `1..=T` at `airport` (all airports when `None`).
    pub fn arrivals_per_slot(&self, schedule: &FlightSchedule, airport: Option<&str>) -> Vec<u32> {
        let mut counts = vec![0u32; schedule.horizon.num_slots() as usize];
        for f in &schedule.flights {
            if airport.is_none_or(|z| z == f.airport) {
                if let Some(t) = self.assignments.get(&f.id) {
                    counts[*t as usize - 1] += 1;
                }
            }
        }
        counts
    }

    pub fn total_delay(&self) -> u32 {
        self.ground_delays.values().sum()
    }
}

struct FirstStage {
    /// `(flight index, slot, column)`.
    columns: Vec<(usize, u32, VarRef)>,
}

impl FirstStage {
    fn arrivals(&self, schedule: &FlightSchedule, airport: Option<&str>, t: u32) -> Vec<(VarRef, f64)> {
        self.columns
            .iter()
            .filter(|(f, slot, _)| *slot == t && airport.is_none_or(|z| schedule.flights[*f].airport == z))
            .map(|(_, _, v)| (*v, 1.0))
            .collect()
    }
}

fn add_first_stage_columns(model: &mut MilpModel, schedule: &FlightSchedule) -> Result<FirstStage, ModelError> {
    let mut columns = Vec::new();
    for (i, f) in schedule.flights.iter().enumerate() {
        for t in f.window(schedule.horizon) {
            let v = model.add_variable(VariableDef::binary(names::x(&f.id, t)))?;
            columns.push((i, t, v));
        }
    }
    Ok(FirstStage { columns })
}

fn ground_cost_terms(schedule: &FlightSchedule, first: &FirstStage) -> (Vec<(VarRef, f64)>, f64) {
    let terms = first
        .columns
        .iter()
        .map(|(f, t, v)| (*v, schedule.flights[*f].ground_cost * *t as f64))
        .filter(|(_, c)| *c != 0.0)
        .collect();
    let constant = -schedule
        .flights
        .iter()
        .map(|f| f.ground_cost * f.scheduled_arrival as f64)
        .sum::<f64>();
    (terms, constant)
}

fn add_assignment_rows(model: &mut MilpModel, schedule: &FlightSchedule, first: &FirstStage) -> Result<(), ModelError> {
    for (i, f) in schedule.flights.iter().enumerate() {
        let terms = first
            .columns
            .iter()
            .filter(|(g, _, _)| *g == i)
            .map(|(_, _, v)| (*v, 1.0))
            .collect();
        model.add_constraint(LinearConstraint::new(
            format!("assign[{}]", f.id),
            terms,
            Sense::Eq,
            1.0,
        ))?;
    }
    Ok(())
}

/// `sum_t t x[f1,t] - r_f1 - S <= sum_t t x[f2,t] - r_f2`.
fn add_coupling_rows(model: &mut MilpModel, schedule: &FlightSchedule, first: &FirstStage) -> Result<(), ModelError> {
    for c in &schedule.connections {
        let p = schedule.flight_index(&c.predecessor).expect("validated schedule");
        let s = schedule.flight_index(&c.successor).expect("validated schedule");
        let mut terms = Vec::new();
        for (f, t, v) in &first.columns {
            if *f == p {
                terms.push((*v, *t as f64));
            } else if *f == s {
                terms.push((*v, -(*t as f64)));
            }
        }
        let rhs = c.slack as f64 + schedule.flights[p].scheduled_arrival as f64
            - schedule.flights[s].scheduled_arrival as f64;
        model.add_constraint(LinearConstraint::new(
            format!("couple[{},{}]", c.predecessor, c.successor),
            terms,
            Sense::Le,
            rhs,
        ))?;
    }
    Ok(())
}

/// Queue columns `y_1..y_T` for one capacity realization.
fn add_queue_columns(
    model: &mut MilpModel,
    horizon: u32,
    clear_at_horizon: bool,
    name: impl Fn(u32) -> String,
) -> Result<Vec<VarRef>, ModelError> {
    (1..=horizon)
        .map(|t| {
            let upper = if clear_at_horizon && t == horizon {
                0.0
            } else {
                f64::INFINITY
            };
            model.add_variable(VariableDef::continuous(name(t), 0.0, upper))
        })
        .collect()
}

/// `sum_f x[f,t] - y_t + y_{t-1} <= capacity` for every slot.
fn add_queue_rows(
    model: &mut MilpModel,
    schedule: &FlightSchedule,
    first: &FirstStage,
    airport: Option<&str>,
    queue: &[VarRef],
    capacity: u32,
    label: &str,
) -> Result<(), ModelError> {
    for t in schedule.horizon.slots() {
        let mut terms = first.arrivals(schedule, airport, t);
        let i = t as usize - 1;
        terms.push((queue[i], -1.0));
        if i > 0 {
            terms.push((queue[i - 1], 1.0));
        }
        model.add_constraint(LinearConstraint::new(
            format!("cap[{label},{t}]"),
            terms,
            Sense::Le,
            capacity as f64,
        ))?;
    }
    Ok(())
}

fn expect_built<T>(r: Result<T, ModelError>) -> T {
    // Builders only fail on programming errors: the inputs are validated types.
    r.expect("model construction from validated instance")
}

/// Deterministic single-airport model with a fixed per-slot capacity.
pub fn build_d_saghp(schedule: &FlightSchedule, capacity: u32) -> MilpModel {
    expect_built((|| {
        let mut model = MilpModel::new("d-saghp");
        let first = add_first_stage_columns(&mut model, schedule)?;
        add_assignment_rows(&mut model, schedule, &first)?;
        for t in schedule.horizon.slots() {
            let terms = first.arrivals(schedule, None, t);
            model.add_constraint(LinearConstraint::new(
                format!("cap[{t}]"),
                terms,
                Sense::Le,
                capacity as f64,
            ))?;
        }
        add_coupling_rows(&mut model, schedule, &first)?;
        let (terms, constant) = ground_cost_terms(schedule, &first);
        model.set_objective(terms, constant)?;
        Ok(model)
    })())
}

/// Extensive-form two-stage stochastic model over the scenarios of `dist`.
pub fn build_s_saghp(schedule: &FlightSchedule, dist: &CapacityDistribution, opts: &BuildOptions) -> MilpModel {
    expect_built((|| {
        let mut model = MilpModel::new("s-saghp");
        let t_max = schedule.horizon.num_slots();
        let first = add_first_stage_columns(&mut model, schedule)?;
        let queues = (1..=dist.len())
            .map(|s| {
                add_queue_columns(&mut model, t_max, opts.clear_queue_at_horizon, |t| {
                    names::y_scenario(s, t)
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        add_assignment_rows(&mut model, schedule, &first)?;
        for (s, (capacity, _)) in dist.atoms().enumerate() {
            add_queue_rows(
                &mut model,
                schedule,
                &first,
                None,
                &queues[s],
                capacity,
                &format!("s{}", s + 1),
            )?;
        }
        add_coupling_rows(&mut model, schedule, &first)?;
        let (mut terms, constant) = ground_cost_terms(schedule, &first);
        for (queue, p) in queues.iter().zip(dist.probabilities()) {
            let w = p * schedule.airborne_cost;
            if w != 0.0 {
                terms.extend(queue.iter().map(|y| (*y, w)));
            }
        }
        model.set_objective(terms, constant)?;
        Ok(model)
    })())
}

struct RobustBlock {
    /// `eps * alpha + sum_s p_s beta[s]`.
    objective: Vec<(VarRef, f64)>,
    /// Queue columns per grid value, in grid order.
    queues: Vec<Vec<VarRef>>,
}

/// Adds the queue columns, `alpha`, `beta` and dual-feasibility rows of one
/// ambiguity set. Queue rows are added later so row order stays grouped.
#[allow(clippy::too_many_arguments)]
fn add_robust_block(
    model: &mut MilpModel,
    schedule: &FlightSchedule,
    amb: &AmbiguitySpec,
    opts: &BuildOptions,
    queue_name: &dyn Fn(u32, u32) -> String,
    alpha_name: String,
    beta_name: &dyn Fn(usize) -> String,
    label: &dyn Fn(u32) -> String,
) -> Result<RobustBlock, ModelError> {
    let t_max = schedule.horizon.num_slots();
    let grid = amb.grid().values();
    let queues = grid
        .iter()
        .map(|&xi| add_queue_columns(model, t_max, opts.clear_queue_at_horizon, |t| queue_name(xi, t)))
        .collect::<Result<Vec<_>, _>>()?;
    let alpha_upper = if opts.cap_alpha { ALPHA_CAP } else { f64::INFINITY };
    let alpha = model.add_variable(VariableDef::continuous(alpha_name, 0.0, alpha_upper))?;
    let betas = (1..=amb.empirical().len())
        .map(|s| model.add_variable(VariableDef::free(beta_name(s))))
        .collect::<Result<Vec<_>, _>>()?;

    // alpha |xi_s - xi| + beta_s - C_h sum_t y[xi,t] >= 0
    for (s, (xi_hat, _)) in amb.empirical().atoms().enumerate() {
        for (g, &xi) in grid.iter().enumerate() {
            let distance = (xi_hat as f64 - xi as f64).abs();
            let mut terms = Vec::with_capacity(t_max as usize + 2);
            if distance != 0.0 {
                terms.push((alpha, distance));
            }
            terms.push((betas[s], 1.0));
            if schedule.airborne_cost != 0.0 {
                terms.extend(queues[g].iter().map(|y| (*y, -schedule.airborne_cost)));
            }
            model.add_constraint(LinearConstraint::new(
                format!("dual[{},{}]", label(xi_hat), xi),
                terms,
                Sense::Ge,
                0.0,
            ))?;
        }
    }
    let mut objective = Vec::with_capacity(betas.len() + 1);
    if amb.radius() != 0.0 {
        objective.push((alpha, amb.radius()));
    }
    objective.extend(betas.iter().zip(amb.empirical().probabilities()).map(|(b, p)| (*b, *p)));
    Ok(RobustBlock { objective, queues })
}

/// Discretized deterministic-equivalent of the Wasserstein robust model.
pub fn build_dr_saghp(schedule: &FlightSchedule, amb: &AmbiguitySpec, opts: &BuildOptions) -> MilpModel {
    build_robust(schedule, &[(None, amb)], opts, "dr-saghp")
}

/// Multi-airport robust model: one ambiguity set per airport, shared first
/// stage, connections may span airports. Each airport uses its own radius;
/// use [`NetworkInstance::with_shared_radius`] for a common one.
pub fn build_dr_maghp(net: &NetworkInstance, opts: &BuildOptions) -> MilpModel {
    let blocks: Vec<(Option<&str>, &AmbiguitySpec)> = net
        .airports()
        .iter()
        .map(|z| (Some(z.as_str()), net.ambiguity(z).expect("validated network")))
        .collect();
    build_robust(net.schedule(), &blocks, opts, "dr-maghp")
}

fn build_robust(
    schedule: &FlightSchedule,
    blocks: &[(Option<&str>, &AmbiguitySpec)],
    opts: &BuildOptions,
    name: &str,
) -> MilpModel {
    expect_built((|| {
        let mut model = MilpModel::new(name);
        let first = add_first_stage_columns(&mut model, schedule)?;
        let (mut objective, constant) = ground_cost_terms(schedule, &first);
        let mut queues = Vec::with_capacity(blocks.len());
        for (airport, amb) in blocks {
            let block = match airport {
                None => add_robust_block(
                    &mut model,
                    schedule,
                    amb,
                    opts,
                    &names::y_grid,
                    names::alpha(),
                    &names::beta,
                    &|xi| format!("{xi}"),
                ),
                Some(z) => add_robust_block(
                    &mut model,
                    schedule,
                    amb,
                    opts,
                    &|xi, t| names::y_network(z, xi, t),
                    names::alpha_network(z),
                    &|s| names::beta_network(z, s),
                    &|xi| format!("{z},{xi}"),
                ),
            }?;
            objective.extend(block.objective);
            queues.push(block.queues);
        }
        add_assignment_rows(&mut model, schedule, &first)?;
        for (block_queues, (airport, amb)) in queues.iter().zip(blocks) {
            for (queue, &xi) in block_queues.iter().zip(amb.grid().values()) {
                let label = match airport {
                    Some(z) => format!("{z},{xi}"),
                    None => format!("{xi}"),
                };
                add_queue_rows(&mut model, schedule, &first, *airport, queue, xi, &label)?;
            }
        }
        add_coupling_rows(&mut model, schedule, &first)?;
        model.set_objective(objective, constant)?;
        Ok(model)
    })())
}

/// Recovers the slot assignment from a solved model built by this module.
pub fn extract_policy(
    model: &MilpModel,
    sol: &Solution,
    schedule: &FlightSchedule,
) -> Result<GroundHoldingPolicy, PolicyError> {
    if !matches!(sol.status, SolveStatus::Optimal | SolveStatus::NodeLimit) || sol.values.len() != model.num_variables()
    {
        return Err(PolicyError::NoIncumbent(sol.status));
    }
    let mut assignments = BTreeMap::new();
    let mut reported = 0.0;
    for f in &schedule.flights {
        let mut chosen = Vec::new();
        let mut weighted_slot = 0.0;
        for t in f.window(schedule.horizon) {
            let name = names::x(&f.id, t);
            let v = model.var_by_name(&name).ok_or(PolicyError::MissingColumn(name))?;
            let value = sol.values[v.index()];
            weighted_slot += t as f64 * value;
            if value > 0.5 {
                chosen.push(t);
            }
        }
        reported += f.ground_cost * (weighted_slot - f.scheduled_arrival as f64);
        match chosen.as_slice() {
            [t] => {
                assignments.insert(f.id.clone(), *t);
            }
            [] => return Err(PolicyError::NoSlot { flight: f.id.clone() }),
            many => {
                return Err(PolicyError::MultipleSlots {
                    flight: f.id.clone(),
                    count: many.len(),
                })
            }
        }
    }
    let policy = GroundHoldingPolicy::from_assignments(schedule, assignments)?;
    if (policy.ground_cost - reported).abs() > 1e-6 {
        return Err(PolicyError::CostMismatch {
            recomputed: policy.ground_cost,
            reported,
        });
    }
    Ok(policy)
}

/// Optimal dual multipliers and recourse costs of a solved robust model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustDuals {
    pub alpha: f64,
    pub beta: Vec<f64>,
    /// `C_h * sum_t y[xi,t]` for every grid capacity `xi`.
    pub recourse_costs: BTreeMap<u32, f64>,
}

impl RobustDuals {
    /// `eps * alpha + sum_s p_s beta_s`.
    pub fn dual_objective(&self, amb: &AmbiguitySpec) -> f64 {
        amb.radius() * self.alpha
            + self
                .beta
                .iter()
                .zip(amb.empirical().probabilities())
                .map(|(b, p)| b * p)
                .sum::<f64>()
    }
}

/// Reads `alpha`, `beta` and the queue costs for one ambiguity block.
/// `airport` selects the dr-MAGHP block; `None` reads a dr-SAGHP model.
pub fn robust_duals(
    model: &MilpModel,
    sol: &Solution,
    schedule: &FlightSchedule,
    amb: &AmbiguitySpec,
    airport: Option<&str>,
) -> Result<RobustDuals, PolicyError> {
    let get = |name: String| -> Result<f64, PolicyError> {
        model
            .var_by_name(&name)
            .map(|v| sol.values[v.index()])
            .ok_or(PolicyError::MissingColumn(name))
    };
    let alpha = get(match airport {
        Some(z) => names::alpha_network(z),
        None => names::alpha(),
    })?;
    let beta = (1..=amb.empirical().len())
        .map(|s| {
            get(match airport {
                Some(z) => names::beta_network(z, s),
                None => names::beta(s),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut recourse_costs = BTreeMap::new();
    for &xi in amb.grid().values() {
        let mut total = 0.0;
        for t in schedule.horizon.slots() {
            total += get(match airport {
                Some(z) => names::y_network(z, xi, t),
                None => names::y_grid(xi, t),
            })?;
        }
        recourse_costs.insert(xi, schedule.airborne_cost * total);
    }
    Ok(RobustDuals {
        alpha,
        beta,
        recourse_costs,
    })
}

#[cfg(test)]
mod tests;
