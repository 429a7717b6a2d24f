//! The demo operations, as plain Rust over JSON-friendly types.

use groundhold::domain::default_support_grid;
use groundhold::evaluate::{epsilon_sweep, shift_down, PolicyEvaluation, SweepConfig, SweepModel};
use groundhold::ingest::{self, synth_instance, SynthParams};
use groundhold::models::robust_duals;
use groundhold::{
    build_dr_saghp, extract_policy, solve_milp, wasserstein_distance, worst_case_distribution, AmbiguitySpec,
    BuildOptions, CapacityDistribution, DiscreteDistribution, FlightSchedule, SolveStatus, SolverOptions, SupportGrid,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// A single-airport instance as the page edits it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoInstance {
    pub horizon: u32,
    pub airborne_cost: f64,
    /// `flight_id,airport,scheduled_arrival_slot,ground_cost`
    pub schedule: String,
    /// `pred_id,succ_id,slack_slots`, may be empty.
    #[serde(default)]
    pub connections: String,
    /// `capacity,probability`
    pub capacity: String,
    /// Support grid as `lo..hi` or `a,b,c`; empty for the empirical range.
    #[serde(default)]
    pub grid: String,
}

struct Parsed {
    schedule: FlightSchedule,
    empirical: CapacityDistribution,
    grid: SupportGrid,
}

impl DemoInstance {
    fn parse(&self) -> Result<Parsed, String> {
        let connections = (!self.connections.trim().is_empty()).then_some(self.connections.as_str());
        let schedule = ingest::parse_schedule(&self.schedule, connections, self.horizon, self.airborne_cost)
            .map_err(|e| e.to_string())?;
        if schedule.airports().len() != 1 {
            return Err(format!(
                "the demo takes one airport, got {}",
                schedule.airports().join(",")
            ));
        }
        let empirical = ingest::parse_distribution(&self.capacity).map_err(|e| e.to_string())?;
        let grid = match self.grid.trim() {
            "" => default_support_grid(&empirical),
            g => ingest::parse_grid(g).map_err(|e| e.to_string())?,
        };
        Ok(Parsed {
            schedule,
            empirical,
            grid,
        })
    }
}

impl Parsed {
    fn ambiguity(&self, epsilon: f64) -> Result<AmbiguitySpec, String> {
        AmbiguitySpec::new(self.empirical.clone(), epsilon, self.grid.clone()).map_err(|e| e.to_string())
    }
}

/// Synthetic single-airport instance.
pub fn example(seed: u64) -> Result<DemoInstance, String> {
    let params = SynthParams {
        flights: 6,
        horizon: 4,
        ground_cost: (1, 2),
        airborne_cost: 3.0,
        capacity: (1, 4),
        history_len: 12,
        seed,
        ..SynthParams::default()
    };
    let synth = synth_instance(&params).map_err(|e| e.to_string())?;
    let (schedule, connections) = ingest::write_schedule(&synth.instance.schedule);
    let dist = synth.distributions.values().next().ok_or("no airport")?;
    Ok(DemoInstance {
        horizon: params.horizon,
        airborne_cost: params.airborne_cost,
        schedule,
        connections,
        capacity: ingest::write_distribution(dist),
        grid: String::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub epsilon: f64,
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub ground_cost: Option<f64>,
    pub assignments: BTreeMap<String, u32>,
}

fn radius_list(omega: &[f64]) -> Result<(), String> {
    match omega.iter().find(|e| !e.is_finite() || **e < 0.0) {
        Some(e) => Err(format!("radius {e} must be finite and nonnegative")),
        None if omega.is_empty() => Err("no radii given".into()),
        None => Ok(()),
    }
}

/// Robust objective and policy for each radius.
pub fn epsilon_curve(instance: &DemoInstance, omega: &[f64]) -> Result<Vec<CurvePoint>, String> {
    radius_list(omega)?;
    let p = instance.parse()?;
    omega
        .iter()
        .map(|&epsilon| {
            let amb = p.ambiguity(epsilon)?;
            let m = build_dr_saghp(&p.schedule, &amb, &BuildOptions::default());
            let sol = solve_milp(&m, &SolverOptions::default()).map_err(|e| e.to_string())?;
            let policy = match sol.status {
                SolveStatus::Optimal => Some(extract_policy(&m, &sol, &p.schedule).map_err(|e| e.to_string())?),
                _ => None,
            };
            Ok(CurvePoint {
                epsilon,
                status: sol.status,
                objective: policy.as_ref().map(|_| sol.objective),
                ground_cost: policy.as_ref().map(|p| p.ground_cost),
                assignments: policy.map(|p| p.assignments).unwrap_or_default(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCaseView {
    pub epsilon: f64,
    pub objective: f64,
    pub alpha: f64,
    pub empirical: Vec<(i64, f64)>,
    pub worst_case: Vec<(i64, f64)>,
    /// Queue cost of the robust policy at every grid capacity.
    pub recourse_costs: BTreeMap<u32, f64>,
    pub worst_case_expected_cost: f64,
    pub distance: f64,
}

/// The distribution the robust policy is hedged against at radius `epsilon`.
pub fn worst_case(instance: &DemoInstance, epsilon: f64) -> Result<WorstCaseView, String> {
    radius_list(&[epsilon])?;
    let p = instance.parse()?;
    let amb = p.ambiguity(epsilon)?;
    let m = build_dr_saghp(&p.schedule, &amb, &BuildOptions::default());
    let sol = solve_milp(&m, &SolverOptions::default()).map_err(|e| e.to_string())?;
    if sol.status != SolveStatus::Optimal {
        return Err(format!("robust model is {:?}", sol.status).to_lowercase());
    }
    let d = robust_duals(&m, &sol, &p.schedule, &amb, None).map_err(|e| e.to_string())?;
    let worst = worst_case_distribution(&d.recourse_costs, &amb).map_err(|e| e.to_string())?;
    let empirical = DiscreteDistribution::from(&p.empirical);
    let marginal = worst.plan.marginal();
    let distance = wasserstein_distance(&marginal, &empirical).map_err(|e| e.to_string())?;
    Ok(WorstCaseView {
        epsilon,
        objective: sol.objective,
        alpha: d.alpha,
        empirical: empirical.atoms().to_vec(),
        worst_case: marginal.atoms().to_vec(),
        recourse_costs: d.recourse_costs,
        worst_case_expected_cost: worst.expected_cost,
        distance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyStats {
    pub model: String,
    pub epsilon: Option<f64>,
    pub objective: Option<f64>,
    pub ground_cost: Option<f64>,
    pub evaluation: Option<PolicyEvaluation>,
    pub expected_cost: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// Evaluation distribution after the shift.
    pub evaluation_distribution: Vec<(u32, f64)>,
    pub policies: Vec<PolicyStats>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompareOptions {
    pub epsilon: f64,
    /// Evaluate under the empirical distribution with `shift_fraction` of
    /// each atom moved `shift` flights lower.
    pub shift: u32,
    pub shift_fraction: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Out-of-sample costs of the deterministic, stochastic and robust policies.
pub fn compare(instance: &DemoInstance, opts: &CompareOptions) -> Result<Comparison, String> {
    radius_list(&[opts.epsilon])?;
    if opts.samples == 0 || opts.samples > 100_000 {
        return Err(format!("sample count {} outside 1..=100000", opts.samples));
    }
    let p = instance.parse()?;
    let eval = shift_down(&p.empirical, opts.shift, opts.shift_fraction).map_err(|e| e.to_string())?;
    let config = SweepConfig {
        omega: vec![opts.epsilon],
        sample_sizes: vec![opts.samples],
        seed: opts.seed,
        grid: Some(p.grid.clone()),
        ..SweepConfig::default()
    };
    let result = epsilon_sweep(&p.schedule, &p.empirical, &eval, &config).map_err(|e| e.to_string())?;
    let policies = result
        .rows
        .iter()
        .zip(&result.solves)
        .map(|(row, solve)| PolicyStats {
            model: match row.model {
                SweepModel::Deterministic { capacity } => format!("det (K={capacity})"),
                m => m.label().to_string(),
            },
            epsilon: row.model.epsilon(),
            objective: row.objective,
            ground_cost: solve.policy.as_ref().map(|p| p.ground_cost),
            evaluation: row.evaluation.clone(),
            expected_cost: row.expected_cost,
        })
        .collect();
    Ok(Comparison {
        evaluation_distribution: eval
            .support()
            .iter()
            .copied()
            .zip(eval.probabilities().iter().copied())
            .collect(),
        policies,
    })
}
