//! Out-of-sample evaluation of ground holding policies and the epsilon
//! sweep that compares deterministic, stochastic and robust policies.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    default_support_grid, AmbiguitySpec, CapacityDistribution, DomainError, FlightSchedule, SupportGrid,
};
use crate::milp::MilpModel;
use crate::models::{
    build_d_saghp, build_dr_saghp, build_s_saghp, extract_policy, BuildOptions, GroundHoldingPolicy, PolicyError,
};
use crate::solver::{solve_milp, SolveStatus, SolverOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("policy does not match schedule: {0}")]
    PolicyMismatch(#[from] PolicyError),
    #[error("at least one sample is required")]
    NoSamples,
    #[error("epsilon grid is empty")]
    EmptyOmega,
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Queue lengths `y_t = max(0, y_{t-1} + a_t - capacity)`, `y_0 = 0`.
pub fn queue_lengths(arrivals: &[u32], capacity: u32) -> Vec<u64> {
    let mut y = 0u64;
    arrivals
        .iter()
        .map(|&a| {
            y = (y + a as u64).saturating_sub(capacity as u64);
            y
        })
        .collect()
}

/// Optimal airborne holding cost for a fixed landing profile and a realized
/// per-slot capacity: `C_h * sum_t y_t` over the greedy queue.
pub fn second_stage_cost(arrivals: &[u32], capacity: u32, airborne_cost: f64) -> f64 {
    airborne_cost * queue_lengths(arrivals, capacity).iter().sum::<u64>() as f64
}

/// `n` i.i.d. draws from `dist` by inverse CDF over a ChaCha8 stream.
pub fn sample_capacities(dist: &CapacityDistribution, n: usize, seed: u64) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cumulative: Vec<f64> = dist
        .probabilities()
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    (0..n)
        .map(|_| {
            let u: f64 = rng.gen();
            let k = cumulative.iter().position(|c| u < *c).unwrap_or(cumulative.len() - 1);
            dist.support()[k]
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEvaluation {
    pub per_sample_costs: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation.
    pub std_dev: f64,
    pub sample_size: usize,
}

impl PolicyEvaluation {
    pub fn from_costs(per_sample_costs: Vec<f64>) -> Self {
        let n = per_sample_costs.len();
        let mean = per_sample_costs.iter().sum::<f64>() / n as f64;
        let var = per_sample_costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / n as f64;
        Self {
            per_sample_costs,
            mean,
            std_dev: var.sqrt(),
            sample_size: n,
        }
    }
}

fn check_policy(policy: &GroundHoldingPolicy, schedule: &FlightSchedule) -> Result<(), EvalError> {
    let rebuilt = GroundHoldingPolicy::from_assignments(schedule, policy.assignments.clone())?;
    if (rebuilt.ground_cost - policy.ground_cost).abs() > 1e-9 {
        return Err(EvalError::PolicyMismatch(PolicyError::CostMismatch {
            recomputed: rebuilt.ground_cost,
            reported: policy.ground_cost,
        }));
    }
    Ok(())
}

/// Total cost (ground plus airborne) of `policy` under each sampled capacity.
pub fn evaluate_policy(
    policy: &GroundHoldingPolicy,
    schedule: &FlightSchedule,
    samples: &[u32],
) -> Result<PolicyEvaluation, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::NoSamples);
    }
    check_policy(policy, schedule)?;
    let arrivals = policy.arrivals_per_slot(schedule, None);
    let costs = samples
        .iter()
        .map(|&k| policy.ground_cost + second_stage_cost(&arrivals, k, schedule.airborne_cost))
        .collect();
    Ok(PolicyEvaluation::from_costs(costs))
}

/// Exact expected total cost of `policy` when capacity follows `dist`.
pub fn expected_cost(
    policy: &GroundHoldingPolicy,
    schedule: &FlightSchedule,
    dist: &CapacityDistribution,
) -> Result<f64, EvalError> {
    check_policy(policy, schedule)?;
    let arrivals = policy.arrivals_per_slot(schedule, None);
    Ok(policy.ground_cost
        + dist
            .atoms()
            .map(|(k, p)| p * second_stage_cost(&arrivals, k, schedule.airborne_cost))
            .sum::<f64>())
}

/// Deterministic-model capacity: the empirical mean rounded half up.
pub fn deterministic_capacity(dist: &CapacityDistribution) -> u32 {
    (dist.mean() + 0.5).floor() as u32
}

/// Moves `fraction` of every atom's mass `steps` flights lower (floored at 0).
pub fn shift_down(dist: &CapacityDistribution, steps: u32, fraction: f64) -> Result<CapacityDistribution, EvalError> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(EvalError::Domain(DomainError::Distribution(format!(
            "shift fraction {fraction} outside [0, 1]"
        ))));
    }
    let mut mass: BTreeMap<u32, f64> = BTreeMap::new();
    for (k, p) in dist.atoms() {
        *mass.entry(k.saturating_sub(steps)).or_default() += p * fraction;
        *mass.entry(k).or_default() += p * (1.0 - fraction);
    }
    mass.retain(|_, p| *p > 0.0);
    Ok(CapacityDistribution::new(
        mass.keys().copied().collect(),
        mass.values().copied().collect(),
    )?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SweepModel {
    Deterministic { capacity: u32 },
    Stochastic,
    Robust { epsilon: f64 },
}

impl SweepModel {
    pub fn label(&self) -> &'static str {
        match self {
            SweepModel::Deterministic { .. } => "det",
            SweepModel::Stochastic => "sp",
            SweepModel::Robust { .. } => "dr",
        }
    }

    pub fn epsilon(&self) -> Option<f64> {
        match self {
            SweepModel::Robust { epsilon } => Some(*epsilon),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub omega: Vec<f64>,
    pub sample_sizes: Vec<usize>,
    pub seed: u64,
    /// Robust-model support grid; the default unit-step grid when `None`.
    pub grid: Option<SupportGrid>,
    pub solver: SolverOptions,
    pub build: BuildOptions,
    /// Worker threads for the solve phase (1 runs inline).
    pub jobs: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            omega: DEFAULT_OMEGA.to_vec(),
            sample_sizes: vec![50, 100, 500, 1000],
            seed: 0,
            grid: None,
            solver: SolverOptions::default(),
            build: BuildOptions::default(),
            jobs: 1,
        }
    }
}

/// Default candidate radii.
pub const DEFAULT_OMEGA: [f64; 9] = [0.01, 0.1, 0.7, 0.74, 0.75, 0.80, 1.0, 10.0, 100.0];

/// A solved model of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSolve {
    pub model: SweepModel,
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub policy: Option<GroundHoldingPolicy>,
    /// Why no policy is available, when the solve failed.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub model: SweepModel,
    pub sample_size: usize,
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub evaluation: Option<PolicyEvaluation>,
    /// Exact expectation under the evaluation distribution.
    pub expected_cost: Option<f64>,
    pub ground_cost: Option<f64>,
    pub total_delay: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub solves: Vec<SweepSolve>,
    pub rows: Vec<SweepRow>,
    /// Sampled capacities per sample size.
    pub samples: BTreeMap<usize, Vec<u32>>,
}

fn build_model(
    model: SweepModel,
    schedule: &FlightSchedule,
    empirical: &CapacityDistribution,
    grid: &SupportGrid,
    build: &BuildOptions,
) -> Result<MilpModel, DomainError> {
    Ok(match model {
        SweepModel::Deterministic { capacity } => build_d_saghp(schedule, capacity),
        SweepModel::Stochastic => build_s_saghp(schedule, empirical, build),
        SweepModel::Robust { epsilon } => {
            let amb = AmbiguitySpec::new(empirical.clone(), epsilon, grid.clone())?;
            build_dr_saghp(schedule, &amb, build)
        }
    })
}

fn solve_cell(
    model: SweepModel,
    schedule: &FlightSchedule,
    empirical: &CapacityDistribution,
    grid: &SupportGrid,
    config: &SweepConfig,
) -> SweepSolve {
    let failed = |status, note: String| SweepSolve {
        model,
        status,
        objective: None,
        policy: None,
        note: Some(note),
    };
    let milp = match build_model(model, schedule, empirical, grid, &config.build) {
        Ok(m) => m,
        Err(e) => return failed(SolveStatus::Infeasible, e.to_string()),
    };
    let sol = match solve_milp(&milp, &config.solver) {
        Ok(s) => s,
        Err(e) => return failed(SolveStatus::Infeasible, e.to_string()),
    };
    if !matches!(sol.status, SolveStatus::Optimal | SolveStatus::NodeLimit) || sol.values.is_empty() {
        return failed(sol.status, format!("solver status {:?}", sol.status));
    }
    match extract_policy(&milp, &sol, schedule) {
        Ok(policy) => SweepSolve {
            model,
            status: sol.status,
            objective: Some(sol.objective),
            policy: Some(policy),
            note: None,
        },
        Err(PolicyError::NoIncumbent(status)) => failed(status, "no incumbent".into()),
        Err(e) => failed(sol.status, e.to_string()),
    }
}

/// Runs `f` over `items` on up to `jobs` scoped threads, keeping input order.
fn parallel_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let jobs = jobs.clamp(1, items.len().max(1));
    if jobs == 1 {
        return items.iter().map(f).collect();
    }
    let mut slots: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..jobs)
            .map(|k| {
                let f = &f;
                scope.spawn(move || {
                    items
                        .iter()
                        .enumerate()
                        .skip(k)
                        .step_by(jobs)
                        .map(|(i, item)| (i, f(item)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("sweep worker panicked") {
                slots[i] = Some(r);
            }
        }
    });
    slots.into_iter().map(|r| r.expect("every cell computed")).collect()
}

/// Solves the deterministic, stochastic and one robust model per radius in
/// `config.omega`, then evaluates every policy on samples of `eval_dist` for
/// each requested sample size. Rows are ordered model-major (det, sp, then
/// dr by the order of `omega`), sample size minor.
pub fn epsilon_sweep(
    schedule: &FlightSchedule,
    empirical: &CapacityDistribution,
    eval_dist: &CapacityDistribution,
    config: &SweepConfig,
) -> Result<SweepResult, EvalError> {
    if config.omega.is_empty() {
        return Err(EvalError::EmptyOmega);
    }
    if config.sample_sizes.contains(&0) {
        return Err(EvalError::NoSamples);
    }
    let grid = match &config.grid {
        Some(g) => g.clone(),
        None => default_support_grid(empirical),
    };
    // surface a grid that misses the empirical support before solving
    AmbiguitySpec::new(empirical.clone(), 0.0, grid.clone())?;

    let mut models = vec![
        SweepModel::Deterministic {
            capacity: deterministic_capacity(empirical),
        },
        SweepModel::Stochastic,
    ];
    models.extend(config.omega.iter().map(|&epsilon| SweepModel::Robust { epsilon }));

    let solves = parallel_map(&models, config.jobs, |m| {
        solve_cell(*m, schedule, empirical, &grid, config)
    });

    let samples: BTreeMap<usize, Vec<u32>> = config
        .sample_sizes
        .iter()
        .map(|&n| (n, sample_capacities(eval_dist, n, config.seed)))
        .collect();

    let mut rows = Vec::with_capacity(solves.len() * config.sample_sizes.len());
    for solve in &solves {
        for &n in &config.sample_sizes {
            let (evaluation, expected) = match &solve.policy {
                Some(p) => (
                    Some(evaluate_policy(p, schedule, &samples[&n])?),
                    Some(expected_cost(p, schedule, eval_dist)?),
                ),
                None => (None, None),
            };
            rows.push(SweepRow {
                model: solve.model,
                sample_size: n,
                status: solve.status,
                objective: solve.objective,
                evaluation,
                expected_cost: expected,
                ground_cost: solve.policy.as_ref().map(|p| p.ground_cost),
                total_delay: solve.policy.as_ref().map(|p| p.total_delay()),
            });
        }
    }
    Ok(SweepResult { solves, rows, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Flight, TimeHorizon};
    use std::collections::BTreeMap;

    fn two_flight_schedule(airborne: f64) -> FlightSchedule {
        FlightSchedule::new(
            TimeHorizon::new(3).unwrap(),
            vec![Flight::new("f1", "A", 1, 1.0), Flight::new("f2", "A", 1, 1.0)],
            vec![],
            airborne,
        )
        .unwrap()
    }

    #[test]
    fn second_stage_examples() {
        assert_eq!(queue_lengths(&[3, 0, 2], 2), vec![1, 0, 0]);
        assert_eq!(second_stage_cost(&[3, 0, 2], 2, 1.0), 1.0);
        assert_eq!(second_stage_cost(&[1, 2, 1], 5, 3.0), 0.0);
        assert_eq!(second_stage_cost(&[2], 0, 2.0), 4.0);
    }

    #[test]
    fn shifting_moves_mass_down() {
        let d = CapacityDistribution::new(vec![1, 3], vec![0.5, 0.5]).unwrap();
        let full = shift_down(&d, 2, 1.0).unwrap();
        assert_eq!(full.support(), &[0, 1]);
        let half = shift_down(&d, 1, 0.5).unwrap();
        assert_eq!(half.support(), &[0, 1, 2, 3]);
        assert!(half.atoms().all(|(_, p)| (p - 0.25).abs() < 1e-12));
        assert_eq!(shift_down(&d, 1, 0.0).unwrap(), d);
        assert!(shift_down(&d, 1, 1.5).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let d = CapacityDistribution::new(vec![3, 5, 9], vec![0.2, 0.5, 0.3]).unwrap();
        assert_eq!(sample_capacities(&d, 200, 7), sample_capacities(&d, 200, 7));
        assert_ne!(sample_capacities(&d, 200, 7), sample_capacities(&d, 200, 8));
        assert_eq!(
            sample_capacities(&CapacityDistribution::degenerate(4), 5, 1),
            vec![4; 5]
        );
    }

    #[test]
    fn sampling_frequency_concentrates() {
        // binomial(1e5, 0.5): sd of the frequency is ~0.0016, so 0.01 is > 6 sd
        let d = CapacityDistribution::new(vec![0, 1], vec![0.5, 0.5]).unwrap();
        let s = sample_capacities(&d, 100_000, 42);
        let freq = s.iter().filter(|v| **v == 1).count() as f64 / s.len() as f64;
        assert!((freq - 0.5).abs() < 0.01, "{freq}");
    }

    #[test]
    fn zero_delay_policy_with_ample_capacity_costs_nothing() {
        let s = two_flight_schedule(2.0);
        let p = GroundHoldingPolicy::no_delay(&s);
        let e = evaluate_policy(&p, &s, &[2, 3, 5]).unwrap();
        assert_eq!((e.mean, e.std_dev, e.sample_size), (0.0, 0.0, 3));
    }

    #[test]
    fn delayed_policy_examples() {
        let s = two_flight_schedule(2.0);
        let p =
            GroundHoldingPolicy::from_assignments(&s, BTreeMap::from([("f1".into(), 1), ("f2".into(), 2)])).unwrap();
        assert_eq!(evaluate_policy(&p, &s, &[1]).unwrap().mean, 1.0);
        // capacity 0: queue [1, 2, 2] -> airborne 2 * 5 = 10
        assert_eq!(evaluate_policy(&p, &s, &[0]).unwrap().mean, 11.0);
    }

    #[test]
    fn mismatched_policy_rejected() {
        let s = two_flight_schedule(2.0);
        let p =
            GroundHoldingPolicy::from_assignments(&s, BTreeMap::from([("f1".into(), 1), ("f2".into(), 2)])).unwrap();
        let mut other = s.clone();
        other.flights.pop();
        assert!(matches!(
            evaluate_policy(&p, &other, &[1]),
            Err(EvalError::PolicyMismatch(_))
        ));
        assert_eq!(evaluate_policy(&p, &s, &[]), Err(EvalError::NoSamples));
    }

    #[test]
    fn population_std() {
        let e = PolicyEvaluation::from_costs(vec![0.0, 4.0]);
        assert_eq!((e.mean, e.std_dev), (2.0, 2.0));
    }

    #[test]
    fn deterministic_capacity_rounds_half_up() {
        let d = CapacityDistribution::new(vec![2, 3], vec![0.5, 0.5]).unwrap();
        assert_eq!(deterministic_capacity(&d), 3);
        let d = CapacityDistribution::new(vec![2, 3], vec![0.75, 0.25]).unwrap();
        assert_eq!(deterministic_capacity(&d), 2);
    }

    #[test]
    fn parallel_map_keeps_order() {
        let items: Vec<u32> = (0..17).collect();
        assert_eq!(parallel_map(&items, 4, |x| x * 2), parallel_map(&items, 1, |x| x * 2));
    }
}
