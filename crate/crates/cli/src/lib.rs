//! Command implementations behind the `groundhold` binary.
//!
//! Exit codes: 0 success, 1 model infeasible, 2 usage or I/O error,
//! 3 solver limit (node limit, iteration limit, numerical trouble).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use groundhold::evaluate::{
    deterministic_capacity, epsilon_sweep, evaluate_policy, expected_cost, sample_capacities, shift_down, SweepConfig,
    SweepResult, DEFAULT_OMEGA,
};
use groundhold::ingest::{self, IngestError, Instance, SynthParams};
use groundhold::models::{robust_duals, RobustDuals};
use groundhold::solver::{Branching, NodeOrder};
use groundhold::wasserstein::DiscreteDistribution;
use groundhold::{
    build_d_saghp, build_dr_maghp, build_dr_saghp, build_s_saghp, default_support_grid, export_mps, extract_policy,
    solve_milp, wasserstein_distance, worst_case_distribution, AmbiguitySpec, BuildOptions, CapacityDistribution,
    FlightSchedule, GroundHoldingPolicy, MilpModel, NetworkInstance, SolveStatus, SolverOptions, SupportGrid,
};
use serde::{Deserialize, Serialize};

pub const SOLVE_SCHEMA: &str = "groundhold-solve/1";
pub const EVALUATE_SCHEMA: &str = "groundhold-evaluate/1";
pub const SWEEP_SCHEMA: &str = "groundhold-sweep/1";
pub const SAMPLES_SCHEMA: &str = "groundhold-sweep-samples/1";
pub const SWEEP_FILE: &str = "sweep.tsv";
pub const SAMPLES_FILE: &str = "samples.tsv";

#[derive(Debug, Parser)]
#[command(name = "groundhold", version, about = "Ground holding under capacity uncertainty")]
pub struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for sweeps.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Output path: a directory for `gen` and `sweep`, a file otherwise (stdout when absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic instance bundle.
    Gen(GenArgs),
    /// Build and solve one model, writing a JSON result document.
    Solve(SolveArgs),
    /// Solve det, sp and dr over a radius grid and evaluate out of sample.
    Sweep(SweepArgs),
    /// Evaluate the policy of a solve result on sampled capacities.
    Evaluate(EvaluateArgs),
    /// Write a model in fixed-format MPS.
    ExportMps(ModelArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Det,
    Sp,
    Dr,
    DrMaghp,
}

impl ModelKind {
    fn label(self) -> &'static str {
        match self {
            ModelKind::Det => "det",
            ModelKind::Sp => "sp",
            ModelKind::Dr => "dr",
            ModelKind::DrMaghp => "dr-maghp",
        }
    }

    fn robust(self) -> bool {
        matches!(self, ModelKind::Dr | ModelKind::DrMaghp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BranchingArg {
    MostFractional,
    LowestIndex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NodeOrderArg {
    BestBound,
    DepthFirst,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 1e-7)]
    pub feasibility_tol: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub integrality_tol: f64,
    /// Absolute optimality gap.
    #[arg(long, default_value_t = 1e-6)]
    pub optimality_gap: f64,
    #[arg(long, default_value_t = 100_000)]
    pub node_limit: usize,
    #[arg(long, value_enum, default_value_t = BranchingArg::MostFractional)]
    pub branching: BranchingArg,
    #[arg(long, value_enum, default_value_t = NodeOrderArg::BestBound)]
    pub node_order: NodeOrderArg,
}

impl SolverArgs {
    pub fn options(&self) -> Result<SolverOptions, CliError> {
        for (name, v) in [
            ("feasibility-tol", self.feasibility_tol),
            ("integrality-tol", self.integrality_tol),
            ("optimality-gap", self.optimality_gap),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Usage(format!("--{name} must be positive")));
            }
        }
        if self.node_limit == 0 {
            return Err(CliError::Usage("--node-limit must be positive".into()));
        }
        Ok(SolverOptions {
            feasibility_tol: self.feasibility_tol,
            integrality_tol: self.integrality_tol,
            optimality_gap: self.optimality_gap,
            node_limit: self.node_limit,
            branching: match self.branching {
                BranchingArg::MostFractional => Branching::MostFractional,
                BranchingArg::LowestIndex => Branching::LowestIndex,
            },
            node_order: match self.node_order {
                NodeOrderArg::BestBound => NodeOrder::BestBound,
                NodeOrderArg::DepthFirst => NodeOrder::DepthFirst,
            },
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct BuildArgs {
    /// Require every airborne queue to be empty at the last slot.
    #[arg(long)]
    pub clear_queue: bool,
    /// Bound the robust multiplier alpha above by 1e9.
    #[arg(long)]
    pub cap_alpha: bool,
}

impl BuildArgs {
    fn options(&self) -> BuildOptions {
        BuildOptions {
            clear_queue_at_horizon: self.clear_queue,
            cap_alpha: self.cap_alpha,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 8)]
    pub flights: usize,
    #[arg(long, default_value_t = 6)]
    pub horizon: u32,
    #[arg(long, default_value_t = 1)]
    pub airports: usize,
    /// Inclusive integer range `lo,hi` for per-slot ground costs.
    #[arg(long, default_value = "1,3", value_parser = parse_pair)]
    pub ground_cost: (u32, u32),
    #[arg(long, default_value_t = 5.0)]
    pub airborne_cost: f64,
    /// Inclusive range `lo,hi` of observed per-slot throughput.
    #[arg(long, default_value = "1,3", value_parser = parse_pair)]
    pub capacity: (u32, u32),
    #[arg(long, default_value_t = 0.2)]
    pub connection_density: f64,
    /// Throughput observations per airport.
    #[arg(long, default_value_t = 24)]
    pub history_len: usize,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Instance bundle directory.
    pub instance: PathBuf,
    #[arg(long, value_enum)]
    pub model: ModelKind,
    /// Wasserstein radius; required for dr and dr-maghp.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Capacity of the deterministic model (default: empirical mean rounded half up).
    #[arg(long)]
    pub capacity: Option<u32>,
    /// Support grid as `lo..hi` or `a,b,c` (default: unit steps over the empirical support).
    #[arg(long)]
    pub grid: Option<String>,
    /// Airport for single-airport models; optional when the instance has one.
    #[arg(long)]
    pub airport: Option<String>,
    #[command(flatten)]
    pub build: BuildArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvalSource {
    /// Evaluation distribution file (`capacity,probability`); default: the empirical distribution.
    #[arg(long, conflicts_with = "eval_shift")]
    pub eval_dist: Option<PathBuf>,
    /// Evaluate on the empirical distribution shifted this many flights lower.
    #[arg(long)]
    pub eval_shift: Option<u32>,
    /// Share of each atom's mass moved by `--eval-shift`.
    #[arg(long, default_value_t = 1.0, requires = "eval_shift")]
    pub eval_shift_fraction: f64,
}

impl EvalSource {
    fn resolve(&self, empirical: &CapacityDistribution) -> Result<CapacityDistribution, CliError> {
        match (&self.eval_dist, self.eval_shift) {
            (Some(path), _) => Ok(ingest::parse_distribution(&read_text(path)?)?),
            (None, Some(steps)) => {
                shift_down(empirical, steps, self.eval_shift_fraction).map_err(|e| CliError::Usage(e.to_string()))
            }
            (None, None) => Ok(empirical.clone()),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// Instance bundle directory.
    pub instance: PathBuf,
    /// Comma-separated radii.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_OMEGA.to_vec())]
    pub omega: Vec<f64>,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',', default_values_t = vec![50usize, 100, 500, 1000])]
    pub sample_sizes: Vec<usize>,
    #[command(flatten)]
    pub eval: EvalSource,
    /// Support grid of the robust models (default: unit steps over the empirical support).
    #[arg(long)]
    pub grid: Option<String>,
    /// Airport to sweep; optional when the instance has one.
    #[arg(long)]
    pub airport: Option<String>,
    #[command(flatten)]
    pub build: BuildArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Instance bundle directory.
    pub instance: PathBuf,
    /// Result document written by `solve`.
    #[arg(long)]
    pub policy: PathBuf,
    /// Number of sampled capacities.
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[command(flatten)]
    pub eval: EvalSource,
    /// Airport the policy was solved for; optional when the instance has one.
    #[arg(long)]
    pub airport: Option<String>,
}

fn parse_pair(s: &str) -> Result<(u32, u32), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected `lo,hi`, got {s:?}"))?;
    let a = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
    let b = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
    Ok((a, b))
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Infeasible(String),
    Limit(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Infeasible(_) => 1,
            CliError::Usage(_) | CliError::Io(_) => 2,
            CliError::Limit(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Infeasible(m) => write!(f, "infeasible: {m}"),
            CliError::Limit(m) => write!(f, "solver limit: {m}"),
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Io { .. } => CliError::Io(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<groundhold::domain::DomainError> for CliError {
    fn from(e: groundhold::domain::DomainError) -> Self {
        CliError::Usage(e.to_string())
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn require_out(out: Option<&Path>, command: &str) -> Result<PathBuf, CliError> {
    out.map(Path::to_path_buf)
        .ok_or_else(|| CliError::Usage(format!("{command} requires --out <DIR>")))
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Gen(args) => cmd_gen(args, cli.seed, &require_out(out, "gen")?),
        Command::Solve(args) => cmd_solve(args, out),
        Command::Sweep(args) => cmd_sweep(args, cli.seed, cli.jobs, &require_out(out, "sweep")?),
        Command::Evaluate(args) => cmd_evaluate(args, cli.seed, out),
        Command::ExportMps(args) => cmd_export_mps(args, out),
    }
}

pub fn cmd_gen(args: &GenArgs, seed: u64, out: &Path) -> Result<(), CliError> {
    let params = SynthParams {
        flights: args.flights,
        horizon: args.horizon,
        airports: args.airports,
        ground_cost: args.ground_cost,
        airborne_cost: args.airborne_cost,
        capacity: args.capacity,
        connection_density: args.connection_density,
        history_len: args.history_len,
        seed,
    };
    let synth = ingest::synth_instance(&params)?;
    ingest::write_bundle(out, &synth.instance)?;
    eprintln!(
        "wrote {} flights, {} connections to {}",
        synth.instance.schedule.flights.len(),
        synth.instance.schedule.connections.len(),
        out.display()
    );
    Ok(())
}

/// The airport a single-airport command works on.
fn pick_airport(instance: &Instance, requested: Option<&str>) -> Result<String, CliError> {
    match requested {
        Some(z) if instance.schedule.airports().iter().any(|a| a == z) => Ok(z.to_string()),
        Some(z) => Err(CliError::Usage(format!("instance has no airport {z}"))),
        None => Ok(instance.sole_airport()?),
    }
}

fn grid_for(spec: Option<&str>, empirical: &CapacityDistribution) -> Result<SupportGrid, CliError> {
    match spec {
        Some(s) => Ok(ingest::parse_grid(s)?),
        None => Ok(default_support_grid(empirical)),
    }
}

struct Built {
    model: MilpModel,
    schedule: FlightSchedule,
    airport: Option<String>,
    robust: Vec<(String, AmbiguitySpec)>,
}

fn build(args: &ModelArgs) -> Result<Built, CliError> {
    let instance = ingest::load_bundle(&args.instance)?;
    if args.model.robust() != args.epsilon.is_some() {
        return Err(CliError::Usage(if args.model.robust() {
            format!("--epsilon is required for --model {}", args.model.label())
        } else {
            format!("--epsilon applies only to dr and dr-maghp, not {}", args.model.label())
        }));
    }
    let opts = args.build.options();
    if args.model == ModelKind::DrMaghp {
        let eps = args.epsilon.unwrap_or_default();
        let history = instance.binned_history()?;
        let airports = instance.schedule.airports();
        let mut ambiguities = BTreeMap::new();
        for z in &airports {
            let emp = ingest::empirical_distribution(&history, z)?;
            let grid = grid_for(args.grid.as_deref(), &emp)?;
            ambiguities.insert(z.clone(), AmbiguitySpec::new(emp, eps, grid)?);
        }
        let net = NetworkInstance::new(airports, instance.schedule.clone(), ambiguities)?;
        return Ok(Built {
            model: build_dr_maghp(&net, &opts),
            schedule: instance.schedule,
            airport: None,
            robust: net.ambiguities().iter().map(|(z, a)| (z.clone(), a.clone())).collect(),
        });
    }
    let airport = pick_airport(&instance, args.airport.as_deref())?;
    let schedule = instance.schedule.restrict_to_airport(&airport);
    let empirical = instance.empirical(&airport)?;
    let mut robust = Vec::new();
    let model = match args.model {
        ModelKind::Det => build_d_saghp(
            &schedule,
            args.capacity.unwrap_or_else(|| deterministic_capacity(&empirical)),
        ),
        ModelKind::Sp => build_s_saghp(&schedule, &empirical, &opts),
        _ => {
            let grid = grid_for(args.grid.as_deref(), &empirical)?;
            let amb = AmbiguitySpec::new(empirical, args.epsilon.unwrap_or_default(), grid)?;
            let m = build_dr_saghp(&schedule, &amb, &opts);
            robust.push((airport.clone(), amb));
            m
        }
    };
    Ok(Built {
        model,
        schedule,
        airport: Some(airport),
        robust,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualBlock {
    pub alpha: f64,
    pub beta: Vec<f64>,
    /// `eps * alpha + sum_s p_s beta_s`.
    pub dual_objective: f64,
    /// Worst-case capacity distribution as `[capacity, probability]` pairs.
    pub worst_case: Vec<(i64, f64)>,
    pub worst_case_expected_cost: f64,
    pub worst_case_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStatsDoc {
    pub nodes: usize,
    pub pivots: usize,
    /// Absent when no finite bound exists (infeasible models).
    pub best_bound: Option<f64>,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveDocument {
    pub schema: String,
    pub model: String,
    pub epsilon: Option<f64>,
    pub airport: Option<String>,
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub ground_cost: Option<f64>,
    pub assignments: BTreeMap<String, u32>,
    pub ground_delays: BTreeMap<String, u32>,
    /// Robust multipliers per airport.
    pub duals: BTreeMap<String, DualBlock>,
    pub stats: SolveStatsDoc,
}

fn dual_block(d: &RobustDuals, amb: &AmbiguitySpec) -> Result<DualBlock, CliError> {
    let diag = |e: groundhold::wasserstein::WassersteinError| CliError::Limit(e.to_string());
    let worst = worst_case_distribution(&d.recourse_costs, amb).map_err(diag)?;
    let marginal = worst.plan.marginal();
    let distance = wasserstein_distance(&marginal, &DiscreteDistribution::from(amb.empirical())).map_err(diag)?;
    Ok(DualBlock {
        alpha: d.alpha,
        beta: d.beta.clone(),
        dual_objective: d.dual_objective(amb),
        worst_case: marginal.atoms().to_vec(),
        worst_case_expected_cost: worst.expected_cost,
        worst_case_distance: distance,
    })
}

pub fn cmd_solve(args: &SolveArgs, out: Option<&Path>) -> Result<(), CliError> {
    let opts = args.solver.options()?;
    let built = build(&args.model)?;
    let start = Instant::now();
    let sol = solve_milp(&built.model, &opts).map_err(|e| CliError::Limit(e.to_string()))?;
    let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;

    let has_incumbent = matches!(sol.status, SolveStatus::Optimal | SolveStatus::NodeLimit) && !sol.values.is_empty();
    let policy = if has_incumbent {
        Some(extract_policy(&built.model, &sol, &built.schedule).map_err(|e| CliError::Limit(e.to_string()))?)
    } else {
        None
    };
    let mut duals = BTreeMap::new();
    if has_incumbent {
        let network = args.model.model == ModelKind::DrMaghp;
        for (z, amb) in &built.robust {
            let d = robust_duals(&built.model, &sol, &built.schedule, amb, network.then_some(z.as_str()))
                .map_err(|e| CliError::Limit(e.to_string()))?;
            duals.insert(z.clone(), dual_block(&d, amb)?);
        }
    }
    let doc = SolveDocument {
        schema: SOLVE_SCHEMA.into(),
        model: args.model.model.label().into(),
        epsilon: args.model.epsilon,
        airport: built.airport,
        status: sol.status,
        objective: has_incumbent.then_some(sol.objective),
        ground_cost: policy.as_ref().map(|p| p.ground_cost),
        assignments: policy.as_ref().map(|p| p.assignments.clone()).unwrap_or_default(),
        ground_delays: policy.map(|p| p.ground_delays).unwrap_or_default(),
        duals,
        stats: SolveStatsDoc {
            nodes: sol.stats.nodes,
            pivots: sol.stats.pivots,
            best_bound: Some(sol.stats.best_bound).filter(|b| b.is_finite()),
            wall_time_ms,
        },
    };
    let text = serde_json::to_string_pretty(&doc).expect("document serializes") + "\n";
    write_output(out, &text)?;
    match sol.status {
        SolveStatus::Optimal => Ok(()),
        SolveStatus::NodeLimit => Err(CliError::Limit("node limit reached".into())),
        SolveStatus::Infeasible => Err(CliError::Infeasible("model has no feasible assignment".into())),
        SolveStatus::Unbounded => Err(CliError::Limit("model is unbounded".into())),
    }
}

pub fn cmd_export_mps(args: &ModelArgs, out: Option<&Path>) -> Result<(), CliError> {
    let built = build(args)?;
    write_output(out, &export_mps(&built.model))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateDocument {
    pub schema: String,
    pub airport: String,
    pub seed: u64,
    pub sample_size: usize,
    pub ground_cost: f64,
    pub mean: f64,
    pub std_dev: f64,
    /// Exact expectation under the evaluation distribution.
    pub expected_cost: f64,
    pub samples: Vec<u32>,
    pub per_sample_costs: Vec<f64>,
}

pub fn cmd_evaluate(args: &EvaluateArgs, seed: u64, out: Option<&Path>) -> Result<(), CliError> {
    if args.samples == 0 {
        return Err(CliError::Usage("--samples must be positive".into()));
    }
    let instance = ingest::load_bundle(&args.instance)?;
    let doc: SolveDocument = serde_json::from_str(&read_text(&args.policy)?)
        .map_err(|e| CliError::Usage(format!("{}: {e}", args.policy.display())))?;
    if doc.schema != SOLVE_SCHEMA {
        return Err(CliError::Usage(format!("unsupported result schema {}", doc.schema)));
    }
    let airport = pick_airport(&instance, args.airport.as_deref().or(doc.airport.as_deref()))?;
    let schedule = instance.schedule.restrict_to_airport(&airport);
    let assignments = doc
        .assignments
        .into_iter()
        .filter(|(f, _)| schedule.flight(f).is_some())
        .collect();
    let policy =
        GroundHoldingPolicy::from_assignments(&schedule, assignments).map_err(|e| CliError::Usage(e.to_string()))?;
    let eval_dist = args.eval.resolve(&instance.empirical(&airport)?)?;
    let samples = sample_capacities(&eval_dist, args.samples, seed);
    let eval = evaluate_policy(&policy, &schedule, &samples).map_err(|e| CliError::Usage(e.to_string()))?;
    let exact = expected_cost(&policy, &schedule, &eval_dist).map_err(|e| CliError::Usage(e.to_string()))?;
    let doc = EvaluateDocument {
        schema: EVALUATE_SCHEMA.into(),
        airport,
        seed,
        sample_size: eval.sample_size,
        ground_cost: policy.ground_cost,
        mean: eval.mean,
        std_dev: eval.std_dev,
        expected_cost: exact,
        samples,
        per_sample_costs: eval.per_sample_costs,
    };
    write_output(
        out,
        &(serde_json::to_string_pretty(&doc).expect("document serializes") + "\n"),
    )
}

pub fn cmd_sweep(args: &SweepArgs, seed: u64, jobs: usize, out: &Path) -> Result<(), CliError> {
    if args.omega.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
        return Err(CliError::Usage("--omega radii must be finite and nonnegative".into()));
    }
    let instance = ingest::load_bundle(&args.instance)?;
    let airport = pick_airport(&instance, args.airport.as_deref())?;
    let schedule = instance.schedule.restrict_to_airport(&airport);
    let empirical = instance.empirical(&airport)?;
    let eval_dist = args.eval.resolve(&empirical)?;
    let config = SweepConfig {
        omega: args.omega.clone(),
        sample_sizes: args.sample_sizes.clone(),
        seed,
        grid: args.grid.as_deref().map(ingest::parse_grid).transpose()?,
        solver: args.solver.options()?,
        build: args.build.options(),
        jobs: jobs.max(1),
    };
    let result =
        epsilon_sweep(&schedule, &empirical, &eval_dist, &config).map_err(|e| CliError::Usage(e.to_string()))?;
    std::fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    write_output(Some(&out.join(SWEEP_FILE)), &sweep_table(&result))?;
    write_output(Some(&out.join(SAMPLES_FILE)), &samples_table(&result))?;
    let failed = result.solves.iter().filter(|s| s.policy.is_none()).count();
    eprintln!(
        "wrote {} rows to {}{}",
        result.rows.len(),
        out.display(),
        if failed > 0 {
            format!(" ({failed} models without a policy)")
        } else {
            String::new()
        }
    );
    Ok(())
}

/// Shortest round-trip decimal, with `-0` printed as `0`.
fn num(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else {
        format!("{v}")
    }
}

fn opt<T>(v: Option<T>, f: impl Fn(T) -> String) -> String {
    v.map_or_else(|| "NA".into(), f)
}

fn status_label(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Optimal => "optimal",
        SolveStatus::Infeasible => "infeasible",
        SolveStatus::NodeLimit => "node-limit",
        SolveStatus::Unbounded => "unbounded",
    }
}

/// One row per (model, radius, sample size), tab separated.
pub fn sweep_table(result: &SweepResult) -> String {
    let mut out = format!("# {SWEEP_SCHEMA}\n");
    out.push_str(
        "model\tepsilon\tsample_size\tstatus\tobjective\tmean\tstd_dev\texpected_cost\tground_cost\ttotal_delay\tnote\n",
    );
    let notes: BTreeMap<String, &str> = result
        .solves
        .iter()
        .filter_map(|s| s.note.as_deref().map(|n| (format!("{:?}", s.model), n)))
        .collect();
    for r in &result.rows {
        let note = notes
            .get(&format!("{:?}", r.model))
            .map_or("", |n| n)
            .replace(['\t', '\n'], " ");
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.model.label(),
            opt(r.model.epsilon(), num),
            r.sample_size,
            status_label(r.status),
            opt(r.objective, num),
            opt(r.evaluation.as_ref().map(|e| e.mean), num),
            opt(r.evaluation.as_ref().map(|e| e.std_dev), num),
            opt(r.expected_cost, num),
            opt(r.ground_cost, num),
            opt(r.total_delay, |d| d.to_string()),
            if note.is_empty() { "-".to_string() } else { note },
        );
    }
    out
}

/// Per-sample capacities and costs for every evaluated row.
pub fn samples_table(result: &SweepResult) -> String {
    let mut out = format!("# {SAMPLES_SCHEMA}\n");
    out.push_str("model\tepsilon\tsample_size\tsample\tcapacity\tcost\n");
    for r in &result.rows {
        let Some(eval) = &r.evaluation else { continue };
        let eps = opt(r.model.epsilon(), num);
        for (i, (cap, cost)) in result.samples[&r.sample_size]
            .iter()
            .zip(&eval.per_sample_costs)
            .enumerate()
        {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                r.model.label(),
                eps,
                r.sample_size,
                i + 1,
                cap,
                num(*cost)
            );
        }
    }
    out
}
