//! Ground holding optimization under capacity uncertainty.
//!
//! Builds and solves deterministic, two-stage stochastic and Wasserstein
//! distributionally robust ground holding models for single airports and
//! airport networks, using a self-contained simplex / branch-and-bound
//! engine. The [`wasserstein`] module recovers worst-case capacity
//! distributions so that robust solutions can be checked against their dual
//! certificates, and [`evaluate`] scores policies out of sample.

pub mod domain;
pub mod evaluate;
pub mod ingest;
pub mod milp;
pub mod models;
pub mod solver;
pub mod wasserstein;

pub use domain::{
    default_support_grid, validate_schedule, AmbiguitySpec, CapacityDistribution, ConnectionPair, Flight,
    FlightSchedule, NetworkInstance, SupportGrid, TimeHorizon,
};
pub use milp::{export_mps, MilpModel};
pub use models::{
    build_d_saghp, build_dr_maghp, build_dr_saghp, build_s_saghp, extract_policy, BuildOptions, GroundHoldingPolicy,
};
pub use solver::{enumerate_small, solve_lp, solve_milp, Solution, SolveStatus, SolverOptions};
pub use wasserstein::{wasserstein_distance, worst_case_distribution, DiscreteDistribution, TransportPlan};
