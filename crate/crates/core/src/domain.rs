//! Problem-instance types shared by every model builder.
//!
//! Time is a discrete slot index `1..=T`. Capacities are nonnegative integers
//! (flights allowed to land per slot). Everything here is immutable once
//! constructed through the checked constructors.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance used when checking that probabilities sum to one.
pub const PROBABILITY_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("horizon must contain at least one slot")]
    EmptyHorizon,
    #[error("capacity distribution: {0}")]
    Distribution(String),
    #[error("support grid: {0}")]
    Grid(String),
    #[error("ambiguity set: {0}")]
    Ambiguity(String),
    #[error("network: {0}")]
    Network(String),
    #[error("invalid schedule: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidSchedule(Vec<Violation>),
}

/// Planning horizon `T`; slots are numbered `1..=num_slots`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeHorizon {
    num_slots: u32,
}

impl TimeHorizon {
    pub fn new(num_slots: u32) -> Result<Self, DomainError> {
        if num_slots == 0 {
            return Err(DomainError::EmptyHorizon);
        }
        Ok(Self { num_slots })
    }

    pub fn num_slots(&self) -> u32 {
        self.num_slots
    }

    pub fn slots(&self) -> impl Iterator<Item = u32> {
        1..=self.num_slots
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flight {
    pub id: String,
    pub airport: String,
    /// Scheduled arrival slot `r_f`.
    pub scheduled_arrival: u32,
    /// Ground holding cost per slot of delay.
    pub ground_cost: f64,
}

impl Flight {
    pub fn new(id: impl Into<String>, airport: impl Into<String>, scheduled_arrival: u32, ground_cost: f64) -> Self {
        Self {
            id: id.into(),
            airport: airport.into(),
            scheduled_arrival,
            ground_cost,
        }
    }

    /// Admissible arrival slots `r_f..=T`.
    pub fn window(&self, horizon: TimeHorizon) -> std::ops::RangeInclusive<u32> {
        self.scheduled_arrival..=horizon.num_slots()
    }
}

/// A connecting pair: delaying `predecessor` by more than `slack` slots
/// forces the same excess delay on `successor`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConnectionPair {
    pub predecessor: String,
    pub successor: String,
    pub slack: u32,
}

impl ConnectionPair {
    pub fn new(predecessor: impl Into<String>, successor: impl Into<String>, slack: u32) -> Self {
        Self {
            predecessor: predecessor.into(),
            successor: successor.into(),
            slack,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationCode {
    DuplicateId,
    InvalidId,
    SlotOutOfRange,
    DanglingConnection,
    SelfConnection,
    NegativeCost,
}

impl ViolationCode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ViolationCode::DuplicateId => "duplicate-id",
            ViolationCode::InvalidId => "invalid-id",
            ViolationCode::SlotOutOfRange => "slot-out-of-range",
            ViolationCode::DanglingConnection => "dangling-connection",
            ViolationCode::SelfConnection => "self-connection",
            ViolationCode::NegativeCost => "negative-cost",
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.code, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightSchedule {
    pub horizon: TimeHorizon,
    pub flights: Vec<Flight>,
    pub connections: Vec<ConnectionPair>,
    /// Airborne holding cost per flight per slot.
    pub airborne_cost: f64,
}

impl FlightSchedule {
    /// Builds a schedule, rejecting it if [`validate_schedule`] reports anything.
    pub fn new(
        horizon: TimeHorizon,
        flights: Vec<Flight>,
        connections: Vec<ConnectionPair>,
        airborne_cost: f64,
    ) -> Result<Self, DomainError> {
        let schedule = Self {
            horizon,
            flights,
            connections,
            airborne_cost,
        };
        let violations = validate_schedule(&schedule);
        if violations.is_empty() {
            Ok(schedule)
        } else {
            Err(DomainError::InvalidSchedule(violations))
        }
    }

    pub fn flight(&self, id: &str) -> Option<&Flight> {
        self.flights.iter().find(|f| f.id == id)
    }

    pub fn flight_index(&self, id: &str) -> Option<usize> {
        self.flights.iter().position(|f| f.id == id)
    }

    /// Distinct airports in order of first appearance.
    pub fn airports(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.flights
            .iter()
            .filter(|f| seen.insert(f.airport.as_str()))
            .map(|f| f.airport.clone())
            .collect()
    }

    /// Sub-schedule of the flights landing at `airport`, keeping only the
    /// connections with both ends at that airport.
    pub fn restrict_to_airport(&self, airport: &str) -> FlightSchedule {
        let flights: Vec<Flight> = self.flights.iter().filter(|f| f.airport == airport).cloned().collect();
        let ids: HashSet<&str> = flights.iter().map(|f| f.id.as_str()).collect();
        let connections = self
            .connections
            .iter()
            .filter(|c| ids.contains(c.predecessor.as_str()) && ids.contains(c.successor.as_str()))
            .cloned()
            .collect();
        FlightSchedule {
            horizon: self.horizon,
            flights,
            connections,
            airborne_cost: self.airborne_cost,
        }
    }

    /// Number of joint first-stage assignments, `prod_f |T_f|`, saturating.
    pub fn assignment_count(&self) -> u128 {
        self.flights.iter().fold(1u128, |acc, f| {
            let width = self.horizon.num_slots().saturating_sub(f.scheduled_arrival) as u128 + 1;
            acc.saturating_mul(width)
        })
    }
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && !id
            .chars()
            .any(|c| c.is_whitespace() || matches!(c, ',' | '[' | ']' | '"'))
}

/// Reports every invariant violation in `schedule`. Never fails.
pub fn validate_schedule(schedule: &FlightSchedule) -> Vec<Violation> {
    let mut out = Vec::new();
    let t_max = schedule.horizon.num_slots();
    let mut seen = HashSet::new();
    for (row, f) in schedule.flights.iter().enumerate() {
        if !valid_id(&f.id) {
            out.push(Violation {
                code: ViolationCode::InvalidId,
                message: format!("flight #{row} has unusable id {:?}", f.id),
            });
        }
        if !valid_id(&f.airport) {
            out.push(Violation {
                code: ViolationCode::InvalidId,
                message: format!("flight {} has unusable airport id {:?}", f.id, f.airport),
            });
        }
        if !seen.insert(f.id.as_str()) {
            out.push(Violation {
                code: ViolationCode::DuplicateId,
                message: format!("flight id {} appears more than once", f.id),
            });
        }
        if f.scheduled_arrival < 1 || f.scheduled_arrival > t_max {
            out.push(Violation {
                code: ViolationCode::SlotOutOfRange,
                message: format!(
                    "flight {} scheduled at slot {} outside 1..={t_max}",
                    f.id, f.scheduled_arrival
                ),
            });
        }
        if !(f.ground_cost >= 0.0 && f.ground_cost.is_finite()) {
            out.push(Violation {
                code: ViolationCode::NegativeCost,
                message: format!("flight {} has ground cost {}", f.id, f.ground_cost),
            });
        }
    }
    if !(schedule.airborne_cost >= 0.0 && schedule.airborne_cost.is_finite()) {
        out.push(Violation {
            code: ViolationCode::NegativeCost,
            message: format!("airborne cost {}", schedule.airborne_cost),
        });
    }
    for c in &schedule.connections {
        for id in [&c.predecessor, &c.successor] {
            if !seen.contains(id.as_str()) {
                out.push(Violation {
                    code: ViolationCode::DanglingConnection,
                    message: format!(
                        "connection {}->{} references unknown flight {id}",
                        c.predecessor, c.successor
                    ),
                });
            }
        }
        if c.predecessor == c.successor {
            out.push(Violation {
                code: ViolationCode::SelfConnection,
                message: format!("flight {} connects to itself", c.predecessor),
            });
        }
    }
    out
}

/// Finite-support capacity distribution (the empirical distribution).
/// Atoms are kept sorted by capacity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution", into = "RawDistribution")]
pub struct CapacityDistribution {
    support: Vec<u32>,
    probabilities: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawDistribution {
    support: Vec<u32>,
    probabilities: Vec<f64>,
}

impl TryFrom<RawDistribution> for CapacityDistribution {
    type Error = DomainError;
    fn try_from(raw: RawDistribution) -> Result<Self, Self::Error> {
        CapacityDistribution::new(raw.support, raw.probabilities)
    }
}

impl From<CapacityDistribution> for RawDistribution {
    fn from(d: CapacityDistribution) -> Self {
        RawDistribution {
            support: d.support,
            probabilities: d.probabilities,
        }
    }
}

impl CapacityDistribution {
    pub fn new(support: Vec<u32>, probabilities: Vec<f64>) -> Result<Self, DomainError> {
        if support.is_empty() {
            return Err(DomainError::Distribution("empty support".into()));
        }
        if support.len() != probabilities.len() {
            return Err(DomainError::Distribution(format!(
                "{} support points but {} probabilities",
                support.len(),
                probabilities.len()
            )));
        }
        if let Some(p) = probabilities.iter().find(|p| !(**p > 0.0 && p.is_finite())) {
            return Err(DomainError::Distribution(format!("probability {p} is not positive")));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > PROBABILITY_SUM_TOL {
            return Err(DomainError::Distribution(format!("probabilities sum to {total}")));
        }
        let mut atoms: Vec<(u32, f64)> = support.into_iter().zip(probabilities).collect();
        atoms.sort_by_key(|a| a.0);
        if atoms.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(DomainError::Distribution("support points are not distinct".into()));
        }
        let (support, probabilities) = atoms.into_iter().unzip();
        Ok(Self { support, probabilities })
    }

    /// Point mass at `capacity`.
    pub fn degenerate(capacity: u32) -> Self {
        Self {
            support: vec![capacity],
            probabilities: vec![1.0],
        }
    }

    pub fn support(&self) -> &[u32] {
        &self.support
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn atoms(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.support.iter().copied().zip(self.probabilities.iter().copied())
    }

    pub fn mean(&self) -> f64 {
        self.atoms().map(|(v, p)| v as f64 * p).sum()
    }

    pub fn min(&self) -> u32 {
        self.support[0]
    }

    pub fn max(&self) -> u32 {
        *self.support.last().unwrap()
    }
}

/// Discretized capacity support: strictly increasing nonnegative values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct SupportGrid {
    values: Vec<u32>,
}

impl TryFrom<Vec<u32>> for SupportGrid {
    type Error = DomainError;
    fn try_from(values: Vec<u32>) -> Result<Self, Self::Error> {
        SupportGrid::new(values)
    }
}

impl From<SupportGrid> for Vec<u32> {
    fn from(g: SupportGrid) -> Self {
        g.values
    }
}

impl SupportGrid {
    pub fn new(values: Vec<u32>) -> Result<Self, DomainError> {
        if values.is_empty() {
            return Err(DomainError::Grid("empty grid".into()));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(DomainError::Grid("values must be strictly increasing".into()));
        }
        Ok(Self { values })
    }

    /// Every integer in `lo..=hi`.
    pub fn range(lo: u32, hi: u32) -> Result<Self, DomainError> {
        if lo > hi {
            return Err(DomainError::Grid(format!("empty range {lo}..={hi}")));
        }
        Ok(Self {
            values: (lo..=hi).collect(),
        })
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn contains(&self, v: u32) -> bool {
        self.values.binary_search(&v).is_ok()
    }

    pub fn is_subset_of(&self, other: &SupportGrid) -> bool {
        self.values.iter().all(|v| other.contains(*v))
    }

    /// Union with another set of values.
    pub fn union(&self, extra: impl IntoIterator<Item = u32>) -> SupportGrid {
        let set: BTreeSet<u32> = self.values.iter().copied().chain(extra).collect();
        SupportGrid {
            values: set.into_iter().collect(),
        }
    }
}

/// Unit-step grid from the smallest to the largest empirical capacity.
pub fn default_support_grid(dist: &CapacityDistribution) -> SupportGrid {
    SupportGrid {
        values: (dist.min()..=dist.max()).collect(),
    }
}

/// Empirical distribution, Wasserstein radius and discretized support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbiguitySpec {
    empirical: CapacityDistribution,
    radius: f64,
    grid: SupportGrid,
}

impl AmbiguitySpec {
    pub fn new(empirical: CapacityDistribution, radius: f64, grid: SupportGrid) -> Result<Self, DomainError> {
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(DomainError::Ambiguity(format!(
                "radius {radius} must be finite and nonnegative"
            )));
        }
        if let Some(v) = empirical.support().iter().find(|v| !grid.contains(**v)) {
            return Err(DomainError::Ambiguity(format!(
                "empirical support point {v} is not on the grid"
            )));
        }
        Ok(Self {
            empirical,
            radius,
            grid,
        })
    }

    /// Ambiguity set over [`default_support_grid`].
    pub fn with_default_grid(empirical: CapacityDistribution, radius: f64) -> Result<Self, DomainError> {
        let grid = default_support_grid(&empirical);
        Self::new(empirical, radius, grid)
    }

    pub fn empirical(&self) -> &CapacityDistribution {
        &self.empirical
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn grid(&self) -> &SupportGrid {
        &self.grid
    }

    pub fn with_radius(&self, radius: f64) -> Result<Self, DomainError> {
        Self::new(self.empirical.clone(), radius, self.grid.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkInstance {
    airports: Vec<String>,
    schedule: FlightSchedule,
    ambiguities: BTreeMap<String, AmbiguitySpec>,
}

impl NetworkInstance {
    pub fn new(
        airports: Vec<String>,
        schedule: FlightSchedule,
        ambiguities: BTreeMap<String, AmbiguitySpec>,
    ) -> Result<Self, DomainError> {
        let known: HashSet<&str> = airports.iter().map(String::as_str).collect();
        if known.len() != airports.len() {
            return Err(DomainError::Network("duplicate airport id".into()));
        }
        if let Some(f) = schedule.flights.iter().find(|f| !known.contains(f.airport.as_str())) {
            return Err(DomainError::Network(format!(
                "flight {} lands at unknown airport {}",
                f.id, f.airport
            )));
        }
        if let Some(z) = airports.iter().find(|z| !ambiguities.contains_key(*z)) {
            return Err(DomainError::Network(format!("airport {z} has no ambiguity set")));
        }
        Ok(Self {
            airports,
            schedule,
            ambiguities,
        })
    }

    pub fn airports(&self) -> &[String] {
        &self.airports
    }

    pub fn schedule(&self) -> &FlightSchedule {
        &self.schedule
    }

    pub fn ambiguity(&self, airport: &str) -> Option<&AmbiguitySpec> {
        self.ambiguities.get(airport)
    }

    pub fn ambiguities(&self) -> &BTreeMap<String, AmbiguitySpec> {
        &self.ambiguities
    }

    /// Copy of the instance with every airport's radius set to `radius`.
    pub fn with_shared_radius(&self, radius: f64) -> Result<Self, DomainError> {
        let ambiguities = self
            .ambiguities
            .iter()
            .map(|(z, a)| Ok((z.clone(), a.with_radius(radius)?)))
            .collect::<Result<_, DomainError>>()?;
        Ok(Self {
            airports: self.airports.clone(),
            schedule: self.schedule.clone(),
            ambiguities,
        })
    }
}
