//! Instance I/O: schedule, connection and capacity-history CSV files, the
//! instance parameter file, empirical distributions and a synthetic
//! instance generator.
//!
//! File layouts (headers required, in this order):
//!
//! * `schedule.csv`: `flight_id,airport,scheduled_arrival_slot,ground_cost`
//! * `connections.csv`: `pred_id,succ_id,slack_slots`
//! * `capacity.csv`: `slot,airport,throughput`
//! * distribution files: `capacity,probability`
//! * `params.toml`: `schema`, `horizon`, `airborne_cost`, `slot_minutes`
//!
//! Observed throughput stands in for capacity. In slack periods this
//! underestimates the true acceptance rate.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    AmbiguitySpec, CapacityDistribution, ConnectionPair, DomainError, Flight, FlightSchedule, NetworkInstance,
    SupportGrid, TimeHorizon,
};

pub const SCHEDULE_FILE: &str = "schedule.csv";
pub const CONNECTIONS_FILE: &str = "connections.csv";
pub const CAPACITY_FILE: &str = "capacity.csv";
pub const PARAMS_FILE: &str = "params.toml";
pub const INSTANCE_SCHEMA: &str = "groundhold-instance/1";

const SCHEDULE_HEADER: [&str; 4] = ["flight_id", "airport", "scheduled_arrival_slot", "ground_cost"];
const CONNECTIONS_HEADER: [&str; 3] = ["pred_id", "succ_id", "slack_slots"];
const CAPACITY_HEADER: [&str; 3] = ["slot", "airport", "throughput"];
const DISTRIBUTION_HEADER: [&str; 2] = ["capacity", "probability"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{file}: header must be `{expected}`, found `{found}`")]
    Header {
        file: String,
        expected: String,
        found: String,
    },
    #[error("{file} line {line}: missing value for column `{column}`")]
    MissingColumn { file: String, line: u64, column: String },
    #[error("{file} line {line}: column `{column}`: {message}")]
    Malformed {
        file: String,
        line: u64,
        column: String,
        message: String,
    },
    #[error("{file} line {line} (row {row}): {message}")]
    InvalidRow {
        file: String,
        line: u64,
        row: usize,
        message: String,
    },
    #[error("no capacity records for airport {0}")]
    NoRecords(String),
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: {source}")]
    Csv {
        file: String,
        #[source]
        source: csv::Error,
    },
}

/// One observed per-slot throughput, used as a capacity proxy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapacityHistoryRecord {
    /// Slot index or timestamp (`HH:MM`, `YYYY-MM-DDTHH:MM`, `YYYY-MM-DD HH:MM`).
    pub slot_label: String,
    pub airport: String,
    pub throughput: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceParams {
    #[serde(default = "default_schema")]
    pub schema: String,
    pub horizon: u32,
    pub airborne_cost: f64,
    /// Width of a slot when capacity history carries timestamps.
    #[serde(default = "default_slot_minutes")]
    pub slot_minutes: u32,
}

fn default_schema() -> String {
    INSTANCE_SCHEMA.to_string()
}

fn default_slot_minutes() -> u32 {
    15
}

impl InstanceParams {
    pub fn new(horizon: u32, airborne_cost: f64) -> Self {
        Self {
            schema: default_schema(),
            horizon,
            airborne_cost,
            slot_minutes: default_slot_minutes(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, IngestError> {
        let p: InstanceParams = toml::from_str(text).map_err(|e| IngestError::Params(e.to_string()))?;
        if p.schema != INSTANCE_SCHEMA {
            return Err(IngestError::Params(format!("unsupported schema {}", p.schema)));
        }
        if p.slot_minutes == 0 {
            return Err(IngestError::Params("slot_minutes must be positive".into()));
        }
        Ok(p)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("params serialize")
    }
}

struct Rows<'a> {
    file: &'a str,
    reader: csv::Reader<&'a [u8]>,
    columns: &'a [&'a str],
}

impl<'a> Rows<'a> {
    fn open(file: &'a str, text: &'a str, columns: &'a [&'a str]) -> Result<Self, IngestError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .flexible(true)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let header = reader
            .headers()
            .map_err(|source| IngestError::Csv {
                file: file.to_string(),
                source,
            })?
            .clone();
        let found: Vec<&str> = header.iter().collect();
        if found != columns {
            return Err(IngestError::Header {
                file: file.to_string(),
                expected: columns.join(","),
                found: found.join(","),
            });
        }
        Ok(Self { file, reader, columns })
    }

    /// Calls `f` with each record, its line number and row index.
    fn for_each(
        mut self,
        mut f: impl FnMut(&Fields<'_>, u64, usize) -> Result<(), IngestError>,
    ) -> Result<(), IngestError> {
        for (row, rec) in self.reader.records().enumerate() {
            let rec = rec.map_err(|source| IngestError::Csv {
                file: self.file.to_string(),
                source,
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            let fields = Fields {
                file: self.file,
                line,
                rec: &rec,
                columns: self.columns,
            };
            f(&fields, line, row)?;
        }
        Ok(())
    }
}

struct Fields<'a> {
    file: &'a str,
    line: u64,
    rec: &'a csv::StringRecord,
    columns: &'a [&'a str],
}

impl Fields<'_> {
    fn text(&self, i: usize) -> Result<&str, IngestError> {
        match self.rec.get(i) {
            Some(v) if !v.is_empty() => Ok(v),
            _ => Err(IngestError::MissingColumn {
                file: self.file.to_string(),
                line: self.line,
                column: self.columns[i].to_string(),
            }),
        }
    }

    fn parse<T: std::str::FromStr>(&self, i: usize) -> Result<T, IngestError>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.text(i)?;
        raw.parse().map_err(|e: T::Err| IngestError::Malformed {
            file: self.file.to_string(),
            line: self.line,
            column: self.columns[i].to_string(),
            message: format!("{raw:?}: {e}"),
        })
    }
}

/// Parses the schedule and (optional) connections files into a validated schedule.
pub fn parse_schedule(
    schedule_csv: &str,
    connections_csv: Option<&str>,
    horizon: u32,
    airborne_cost: f64,
) -> Result<FlightSchedule, IngestError> {
    let horizon = TimeHorizon::new(horizon)?;
    let mut flights = Vec::new();
    Rows::open(SCHEDULE_FILE, schedule_csv, &SCHEDULE_HEADER)?.for_each(|f, line, row| {
        let flight = Flight::new(f.text(0)?, f.text(1)?, f.parse(2)?, f.parse(3)?);
        let problem = if !(flight.ground_cost >= 0.0 && flight.ground_cost.is_finite()) {
            Some(format!("[negative-cost] ground_cost {}", flight.ground_cost))
        } else if flight.scheduled_arrival < 1 || flight.scheduled_arrival > horizon.num_slots() {
            Some(format!(
                "[slot-out-of-range] slot {} outside 1..={}",
                flight.scheduled_arrival,
                horizon.num_slots()
            ))
        } else {
            None
        };
        if let Some(message) = problem {
            return Err(IngestError::InvalidRow {
                file: SCHEDULE_FILE.into(),
                line,
                row,
                message,
            });
        }
        flights.push(flight);
        Ok(())
    })?;
    let mut connections = Vec::new();
    if let Some(text) = connections_csv {
        Rows::open(CONNECTIONS_FILE, text, &CONNECTIONS_HEADER)?.for_each(|f, _, _| {
            connections.push(ConnectionPair::new(f.text(0)?, f.text(1)?, f.parse(2)?));
            Ok(())
        })?;
    }
    Ok(FlightSchedule::new(horizon, flights, connections, airborne_cost)?)
}

/// Writes `(schedule.csv, connections.csv)` contents.
pub fn write_schedule(schedule: &FlightSchedule) -> (String, String) {
    let mut flights = SCHEDULE_HEADER.join(",") + "\n";
    for f in &schedule.flights {
        let _ = writeln!(
            flights,
            "{},{},{},{}",
            f.id, f.airport, f.scheduled_arrival, f.ground_cost
        );
    }
    let mut connections = CONNECTIONS_HEADER.join(",") + "\n";
    for c in &schedule.connections {
        let _ = writeln!(connections, "{},{},{}", c.predecessor, c.successor, c.slack);
    }
    (flights, connections)
}

pub fn parse_capacity_history(text: &str) -> Result<Vec<CapacityHistoryRecord>, IngestError> {
    let mut out = Vec::new();
    Rows::open(CAPACITY_FILE, text, &CAPACITY_HEADER)?.for_each(|f, _, _| {
        out.push(CapacityHistoryRecord {
            slot_label: f.text(0)?.to_string(),
            airport: f.text(1)?.to_string(),
            throughput: f.parse(2)?,
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn write_capacity_history(records: &[CapacityHistoryRecord]) -> String {
    let mut out = CAPACITY_HEADER.join(",") + "\n";
    for r in records {
        let _ = writeln!(out, "{},{},{}", r.slot_label, r.airport, r.throughput);
    }
    out
}

/// Splits a timestamp label into `(day, minutes since midnight)`.
fn parse_timestamp(label: &str) -> Option<(&str, u32)> {
    let (day, clock) = match label.split_once(['T', ' ']) {
        Some((d, c)) => (d, c),
        None => ("", label),
    };
    let mut parts = clock.split(':');
    let h: u32 = parts.next()?.parse().ok()?;
    let m: u32 = parts.next()?.parse().ok()?;
    (h < 24 && m < 60).then_some((day, h * 60 + m))
}

/// Aggregates throughput into slots of `slot_minutes`. Integer slot labels
/// pass through unchanged; timestamp labels are summed per
/// `(airport, day, slot)` and relabelled `day#slot` (or `#slot`).
pub fn bin_history(
    records: &[CapacityHistoryRecord],
    slot_minutes: u32,
) -> Result<Vec<CapacityHistoryRecord>, IngestError> {
    if slot_minutes == 0 {
        return Err(IngestError::Params("slot_minutes must be positive".into()));
    }
    let mut passthrough = Vec::new();
    let mut bins: BTreeMap<(String, String, u32), u32> = BTreeMap::new();
    for r in records {
        if r.slot_label.parse::<u64>().is_ok() {
            passthrough.push(r.clone());
            continue;
        }
        let (day, minutes) = parse_timestamp(&r.slot_label)
            .ok_or_else(|| IngestError::Params(format!("unrecognized slot label {:?}", r.slot_label)))?;
        *bins
            .entry((r.airport.clone(), day.to_string(), minutes / slot_minutes))
            .or_default() += r.throughput;
    }
    passthrough.extend(
        bins.into_iter()
            .map(|((airport, day, slot), throughput)| CapacityHistoryRecord {
                slot_label: format!("{day}#{slot}"),
                airport,
                throughput,
            }),
    );
    Ok(passthrough)
}

/// Empirical capacity distribution of `airport`: distinct throughputs with
/// their relative frequencies.
pub fn empirical_distribution(
    records: &[CapacityHistoryRecord],
    airport: &str,
) -> Result<CapacityDistribution, IngestError> {
    let mut counts: BTreeMap<u32, u64> = BTreeMap::new();
    for r in records.iter().filter(|r| r.airport == airport) {
        *counts.entry(r.throughput).or_default() += 1;
    }
    let total: u64 = counts.values().sum();
    if total == 0 {
        return Err(IngestError::NoRecords(airport.to_string()));
    }
    Ok(CapacityDistribution::new(
        counts.keys().copied().collect(),
        counts.values().map(|c| *c as f64 / total as f64).collect(),
    )?)
}

pub fn parse_distribution(text: &str) -> Result<CapacityDistribution, IngestError> {
    let mut support = Vec::new();
    let mut probs = Vec::new();
    Rows::open("distribution", text, &DISTRIBUTION_HEADER)?.for_each(|f, _, _| {
        support.push(f.parse(0)?);
        probs.push(f.parse(1)?);
        Ok(())
    })?;
    Ok(CapacityDistribution::new(support, probs)?)
}

pub fn write_distribution(dist: &CapacityDistribution) -> String {
    let mut out = DISTRIBUTION_HEADER.join(",") + "\n";
    for (k, p) in dist.atoms() {
        let _ = writeln!(out, "{k},{p}");
    }
    out
}

/// A schedule with its parameters and capacity history.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub params: InstanceParams,
    pub schedule: FlightSchedule,
    pub history: Vec<CapacityHistoryRecord>,
}

impl Instance {
    /// Capacity history binned to the instance slot width.
    pub fn binned_history(&self) -> Result<Vec<CapacityHistoryRecord>, IngestError> {
        bin_history(&self.history, self.params.slot_minutes)
    }

    pub fn empirical(&self, airport: &str) -> Result<CapacityDistribution, IngestError> {
        empirical_distribution(&self.binned_history()?, airport)
    }

    /// The single airport of the instance, or an error naming all of them.
    pub fn sole_airport(&self) -> Result<String, IngestError> {
        match self.schedule.airports().as_slice() {
            [z] => Ok(z.clone()),
            many => Err(IngestError::Params(format!(
                "instance has {} airports ({}); choose one",
                many.len(),
                many.join(",")
            ))),
        }
    }

    /// Network instance with one ambiguity set per airport over its default
    /// grid, all with `radius`.
    pub fn network(&self, radius: f64) -> Result<NetworkInstance, IngestError> {
        let airports = self.schedule.airports();
        let history = self.binned_history()?;
        let mut ambiguities = BTreeMap::new();
        for z in &airports {
            let emp = empirical_distribution(&history, z)?;
            ambiguities.insert(z.clone(), AmbiguitySpec::with_default_grid(emp, radius)?);
        }
        Ok(NetworkInstance::new(airports, self.schedule.clone(), ambiguities)?)
    }
}

fn read(path: &Path) -> Result<String, IngestError> {
    std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), IngestError> {
    std::fs::write(path, text).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads an instance bundle directory. `connections.csv` is optional.
pub fn load_bundle(dir: &Path) -> Result<Instance, IngestError> {
    let params = InstanceParams::parse(&read(&dir.join(PARAMS_FILE))?)?;
    let connections_path = dir.join(CONNECTIONS_FILE);
    let connections = if connections_path.exists() {
        Some(read(&connections_path)?)
    } else {
        None
    };
    let schedule = parse_schedule(
        &read(&dir.join(SCHEDULE_FILE))?,
        connections.as_deref(),
        params.horizon,
        params.airborne_cost,
    )?;
    let history = parse_capacity_history(&read(&dir.join(CAPACITY_FILE))?)?;
    Ok(Instance {
        params,
        schedule,
        history,
    })
}

pub fn write_bundle(dir: &Path, instance: &Instance) -> Result<(), IngestError> {
    std::fs::create_dir_all(dir).map_err(|source| IngestError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let (flights, connections) = write_schedule(&instance.schedule);
    write(&dir.join(PARAMS_FILE), &instance.params.to_toml())?;
    write(&dir.join(SCHEDULE_FILE), &flights)?;
    write(&dir.join(CONNECTIONS_FILE), &connections)?;
    write(&dir.join(CAPACITY_FILE), &write_capacity_history(&instance.history))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub flights: usize,
    pub horizon: u32,
    pub airports: usize,
    /// Integer ground costs drawn uniformly from this inclusive range.
    pub ground_cost: (u32, u32),
    pub airborne_cost: f64,
    /// Per-slot throughput observations drawn uniformly from this inclusive range.
    pub capacity: (u32, u32),
    /// Probability that consecutive flights form a connection.
    pub connection_density: f64,
    /// Throughput observations per airport.
    pub history_len: usize,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            flights: 8,
            horizon: 6,
            airports: 1,
            ground_cost: (1, 3),
            airborne_cost: 5.0,
            capacity: (1, 3),
            connection_density: 0.2,
            history_len: 24,
            seed: 0,
        }
    }
}

impl SynthParams {
    pub fn check(&self) -> Result<(), IngestError> {
        let err = |m: String| Err(IngestError::Params(m));
        if self.flights == 0 || self.flights > 10_000 {
            return err(format!("flights {} outside 1..=10000", self.flights));
        }
        if self.horizon == 0 || self.horizon > 1_000 {
            return err(format!("horizon {} outside 1..=1000", self.horizon));
        }
        if self.airports == 0 || self.airports > self.flights {
            return err(format!("airports {} outside 1..=flights", self.airports));
        }
        if self.ground_cost.0 > self.ground_cost.1 {
            return err("ground cost range is empty".into());
        }
        if !(self.airborne_cost >= 0.0 && self.airborne_cost.is_finite()) {
            return err("airborne cost must be finite and nonnegative".into());
        }
        if self.capacity.0 > self.capacity.1 || self.capacity.1 == 0 {
            return err("capacity range must be nonempty with a positive maximum".into());
        }
        if !(0.0..=1.0).contains(&self.connection_density) {
            return err("connection density must lie in [0, 1]".into());
        }
        if self.history_len == 0 {
            return err("history length must be positive".into());
        }
        let per_airport = self.flights.div_ceil(self.airports) as u64;
        if per_airport > self.horizon as u64 * self.capacity.1 as u64 {
            return err(format!(
                "{per_airport} flights per airport exceed horizon x max capacity = {}",
                self.horizon as u64 * self.capacity.1 as u64
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthInstance {
    pub instance: Instance,
    pub distributions: BTreeMap<String, CapacityDistribution>,
}

/// Deterministic synthetic instance for `params.seed`.
///
/// Each airport's history always contains the maximum capacity, and no slot
/// is scheduled above it, so landing every flight on time is feasible under
/// the maximum support capacity.
pub fn synth_instance(params: &SynthParams) -> Result<SynthInstance, IngestError> {
    params.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let airports: Vec<String> = (1..=params.airports).map(|k| format!("AP{k}")).collect();

    let mut history = Vec::new();
    for z in &airports {
        for i in 0..params.history_len {
            let throughput = if i == 0 {
                params.capacity.1
            } else {
                rng.gen_range(params.capacity.0..=params.capacity.1)
            };
            history.push(CapacityHistoryRecord {
                slot_label: (i + 1).to_string(),
                airport: z.clone(),
                throughput,
            });
        }
    }

    let width = params.flights.to_string().len().max(3);
    let mut load: BTreeMap<(usize, u32), u32> = BTreeMap::new();
    let mut flights = Vec::with_capacity(params.flights);
    for i in 0..params.flights {
        let z = i % params.airports;
        let open: Vec<u32> = (1..=params.horizon)
            .filter(|t| load.get(&(z, *t)).copied().unwrap_or(0) < params.capacity.1)
            .collect();
        // u64, not usize: the draw must not depend on pointer width
        let slot = open[rng.gen_range(0..open.len() as u64) as usize];
        *load.entry((z, slot)).or_default() += 1;
        let cost = rng.gen_range(params.ground_cost.0..=params.ground_cost.1);
        flights.push(Flight::new(
            format!("F{:0width$}", i + 1),
            airports[z].clone(),
            slot,
            cost as f64,
        ));
    }

    let mut connections = Vec::new();
    let mut seen = HashSet::new();
    for w in flights.windows(2) {
        if rng.gen_bool(params.connection_density) && seen.insert((w[0].id.clone(), w[1].id.clone())) {
            connections.push(ConnectionPair::new(
                w[0].id.clone(),
                w[1].id.clone(),
                rng.gen_range(0..=2),
            ));
        }
    }

    let schedule = FlightSchedule::new(
        TimeHorizon::new(params.horizon)?,
        flights,
        connections,
        params.airborne_cost,
    )?;
    let distributions = airports
        .iter()
        .map(|z| Ok((z.clone(), empirical_distribution(&history, z)?)))
        .collect::<Result<_, IngestError>>()?;
    Ok(SynthInstance {
        instance: Instance {
            params: InstanceParams::new(params.horizon, params.airborne_cost),
            schedule,
            history,
        },
        distributions,
    })
}

/// Parses a support grid given as `lo..hi` (inclusive) or `a,b,c`.
pub fn parse_grid(spec: &str) -> Result<SupportGrid, IngestError> {
    let bad = |m: String| IngestError::Params(format!("grid {spec:?}: {m}"));
    if let Some((lo, hi)) = spec.split_once("..") {
        let lo = lo.trim().parse().map_err(|e| bad(format!("{e}")))?;
        let hi = hi
            .trim_start_matches('=')
            .trim()
            .parse()
            .map_err(|e| bad(format!("{e}")))?;
        return Ok(SupportGrid::range(lo, hi)?);
    }
    let values = spec
        .split(',')
        .map(|v| v.trim().parse::<u32>().map_err(|e| bad(format!("{e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SupportGrid::new(values)?)
}
