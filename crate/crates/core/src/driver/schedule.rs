use std::collections::{BTreeMap, HashMap};
use std::time::Duration;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{DriverConfig, DriverError};
use crate::model::{SimInstant, UpdateOperation};
use crate::paramgen::ParameterBucket;
use crate::query::{QueryInstance, QueryVariant};

/// Time compression as an integer parts-per-million factor, so wall
/// offsets are exact: `wall_ns = sim_ms * ppm`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tcr {
    ppm: u64,
}

impl Tcr {
    pub fn new(tcr: f64) -> Result<Self, DriverError> {
        let ppm = (tcr * 1e6).round();
        if !tcr.is_finite() || ppm < 1.0 {
            return Err(DriverError::ConfigInvalid(format!(
                "tcr must be at least 1e-6, got {tcr}"
            )));
        }
        Ok(Self { ppm: ppm as u64 })
    }

    pub fn ppm(self) -> u64 {
        self.ppm
    }

    pub fn value(self) -> f64 {
        self.ppm as f64 / 1e6
    }

    /// Wall-clock span for a simulation span. Negative spans clamp to zero.
    pub fn wall(self, sim_millis: i64) -> Duration {
        Duration::from_nanos(sim_millis.max(0) as u64 * self.ppm)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "op", rename_all = "camelCase")]
pub enum ScheduledOp {
    Update(UpdateOperation),
    Query(QueryInstance),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScheduleEntry {
    pub op: ScheduledOp,
    pub sim_time: SimInstant,
    /// Offset from run start.
    pub scheduled_wall: Duration,
    /// Wall offset of the dependency instant; updates only.
    pub dependency_wall: Option<Duration>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Schedule {
    pub anchor: SimInstant,
    pub tcr: Tcr,
    pub entries: Vec<ScheduleEntry>,
    /// Complex-read slots left empty because the day's bucket had no
    /// parameters for the variant.
    pub skipped: BTreeMap<QueryVariant, usize>,
}

impl Schedule {
    pub fn updates(&self) -> impl Iterator<Item = &UpdateOperation> {
        self.entries.iter().filter_map(|e| match &e.op {
            ScheduledOp::Update(u) => Some(u),
            ScheduledOp::Query(_) => None,
        })
    }

    pub fn queries(&self) -> impl Iterator<Item = &QueryInstance> {
        self.entries.iter().filter_map(|e| match &e.op {
            ScheduledOp::Query(q) => Some(q),
            ScheduledOp::Update(_) => None,
        })
    }
}

/// Maps updates to wall offsets anchored at `anchor` and interleaves one
/// complex read of each variant after every `frequency[variant]` updates,
/// drawing parameters from the bucket of the update's simulation day.
pub fn build_schedule(
    stream: &[UpdateOperation],
    buckets: &[ParameterBucket],
    config: &DriverConfig,
    anchor: SimInstant,
) -> Result<Schedule, DriverError> {
    let tcr = Tcr::new(config.tcr)?;
    let by_day: HashMap<NaiveDate, &ParameterBucket> = buckets.iter().map(|b| (b.day, b)).collect();
    let mut drawn: HashMap<(NaiveDate, QueryVariant), usize> = HashMap::new();
    let mut skipped = BTreeMap::new();
    let mut entries = Vec::with_capacity(stream.len() * 13 / 10);
    for (i, op) in stream.iter().enumerate() {
        let at = |t: SimInstant| tcr.wall(t - anchor);
        entries.push(ScheduleEntry {
            op: ScheduledOp::Update(op.clone()),
            sim_time: op.scheduled_time,
            scheduled_wall: at(op.scheduled_time),
            dependency_wall: Some(at(op.dependency_time)),
        });
        for (&variant, &freq) in &config.frequencies {
            if freq == 0 || (i + 1) % freq as usize != 0 {
                continue;
            }
            let day = op.scheduled_time.day();
            let bucket = by_day.get(&day).ok_or(DriverError::MissingBucket { day })?;
            let params = bucket.params(variant);
            if params.is_empty() {
                *skipped.entry(variant).or_insert(0) += 1;
                continue;
            }
            let n = drawn.entry((day, variant)).or_insert(0);
            let p = params[*n % params.len()].clone();
            *n += 1;
            entries.push(ScheduleEntry {
                op: ScheduledOp::Query(QueryInstance::new(variant, p)),
                sim_time: op.scheduled_time,
                scheduled_wall: at(op.scheduled_time),
                dependency_wall: None,
            });
        }
    }
    if skipped.values().any(|&n| n > 0) {
        tracing::warn!(?skipped, "complex reads skipped for lack of parameters");
    }
    Ok(Schedule {
        anchor,
        tcr,
        entries,
        skipped,
    })
}
