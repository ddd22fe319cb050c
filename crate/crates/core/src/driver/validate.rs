use std::collections::{BTreeMap, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::schedule::{Schedule, ScheduledOp};
use super::triggers::{follow_ups, TriggerConfig};
use super::DriverError;
use crate::model::UpdateOperation;
use crate::query::{QueryInstance, QueryResult, SystemUnderTest, UpdateOutcome};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "op", rename_all = "camelCase")]
pub enum DivergentOp {
    Query(QueryInstance),
    Update(UpdateOperation),
}

/// One operation on which the two systems disagreed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Divergence {
    /// Schedule entry that issued the operation (triggered reads share
    /// their root's index).
    pub index: usize,
    /// Query variant or update type name.
    pub name: String,
    pub op: DivergentOp,
    pub left: serde_json::Value,
    pub right: serde_json::Value,
}

impl std::fmt::Display for Divergence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} at entry {}: {} vs {}",
            self.name, self.index, self.left, self.right
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ValidationReport {
    pub left: String,
    pub right: String,
    /// Operations executed on each system, triggered reads included.
    pub operations: usize,
    pub diffs: usize,
    pub first_per_variant: BTreeMap<String, Divergence>,
}

impl ValidationReport {
    pub fn into_result(self) -> Result<Self, DriverError> {
        match self.first_per_variant.values().min_by_key(|d| d.index) {
            Some(d) => Err(DriverError::ValidationFailed(Box::new(d.clone()))),
            None => Ok(self),
        }
    }
}

fn to_json<T: Serialize, E: std::fmt::Display>(r: &Result<T, E>) -> serde_json::Value {
    match r {
        Ok(v) => serde_json::json!({ "ok": v }),
        Err(e) => serde_json::json!({ "error": e.to_string() }),
    }
}

fn same_update(
    a: &Result<UpdateOutcome, crate::query::SutError>,
    b: &Result<UpdateOutcome, crate::query::SutError>,
) -> bool {
    match (a, b) {
        (Ok(x), Ok(y)) => x == y,
        (Err(x), Err(y)) => std::mem::discriminant(x) == std::mem::discriminant(y),
        _ => false,
    }
}

fn same_query(
    a: &Result<QueryResult, crate::query::SutError>,
    b: &Result<QueryResult, crate::query::SutError>,
) -> bool {
    match (a, b) {
        (Ok(x), Ok(y)) => x.equivalent(y),
        (Err(x), Err(y)) => std::mem::discriminant(x) == std::mem::discriminant(y),
        _ => false,
    }
}

/// Runs every schedule entry strictly in order, one operation at a time,
/// on `left` then `right`, comparing outcomes. Triggered short reads are
/// derived from `left`'s results and run on both.
pub fn cross_validate(
    schedule: &Schedule,
    left: &dyn SystemUnderTest,
    right: &dyn SystemUnderTest,
    triggers: &TriggerConfig,
) -> ValidationReport {
    let mut report = ValidationReport {
        left: left.name().to_string(),
        right: right.name().to_string(),
        operations: 0,
        diffs: 0,
        first_per_variant: BTreeMap::new(),
    };
    let record = |report: &mut ValidationReport, d: Divergence| {
        report.diffs += 1;
        tracing::debug!(%d, "divergence");
        report.first_per_variant.entry(d.name.clone()).or_insert(d);
    };
    for (index, entry) in schedule.entries.iter().enumerate() {
        match &entry.op {
            ScheduledOp::Update(op) => {
                let (a, b) = (left.execute_update(op), right.execute_update(op));
                report.operations += 1;
                if !same_update(&a, &b) {
                    let d = Divergence {
                        index,
                        name: op.op_type.name().to_string(),
                        op: DivergentOp::Update(op.clone()),
                        left: to_json(&a),
                        right: to_json(&b),
                    };
                    record(&mut report, d);
                }
            }
            ScheduledOp::Query(q) => {
                let mut rng = ChaCha8Rng::seed_from_u64(triggers.seed ^ index as u64);
                let mut queue = VecDeque::from([(q.clone(), 0u32)]);
                while let Some((q, depth)) = queue.pop_front() {
                    let (a, b) = (left.execute_query(&q), right.execute_query(&q));
                    report.operations += 1;
                    if !same_query(&a, &b) {
                        let d = Divergence {
                            index,
                            name: q.variant.name().to_string(),
                            op: DivergentOp::Query(q.clone()),
                            left: to_json(&a),
                            right: to_json(&b),
                        };
                        record(&mut report, d);
                    }
                    if let Ok(r) = &a {
                        for next in follow_ups(&q, r, depth, triggers, &mut rng) {
                            queue.push_back((next, depth + 1));
                        }
                    }
                }
            }
        }
    }
    report
}
