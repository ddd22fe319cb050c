//! Query variants, parameters, results and the system-under-test interface.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{CountryId, ForumId, MessageId, PersonId, SimInstant, UpdateOperation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum QueryVariant {
    #[serde(rename = "CR3a")]
    Cr3a,
    #[serde(rename = "CR3b")]
    Cr3b,
    #[serde(rename = "CR13a")]
    Cr13a,
    #[serde(rename = "CR13b")]
    Cr13b,
    #[serde(rename = "CR14a")]
    Cr14a,
    #[serde(rename = "CR14b")]
    Cr14b,
    #[serde(rename = "SR2")]
    Sr2,
    #[serde(rename = "SR6")]
    Sr6,
}

impl QueryVariant {
    pub const ALL: [QueryVariant; 8] = [
        QueryVariant::Cr3a,
        QueryVariant::Cr3b,
        QueryVariant::Cr13a,
        QueryVariant::Cr13b,
        QueryVariant::Cr14a,
        QueryVariant::Cr14b,
        QueryVariant::Sr2,
        QueryVariant::Sr6,
    ];

    pub const COMPLEX: [QueryVariant; 6] = [
        QueryVariant::Cr3a,
        QueryVariant::Cr3b,
        QueryVariant::Cr13a,
        QueryVariant::Cr13b,
        QueryVariant::Cr14a,
        QueryVariant::Cr14b,
    ];

    pub fn is_complex(self) -> bool {
        !matches!(self, QueryVariant::Sr2 | QueryVariant::Sr6)
    }

    pub fn name(self) -> &'static str {
        match self {
            QueryVariant::Cr3a => "CR3a",
            QueryVariant::Cr3b => "CR3b",
            QueryVariant::Cr13a => "CR13a",
            QueryVariant::Cr13b => "CR13b",
            QueryVariant::Cr14a => "CR14a",
            QueryVariant::Cr14b => "CR14b",
            QueryVariant::Sr2 => "SR2",
            QueryVariant::Sr6 => "SR6",
        }
    }
}

impl fmt::Display for QueryVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for QueryVariant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        QueryVariant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown query variant {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "query", rename_all = "camelCase")]
pub enum QueryParams {
    #[serde(rename_all = "camelCase")]
    Cr3 {
        person_id: PersonId,
        country_x_id: CountryId,
        country_y_id: CountryId,
        start_date: SimInstant,
        duration_days: u32,
    },
    #[serde(rename_all = "camelCase")]
    Cr13 {
        person1_id: PersonId,
        person2_id: PersonId,
    },
    #[serde(rename_all = "camelCase")]
    Cr14 {
        person1_id: PersonId,
        person2_id: PersonId,
    },
    #[serde(rename_all = "camelCase")]
    Sr2 { person_id: PersonId },
    #[serde(rename_all = "camelCase")]
    Sr6 { message_id: MessageId },
}

impl QueryParams {
    /// Whether these parameters fit the given variant.
    pub fn fits(&self, variant: QueryVariant) -> bool {
        use QueryVariant::*;
        matches!(
            (self, variant),
            (QueryParams::Cr3 { .. }, Cr3a | Cr3b)
                | (QueryParams::Cr13 { .. }, Cr13a | Cr13b)
                | (QueryParams::Cr14 { .. }, Cr14a | Cr14b)
                | (QueryParams::Sr2 { .. }, Sr2)
                | (QueryParams::Sr6 { .. }, Sr6)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QueryInstance {
    pub variant: QueryVariant,
    pub params: QueryParams,
}

impl QueryInstance {
    pub fn new(variant: QueryVariant, params: QueryParams) -> Self {
        debug_assert!(params.fits(variant));
        Self { variant, params }
    }

    pub fn sr2(person_id: PersonId) -> Self {
        Self::new(QueryVariant::Sr2, QueryParams::Sr2 { person_id })
    }

    pub fn sr6(message_id: MessageId) -> Self {
        Self::new(QueryVariant::Sr6, QueryParams::Sr6 { message_id })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Cr3Row {
    pub person_id: PersonId,
    pub first_name: String,
    pub last_name: String,
    pub x_count: u64,
    pub y_count: u64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CheapestPath {
    /// Total weight; -1 when no path exists.
    pub weight: i64,
    pub path: Vec<PersonId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Sr2Row {
    pub message_id: MessageId,
    pub creation_date: SimInstant,
    pub root_post_id: MessageId,
    pub root_author_id: PersonId,
    pub root_author_first_name: String,
    pub root_author_last_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PersonRef {
    pub id: PersonId,
    pub first_name: String,
    pub last_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Sr6Row {
    pub forum_id: ForumId,
    /// Absent when the moderator was deleted and the forum kept.
    pub moderator: Option<PersonRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "camelCase")]
pub enum QueryResult {
    Cr3(Vec<Cr3Row>),
    /// Hop count; -1 when unreachable.
    Cr13(i64),
    Cr14(CheapestPath),
    Sr2(Vec<Sr2Row>),
    Sr6(Sr6Row),
}

impl QueryResult {
    /// Result equality as validated: cheapest paths compare by weight only,
    /// since any optimal path is acceptable.
    pub fn equivalent(&self, other: &QueryResult) -> bool {
        match (self, other) {
            (QueryResult::Cr14(a), QueryResult::Cr14(b)) => a.weight == b.weight,
            (a, b) => a == b,
        }
    }

    /// Person ids a result hands on to triggered short reads.
    pub fn person_ids(&self) -> Vec<PersonId> {
        match self {
            QueryResult::Cr3(rows) => rows.iter().map(|r| r.person_id).collect(),
            QueryResult::Cr14(p) => p.path.clone(),
            _ => Vec::new(),
        }
    }

    /// Message ids a result hands on to triggered short reads.
    pub fn message_ids(&self) -> Vec<MessageId> {
        match self {
            QueryResult::Sr2(rows) => rows.iter().map(|r| r.message_id).collect(),
            _ => Vec::new(),
        }
    }
}

/// Weight of an interaction edge: `max(round(40 - sqrt(n)), 1)`, rounding
/// half away from zero.
pub fn interaction_weight(num_interactions: u64) -> i64 {
    ((40.0 - (num_interactions as f64).sqrt()).round() as i64).max(1)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UpdateOutcome {
    pub version: u64,
    /// Entities removed by a delete, root included. Zero for inserts.
    pub cascade_size: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SutError {
    #[error("unknown person {0}")]
    UnknownPerson(PersonId),
    #[error("unknown message {0}")]
    UnknownMessage(MessageId),
    #[error("unknown entity: {0}")]
    UnknownEntity(String),
    #[error("dependency missing: {0}")]
    DependencyMissing(String),
    #[error("entity already exists: {0}")]
    Duplicate(String),
    #[error("integrity error: {0}")]
    Integrity(String),
}

/// In-process interface the driver benchmarks against.
pub trait SystemUnderTest: Send + Sync {
    fn name(&self) -> &str;
    fn execute_query(&self, query: &QueryInstance) -> Result<QueryResult, SutError>;
    fn execute_update(&self, op: &UpdateOperation) -> Result<UpdateOutcome, SutError>;
    fn current_commit_version(&self) -> u64;
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Integer-only evaluation: round(40 - sqrt(n)) = 40 - r where r is
    /// sqrt(n) rounded half up, i.e. r = isqrt(n) + 1 iff n >= isqrt^2 + isqrt + 1
    /// (sqrt(n) >= isqrt + 0.5 iff n >= isqrt^2 + isqrt + 0.25).
    fn weight_oracle(n: u64) -> i64 {
        let mut r = (n as f64).sqrt() as u64;
        while r * r > n {
            r -= 1;
        }
        while (r + 1) * (r + 1) <= n {
            r += 1;
        }
        let rounded = if n > r * r + r { r + 1 } else { r };
        (40 - rounded as i64).max(1)
    }

    #[test]
    fn weight_anchors() {
        assert_eq!(interaction_weight(0), 40);
        assert_eq!(interaction_weight(1), 39);
        assert_eq!(interaction_weight(2), 39);
        assert_eq!(interaction_weight(3), 38);
        assert_eq!(interaction_weight(1521), 1);
        assert_eq!(interaction_weight(10_000), 1);
    }

    #[test]
    fn weight_matches_integer_oracle_up_to_a_million() {
        for n in 0..=1_000_000u64 {
            assert_eq!(interaction_weight(n), weight_oracle(n), "n = {n}");
        }
    }

    #[test]
    fn variants_round_trip() {
        for v in QueryVariant::ALL {
            assert_eq!(v.name().parse::<QueryVariant>().unwrap(), v);
            let json = serde_json::to_string(&v).unwrap();
            assert_eq!(json, format!("\"{}\"", v.name()));
        }
        assert_eq!(QueryVariant::COMPLEX.len(), 6);
        assert!(!QueryVariant::Sr6.is_complex());
    }

    #[test]
    fn cheapest_paths_compare_by_weight() {
        let a = QueryResult::Cr14(CheapestPath {
            weight: 78,
            path: vec![PersonId(1), PersonId(2), PersonId(4)],
        });
        let b = QueryResult::Cr14(CheapestPath {
            weight: 78,
            path: vec![PersonId(1), PersonId(3), PersonId(4)],
        });
        let c = QueryResult::Cr14(CheapestPath {
            weight: 79,
            path: vec![],
        });
        assert!(a.equivalent(&b));
        assert!(!a.equivalent(&c));
        assert!(!QueryResult::Cr13(4).equivalent(&QueryResult::Cr13(5)));
    }

    #[test]
    fn instance_json_shape() {
        let q = QueryInstance::new(
            QueryVariant::Cr13b,
            QueryParams::Cr13 {
                person1_id: PersonId(3),
                person2_id: PersonId(9),
            },
        );
        let json = serde_json::to_string(&q).unwrap();
        assert_eq!(
            json,
            r#"{"variant":"CR13b","params":{"query":"cr13","person1Id":3,"person2Id":9}}"#
        );
        assert_eq!(serde_json::from_str::<QueryInstance>(&json).unwrap(), q);
    }
}
