use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::query::{QueryInstance, QueryParams, QueryResult, QueryVariant};

/// Which short reads a finished read hands its output to. These defaults
/// are stand-ins; the canonical per-scale mapping is not published with
/// the workload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase")]
pub struct TriggerConfig {
    /// SR2 instances per CR3/CR14 result, taken from the returned persons.
    pub sr2_per_result: usize,
    /// An SR2 at depth `d` re-triggers SR2 with probability `p^d`.
    pub sr2_repeat_probability: f64,
    pub max_depth: u32,
    /// SR6 instances per SR2 result, taken from the returned messages.
    pub sr6_per_sr2: usize,
    pub seed: u64,
}

impl Default for TriggerConfig {
    fn default() -> Self {
        Self {
            sr2_per_result: 3,
            sr2_repeat_probability: 0.5,
            max_depth: 3,
            sr6_per_sr2: 1,
            seed: 7,
        }
    }
}

/// Short reads triggered by `query` returning `result`. `depth` is the
/// trigger depth of `query` itself (0 for scheduled complex reads).
pub fn follow_ups(
    query: &QueryInstance,
    result: &QueryResult,
    depth: u32,
    cfg: &TriggerConfig,
    rng: &mut impl Rng,
) -> Vec<QueryInstance> {
    if depth >= cfg.max_depth {
        return Vec::new();
    }
    match (query.variant, &query.params, result) {
        (
            QueryVariant::Cr3a | QueryVariant::Cr3b | QueryVariant::Cr14a | QueryVariant::Cr14b,
            _,
            r,
        ) => r
            .person_ids()
            .into_iter()
            .take(cfg.sr2_per_result)
            .map(QueryInstance::sr2)
            .collect(),
        (
            QueryVariant::Cr13b,
            QueryParams::Cr13 {
                person1_id,
                person2_id,
            },
            _,
        ) => {
            vec![
                QueryInstance::sr2(*person1_id),
                QueryInstance::sr2(*person2_id),
            ]
        }
        (QueryVariant::Sr2, _, QueryResult::Sr2(rows)) => {
            let mut out: Vec<QueryInstance> = result
                .message_ids()
                .into_iter()
                .take(cfg.sr6_per_sr2)
                .map(QueryInstance::sr6)
                .collect();
            let p = cfg.sr2_repeat_probability.powi(depth.max(1) as i32);
            if let Some(first) = rows.first() {
                if rng.gen_bool(p.clamp(0.0, 1.0)) {
                    out.push(QueryInstance::sr2(first.root_author_id));
                }
            }
            out
        }
        _ => Vec::new(),
    }
}
