//! Per-day parameter curation: factor tables, window and percentile
//! selection, and bound-graph path curation.

mod bound;
mod factors;
mod io;

use std::collections::BTreeMap;
use std::path::PathBuf;

use chrono::NaiveDate;
use rand::seq::{IteratorRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use bound::{
    build_bound_graphs, curate_reachable_pairs, curate_unreachable_pairs, day_bounds, in_g1, in_g2,
    BoundGraphs, PersonGraph,
};
pub use factors::{
    build_factor_tables, frequency_groups, select_percentile, select_window, FactorRow,
    FactorTable, FactorTables, GAP_FRACTION,
};
pub use io::{read_parameters, write_factor_tables, write_parameters, MANIFEST_FILE};

use crate::model::{CountryId, MessageId, PersonId, SimInstant, TemporalGraph};
use crate::query::{QueryParams, QueryVariant};

#[derive(Debug, thiserror::Error)]
pub enum ParamgenError {
    #[error("no frequency group in {table} has {min_group_size} rows (largest has {largest})")]
    NoQualifyingGroup {
        table: String,
        min_group_size: usize,
        largest: usize,
    },
    #[error("requested {requested} pairs but only {available} qualify")]
    InsufficientPairs { requested: usize, available: usize },
    #[error("empty stream period: {first} is after {last}")]
    EmptyPeriod { first: NaiveDate, last: NaiveDate },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase")]
pub struct ParamgenConfig {
    pub seed: u64,
    /// Hop distance of curated reachable pairs.
    pub k: u32,
    /// Parameters per query variant per day.
    pub per_day: usize,
    pub min_group_size: usize,
    /// Country pairs drawn per CR3 variant.
    pub country_pairs: usize,
    pub cr3_duration_days: u32,
}

impl Default for ParamgenConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            k: 4,
            per_day: 5,
            min_group_size: 10,
            country_pairs: 3,
            cr3_duration_days: 30,
        }
    }
}

/// Curated parameters for one simulation day. Every referenced entity is
/// alive for the entire day.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ParameterBucket {
    pub day: NaiveDate,
    pub per_query: BTreeMap<QueryVariant, Vec<QueryParams>>,
    pub partial: bool,
    pub warnings: Vec<String>,
}

impl ParameterBucket {
    pub fn params(&self, variant: QueryVariant) -> &[QueryParams] {
        self.per_query
            .get(&variant)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }
}

/// Selections shared by all days.
struct Candidates {
    pairs_a: Vec<(CountryId, CountryId)>,
    pairs_b: Vec<(CountryId, CountryId)>,
    cr3_persons: Result<Vec<PersonId>, String>,
    start_days: Result<Vec<i64>, String>,
}

fn country_pairs(keys: Vec<Vec<u64>>) -> Vec<(CountryId, CountryId)> {
    keys.into_iter()
        .map(|k| (CountryId(k[0]), CountryId(k[1])))
        .collect()
}

/// Builds one bucket per day of `[first, last]`, in parallel across days.
pub fn generate_parameters(
    graph: &TemporalGraph,
    first: NaiveDate,
    last: NaiveDate,
    config: &ParamgenConfig,
) -> Result<Vec<ParameterBucket>, ParamgenError> {
    if first > last {
        return Err(ParamgenError::EmptyPeriod { first, last });
    }
    let tables = build_factor_tables(graph);
    let pairs = &tables.country_pairs_num_friends;
    let candidates = Candidates {
        pairs_a: country_pairs(select_percentile(pairs, 1.0, config.country_pairs)),
        pairs_b: country_pairs(select_percentile(pairs, 0.01, config.country_pairs)),
        cr3_persons: select_window(&tables.person_num_friend_messages, config.min_group_size)
            .map(|keys| keys.into_iter().map(|k| PersonId(k[0])).collect())
            .map_err(|e| e.to_string()),
        start_days: select_window(&tables.message_count_per_day, config.min_group_size)
            .map(|keys| keys.into_iter().map(|k| k[0] as i64).collect())
            .map_err(|e| e.to_string()),
    };
    let days: Vec<NaiveDate> = first.iter_days().take_while(|d| *d <= last).collect();
    Ok(days
        .par_iter()
        .map(|&day| bucket_for_day(graph, day, config, &candidates))
        .collect())
}

fn day_rng(seed: u64, day: NaiveDate) -> ChaCha8Rng {
    let n = SimInstant::day_start(day).millis() as u64 / crate::model::MILLIS_PER_DAY as u64;
    ChaCha8Rng::seed_from_u64(seed ^ n.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

fn bucket_for_day(
    graph: &TemporalGraph,
    day: NaiveDate,
    cfg: &ParamgenConfig,
    cand: &Candidates,
) -> ParameterBucket {
    let mut rng = day_rng(cfg.seed, day);
    let (start, end) = day_bounds(day);
    let bound = build_bound_graphs(graph, day);
    let mut per_query: BTreeMap<QueryVariant, Vec<QueryParams>> = BTreeMap::new();
    let mut warnings = Vec::new();
    let alive_all_day: std::collections::HashMap<PersonId, CountryId> = graph
        .persons
        .iter()
        .filter(|p| in_g1(&p.lifecycle, start, end))
        .map(|p| (p.id, p.country_id))
        .collect();

    for (variant, pairs) in [
        (QueryVariant::Cr3a, &cand.pairs_a),
        (QueryVariant::Cr3b, &cand.pairs_b),
    ] {
        let (persons, days) = match (&cand.cr3_persons, &cand.start_days) {
            (Ok(p), Ok(d)) => (p, d),
            (Err(e), _) | (_, Err(e)) => {
                warnings.push(format!("{variant}: {e}"));
                continue;
            }
        };
        if pairs.is_empty() {
            warnings.push(format!("{variant}: no country pairs with friendships"));
            continue;
        }
        let mut params = Vec::new();
        for i in 0..cfg.per_day {
            let (x, y) = pairs[i % pairs.len()];
            let person = persons
                .iter()
                .filter(|p| alive_all_day.get(p).is_some_and(|&c| c != x && c != y))
                .choose(&mut rng);
            let Some(&person_id) = person else {
                warnings.push(format!(
                    "{variant}: no window person outside countries {x} and {y}"
                ));
                break;
            };
            let start_day = *days.choose(&mut rng).unwrap();
            params.push(QueryParams::Cr3 {
                person_id,
                country_x_id: x,
                country_y_id: y,
                start_date: SimInstant(start_day * crate::model::MILLIS_PER_DAY),
                duration_days: cfg.cr3_duration_days,
            });
        }
        per_query.insert(variant, params);
    }

    let mut curate = |reachable: bool, rng: &mut ChaCha8Rng| {
        let attempt = |count, rng: &mut ChaCha8Rng| {
            if reachable {
                curate_reachable_pairs(&bound, cfg.k, count, rng)
            } else {
                curate_unreachable_pairs(&bound, count, rng)
            }
        };
        match attempt(cfg.per_day, rng) {
            Ok(p) => p,
            Err(ParamgenError::InsufficientPairs {
                requested,
                available,
            }) => {
                let kind = if reachable {
                    "reachable"
                } else {
                    "unreachable"
                };
                warnings.push(format!(
                    "{kind} pairs: requested {requested}, available {available}"
                ));
                attempt(available, rng).unwrap_or_default()
            }
            Err(e) => {
                warnings.push(e.to_string());
                Vec::new()
            }
        }
    };
    let unreachable = curate(false, &mut rng);
    let reachable = curate(true, &mut rng);
    let cr13 = |p: &[(PersonId, PersonId)]| {
        p.iter()
            .map(|&(a, b)| QueryParams::Cr13 {
                person1_id: a,
                person2_id: b,
            })
            .collect::<Vec<_>>()
    };
    let cr14 = |p: &[(PersonId, PersonId)]| {
        p.iter()
            .map(|&(a, b)| QueryParams::Cr14 {
                person1_id: a,
                person2_id: b,
            })
            .collect::<Vec<_>>()
    };
    per_query.insert(QueryVariant::Cr13a, cr13(&unreachable));
    per_query.insert(QueryVariant::Cr14a, cr14(&unreachable));
    per_query.insert(QueryVariant::Cr13b, cr13(&reachable));
    per_query.insert(QueryVariant::Cr14b, cr14(&reachable));

    let mut persons: Vec<PersonId> = alive_all_day.keys().copied().collect();
    persons.sort_unstable();
    let sr2 = persons
        .choose_multiple(&mut rng, cfg.per_day)
        .map(|&person_id| QueryParams::Sr2 { person_id });
    per_query.insert(QueryVariant::Sr2, sr2.collect());
    let messages: Vec<MessageId> = graph
        .messages
        .iter()
        .filter(|m| in_g1(&m.lifecycle, start, end))
        .map(|m| m.id)
        .collect();
    let sr6 = messages
        .choose_multiple(&mut rng, cfg.per_day)
        .map(|&message_id| QueryParams::Sr6 { message_id });
    per_query.insert(QueryVariant::Sr6, sr6.collect());

    for v in QueryVariant::ALL {
        if per_query.get(&v).is_none_or(|p| p.is_empty())
            && !warnings.iter().any(|w| w.starts_with(v.name()))
        {
            warnings.push(format!("{v}: no parameters"));
        }
    }
    ParameterBucket {
        day,
        per_query,
        partial: !warnings.is_empty(),
        warnings,
    }
}
