//! Oracles shared by integration tests.
#![allow(dead_code)]

use std::collections::{HashMap, HashSet, VecDeque};

use chrono::NaiveDate;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use snb_core::model::{
    dict, CountryId, PersonId, SimInstant, TemporalGraph, MILLIS_PER_DAY, MILLIS_PER_MINUTE,
};
use snb_core::query::{QueryInstance, QueryParams, QueryVariant};

/// Friendship distance between two persons at every minute of `day` (and at
/// every edge event inside the day), computed by plain BFS over the edges
/// alive at that instant. `None` means unreachable.
pub fn minute_replay_distances(
    g: &TemporalGraph,
    day: NaiveDate,
    a: PersonId,
    b: PersonId,
) -> Vec<Option<u32>> {
    let start = SimInstant::day_start(day);
    let end = start.plus_millis(MILLIS_PER_DAY);
    let mut instants: Vec<SimInstant> = (0..MILLIS_PER_DAY / MILLIS_PER_MINUTE)
        .map(|m| start.plus_millis(m * MILLIS_PER_MINUTE))
        .collect();
    for k in &g.knows {
        for t in std::iter::once(k.lifecycle.creation).chain(k.lifecycle.deletion) {
            if start <= t && t < end {
                instants.push(t);
            }
        }
    }
    instants.sort_unstable();
    instants.dedup();

    // edge-set fingerprint per instant lets identical states share one BFS
    let relevant: Vec<_> = g
        .knows
        .iter()
        .filter(|k| k.lifecycle.creation < end && k.lifecycle.deletion.is_none_or(|d| d > start))
        .collect();
    let mut cache: HashMap<Vec<bool>, Option<u32>> = HashMap::new();
    instants
        .iter()
        .map(|&t| {
            let alive: Vec<bool> = relevant.iter().map(|k| k.lifecycle.is_alive(t)).collect();
            *cache.entry(alive.clone()).or_insert_with(|| {
                let persons_alive: HashSet<PersonId> = g
                    .persons
                    .iter()
                    .filter(|p| p.lifecycle.is_alive(t))
                    .map(|p| p.id)
                    .collect();
                if !persons_alive.contains(&a) || !persons_alive.contains(&b) {
                    return None;
                }
                let mut adj: HashMap<PersonId, Vec<PersonId>> = HashMap::new();
                for (k, &on) in relevant.iter().zip(&alive) {
                    if on {
                        adj.entry(k.person1_id).or_default().push(k.person2_id);
                        adj.entry(k.person2_id).or_default().push(k.person1_id);
                    }
                }
                bfs(&adj, a, b)
            })
        })
        .collect()
}

pub fn bfs(adj: &HashMap<PersonId, Vec<PersonId>>, a: PersonId, b: PersonId) -> Option<u32> {
    let mut seen = HashSet::from([a]);
    let mut queue = VecDeque::from([(a, 0u32)]);
    while let Some((u, d)) = queue.pop_front() {
        if u == b {
            return Some(d);
        }
        for &v in adj.get(&u).into_iter().flatten() {
            if seen.insert(v) {
                queue.push_back((v, d + 1));
            }
        }
    }
    None
}

/// `per_kind` random CR3a, CR13b, CR14b, SR2 and SR6 instances over `g`.
pub fn random_queries(
    g: &TemporalGraph,
    rng: &mut ChaCha8Rng,
    per_kind: usize,
) -> Vec<QueryInstance> {
    let persons: Vec<PersonId> = g.persons.iter().map(|p| p.id).collect();
    let countries = dict::country_count() as u64;
    let latest = g
        .messages
        .iter()
        .map(|m| m.lifecycle.creation.millis())
        .max()
        .unwrap();
    let mut out = Vec::new();
    for _ in 0..per_kind {
        let p = *persons.choose(rng).unwrap();
        let (x, y) = loop {
            let (x, y) = (rng.gen_range(0..countries), rng.gen_range(0..countries));
            if x != y {
                break (x, y);
            }
        };
        let start = latest - rng.gen_range(30..400) * MILLIS_PER_DAY;
        out.push(QueryInstance::new(
            QueryVariant::Cr3a,
            QueryParams::Cr3 {
                person_id: p,
                country_x_id: CountryId(x),
                country_y_id: CountryId(y),
                start_date: SimInstant(start),
                duration_days: rng.gen_range(30..365),
            },
        ));
        let (a, b) = (*persons.choose(rng).unwrap(), *persons.choose(rng).unwrap());
        out.push(QueryInstance::new(
            QueryVariant::Cr13b,
            QueryParams::Cr13 {
                person1_id: a,
                person2_id: b,
            },
        ));
        out.push(QueryInstance::new(
            QueryVariant::Cr14b,
            QueryParams::Cr14 {
                person1_id: a,
                person2_id: b,
            },
        ));
        out.push(QueryInstance::sr2(*persons.choose(rng).unwrap()));
        out.push(QueryInstance::sr6(g.messages.choose(rng).unwrap().id));
    }
    out
}
