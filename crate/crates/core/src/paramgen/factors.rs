use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::ParamgenError;
use crate::model::{PersonId, TemporalGraph, MILLIS_PER_DAY};

/// Adjacent frequencies stay in one group while the step between them is at
/// most this fraction of the lower one.
pub const GAP_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FactorRow {
    pub key: Vec<u64>,
    pub frequency: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorTable {
    pub name: String,
    pub rows: Vec<FactorRow>,
}

impl FactorTable {
    pub fn from_counts(name: &str, counts: BTreeMap<Vec<u64>, u64>) -> Self {
        Self {
            name: name.to_string(),
            rows: counts
                .into_iter()
                .map(|(key, frequency)| FactorRow { key, frequency })
                .collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn frequency(&self, key: &[u64]) -> Option<u64> {
        self.rows.iter().find(|r| r.key == key).map(|r| r.frequency)
    }

    /// Rows ordered by (frequency, key).
    fn sorted(&self) -> Vec<&FactorRow> {
        let mut rows: Vec<&FactorRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| (a.frequency, &a.key).cmp(&(b.frequency, &b.key)));
        rows
    }
}

/// Summary statistics over the whole temporal graph. Like a group-by over a
/// join, only keys with at least one occurrence get a row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FactorTables {
    /// Friendships per unordered pair of distinct countries.
    pub country_pairs_num_friends: FactorTable,
    pub person_num_friends: FactorTable,
    pub person_num_messages: FactorTable,
    /// Messages created by a person's friends, summed over friends.
    pub person_num_friend_messages: FactorTable,
    /// Key is days since the Unix epoch.
    pub message_count_per_day: FactorTable,
}

impl FactorTables {
    pub fn all(&self) -> [&FactorTable; 5] {
        [
            &self.country_pairs_num_friends,
            &self.person_num_friends,
            &self.person_num_messages,
            &self.person_num_friend_messages,
            &self.message_count_per_day,
        ]
    }
}

pub fn build_factor_tables(graph: &TemporalGraph) -> FactorTables {
    let country: HashMap<PersonId, u64> = graph
        .persons
        .iter()
        .map(|p| (p.id, p.country_id.0))
        .collect();

    let mut pairs: BTreeMap<Vec<u64>, u64> = BTreeMap::new();
    let mut friends: BTreeMap<Vec<u64>, u64> = BTreeMap::new();
    for k in &graph.knows {
        *friends.entry(vec![k.person1_id.0]).or_default() += 1;
        *friends.entry(vec![k.person2_id.0]).or_default() += 1;
        let (a, b) = (country[&k.person1_id], country[&k.person2_id]);
        if a != b {
            *pairs.entry(vec![a.min(b), a.max(b)]).or_default() += 1;
        }
    }

    let mut messages: BTreeMap<Vec<u64>, u64> = BTreeMap::new();
    let mut per_day: BTreeMap<Vec<u64>, u64> = BTreeMap::new();
    for m in &graph.messages {
        *messages.entry(vec![m.creator_person_id.0]).or_default() += 1;
        let day = m.lifecycle.creation.millis().div_euclid(MILLIS_PER_DAY) as u64;
        *per_day.entry(vec![day]).or_default() += 1;
    }

    let mut friend_messages: BTreeMap<Vec<u64>, u64> = BTreeMap::new();
    for k in &graph.knows {
        for (me, friend) in [(k.person1_id, k.person2_id), (k.person2_id, k.person1_id)] {
            if let Some(&n) = messages.get(&vec![friend.0]) {
                *friend_messages.entry(vec![me.0]).or_default() += n;
            }
        }
    }

    FactorTables {
        country_pairs_num_friends: FactorTable::from_counts("countryPairsNumFriends", pairs),
        person_num_friends: FactorTable::from_counts("personNumFriends", friends),
        person_num_messages: FactorTable::from_counts("personNumMessages", messages),
        person_num_friend_messages: FactorTable::from_counts(
            "personNumFriendMessages",
            friend_messages,
        ),
        message_count_per_day: FactorTable::from_counts("messageCountPerDay", per_day),
    }
}

/// Splits rows sorted by (frequency, key) into maximal runs whose adjacent
/// frequency steps stay within [`GAP_FRACTION`] of the lower value.
pub fn frequency_groups(table: &FactorTable) -> Vec<Vec<&FactorRow>> {
    let mut groups: Vec<Vec<&FactorRow>> = Vec::new();
    for row in table.sorted() {
        match groups.last_mut() {
            Some(g) if within_gap(g.last().unwrap().frequency, row.frequency) => g.push(row),
            _ => groups.push(vec![row]),
        }
    }
    groups
}

fn within_gap(lower: u64, upper: u64) -> bool {
    (upper - lower) as f64 <= GAP_FRACTION * lower as f64
}

fn population_stddev(rows: &[&FactorRow]) -> f64 {
    let n = rows.len() as f64;
    let mean = rows.iter().map(|r| r.frequency as f64).sum::<f64>() / n;
    (rows
        .iter()
        .map(|r| (r.frequency as f64 - mean).powi(2))
        .sum::<f64>()
        / n)
        .sqrt()
}

fn median(rows: &[&FactorRow]) -> f64 {
    let n = rows.len();
    if n % 2 == 1 {
        rows[n / 2].frequency as f64
    } else {
        (rows[n / 2 - 1].frequency + rows[n / 2].frequency) as f64 / 2.0
    }
}

/// Keys of the lowest-variance frequency group with at least `min_group_size`
/// rows. Ties prefer the larger group, then the smaller median.
pub fn select_window(
    table: &FactorTable,
    min_group_size: usize,
) -> Result<Vec<Vec<u64>>, ParamgenError> {
    let groups = frequency_groups(table);
    let best = groups
        .iter()
        .filter(|g| g.len() >= min_group_size.max(1))
        .map(|g| (population_stddev(g), g))
        .min_by(|(sa, a), (sb, b)| {
            sa.total_cmp(sb)
                .then(b.len().cmp(&a.len()))
                .then(median(a).total_cmp(&median(b)))
        })
        .ok_or_else(|| ParamgenError::NoQualifyingGroup {
            table: table.name.clone(),
            min_group_size,
            largest: groups.iter().map(Vec::len).max().unwrap_or(0),
        })?;
    Ok(best.1.iter().map(|r| r.key.clone()).collect())
}

/// `count` keys closest to the nearest-rank percentile `p` of the
/// frequency-sorted table, nearest first; equal distance prefers the lower rank.
pub fn select_percentile(table: &FactorTable, p: f64, count: usize) -> Vec<Vec<u64>> {
    let rows = table.sorted();
    let n = rows.len();
    if n == 0 {
        return Vec::new();
    }
    let rank = ((p.clamp(0.0, 1.0) * n as f64).ceil() as usize).clamp(1, n);
    let target = rank - 1;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by_key(|&i| (i.abs_diff(target), i));
    idx.into_iter()
        .take(count)
        .map(|i| rows[i].key.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table(freqs: &[u64]) -> FactorTable {
        FactorTable {
            name: "t".into(),
            rows: freqs
                .iter()
                .enumerate()
                .map(|(i, &f)| FactorRow {
                    key: vec![i as u64],
                    frequency: f,
                })
                .collect(),
        }
    }

    #[test]
    fn zero_variance_group_wins() {
        let t = table(&[5, 5, 5, 9, 100]);
        assert_eq!(
            select_window(&t, 3).unwrap(),
            vec![vec![0], vec![1], vec![2]]
        );
    }

    #[test]
    fn identical_frequencies_return_whole_table() {
        let t = table(&[7; 12]);
        assert_eq!(select_window(&t, 10).unwrap().len(), 12);
    }

    #[test]
    fn too_small_groups_are_rejected() {
        let t = table(&[1, 100, 10_000]);
        assert!(matches!(
            select_window(&t, 2),
            Err(ParamgenError::NoQualifyingGroup { largest: 1, .. })
        ));
    }

    #[test]
    fn ties_prefer_larger_then_lower_median() {
        // two zero-variance groups of 3 and 4 rows
        let t = table(&[10, 10, 10, 50, 50, 50, 50]);
        assert_eq!(select_window(&t, 3).unwrap().len(), 4);
        let t = table(&[50, 50, 50, 10, 10, 10]);
        assert_eq!(
            select_window(&t, 3).unwrap(),
            vec![vec![3], vec![4], vec![5]]
        );
    }

    #[test]
    fn percentile_extremes() {
        let t = table(&[4, 9, 1, 7, 3, 8, 2, 6, 5, 10]);
        assert_eq!(select_percentile(&t, 1.0, 1), vec![vec![9]]);
        assert_eq!(select_percentile(&t, 0.0, 1), vec![vec![2]]);
        // maximal frequency first, then walking down
        assert_eq!(
            select_percentile(&t, 1.0, 3),
            vec![vec![9], vec![1], vec![5]]
        );
        assert!(select_percentile(
            &FactorTable {
                name: "e".into(),
                rows: vec![]
            },
            0.5,
            3
        )
        .is_empty());
    }

    #[test]
    fn country_pair_counts_single_edge() {
        use crate::model::*;
        use std::collections::BTreeSet;
        let person = |id: u64, c: u64| Person {
            id: PersonId(id),
            first_name: String::new(),
            last_name: String::new(),
            country_id: CountryId(c),
            university_id: None,
            tag_interests: BTreeSet::new(),
            lifecycle: Lifecycle::created(SimInstant(0)),
        };
        let mut g = TemporalGraph {
            persons: vec![person(1, 3), person(2, 1)],
            ..Default::default()
        };
        assert!(build_factor_tables(&g).country_pairs_num_friends.is_empty());
        g.knows.push(
            KnowsEdge::new(PersonId(1), PersonId(2), Lifecycle::created(SimInstant(5))).unwrap(),
        );
        let t = build_factor_tables(&g);
        assert_eq!(t.country_pairs_num_friends.frequency(&[1, 3]), Some(1));
        assert_eq!(t.person_num_friends.frequency(&[1]), Some(1));
    }

    /// Independent group scan: walk the sorted frequencies once and compare
    /// the chosen group's spread against every qualifying run.
    fn oracle_groups(freqs: &[u64]) -> Vec<Vec<u64>> {
        let mut sorted = freqs.to_vec();
        sorted.sort_unstable();
        let mut out: Vec<Vec<u64>> = vec![];
        let mut cur: Vec<u64> = vec![];
        for f in sorted {
            if let Some(&last) = cur.last() {
                if (f - last) as f64 > 0.05 * last as f64 {
                    out.push(std::mem::take(&mut cur));
                }
            }
            cur.push(f);
        }
        if !cur.is_empty() {
            out.push(cur);
        }
        out
    }

    fn var(v: &[u64]) -> f64 {
        let m = v.iter().sum::<u64>() as f64 / v.len() as f64;
        v.iter().map(|&x| (x as f64 - m).powi(2)).sum::<f64>() / v.len() as f64
    }

    #[test]
    fn random_thousand_row_table_picks_minimum_spread() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let freqs: Vec<u64> = (0..1000).map(|_| rng.gen_range(1..2000)).collect();
            let t = table(&freqs);
            let keys = select_window(&t, 10).unwrap();
            let chosen: Vec<u64> = keys.iter().map(|k| freqs[k[0] as usize]).collect();
            let chosen_var = var(&chosen);
            let groups = oracle_groups(&freqs);
            assert!(groups.iter().any(|g| {
                let mut c = chosen.clone();
                c.sort_unstable();
                *g == c
            }));
            for g in groups.iter().filter(|g| g.len() >= 10) {
                assert!(chosen_var <= var(g) + 1e-9);
            }
        }
    }

    proptest! {
        #[test]
        fn percentile_is_deterministic_and_sized(freqs in proptest::collection::vec(0u64..50, 1..80), p in 0.0f64..=1.0, count in 1usize..10) {
            let t = table(&freqs);
            let a = select_percentile(&t, p, count);
            prop_assert_eq!(&a, &select_percentile(&t, p, count));
            prop_assert_eq!(a.len(), count.min(freqs.len()));
            // the first key sits at the nearest rank
            let mut sorted: Vec<(u64, u64)> = freqs.iter().enumerate().map(|(i, &f)| (f, i as u64)).collect();
            sorted.sort_unstable();
            let rank = ((p * freqs.len() as f64).ceil() as usize).max(1);
            prop_assert_eq!(a[0][0], sorted[rank - 1].1);
        }

        #[test]
        fn window_groups_partition_the_table(freqs in proptest::collection::vec(0u64..500, 1..200)) {
            let t = table(&freqs);
            let groups = frequency_groups(&t);
            prop_assert_eq!(groups.iter().map(Vec::len).sum::<usize>(), freqs.len());
            for w in groups.windows(2) {
                let a = w[0].last().unwrap().frequency;
                let b = w[1][0].frequency;
                prop_assert!((b - a) as f64 > GAP_FRACTION * a as f64);
            }
        }
    }
}
