use std::collections::{HashMap, HashSet, VecDeque};

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::Rng;

use super::ParamgenError;
use crate::model::{Lifecycle, PersonId, SimInstant, TemporalGraph, MILLIS_PER_DAY};

pub const UNREACHED: u32 = u32::MAX;

/// Undirected person graph with dense vertex indices.
#[derive(Debug, Clone, Default)]
pub struct PersonGraph {
    ids: Vec<PersonId>,
    index: HashMap<PersonId, usize>,
    adj: Vec<Vec<usize>>,
}

impl PersonGraph {
    pub fn new(
        mut persons: Vec<PersonId>,
        edges: impl IntoIterator<Item = (PersonId, PersonId)>,
    ) -> Self {
        persons.sort_unstable();
        persons.dedup();
        let index: HashMap<PersonId, usize> =
            persons.iter().enumerate().map(|(i, &p)| (p, i)).collect();
        let mut adj = vec![Vec::new(); persons.len()];
        for (a, b) in edges {
            let (Some(&i), Some(&j)) = (index.get(&a), index.get(&b)) else {
                continue;
            };
            adj[i].push(j);
            adj[j].push(i);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        Self {
            ids: persons,
            index,
            adj,
        }
    }

    pub fn persons(&self) -> &[PersonId] {
        &self.ids
    }

    pub fn contains(&self, p: PersonId) -> bool {
        self.index.contains_key(&p)
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn has_edge(&self, a: PersonId, b: PersonId) -> bool {
        match (self.index.get(&a), self.index.get(&b)) {
            (Some(&i), Some(&j)) => self.adj[i].binary_search(&j).is_ok(),
            _ => false,
        }
    }

    pub fn edges(&self) -> Vec<(PersonId, PersonId)> {
        let mut out = Vec::new();
        for (i, list) in self.adj.iter().enumerate() {
            for &j in list.iter().filter(|&&j| j > i) {
                out.push((self.ids[i], self.ids[j]));
            }
        }
        out
    }

    /// Hop distances from `src` indexed like [`persons`](Self::persons).
    fn bfs(&self, src: usize) -> Vec<u32> {
        let mut dist = vec![UNREACHED; self.ids.len()];
        let mut queue = VecDeque::from([src]);
        dist[src] = 0;
        while let Some(u) = queue.pop_front() {
            for &v in &self.adj[u] {
                if dist[v] == UNREACHED {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    pub fn distance(&self, a: PersonId, b: PersonId) -> Option<u32> {
        let (&i, &j) = (self.index.get(&a)?, self.index.get(&b)?);
        let d = self.bfs(i)[j];
        (d != UNREACHED).then_some(d)
    }

    /// Component label per vertex.
    fn components(&self) -> Vec<usize> {
        let mut label = vec![usize::MAX; self.ids.len()];
        let mut next = 0;
        for s in 0..self.ids.len() {
            if label[s] != usize::MAX {
                continue;
            }
            let mut stack = vec![s];
            label[s] = next;
            while let Some(u) = stack.pop() {
                for &v in &self.adj[u] {
                    if label[v] == usize::MAX {
                        label[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn component_of(&self) -> HashMap<PersonId, usize> {
        self.components()
            .into_iter()
            .enumerate()
            .map(|(i, c)| (self.ids[i], c))
            .collect()
    }
}

/// Per-day lower and upper bounds on the friendship graph.
#[derive(Debug, Clone)]
pub struct BoundGraphs {
    pub day: NaiveDate,
    /// Present for the whole day: inserts up to day start, deletes up to day end.
    pub g1: PersonGraph,
    /// Present at some point of the day: deletes up to day start, inserts up to day end.
    pub g2: PersonGraph,
}

pub fn day_bounds(day: NaiveDate) -> (SimInstant, SimInstant) {
    let start = SimInstant::day_start(day);
    (start, start.plus_millis(MILLIS_PER_DAY))
}

/// Alive during all of `[start, end]`.
pub fn in_g1(lc: &Lifecycle, start: SimInstant, end: SimInstant) -> bool {
    lc.creation < start && lc.deletion.is_none_or(|d| d > end)
}

/// Alive at some instant of `[start, end)`.
pub fn in_g2(lc: &Lifecycle, start: SimInstant, end: SimInstant) -> bool {
    lc.creation < end && lc.deletion.is_none_or(|d| d > start)
}

pub fn build_bound_graphs(graph: &TemporalGraph, day: NaiveDate) -> BoundGraphs {
    let (start, end) = day_bounds(day);
    let build = |keep: fn(&Lifecycle, SimInstant, SimInstant) -> bool| {
        let persons = graph
            .persons
            .iter()
            .filter(|p| keep(&p.lifecycle, start, end))
            .map(|p| p.id)
            .collect();
        let edges = graph
            .knows
            .iter()
            .filter(|k| keep(&k.lifecycle, start, end))
            .map(|k| k.key());
        PersonGraph::new(persons, edges)
    };
    BoundGraphs {
        day,
        g1: build(in_g1),
        g2: build(in_g2),
    }
}

/// Pairs exactly `k` hops apart in both bound graphs, sampled uniformly.
pub fn curate_reachable_pairs(
    bound: &BoundGraphs,
    k: u32,
    count: usize,
    rng: &mut impl Rng,
) -> Result<Vec<(PersonId, PersonId)>, ParamgenError> {
    let mut candidates = Vec::new();
    for (i, &src) in bound.g1.persons().iter().enumerate() {
        let d1 = bound.g1.bfs(i);
        let at_k: Vec<usize> = (0..d1.len())
            .filter(|&j| d1[j] == k && bound.g1.ids[j] > src)
            .collect();
        if at_k.is_empty() {
            continue;
        }
        let d2 = bound.g2.bfs(bound.g2.index[&src]);
        for j in at_k {
            let dst = bound.g1.ids[j];
            if d2[bound.g2.index[&dst]] == k {
                candidates.push((src, dst));
            }
        }
    }
    if candidates.len() < count {
        return Err(ParamgenError::InsufficientPairs {
            requested: count,
            available: candidates.len(),
        });
    }
    Ok(candidates.choose_multiple(rng, count).copied().collect())
}

/// Pairs of all-day persons that sit in different components of the upper
/// bound graph, sampled uniformly.
pub fn curate_unreachable_pairs(
    bound: &BoundGraphs,
    count: usize,
    rng: &mut impl Rng,
) -> Result<Vec<(PersonId, PersonId)>, ParamgenError> {
    let component = bound.g2.component_of();
    let eligible = bound.g1.persons();
    let n = eligible.len();
    let mut sizes: HashMap<usize, usize> = HashMap::new();
    for p in eligible {
        *sizes.entry(component[p]).or_default() += 1;
    }
    let pairs = |m: usize| m * m.saturating_sub(1) / 2;
    let available = pairs(n) - sizes.values().map(|&s| pairs(s)).sum::<usize>();
    if available < count {
        return Err(ParamgenError::InsufficientPairs {
            requested: count,
            available,
        });
    }
    if available <= 4 * count {
        let mut all = Vec::with_capacity(available);
        for (i, &a) in eligible.iter().enumerate() {
            for &b in &eligible[i + 1..] {
                if component[&a] != component[&b] {
                    all.push((a, b));
                }
            }
        }
        return Ok(all.choose_multiple(rng, count).copied().collect());
    }
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let (a, b) = (eligible[rng.gen_range(0..n)], eligible[rng.gen_range(0..n)]);
        let pair = (a.min(b), a.max(b));
        if a != b && component[&a] != component[&b] && seen.insert(pair) {
            out.push(pair);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CountryId, KnowsEdge, Person};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    fn day() -> NaiveDate {
        NaiveDate::from_ymd_opt(2012, 12, 5).unwrap()
    }

    fn person(id: u64) -> Person {
        Person {
            id: PersonId(id),
            first_name: String::new(),
            last_name: String::new(),
            country_id: CountryId(0),
            university_id: None,
            tag_interests: BTreeSet::new(),
            lifecycle: Lifecycle::created(SimInstant(0)),
        }
    }

    fn knows(a: u64, b: u64, c: SimInstant, d: Option<SimInstant>) -> KnowsEdge {
        KnowsEdge::new(PersonId(a), PersonId(b), Lifecycle::new(c, d)).unwrap()
    }

    fn graph(n: u64, edges: Vec<KnowsEdge>) -> TemporalGraph {
        TemporalGraph {
            persons: (1..=n).map(person).collect(),
            knows: edges,
            ..Default::default()
        }
    }

    #[test]
    fn edge_placement_in_bound_graphs() {
        let (start, _) = day_bounds(day());
        let noon = start.plus_millis(12 * 3_600_000);
        let g = graph(
            4,
            vec![
                knows(1, 2, SimInstant(0), None),
                knows(2, 3, noon, None),
                knows(3, 4, SimInstant(0), Some(noon)),
            ],
        );
        let b = build_bound_graphs(&g, day());
        assert!(b.g1.has_edge(PersonId(1), PersonId(2)) && b.g2.has_edge(PersonId(1), PersonId(2)));
        assert!(
            !b.g1.has_edge(PersonId(2), PersonId(3)) && b.g2.has_edge(PersonId(2), PersonId(3))
        );
        assert!(
            !b.g1.has_edge(PersonId(3), PersonId(4)) && b.g2.has_edge(PersonId(3), PersonId(4))
        );
        for (x, y) in b.g1.edges() {
            assert!(b.g2.has_edge(x, y));
        }
    }

    #[test]
    fn static_path_qualifies_at_four_hops() {
        let g = graph(
            5,
            (1..5)
                .map(|i| knows(i, i + 1, SimInstant(0), None))
                .collect(),
        );
        let b = build_bound_graphs(&g, day());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pairs = curate_reachable_pairs(&b, 4, 1, &mut rng).unwrap();
        assert_eq!(pairs, vec![(PersonId(1), PersonId(5))]);
        assert!(matches!(
            curate_reachable_pairs(&b, 4, 2, &mut rng),
            Err(ParamgenError::InsufficientPairs {
                requested: 2,
                available: 1
            })
        ));
    }

    #[test]
    fn oscillating_pair_is_rejected() {
        // Ada(1) - Eve(2) - Carl(3) - Dan(4) - Bob(5); during the day Carl-Dan
        // is deleted and Carl-Bob inserted.
        let (start, _) = day_bounds(day());
        let morning = start.plus_millis(3_600_000);
        let evening = start.plus_millis(20 * 3_600_000);
        let g = graph(
            5,
            vec![
                knows(1, 2, SimInstant(0), None),
                knows(2, 3, SimInstant(0), None),
                knows(3, 4, SimInstant(0), Some(morning)),
                knows(4, 5, SimInstant(0), None),
                knows(3, 5, evening, None),
            ],
        );
        let b = build_bound_graphs(&g, day());
        assert_eq!(b.g1.distance(PersonId(1), PersonId(5)), None);
        assert_eq!(b.g2.distance(PersonId(1), PersonId(5)), Some(3));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(curate_reachable_pairs(&b, 4, 1, &mut rng).is_err());
    }

    #[test]
    fn unreachable_pairs_span_components() {
        let g = graph(3, vec![knows(1, 2, SimInstant(0), None)]);
        let b = build_bound_graphs(&g, day());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut pairs = curate_unreachable_pairs(&b, 2, &mut rng).unwrap();
        pairs.sort();
        assert_eq!(
            pairs,
            vec![(PersonId(1), PersonId(3)), (PersonId(2), PersonId(3))]
        );

        let connected = graph(
            3,
            vec![
                knows(1, 2, SimInstant(0), None),
                knows(2, 3, SimInstant(0), None),
            ],
        );
        let b = build_bound_graphs(&connected, day());
        assert!(matches!(
            curate_unreachable_pairs(&b, 1, &mut rng),
            Err(ParamgenError::InsufficientPairs { available: 0, .. })
        ));
    }
}
