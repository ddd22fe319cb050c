mod common;

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use snb_core::datagen::{generate_dataset, write_graph, GenConfig};
use snb_core::model::{
    CountryId, Forum, ForumId, KnowsEdge, Lifecycle, Message, MessageId, MessageKind,
    ModeratorDeletion, OpType, Payload, Person, PersonId, SimInstant, TemporalGraph,
    UpdateOperation,
};
use snb_core::query::{
    interaction_weight, QueryInstance, QueryParams, QueryResult, QueryVariant, SystemUnderTest,
};
use snb_core::refstore::naive::NaiveStore;
use snb_core::refstore::{EntityRef, RefStore};

fn dataset(
    seed: u64,
    n: usize,
    policy: ModeratorDeletion,
) -> (
    GenConfig,
    TemporalGraph,
    snb_core::datagen::SnapshotAndStream,
) {
    let mut cfg = GenConfig::with_persons(seed, n);
    cfg.moderator_deletion = policy;
    let (g, split) = generate_dataset(&cfg).unwrap();
    (cfg, g, split)
}

#[test]
fn bulk_loaded_counts_equal_file_line_counts() {
    let (_, _, split) = dataset(5, 500, ModeratorDeletion::DeleteForum);
    let dir = tempfile::tempdir().unwrap();
    write_graph(dir.path(), &split.snapshot).unwrap();
    let lines = |f: &str| {
        fs::read_to_string(dir.path().join(f))
            .unwrap()
            .lines()
            .count()
            - 1
    };
    let store = RefStore::bulk_load_dir(dir.path(), ModeratorDeletion::DeleteForum).unwrap();
    let c = store.export().counts();
    assert_eq!(c.persons, lines("person.csv"));
    assert_eq!(c.knows, lines("knows.csv"));
    assert_eq!(c.forums, lines("forum.csv"));
    assert_eq!(c.memberships, lines("has_member.csv"));
    assert_eq!(c.posts, lines("post.csv"));
    assert_eq!(c.comments, lines("comment.csv"));
    assert_eq!(c.likes, lines("likes.csv"));
    assert!(c.persons > 400);
    assert!(store
        .snapshot()
        .integrity_violations(ModeratorDeletion::DeleteForum)
        .is_empty());
}

#[test]
fn queries_match_the_naive_evaluator() {
    let (_, _, split) = dataset(11, 500, ModeratorDeletion::DeleteForum);
    let store = RefStore::bulk_load(&split.snapshot, ModeratorDeletion::DeleteForum).unwrap();
    let naive = NaiveStore::new(split.snapshot.clone(), ModeratorDeletion::DeleteForum);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut non_empty_cr3 = 0;
    let mut reachable = 0;
    for q in common::random_queries(&split.snapshot, &mut rng, 100) {
        let (a, b) = (
            store.execute_query(&q).unwrap(),
            naive.execute_query(&q).unwrap(),
        );
        assert!(a.equivalent(&b), "{q:?}\nstore: {a:?}\nnaive: {b:?}");
        match a {
            QueryResult::Cr3(rows) if !rows.is_empty() => non_empty_cr3 += 1,
            QueryResult::Cr14(p) if p.weight > 0 => reachable += 1,
            _ => {}
        }
    }
    assert!(
        non_empty_cr3 >= 5,
        "only {non_empty_cr3} non-empty CR3 results"
    );
    assert!(reachable >= 5, "only {reachable} reachable CR14 pairs");
}

/// Tiny graph with random knows edges and reply traffic in one forum.
fn small_graph(rng: &mut ChaCha8Rng, n: u64) -> TemporalGraph {
    let lc = Lifecycle::created(SimInstant(0));
    let mut g = TemporalGraph::default();
    for i in 1..=n {
        g.persons.push(Person {
            id: PersonId(i),
            first_name: String::new(),
            last_name: String::new(),
            country_id: CountryId(0),
            university_id: None,
            tag_interests: BTreeSet::new(),
            lifecycle: lc,
        });
    }
    for a in 1..=n {
        for b in a + 1..=n {
            if rng.gen_bool(0.45) {
                g.knows
                    .push(KnowsEdge::new(PersonId(a), PersonId(b), lc).unwrap());
            }
        }
    }
    g.forums.push(Forum {
        id: ForumId(100),
        moderator_person_id: PersonId(1),
        lifecycle: lc,
    });
    let mut next = 1000;
    for _ in 0..rng.gen_range(1..8) {
        next += 1;
        let creator = PersonId(rng.gen_range(1..=n));
        g.messages.push(Message {
            id: MessageId(next),
            kind: MessageKind::Post,
            creator_person_id: creator,
            container_forum_id: Some(ForumId(100)),
            reply_to_message_id: None,
            country_id: CountryId(0),
            creation_tag_ids: BTreeSet::new(),
            lifecycle: lc,
            root_post_id: MessageId(next),
        });
    }
    for _ in 0..rng.gen_range(0..60) {
        let parent = g.messages.choose(rng).unwrap().id;
        next += 1;
        g.messages.push(Message {
            id: MessageId(next),
            kind: MessageKind::Comment,
            creator_person_id: PersonId(rng.gen_range(1..=n)),
            container_forum_id: None,
            reply_to_message_id: Some(parent),
            country_id: CountryId(0),
            creation_tag_ids: BTreeSet::new(),
            lifecycle: lc,
            root_post_id: MessageId(0),
        });
    }
    g
}

/// Minimum total weight over all simple paths of at most six hops.
fn enumerate_cheapest(
    weights: &HashMap<(PersonId, PersonId), i64>,
    a: PersonId,
    b: PersonId,
) -> Option<i64> {
    fn go(
        w: &HashMap<(PersonId, PersonId), i64>,
        at: PersonId,
        to: PersonId,
        on_path: &mut Vec<PersonId>,
        cost: i64,
        best: &mut Option<i64>,
    ) {
        if at == to {
            *best = Some(best.map_or(cost, |b| b.min(cost)));
            return;
        }
        if on_path.len() > 6 {
            return;
        }
        for (&(x, y), &c) in w {
            if x == at && !on_path.contains(&y) {
                on_path.push(y);
                go(w, y, to, on_path, cost + c, best);
                on_path.pop();
            }
        }
    }
    let mut best = None;
    go(weights, a, b, &mut vec![a], 0, &mut best);
    best
}

#[test]
fn cheapest_paths_match_exhaustive_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut found = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(2..=7);
        let g = small_graph(&mut rng, n);
        let store = RefStore::bulk_load(&g, ModeratorDeletion::DeleteForum).unwrap();
        let creator: HashMap<MessageId, PersonId> = g
            .messages
            .iter()
            .map(|m| (m.id, m.creator_person_id))
            .collect();
        let mut replies: HashMap<(PersonId, PersonId), u64> = HashMap::new();
        for m in &g.messages {
            if let Some(p) = m.reply_to_message_id {
                *replies
                    .entry((m.creator_person_id, creator[&p]))
                    .or_default() += 1;
            }
        }
        let mut weights = HashMap::new();
        for k in &g.knows {
            let (x, y) = (k.person1_id, k.person2_id);
            let n = replies.get(&(x, y)).unwrap_or(&0) + replies.get(&(y, x)).unwrap_or(&0);
            if n > 0 {
                weights.insert((x, y), interaction_weight(n));
                weights.insert((y, x), interaction_weight(n));
            }
        }
        let (a, b) = (
            PersonId(rng.gen_range(1..=n)),
            PersonId(rng.gen_range(1..=n)),
        );
        let q = QueryInstance::new(
            QueryVariant::Cr14a,
            QueryParams::Cr14 {
                person1_id: a,
                person2_id: b,
            },
        );
        let QueryResult::Cr14(path) = store.execute_query(&q).unwrap() else {
            unreachable!()
        };
        match enumerate_cheapest(&weights, a, b) {
            None => assert_eq!(path.weight, -1, "{a}->{b}"),
            Some(best) => {
                found += 1;
                assert_eq!(path.weight, best, "{a}->{b}");
                assert_eq!((path.path.first(), path.path.last()), (Some(&a), Some(&b)));
                let along: i64 = path.path.windows(2).map(|w| weights[&(w[0], w[1])]).sum();
                assert_eq!(along, best);
            }
        }
    }
    assert!(found > 300, "only {found} connected instances");
}

/// Messages reachable from `root` over reply edges, root included.
fn reply_closure(g: &TemporalGraph, root: MessageId) -> BTreeSet<MessageId> {
    let mut set = BTreeSet::from([root]);
    loop {
        let before = set.len();
        for m in &g.messages {
            if m.reply_to_message_id.is_some_and(|p| set.contains(&p)) {
                set.insert(m.id);
            }
        }
        if set.len() == before {
            return set;
        }
    }
}

fn del(op_type: OpType, payload: Payload) -> UpdateOperation {
    UpdateOperation {
        op_type,
        scheduled_time: SimInstant(0),
        dependency_time: SimInstant(0),
        payload,
    }
}

#[test]
fn message_cascades_equal_the_reply_closure() {
    let (_, _, split) = dataset(23, 300, ModeratorDeletion::DeleteForum);
    let g = &split.snapshot;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let parents: HashSet<MessageId> = g
        .messages
        .iter()
        .filter_map(|m| m.reply_to_message_id)
        .collect();
    let threads: Vec<&Message> = g
        .messages
        .iter()
        .filter(|m| parents.contains(&m.id))
        .collect();
    let mut big = 0;
    for i in 0..60 {
        let store = RefStore::bulk_load(g, ModeratorDeletion::DeleteForum).unwrap();
        let root = if i % 2 == 0 {
            *threads.choose(&mut rng).unwrap()
        } else {
            g.messages.choose(&mut rng).unwrap()
        };
        let op = match root.kind {
            MessageKind::Post => del(
                OpType::Del6,
                Payload::RemovePost {
                    message_id: root.id,
                },
            ),
            MessageKind::Comment => del(
                OpType::Del7,
                Payload::RemoveComment {
                    message_id: root.id,
                },
            ),
        };
        let out = store.apply_delete(&op).unwrap();
        let removed: BTreeSet<MessageId> = out
            .removed
            .iter()
            .filter_map(|e| match e {
                EntityRef::Message(m) => Some(*m),
                _ => None,
            })
            .collect();
        let expected = reply_closure(g, root.id);
        assert_eq!(removed, expected);
        let likes = g
            .likes
            .iter()
            .filter(|l| expected.contains(&l.message_id))
            .count();
        assert_eq!(out.removed.len(), expected.len() + likes);
        big += usize::from(expected.len() > 2);
        assert!(store
            .snapshot()
            .integrity_violations(ModeratorDeletion::DeleteForum)
            .is_empty());
    }
    assert!(big > 5);
}

#[test]
fn person_and_forum_cascades_match_the_naive_store() {
    for policy in [ModeratorDeletion::DeleteForum, ModeratorDeletion::KeepForum] {
        let (_, _, split) = dataset(29, 200, policy);
        let g = &split.snapshot;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for i in 0..30 {
            let op = if i % 3 == 0 {
                del(
                    OpType::Del4,
                    Payload::RemoveForum {
                        forum_id: g.forums.choose(&mut rng).unwrap().id,
                    },
                )
            } else {
                del(
                    OpType::Del1,
                    Payload::RemovePerson {
                        person_id: g.persons.choose(&mut rng).unwrap().id,
                    },
                )
            };
            let store = RefStore::bulk_load(g, policy).unwrap();
            let naive = NaiveStore::new(g.clone(), policy);
            let a = store.execute_update(&op).unwrap();
            let b = naive.execute_update(&op).unwrap();
            assert_eq!(a.cascade_size, b.cascade_size, "{op:?}");
            assert!(store.export() == naive.export(), "{policy:?} {op:?}");
            assert!(store.snapshot().integrity_violations(policy).is_empty());
        }
    }
}

#[test]
fn replaying_the_stream_reproduces_the_final_state() {
    for policy in [ModeratorDeletion::DeleteForum, ModeratorDeletion::KeepForum] {
        let (cfg, graph, split) = dataset(31, 300, policy);
        let store = RefStore::bulk_load(&split.snapshot, policy).unwrap();
        for (i, op) in split.stream.iter().enumerate() {
            store
                .execute_update(op)
                .unwrap_or_else(|e| panic!("op {i} {op:?}: {e}"));
            if i % 500 == 0 {
                assert_eq!(
                    store.snapshot().integrity_violations(policy),
                    Vec::<String>::new(),
                    "after op {i}"
                );
            }
        }
        assert!(store.snapshot().integrity_violations(policy).is_empty());
        assert!(
            store.export() == graph.state_at(cfg.simulation_end),
            "{policy:?}: replayed state diverges"
        );
        assert_eq!(
            store.current_commit_version(),
            1 + split.stream.len() as u64
        );
    }
}

#[test]
fn reference_and_naive_stores_agree_along_the_stream() {
    let (_, _, split) = dataset(37, 200, ModeratorDeletion::DeleteForum);
    let store = RefStore::bulk_load(&split.snapshot, ModeratorDeletion::DeleteForum).unwrap();
    let naive = NaiveStore::new(split.snapshot.clone(), ModeratorDeletion::DeleteForum);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let checkpoints: HashSet<usize> = (0..split.stream.len())
        .step_by(split.stream.len() / 8 + 1)
        .collect();
    for (i, op) in split.stream.iter().enumerate() {
        let (a, b) = (
            store.execute_update(op).unwrap(),
            naive.execute_update(op).unwrap(),
        );
        assert_eq!(a.cascade_size, b.cascade_size, "op {i}");
        if checkpoints.contains(&i) {
            let live = store.export();
            for q in common::random_queries(&live, &mut rng, 10) {
                let (x, y) = (
                    store.execute_query(&q).unwrap(),
                    naive.execute_query(&q).unwrap(),
                );
                assert!(x.equivalent(&y), "op {i} {q:?}");
            }
        }
    }
    assert!(store.export() == naive.export());
}
