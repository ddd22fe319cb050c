use std::collections::{BTreeSet, HashSet, VecDeque};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Barrier;

use parking_lot::Mutex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::stores::{ReadTx, StoreKind, TxStore};
use crate::model::{
    CountryId, Forum, ForumId, KnowsEdge, Lifecycle, LikesEdge, Message, MessageId, MessageKind,
    OpType, Payload, Person, PersonId, SimInstant, TemporalGraph, UpdateOperation,
};
use crate::query::{QueryInstance, QueryResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    TraversalAnomaly,
    CascadeAtomicity,
}

impl Scenario {
    pub const ALL: [Scenario; 2] = [Scenario::TraversalAnomaly, Scenario::CascadeAtomicity];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::TraversalAnomaly => "traversal-anomaly",
            Scenario::CascadeAtomicity => "cascade-atomicity",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn run(self, store: StoreKind, seed: u64) -> RunVerdict {
        match self {
            Scenario::TraversalAnomaly => run_traversal_anomaly(store, seed),
            Scenario::CascadeAtomicity => run_cascade_atomicity(store, seed),
        }
    }
}

/// Outcome of one seeded interleaving.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunVerdict {
    pub seed: u64,
    pub passed: bool,
    /// The forbidden observation, when one was made.
    pub detail: Option<String>,
}

impl RunVerdict {
    fn new(seed: u64, violation: Option<String>) -> Self {
        Self {
            seed,
            passed: violation.is_none(),
            detail: violation,
        }
    }
}

fn t(minute: i64) -> SimInstant {
    SimInstant::from_ymd_hms(2012, 1, 1, 0, 0, 0).plus_millis(minute * 60_000)
}

fn person(id: u64) -> Person {
    Person {
        id: PersonId(id),
        first_name: format!("N{id}"),
        last_name: "Node".into(),
        country_id: CountryId(0),
        university_id: None,
        tag_interests: BTreeSet::new(),
        lifecycle: Lifecycle::created(t(0)),
    }
}

fn knows(a: u64, b: u64, minute: i64) -> KnowsEdge {
    KnowsEdge::new(PersonId(a), PersonId(b), Lifecycle::created(t(minute)))
        .expect("distinct endpoints")
}

fn update(op_type: OpType, minute: i64, payload: Payload) -> UpdateOperation {
    UpdateOperation {
        op_type,
        scheduled_time: t(minute),
        dependency_time: t(minute - 1),
        payload,
    }
}

/// One writer step sequence: either pauses mid-transaction at `mid` (and
/// lets the reader resume there) or completes every write first.
fn traversal_plan(rng: &mut ChaCha8Rng) -> (usize, Option<usize>) {
    let k = rng.gen_range(0..=3);
    let mid = rng.gen_bool(0.5).then(|| rng.gen_range(1..=3));
    (k, mid)
}

/// Chain n1 - n2 - n3 - n4. Reader Ta pins a snapshot and expands nodes
/// breadth-first from n1. After `k` expansions, Tb deletes n2 and Tc adds
/// n5 with edges n3 - n5 - n4. Ta must never see n5 and must report the
/// reachable set of its snapshot.
pub fn run_traversal_anomaly(kind: StoreKind, seed: u64) -> RunVerdict {
    let setup = TemporalGraph {
        persons: (1..=4).map(person).collect(),
        knows: vec![knows(1, 2, 1), knows(2, 3, 1), knows(3, 4, 1)],
        ..TemporalGraph::default()
    };
    let expected: BTreeSet<PersonId> = reachable_in(&setup, PersonId(1));
    let store = kind.load(&setup).expect("scenario setup loads");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (k, mid) = traversal_plan(&mut rng);
    let tb = update(
        OpType::Del1,
        10,
        Payload::RemovePerson {
            person_id: PersonId(2),
        },
    );
    let tc = [
        update(
            OpType::Ins1,
            11,
            Payload::AddPerson(Person {
                lifecycle: Lifecycle::created(t(11)),
                ..person(5)
            }),
        ),
        update(OpType::Ins8, 12, Payload::AddKnows(knows(3, 5, 12))),
        update(OpType::Ins8, 13, Payload::AddKnows(knows(5, 4, 13))),
    ];
    let pause = Barrier::new(2);
    let resume = Barrier::new(2);
    let store: &dyn TxStore = store.as_ref();

    let (observed, reached) = std::thread::scope(|s| {
        let reader = s.spawn(|| {
            let tx = store.begin();
            let mut synced = false;
            let sync = |synced: &mut bool| {
                if !*synced {
                    pause.wait();
                    resume.wait();
                    *synced = true;
                }
            };
            let mut observed = BTreeSet::from([PersonId(1)]);
            let mut reached = BTreeSet::new();
            let mut queue = VecDeque::from([PersonId(1)]);
            let mut expansions = 0;
            while let Some(p) = queue.pop_front() {
                if expansions == k {
                    sync(&mut synced);
                }
                expansions += 1;
                if !tx.person_exists(p) {
                    continue;
                }
                reached.insert(p);
                for f in tx.friends(p) {
                    if observed.insert(f) {
                        queue.push_back(f);
                    }
                }
            }
            sync(&mut synced);
            (observed, reached)
        });
        pause.wait();
        let mut released = false;
        let mut hook = |step: usize| {
            if Some(step) == mid && !released {
                resume.wait();
                released = true;
            }
        };
        store.delete(&tb, &mut hook).expect("Tb commits");
        for op in &tc {
            store.insert(op, &mut |_| {}).expect("Tc commits");
        }
        if !released {
            resume.wait();
        }
        reader.join().expect("reader thread")
    });

    let violation = if observed.contains(&PersonId(5)) {
        Some(format!(
            "Ta observed n5 inserted after its snapshot (k={k}, mid={mid:?})"
        ))
    } else if reached != expected {
        Some(format!(
            "Ta reached {reached:?}, its snapshot has {expected:?} (k={k}, mid={mid:?})"
        ))
    } else {
        None
    };
    RunVerdict::new(seed, violation)
}

/// Reachability over the live knows edges of `g`, independent of any store.
fn reachable_in(g: &TemporalGraph, from: PersonId) -> BTreeSet<PersonId> {
    let mut seen = BTreeSet::from([from]);
    let mut frontier = vec![from];
    while let Some(p) = frontier.pop() {
        for k in &g.knows {
            let other = if k.person1_id == p {
                k.person2_id
            } else if k.person2_id == p {
                k.person1_id
            } else {
                continue;
            };
            if seen.insert(other) {
                frontier.push(other);
            }
        }
    }
    seen
}

const POST: MessageId = MessageId(100);

/// Forum 10 with post 100, a reply chain 101 <- 102 <- 103 below it, and a
/// seeded number of extra replies and likes.
fn thread_setup(rng: &mut ChaCha8Rng) -> (TemporalGraph, Vec<MessageId>, usize) {
    let persons: Vec<Person> = (1..=4).map(person).collect();
    let forum = Forum {
        id: ForumId(10),
        moderator_person_id: PersonId(1),
        lifecycle: Lifecycle::created(t(1)),
    };
    let mut messages = vec![Message {
        id: POST,
        kind: MessageKind::Post,
        creator_person_id: PersonId(1),
        container_forum_id: Some(ForumId(10)),
        reply_to_message_id: None,
        country_id: CountryId(0),
        creation_tag_ids: BTreeSet::new(),
        lifecycle: Lifecycle::created(t(2)),
        root_post_id: POST,
    }];
    let extra = rng.gen_range(0..=6);
    for i in 0..3 + extra {
        let id = 101 + i as u64;
        let parent = if i < 3 {
            MessageId(id - 1)
        } else {
            messages.choose(rng).expect("non-empty").id
        };
        messages.push(Message {
            id: MessageId(id),
            kind: MessageKind::Comment,
            creator_person_id: PersonId(rng.gen_range(1..=4)),
            container_forum_id: None,
            reply_to_message_id: Some(parent),
            country_id: CountryId(0),
            creation_tag_ids: BTreeSet::new(),
            lifecycle: Lifecycle::created(t(3 + i as i64)),
            root_post_id: POST,
        });
    }
    let mut likes = Vec::new();
    for m in &messages {
        for p in 1..=4 {
            if rng.gen_bool(0.2) {
                likes.push(LikesEdge {
                    person_id: PersonId(p),
                    message_id: m.id,
                    lifecycle: Lifecycle::created(t(20)),
                });
            }
        }
    }
    let ids = messages.iter().map(|m| m.id).collect();
    let cascade = messages.len() + likes.len();
    let graph = TemporalGraph {
        persons,
        forums: vec![forum],
        messages,
        likes,
        ..TemporalGraph::default()
    };
    (graph, ids, cascade)
}

/// One read transaction over the thread: every visible comment must have
/// its parent and root post visible, SR6 must resolve for it, and SR2 rows
/// must point at visible root posts.
fn probe(tx: &dyn ReadTx, ids: &[MessageId]) -> Option<String> {
    let mut creators = HashSet::new();
    for &id in ids {
        let Some(m) = tx.message(id) else { continue };
        creators.insert(m.creator_person_id);
        if let Some(parent) = m.reply_to_message_id {
            if tx.message(parent).is_none() {
                return Some(format!("comment {id} visible without its parent {parent}"));
            }
            if tx.message(m.root_post_id).is_none() {
                return Some(format!(
                    "comment {id} visible without its root post {}",
                    m.root_post_id
                ));
            }
        }
        if let Err(e) = tx.query(&QueryInstance::sr6(id)) {
            return Some(format!("SR6 on visible message {id} failed: {e}"));
        }
    }
    for p in creators {
        if let Ok(QueryResult::Sr2(rows)) = tx.query(&QueryInstance::sr2(p)) {
            if let Some(r) = rows.iter().find(|r| tx.message(r.root_post_id).is_none()) {
                return Some(format!(
                    "SR2 row {} points at invisible root {}",
                    r.message_id, r.root_post_id
                ));
            }
        }
    }
    None
}

/// DEL6 removes a post with a reply tree while readers probe. The writer
/// pauses at seeded steps inside the transaction for a synchronized probe;
/// two more readers probe continuously. No probe may see a comment
/// without its ancestors, and the final state must hold none of the thread.
pub fn run_cascade_atomicity(kind: StoreKind, seed: u64) -> RunVerdict {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (setup, ids, cascade) = thread_setup(&mut rng);
    // Pause steps stay below the last write; the first lands while at least
    // two of the three chain comments remain.
    let mut pauses = BTreeSet::from([rng.gen_range(1..=2)]);
    for _ in 0..rng.gen_range(0..=2) {
        pauses.insert(rng.gen_range(1..cascade));
    }
    let store = kind.load(&setup).expect("scenario setup loads");
    let store: &dyn TxStore = store.as_ref();
    let del = update(OpType::Del6, 30, Payload::RemovePost { message_id: POST });
    let (go, done) = (Barrier::new(2), Barrier::new(2));
    let finished = AtomicBool::new(false);
    let violation: Mutex<Option<String>> = Mutex::new(None);
    let report = |v: Option<String>| {
        if let Some(v) = v {
            violation.lock().get_or_insert(v);
        }
    };

    std::thread::scope(|s| {
        s.spawn(|| {
            for _ in 0..pauses.len() {
                go.wait();
                report(probe(store.begin().as_ref(), &ids));
                done.wait();
            }
        });
        for _ in 0..2 {
            s.spawn(|| {
                while !finished.load(Ordering::Acquire) {
                    report(probe(store.begin().as_ref(), &ids));
                    std::thread::yield_now();
                }
            });
        }
        let mut hit = 0;
        let mut hook = |step: usize| {
            if pauses.contains(&step) {
                go.wait();
                done.wait();
                hit += 1;
            }
        };
        let result = store.delete(&del, &mut hook);
        for _ in hit..pauses.len() {
            go.wait();
            done.wait();
        }
        finished.store(true, Ordering::Release);
        if let Err(e) = result {
            report(Some(format!("DEL6 failed: {e}")));
        }
    });

    let after = store.begin();
    if let Some(id) = ids.iter().find(|&&id| after.message(id).is_some()) {
        report(Some(format!("message {id} survived the committed cascade")));
    }
    RunVerdict::new(seed, violation.into_inner())
}
