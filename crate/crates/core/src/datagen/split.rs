use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::config::GenConfig;
use crate::model::{
    ForumId, Lifecycle, MessageId, ModeratorDeletion, OpType, Payload, PersonId, SimInstant,
    TemporalGraph, UpdateOperation,
};

/// Initial snapshot plus the time-ordered update stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SnapshotAndStream {
    pub cutoff: SimInstant,
    /// Entities alive at the cutoff, deletion instants cleared.
    pub snapshot: TemporalGraph,
    pub stream: Vec<UpdateOperation>,
    /// Entities both created and deleted before the cutoff; they appear in
    /// neither the snapshot nor the stream.
    pub expired_before_cutoff: usize,
}

impl SnapshotAndStream {
    pub fn insert_count(&self) -> usize {
        self.stream.iter().filter(|o| o.op_type.is_insert()).count()
    }

    pub fn delete_count(&self) -> usize {
        self.stream.len() - self.insert_count()
    }
}

/// Identity of any entity, used for cascade bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) enum EntityKey {
    Person(PersonId),
    Knows(PersonId, PersonId),
    Forum(ForumId),
    Membership(ForumId, PersonId),
    Message(MessageId),
    Like(PersonId, MessageId),
}

impl EntityKey {
    fn sort_id(self) -> (u64, u64) {
        match self {
            EntityKey::Person(p) => (p.0, 0),
            EntityKey::Knows(a, b) => (a.0, b.0),
            EntityKey::Forum(f) => (f.0, 0),
            EntityKey::Membership(f, p) => (f.0, p.0),
            EntityKey::Message(m) => (m.0, 0),
            EntityKey::Like(p, m) => (p.0, m.0),
        }
    }
}

/// Lifecycles and cascade edges of every entity in a temporal graph.
struct Index {
    lifecycles: HashMap<EntityKey, Lifecycle>,
    children: HashMap<EntityKey, Vec<EntityKey>>,
}

impl Index {
    fn build(g: &TemporalGraph, policy: ModeratorDeletion) -> Self {
        let mut lifecycles = HashMap::new();
        let mut children: HashMap<EntityKey, Vec<EntityKey>> = HashMap::new();
        let mut link =
            |parent: EntityKey, child: EntityKey| children.entry(parent).or_default().push(child);
        for p in &g.persons {
            lifecycles.insert(EntityKey::Person(p.id), p.lifecycle);
        }
        for k in &g.knows {
            let key = EntityKey::Knows(k.person1_id, k.person2_id);
            lifecycles.insert(key, k.lifecycle);
            link(EntityKey::Person(k.person1_id), key);
            link(EntityKey::Person(k.person2_id), key);
        }
        for f in &g.forums {
            let key = EntityKey::Forum(f.id);
            lifecycles.insert(key, f.lifecycle);
            if policy == ModeratorDeletion::DeleteForum {
                link(EntityKey::Person(f.moderator_person_id), key);
            }
        }
        for m in &g.memberships {
            let key = EntityKey::Membership(m.forum_id, m.person_id);
            lifecycles.insert(key, m.lifecycle);
            link(EntityKey::Forum(m.forum_id), key);
            link(EntityKey::Person(m.person_id), key);
        }
        for m in &g.messages {
            let key = EntityKey::Message(m.id);
            lifecycles.insert(key, m.lifecycle);
            link(EntityKey::Person(m.creator_person_id), key);
            if let Some(f) = m.container_forum_id {
                link(EntityKey::Forum(f), key);
            }
            if let Some(parent) = m.reply_to_message_id {
                link(EntityKey::Message(parent), key);
            }
        }
        for l in &g.likes {
            let key = EntityKey::Like(l.person_id, l.message_id);
            lifecycles.insert(key, l.lifecycle);
            link(EntityKey::Person(l.person_id), key);
            link(EntityKey::Message(l.message_id), key);
        }
        Self {
            lifecycles,
            children,
        }
    }

    fn parents_map(&self) -> HashMap<EntityKey, Vec<EntityKey>> {
        let mut parents: HashMap<EntityKey, Vec<EntityKey>> = HashMap::new();
        for (&p, cs) in &self.children {
            for &c in cs {
                parents.entry(c).or_default().push(p);
            }
        }
        parents
    }

    /// All structural descendants of `root`, regardless of lifetime.
    fn descendants(&self, root: EntityKey) -> Vec<EntityKey> {
        let mut seen = HashSet::from([root]);
        let mut stack = vec![root];
        let mut out = Vec::new();
        while let Some(k) = stack.pop() {
            for &c in self.children.get(&k).into_iter().flatten() {
                if seen.insert(c) {
                    out.push(c);
                    stack.push(c);
                }
            }
        }
        out
    }
}

/// Splits the temporal graph at the configured cutoff.
///
/// Creations at or after the cutoff become inserts. A deletion at or after the
/// cutoff becomes a delete only for cascade roots; entities that die together
/// with a parent are removed by the store's cascade.
pub fn split_at_cutoff(graph: &TemporalGraph, config: &GenConfig) -> SnapshotAndStream {
    let cutoff = config.cutoff();
    let policy = config.moderator_deletion;
    let index = Index::build(graph, policy);
    let parents = index.parents_map();

    let mut snapshot = TemporalGraph::default();
    let mut expired = 0;
    let mut stream: Vec<(EntityKey, UpdateOperation)> = Vec::new();

    let creation_of = |k: EntityKey| index.lifecycles[&k].creation;
    let max_creation = |keys: &[EntityKey]| {
        keys.iter()
            .map(|&k| creation_of(k))
            .max()
            .unwrap_or(SimInstant::MIN)
    };

    let mut handle = |key: EntityKey,
                      lc: Lifecycle,
                      ins: (OpType, Payload, SimInstant),
                      del: (OpType, Payload)| {
        if lc.creation < cutoff {
            match lc.deletion {
                Some(d) if d < cutoff => {
                    expired += 1;
                    return false;
                }
                _ => {}
            }
        } else {
            let (op_type, payload, dependency_time) = ins;
            stream.push((
                key,
                UpdateOperation {
                    op_type,
                    scheduled_time: lc.creation,
                    dependency_time,
                    payload,
                },
            ));
        }
        if let Some(d) = lc.deletion {
            let inherited = parents
                .get(&key)
                .into_iter()
                .flatten()
                .any(|p| index.lifecycles[p].deletion == Some(d));
            if !inherited {
                let mut dep = lc.creation;
                for k in index.descendants(key) {
                    let dlc = index.lifecycles[&k];
                    dep = dep.max(dlc.creation);
                    if let Some(dd) = dlc.deletion.filter(|&dd| dd < d) {
                        dep = dep.max(dd);
                    }
                }
                let (op_type, payload) = del;
                stream.push((
                    key,
                    UpdateOperation {
                        op_type,
                        scheduled_time: d,
                        dependency_time: dep,
                        payload,
                    },
                ));
            }
        }
        lc.creation < cutoff
    };

    let start = config.simulation_start;
    for p in &graph.persons {
        let key = EntityKey::Person(p.id);
        let mut ins = p.clone();
        ins.lifecycle.deletion = None;
        if handle(
            key,
            p.lifecycle,
            (OpType::Ins1, Payload::AddPerson(ins.clone()), start),
            (OpType::Del1, Payload::RemovePerson { person_id: p.id }),
        ) {
            snapshot.persons.push(ins);
        }
    }
    for k in &graph.knows {
        let key = EntityKey::Knows(k.person1_id, k.person2_id);
        let mut ins = *k;
        ins.lifecycle.deletion = None;
        let dep = max_creation(&[
            EntityKey::Person(k.person1_id),
            EntityKey::Person(k.person2_id),
        ]);
        let del = Payload::RemoveKnows {
            person1_id: k.person1_id,
            person2_id: k.person2_id,
        };
        if handle(
            key,
            k.lifecycle,
            (OpType::Ins8, Payload::AddKnows(ins), dep),
            (OpType::Del8, del),
        ) {
            snapshot.knows.push(ins);
        }
    }
    for f in &graph.forums {
        let key = EntityKey::Forum(f.id);
        let mut ins = *f;
        ins.lifecycle.deletion = None;
        let dep = creation_of(EntityKey::Person(f.moderator_person_id));
        if handle(
            key,
            f.lifecycle,
            (OpType::Ins4, Payload::AddForum(ins), dep),
            (OpType::Del4, Payload::RemoveForum { forum_id: f.id }),
        ) {
            snapshot.forums.push(ins);
        }
    }
    for m in &graph.memberships {
        let key = EntityKey::Membership(m.forum_id, m.person_id);
        let mut ins = *m;
        ins.lifecycle.deletion = None;
        let dep = max_creation(&[EntityKey::Forum(m.forum_id), EntityKey::Person(m.person_id)]);
        let del = Payload::RemoveMembership {
            forum_id: m.forum_id,
            person_id: m.person_id,
        };
        if handle(
            key,
            m.lifecycle,
            (OpType::Ins5, Payload::AddMembership(ins), dep),
            (OpType::Del5, del),
        ) {
            snapshot.memberships.push(ins);
        }
    }
    for m in &graph.messages {
        let key = EntityKey::Message(m.id);
        let mut ins = m.clone();
        ins.lifecycle.deletion = None;
        let parent = match (m.container_forum_id, m.reply_to_message_id) {
            (Some(f), _) => EntityKey::Forum(f),
            (None, Some(r)) => EntityKey::Message(r),
            (None, None) => EntityKey::Person(m.creator_person_id),
        };
        let dep = max_creation(&[EntityKey::Person(m.creator_person_id), parent]);
        let (ins_op, payload, del) = if m.is_post() {
            (
                OpType::Ins6,
                Payload::AddPost(ins.clone()),
                (OpType::Del6, Payload::RemovePost { message_id: m.id }),
            )
        } else {
            (
                OpType::Ins7,
                Payload::AddComment(ins.clone()),
                (OpType::Del7, Payload::RemoveComment { message_id: m.id }),
            )
        };
        if handle(key, m.lifecycle, (ins_op, payload, dep), del) {
            snapshot.messages.push(ins);
        }
    }
    let is_post: HashMap<MessageId, bool> =
        graph.messages.iter().map(|m| (m.id, m.is_post())).collect();
    for l in &graph.likes {
        let key = EntityKey::Like(l.person_id, l.message_id);
        let mut ins = *l;
        ins.lifecycle.deletion = None;
        let dep = max_creation(&[
            EntityKey::Person(l.person_id),
            EntityKey::Message(l.message_id),
        ]);
        let on_post = is_post.get(&l.message_id).copied().unwrap_or(true);
        let (ins_op, del_op) = if on_post {
            (OpType::Ins2, OpType::Del2)
        } else {
            (OpType::Ins3, OpType::Del3)
        };
        let del = Payload::RemoveLike {
            person_id: l.person_id,
            message_id: l.message_id,
        };
        if handle(
            key,
            l.lifecycle,
            (ins_op, Payload::AddLike(ins), dep),
            (del_op, del),
        ) {
            snapshot.likes.push(ins);
        }
    }

    stream.sort_by_key(|(key, op)| {
        (
            op.scheduled_time,
            op.op_type.is_delete(),
            op.op_type,
            key.sort_id(),
        )
    });
    snapshot.sort_canonical();
    SnapshotAndStream {
        cutoff,
        snapshot,
        stream: stream.into_iter().map(|(_, op)| op).collect(),
        expired_before_cutoff: expired,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::generate_temporal_graph;
    use crate::model::{CountryId, KnowsEdge, Person, MILLIS_PER_DAY};
    use std::collections::BTreeSet;

    fn person(id: u64, c: SimInstant, d: Option<SimInstant>) -> Person {
        Person {
            id: PersonId(id),
            first_name: "A".into(),
            last_name: "B".into(),
            country_id: CountryId(0),
            university_id: None,
            tag_interests: BTreeSet::new(),
            lifecycle: Lifecycle::new(c, d),
        }
    }

    #[test]
    fn entity_created_and_deleted_after_cutoff_yields_ins_then_del() {
        let cfg = GenConfig::default();
        let cutoff = cfg.cutoff();
        let g = TemporalGraph {
            persons: vec![person(1, cutoff + 1000, Some(cutoff + 5 * MILLIS_PER_DAY))],
            ..Default::default()
        };
        let s = split_at_cutoff(&g, &cfg);
        assert!(s.snapshot.is_empty());
        let kinds: Vec<_> = s.stream.iter().map(|o| o.op_type).collect();
        assert_eq!(kinds, vec![OpType::Ins1, OpType::Del1]);
        assert!(s.stream[0].scheduled_time < s.stream[1].scheduled_time);
    }

    #[test]
    fn creation_exactly_at_cutoff_goes_to_stream() {
        let cfg = GenConfig::default();
        let cutoff = cfg.cutoff();
        let g = TemporalGraph {
            persons: vec![person(1, cutoff, None)],
            ..Default::default()
        };
        let s = split_at_cutoff(&g, &cfg);
        assert!(s.snapshot.persons.is_empty());
        assert_eq!(s.stream.len(), 1);
    }

    #[test]
    fn cascaded_children_get_no_delete_op() {
        let cfg = GenConfig::default();
        let cutoff = cfg.cutoff();
        let d = cutoff + MILLIS_PER_DAY;
        let g = TemporalGraph {
            persons: vec![
                person(1, SimInstant(0), Some(d)),
                person(2, SimInstant(0), None),
            ],
            knows: vec![KnowsEdge::new(
                PersonId(1),
                PersonId(2),
                Lifecycle::new(SimInstant(50_000), Some(d)),
            )
            .unwrap()],
            ..Default::default()
        };
        let s = split_at_cutoff(&g, &cfg);
        assert_eq!(s.snapshot.knows.len(), 1);
        assert_eq!(s.stream.len(), 1);
        assert_eq!(s.stream[0].op_type, OpType::Del1);
        // dependency covers the knows edge's creation
        assert_eq!(s.stream[0].dependency_time, SimInstant(50_000));
    }

    #[test]
    fn conservation_holds_on_generated_graph() {
        let cfg = GenConfig::with_persons(5, 300);
        let g = generate_temporal_graph(&cfg).unwrap();
        let s = split_at_cutoff(&g, &cfg);
        assert_eq!(
            s.snapshot.counts().total() + s.expired_before_cutoff + s.insert_count(),
            g.counts().total()
        );
        assert!(s.stream.iter().all(|o| o.scheduled_time >= s.cutoff));
        assert!(s
            .stream
            .windows(2)
            .all(|w| w[0].scheduled_time <= w[1].scheduled_time));
        assert!(s.stream.iter().all(|o| o.payload.admits(o.op_type)));
    }
}
