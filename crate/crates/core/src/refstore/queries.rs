use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet, VecDeque};
use std::sync::Arc;

use super::{Tables, Version};
use crate::model::{
    canonical_pair, root_post_of, Forum, ForumId, HasMemberEdge, KnowsEdge, Lifecycle, LikesEdge,
    Message, MessageId, ModeratorDeletion, Person, PersonId, TemporalGraph, MILLIS_PER_DAY,
};
use crate::query::{
    interaction_weight, CheapestPath, Cr3Row, PersonRef, QueryInstance, QueryParams, QueryResult,
    Sr2Row, Sr6Row, SutError,
};

/// Read view pinned to one commit version.
#[derive(Clone, Copy)]
pub struct StoreSnapshot<'a> {
    t: &'a Tables,
    version: Version,
}

impl<'a> StoreSnapshot<'a> {
    pub(crate) fn new(t: &'a Tables, version: Version) -> Self {
        Self { t, version }
    }

    pub fn version(&self) -> Version {
        self.version
    }

    pub fn person(&self, id: PersonId) -> Option<Arc<Person>> {
        self.t.persons.get(&id, self.version)
    }

    pub fn message(&self, id: MessageId) -> Option<Arc<Message>> {
        self.t.messages.get(&id, self.version)
    }

    pub fn forum(&self, id: ForumId) -> Option<Forum> {
        self.t.forums.get(&id, self.version)
    }

    pub fn friends(&self, id: PersonId) -> Vec<PersonId> {
        self.t.friends.values(&id, self.version)
    }

    pub fn replies(&self, id: MessageId) -> Vec<MessageId> {
        self.t.replies.values(&id, self.version)
    }

    pub fn messages_of(&self, id: PersonId) -> Vec<MessageId> {
        self.t.created.values(&id, self.version)
    }

    pub fn posts_of(&self, id: ForumId) -> Vec<MessageId> {
        self.t.forum_posts.values(&id, self.version)
    }

    pub fn likers_of(&self, id: MessageId) -> Vec<PersonId> {
        self.t.liked_by.values(&id, self.version)
    }

    pub fn members_of(&self, id: ForumId) -> Vec<PersonId> {
        self.t.members.values(&id, self.version)
    }

    /// Direct replies exchanged between two persons, both directions.
    pub fn num_interactions(&self, a: PersonId, b: PersonId) -> u64 {
        canonical_pair(a, b)
            .and_then(|k| self.t.interactions.get(&k, self.version))
            .unwrap_or(0)
    }

    pub fn execute(&self, q: &QueryInstance) -> Result<QueryResult, SutError> {
        match q.params {
            QueryParams::Cr3 {
                person_id,
                country_x_id,
                country_y_id,
                start_date,
                duration_days,
            } => {
                let end = start_date.plus_millis(duration_days as i64 * MILLIS_PER_DAY);
                let alive = |p| self.person(p).ok_or(SutError::UnknownPerson(p));
                alive(person_id)?;
                let mut circle: HashSet<PersonId> = HashSet::new();
                for f in self.friends(person_id) {
                    circle.insert(f);
                    circle.extend(self.friends(f));
                }
                circle.remove(&person_id);
                let mut rows = Vec::new();
                for p in circle {
                    let person = alive(p)?;
                    if person.country_id == country_x_id || person.country_id == country_y_id {
                        continue;
                    }
                    let (mut x, mut y) = (0, 0);
                    for m in self
                        .messages_of(p)
                        .into_iter()
                        .filter_map(|m| self.message(m))
                    {
                        let c = m.lifecycle.creation;
                        if c < start_date || c >= end {
                            continue;
                        }
                        x += u64::from(m.country_id == country_x_id);
                        y += u64::from(m.country_id == country_y_id);
                    }
                    if x > 0 && y > 0 {
                        rows.push(Cr3Row {
                            person_id: p,
                            first_name: person.first_name.clone(),
                            last_name: person.last_name.clone(),
                            x_count: x,
                            y_count: y,
                            count: x + y,
                        });
                    }
                }
                rows.sort_by_key(|r| (Reverse(r.count), r.person_id));
                Ok(QueryResult::Cr3(rows))
            }
            QueryParams::Cr13 {
                person1_id,
                person2_id,
            } => {
                self.require_persons(person1_id, person2_id)?;
                Ok(QueryResult::Cr13(
                    self.hops(person1_id, person2_id).map_or(-1, i64::from),
                ))
            }
            QueryParams::Cr14 {
                person1_id,
                person2_id,
            } => {
                self.require_persons(person1_id, person2_id)?;
                Ok(QueryResult::Cr14(
                    self.cheapest_path(person1_id, person2_id),
                ))
            }
            QueryParams::Sr2 { person_id } => self.sr2(person_id).map(QueryResult::Sr2),
            QueryParams::Sr6 { message_id } => self.sr6(message_id).map(QueryResult::Sr6),
        }
    }

    fn require_persons(&self, a: PersonId, b: PersonId) -> Result<(), SutError> {
        for p in [a, b] {
            if self.person(p).is_none() {
                return Err(SutError::UnknownPerson(p));
            }
        }
        Ok(())
    }

    fn hops(&self, from: PersonId, to: PersonId) -> Option<u32> {
        if from == to {
            return Some(0);
        }
        let mut dist = HashMap::from([(from, 0u32)]);
        let mut queue = VecDeque::from([from]);
        while let Some(p) = queue.pop_front() {
            let d = dist[&p];
            for f in self.friends(p) {
                if f == to {
                    return Some(d + 1);
                }
                if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(f) {
                    e.insert(d + 1);
                    queue.push_back(f);
                }
            }
        }
        None
    }

    fn cheapest_path(&self, from: PersonId, to: PersonId) -> CheapestPath {
        let mut dist: HashMap<PersonId, i64> = HashMap::from([(from, 0)]);
        let mut prev: HashMap<PersonId, PersonId> = HashMap::new();
        let mut heap = BinaryHeap::from([Reverse((0i64, from))]);
        while let Some(Reverse((d, p))) = heap.pop() {
            if d > dist[&p] {
                continue;
            }
            if p == to {
                let mut path = vec![to];
                while let Some(&q) = prev.get(path.last().unwrap()) {
                    path.push(q);
                }
                path.reverse();
                return CheapestPath { weight: d, path };
            }
            for f in self.friends(p) {
                let n = self.num_interactions(p, f);
                if n == 0 {
                    continue;
                }
                let nd = d + interaction_weight(n);
                if dist.get(&f).is_none_or(|&old| nd < old) {
                    dist.insert(f, nd);
                    prev.insert(f, p);
                    heap.push(Reverse((nd, f)));
                }
            }
        }
        CheapestPath {
            weight: -1,
            path: Vec::new(),
        }
    }

    fn sr2(&self, person_id: PersonId) -> Result<Vec<Sr2Row>, SutError> {
        if self.person(person_id).is_none() {
            return Err(SutError::UnknownPerson(person_id));
        }
        let mut msgs: Vec<Arc<Message>> = self
            .messages_of(person_id)
            .into_iter()
            .filter_map(|m| self.message(m))
            .collect();
        msgs.sort_by_key(|m| Reverse((m.lifecycle.creation, m.id)));
        msgs.truncate(10);
        msgs.iter()
            .map(|m| {
                let root = self.message(m.root_post_id).ok_or_else(|| {
                    SutError::Integrity(format!("root post {} of {} missing", m.root_post_id, m.id))
                })?;
                let author = self.person(root.creator_person_id).ok_or_else(|| {
                    SutError::Integrity(format!(
                        "author {} of post {} missing",
                        root.creator_person_id, root.id
                    ))
                })?;
                Ok(Sr2Row {
                    message_id: m.id,
                    creation_date: m.lifecycle.creation,
                    root_post_id: root.id,
                    root_author_id: author.id,
                    root_author_first_name: author.first_name.clone(),
                    root_author_last_name: author.last_name.clone(),
                })
            })
            .collect()
    }

    fn sr6(&self, message_id: MessageId) -> Result<Sr6Row, SutError> {
        let m = self
            .message(message_id)
            .ok_or(SutError::UnknownMessage(message_id))?;
        let root = self.message(m.root_post_id).ok_or_else(|| {
            SutError::Integrity(format!("root post {} of {} missing", m.root_post_id, m.id))
        })?;
        let forum_id = root.container_forum_id.expect("posts have a forum");
        let forum = self
            .forum(forum_id)
            .ok_or_else(|| SutError::Integrity(format!("forum {forum_id} missing")))?;
        let moderator = self.person(forum.moderator_person_id).map(|p| PersonRef {
            id: p.id,
            first_name: p.first_name.clone(),
            last_name: p.last_name.clone(),
        });
        Ok(Sr6Row {
            forum_id,
            moderator,
        })
    }

    /// All live entities, sorted canonically.
    pub fn export(&self) -> TemporalGraph {
        let v = self.version;
        let t = self.t;
        let mut g = TemporalGraph {
            persons: t
                .persons
                .scan(v)
                .into_iter()
                .map(|(_, p)| (*p).clone())
                .collect(),
            knows: t
                .knows
                .scan(v)
                .into_iter()
                .map(|((a, b), c)| KnowsEdge {
                    person1_id: a,
                    person2_id: b,
                    lifecycle: Lifecycle::created(c),
                })
                .collect(),
            forums: t.forums.scan(v).into_iter().map(|(_, f)| f).collect(),
            memberships: t
                .memberships
                .scan(v)
                .into_iter()
                .map(|((f, p), c)| HasMemberEdge {
                    forum_id: f,
                    person_id: p,
                    lifecycle: Lifecycle::created(c),
                })
                .collect(),
            messages: t
                .messages
                .scan(v)
                .into_iter()
                .map(|(_, m)| (*m).clone())
                .collect(),
            likes: t
                .likes
                .scan(v)
                .into_iter()
                .map(|((p, m), c)| LikesEdge {
                    person_id: p,
                    message_id: m,
                    lifecycle: Lifecycle::created(c),
                })
                .collect(),
        };
        g.sort_canonical();
        g
    }

    /// Full-scan integrity check: dangling references, index agreement,
    /// stored root posts and interaction counts.
    pub fn integrity_violations(&self, policy: ModeratorDeletion) -> Vec<String> {
        let g = self.export();
        let mut out = Vec::new();
        let persons: HashSet<PersonId> = g.persons.iter().map(|p| p.id).collect();
        let forums: HashSet<ForumId> = g.forums.iter().map(|f| f.id).collect();
        let messages = g.message_map();
        let mut dangling = |what: String, ok: bool| {
            if !ok {
                out.push(format!("{what} dangles"));
            }
        };
        for k in &g.knows {
            dangling(
                format!("knows {}-{}", k.person1_id, k.person2_id),
                persons.contains(&k.person1_id) && persons.contains(&k.person2_id),
            );
        }
        for f in &g.forums {
            dangling(
                format!("forum {}", f.id),
                policy == ModeratorDeletion::KeepForum || persons.contains(&f.moderator_person_id),
            );
        }
        for m in &g.memberships {
            dangling(
                format!("membership {}/{}", m.forum_id, m.person_id),
                forums.contains(&m.forum_id) && persons.contains(&m.person_id),
            );
        }
        for m in &g.messages {
            let container = match (m.container_forum_id, m.reply_to_message_id) {
                (Some(f), None) => forums.contains(&f),
                (None, Some(p)) => messages.contains_key(&p),
                _ => false,
            };
            dangling(
                format!("message {}", m.id),
                container && persons.contains(&m.creator_person_id),
            );
        }
        for l in &g.likes {
            dangling(
                format!("like {}->{}", l.person_id, l.message_id),
                persons.contains(&l.person_id) && messages.contains_key(&l.message_id),
            );
        }
        for m in &g.messages {
            match root_post_of(m.id, &messages) {
                Ok(r) if r == m.root_post_id => {}
                other => out.push(format!(
                    "message {} root {} but chain gives {other:?}",
                    m.id, m.root_post_id
                )),
            }
        }
        let mut counts: HashMap<(PersonId, PersonId), u64> = HashMap::new();
        for m in &g.messages {
            if let Some(parent) = m.reply_to_message_id.and_then(|p| messages.get(&p)) {
                if let Some(k) = canonical_pair(m.creator_person_id, parent.creator_person_id) {
                    *counts.entry(k).or_default() += 1;
                }
            }
        }
        let stored: HashMap<_, _> = self.t.interactions.scan(self.version).into_iter().collect();
        if stored != counts {
            out.push(format!(
                "interaction counts diverge: {} stored pairs, {} recounted",
                stored.len(),
                counts.len()
            ));
        }
        for k in &g.knows {
            let (a, b) = k.key();
            if !self.friends(a).contains(&b) || !self.friends(b).contains(&a) {
                out.push(format!("knows {a}-{b} missing from adjacency"));
            }
        }
        let adjacency: usize = g.persons.iter().map(|p| self.friends(p.id).len()).sum();
        if adjacency != 2 * g.knows.len() {
            out.push(format!(
                "adjacency holds {adjacency} entries for {} knows edges",
                g.knows.len()
            ));
        }
        out
    }
}
