//! In-memory multi-version store implementing the benchmark queries and
//! updates. Writers serialize on a commit lock; readers pin the last
//! published commit version and never block.

pub mod naive;
mod queries;
mod versioned;

use std::collections::HashSet;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::Mutex;

pub use queries::StoreSnapshot;
pub use versioned::{Version, VersionedMap, VersionedMultiMap};

use crate::datagen::{read_graph, DatagenError};
use crate::model::{
    canonical_pair, Forum, ForumId, HasMemberEdge, KnowsEdge, Lifecycle, LikesEdge, Message,
    MessageId, MessageKind, ModeratorDeletion, OpType, Payload, Person, PersonId, SimInstant,
    TemporalGraph, UpdateOperation,
};
use crate::query::{QueryInstance, QueryResult, SutError, SystemUnderTest, UpdateOutcome};

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error(transparent)]
    Parse(#[from] DatagenError),
    #[error(transparent)]
    Integrity(#[from] SutError),
}

/// One stored entity, as addressed by the cascade.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EntityRef {
    Person(PersonId),
    Knows(PersonId, PersonId),
    Forum(ForumId),
    Membership(ForumId, PersonId),
    Message(MessageId),
    Like(PersonId, MessageId),
}

impl EntityRef {
    pub fn is_node(self) -> bool {
        matches!(
            self,
            EntityRef::Person(_) | EntityRef::Forum(_) | EntityRef::Message(_)
        )
    }

    /// The cascade root addressed by a delete payload.
    pub fn delete_root(payload: &Payload) -> Option<EntityRef> {
        Some(match *payload {
            Payload::RemovePerson { person_id } => EntityRef::Person(person_id),
            Payload::RemoveLike {
                person_id,
                message_id,
            } => EntityRef::Like(person_id, message_id),
            Payload::RemoveForum { forum_id } => EntityRef::Forum(forum_id),
            Payload::RemoveMembership {
                forum_id,
                person_id,
            } => EntityRef::Membership(forum_id, person_id),
            Payload::RemovePost { message_id } | Payload::RemoveComment { message_id } => {
                EntityRef::Message(message_id)
            }
            Payload::RemoveKnows {
                person1_id,
                person2_id,
            } => {
                let (a, b) = canonical_pair(person1_id, person2_id)?;
                EntityRef::Knows(a, b)
            }
            _ => return None,
        })
    }
}

impl std::fmt::Display for EntityRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EntityRef::Person(p) => write!(f, "person {p}"),
            EntityRef::Knows(a, b) => write!(f, "knows {a}-{b}"),
            EntityRef::Forum(x) => write!(f, "forum {x}"),
            EntityRef::Membership(x, p) => write!(f, "membership {x}/{p}"),
            EntityRef::Message(m) => write!(f, "message {m}"),
            EntityRef::Like(p, m) => write!(f, "like {p}->{m}"),
        }
    }
}

/// Result of a committed delete.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeleteOutcome {
    pub version: Version,
    /// Every removed entity, root first.
    pub removed: Vec<EntityRef>,
}

#[derive(Debug, Default)]
pub(crate) struct Tables {
    pub persons: VersionedMap<PersonId, Arc<Person>>,
    pub friends: VersionedMultiMap<PersonId, PersonId>,
    /// Canonical pair to creation instant.
    pub knows: VersionedMap<(PersonId, PersonId), SimInstant>,
    pub forums: VersionedMap<ForumId, Forum>,
    pub moderated: VersionedMultiMap<PersonId, ForumId>,
    pub memberships: VersionedMap<(ForumId, PersonId), SimInstant>,
    pub members: VersionedMultiMap<ForumId, PersonId>,
    pub member_of: VersionedMultiMap<PersonId, ForumId>,
    pub messages: VersionedMap<MessageId, Arc<Message>>,
    pub created: VersionedMultiMap<PersonId, MessageId>,
    pub replies: VersionedMultiMap<MessageId, MessageId>,
    pub forum_posts: VersionedMultiMap<ForumId, MessageId>,
    pub likes: VersionedMap<(PersonId, MessageId), SimInstant>,
    pub liked_by: VersionedMultiMap<MessageId, PersonId>,
    pub likes_of: VersionedMultiMap<PersonId, MessageId>,
    /// Direct replies between a canonical person pair, both directions.
    /// Absent when zero.
    pub interactions: VersionedMap<(PersonId, PersonId), u64>,
}

/// Write-side context of one transaction.
struct Tx<'a> {
    t: &'a Tables,
    version: Version,
    steps: usize,
    hook: &'a mut dyn FnMut(usize),
}

impl Tx<'_> {
    fn step(&mut self) {
        self.steps += 1;
        (self.hook)(self.steps);
    }

    fn need(&self, ok: bool, what: impl FnOnce() -> String) -> Result<(), SutError> {
        if ok {
            Ok(())
        } else {
            Err(SutError::DependencyMissing(what()))
        }
    }

    fn fresh(&self, exists: bool, what: impl FnOnce() -> String) -> Result<(), SutError> {
        if exists {
            Err(SutError::Duplicate(what()))
        } else {
            Ok(())
        }
    }

    fn add_person(&mut self, p: &Person) -> Result<(), SutError> {
        let v = self.version;
        self.fresh(self.t.persons.contains(&p.id, v), || {
            format!("person {}", p.id)
        })?;
        let mut p = p.clone();
        p.lifecycle = Lifecycle::created(p.lifecycle.creation);
        self.t.persons.insert(p.id, Arc::new(p), v);
        self.step();
        Ok(())
    }

    fn add_knows(&mut self, k: &KnowsEdge) -> Result<(), SutError> {
        let v = self.version;
        let Some((a, b)) = canonical_pair(k.person1_id, k.person2_id) else {
            return Err(SutError::Integrity(format!(
                "self-loop knows on {}",
                k.person1_id
            )));
        };
        self.need(self.t.persons.contains(&a, v), || {
            format!("person {a} for knows {a}-{b}")
        })?;
        self.need(self.t.persons.contains(&b, v), || {
            format!("person {b} for knows {a}-{b}")
        })?;
        self.fresh(self.t.knows.contains(&(a, b), v), || {
            format!("knows {a}-{b}")
        })?;
        self.t.knows.insert((a, b), k.lifecycle.creation, v);
        self.step();
        self.t.friends.add(a, b, v);
        self.t.friends.add(b, a, v);
        self.step();
        Ok(())
    }

    /// `orphan_ok` admits a forum whose moderator is already gone, as found
    /// in snapshots generated with [`ModeratorDeletion::KeepForum`].
    fn add_forum(&mut self, f: &Forum, orphan_ok: bool) -> Result<(), SutError> {
        let v = self.version;
        let m = f.moderator_person_id;
        self.need(orphan_ok || self.t.persons.contains(&m, v), || {
            format!("moderator {m} for forum {}", f.id)
        })?;
        self.fresh(self.t.forums.contains(&f.id, v), || {
            format!("forum {}", f.id)
        })?;
        let mut f = *f;
        f.lifecycle = Lifecycle::created(f.lifecycle.creation);
        self.t.forums.insert(f.id, f, v);
        self.step();
        self.t.moderated.add(m, f.id, v);
        self.step();
        Ok(())
    }

    fn add_membership(&mut self, e: &HasMemberEdge) -> Result<(), SutError> {
        let v = self.version;
        let (f, p) = (e.forum_id, e.person_id);
        self.need(self.t.forums.contains(&f, v), || {
            format!("forum {f} for membership")
        })?;
        self.need(self.t.persons.contains(&p, v), || {
            format!("person {p} for membership")
        })?;
        self.fresh(self.t.memberships.contains(&(f, p), v), || {
            format!("membership {f}/{p}")
        })?;
        self.t.memberships.insert((f, p), e.lifecycle.creation, v);
        self.step();
        self.t.members.add(f, p, v);
        self.t.member_of.add(p, f, v);
        self.step();
        Ok(())
    }

    fn add_message(&mut self, m: &Message) -> Result<(), SutError> {
        let v = self.version;
        if !m.is_well_formed() {
            return Err(SutError::Integrity(format!("malformed message {}", m.id)));
        }
        let c = m.creator_person_id;
        self.need(self.t.persons.contains(&c, v), || {
            format!("creator {c} for message {}", m.id)
        })?;
        self.fresh(self.t.messages.contains(&m.id, v), || {
            format!("message {}", m.id)
        })?;
        let mut m = m.clone();
        m.lifecycle = Lifecycle::created(m.lifecycle.creation);
        let mut parent_creator = None;
        match m.kind {
            MessageKind::Post => {
                let f = m.container_forum_id.expect("well-formed post");
                self.need(self.t.forums.contains(&f, v), || {
                    format!("forum {f} for post {}", m.id)
                })?;
                m.root_post_id = m.id;
            }
            MessageKind::Comment => {
                let pid = m.reply_to_message_id.expect("well-formed comment");
                let parent = self.t.messages.get(&pid, v);
                self.need(parent.is_some(), || {
                    format!("parent {pid} for comment {}", m.id)
                })?;
                let parent = parent.unwrap();
                m.root_post_id = parent.root_post_id;
                parent_creator = Some(parent.creator_person_id);
            }
        }
        let m = Arc::new(m);
        self.t.messages.insert(m.id, m.clone(), v);
        self.step();
        self.t.created.add(c, m.id, v);
        match m.kind {
            MessageKind::Post => self
                .t
                .forum_posts
                .add(m.container_forum_id.unwrap(), m.id, v),
            MessageKind::Comment => self.t.replies.add(m.reply_to_message_id.unwrap(), m.id, v),
        }
        self.step();
        if let Some(pair) = parent_creator.and_then(|pc| canonical_pair(pc, c)) {
            let n = self.t.interactions.get(&pair, v).unwrap_or(0);
            self.t.interactions.replace(pair, n + 1, v);
            self.step();
        }
        Ok(())
    }

    fn add_like(&mut self, e: &LikesEdge) -> Result<(), SutError> {
        let v = self.version;
        let (p, m) = (e.person_id, e.message_id);
        self.need(self.t.persons.contains(&p, v), || {
            format!("person {p} for like")
        })?;
        self.need(self.t.messages.contains(&m, v), || {
            format!("message {m} for like")
        })?;
        self.fresh(self.t.likes.contains(&(p, m), v), || {
            format!("like {p}->{m}")
        })?;
        self.t.likes.insert((p, m), e.lifecycle.creation, v);
        self.step();
        self.t.liked_by.add(m, p, v);
        self.t.likes_of.add(p, m, v);
        self.step();
        Ok(())
    }

    fn exists(&self, e: EntityRef, v: Version) -> bool {
        let t = self.t;
        match e {
            EntityRef::Person(p) => t.persons.contains(&p, v),
            EntityRef::Knows(a, b) => t.knows.contains(&(a, b), v),
            EntityRef::Forum(f) => t.forums.contains(&f, v),
            EntityRef::Membership(f, p) => t.memberships.contains(&(f, p), v),
            EntityRef::Message(m) => t.messages.contains(&m, v),
            EntityRef::Like(p, m) => t.likes.contains(&(p, m), v),
        }
    }

    /// Root plus all structural dependants, depth first with an explicit
    /// stack, as of version `v`.
    fn cascade(&self, root: EntityRef, v: Version, policy: ModeratorDeletion) -> Vec<EntityRef> {
        let t = self.t;
        let mut seen = HashSet::from([root]);
        let mut order = vec![root];
        let mut stack = vec![root];
        while let Some(e) = stack.pop() {
            let mut children = Vec::new();
            match e {
                EntityRef::Person(p) => {
                    for f in t.friends.values(&p, v) {
                        let (a, b) = canonical_pair(p, f).expect("no self-loops");
                        children.push(EntityRef::Knows(a, b));
                    }
                    children.extend(
                        t.likes_of
                            .values(&p, v)
                            .into_iter()
                            .map(|m| EntityRef::Like(p, m)),
                    );
                    children.extend(
                        t.member_of
                            .values(&p, v)
                            .into_iter()
                            .map(|f| EntityRef::Membership(f, p)),
                    );
                    children.extend(t.created.values(&p, v).into_iter().map(EntityRef::Message));
                    if policy == ModeratorDeletion::DeleteForum {
                        children
                            .extend(t.moderated.values(&p, v).into_iter().map(EntityRef::Forum));
                    }
                }
                EntityRef::Forum(f) => {
                    children.extend(
                        t.members
                            .values(&f, v)
                            .into_iter()
                            .map(|p| EntityRef::Membership(f, p)),
                    );
                    children.extend(
                        t.forum_posts
                            .values(&f, v)
                            .into_iter()
                            .map(EntityRef::Message),
                    );
                }
                EntityRef::Message(m) => {
                    children.extend(t.replies.values(&m, v).into_iter().map(EntityRef::Message));
                    children.extend(
                        t.liked_by
                            .values(&m, v)
                            .into_iter()
                            .map(|p| EntityRef::Like(p, m)),
                    );
                }
                EntityRef::Knows(..) | EntityRef::Membership(..) | EntityRef::Like(..) => {}
            }
            for c in children {
                if seen.insert(c) {
                    order.push(c);
                    stack.push(c);
                }
            }
        }
        order
    }

    /// Closes `e` and its index entries. Lookups read `before`, the state
    /// prior to this transaction.
    fn remove(&mut self, e: EntityRef, before: Version) {
        let (t, v) = (self.t, self.version);
        match e {
            EntityRef::Person(p) => {
                t.persons.remove(&p, v);
            }
            EntityRef::Knows(a, b) => {
                t.knows.remove(&(a, b), v);
                t.friends.remove(&a, &b, v);
                t.friends.remove(&b, &a, v);
            }
            EntityRef::Forum(f) => {
                if let Some(forum) = t.forums.get(&f, before) {
                    t.moderated.remove(&forum.moderator_person_id, &f, v);
                }
                t.forums.remove(&f, v);
            }
            EntityRef::Membership(f, p) => {
                t.memberships.remove(&(f, p), v);
                t.members.remove(&f, &p, v);
                t.member_of.remove(&p, &f, v);
            }
            EntityRef::Message(id) => {
                let m = t.messages.get(&id, before).expect("cascade member exists");
                t.messages.remove(&id, v);
                t.created.remove(&m.creator_person_id, &id, v);
                match m.kind {
                    MessageKind::Post => {
                        t.forum_posts.remove(&m.container_forum_id.unwrap(), &id, v);
                    }
                    MessageKind::Comment => {
                        let pid = m.reply_to_message_id.unwrap();
                        t.replies.remove(&pid, &id, v);
                        let parent = t
                            .messages
                            .get(&pid, before)
                            .expect("parent of live comment");
                        if let Some(pair) =
                            canonical_pair(parent.creator_person_id, m.creator_person_id)
                        {
                            match t.interactions.get(&pair, v) {
                                Some(n) if n > 1 => t.interactions.replace(pair, n - 1, v),
                                _ => {
                                    t.interactions.remove(&pair, v);
                                }
                            }
                        }
                    }
                }
            }
            EntityRef::Like(p, m) => {
                t.likes.remove(&(p, m), v);
                t.liked_by.remove(&m, &p, v);
                t.likes_of.remove(&p, &m, v);
            }
        }
        self.step();
    }
}

pub struct RefStore {
    name: String,
    policy: ModeratorDeletion,
    commit: Mutex<()>,
    visible: AtomicU64,
    t: Tables,
}

impl RefStore {
    pub fn new(policy: ModeratorDeletion) -> Self {
        Self {
            name: "refstore".into(),
            policy,
            commit: Mutex::new(()),
            visible: AtomicU64::new(0),
            t: Tables::default(),
        }
    }

    pub fn policy(&self) -> ModeratorDeletion {
        self.policy
    }

    /// Loads a snapshot graph as commit version 1. Every reference must
    /// resolve within the graph.
    pub fn bulk_load(graph: &TemporalGraph, policy: ModeratorDeletion) -> Result<Self, SutError> {
        let store = Self::new(policy);
        store.transact(&mut |_| {}, |tx| {
            let integrity = |e: SutError| match e {
                SutError::DependencyMissing(s) => {
                    SutError::Integrity(format!("dangling reference: {s}"))
                }
                e => e,
            };
            for p in &graph.persons {
                tx.add_person(p).map_err(integrity)?;
            }
            for f in &graph.forums {
                tx.add_forum(f, policy == ModeratorDeletion::KeepForum)
                    .map_err(integrity)?;
            }
            for k in &graph.knows {
                tx.add_knows(k).map_err(integrity)?;
            }
            for m in &graph.memberships {
                tx.add_membership(m).map_err(integrity)?;
            }
            // Parents sort before replies by creation; passes cover
            // equal-instant chains in foreign input.
            let mut pending: Vec<&Message> = graph.messages.iter().collect();
            pending.sort_by_key(|m| (m.lifecycle.creation, m.id));
            while !pending.is_empty() {
                let before = pending.len();
                let mut deferred = Vec::new();
                for m in pending {
                    match tx.add_message(m) {
                        Ok(()) => {}
                        Err(SutError::DependencyMissing(_))
                            if m.reply_to_message_id
                                .is_some_and(|p| graph.messages.iter().any(|x| x.id == p)) =>
                        {
                            deferred.push(m)
                        }
                        Err(e) => return Err(integrity(e)),
                    }
                }
                if deferred.len() == before {
                    return Err(SutError::Integrity(format!(
                        "reply cycle through message {}",
                        deferred[0].id
                    )));
                }
                pending = deferred;
            }
            for l in &graph.likes {
                tx.add_like(l).map_err(integrity)?;
            }
            Ok(())
        })?;
        Ok(store)
    }

    /// Reads snapshot CSV files from `dir` and bulk loads them.
    pub fn bulk_load_dir(dir: &Path, policy: ModeratorDeletion) -> Result<Self, LoadError> {
        let graph = read_graph(dir)?;
        Ok(Self::bulk_load(&graph, policy)?)
    }

    /// Pins the latest published version.
    pub fn snapshot(&self) -> StoreSnapshot<'_> {
        StoreSnapshot::new(&self.t, self.visible.load(Ordering::Acquire))
    }

    /// Pins an explicit version; must not exceed the published one.
    pub fn snapshot_at(&self, version: Version) -> StoreSnapshot<'_> {
        assert!(
            version <= self.visible.load(Ordering::Acquire),
            "version {version} not yet published"
        );
        StoreSnapshot::new(&self.t, version)
    }

    fn transact<R>(
        &self,
        hook: &mut dyn FnMut(usize),
        body: impl FnOnce(&mut Tx<'_>) -> Result<R, SutError>,
    ) -> Result<(Version, R), SutError> {
        let _guard = self.commit.lock();
        let version = self.visible.load(Ordering::Acquire) + 1;
        let mut tx = Tx {
            t: &self.t,
            version,
            steps: 0,
            hook,
        };
        // Single updates validate before their first write, so a failed body
        // leaves nothing at `version`. A failed bulk load drops the store.
        let r = body(&mut tx)?;
        self.visible.store(version, Ordering::Release);
        tracing::trace!(version, steps = tx.steps, "commit");
        Ok((version, r))
    }

    pub fn apply_insert(&self, op: &UpdateOperation) -> Result<Version, SutError> {
        self.apply_insert_with_hook(op, &mut |_| {})
    }

    /// Like [`apply_insert`](Self::apply_insert), calling `hook` after every
    /// primitive write while the transaction is still unpublished.
    pub fn apply_insert_with_hook(
        &self,
        op: &UpdateOperation,
        hook: &mut dyn FnMut(usize),
    ) -> Result<Version, SutError> {
        check_op(op)?;
        self.transact(hook, |tx| match &op.payload {
            Payload::AddPerson(p) => tx.add_person(p),
            Payload::AddKnows(k) => tx.add_knows(k),
            Payload::AddForum(f) => tx.add_forum(f, false),
            Payload::AddMembership(m) => tx.add_membership(m),
            Payload::AddPost(m) | Payload::AddComment(m) => tx.add_message(m),
            Payload::AddLike(l) => tx.add_like(l),
            _ => Err(SutError::Integrity(format!(
                "{} is not an insert",
                op.op_type
            ))),
        })
        .map(|(v, ())| v)
    }

    pub fn apply_delete(&self, op: &UpdateOperation) -> Result<DeleteOutcome, SutError> {
        self.apply_delete_with_hook(op, &mut |_| {})
    }

    pub fn apply_delete_with_hook(
        &self,
        op: &UpdateOperation,
        hook: &mut dyn FnMut(usize),
    ) -> Result<DeleteOutcome, SutError> {
        check_op(op)?;
        let root = EntityRef::delete_root(&op.payload)
            .ok_or_else(|| SutError::Integrity(format!("{} is not a delete", op.op_type)))?;
        let policy = self.policy;
        let (version, removed) = self.transact(hook, |tx| {
            let before = tx.version - 1;
            if !tx.exists(root, before) || !kind_matches(tx.t, op.op_type, root, before) {
                return Err(SutError::UnknownEntity(root.to_string()));
            }
            let removed = tx.cascade(root, before, policy);
            for &e in &removed {
                tx.remove(e, before);
            }
            Ok(removed)
        })?;
        tracing::debug!(%root, cascade = removed.len(), version, "delete");
        Ok(DeleteOutcome { version, removed })
    }

    /// Fault injection for isolation checks: publishes the delete root in
    /// one commit and the rest of its cascade in a second one. `hook` runs
    /// inside the second transaction.
    pub(crate) fn apply_delete_split(
        &self,
        op: &UpdateOperation,
        hook: &mut dyn FnMut(usize),
    ) -> Result<(), SutError> {
        check_op(op)?;
        let root = EntityRef::delete_root(&op.payload)
            .ok_or_else(|| SutError::Integrity(format!("{} is not a delete", op.op_type)))?;
        let policy = self.policy;
        let (_, (before, removed)) = self.transact(&mut |_| {}, |tx| {
            let before = tx.version - 1;
            if !tx.exists(root, before) || !kind_matches(tx.t, op.op_type, root, before) {
                return Err(SutError::UnknownEntity(root.to_string()));
            }
            let removed = tx.cascade(root, before, policy);
            tx.remove(removed[0], before);
            Ok((before, removed))
        })?;
        self.transact(hook, |tx| {
            for &e in &removed[1..] {
                tx.remove(e, before);
            }
            Ok(())
        })?;
        Ok(())
    }

    /// Visible state as a graph of live entities, sorted canonically.
    pub fn export(&self) -> TemporalGraph {
        self.snapshot().export()
    }
}

fn check_op(op: &UpdateOperation) -> Result<(), SutError> {
    if op.payload.admits(op.op_type) {
        Ok(())
    } else {
        Err(SutError::Integrity(format!(
            "payload does not match {}",
            op.op_type
        )))
    }
}

fn kind_matches(t: &Tables, op: OpType, root: EntityRef, v: Version) -> bool {
    let message_kind = |id| t.messages.get(&id, v).map(|m| m.kind);
    match (op, root) {
        (OpType::Del6, EntityRef::Message(id)) => message_kind(id) == Some(MessageKind::Post),
        (OpType::Del7, EntityRef::Message(id)) => message_kind(id) == Some(MessageKind::Comment),
        (OpType::Del2, EntityRef::Like(_, m)) => message_kind(m) == Some(MessageKind::Post),
        (OpType::Del3, EntityRef::Like(_, m)) => message_kind(m) == Some(MessageKind::Comment),
        _ => true,
    }
}

impl SystemUnderTest for RefStore {
    fn name(&self) -> &str {
        &self.name
    }

    fn execute_query(&self, query: &QueryInstance) -> Result<QueryResult, SutError> {
        self.snapshot().execute(query)
    }

    fn execute_update(&self, op: &UpdateOperation) -> Result<UpdateOutcome, SutError> {
        if op.op_type.is_insert() {
            let version = self.apply_insert(op)?;
            Ok(UpdateOutcome {
                version,
                cascade_size: 0,
            })
        } else {
            let out = self.apply_delete(op)?;
            Ok(UpdateOutcome {
                version: out.version,
                cascade_size: out.removed.len(),
            })
        }
    }

    fn current_commit_version(&self) -> u64 {
        self.visible.load(Ordering::Acquire)
    }
}
