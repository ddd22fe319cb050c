//! Brute-force store over flat entity vectors. Every query is a full scan
//! and every delete a fixpoint sweep. Serves as the oracle the reference
//! store is validated against.

use std::collections::{BTreeSet, HashMap, HashSet};

use parking_lot::Mutex;

use crate::model::{
    Message, MessageId, MessageKind, ModeratorDeletion, Payload, PersonId, TemporalGraph,
    UpdateOperation, MILLIS_PER_DAY,
};
use crate::query::{
    interaction_weight, CheapestPath, Cr3Row, PersonRef, QueryInstance, QueryParams, QueryResult,
    Sr2Row, Sr6Row, SutError, SystemUnderTest, UpdateOutcome,
};

struct State {
    g: TemporalGraph,
    version: u64,
}

pub struct NaiveStore {
    policy: ModeratorDeletion,
    state: Mutex<State>,
}

impl NaiveStore {
    /// Takes the snapshot as is; no reference checks.
    pub fn new(snapshot: TemporalGraph, policy: ModeratorDeletion) -> Self {
        Self {
            policy,
            state: Mutex::new(State {
                g: snapshot,
                version: 1,
            }),
        }
    }

    pub fn export(&self) -> TemporalGraph {
        let mut g = self.state.lock().g.clone();
        g.sort_canonical();
        g
    }
}

fn person_ref(g: &TemporalGraph, id: PersonId) -> Option<PersonRef> {
    g.persons.iter().find(|p| p.id == id).map(|p| PersonRef {
        id,
        first_name: p.first_name.clone(),
        last_name: p.last_name.clone(),
    })
}

fn has_person(g: &TemporalGraph, id: PersonId) -> Result<(), SutError> {
    match g.persons.iter().any(|p| p.id == id) {
        true => Ok(()),
        false => Err(SutError::UnknownPerson(id)),
    }
}

fn friends(g: &TemporalGraph, id: PersonId) -> Vec<PersonId> {
    g.knows
        .iter()
        .filter_map(|k| match (k.person1_id == id, k.person2_id == id) {
            (true, _) => Some(k.person2_id),
            (_, true) => Some(k.person1_id),
            _ => None,
        })
        .collect()
}

fn cr3(g: &TemporalGraph, q: &QueryParams) -> Result<Vec<Cr3Row>, SutError> {
    let QueryParams::Cr3 {
        person_id,
        country_x_id,
        country_y_id,
        start_date,
        duration_days,
    } = *q
    else {
        unreachable!()
    };
    has_person(g, person_id)?;
    let end = start_date.millis() + duration_days as i64 * MILLIS_PER_DAY;
    let direct: BTreeSet<PersonId> = friends(g, person_id).into_iter().collect();
    let mut circle = direct.clone();
    for k in &g.knows {
        if direct.contains(&k.person1_id) {
            circle.insert(k.person2_id);
        }
        if direct.contains(&k.person2_id) {
            circle.insert(k.person1_id);
        }
    }
    let mut rows = Vec::new();
    for p in &g.persons {
        if p.id == person_id || !circle.contains(&p.id) {
            continue;
        }
        if p.country_id == country_x_id || p.country_id == country_y_id {
            continue;
        }
        let in_window: Vec<_> = g
            .messages
            .iter()
            .filter(|m| m.creator_person_id == p.id)
            .filter(|m| m.lifecycle.creation >= start_date && m.lifecycle.creation.millis() < end)
            .collect();
        let x = in_window
            .iter()
            .filter(|m| m.country_id == country_x_id)
            .count() as u64;
        let y = in_window
            .iter()
            .filter(|m| m.country_id == country_y_id)
            .count() as u64;
        if x > 0 && y > 0 {
            rows.push(Cr3Row {
                person_id: p.id,
                first_name: p.first_name.clone(),
                last_name: p.last_name.clone(),
                x_count: x,
                y_count: y,
                count: x + y,
            });
        }
    }
    rows.sort_by(|a, b| b.count.cmp(&a.count).then(a.person_id.cmp(&b.person_id)));
    Ok(rows)
}

/// Level-synchronous frontier expansion over the full edge list.
fn cr13(g: &TemporalGraph, a: PersonId, b: PersonId) -> i64 {
    let mut reached: HashSet<PersonId> = HashSet::from([a]);
    let mut frontier = reached.clone();
    let mut depth = 0;
    while !frontier.is_empty() {
        if frontier.contains(&b) {
            return depth;
        }
        let mut next = HashSet::new();
        for k in &g.knows {
            for (x, y) in [(k.person1_id, k.person2_id), (k.person2_id, k.person1_id)] {
                if frontier.contains(&x) && !reached.contains(&y) {
                    next.insert(y);
                }
            }
        }
        reached.extend(next.iter().copied());
        frontier = next;
        depth += 1;
    }
    -1
}

/// Bellman-Ford over knows edges carrying at least one direct reply.
fn cr14(g: &TemporalGraph, a: PersonId, b: PersonId) -> CheapestPath {
    let creators: HashMap<MessageId, PersonId> = g
        .messages
        .iter()
        .map(|m| (m.id, m.creator_person_id))
        .collect();
    let mut exchanged: HashMap<(PersonId, PersonId), u64> = HashMap::new();
    for m in &g.messages {
        if let Some(&other) = m.reply_to_message_id.and_then(|p| creators.get(&p)) {
            *exchanged.entry((m.creator_person_id, other)).or_default() += 1;
        }
    }
    let replies = |x: PersonId, y: PersonId| {
        exchanged.get(&(x, y)).copied().unwrap_or(0) + exchanged.get(&(y, x)).copied().unwrap_or(0)
    };
    let edges: Vec<(PersonId, PersonId, i64)> = g
        .knows
        .iter()
        .filter_map(|k| {
            let n = replies(k.person1_id, k.person2_id);
            (n > 0).then(|| (k.person1_id, k.person2_id, interaction_weight(n)))
        })
        .collect();
    let mut dist: HashMap<PersonId, (i64, Option<PersonId>)> = HashMap::from([(a, (0, None))]);
    loop {
        let mut changed = false;
        for &(x, y, w) in &edges {
            for (u, v) in [(x, y), (y, x)] {
                let Some(&(du, _)) = dist.get(&u) else {
                    continue;
                };
                if dist.get(&v).is_none_or(|&(dv, _)| du + w < dv) {
                    dist.insert(v, (du + w, Some(u)));
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    match dist.get(&b) {
        None => CheapestPath {
            weight: -1,
            path: Vec::new(),
        },
        Some(&(w, _)) => {
            let mut path = vec![b];
            while let Some(&(_, Some(p))) = dist.get(path.last().unwrap()) {
                path.push(p);
            }
            path.reverse();
            CheapestPath { weight: w, path }
        }
    }
}

fn thread_root(map: &HashMap<MessageId, &Message>, id: MessageId) -> Result<MessageId, SutError> {
    let mut current = id;
    for _ in 0..=map.len() {
        match map.get(&current).map(|m| m.reply_to_message_id) {
            Some(Some(parent)) => current = parent,
            Some(None) => return Ok(current),
            None => {
                return Err(SutError::Integrity(format!(
                    "thread of {id} reaches missing message {current}"
                )))
            }
        }
    }
    Err(SutError::Integrity(format!("reply cycle through {id}")))
}

fn sr2(g: &TemporalGraph, person: PersonId) -> Result<Vec<Sr2Row>, SutError> {
    has_person(g, person)?;
    let map: HashMap<MessageId, &Message> = g.messages.iter().map(|m| (m.id, m)).collect();
    let mut own: Vec<_> = g
        .messages
        .iter()
        .filter(|m| m.creator_person_id == person)
        .collect();
    own.sort_by(|x, y| (y.lifecycle.creation, y.id).cmp(&(x.lifecycle.creation, x.id)));
    own.into_iter()
        .take(10)
        .map(|m| {
            let root = thread_root(&map, m.id)?;
            let author_id = map[&root].creator_person_id;
            let author = person_ref(g, author_id).ok_or_else(|| {
                SutError::Integrity(format!("author {author_id} of post {root} missing"))
            })?;
            Ok(Sr2Row {
                message_id: m.id,
                creation_date: m.lifecycle.creation,
                root_post_id: root,
                root_author_id: author.id,
                root_author_first_name: author.first_name,
                root_author_last_name: author.last_name,
            })
        })
        .collect()
}

fn sr6(g: &TemporalGraph, id: MessageId) -> Result<Sr6Row, SutError> {
    let map: HashMap<MessageId, &Message> = g.messages.iter().map(|m| (m.id, m)).collect();
    if !map.contains_key(&id) {
        return Err(SutError::UnknownMessage(id));
    }
    let root = thread_root(&map, id)?;
    let forum_id = map[&root].container_forum_id.expect("posts have a forum");
    let forum = g
        .forums
        .iter()
        .find(|f| f.id == forum_id)
        .ok_or_else(|| SutError::Integrity(format!("forum {forum_id} missing")))?;
    Ok(Sr6Row {
        forum_id,
        moderator: person_ref(g, forum.moderator_person_id),
    })
}

/// Removes the root and everything transitively depending on it. Sweeps
/// all collections until nothing changes.
fn delete(
    g: &mut TemporalGraph,
    payload: &Payload,
    policy: ModeratorDeletion,
) -> Result<usize, SutError> {
    let mut persons: HashSet<PersonId> = HashSet::new();
    let mut forums = HashSet::new();
    let mut messages = HashSet::new();
    let mut edges = 0usize;
    let missing = || SutError::UnknownEntity(format!("{payload:?}"));
    match *payload {
        Payload::RemovePerson { person_id } => {
            g.persons
                .iter()
                .find(|p| p.id == person_id)
                .ok_or_else(missing)?;
            persons.insert(person_id);
        }
        Payload::RemoveForum { forum_id } => {
            g.forums
                .iter()
                .find(|f| f.id == forum_id)
                .ok_or_else(missing)?;
            forums.insert(forum_id);
        }
        Payload::RemovePost { message_id } | Payload::RemoveComment { message_id } => {
            let want = match payload {
                Payload::RemovePost { .. } => MessageKind::Post,
                _ => MessageKind::Comment,
            };
            g.messages
                .iter()
                .find(|m| m.id == message_id && m.kind == want)
                .ok_or_else(missing)?;
            messages.insert(message_id);
        }
        Payload::RemoveKnows {
            person1_id,
            person2_id,
        } => {
            let before = g.knows.len();
            g.knows.retain(|k| {
                !((k.person1_id, k.person2_id) == (person1_id, person2_id)
                    || (k.person1_id, k.person2_id) == (person2_id, person1_id))
            });
            return if g.knows.len() < before {
                Ok(1)
            } else {
                Err(missing())
            };
        }
        Payload::RemoveMembership {
            forum_id,
            person_id,
        } => {
            let before = g.memberships.len();
            g.memberships
                .retain(|m| (m.forum_id, m.person_id) != (forum_id, person_id));
            return if g.memberships.len() < before {
                Ok(1)
            } else {
                Err(missing())
            };
        }
        Payload::RemoveLike {
            person_id,
            message_id,
        } => {
            let before = g.likes.len();
            g.likes
                .retain(|l| (l.person_id, l.message_id) != (person_id, message_id));
            return if g.likes.len() < before {
                Ok(1)
            } else {
                Err(missing())
            };
        }
        _ => return Err(SutError::Integrity("not a delete".into())),
    }
    loop {
        let size = (forums.len(), messages.len());
        for f in &g.forums {
            if policy == ModeratorDeletion::DeleteForum && persons.contains(&f.moderator_person_id)
            {
                forums.insert(f.id);
            }
        }
        for m in &g.messages {
            let dead = persons.contains(&m.creator_person_id)
                || m.container_forum_id.is_some_and(|f| forums.contains(&f))
                || m.reply_to_message_id.is_some_and(|p| messages.contains(&p));
            if dead {
                messages.insert(m.id);
            }
        }
        if (forums.len(), messages.len()) == size {
            break;
        }
    }
    let count = |before: usize, after: usize| before - after;
    let n = g.knows.len();
    g.knows
        .retain(|k| !persons.contains(&k.person1_id) && !persons.contains(&k.person2_id));
    edges += count(n, g.knows.len());
    let n = g.memberships.len();
    g.memberships
        .retain(|m| !persons.contains(&m.person_id) && !forums.contains(&m.forum_id));
    edges += count(n, g.memberships.len());
    let n = g.likes.len();
    g.likes
        .retain(|l| !persons.contains(&l.person_id) && !messages.contains(&l.message_id));
    edges += count(n, g.likes.len());
    g.persons.retain(|p| !persons.contains(&p.id));
    g.forums.retain(|f| !forums.contains(&f.id));
    g.messages.retain(|m| !messages.contains(&m.id));
    Ok(persons.len() + forums.len() + messages.len() + edges)
}

fn insert(g: &mut TemporalGraph, payload: &Payload) -> Result<(), SutError> {
    let person = |g: &TemporalGraph, id| g.persons.iter().any(|p| p.id == id);
    let forum = |g: &TemporalGraph, id| g.forums.iter().any(|f| f.id == id);
    let message = |g: &TemporalGraph, id| g.messages.iter().any(|m| m.id == id);
    let need = |ok: bool, what: &str| {
        if ok {
            Ok(())
        } else {
            Err(SutError::DependencyMissing(what.to_string()))
        }
    };
    match payload {
        Payload::AddPerson(p) => g.persons.push(p.clone()),
        Payload::AddKnows(k) => {
            need(
                person(g, k.person1_id) && person(g, k.person2_id),
                "knows endpoint",
            )?;
            g.knows.push(*k);
        }
        Payload::AddForum(f) => {
            need(person(g, f.moderator_person_id), "moderator")?;
            g.forums.push(*f);
        }
        Payload::AddMembership(m) => {
            need(
                person(g, m.person_id) && forum(g, m.forum_id),
                "membership endpoint",
            )?;
            g.memberships.push(*m);
        }
        Payload::AddPost(m) | Payload::AddComment(m) => {
            let container = match (m.container_forum_id, m.reply_to_message_id) {
                (Some(f), None) => forum(g, f),
                (None, Some(p)) => message(g, p),
                _ => false,
            };
            need(
                person(g, m.creator_person_id) && container,
                "message container or creator",
            )?;
            g.messages.push(m.clone());
        }
        Payload::AddLike(l) => {
            need(
                person(g, l.person_id) && message(g, l.message_id),
                "like endpoint",
            )?;
            g.likes.push(*l);
        }
        _ => return Err(SutError::Integrity("not an insert".into())),
    }
    Ok(())
}

impl SystemUnderTest for NaiveStore {
    fn name(&self) -> &str {
        "naive"
    }

    fn execute_query(&self, query: &QueryInstance) -> Result<QueryResult, SutError> {
        let s = self.state.lock();
        let g = &s.g;
        match query.params {
            QueryParams::Cr3 { .. } => cr3(g, &query.params).map(QueryResult::Cr3),
            QueryParams::Cr13 {
                person1_id,
                person2_id,
            } => {
                has_person(g, person1_id)?;
                has_person(g, person2_id)?;
                Ok(QueryResult::Cr13(cr13(g, person1_id, person2_id)))
            }
            QueryParams::Cr14 {
                person1_id,
                person2_id,
            } => {
                has_person(g, person1_id)?;
                has_person(g, person2_id)?;
                Ok(QueryResult::Cr14(cr14(g, person1_id, person2_id)))
            }
            QueryParams::Sr2 { person_id } => sr2(g, person_id).map(QueryResult::Sr2),
            QueryParams::Sr6 { message_id } => sr6(g, message_id).map(QueryResult::Sr6),
        }
    }

    fn execute_update(&self, op: &UpdateOperation) -> Result<UpdateOutcome, SutError> {
        let mut s = self.state.lock();
        let cascade_size = if op.op_type.is_insert() {
            insert(&mut s.g, &op.payload)?;
            0
        } else {
            delete(&mut s.g, &op.payload, self.policy)?
        };
        s.version += 1;
        Ok(UpdateOutcome {
            version: s.version,
            cascade_size,
        })
    }

    fn current_commit_version(&self) -> u64 {
        self.state.lock().version
    }
}
