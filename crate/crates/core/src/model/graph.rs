use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::entity::{
    root_post_of, Forum, ForumId, HasMemberEdge, KnowsEdge, LikesEdge, Message, MessageId,
    MessageKind, ModeratorDeletion, Person, PersonId,
};
use super::time::{Lifecycle, SimInstant};

/// Entity collections with lifecycles. Used both for the full temporal graph
/// and for the initial snapshot (where no deletion instants are set).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalGraph {
    pub persons: Vec<Person>,
    pub knows: Vec<KnowsEdge>,
    pub forums: Vec<Forum>,
    pub memberships: Vec<HasMemberEdge>,
    pub messages: Vec<Message>,
    pub likes: Vec<LikesEdge>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityCounts {
    pub persons: usize,
    pub knows: usize,
    pub forums: usize,
    pub memberships: usize,
    pub posts: usize,
    pub comments: usize,
    pub likes: usize,
}

impl EntityCounts {
    pub fn total(&self) -> usize {
        self.persons
            + self.knows
            + self.forums
            + self.memberships
            + self.posts
            + self.comments
            + self.likes
    }
}

impl TemporalGraph {
    pub fn is_empty(&self) -> bool {
        self.counts().total() == 0
    }

    pub fn counts(&self) -> EntityCounts {
        let posts = self.messages.iter().filter(|m| m.is_post()).count();
        EntityCounts {
            persons: self.persons.len(),
            knows: self.knows.len(),
            forums: self.forums.len(),
            memberships: self.memberships.len(),
            posts,
            comments: self.messages.len() - posts,
            likes: self.likes.len(),
        }
    }

    pub fn message_map(&self) -> HashMap<MessageId, Message> {
        self.messages.iter().map(|m| (m.id, m.clone())).collect()
    }

    /// Entities alive at `t`, deletion instants cleared. Sorted canonically.
    pub fn state_at(&self, t: SimInstant) -> TemporalGraph {
        fn live<T: Clone>(v: &[T], lc: impl Fn(&T) -> Lifecycle, t: SimInstant) -> Vec<T> {
            v.iter().filter(|e| lc(e).is_alive(t)).cloned().collect()
        }
        let mut g = TemporalGraph {
            persons: live(&self.persons, |p| p.lifecycle, t),
            knows: live(&self.knows, |k| k.lifecycle, t),
            forums: live(&self.forums, |f| f.lifecycle, t),
            memberships: live(&self.memberships, |m| m.lifecycle, t),
            messages: live(&self.messages, |m| m.lifecycle, t),
            likes: live(&self.likes, |l| l.lifecycle, t),
        };
        g.clear_deletions();
        g.sort_canonical();
        g
    }

    pub fn clear_deletions(&mut self) {
        self.persons
            .iter_mut()
            .for_each(|e| e.lifecycle.deletion = None);
        self.knows
            .iter_mut()
            .for_each(|e| e.lifecycle.deletion = None);
        self.forums
            .iter_mut()
            .for_each(|e| e.lifecycle.deletion = None);
        self.memberships
            .iter_mut()
            .for_each(|e| e.lifecycle.deletion = None);
        self.messages
            .iter_mut()
            .for_each(|e| e.lifecycle.deletion = None);
        self.likes
            .iter_mut()
            .for_each(|e| e.lifecycle.deletion = None);
    }

    pub fn sort_canonical(&mut self) {
        self.persons.sort_by_key(|p| p.id);
        self.knows.sort_by_key(|k| k.key());
        self.forums.sort_by_key(|f| f.id);
        self.memberships.sort_by_key(|m| (m.forum_id, m.person_id));
        self.messages.sort_by_key(|m| m.id);
        self.likes.sort_by_key(|l| (l.person_id, l.message_id));
    }

    /// Full temporal scan of the structural invariants. Returns one line per
    /// violation; empty means the graph is consistent.
    pub fn check_invariants(&self, policy: ModeratorDeletion) -> Vec<String> {
        let mut errors = Vec::new();
        let persons: HashMap<PersonId, &Person> = self.persons.iter().map(|p| (p.id, p)).collect();
        let forums: HashMap<ForumId, &Forum> = self.forums.iter().map(|f| (f.id, f)).collect();
        let messages: HashMap<MessageId, &Message> =
            self.messages.iter().map(|m| (m.id, m)).collect();

        let mut ids = HashSet::new();
        let all_ids = self
            .persons
            .iter()
            .map(|p| p.id.0)
            .chain(self.forums.iter().map(|f| f.id.0))
            .chain(self.messages.iter().map(|m| m.id.0));
        for id in all_ids {
            if !ids.insert(id) {
                errors.push(format!("identifier {id} used twice"));
            }
        }

        for p in &self.persons {
            check(
                &mut errors,
                format!("person {}", p.id),
                p.lifecycle,
                Some(p.lifecycle),
            );
        }
        let mut knows_pairs = HashSet::new();
        for k in &self.knows {
            let what = format!("knows {}-{}", k.person1_id, k.person2_id);
            if k.person1_id >= k.person2_id {
                check(&mut errors, what.clone(), k.lifecycle, None);
            }
            if !knows_pairs.insert(k.key()) {
                errors.push(format!("{what}: duplicate pair"));
            }
            check(
                &mut errors,
                what.clone(),
                k.lifecycle,
                persons.get(&k.person1_id).map(|p| p.lifecycle),
            );
            check(
                &mut errors,
                what,
                k.lifecycle,
                persons.get(&k.person2_id).map(|p| p.lifecycle),
            );
        }
        for f in &self.forums {
            let moderator = persons.get(&f.moderator_person_id);
            let what = format!("forum {}", f.id);
            match policy {
                ModeratorDeletion::DeleteForum => check(
                    &mut errors,
                    what,
                    f.lifecycle,
                    moderator.map(|p| p.lifecycle),
                ),
                ModeratorDeletion::KeepForum => match moderator {
                    Some(p) if p.lifecycle.is_alive(f.lifecycle.creation) => {}
                    _ => check(&mut errors, what, f.lifecycle, None),
                },
            }
        }
        for m in &self.memberships {
            let what = format!("membership {}-{}", m.forum_id, m.person_id);
            check(
                &mut errors,
                what.clone(),
                m.lifecycle,
                forums.get(&m.forum_id).map(|f| f.lifecycle),
            );
            check(
                &mut errors,
                what,
                m.lifecycle,
                persons.get(&m.person_id).map(|p| p.lifecycle),
            );
        }
        for m in &self.messages {
            let what = format!("message {}", m.id);
            if !m.is_well_formed() {
                errors.push(format!("{what}: kind does not match parent links"));
            }
            check(
                &mut errors,
                what.clone(),
                m.lifecycle,
                persons.get(&m.creator_person_id).map(|p| p.lifecycle),
            );
            match m.kind {
                MessageKind::Post => {
                    let forum = m.container_forum_id.and_then(|f| forums.get(&f));
                    check(&mut errors, what, m.lifecycle, forum.map(|f| f.lifecycle));
                }
                MessageKind::Comment => {
                    let parent = m.reply_to_message_id.and_then(|p| messages.get(&p));
                    check(
                        &mut errors,
                        what.clone(),
                        m.lifecycle,
                        parent.map(|p| p.lifecycle),
                    );
                    match root_post_of(m.id, &MapRef(&messages)) {
                        Ok(root) if root == m.root_post_id => {
                            let root_lc = messages.get(&root).map(|r| r.lifecycle);
                            check(&mut errors, what, m.lifecycle, root_lc);
                        }
                        Ok(root) => errors.push(format!(
                            "{what}: rootPostId {} but thread root is {root}",
                            m.root_post_id
                        )),
                        Err(e) => errors.push(format!("{what}: {e}")),
                    }
                }
            }
        }
        for l in &self.likes {
            let what = format!("like {}-{}", l.person_id, l.message_id);
            check(
                &mut errors,
                what.clone(),
                l.lifecycle,
                persons.get(&l.person_id).map(|p| p.lifecycle),
            );
            check(
                &mut errors,
                what,
                l.lifecycle,
                messages.get(&l.message_id).map(|m| m.lifecycle),
            );
        }
        errors
    }
}

struct MapRef<'a>(&'a HashMap<MessageId, &'a Message>);

impl super::entity::MessageLookup for MapRef<'_> {
    fn message(&self, id: MessageId) -> Option<&Message> {
        self.0.get(&id).copied()
    }
}

fn check(errors: &mut Vec<String>, what: String, child: Lifecycle, parent: Option<Lifecycle>) {
    if !child.is_well_formed() {
        errors.push(format!("{what}: deletion not after creation"));
    }
    match parent {
        None => errors.push(format!("{what}: references a missing entity")),
        Some(p) if !within(child, p) => {
            errors.push(format!("{what}: outlives or predates an endpoint"))
        }
        Some(_) => {}
    }
}

/// `child` lies within `parent` (half-open intervals, absent deletion = forever).
fn within(child: Lifecycle, parent: Lifecycle) -> bool {
    child.creation >= parent.creation && child.deletion_or_max() <= parent.deletion_or_max()
}
