use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::time::Lifecycle;

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u64);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }

        impl FromStr for $name {
            type Err = std::num::ParseIntError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                s.parse().map($name)
            }
        }
    };
}

id_type!(PersonId);
id_type!(ForumId);
id_type!(MessageId);
id_type!(CountryId);
id_type!(UniversityId);
id_type!(TagId);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Person {
    pub id: PersonId,
    pub first_name: String,
    pub last_name: String,
    pub country_id: CountryId,
    pub university_id: Option<UniversityId>,
    pub tag_interests: BTreeSet<TagId>,
    pub lifecycle: Lifecycle,
}

/// Undirected friendship, stored canonically with `person1_id < person2_id`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct KnowsEdge {
    pub person1_id: PersonId,
    pub person2_id: PersonId,
    pub lifecycle: Lifecycle,
}

impl KnowsEdge {
    /// Builds the canonical form; `None` for a self-loop.
    pub fn new(a: PersonId, b: PersonId, lifecycle: Lifecycle) -> Option<Self> {
        let (person1_id, person2_id) = canonical_pair(a, b)?;
        Some(Self {
            person1_id,
            person2_id,
            lifecycle,
        })
    }

    pub fn key(&self) -> (PersonId, PersonId) {
        (self.person1_id, self.person2_id)
    }
}

pub fn canonical_pair(a: PersonId, b: PersonId) -> Option<(PersonId, PersonId)> {
    match a.cmp(&b) {
        std::cmp::Ordering::Less => Some((a, b)),
        std::cmp::Ordering::Greater => Some((b, a)),
        std::cmp::Ordering::Equal => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Forum {
    pub id: ForumId,
    pub moderator_person_id: PersonId,
    pub lifecycle: Lifecycle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MessageKind {
    Post,
    Comment,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Message {
    pub id: MessageId,
    pub kind: MessageKind,
    pub creator_person_id: PersonId,
    /// Present iff `kind == Post`.
    pub container_forum_id: Option<ForumId>,
    /// Present iff `kind == Comment`.
    pub reply_to_message_id: Option<MessageId>,
    pub country_id: CountryId,
    pub creation_tag_ids: BTreeSet<TagId>,
    pub lifecycle: Lifecycle,
    /// Root of the thread; equals `id` for posts.
    pub root_post_id: MessageId,
}

impl Message {
    pub fn is_post(&self) -> bool {
        self.kind == MessageKind::Post
    }

    /// Structural well-formedness: the kind determines which parent link is set.
    pub fn is_well_formed(&self) -> bool {
        match self.kind {
            MessageKind::Post => {
                self.container_forum_id.is_some()
                    && self.reply_to_message_id.is_none()
                    && self.root_post_id == self.id
            }
            MessageKind::Comment => {
                self.container_forum_id.is_none() && self.reply_to_message_id.is_some()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LikesEdge {
    pub person_id: PersonId,
    pub message_id: MessageId,
    pub lifecycle: Lifecycle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HasMemberEdge {
    pub forum_id: ForumId,
    pub person_id: PersonId,
    pub lifecycle: Lifecycle,
}

/// What happens to a Forum when its moderator is deleted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeratorDeletion {
    /// Forum, its memberships and its posts go with the moderator.
    #[default]
    DeleteForum,
    /// Forum survives without a live moderator.
    KeepForum,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("reply chain starting at message {0} loops")]
    CycleDetected(MessageId),
    #[error("message {0} not found")]
    UnknownMessage(MessageId),
}

/// Minimal read access to the reply structure of a message collection.
pub trait MessageLookup {
    fn message(&self, id: MessageId) -> Option<&Message>;
}

impl MessageLookup for HashMap<MessageId, Message> {
    fn message(&self, id: MessageId) -> Option<&Message> {
        self.get(&id)
    }
}

/// Follows `reply_to_message_id` links to the thread's Post.
///
/// Does not trust the denormalized `root_post_id`; this is the recompute path
/// used to check it.
pub fn root_post_of(
    message_id: MessageId,
    graph: &impl MessageLookup,
) -> Result<MessageId, ModelError> {
    let mut seen = HashSet::new();
    let mut current = message_id;
    loop {
        if !seen.insert(current) {
            return Err(ModelError::CycleDetected(message_id));
        }
        let msg = graph
            .message(current)
            .ok_or(ModelError::UnknownMessage(current))?;
        match msg.reply_to_message_id {
            None => return Ok(current),
            Some(parent) => current = parent,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::time::SimInstant;

    fn msg(id: u64, reply_to: Option<u64>) -> Message {
        Message {
            id: MessageId(id),
            kind: if reply_to.is_some() {
                MessageKind::Comment
            } else {
                MessageKind::Post
            },
            creator_person_id: PersonId(1),
            container_forum_id: reply_to.is_none().then_some(ForumId(9)),
            reply_to_message_id: reply_to.map(MessageId),
            country_id: CountryId(0),
            creation_tag_ids: BTreeSet::new(),
            lifecycle: Lifecycle::created(SimInstant(id as i64)),
            root_post_id: MessageId(0),
        }
    }

    fn lookup(msgs: Vec<Message>) -> HashMap<MessageId, Message> {
        msgs.into_iter().map(|m| (m.id, m)).collect()
    }

    #[test]
    fn root_post_identity_and_chains() {
        let g = lookup(vec![msg(1, None), msg(2, Some(1)), msg(3, Some(2))]);
        assert_eq!(root_post_of(MessageId(1), &g), Ok(MessageId(1)));
        assert_eq!(root_post_of(MessageId(2), &g), Ok(MessageId(1)));
        // manual walk: 3 -> 2 -> 1, and 1 has no parent
        let mut walk = vec![MessageId(3)];
        while let Some(p) = g[walk.last().unwrap()].reply_to_message_id {
            walk.push(p);
        }
        assert_eq!(walk, vec![MessageId(3), MessageId(2), MessageId(1)]);
        assert_eq!(root_post_of(MessageId(3), &g), Ok(*walk.last().unwrap()));
    }

    #[test]
    fn root_post_cycle_is_reported() {
        let g = lookup(vec![msg(2, Some(3)), msg(3, Some(2))]);
        assert_eq!(
            root_post_of(MessageId(2), &g),
            Err(ModelError::CycleDetected(MessageId(2)))
        );
        assert_eq!(
            root_post_of(MessageId(7), &g),
            Err(ModelError::UnknownMessage(MessageId(7)))
        );
    }

    #[test]
    fn knows_is_canonical() {
        let lc = Lifecycle::created(SimInstant(0));
        let e = KnowsEdge::new(PersonId(5), PersonId(2), lc).unwrap();
        assert_eq!(e.key(), (PersonId(2), PersonId(5)));
        assert!(KnowsEdge::new(PersonId(5), PersonId(5), lc).is_none());
    }
}
