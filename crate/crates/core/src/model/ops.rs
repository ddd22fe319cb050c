use std::fmt;

use serde::{Deserialize, Serialize};

use super::entity::{
    Forum, ForumId, HasMemberEdge, KnowsEdge, LikesEdge, Message, MessageId, Person, PersonId,
};
use super::time::SimInstant;

/// The sixteen update operation types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OpType {
    #[serde(rename = "INS1")]
    Ins1,
    #[serde(rename = "INS2")]
    Ins2,
    #[serde(rename = "INS3")]
    Ins3,
    #[serde(rename = "INS4")]
    Ins4,
    #[serde(rename = "INS5")]
    Ins5,
    #[serde(rename = "INS6")]
    Ins6,
    #[serde(rename = "INS7")]
    Ins7,
    #[serde(rename = "INS8")]
    Ins8,
    #[serde(rename = "DEL1")]
    Del1,
    #[serde(rename = "DEL2")]
    Del2,
    #[serde(rename = "DEL3")]
    Del3,
    #[serde(rename = "DEL4")]
    Del4,
    #[serde(rename = "DEL5")]
    Del5,
    #[serde(rename = "DEL6")]
    Del6,
    #[serde(rename = "DEL7")]
    Del7,
    #[serde(rename = "DEL8")]
    Del8,
}

impl OpType {
    pub const ALL: [OpType; 16] = [
        OpType::Ins1,
        OpType::Ins2,
        OpType::Ins3,
        OpType::Ins4,
        OpType::Ins5,
        OpType::Ins6,
        OpType::Ins7,
        OpType::Ins8,
        OpType::Del1,
        OpType::Del2,
        OpType::Del3,
        OpType::Del4,
        OpType::Del5,
        OpType::Del6,
        OpType::Del7,
        OpType::Del8,
    ];

    pub fn is_insert(self) -> bool {
        (self as u8) < (OpType::Del1 as u8)
    }

    pub fn is_delete(self) -> bool {
        !self.is_insert()
    }

    pub fn name(self) -> &'static str {
        match self {
            OpType::Ins1 => "INS1",
            OpType::Ins2 => "INS2",
            OpType::Ins3 => "INS3",
            OpType::Ins4 => "INS4",
            OpType::Ins5 => "INS5",
            OpType::Ins6 => "INS6",
            OpType::Ins7 => "INS7",
            OpType::Ins8 => "INS8",
            OpType::Del1 => "DEL1",
            OpType::Del2 => "DEL2",
            OpType::Del3 => "DEL3",
            OpType::Del4 => "DEL4",
            OpType::Del5 => "DEL5",
            OpType::Del6 => "DEL6",
            OpType::Del7 => "DEL7",
            OpType::Del8 => "DEL8",
        }
    }
}

impl fmt::Display for OpType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Typed entity data carried by an update.
///
/// Insert payloads carry the entity as the system-under-test should store it:
/// the creation instant is set, the deletion instant is always absent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum Payload {
    AddPerson(Person),
    AddLike(LikesEdge),
    AddForum(Forum),
    AddMembership(HasMemberEdge),
    AddPost(Message),
    AddComment(Message),
    AddKnows(KnowsEdge),
    #[serde(rename_all = "camelCase")]
    RemovePerson {
        person_id: PersonId,
    },
    #[serde(rename_all = "camelCase")]
    RemoveLike {
        person_id: PersonId,
        message_id: MessageId,
    },
    #[serde(rename_all = "camelCase")]
    RemoveForum {
        forum_id: ForumId,
    },
    #[serde(rename_all = "camelCase")]
    RemoveMembership {
        forum_id: ForumId,
        person_id: PersonId,
    },
    #[serde(rename_all = "camelCase")]
    RemovePost {
        message_id: MessageId,
    },
    #[serde(rename_all = "camelCase")]
    RemoveComment {
        message_id: MessageId,
    },
    #[serde(rename_all = "camelCase")]
    RemoveKnows {
        person1_id: PersonId,
        person2_id: PersonId,
    },
}

impl Payload {
    pub fn is_insert(&self) -> bool {
        matches!(
            self,
            Payload::AddPerson(_)
                | Payload::AddLike(_)
                | Payload::AddForum(_)
                | Payload::AddMembership(_)
                | Payload::AddPost(_)
                | Payload::AddComment(_)
                | Payload::AddKnows(_)
        )
    }

    /// Checks that `op` is a valid type tag for this payload. Likes map to
    /// two op types (post vs comment target), so this is a relation, not a
    /// function.
    pub fn admits(&self, op: OpType) -> bool {
        use OpType::*;
        match self {
            Payload::AddPerson(_) => op == Ins1,
            Payload::AddLike(_) => op == Ins2 || op == Ins3,
            Payload::AddForum(_) => op == Ins4,
            Payload::AddMembership(_) => op == Ins5,
            Payload::AddPost(_) => op == Ins6,
            Payload::AddComment(_) => op == Ins7,
            Payload::AddKnows(_) => op == Ins8,
            Payload::RemovePerson { .. } => op == Del1,
            Payload::RemoveLike { .. } => op == Del2 || op == Del3,
            Payload::RemoveForum { .. } => op == Del4,
            Payload::RemoveMembership { .. } => op == Del5,
            Payload::RemovePost { .. } => op == Del6,
            Payload::RemoveComment { .. } => op == Del7,
            Payload::RemoveKnows { .. } => op == Del8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UpdateOperation {
    pub op_type: OpType,
    pub scheduled_time: SimInstant,
    /// Latest creation instant among the entities this operation needs.
    pub dependency_time: SimInstant,
    pub payload: Payload,
}

impl UpdateOperation {
    pub fn slack_millis(&self) -> i64 {
        self.scheduled_time - self.dependency_time
    }
}
