//! Schema subset, temporal semantics and identifiers shared by every stage.

pub mod dict;
mod entity;
mod graph;
mod ops;
mod time;

pub use entity::{
    canonical_pair, root_post_of, CountryId, Forum, ForumId, HasMemberEdge, KnowsEdge, LikesEdge,
    Message, MessageId, MessageKind, MessageLookup, ModelError, ModeratorDeletion, Person,
    PersonId, TagId, UniversityId,
};
pub use graph::{EntityCounts, TemporalGraph};
pub use ops::{OpType, Payload, UpdateOperation};
pub use time::{
    is_alive, Lifecycle, SimInstant, TimestampParseError, MILLIS_PER_DAY, MILLIS_PER_HOUR,
    MILLIS_PER_MINUTE, MILLIS_PER_SECOND, SIMULATION_END, SIMULATION_START,
};
