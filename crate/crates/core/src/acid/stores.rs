use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::model::{
    Message, MessageId, ModeratorDeletion, PersonId, TemporalGraph, UpdateOperation,
};
use crate::query::{QueryInstance, QueryResult, SutError};
use crate::refstore::{RefStore, StoreSnapshot};

/// Store surface the isolation scenarios drive: read transactions plus
/// writes with a hook that runs after every primitive write.
pub trait TxStore: Send + Sync {
    fn name(&self) -> &'static str;
    fn begin(&self) -> Box<dyn ReadTx + '_>;
    fn insert(&self, op: &UpdateOperation, hook: &mut dyn FnMut(usize)) -> Result<(), SutError>;
    fn delete(&self, op: &UpdateOperation, hook: &mut dyn FnMut(usize)) -> Result<(), SutError>;
}

/// Reads of one transaction.
pub trait ReadTx {
    fn person_exists(&self, id: PersonId) -> bool;
    fn friends(&self, id: PersonId) -> Vec<PersonId>;
    fn message(&self, id: MessageId) -> Option<Arc<Message>>;
    fn query(&self, q: &QueryInstance) -> Result<QueryResult, SutError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StoreKind {
    /// The versioned reference store.
    Reference,
    /// Control: every read sees the latest published state.
    ReadLatest,
    /// Control: deletes publish their root before the rest of the cascade.
    SplitCascade,
}

impl StoreKind {
    pub const ALL: [StoreKind; 3] = [
        StoreKind::Reference,
        StoreKind::ReadLatest,
        StoreKind::SplitCascade,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StoreKind::Reference => "reference",
            StoreKind::ReadLatest => "read-latest",
            StoreKind::SplitCascade => "split-cascade",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn load(self, graph: &TemporalGraph) -> Result<Box<dyn TxStore>, SutError> {
        let store = RefStore::bulk_load(graph, ModeratorDeletion::DeleteForum)?;
        Ok(match self {
            StoreKind::Reference => Box::new(Reference(store)),
            StoreKind::ReadLatest => Box::new(ReadLatest(store)),
            StoreKind::SplitCascade => Box::new(SplitCascade(store)),
        })
    }
}

struct Pinned<'a>(StoreSnapshot<'a>);

impl ReadTx for Pinned<'_> {
    fn person_exists(&self, id: PersonId) -> bool {
        self.0.person(id).is_some()
    }
    fn friends(&self, id: PersonId) -> Vec<PersonId> {
        self.0.friends(id)
    }
    fn message(&self, id: MessageId) -> Option<Arc<Message>> {
        self.0.message(id)
    }
    fn query(&self, q: &QueryInstance) -> Result<QueryResult, SutError> {
        self.0.execute(q)
    }
}

fn insert(
    store: &RefStore,
    op: &UpdateOperation,
    hook: &mut dyn FnMut(usize),
) -> Result<(), SutError> {
    store.apply_insert_with_hook(op, hook).map(|_| ())
}

struct Reference(RefStore);

impl TxStore for Reference {
    fn name(&self) -> &'static str {
        StoreKind::Reference.name()
    }
    fn begin(&self) -> Box<dyn ReadTx + '_> {
        Box::new(Pinned(self.0.snapshot()))
    }
    fn insert(&self, op: &UpdateOperation, hook: &mut dyn FnMut(usize)) -> Result<(), SutError> {
        insert(&self.0, op, hook)
    }
    fn delete(&self, op: &UpdateOperation, hook: &mut dyn FnMut(usize)) -> Result<(), SutError> {
        self.0.apply_delete_with_hook(op, hook).map(|_| ())
    }
}

struct ReadLatest(RefStore);

struct Latest<'a>(&'a RefStore);

impl ReadTx for Latest<'_> {
    fn person_exists(&self, id: PersonId) -> bool {
        self.0.snapshot().person(id).is_some()
    }
    fn friends(&self, id: PersonId) -> Vec<PersonId> {
        self.0.snapshot().friends(id)
    }
    fn message(&self, id: MessageId) -> Option<Arc<Message>> {
        self.0.snapshot().message(id)
    }
    fn query(&self, q: &QueryInstance) -> Result<QueryResult, SutError> {
        self.0.snapshot().execute(q)
    }
}

impl TxStore for ReadLatest {
    fn name(&self) -> &'static str {
        StoreKind::ReadLatest.name()
    }
    fn begin(&self) -> Box<dyn ReadTx + '_> {
        Box::new(Latest(&self.0))
    }
    fn insert(&self, op: &UpdateOperation, hook: &mut dyn FnMut(usize)) -> Result<(), SutError> {
        insert(&self.0, op, hook)
    }
    fn delete(&self, op: &UpdateOperation, hook: &mut dyn FnMut(usize)) -> Result<(), SutError> {
        self.0.apply_delete_with_hook(op, hook).map(|_| ())
    }
}

struct SplitCascade(RefStore);

impl TxStore for SplitCascade {
    fn name(&self) -> &'static str {
        StoreKind::SplitCascade.name()
    }
    fn begin(&self) -> Box<dyn ReadTx + '_> {
        Box::new(Pinned(self.0.snapshot()))
    }
    fn insert(&self, op: &UpdateOperation, hook: &mut dyn FnMut(usize)) -> Result<(), SutError> {
        insert(&self.0, op, hook)
    }
    fn delete(&self, op: &UpdateOperation, hook: &mut dyn FnMut(usize)) -> Result<(), SutError> {
        self.0.apply_delete_split(op, hook)
    }
}
