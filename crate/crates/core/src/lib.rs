//! A desk-scale transactional graph benchmark: temporal social-network
//! generation with cascading deletes, per-day parameter curation, a
//! dependency-tracking workload driver, and an in-memory snapshot-isolated
//! reference store.

pub mod acid;
pub mod datagen;
pub mod driver;
pub mod model;
pub mod paramgen;
pub mod pipeline;
pub mod query;
pub mod refstore;
