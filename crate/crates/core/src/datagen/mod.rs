//! Temporal graph generation, the cutoff split and artifact I/O.

mod config;
mod generate;
mod io;
mod split;
mod tsafe;

use std::path::PathBuf;

pub use config::GenConfig;
pub use generate::generate_temporal_graph;
pub use io::{
    deserialize, read_config, read_graph, serialize, write_config, write_graph, CONFIG_FILE,
    SNAPSHOT_DIR, STREAM_FILE, TEMPORAL_DIR,
};
pub use split::{split_at_cutoff, SnapshotAndStream};
pub use tsafe::enforce_t_safe;

use crate::model::SimInstant;

#[derive(Debug, thiserror::Error)]
pub enum DatagenError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("operation {index} needs scheduling at {required}, after simulation end {end}")]
    UnsatisfiableDependency {
        index: usize,
        required: SimInstant,
        end: SimInstant,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
}

/// Generates, splits and enforces T_safe in one call.
pub fn generate_dataset(
    config: &GenConfig,
) -> Result<(crate::model::TemporalGraph, SnapshotAndStream), DatagenError> {
    let graph = generate_temporal_graph(config)?;
    let mut split = split_at_cutoff(&graph, config);
    split.stream = enforce_t_safe(split.stream, config.t_safe_millis, config.simulation_end)?;
    Ok((graph, split))
}
