//! Workload driver: TCR-scaled scheduling, concurrent replay with
//! dependency tracking, short-read triggering, metrics, and sequential
//! cross-validation of two systems under test.

mod clock;
mod run;
mod schedule;
mod stats;
mod triggers;
mod validate;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

pub use clock::{dependency_gate, Gate, GlobalClock, WaitOutcome};
pub use run::{
    audit_violations, read_audit_log, run_benchmark, write_audit_log, AuditEntry, BenchmarkOutcome,
};
pub use schedule::{build_schedule, Schedule, ScheduleEntry, ScheduledOp, Tcr};
pub use stats::{
    compute_stats, nearest_rank, on_time_ratio, record_on_time, throughput, LatencyStats, OpClass,
    RunReport,
};
pub use triggers::{follow_ups, TriggerConfig};
pub use validate::{cross_validate, Divergence, DivergentOp, ValidationReport};

use crate::datagen::DatagenError;
use crate::model::{OpType, MILLIS_PER_SECOND};
use crate::paramgen::ParamgenError;
use crate::query::QueryVariant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum DriverMode {
    #[default]
    Benchmark,
    Validate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase")]
pub struct DriverConfig {
    /// Total compression ratio: wall time per unit of simulation time.
    pub tcr: f64,
    pub warmup_secs: f64,
    pub window_secs: f64,
    pub read_threads: usize,
    pub write_threads: usize,
    /// Must equal the generator's setting.
    pub t_safe_millis: i64,
    pub mode: DriverMode,
    /// One complex read of a variant after every `n` updates.
    pub frequencies: BTreeMap<QueryVariant, u32>,
    pub on_time_threshold_ms: u64,
    pub on_time_ratio_required: f64,
    /// An update waiting longer than this many T_safe wall spans (and at
    /// least `min_deadlock_wait_ms`) aborts the run.
    pub deadlock_multiple: u32,
    pub min_deadlock_wait_ms: u64,
    pub triggers: TriggerConfig,
}

/// Divisors giving roughly 0.39 complex reads per update.
pub fn default_frequencies() -> BTreeMap<QueryVariant, u32> {
    use QueryVariant::*;
    [
        (Cr3a, 13),
        (Cr3b, 13),
        (Cr13a, 13),
        (Cr13b, 13),
        (Cr14a, 25),
        (Cr14b, 25),
    ]
    .into_iter()
    .collect()
}

impl Default for DriverConfig {
    fn default() -> Self {
        Self {
            tcr: 1e-4,
            warmup_secs: 30.0,
            window_secs: 300.0,
            read_threads: 4,
            write_threads: 1,
            t_safe_millis: 10 * MILLIS_PER_SECOND,
            mode: DriverMode::Benchmark,
            frequencies: default_frequencies(),
            on_time_threshold_ms: 1000,
            on_time_ratio_required: 0.95,
            deadlock_multiple: 1000,
            min_deadlock_wait_ms: 5000,
            triggers: TriggerConfig::default(),
        }
    }
}

impl DriverConfig {
    pub fn validate(&self) -> Result<(), DriverError> {
        let bad = |m: &str| Err(DriverError::ConfigInvalid(m.to_string()));
        Tcr::new(self.tcr)?;
        if !(self.warmup_secs >= 0.0 && self.warmup_secs.is_finite()) {
            return bad("warmupSecs must be a non-negative number");
        }
        if !(self.window_secs >= 0.0 && self.window_secs.is_finite()) {
            return bad("windowSecs must be a non-negative number");
        }
        if self.read_threads == 0 || self.write_threads == 0 {
            return bad("readThreads and writeThreads must be at least 1");
        }
        if self.t_safe_millis < 0 {
            return bad("tSafeMillis must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.on_time_ratio_required) {
            return bad("onTimeRatioRequired must lie in [0, 1]");
        }
        if let Some(v) = self.frequencies.keys().find(|v| !v.is_complex()) {
            return Err(DriverError::ConfigInvalid(format!(
                "frequencies: {v} is not a complex read"
            )));
        }
        if !(0.0..=1.0).contains(&self.triggers.sr2_repeat_probability) {
            return bad("triggers.sr2RepeatProbability must lie in [0, 1]");
        }
        Ok(())
    }

    pub fn warmup(&self) -> Duration {
        Duration::from_secs_f64(self.warmup_secs)
    }

    pub fn window(&self) -> Duration {
        Duration::from_secs_f64(self.window_secs)
    }

    pub fn on_time_threshold(&self) -> Duration {
        Duration::from_millis(self.on_time_threshold_ms)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DriverError {
    #[error("no parameter bucket for {day}")]
    MissingBucket { day: NaiveDate },
    #[error("invalid driver configuration: {0}")]
    ConfigInvalid(String),
    #[error("update {index} waited {waited_ms} ms for dependency time {dependency_time}")]
    DeadlockSuspected {
        index: usize,
        dependency_time: crate::model::SimInstant,
        waited_ms: u64,
    },
    #[error("empty latency series")]
    EmptySeries,
    #[error("validation failed: {0}")]
    ValidationFailed(Box<Divergence>),
    #[error(transparent)]
    Datagen(#[from] DatagenError),
    #[error(transparent)]
    Paramgen(#[from] ParamgenError),
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

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DriverError + '_ {
    move |source| DriverError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Report class of an update type.
pub(crate) fn op_class(op: OpType) -> OpClass {
    if op.is_insert() {
        OpClass::Ins
    } else {
        OpClass::Del
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_mix_is_near_eight_to_twenty() {
        let cr_per_update: f64 = default_frequencies()
            .values()
            .map(|&f| 1.0 / f as f64)
            .sum();
        assert!((cr_per_update / 0.4 - 1.0).abs() < 0.05, "{cr_per_update}");
        DriverConfig::default().validate().unwrap();
    }

    #[test]
    fn invalid_configs_name_the_field() {
        let c = DriverConfig {
            tcr: 0.0,
            ..DriverConfig::default()
        };
        assert!(matches!(c.validate(), Err(DriverError::ConfigInvalid(m)) if m.contains("tcr")));
        let c = DriverConfig {
            read_threads: 0,
            ..DriverConfig::default()
        };
        assert!(
            matches!(c.validate(), Err(DriverError::ConfigInvalid(m)) if m.contains("readThreads"))
        );
        let mut c = DriverConfig::default();
        c.frequencies.insert(QueryVariant::Sr2, 3);
        assert!(matches!(c.validate(), Err(DriverError::ConfigInvalid(m)) if m.contains("SR2")));
    }
}
