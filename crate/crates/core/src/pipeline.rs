//! End-to-end orchestration: generate, curate, load, validate or benchmark,
//! and report.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::datagen::{self, GenConfig, SnapshotAndStream, TEMPORAL_DIR};
use crate::driver::{self, DriverConfig, DriverMode, RunReport, TriggerConfig, ValidationReport};
use crate::model::{OpType, TemporalGraph};
use crate::paramgen::{self, ParamgenConfig};
use crate::refstore::naive::NaiveStore;
use crate::refstore::RefStore;

pub const DATA_DIR: &str = "data";
pub const PARAMS_DIR: &str = "params";
pub const REPORT_FILE: &str = "fdr.json";
pub const SUMMARY_FILE: &str = "fdr.txt";
pub const AUDIT_FILE: &str = "audit.ldjson";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase")]
pub struct PipelineConfig {
    pub datagen: GenConfig,
    pub paramgen: ParamgenConfig,
    pub driver: DriverConfig,
    pub out_dir: PathBuf,
    /// Write the commit audit log of a benchmark run.
    pub audit_log: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let datagen = GenConfig::default();
        let driver = DriverConfig {
            t_safe_millis: datagen.t_safe_millis,
            ..DriverConfig::default()
        };
        Self {
            datagen,
            paramgen: ParamgenConfig::default(),
            driver,
            out_dir: PathBuf::from("out"),
            audit_log: true,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let field = |field: &str, message: String| PipelineError::Config {
            field: field.to_string(),
            message,
        };
        self.datagen
            .validate()
            .map_err(|e| field("datagen", e.to_string()))?;
        self.driver
            .validate()
            .map_err(|e| field("driver", e.to_string()))?;
        if self.driver.t_safe_millis != self.datagen.t_safe_millis {
            return Err(field(
                "driver.tSafeMillis",
                format!(
                    "{} differs from datagen.tSafeMillis {}",
                    self.driver.t_safe_millis, self.datagen.t_safe_millis
                ),
            ));
        }
        if self.out_dir.as_os_str().is_empty() {
            return Err(field("outDir", "must not be empty".into()));
        }
        fs::create_dir_all(&self.out_dir).map_err(|e| {
            field(
                "outDir",
                format!("cannot create {}: {e}", self.out_dir.display()),
            )
        })?;
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid configuration field {field}: {message}")]
    Config { field: String, message: String },
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
}

fn stage<E: std::error::Error + Send + Sync + 'static>(
    stage: &'static str,
) -> impl FnOnce(E) -> PipelineError {
    move |e| PipelineError::Stage {
        stage,
        source: Box::new(e),
    }
}

/// Counts in the categories of the published per-scale data-set table.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DatasetStats {
    pub persons: usize,
    pub knows: usize,
    /// Persons, forums and messages in the initial snapshot.
    pub nodes: usize,
    /// Knows, membership and like edges in the initial snapshot.
    pub edges: usize,
    pub insert_ops: usize,
    pub delete_ops: usize,
    /// `deleteOps / insertOps`; 0 without inserts.
    pub delete_insert_ratio: f64,
    pub ops_by_type: BTreeMap<OpType, usize>,
    pub expired_before_cutoff: usize,
}

pub fn emit_stats(data: &SnapshotAndStream) -> DatasetStats {
    graph_stats(&data.snapshot, &data.stream, data.expired_before_cutoff)
}

fn graph_stats(
    snapshot: &TemporalGraph,
    stream: &[crate::model::UpdateOperation],
    expired: usize,
) -> DatasetStats {
    let c = snapshot.counts();
    let mut ops_by_type = BTreeMap::new();
    for op in stream {
        *ops_by_type.entry(op.op_type).or_insert(0) += 1;
    }
    let insert_ops = stream.iter().filter(|o| o.op_type.is_insert()).count();
    let delete_ops = stream.len() - insert_ops;
    DatasetStats {
        persons: c.persons,
        knows: c.knows,
        nodes: c.persons + c.forums + c.posts + c.comments,
        edges: c.knows + c.memberships + c.likes,
        insert_ops,
        delete_ops,
        delete_insert_ratio: if insert_ops == 0 {
            0.0
        } else {
            delete_ops as f64 / insert_ops as f64
        },
        ops_by_type,
        expired_before_cutoff: expired,
    }
}

/// Reads the serialized data set under `dir` and counts it.
pub fn emit_stats_dir(dir: &Path) -> Result<DatasetStats, datagen::DatagenError> {
    Ok(emit_stats(&datagen::deserialize(dir)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Environment {
    pub os: String,
    pub arch: String,
    pub cpus: usize,
    pub version: String,
    pub system_under_test: String,
}

impl Environment {
    fn current(sut: &str) -> Self {
        Self {
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
            cpus: std::thread::available_parallelism().map_or(1, |n| n.get()),
            version: env!("CARGO_PKG_VERSION").to_string(),
            system_under_test: sut.to_string(),
        }
    }
}

/// Full disclosure of one pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FdrReport {
    pub config: PipelineConfig,
    pub dataset: DatasetStats,
    pub parameter_days: usize,
    pub partial_parameter_days: usize,
    pub scheduled_operations: usize,
    pub mode: DriverMode,
    pub run: Option<RunReport>,
    pub validation: Option<ValidationReport>,
    /// Commit-audit entries that started before their dependency committed.
    pub audit_violations: Option<usize>,
    pub environment: Environment,
    pub stage_seconds: BTreeMap<String, f64>,
}

/// Fields every report carries, as JSON pointers with their types.
const REQUIRED: &[(&str, fn(&Value) -> bool)] = &[
    ("/config", Value::is_object),
    ("/config/outDir", Value::is_string),
    ("/dataset/persons", Value::is_u64),
    ("/dataset/knows", Value::is_u64),
    ("/dataset/nodes", Value::is_u64),
    ("/dataset/edges", Value::is_u64),
    ("/dataset/insertOps", Value::is_u64),
    ("/dataset/deleteOps", Value::is_u64),
    ("/dataset/deleteInsertRatio", Value::is_number),
    ("/dataset/opsByType", Value::is_object),
    ("/parameterDays", Value::is_u64),
    ("/scheduledOperations", Value::is_u64),
    ("/mode", Value::is_string),
    ("/environment/os", Value::is_string),
    ("/environment/cpus", Value::is_u64),
    ("/stageSeconds", Value::is_object),
];

const RUN_FIELDS: &[(&str, fn(&Value) -> bool)] = &[
    ("/run/throughput", Value::is_number),
    ("/run/totalOps", Value::is_u64),
    ("/run/perClass", Value::is_object),
    ("/run/onTimeRatio", Value::is_number),
    ("/run/valid", Value::is_boolean),
    ("/run/perOperation", Value::is_object),
];

const VALIDATION_FIELDS: &[(&str, fn(&Value) -> bool)] = &[
    ("/validation/operations", Value::is_u64),
    ("/validation/diffs", Value::is_u64),
    ("/validation/firstPerVariant", Value::is_object),
];

/// Checks a serialized report against the fields and types readers rely
/// on. Benchmark reports need `run`, validation reports `validation`.
pub fn check_report_schema(report: &Value) -> Result<(), String> {
    let check = |fields: &[(&str, fn(&Value) -> bool)]| {
        for (ptr, ok) in fields {
            match report.pointer(ptr) {
                Some(v) if ok(v) => {}
                Some(v) => return Err(format!("{ptr} has unexpected type: {v}")),
                None => return Err(format!("{ptr} missing")),
            }
        }
        Ok(())
    };
    check(REQUIRED)?;
    match report.pointer("/mode").and_then(Value::as_str) {
        Some("benchmark") => check(RUN_FIELDS),
        Some("validate") => check(VALIDATION_FIELDS),
        other => Err(format!("/mode has unknown value {other:?}")),
    }?;
    let per_class = report.pointer("/run/perClass").and_then(Value::as_object);
    if let (Some(total), Some(classes)) = (
        report.pointer("/run/totalOps").and_then(Value::as_u64),
        per_class,
    ) {
        let sum: u64 = classes.values().filter_map(Value::as_u64).sum();
        if sum != total {
            return Err(format!(
                "/run/totalOps {total} differs from the per-class sum {sum}"
            ));
        }
    }
    Ok(())
}

/// Runs every stage in order and writes `fdr.json` and `fdr.txt` under
/// the output directory.
pub fn run_pipeline(config: &PipelineConfig) -> Result<FdrReport, PipelineError> {
    config.validate()?;
    let out = &config.out_dir;
    let mut seconds = BTreeMap::new();
    let mut timed = |name: &str, start: Instant| {
        seconds.insert(name.to_string(), start.elapsed().as_secs_f64());
        tracing::info!(
            stage = name,
            secs = start.elapsed().as_secs_f64(),
            "stage done"
        );
    };

    let t = Instant::now();
    let data_dir = out.join(DATA_DIR);
    let (graph, split) = datagen::generate_dataset(&config.datagen).map_err(stage("datagen"))?;
    datagen::serialize(&split, &data_dir).map_err(stage("datagen"))?;
    datagen::write_config(&data_dir, &config.datagen).map_err(stage("datagen"))?;
    datagen::write_graph(&data_dir.join(TEMPORAL_DIR), &graph).map_err(stage("datagen"))?;
    let dataset = emit_stats(&split);
    timed("datagen", t);

    let t = Instant::now();
    let buckets = match (split.stream.first(), split.stream.last()) {
        (Some(first), Some(last)) => paramgen::generate_parameters(
            &graph,
            first.scheduled_time.day(),
            last.scheduled_time.day(),
            &config.paramgen,
        )
        .map_err(stage("paramgen"))?,
        _ => Vec::new(),
    };
    paramgen::write_parameters(&out.join(PARAMS_DIR), &buckets, &config.paramgen)
        .map_err(stage("paramgen"))?;
    timed("paramgen", t);

    let t = Instant::now();
    let policy = config.datagen.moderator_deletion;
    let store = RefStore::bulk_load(&split.snapshot, policy).map_err(stage("load"))?;
    let schedule = driver::build_schedule(&split.stream, &buckets, &config.driver, split.cutoff)
        .map_err(stage("load"))?;
    timed("load", t);

    let (mut run, mut validation, mut violations) = (None, None, None);
    let t = Instant::now();
    match config.driver.mode {
        DriverMode::Benchmark => {
            let outcome = driver::run_benchmark(&schedule, &store, &config.driver)
                .map_err(stage("benchmark"))?;
            violations = Some(driver::audit_violations(&outcome.audit).len());
            if config.audit_log {
                driver::write_audit_log(&out.join(AUDIT_FILE), &outcome.audit)
                    .map_err(stage("benchmark"))?;
            }
            run = Some(outcome.report);
            timed("benchmark", t);
        }
        DriverMode::Validate => {
            let naive = NaiveStore::new(split.snapshot.clone(), policy);
            let triggers: &TriggerConfig = &config.driver.triggers;
            validation = Some(driver::cross_validate(&schedule, &store, &naive, triggers));
            timed("validate", t);
        }
    }

    let report = FdrReport {
        config: config.clone(),
        dataset,
        parameter_days: buckets.len(),
        partial_parameter_days: buckets.iter().filter(|b| b.partial).count(),
        scheduled_operations: schedule.entries.len(),
        mode: config.driver.mode,
        run,
        validation,
        audit_violations: violations,
        environment: Environment::current(crate::query::SystemUnderTest::name(&store)),
        stage_seconds: seconds,
    };
    write_report(out, &report).map_err(stage("report"))?;
    Ok(report)
}

fn write_report(out: &Path, report: &FdrReport) -> std::io::Result<()> {
    fs::write(
        out.join(REPORT_FILE),
        serde_json::to_string_pretty(report).expect("serializable"),
    )?;
    fs::write(out.join(SUMMARY_FILE), summary(report))
}

/// Human-readable digest of a report.
pub fn summary(r: &FdrReport) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    let d = &r.dataset;
    let _ = writeln!(s, "Full disclosure report");
    let _ = writeln!(s, "  persons            {}", d.persons);
    let _ = writeln!(s, "  knows              {}", d.knows);
    let _ = writeln!(s, "  nodes / edges      {} / {}", d.nodes, d.edges);
    let _ = writeln!(
        s,
        "  insert / delete    {} / {} (ratio {:.4})",
        d.insert_ops, d.delete_ops, d.delete_insert_ratio
    );
    let _ = writeln!(
        s,
        "  parameter days     {} ({} partial)",
        r.parameter_days, r.partial_parameter_days
    );
    let _ = writeln!(s, "  scheduled ops      {}", r.scheduled_operations);
    if let Some(run) = &r.run {
        let _ = writeln!(s, "Benchmark");
        let _ = writeln!(s, "  throughput         {:.2} ops/s", run.throughput);
        let _ = writeln!(s, "  measured ops       {}", run.total_ops);
        for (class, n) in &run.per_class {
            let _ = writeln!(
                s,
                "    {:<4}             {n}",
                serde_json::to_value(class).unwrap().as_str().unwrap_or("?")
            );
        }
        let _ = writeln!(s, "  on-time ratio      {:.4}", run.on_time_ratio);
        let _ = writeln!(s, "  valid              {}", run.valid);
        for (name, st) in &run.per_operation {
            let _ = writeln!(
                s,
                "    {name:<6} n={} mean={:.0}us p50={}us p95={}us p99={}us max={}us",
                st.count, st.mean_us, st.p50_us, st.p95_us, st.p99_us, st.max_us
            );
        }
    }
    if let Some(v) = r.audit_violations {
        let _ = writeln!(s, "  audit violations   {v}");
    }
    if let Some(v) = &r.validation {
        let _ = writeln!(s, "Cross-validation {} vs {}", v.left, v.right);
        let _ = writeln!(s, "  operations         {}", v.operations);
        let _ = writeln!(s, "  diffs              {}", v.diffs);
        for (name, d) in &v.first_per_variant {
            let _ = writeln!(s, "    first {name} divergence at entry {}", d.index);
        }
    }
    let _ = writeln!(
        s,
        "Environment {} {} ({} cpus), version {}",
        r.environment.os, r.environment.arch, r.environment.cpus, r.environment.version
    );
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_graph_has_zero_stats() {
        let s = graph_stats(&TemporalGraph::default(), &[], 0);
        assert_eq!(s, DatasetStats::default());
    }

    #[test]
    fn mismatched_t_safe_names_the_field() {
        let mut c = PipelineConfig {
            out_dir: tempfile::tempdir().unwrap().keep(),
            ..PipelineConfig::default()
        };
        c.driver.t_safe_millis += 1;
        match c.validate() {
            Err(PipelineError::Config { field, .. }) => assert_eq!(field, "driver.tSafeMillis"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn uncreatable_out_dir_names_the_field() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("occupied");
        fs::write(&file, b"x").unwrap();
        let c = PipelineConfig {
            out_dir: file.join("sub"),
            ..PipelineConfig::default()
        };
        match run_pipeline(&c) {
            Err(PipelineError::Config { field, .. }) => assert_eq!(field, "outDir"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn schema_check_rejects_missing_and_inconsistent_fields() {
        let mut v = serde_json::json!({"mode": "benchmark"});
        assert!(check_report_schema(&v).unwrap_err().contains("/config"));
        v = serde_json::json!({
            "config": {"outDir": "x"},
            "dataset": {"persons": 1, "knows": 0, "nodes": 1, "edges": 0, "insertOps": 0, "deleteOps": 0,
                        "deleteInsertRatio": 0.0, "opsByType": {}},
            "parameterDays": 0, "scheduledOperations": 0, "mode": "benchmark",
            "environment": {"os": "linux", "cpus": 1}, "stageSeconds": {},
            "run": {"throughput": 0.0, "totalOps": 2, "perClass": {"CR": 1}, "onTimeRatio": 1.0, "valid": true,
                    "perOperation": {}}
        });
        assert!(check_report_schema(&v).unwrap_err().contains("per-class"));
        v["run"]["perClass"]["SR"] = 1.into();
        check_report_schema(&v).unwrap();
    }
}
