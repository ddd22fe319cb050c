use std::collections::BTreeMap;
use std::time::Duration;

use chrono::NaiveDate;
use parking_lot::Mutex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use snb_core::datagen::{generate_dataset, GenConfig, SnapshotAndStream};
use snb_core::driver::{
    audit_violations, build_schedule, cross_validate, run_benchmark, DivergentOp, DriverConfig,
    DriverError, OpClass, Schedule, TriggerConfig,
};
use snb_core::model::{
    ModeratorDeletion, OpType, Payload, PersonId, SimInstant, TemporalGraph, UpdateOperation,
};
use snb_core::paramgen::{generate_parameters, ParameterBucket, ParamgenConfig};
use snb_core::query::{
    QueryInstance, QueryParams, QueryResult, QueryVariant, SutError, SystemUnderTest, UpdateOutcome,
};
use snb_core::refstore::naive::NaiveStore;
use snb_core::refstore::RefStore;

/// Answers every operation after a fixed delay.
struct Stub {
    latency: Duration,
}

impl SystemUnderTest for Stub {
    fn name(&self) -> &str {
        "stub"
    }
    fn execute_query(&self, q: &QueryInstance) -> Result<QueryResult, SutError> {
        std::thread::sleep(self.latency);
        Ok(match q.variant {
            QueryVariant::Sr2 => QueryResult::Sr2(vec![]),
            _ => QueryResult::Cr13(4),
        })
    }
    fn execute_update(&self, _: &UpdateOperation) -> Result<UpdateOutcome, SutError> {
        std::thread::sleep(self.latency);
        Ok(UpdateOutcome {
            version: 0,
            cascade_size: 0,
        })
    }
    fn current_commit_version(&self) -> u64 {
        0
    }
}

fn synthetic_stream(anchor: SimInstant, n: i64, spacing_ms: i64) -> Vec<UpdateOperation> {
    (0..n)
        .map(|i| UpdateOperation {
            op_type: OpType::Del1,
            scheduled_time: anchor.plus_millis((i + 1) * spacing_ms),
            dependency_time: anchor.plus_millis(i * spacing_ms),
            payload: Payload::RemovePerson {
                person_id: PersonId(i as u64),
            },
        })
        .collect()
}

fn cr13_buckets(days: impl Iterator<Item = NaiveDate>) -> Vec<ParameterBucket> {
    days.map(|day| {
        let mut per_query = BTreeMap::new();
        per_query.insert(
            QueryVariant::Cr13b,
            vec![QueryParams::Cr13 {
                person1_id: PersonId(1),
                person2_id: PersonId(2),
            }],
        );
        ParameterBucket {
            day,
            per_query,
            partial: false,
            warnings: vec![],
        }
    })
    .collect()
}

#[test]
fn fixed_latency_stub_runs_on_time() {
    let anchor = SimInstant::from_ymd_hms(2012, 11, 29, 0, 0, 0);
    let stream = synthetic_stream(anchor, 300, 1000);
    let days: std::collections::BTreeSet<_> =
        stream.iter().map(|o| o.scheduled_time.day()).collect();
    let config = DriverConfig {
        tcr: 0.005,
        warmup_secs: 0.0,
        window_secs: 30.0,
        read_threads: 1,
        write_threads: 1,
        t_safe_millis: 1000,
        frequencies: [(QueryVariant::Cr13b, 10)].into_iter().collect(),
        ..DriverConfig::default()
    };
    let schedule =
        build_schedule(&stream, &cr13_buckets(days.into_iter()), &config, anchor).unwrap();
    let out = run_benchmark(
        &schedule,
        &Stub {
            latency: Duration::from_millis(1),
        },
        &config,
    )
    .unwrap();
    let r = &out.report;
    assert_eq!(r.on_time_ratio, 1.0);
    assert!(r.valid);
    assert!(r.schedule_exhausted);
    assert_eq!(r.per_class[&OpClass::Del], 300);
    assert_eq!(r.per_class[&OpClass::Cr], 30);
    // CR13b triggers SR2 on both endpoints; empty SR2 results trigger nothing.
    assert_eq!(r.per_class[&OpClass::Sr], 60);
    assert_eq!(r.total_ops, r.per_class.values().sum::<usize>());
    assert_eq!(r.on_time + r.late, 330);
    let del1 = &r.per_operation["DEL1"];
    assert_eq!(del1.count, 300);
    assert!(del1.min_us >= 1000);
    assert!(audit_violations(&out.audit).is_empty());
    assert_eq!(out.audit.len(), 300);
}

#[test]
fn empty_schedule_gives_zero_throughput() {
    let anchor = SimInstant::from_ymd_hms(2012, 11, 29, 0, 0, 0);
    let config = DriverConfig {
        warmup_secs: 0.0,
        window_secs: 1.0,
        ..DriverConfig::default()
    };
    let schedule = build_schedule(&[], &[], &config, anchor).unwrap();
    let out = run_benchmark(
        &schedule,
        &Stub {
            latency: Duration::ZERO,
        },
        &config,
    )
    .unwrap();
    assert_eq!(out.report.throughput, 0.0);
    assert_eq!(out.report.on_time_ratio, 1.0);
    assert!(out.report.valid);
}

#[test]
fn warmup_operations_are_not_measured() {
    let anchor = SimInstant::from_ymd_hms(2012, 11, 29, 0, 0, 0);
    let stream = synthetic_stream(anchor, 100, 1000);
    let config = DriverConfig {
        tcr: 0.002,
        warmup_secs: 0.1,
        window_secs: 0.1,
        frequencies: BTreeMap::new(),
        ..DriverConfig::default()
    };
    let schedule = build_schedule(&stream, &[], &config, anchor).unwrap();
    let out = run_benchmark(
        &schedule,
        &Stub {
            latency: Duration::ZERO,
        },
        &config,
    )
    .unwrap();
    // Updates land every 2 ms from 2 ms on: 49 in warm-up, 50 measured,
    // the last one past the window.
    assert_eq!(out.report.total_ops, 50);
    assert!(!out.report.schedule_exhausted);
    assert_eq!(out.audit.len(), 99);
}

/// Never lets a dependency confirm: an update at a later time with its
/// dependency on an op that was never scheduled.
#[test]
fn unconfirmable_dependency_is_reported_as_deadlock() {
    let anchor = SimInstant::from_ymd_hms(2012, 11, 29, 0, 0, 0);
    let mut stream = synthetic_stream(anchor, 2, 1000);
    stream[1].dependency_time = stream[1].scheduled_time;
    let config = DriverConfig {
        tcr: 0.001,
        warmup_secs: 0.0,
        window_secs: 5.0,
        min_deadlock_wait_ms: 200,
        deadlock_multiple: 1,
        frequencies: BTreeMap::new(),
        ..DriverConfig::default()
    };
    let schedule = build_schedule(&stream, &[], &config, anchor).unwrap();
    let err = run_benchmark(
        &schedule,
        &Stub {
            latency: Duration::ZERO,
        },
        &config,
    )
    .unwrap_err();
    assert!(
        matches!(err, DriverError::DeadlockSuspected { index: 1, .. }),
        "{err}"
    );
}

fn dataset(seed: u64, n: usize) -> (GenConfig, TemporalGraph, SnapshotAndStream) {
    let cfg = GenConfig::with_persons(seed, n);
    let (g, split) = generate_dataset(&cfg).unwrap();
    (cfg, g, split)
}

fn schedule_for(g: &TemporalGraph, split: &SnapshotAndStream, config: &DriverConfig) -> Schedule {
    let first = split.stream.first().unwrap().scheduled_time.day();
    let last = split.stream.last().unwrap().scheduled_time.day();
    let buckets = generate_parameters(g, first, last, &ParamgenConfig::default()).unwrap();
    build_schedule(&split.stream, &buckets, config, split.cutoff).unwrap()
}

/// Delays each call by a random amount so concurrent workers interleave.
struct Jitter<S> {
    inner: S,
    rng: Mutex<ChaCha8Rng>,
}

impl<S: SystemUnderTest> Jitter<S> {
    fn pause(&self) {
        let us = self.rng.lock().gen_range(0..40);
        if us > 20 {
            std::thread::sleep(Duration::from_micros(us));
        }
    }
}

impl<S: SystemUnderTest> SystemUnderTest for Jitter<S> {
    fn name(&self) -> &str {
        self.inner.name()
    }
    fn execute_query(&self, q: &QueryInstance) -> Result<QueryResult, SutError> {
        self.pause();
        self.inner.execute_query(q)
    }
    fn execute_update(&self, op: &UpdateOperation) -> Result<UpdateOutcome, SutError> {
        self.pause();
        self.inner.execute_update(op)
    }
    fn current_commit_version(&self) -> u64 {
        self.inner.current_commit_version()
    }
}

#[test]
fn concurrent_replay_on_the_reference_store_respects_dependencies() {
    let (cfg, g, split) = dataset(11, 200);
    let config = DriverConfig {
        tcr: 1e-6,
        warmup_secs: 0.0,
        window_secs: 600.0,
        read_threads: 4,
        write_threads: 4,
        t_safe_millis: cfg.t_safe_millis,
        ..DriverConfig::default()
    };
    let schedule = schedule_for(&g, &split, &config);
    let store = RefStore::bulk_load(&split.snapshot, cfg.moderator_deletion).unwrap();
    let sut = Jitter {
        inner: store,
        rng: Mutex::new(ChaCha8Rng::seed_from_u64(3)),
    };
    let out = run_benchmark(&schedule, &sut, &config).unwrap();
    assert!(audit_violations(&out.audit).is_empty());
    assert_eq!(out.audit.len(), split.stream.len());
    let update_errors: Vec<_> = out
        .report
        .errors
        .keys()
        .filter(|k| k.starts_with("INS") || k.starts_with("DEL"))
        .collect();
    assert!(update_errors.is_empty(), "{update_errors:?}");
    assert_eq!(sut.inner.export(), g.state_at(cfg.simulation_end));
}

/// Returns CR13 lengths one too long.
struct OffByOne(RefStore);

impl SystemUnderTest for OffByOne {
    fn name(&self) -> &str {
        "off-by-one"
    }
    fn execute_query(&self, q: &QueryInstance) -> Result<QueryResult, SutError> {
        match self.0.execute_query(q)? {
            QueryResult::Cr13(k) => Ok(QueryResult::Cr13(k + 1)),
            r => Ok(r),
        }
    }
    fn execute_update(&self, op: &UpdateOperation) -> Result<UpdateOutcome, SutError> {
        self.0.execute_update(op)
    }
    fn current_commit_version(&self) -> u64 {
        self.0.current_commit_version()
    }
}

#[test]
fn cross_validation_finds_no_diffs_between_identical_stores() {
    let (cfg, g, split) = dataset(12, 150);
    let config = DriverConfig::default();
    let schedule = schedule_for(&g, &split, &config);
    let a = RefStore::bulk_load(&split.snapshot, cfg.moderator_deletion).unwrap();
    let b = RefStore::bulk_load(&split.snapshot, cfg.moderator_deletion).unwrap();
    let report = cross_validate(&schedule, &a, &b, &TriggerConfig::default());
    assert_eq!(report.diffs, 0);
    assert!(report.operations > schedule.entries.len());
    report.into_result().unwrap();
}

#[test]
fn cross_validation_reports_the_first_wrong_cr13() {
    let (cfg, g, split) = dataset(12, 150);
    let config = DriverConfig::default();
    let schedule = schedule_for(&g, &split, &config);
    let a = RefStore::bulk_load(&split.snapshot, cfg.moderator_deletion).unwrap();
    let b = OffByOne(RefStore::bulk_load(&split.snapshot, cfg.moderator_deletion).unwrap());
    let report = cross_validate(&schedule, &a, &b, &TriggerConfig::default());
    let first_cr13 = schedule
        .entries
        .iter()
        .position(|e| matches!(&e.op, snb_core::driver::ScheduledOp::Query(q) if q.variant == QueryVariant::Cr13a))
        .unwrap();
    let d = &report.first_per_variant["CR13a"];
    assert_eq!(d.index, first_cr13);
    assert!(matches!(&d.op, DivergentOp::Query(q) if q.variant == QueryVariant::Cr13a));
    assert_ne!(d.left, d.right);
    assert!(report
        .first_per_variant
        .keys()
        .all(|k| k.starts_with("CR13")));
    let err = report.into_result().unwrap_err();
    assert!(matches!(err, DriverError::ValidationFailed(_)));
}

#[test]
fn reference_and_naive_stores_cross_validate_cleanly() {
    for policy in [ModeratorDeletion::DeleteForum, ModeratorDeletion::KeepForum] {
        let mut cfg = GenConfig::with_persons(13, 120);
        cfg.moderator_deletion = policy;
        let (g, split) = generate_dataset(&cfg).unwrap();
        let schedule = schedule_for(&g, &split, &DriverConfig::default());
        let a = RefStore::bulk_load(&split.snapshot, policy).unwrap();
        let b = NaiveStore::new(split.snapshot.clone(), policy);
        let report = cross_validate(&schedule, &a, &b, &TriggerConfig::default());
        assert_eq!(report.diffs, 0, "{:?}", report.first_per_variant);
    }
}
