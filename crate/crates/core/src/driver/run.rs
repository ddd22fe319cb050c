use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::time::{Duration, Instant};

use crossbeam_channel::{unbounded, Receiver};
use parking_lot::Mutex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::clock::{GlobalClock, WaitOutcome};
use super::schedule::{Schedule, ScheduledOp};
use super::stats::{build_report, record_on_time, OpClass, OpRecord, RunReport};
use super::triggers::follow_ups;
use super::{io_err, op_class, DriverConfig, DriverError};
use crate::model::{SimInstant, UpdateOperation};
use crate::query::{QueryInstance, SystemUnderTest};

/// Commit-order evidence for one executed update. Tickets come from one
/// global counter: `start_ticket` is drawn after the dependency gate opens,
/// `commit_ticket` after the store returns and before the clock confirms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AuditEntry {
    pub index: usize,
    pub scheduled_time: SimInstant,
    pub dependency_time: SimInstant,
    pub start_ticket: u64,
    pub commit_ticket: u64,
}

#[derive(Debug, Clone)]
pub struct BenchmarkOutcome {
    pub report: RunReport,
    pub audit: Vec<AuditEntry>,
}

/// Indices of audited updates that started before every update scheduled
/// at or before their dependency time had committed.
pub fn audit_violations(audit: &[AuditEntry]) -> Vec<usize> {
    let mut by_time: Vec<&AuditEntry> = audit.iter().collect();
    by_time.sort_by_key(|e| (e.scheduled_time, e.index));
    let mut prefix_max = Vec::with_capacity(by_time.len());
    let mut m = 0;
    for e in &by_time {
        m = m.max(e.commit_ticket);
        prefix_max.push(m);
    }
    let mut bad: Vec<usize> = audit
        .iter()
        .filter(|e| {
            let n = by_time.partition_point(|o| o.scheduled_time <= e.dependency_time);
            n > 0 && prefix_max[n - 1] >= e.start_ticket
        })
        .map(|e| e.index)
        .collect();
    bad.sort_unstable();
    bad
}

pub fn write_audit_log(path: &Path, audit: &[AuditEntry]) -> Result<(), DriverError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    for e in audit {
        let line = serde_json::to_string(e).expect("serializable");
        writeln!(out, "{line}").map_err(io_err(path))?;
    }
    out.flush().map_err(io_err(path))
}

pub fn read_audit_log(path: &Path) -> Result<Vec<AuditEntry>, DriverError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| DriverError::Parse {
            path: path.to_path_buf(),
            line: i as u64 + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

struct Job {
    index: usize,
    scheduled_wall: Duration,
    measured: bool,
}

struct Shared<'a> {
    schedule: &'a Schedule,
    sut: &'a dyn SystemUnderTest,
    config: &'a DriverConfig,
    clock: GlobalClock,
    abort: AtomicBool,
    tickets: AtomicU64,
    start: Instant,
    deadlock: Mutex<Option<DriverError>>,
}

impl Shared<'_> {
    fn now(&self) -> Duration {
        self.start.elapsed()
    }

    fn on_time(&self, job: &Job, started: Duration) -> Option<bool> {
        Some(record_on_time(
            job.scheduled_wall,
            started,
            self.config.on_time_threshold(),
        ))
    }
}

/// Replays `schedule` against `sut` from wall offset zero. Operations
/// scheduled before the warm-up ends run unmeasured; dispatch stops at the
/// end of the measurement window or when the schedule runs out.
pub fn run_benchmark(
    schedule: &Schedule,
    sut: &dyn SystemUnderTest,
    config: &DriverConfig,
) -> Result<BenchmarkOutcome, DriverError> {
    config.validate()?;
    let updates: Vec<usize> = schedule
        .entries
        .iter()
        .enumerate()
        .filter(|(_, e)| matches!(e.op, ScheduledOp::Update(_)))
        .map(|(i, _)| i)
        .collect();
    let first_update = updates.first().map(|&i| schedule.entries[i].sim_time);
    let shared = Shared {
        schedule,
        sut,
        config,
        clock: GlobalClock::new(first_update),
        abort: AtomicBool::new(false),
        tickets: AtomicU64::new(0),
        start: Instant::now(),
        deadlock: Mutex::new(None),
    };
    let (warmup, window) = (config.warmup(), config.window());
    let horizon = warmup + window;
    let (write_tx, write_rx) = unbounded::<Job>();
    let (read_tx, read_rx) = unbounded::<Job>();

    let (records, audit, exhausted, finished) = std::thread::scope(|s| {
        let writers: Vec<_> = (0..config.write_threads)
            .map(|_| {
                let rx = write_rx.clone();
                let sh = &shared;
                s.spawn(move || write_worker(sh, rx))
            })
            .collect();
        let readers: Vec<_> = (0..config.read_threads)
            .map(|_| {
                let rx = read_rx.clone();
                let sh = &shared;
                s.spawn(move || read_worker(sh, rx))
            })
            .collect();
        drop((write_rx, read_rx));

        let mut exhausted = true;
        let mut next_update = 0;
        for (index, entry) in schedule.entries.iter().enumerate() {
            if shared.abort.load(Ordering::Acquire) {
                exhausted = false;
                break;
            }
            if entry.scheduled_wall >= horizon {
                exhausted = false;
                break;
            }
            let now = shared.now();
            if entry.scheduled_wall > now {
                std::thread::sleep(entry.scheduled_wall - now);
            }
            let job = Job {
                index,
                scheduled_wall: entry.scheduled_wall,
                measured: entry.scheduled_wall >= warmup,
            };
            match &entry.op {
                ScheduledOp::Update(op) => {
                    next_update += 1;
                    let next = updates
                        .get(next_update)
                        .map(|&i| schedule.entries[i].sim_time);
                    shared.clock.issue(op.scheduled_time, next);
                    write_tx.send(job).expect("write workers alive");
                }
                ScheduledOp::Query(_) => read_tx.send(job).expect("read workers alive"),
            }
        }
        drop((write_tx, read_tx));

        let mut records = Vec::new();
        let mut audit = Vec::new();
        for w in writers {
            let (r, a) = w.join().expect("write worker panicked");
            records.extend(r);
            audit.extend(a);
        }
        for r in readers {
            records.extend(r.join().expect("read worker panicked"));
        }
        (records, audit, exhausted, shared.now())
    });

    if let Some(e) = shared.deadlock.lock().take() {
        return Err(e);
    }
    let measured_span = finished.saturating_sub(warmup).min(window);
    let span = if exhausted { measured_span } else { window };
    let mut audit = audit;
    audit.sort_by_key(|e| e.index);
    let report = build_report(&records, span, config.on_time_ratio_required, exhausted);
    tracing::info!(
        throughput = report.throughput,
        total = report.total_ops,
        on_time_ratio = report.on_time_ratio,
        "benchmark run finished"
    );
    Ok(BenchmarkOutcome { report, audit })
}

fn write_worker(sh: &Shared<'_>, rx: Receiver<Job>) -> (Vec<OpRecord>, Vec<AuditEntry>) {
    let tcr = sh.schedule.tcr;
    let cadence = tcr
        .wall(sh.config.t_safe_millis)
        .max(Duration::from_millis(1));
    let limit = (tcr.wall(sh.config.t_safe_millis) * sh.config.deadlock_multiple)
        .max(Duration::from_millis(sh.config.min_deadlock_wait_ms));
    let mut records = Vec::new();
    let mut audit = Vec::new();
    for job in rx {
        let ScheduledOp::Update(op) = &sh.schedule.entries[job.index].op else {
            unreachable!()
        };
        if sh.abort.load(Ordering::Acquire) {
            continue;
        }
        match sh
            .clock
            .wait_for(op.dependency_time, cadence, limit, &sh.abort)
        {
            WaitOutcome::Ready => {}
            WaitOutcome::Aborted => continue,
            WaitOutcome::TimedOut(waited) => {
                tracing::error!(index = job.index, dependency = %op.dependency_time, "dependency never confirmed");
                sh.deadlock
                    .lock()
                    .get_or_insert(DriverError::DeadlockSuspected {
                        index: job.index,
                        dependency_time: op.dependency_time,
                        waited_ms: waited.as_millis() as u64,
                    });
                sh.abort.store(true, Ordering::Release);
                sh.clock.wake_all();
                continue;
            }
        }
        let (record, entry) = execute_update(sh, &job, op);
        records.push(record);
        audit.push(entry);
    }
    (records, audit)
}

fn execute_update(sh: &Shared<'_>, job: &Job, op: &UpdateOperation) -> (OpRecord, AuditEntry) {
    let started = sh.now();
    let start_ticket = sh.tickets.fetch_add(1, Ordering::AcqRel);
    let t0 = Instant::now();
    let result = sh.sut.execute_update(op);
    let latency = t0.elapsed();
    let commit_ticket = sh.tickets.fetch_add(1, Ordering::AcqRel);
    sh.clock.confirm(op.scheduled_time);
    let record = OpRecord {
        name: op.op_type.name(),
        class: op_class(op.op_type),
        latency,
        on_time: sh.on_time(job, started),
        measured: job.measured,
        error: result.err().map(|e| e.to_string()),
    };
    let entry = AuditEntry {
        index: job.index,
        scheduled_time: op.scheduled_time,
        dependency_time: op.dependency_time,
        start_ticket,
        commit_ticket,
    };
    (record, entry)
}

fn read_worker(sh: &Shared<'_>, rx: Receiver<Job>) -> Vec<OpRecord> {
    let mut records = Vec::new();
    for job in rx {
        if sh.abort.load(Ordering::Acquire) {
            continue;
        }
        let ScheduledOp::Query(q) = &sh.schedule.entries[job.index].op else {
            unreachable!()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(sh.config.triggers.seed ^ job.index as u64);
        let mut queue: VecDeque<(QueryInstance, u32, bool)> =
            VecDeque::from([(q.clone(), 0, true)]);
        while let Some((q, depth, scheduled)) = queue.pop_front() {
            let started = sh.now();
            let t0 = Instant::now();
            let result = sh.sut.execute_query(&q);
            let latency = t0.elapsed();
            records.push(OpRecord {
                name: q.variant.name(),
                class: if q.variant.is_complex() {
                    OpClass::Cr
                } else {
                    OpClass::Sr
                },
                latency,
                on_time: if scheduled {
                    sh.on_time(&job, started)
                } else {
                    None
                },
                measured: job.measured,
                error: result.as_ref().err().map(|e| e.to_string()),
            });
            if let Ok(r) = result {
                for next in follow_ups(&q, &r, depth, &sh.config.triggers, &mut rng) {
                    queue.push_back((next, depth + 1, false));
                }
            }
        }
    }
    records
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(index: usize, t: i64, dep: i64, start: u64, commit: u64) -> AuditEntry {
        AuditEntry {
            index,
            scheduled_time: SimInstant(t),
            dependency_time: SimInstant(dep),
            start_ticket: start,
            commit_ticket: commit,
        }
    }

    #[test]
    fn audit_flags_starts_before_dependency_commit() {
        let ok = [e(0, 10, 0, 0, 1), e(1, 20, 10, 2, 3), e(2, 30, 15, 4, 5)];
        assert!(audit_violations(&ok).is_empty());
        let bad = [e(0, 10, 0, 0, 3), e(1, 20, 10, 1, 2)];
        assert_eq!(audit_violations(&bad), vec![1]);
        let concurrent_unrelated = [e(0, 10, 0, 0, 3), e(1, 20, 5, 1, 2)];
        assert!(audit_violations(&concurrent_unrelated).is_empty());
    }

    #[test]
    fn audit_log_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("audit.ldjson");
        let entries = vec![e(0, 10, 0, 0, 1), e(1, 20, 10, 2, 3)];
        write_audit_log(&path, &entries).unwrap();
        assert_eq!(read_audit_log(&path).unwrap(), entries);
    }
}
