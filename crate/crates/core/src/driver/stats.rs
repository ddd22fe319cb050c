use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::DriverError;

/// Operation classes counted in the report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OpClass {
    #[serde(rename = "CR")]
    Cr,
    #[serde(rename = "SR")]
    Sr,
    #[serde(rename = "INS")]
    Ins,
    #[serde(rename = "DEL")]
    Del,
}

/// Execution-time summary of one operation type, in microseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LatencyStats {
    pub count: usize,
    pub min_us: u64,
    pub max_us: u64,
    pub mean_us: f64,
    pub p50_us: u64,
    pub p90_us: u64,
    pub p95_us: u64,
    pub p99_us: u64,
}

/// Nearest-rank percentile of an ascending slice: the value at rank
/// `ceil(p * n / 100)`, in integer arithmetic.
pub fn nearest_rank(sorted: &[u64], p: u32) -> u64 {
    assert!(!sorted.is_empty());
    let rank = (p as usize * sorted.len()).div_ceil(100);
    sorted[rank.clamp(1, sorted.len()) - 1]
}

pub fn compute_stats(latencies: &[Duration]) -> Result<LatencyStats, DriverError> {
    if latencies.is_empty() {
        return Err(DriverError::EmptySeries);
    }
    let mut us: Vec<u64> = latencies.iter().map(|d| d.as_micros() as u64).collect();
    us.sort_unstable();
    let sum: u128 = us.iter().map(|&v| v as u128).sum();
    Ok(LatencyStats {
        count: us.len(),
        min_us: us[0],
        max_us: us[us.len() - 1],
        mean_us: sum as f64 / us.len() as f64,
        p50_us: nearest_rank(&us, 50),
        p90_us: nearest_rank(&us, 90),
        p95_us: nearest_rank(&us, 95),
        p99_us: nearest_rank(&us, 99),
    })
}

/// Whether an operation started within `threshold` of its scheduled time.
pub fn record_on_time(scheduled: Duration, actual_start: Duration, threshold: Duration) -> bool {
    actual_start.saturating_sub(scheduled) <= threshold
}

/// Fraction of on-time starts; 1.0 for an empty run.
pub fn on_time_ratio(on_time: usize, total: usize) -> f64 {
    if total == 0 {
        1.0
    } else {
        on_time as f64 / total as f64
    }
}

pub fn throughput(ops: usize, window: Duration) -> f64 {
    if window.is_zero() {
        0.0
    } else {
        ops as f64 / window.as_secs_f64()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunReport {
    /// Measured operations per second of measurement window.
    pub throughput: f64,
    pub total_ops: usize,
    pub per_class: BTreeMap<OpClass, usize>,
    pub on_time: usize,
    pub late: usize,
    pub on_time_ratio: f64,
    pub valid: bool,
    pub per_operation: BTreeMap<String, LatencyStats>,
    pub errors: BTreeMap<String, usize>,
    pub window_secs: f64,
    /// Whether the schedule ran out before the measurement window ended.
    pub schedule_exhausted: bool,
}

/// One finished operation as seen by a worker.
#[derive(Debug, Clone)]
pub(crate) struct OpRecord {
    pub name: &'static str,
    pub class: OpClass,
    pub latency: Duration,
    /// None for triggered short reads, which have no schedule slot.
    pub on_time: Option<bool>,
    pub measured: bool,
    pub error: Option<String>,
}

pub(crate) fn build_report(
    records: &[OpRecord],
    window: Duration,
    required_ratio: f64,
    schedule_exhausted: bool,
) -> RunReport {
    let measured: Vec<&OpRecord> = records.iter().filter(|r| r.measured).collect();
    let mut per_class = BTreeMap::new();
    let mut by_name: BTreeMap<String, Vec<Duration>> = BTreeMap::new();
    let mut errors = BTreeMap::new();
    let (mut on_time, mut late) = (0, 0);
    for r in &measured {
        *per_class.entry(r.class).or_insert(0) += 1;
        by_name
            .entry(r.name.to_string())
            .or_default()
            .push(r.latency);
        match r.on_time {
            Some(true) => on_time += 1,
            Some(false) => late += 1,
            None => {}
        }
        if let Some(e) = &r.error {
            *errors.entry(format!("{}: {e}", r.name)).or_insert(0) += 1;
        }
    }
    let ratio = on_time_ratio(on_time, on_time + late);
    RunReport {
        throughput: throughput(measured.len(), window),
        total_ops: measured.len(),
        per_class,
        on_time,
        late,
        on_time_ratio: ratio,
        valid: ratio >= required_ratio,
        per_operation: by_name
            .into_iter()
            .filter_map(|(k, v)| compute_stats(&v).ok().map(|s| (k, s)))
            .collect(),
        errors,
        window_secs: window.as_secs_f64(),
        schedule_exhausted,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ms(v: u64) -> Duration {
        Duration::from_millis(v)
    }

    #[test]
    fn single_sample_fills_every_field() {
        let s = compute_stats(&[ms(10)]).unwrap();
        for v in [s.min_us, s.max_us, s.p50_us, s.p90_us, s.p95_us, s.p99_us] {
            assert_eq!(v, 10_000);
        }
        assert_eq!(s.mean_us, 10_000.0);
    }

    #[test]
    fn one_to_hundred_nearest_rank() {
        let v: Vec<Duration> = (1..=100).map(ms).collect();
        let s = compute_stats(&v).unwrap();
        assert_eq!(
            (s.p50_us, s.p90_us, s.p95_us, s.p99_us),
            (50_000, 90_000, 95_000, 99_000)
        );
        assert_eq!(s.mean_us, 50_500.0);
        assert!(matches!(compute_stats(&[]), Err(DriverError::EmptySeries)));
    }

    /// Sort-based oracle: smallest value with at least p% of samples at or
    /// below it.
    fn oracle(values: &[u64], p: usize) -> u64 {
        let mut v = values.to_vec();
        v.sort_unstable();
        *v.iter()
            .find(|&&x| v.iter().filter(|&&y| y <= x).count() * 100 >= p * v.len())
            .unwrap()
    }

    proptest! {
        #[test]
        fn percentiles_match_sort_oracle(values in proptest::collection::vec(0u64..5_000, 1..300)) {
            let d: Vec<Duration> = values.iter().map(|&v| Duration::from_micros(v)).collect();
            let s = compute_stats(&d).unwrap();
            prop_assert_eq!(s.p50_us, oracle(&values, 50));
            prop_assert_eq!(s.p90_us, oracle(&values, 90));
            prop_assert_eq!(s.p95_us, oracle(&values, 95));
            prop_assert_eq!(s.p99_us, oracle(&values, 99));
            prop_assert_eq!(s.min_us, *values.iter().min().unwrap());
            prop_assert_eq!(s.max_us, *values.iter().max().unwrap());
        }
    }

    #[test]
    fn on_time_threshold_is_inclusive() {
        let t = Duration::from_secs(1);
        assert!(record_on_time(ms(0), ms(900), t));
        assert!(record_on_time(ms(500), ms(1500), t));
        assert!(!record_on_time(ms(0), ms(1100), t));
    }

    #[test]
    fn validity_flips_at_the_required_ratio() {
        let rec = |late: bool| OpRecord {
            name: "INS1",
            class: OpClass::Ins,
            latency: ms(1),
            on_time: Some(!late),
            measured: true,
            error: None,
        };
        let mut records: Vec<OpRecord> = (0..95).map(|_| rec(false)).collect();
        records.extend((0..5).map(|_| rec(true)));
        let r = build_report(&records, Duration::from_secs(50), 0.95, false);
        assert_eq!(r.on_time_ratio, 0.95);
        assert!(r.valid);
        assert_eq!(r.throughput, 2.0);
        records.push(rec(true));
        assert!(!build_report(&records, Duration::from_secs(50), 0.95, false).valid);
    }

    #[test]
    fn empty_run_is_vacuously_valid() {
        let r = build_report(&[], Duration::from_secs(10), 0.95, true);
        assert_eq!(
            (r.throughput, r.on_time_ratio, r.valid, r.total_ops),
            (0.0, 1.0, true, 0)
        );
        assert_eq!(throughput(7200, Duration::from_secs(3600)), 2.0);
    }
}
