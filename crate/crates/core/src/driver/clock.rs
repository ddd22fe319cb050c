use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicI64, Ordering};
use std::time::{Duration, Instant};

use parking_lot::{Condvar, Mutex};

use crate::model::{SimInstant, UpdateOperation};

#[derive(Debug)]
struct ClockState {
    /// Issued but uncommitted updates, by scheduled time.
    pending: BTreeMap<SimInstant, usize>,
    /// Scheduled time of the next update not yet issued.
    next_unissued: Option<SimInstant>,
}

/// Watermark of committed simulation time: every update scheduled at or
/// before `last_confirmed()` has committed. Updates must be issued in
/// schedule order.
#[derive(Debug)]
pub struct GlobalClock {
    state: Mutex<ClockState>,
    cond: Condvar,
    watermark: AtomicI64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Execute,
    Defer,
}

/// Execute once the dependency instant is confirmed.
pub fn dependency_gate(op: &UpdateOperation, clock: &GlobalClock) -> Gate {
    if clock.last_confirmed() >= op.dependency_time {
        Gate::Execute
    } else {
        Gate::Defer
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaitOutcome {
    Ready,
    Aborted,
    TimedOut(Duration),
}

impl GlobalClock {
    /// `first_update` is the scheduled time of the first update to be
    /// issued, if any.
    pub fn new(first_update: Option<SimInstant>) -> Self {
        let clock = Self {
            state: Mutex::new(ClockState {
                pending: BTreeMap::new(),
                next_unissued: first_update,
            }),
            cond: Condvar::new(),
            watermark: AtomicI64::new(SimInstant::MIN.millis()),
        };
        clock.advance(&clock.state.lock());
        clock
    }

    pub fn last_confirmed(&self) -> SimInstant {
        SimInstant(self.watermark.load(Ordering::Acquire))
    }

    fn advance(&self, s: &ClockState) {
        let low = [s.pending.keys().next().copied(), s.next_unissued]
            .into_iter()
            .flatten()
            .min();
        let w = low.map_or(SimInstant::MAX, |t| t.plus_millis(-1));
        self.watermark.fetch_max(w.millis(), Ordering::AcqRel);
    }

    /// Registers an update at `time` as in flight; `next` is the time of the
    /// following update, if any.
    pub fn issue(&self, time: SimInstant, next: Option<SimInstant>) {
        let mut s = self.state.lock();
        *s.pending.entry(time).or_insert(0) += 1;
        s.next_unissued = next;
        self.advance(&s);
    }

    /// Marks one update at `time` as committed.
    pub fn confirm(&self, time: SimInstant) {
        let mut s = self.state.lock();
        match s.pending.get_mut(&time) {
            Some(n) if *n > 1 => *n -= 1,
            Some(_) => {
                s.pending.remove(&time);
            }
            None => panic!("confirming update at {time} that was never issued"),
        }
        self.advance(&s);
        drop(s);
        self.cond.notify_all();
    }

    /// Blocks until `dependency` is confirmed, re-checking at least every
    /// `cadence`. Gives up after `limit` or when `abort` is raised.
    pub fn wait_for(
        &self,
        dependency: SimInstant,
        cadence: Duration,
        limit: Duration,
        abort: &AtomicBool,
    ) -> WaitOutcome {
        let start = Instant::now();
        let mut s = self.state.lock();
        loop {
            if self.last_confirmed() >= dependency {
                return WaitOutcome::Ready;
            }
            if abort.load(Ordering::Acquire) {
                return WaitOutcome::Aborted;
            }
            let waited = start.elapsed();
            if waited >= limit {
                return WaitOutcome::TimedOut(waited);
            }
            self.cond.wait_for(&mut s, cadence.min(limit - waited));
        }
    }

    /// Wakes all waiters, e.g. after raising an abort flag.
    pub fn wake_all(&self) {
        let _s = self.state.lock();
        self.cond.notify_all();
    }
}
