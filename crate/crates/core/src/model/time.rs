use std::fmt;
use std::ops::{Add, Sub};
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, SecondsFormat, TimeZone, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub const MILLIS_PER_SECOND: i64 = 1_000;
pub const MILLIS_PER_MINUTE: i64 = 60 * MILLIS_PER_SECOND;
pub const MILLIS_PER_HOUR: i64 = 60 * MILLIS_PER_MINUTE;
pub const MILLIS_PER_DAY: i64 = 24 * MILLIS_PER_HOUR;

/// Default simulation window: 2010-01-01T00:00:00.000Z ..= 2012-12-31T23:59:59.999Z.
pub const SIMULATION_START: SimInstant = SimInstant(1_262_304_000_000);
pub const SIMULATION_END: SimInstant = SimInstant(1_356_998_399_999);

/// A point in simulation time, in milliseconds since the Unix epoch (UTC).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimInstant(pub i64);

impl SimInstant {
    pub const MIN: SimInstant = SimInstant(i64::MIN);
    pub const MAX: SimInstant = SimInstant(i64::MAX);

    pub fn millis(self) -> i64 {
        self.0
    }

    pub fn from_ymd_hms(y: i32, mo: u32, d: u32, h: u32, mi: u32, s: u32) -> SimInstant {
        let dt = Utc
            .with_ymd_and_hms(y, mo, d, h, mi, s)
            .single()
            .expect("valid calendar date");
        SimInstant(dt.timestamp_millis())
    }

    pub fn day_start(day: NaiveDate) -> SimInstant {
        let dt = day.and_hms_opt(0, 0, 0).expect("midnight exists").and_utc();
        SimInstant(dt.timestamp_millis())
    }

    /// Calendar day (UTC) containing this instant.
    pub fn day(self) -> NaiveDate {
        self.to_datetime().date_naive()
    }

    /// Truncates to 00:00:00.000 of the containing day.
    pub fn truncate_to_day(self) -> SimInstant {
        SimInstant(self.0.div_euclid(MILLIS_PER_DAY) * MILLIS_PER_DAY)
    }

    pub fn plus_millis(self, ms: i64) -> SimInstant {
        SimInstant(self.0.saturating_add(ms))
    }

    pub fn to_datetime(self) -> DateTime<Utc> {
        DateTime::<Utc>::from_timestamp_millis(self.0).expect("instant within chrono range")
    }
}

impl Add<i64> for SimInstant {
    type Output = SimInstant;
    fn add(self, rhs: i64) -> SimInstant {
        self.plus_millis(rhs)
    }
}

impl Sub for SimInstant {
    type Output = i64;
    fn sub(self, rhs: SimInstant) -> i64 {
        self.0 - rhs.0
    }
}

impl fmt::Display for SimInstant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(
            &self
                .to_datetime()
                .to_rfc3339_opts(SecondsFormat::Millis, true),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid timestamp {0:?}: expected ISO-8601 UTC with millisecond precision")]
pub struct TimestampParseError(pub String);

impl FromStr for SimInstant {
    type Err = TimestampParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DateTime::parse_from_rfc3339(s)
            .map(|dt| SimInstant(dt.timestamp_millis()))
            .map_err(|_| TimestampParseError(s.to_string()))
    }
}

impl Serialize for SimInstant {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SimInstant {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Half-open lifetime of a temporal entity: alive on `[creation, deletion)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Lifecycle {
    pub creation: SimInstant,
    pub deletion: Option<SimInstant>,
}

impl Lifecycle {
    pub fn new(creation: SimInstant, deletion: Option<SimInstant>) -> Self {
        Self { creation, deletion }
    }

    pub fn created(creation: SimInstant) -> Self {
        Self {
            creation,
            deletion: None,
        }
    }

    pub fn is_alive(&self, t: SimInstant) -> bool {
        self.creation <= t && self.deletion.is_none_or(|d| t < d)
    }

    /// Alive at every instant of `[from, until)`.
    pub fn covers(&self, from: SimInstant, until: SimInstant) -> bool {
        self.creation <= from && self.deletion.is_none_or(|d| d >= until)
    }

    pub fn deletion_or_max(&self) -> SimInstant {
        self.deletion.unwrap_or(SimInstant::MAX)
    }

    pub fn is_well_formed(&self) -> bool {
        self.deletion.is_none_or(|d| d > self.creation)
    }
}

/// Free-function form used throughout the pipeline.
pub fn is_alive(entity: &Lifecycle, t: SimInstant) -> bool {
    entity.is_alive(t)
}
