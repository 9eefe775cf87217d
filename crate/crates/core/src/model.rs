//! Places, visits, per-day trajectories and pre-event user histories.

use std::fmt;

use chrono::{DateTime, FixedOffset, NaiveDate, NaiveDateTime, NaiveTime, Timelike};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Temporal resolution of generated and evaluated trajectories, in minutes.
pub const TIME_GRID_MINUTES: u32 = 10;

/// Tokyo local time, the default fixed offset for all timestamps.
pub fn default_timezone() -> FixedOffset {
    FixedOffset::east_opt(9 * 3600).expect("valid offset")
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("lat out of range: {0}")]
    LatOutOfRange(f64),
    #[error("lon out of range: {0}")]
    LonOutOfRange(f64),
}

/// A WGS84 coordinate in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPoint", into = "RawPoint")]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

#[derive(Serialize, Deserialize)]
struct RawPoint {
    lat: f64,
    lon: f64,
}

impl TryFrom<RawPoint> for GeoPoint {
    type Error = GeoError;

    fn try_from(raw: RawPoint) -> Result<Self, Self::Error> {
        GeoPoint::new(raw.lat, raw.lon)
    }
}

impl From<GeoPoint> for RawPoint {
    fn from(p: GeoPoint) -> Self {
        RawPoint { lat: p.lat, lon: p.lon }
    }
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        if !lat.is_finite() || !(-90.0..=90.0).contains(&lat) {
            return Err(GeoError::LatOutOfRange(lat));
        }
        if !lon.is_finite() || !(-180.0..=180.0).contains(&lon) {
            return Err(GeoError::LonOutOfRange(lon));
        }
        Ok(Self { lat, lon })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }
}

/// One check-in. Serializes as the flat JSON-lines record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CheckInRecord", into = "CheckInRecord")]
pub struct CheckIn {
    pub user_id: String,
    pub point: GeoPoint,
    pub poi_id: String,
    pub subcategory: String,
    pub subcategory_id: Option<i64>,
    pub category: String,
    pub timestamp: DateTime<FixedOffset>,
    pub comment: Option<String>,
}

/// Wire form of a check-in: one JSON object per line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckInRecord {
    pub user_id: String,
    pub lat: f64,
    pub lon: f64,
    pub poi_id: String,
    pub subcategory: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subcategory_id: Option<i64>,
    pub category: String,
    pub timestamp: DateTime<FixedOffset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CheckInError {
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error("empty {0}")]
    EmptyField(&'static str),
}

impl TryFrom<CheckInRecord> for CheckIn {
    type Error = CheckInError;

    fn try_from(r: CheckInRecord) -> Result<Self, Self::Error> {
        let point = GeoPoint::new(r.lat, r.lon)?;
        for (name, value) in [
            ("user_id", &r.user_id),
            ("poi_id", &r.poi_id),
            ("category", &r.category),
            ("subcategory", &r.subcategory),
        ] {
            if value.trim().is_empty() {
                return Err(CheckInError::EmptyField(name));
            }
        }
        Ok(CheckIn {
            user_id: r.user_id,
            point,
            poi_id: r.poi_id,
            subcategory: r.subcategory,
            subcategory_id: r.subcategory_id,
            category: r.category,
            timestamp: r.timestamp,
            comment: r.comment,
        })
    }
}

impl From<CheckIn> for CheckInRecord {
    fn from(c: CheckIn) -> Self {
        CheckInRecord {
            user_id: c.user_id,
            lat: c.point.lat,
            lon: c.point.lon,
            poi_id: c.poi_id,
            subcategory: c.subcategory,
            subcategory_id: c.subcategory_id,
            category: c.category,
            timestamp: c.timestamp,
            comment: c.comment,
        }
    }
}

impl CheckIn {
    /// Local wall-clock time of the visit in `tz`.
    pub fn local_time(&self, tz: &FixedOffset) -> NaiveDateTime {
        self.timestamp.with_timezone(tz).naive_local()
    }

    pub fn to_visit(&self) -> Visit {
        Visit {
            point: self.point,
            poi_id: Some(self.poi_id.clone()),
            category: self.category.clone(),
            subcategory: self.subcategory.clone(),
        }
    }
}

/// The place part of a trajectory step. Generated steps carry no POI id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Visit {
    pub point: GeoPoint,
    pub poi_id: Option<String>,
    pub category: String,
    pub subcategory: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub visit: Visit,
    /// Local wall-clock time.
    pub at: NaiveDateTime,
}

/// One user's time-ordered visits within a single calendar day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub user_id: String,
    pub date: NaiveDate,
    pub steps: Vec<Step>,
}

impl Trajectory {
    pub fn new(user_id: impl Into<String>, date: NaiveDate) -> Self {
        Self {
            user_id: user_id.into(),
            date,
            steps: Vec::new(),
        }
    }

    pub fn points(&self) -> impl Iterator<Item = GeoPoint> + '_ {
        self.steps.iter().map(|s| s.visit.point)
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Floors `t` to the enclosing 10-minute slot and zeroes seconds.
pub fn snap_to_time_grid(t: NaiveDateTime) -> NaiveDateTime {
    let minute = t.minute() - t.minute() % TIME_GRID_MINUTES;
    let time = NaiveTime::from_hms_opt(t.hour(), minute, 0).expect("floored time is valid");
    t.date().and_time(time)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TrajectoryViolation {
    NonMonotonicTime { index: usize },
    OffGridTime { index: usize },
    WrongDate { index: usize },
}

impl fmt::Display for TrajectoryViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NonMonotonicTime { index } => write!(f, "non-monotonic time at index {index}"),
            Self::OffGridTime { index } => write!(f, "off-grid time at index {index}"),
            Self::WrongDate { index } => write!(f, "step outside trajectory date at index {index}"),
        }
    }
}

/// Checks ordering, grid alignment and single-day membership. An empty
/// trajectory is valid.
pub fn validate_trajectory(traj: &Trajectory) -> Result<(), Vec<TrajectoryViolation>> {
    let mut violations = Vec::new();
    for (index, step) in traj.steps.iter().enumerate() {
        if step.at.date() != traj.date {
            violations.push(TrajectoryViolation::WrongDate { index });
        }
        if snap_to_time_grid(step.at) != step.at {
            violations.push(TrajectoryViolation::OffGridTime { index });
        }
        if index > 0 && step.at < traj.steps[index - 1].at {
            violations.push(TrajectoryViolation::NonMonotonicTime { index });
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// A user's pre-event days, split around `event_start - short_window`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserHistory {
    pub user_id: String,
    pub long_term: Vec<Trajectory>,
    pub short_term: Vec<Trajectory>,
    pub event_start: NaiveDateTime,
    pub short_window_days: i64,
}

impl UserHistory {
    pub fn is_empty(&self) -> bool {
        self.long_term.is_empty() && self.short_term.is_empty()
    }

    pub fn day_count(&self) -> usize {
        self.long_term.len() + self.short_term.len()
    }
}
