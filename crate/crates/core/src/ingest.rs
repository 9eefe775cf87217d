//! Check-in ingestion: JSON-lines parsing, pseudonymization, history
//! partitioning and dataset statistics.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::BufRead;

use chrono::{DateTime, Duration, FixedOffset, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{CheckIn, Step, Trajectory, UserHistory};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("input is not valid UTF-8 JSON lines (line {line}): {source}")]
    Encoding {
        line: usize,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid event window: {0}")]
    EventWindow(String),
}

/// A line that could not be parsed; parsing continues past it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedLine {
    /// 1-based line number.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Default)]
pub struct ParsedRecords {
    pub records: Vec<CheckIn>,
    pub skipped: Vec<SkippedLine>,
}

/// Parses JSON-lines check-ins in input order. Blank lines are ignored.
/// Malformed lines are skipped and reported; broken encoding is fatal.
pub fn parse_records<R: BufRead>(reader: R) -> Result<ParsedRecords, IngestError> {
    let mut out = ParsedRecords::default();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| IngestError::Encoding {
            line: idx + 1,
            source,
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        match serde_json::from_str::<CheckIn>(trimmed) {
            Ok(rec) => out.records.push(rec),
            Err(e) => out.skipped.push(SkippedLine {
                line: idx + 1,
                reason: e.to_string(),
            }),
        }
    }
    Ok(out)
}

/// Keyed one-way surrogates for user and POI identifiers.
///
/// A surrogate is a decimal integer carrying a 40-bit digest of the original
/// id and a 23-bit keyed check, so ids produced with the same salt are
/// recognised and left untouched on a second pass.
#[derive(Debug, Clone)]
pub struct Pseudonymizer {
    salt: Vec<u8>,
}

const CHECK_BITS: u32 = 23;

impl Pseudonymizer {
    pub fn new(salt: impl AsRef<[u8]>) -> Self {
        Self {
            salt: salt.as_ref().to_vec(),
        }
    }

    fn digest(&self, kind: &str, payload: &[u8]) -> u64 {
        let mut h = Sha256::new();
        h.update((self.salt.len() as u64).to_le_bytes());
        h.update(&self.salt);
        h.update(kind.as_bytes());
        h.update([0u8]);
        h.update(payload);
        let out = h.finalize();
        let mut b = [0u8; 8];
        b.copy_from_slice(&out[..8]);
        u64::from_be_bytes(b)
    }

    fn check(&self, kind: &str, body: u64) -> u64 {
        self.digest(kind, &body.to_be_bytes()) & ((1 << CHECK_BITS) - 1)
    }

    pub fn surrogate(&self, kind: &str, id: &str) -> String {
        if self.is_surrogate(kind, id) {
            return id.to_string();
        }
        let body = self.digest(kind, id.as_bytes()) >> 24;
        let value = (body << CHECK_BITS) | self.check(kind, body);
        value.to_string()
    }

    pub fn is_surrogate(&self, kind: &str, id: &str) -> bool {
        if id.len() > 1 && id.starts_with('0') {
            return false;
        }
        match id.parse::<u64>() {
            Ok(v) if v >> 63 == 0 => {
                let body = v >> CHECK_BITS;
                v & ((1 << CHECK_BITS) - 1) == self.check(kind, body)
            }
            _ => false,
        }
    }
}

fn truncate_to_minute(ts: DateTime<FixedOffset>) -> DateTime<FixedOffset> {
    ts.with_second(0)
        .and_then(|t| t.with_nanosecond(0))
        .expect("zero seconds always valid")
}

/// Replaces user and POI ids with surrogates and drops sub-minute timing.
/// Order and count are preserved.
pub fn anonymize_records(records: &[CheckIn], pseudonymizer: &Pseudonymizer) -> Vec<CheckIn> {
    records
        .iter()
        .map(|r| CheckIn {
            user_id: pseudonymizer.surrogate("user", &r.user_id),
            poi_id: pseudonymizer.surrogate("poi", &r.poi_id),
            timestamp: truncate_to_minute(r.timestamp),
            ..r.clone()
        })
        .collect()
}

/// Groups check-ins into per-user, per-day trajectories in `tz`. Steps are
/// sorted by time; raw minute precision is kept.
pub fn group_trajectories(records: &[CheckIn], tz: &FixedOffset) -> Vec<Trajectory> {
    let mut days: BTreeMap<(String, NaiveDate), Vec<Step>> = BTreeMap::new();
    for r in records {
        let at = r.local_time(tz);
        days.entry((r.user_id.clone(), at.date()))
            .or_default()
            .push(Step {
                visit: r.to_visit(),
                at,
            });
    }
    days.into_iter()
        .map(|((user_id, date), mut steps)| {
            steps.sort_by_key(|s| s.at);
            Trajectory {
                user_id,
                date,
                steps,
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Partition {
    pub history: UserHistory,
    /// Records at or after the event start, excluded from the history.
    pub rejected: Vec<CheckIn>,
}

/// Splits one user's pre-event records into long- and short-term days.
/// A day `d` is short-term iff its midnight is at or after
/// `event_start - short_window_days`.
pub fn partition_history(
    user_id: &str,
    records: &[CheckIn],
    event_start: NaiveDateTime,
    short_window_days: i64,
    tz: &FixedOffset,
) -> Partition {
    let (kept, rejected): (Vec<CheckIn>, Vec<CheckIn>) = records
        .iter()
        .cloned()
        .partition(|r| r.local_time(tz) < event_start);
    let threshold = event_start - Duration::days(short_window_days);
    let mut history = UserHistory {
        user_id: user_id.to_string(),
        long_term: Vec::new(),
        short_term: Vec::new(),
        event_start,
        short_window_days,
    };
    for traj in group_trajectories(&kept, tz) {
        let midnight = traj.date.and_hms_opt(0, 0, 0).expect("midnight");
        if midnight >= threshold {
            history.short_term.push(traj);
        } else {
            history.long_term.push(traj);
        }
    }
    Partition { history, rejected }
}

/// Partitions every user in `records`, sorted by user id.
pub fn partition_all(
    records: &[CheckIn],
    event_start: NaiveDateTime,
    short_window_days: i64,
    tz: &FixedOffset,
) -> Vec<Partition> {
    let mut by_user: BTreeMap<&str, Vec<CheckIn>> = BTreeMap::new();
    for r in records {
        by_user.entry(&r.user_id).or_default().push(r.clone());
    }
    by_user
        .into_iter()
        .map(|(user, recs)| partition_history(user, &recs, event_start, short_window_days, tz))
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    #[serde(rename = "checkins")]
    pub checkin_count: usize,
    #[serde(rename = "pois")]
    pub unique_poi_count: usize,
    #[serde(rename = "subcategories")]
    pub unique_subcategory_count: usize,
    #[serde(rename = "users")]
    pub user_count: usize,
}

pub fn dataset_statistics(records: &[CheckIn]) -> DatasetStats {
    let pois: HashSet<&str> = records.iter().map(|r| r.poi_id.as_str()).collect();
    let subcats: HashSet<&str> = records.iter().map(|r| r.subcategory.as_str()).collect();
    let users: HashSet<&str> = records.iter().map(|r| r.user_id.as_str()).collect();
    DatasetStats {
        checkin_count: records.len(),
        unique_poi_count: pois.len(),
        unique_subcategory_count: subcats.len(),
        user_count: users.len(),
    }
}

/// Pre-event and event periods of one scenario, in local time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventWindow {
    pub name: String,
    pub event_start: NaiveDateTime,
    pub event_end: NaiveDateTime,
    pub pre_event_start: NaiveDateTime,
    pub pre_event_end: NaiveDateTime,
}

impl EventWindow {
    pub fn validate(&self) -> Result<(), IngestError> {
        if !(self.pre_event_start < self.pre_event_end
            && self.pre_event_end < self.event_start
            && self.event_start <= self.event_end)
        {
            return Err(IngestError::EventWindow(format!(
                "{}: expected pre_event_start < pre_event_end < event_start <= event_end",
                self.name
            )));
        }
        Ok(())
    }

    /// Calendar days covered by the event period, inclusive.
    pub fn event_dates(&self) -> Vec<NaiveDate> {
        let last = self.event_end.date();
        let mut d = self.event_start.date();
        let mut out = Vec::new();
        while d <= last {
            out.push(d);
            d = d.succ_opt().expect("date in range");
        }
        out
    }
}

/// Data-cleaning knobs applied before partitioning.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RecordFilter {
    /// Keep only check-ins inside `[lat_min, lat_max] x [lon_min, lon_max]`.
    #[serde(default)]
    pub region: Option<crate::metrics::BoundingBox>,
    /// Drop users with fewer check-ins than this (after the region filter).
    #[serde(default)]
    pub min_checkins_per_user: Option<usize>,
}

impl RecordFilter {
    pub fn apply(&self, records: Vec<CheckIn>) -> Vec<CheckIn> {
        let mut records: Vec<CheckIn> = match &self.region {
            Some(b) => records.into_iter().filter(|r| b.contains(r.point)).collect(),
            None => records,
        };
        if let Some(min) = self.min_checkins_per_user {
            let mut counts: BTreeMap<String, usize> = BTreeMap::new();
            for r in &records {
                *counts.entry(r.user_id.clone()).or_default() += 1;
            }
            let keep: BTreeSet<&String> = counts.iter().filter(|(_, &c)| c >= min).map(|(u, _)| u).collect();
            records.retain(|r| keep.contains(&r.user_id));
        }
        records
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{default_timezone, GeoPoint};

    const SAMPLE: &str = r#"{"user_id":"0118","lat":35.652,"lon":139.543,"poi_id":"1003","subcategory":"Home Appliance Store","category":"Retail","timestamp":"2020-04-07T18:33:00+09:00","comment":"Oh no, an emergency declaration has been announced!!"}
{"user_id":"0118","lat":35.633,"lon":139.577,"poi_id":"14932","subcategory":"Clothing Store","category":"Retail","timestamp":"2020-04-10T19:16:00+09:00"}
{"user_id":"0118","lat":35.632,"lon":139.577,"poi_id":"4859","subcategory":"Rail Station","subcategory_id":4,"category":"Travel & Transport","timestamp":"2020-04-10T19:21:00+09:00"}
"#;

    fn rec(user: &str, poi: &str, ts: &str) -> CheckIn {
        CheckIn {
            user_id: user.into(),
            point: GeoPoint::new(35.65, 139.54).unwrap(),
            poi_id: poi.into(),
            subcategory: "Cafe".into(),
            subcategory_id: None,
            category: "Dining and Drinking".into(),
            timestamp: DateTime::parse_from_rfc3339(ts).unwrap(),
            comment: None,
        }
    }

    fn local(s: &str) -> NaiveDateTime {
        NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M").unwrap()
    }

    #[test]
    fn parses_sample_rows() {
        let parsed = parse_records(SAMPLE.as_bytes()).unwrap();
        assert!(parsed.skipped.is_empty());
        assert_eq!(parsed.records.len(), 3);
        let first = &parsed.records[0];
        assert_eq!(first.user_id, "0118");
        assert_eq!(first.point.lat(), 35.652);
        assert_eq!(first.point.lon(), 139.543);
        assert_eq!(first.poi_id, "1003");
        assert_eq!(first.subcategory, "Home Appliance Store");
        assert_eq!(first.category, "Retail");
        assert_eq!(first.local_time(&default_timezone()), local("2020-04-07 18:33"));
        assert_eq!(parsed.records[2].subcategory_id, Some(4));
        assert_eq!(parsed.records[2].category, "Travel & Transport");
    }

    #[test]
    fn empty_input_and_bad_lines() {
        assert!(parse_records("".as_bytes()).unwrap().records.is_empty());
        let input = SAMPLE.replacen("35.652", "91.0", 1) + "not json\n";
        let parsed = parse_records(input.as_bytes()).unwrap();
        assert_eq!(parsed.records.len(), 2);
        assert_eq!(parsed.skipped.len(), 2);
        assert_eq!(parsed.skipped[0].line, 1);
        assert!(parsed.skipped[0].reason.contains("lat out of range"), "{}", parsed.skipped[0].reason);
        assert_eq!(parsed.skipped[1].line, 4);
    }

    #[test]
    fn invalid_utf8_is_fatal() {
        let bytes: &[u8] = b"{\"user_id\":\"\xff\"}\n";
        assert!(matches!(parse_records(bytes), Err(IngestError::Encoding { line: 1, .. })));
    }

    #[test]
    fn raw_seconds_survive_parsing() {
        let line = SAMPLE.lines().next().unwrap().replace("18:33:00", "18:33:47");
        let parsed = parse_records(line.as_bytes()).unwrap();
        assert_eq!(parsed.records[0].timestamp.second(), 47);
    }

    #[test]
    fn anonymization_is_stable_and_truncates() {
        let p = Pseudonymizer::new("salt");
        let recs = vec![
            rec("0118", "1003", "2020-04-07T18:33:47+09:00"),
            rec("0118", "1004", "2020-04-07T19:00:00+09:00"),
            rec("0222", "1003", "2020-04-07T20:00:00+09:00"),
        ];
        let anon = anonymize_records(&recs, &p);
        assert_eq!(anon.len(), 3);
        assert_eq!(anon[0].user_id, anon[1].user_id);
        assert_ne!(anon[0].user_id, anon[2].user_id);
        assert_eq!(anon[0].poi_id, anon[2].poi_id);
        assert_ne!(anon[0].user_id, "0118");
        assert!(anon[0].user_id.parse::<u64>().is_ok());
        assert_eq!(anon[0].timestamp.second(), 0);
        assert_eq!(anon[0].timestamp.minute(), 33);
        assert_eq!(anonymize_records(&anon, &p), anon);

        let other = anonymize_records(&recs, &Pseudonymizer::new("pepper"));
        assert_ne!(other[0].user_id, anon[0].user_id);
    }

    #[test]
    fn raw_numeric_ids_are_not_mistaken_for_surrogates() {
        let p = Pseudonymizer::new("salt");
        let hits = (0..100_000u32).filter(|i| p.is_surrogate("user", &i.to_string())).count();
        assert_eq!(hits, 0);
    }

    #[test]
    fn partition_boundary() {
        let tz = default_timezone();
        let start = local("2019-10-12 00:00");
        let recs = vec![
            rec("u", "a", "2019-10-06T10:00:00+09:00"),
            rec("u", "b", "2019-10-04T10:00:00+09:00"),
            rec("u", "c", "2019-10-05T00:00:00+09:00"),
            rec("u", "d", "2019-10-12T01:00:00+09:00"),
        ];
        let p = partition_history("u", &recs, start, 7, &tz);
        let short: Vec<_> = p.history.short_term.iter().map(|t| t.date.to_string()).collect();
        let long: Vec<_> = p.history.long_term.iter().map(|t| t.date.to_string()).collect();
        assert_eq!(short, vec!["2019-10-05", "2019-10-06"]);
        assert_eq!(long, vec!["2019-10-04"]);
        assert_eq!(p.rejected.len(), 1);
        assert_eq!(p.rejected[0].poi_id, "d");
    }

    #[test]
    fn statistics_counts() {
        assert_eq!(dataset_statistics(&[]), DatasetStats::default());
        let recs = vec![
            rec("u1", "p1", "2019-10-06T10:00:00+09:00"),
            rec("u1", "p1", "2019-10-06T11:00:00+09:00"),
            rec("u2", "p2", "2019-10-06T12:00:00+09:00"),
        ];
        let s = dataset_statistics(&recs);
        assert_eq!(s.checkin_count, 3);
        assert_eq!(s.unique_poi_count, 2);
        assert_eq!(s.user_count, 2);
        assert_eq!(s.unique_subcategory_count, 1);
        assert_eq!(
            serde_json::to_string(&s).unwrap(),
            r#"{"checkins":3,"pois":2,"subcategories":1,"users":2}"#
        );
    }

    #[test]
    fn event_window_ordering() {
        let w = EventWindow {
            name: "typhoon".into(),
            event_start: local("2019-10-12 00:00"),
            event_end: local("2019-10-13 23:59"),
            pre_event_start: local("2019-08-13 00:00"),
            pre_event_end: local("2019-10-11 23:59"),
        };
        w.validate().unwrap();
        assert_eq!(w.event_dates().len(), 2);
        let bad = EventWindow { event_end: local("2019-10-11 00:00"), ..w };
        assert!(bad.validate().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_records() -> impl Strategy<Value = Vec<CheckIn>> {
            proptest::collection::vec((0u8..5, 0u8..20, 0i64..60 * 24 * 40), 0..80).prop_map(|v| {
                v.into_iter()
                    .map(|(u, p, mins)| {
                        let base = DateTime::parse_from_rfc3339("2019-09-01T00:00:00+09:00").unwrap();
                        let ts = (base + Duration::minutes(mins)).to_rfc3339();
                        rec(&format!("u{u}"), &format!("p{p}"), &ts)
                    })
                    .collect()
            })
        }

        proptest! {
            #[test]
            fn partition_is_disjoint_and_complete(recs in arb_records(), window in 1i64..20) {
                let tz = default_timezone();
                let start = local("2019-10-12 00:00");
                for part in partition_all(&recs, start, window, &tz) {
                    let long: BTreeSet<_> = part.history.long_term.iter().map(|t| t.date).collect();
                    let short: BTreeSet<_> = part.history.short_term.iter().map(|t| t.date).collect();
                    prop_assert!(long.is_disjoint(&short));
                    let input: BTreeSet<_> = recs.iter()
                        .filter(|r| r.user_id == part.history.user_id)
                        .map(|r| r.local_time(&tz).date())
                        .collect();
                    prop_assert_eq!(long.len() + short.len(), input.len());
                    let threshold = start - Duration::days(window);
                    prop_assert!(short.iter().all(|d| d.and_hms_opt(0, 0, 0).unwrap() >= threshold));
                    prop_assert!(long.iter().all(|d| d.and_hms_opt(0, 0, 0).unwrap() < threshold));
                }
            }

            #[test]
            fn anonymize_preserves_order_and_is_idempotent(recs in arb_records()) {
                let p = Pseudonymizer::new("k");
                let once = anonymize_records(&recs, &p);
                prop_assert_eq!(once.len(), recs.len());
                for (a, b) in once.iter().zip(&recs) {
                    prop_assert_eq!(a.timestamp, b.timestamp);
                }
                prop_assert_eq!(anonymize_records(&once, &p), once.clone());
            }

            #[test]
            fn statistics_additive_over_disjoint_union(a in arb_records(), b in arb_records()) {
                let mut all = a.clone();
                all.extend(b.iter().cloned());
                prop_assert_eq!(dataset_statistics(&all).checkin_count, a.len() + b.len());
            }
        }
    }
}
