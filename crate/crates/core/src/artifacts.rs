//! On-disk artifacts: outcome JSON lines and atomic file writes.

use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{NaiveDate, NaiveTime};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::alignment::{AuditVerdict, GenerationOutcome};
use crate::model::{CheckIn, GeoPoint, Step, Trajectory, Visit};

/// One generated visit as written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Local `HH:MM` on the outcome's date.
    pub time: String,
    pub lat: f64,
    pub lon: f64,
    pub category: String,
    pub subcategory: String,
}

/// One line of the `generate` output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub user_id: String,
    pub date: NaiveDate,
    pub accepted: bool,
    pub iterations_used: u32,
    pub unmet_constraints: Vec<String>,
    pub steps: Vec<StepRecord>,
    #[serde(default)]
    pub justification: String,
    #[serde(default)]
    pub audit_trail: Vec<AuditVerdict>,
}

impl From<&GenerationOutcome> for OutcomeRecord {
    fn from(o: &GenerationOutcome) -> Self {
        Self {
            user_id: o.trajectory.user_id.clone(),
            date: o.trajectory.date,
            accepted: o.accepted,
            iterations_used: o.iterations_used,
            unmet_constraints: o.unmet_constraints.clone(),
            steps: o
                .trajectory
                .steps
                .iter()
                .map(|s| StepRecord {
                    time: s.at.format("%H:%M").to_string(),
                    lat: s.visit.point.lat(),
                    lon: s.visit.point.lon(),
                    category: s.visit.category.clone(),
                    subcategory: s.visit.subcategory.clone(),
                })
                .collect(),
            justification: o.justification.0.clone(),
            audit_trail: o.audit_trail.clone(),
        }
    }
}

impl OutcomeRecord {
    pub fn trajectory(&self) -> Result<Trajectory, String> {
        let mut t = Trajectory::new(self.user_id.clone(), self.date);
        for (i, s) in self.steps.iter().enumerate() {
            let time = NaiveTime::parse_from_str(&s.time, "%H:%M").map_err(|e| format!("steps[{i}].time: {e}"))?;
            t.steps.push(Step {
                visit: Visit {
                    point: GeoPoint::new(s.lat, s.lon).map_err(|e| format!("steps[{i}]: {e}"))?,
                    poi_id: None,
                    category: s.category.clone(),
                    subcategory: s.subcategory.clone(),
                },
                at: self.date.and_time(time),
            });
        }
        Ok(t)
    }
}

/// A user-day the loop could not complete.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub user_id: String,
    pub date: NaiveDate,
    pub stage: String,
    pub error: String,
}

/// A line of a file fed to `evaluate` as generated data.
#[derive(Debug, Clone, PartialEq)]
pub enum GeneratedLine {
    Outcome(OutcomeRecord),
    CheckIn(CheckIn),
}

/// Reads outcome lines and check-in lines, told apart by a `steps` key.
pub fn parse_generated(text: &str) -> Result<Vec<GeneratedLine>, String> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(line).map_err(|e| format!("line {}: {e}", idx + 1))?;
        let parsed = if value.get("steps").is_some() {
            serde_json::from_value(value).map(GeneratedLine::Outcome)
        } else {
            serde_json::from_value(value).map(GeneratedLine::CheckIn)
        };
        out.push(parsed.map_err(|e| format!("line {}: {e}", idx + 1))?);
    }
    Ok(out)
}

/// Serializes items as JSON lines, each terminated by a newline.
pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("record serializes"));
        out.push('\n');
    }
    out
}

fn temp_path(path: &Path) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!(".{name}.tmp{}", std::process::id()))
}

/// Writes `contents` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let tmp = temp_path(path);
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    const OUTCOME: &str = r#"{"user_id":"7","date":"2019-10-12","accepted":false,"iterations_used":3,"unmet_constraints":["external: x"],"steps":[{"time":"09:10","lat":35.6,"lon":139.7,"category":"Retail","subcategory":"Convenience Store"}]}"#;
    const CHECKIN: &str = r#"{"user_id":"0118","lat":35.652,"lon":139.543,"poi_id":"1003","subcategory":"Home Appliance Store","category":"Retail","timestamp":"2020-04-07T18:33:00+09:00"}"#;

    #[test]
    fn detects_line_kinds() {
        let lines = parse_generated(&format!("{OUTCOME}\n\n{CHECKIN}\n")).unwrap();
        assert!(matches!(&lines[0], GeneratedLine::Outcome(o) if o.iterations_used == 3));
        assert!(matches!(&lines[1], GeneratedLine::CheckIn(c) if c.poi_id == "1003"));
        assert!(parse_generated("{\"steps\":1}").unwrap_err().starts_with("line 1"));
    }

    #[test]
    fn outcome_round_trip() {
        let GeneratedLine::Outcome(o) = &parse_generated(OUTCOME).unwrap()[0] else { panic!() };
        let t = o.trajectory().unwrap();
        assert_eq!(t.steps[0].at.format("%H:%M").to_string(), "09:10");
        assert_eq!(to_jsonl(std::slice::from_ref(o)).lines().count(), 1);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/out.json");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
