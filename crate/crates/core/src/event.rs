//! Structured event context: four aspects distilled from a raw event
//! narrative, plus the raw-text and normal-period alternatives.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Datelike, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::ask::{ask, AskError};
use crate::extract::first_json_object;
use crate::provider::ChatProvider;
use crate::template::{Stage, TemplateSet};

pub const REQUIRED_PROFILE_KEYS: [&str; 4] = ["type", "name", "time", "regions"];
const ASPECTS: [&str; 4] = [
    "event_profile",
    "intensity_and_scale",
    "infrastructure_and_service_impact",
    "official_directives",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Directive {
    pub directive: String,
    pub applicable_population: String,
    pub geographic_scope: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventContext {
    pub event_profile: BTreeMap<String, String>,
    pub intensity_and_scale: BTreeMap<String, String>,
    pub infrastructure_and_service_impact: BTreeMap<String, String>,
    pub official_directives: Vec<Directive>,
}

#[derive(Debug, Error)]
pub enum EventSchemaError {
    #[error("raw event text is empty")]
    EmptyInput,
    #[error("event context invalid: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error(transparent)]
    Ask(#[from] AskError),
    #[error("event context file {path}: {message}")]
    File { path: String, message: String },
}

/// Checks that every aspect is present and the profile carries the
/// required keys. An empty directive list is valid.
pub fn validate_event_context(ctx: &EventContext) -> Result<(), Vec<String>> {
    let violations: Vec<String> = REQUIRED_PROFILE_KEYS
        .iter()
        .filter(|k| ctx.event_profile.get(**k).is_none_or(|v| v.trim().is_empty()))
        .map(|k| format!("missing event_profile key: {k}"))
        .collect();
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

fn scalar_text(v: &Value) -> Option<String> {
    match v {
        Value::Null => None,
        Value::String(s) => Some(s.clone()),
        Value::Array(items) => Some(items.iter().filter_map(scalar_text).collect::<Vec<_>>().join("; ")),
        other => Some(other.to_string()),
    }
}

fn text_map(v: &Value, aspect: &str) -> Result<BTreeMap<String, String>, String> {
    let obj = v.as_object().ok_or_else(|| format!("{aspect} must be an object"))?;
    Ok(obj
        .iter()
        .filter_map(|(k, v)| scalar_text(v).map(|s| (k.clone(), s)))
        .collect())
}

fn directives(v: &Value) -> Result<Vec<Directive>, String> {
    let items = v.as_array().ok_or("official_directives must be an array")?;
    items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            let obj = item
                .as_object()
                .ok_or_else(|| format!("official_directives[{i}] must be an object"))?;
            let field = |k: &str| obj.get(k).and_then(scalar_text).unwrap_or_default();
            let directive = field("directive");
            if directive.trim().is_empty() {
                return Err(format!("official_directives[{i}].directive is missing"));
            }
            Ok(Directive {
                directive,
                applicable_population: field("applicable_population"),
                geographic_scope: field("geographic_scope"),
            })
        })
        .collect()
}

/// Outcome of reading a model reply: a shape problem (worth a re-ask) is an
/// `Err`; missing aspects come back as violations.
type Lenient = Result<EventContext, Vec<String>>;

fn parse_lenient(obj: &Map<String, Value>) -> Result<Lenient, String> {
    let missing: Vec<String> = ASPECTS
        .iter()
        .filter(|a| !obj.contains_key(**a))
        .map(|a| format!("missing aspect: {a}"))
        .collect();
    if !missing.is_empty() {
        return Ok(Err(missing));
    }
    let ctx = EventContext {
        event_profile: text_map(&obj["event_profile"], "event_profile")?,
        intensity_and_scale: text_map(&obj["intensity_and_scale"], "intensity_and_scale")?,
        infrastructure_and_service_impact: text_map(
            &obj["infrastructure_and_service_impact"],
            "infrastructure_and_service_impact",
        )?,
        official_directives: directives(&obj["official_directives"])?,
    };
    Ok(validate_event_context(&ctx).map(|_| ctx))
}

/// Parses a model reply into an event context.
pub fn parse_event_context(text: &str) -> Result<EventContext, EventSchemaError> {
    let obj = first_json_object(text).ok_or_else(|| EventSchemaError::Invalid(vec!["no JSON object found".into()]))?;
    parse_lenient(&obj)
        .map_err(|e| EventSchemaError::Invalid(vec![e]))?
        .map_err(EventSchemaError::Invalid)
}

/// One provider call (tag `schema`), with one corrective re-ask when the
/// reply is not a usable JSON object.
pub fn construct_event_context(
    raw_event_text: &str,
    provider: &dyn ChatProvider,
    templates: &TemplateSet,
) -> Result<EventContext, EventSchemaError> {
    if raw_event_text.trim().is_empty() {
        return Err(EventSchemaError::EmptyInput);
    }
    let lenient = ask(provider, templates, Stage::Schema, &[("raw_event", raw_event_text)], |text| {
        let obj = first_json_object(text).ok_or_else(|| "no JSON object found".to_string())?;
        parse_lenient(&obj)
    })?;
    lenient.map_err(EventSchemaError::Invalid)
}

impl EventContext {
    pub fn to_pretty_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("event context serializes")
    }

    pub fn load(path: &Path) -> Result<Self, EventSchemaError> {
        let err = |message: String| EventSchemaError::File {
            path: path.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let ctx: EventContext = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        validate_event_context(&ctx).map_err(EventSchemaError::Invalid)?;
        Ok(ctx)
    }
}

pub fn is_weekend(date: NaiveDate) -> bool {
    matches!(date.weekday(), Weekday::Sat | Weekday::Sun)
}

/// Context for an ordinary day: weekday or weekend operating status and no
/// directives.
pub fn normal_period_context(date: NaiveDate, regions: &str) -> EventContext {
    let weekend = is_weekend(date);
    let kind = if weekend { "weekend" } else { "weekday" };
    let profile = [
        ("type", "normal period".to_string()),
        ("name", format!("ordinary {kind}")),
        ("time", format!("{date} ({})", date.weekday())),
        ("regions", regions.to_string()),
    ];
    let services = if weekend {
        [
            ("public_transport", "weekend and holiday timetable"),
            ("offices", "mostly closed"),
            ("shops_and_restaurants", "open, weekend business hours"),
            ("leisure_venues", "open, busiest days of the week"),
        ]
    } else {
        [
            ("public_transport", "weekday timetable with rush-hour service"),
            ("offices", "open, regular business hours"),
            ("shops_and_restaurants", "open, regular business hours"),
            ("leisure_venues", "open"),
        ]
    };
    EventContext {
        event_profile: profile.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        intensity_and_scale: BTreeMap::from([("severity".to_string(), "none".to_string())]),
        infrastructure_and_service_impact: services.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        official_directives: Vec::new(),
    }
}

/// What the generator is told about the situation on a target day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventInput {
    Structured(EventContext),
    /// Unstructured event narrative, used when schema construction is ablated.
    Raw(String),
    /// Ordinary days; the context is derived per date.
    NormalPeriod { regions: String },
}

impl EventInput {
    /// Reads an event file: a cached context, a `{"raw_text": ...}` or
    /// `{"normal_period": {...}}` wrapper, or plain narrative text.
    pub fn load(path: &Path) -> Result<Self, EventSchemaError> {
        let text = std::fs::read_to_string(path).map_err(|e| EventSchemaError::File {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<Self, EventSchemaError> {
        match serde_json::from_str::<Value>(text) {
            Ok(Value::Object(obj)) => {
                if let Some(raw) = obj.get("raw_text").and_then(Value::as_str) {
                    return Ok(Self::Raw(raw.to_string()));
                }
                if let Some(np) = obj.get("normal_period") {
                    let regions = np.get("regions").and_then(Value::as_str).unwrap_or("metropolitan area");
                    return Ok(Self::NormalPeriod {
                        regions: regions.to_string(),
                    });
                }
                let ctx: EventContext = serde_json::from_value(Value::Object(obj)).map_err(|e| {
                    EventSchemaError::Invalid(vec![format!("not an event context: {e}")])
                })?;
                validate_event_context(&ctx).map_err(EventSchemaError::Invalid)?;
                Ok(Self::Structured(ctx))
            }
            _ if text.trim().is_empty() => Err(EventSchemaError::EmptyInput),
            _ => Ok(Self::Raw(text.trim().to_string())),
        }
    }

    /// Text placed in generation and event-gist prompts for `date`.
    pub fn render(&self, date: Option<NaiveDate>) -> String {
        match self {
            Self::Structured(ctx) => ctx.to_pretty_json(),
            Self::Raw(text) => text.clone(),
            Self::NormalPeriod { regions } => {
                let date = date.unwrap_or_else(|| NaiveDate::from_ymd_opt(2019, 9, 2).expect("date"));
                normal_period_context(date, regions).to_pretty_json()
            }
        }
    }

    /// Key under which the event gist is cached: one per event, or one per
    /// day type for normal periods.
    pub fn gist_key(&self, date: NaiveDate) -> String {
        match self {
            Self::NormalPeriod { .. } => if is_weekend(date) { "weekend" } else { "weekday" }.to_string(),
            _ => "event".to_string(),
        }
    }
}
