//! Gist extraction: bottom-line summaries of a user's habits (pattern), of
//! an event (event), and of a candidate plan (action).

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::{Arc, Mutex};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::ask::{ask, AskError};
use crate::event::EventInput;
use crate::extract::first_json_object;
use crate::model::{Trajectory, UserHistory};
use crate::provider::ChatProvider;
use crate::template::{Stage, TemplateSet};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternGist {
    pub core_behavior: String,
    pub points_of_inertia: Vec<String>,
    pub points_of_fracture: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventGist {
    pub primary_intent: String,
    pub behavioral_implications: Vec<String>,
    pub risk_reward_calculus: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Low,
    Medium,
    High,
}

impl Level {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().trim_end_matches([';', '.']).to_ascii_lowercase().as_str() {
            "low" => Some(Self::Low),
            "medium" => Some(Self::Medium),
            "high" => Some(Self::High),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rated {
    pub level: Level,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionGist {
    pub primary_intent: String,
    pub habit_adherence: Rated,
    pub event_compliance: Rated,
}

/// Free-form rationale returned with a generated trajectory.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Justification(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GistSchema {
    Pattern,
    Event,
    Action,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum Gist {
    Pattern(PatternGist),
    Event(EventGist),
    Action(ActionGist),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GistParseError {
    #[error("no JSON object found")]
    NoJson,
    #[error("schema violation: {}", .0.join("; "))]
    Schema(Vec<String>),
}

#[derive(Debug, Error)]
pub enum GistError {
    #[error("user {0} has no pre-event history")]
    EmptyHistory(String),
    #[error(transparent)]
    Ask(#[from] AskError),
}

struct Fields<'a> {
    obj: &'a Map<String, Value>,
    prefix: &'a str,
    errors: Vec<String>,
}

impl<'a> Fields<'a> {
    fn new(obj: &'a Map<String, Value>, prefix: &'a str) -> Self {
        Self {
            obj,
            prefix,
            errors: Vec::new(),
        }
    }

    fn text(&mut self, key: &str, required_non_empty: bool) -> String {
        match self.obj.get(key) {
            None | Some(Value::Null) => {
                self.errors.push(format!("missing field: {}{key}", self.prefix));
                String::new()
            }
            Some(Value::String(s)) => {
                if required_non_empty && s.trim().is_empty() {
                    self.errors.push(format!("empty field: {}{key}", self.prefix));
                }
                s.clone()
            }
            Some(_) => {
                self.errors.push(format!("wrong type: {}{key} must be a string", self.prefix));
                String::new()
            }
        }
    }

    /// A list of strings; a bare string is accepted as a one-item list.
    fn list(&mut self, key: &str) -> Vec<String> {
        match self.obj.get(key) {
            None | Some(Value::Null) => {
                self.errors.push(format!("missing field: {}{key}", self.prefix));
                Vec::new()
            }
            Some(Value::String(s)) => vec![s.clone()],
            Some(Value::Array(items)) => {
                let mut out = Vec::with_capacity(items.len());
                for item in items {
                    match item {
                        Value::String(s) => out.push(s.clone()),
                        _ => {
                            self.errors
                                .push(format!("wrong type: {}{key} must hold strings", self.prefix));
                            break;
                        }
                    }
                }
                out
            }
            Some(_) => {
                self.errors
                    .push(format!("wrong type: {}{key} must be a list of strings", self.prefix));
                Vec::new()
            }
        }
    }

    fn rated(&mut self, key: &str) -> Rated {
        let fallback = Rated {
            level: Level::Low,
            rationale: String::new(),
        };
        match self.obj.get(key) {
            Some(Value::Object(inner)) => {
                let prefix = format!("{}{key}.", self.prefix);
                let mut f = Fields::new(inner, &prefix);
                let raw = f.text("level", true);
                let rationale = f.text("rationale", false);
                self.errors.append(&mut f.errors);
                match Level::parse(&raw) {
                    Some(level) => Rated { level, rationale },
                    None => {
                        if !raw.is_empty() {
                            self.errors
                                .push(format!("illegal value for {prefix}level: {raw:?} (expected low|medium|high)"));
                        }
                        fallback
                    }
                }
            }
            None | Some(Value::Null) => {
                self.errors.push(format!("missing field: {}{key}", self.prefix));
                fallback
            }
            Some(_) => {
                self.errors.push(format!("wrong type: {}{key} must be an object", self.prefix));
                fallback
            }
        }
    }

    fn finish<T>(self, value: T) -> Result<T, GistParseError> {
        if self.errors.is_empty() {
            Ok(value)
        } else {
            Err(GistParseError::Schema(self.errors))
        }
    }
}

fn pattern_from(obj: &Map<String, Value>) -> Result<PatternGist, GistParseError> {
    let mut f = Fields::new(obj, "");
    let gist = PatternGist {
        core_behavior: f.text("core_behavior", true),
        points_of_inertia: f.list("points_of_inertia"),
        points_of_fracture: f.list("points_of_fracture"),
    };
    f.finish(gist)
}

fn event_from(obj: &Map<String, Value>) -> Result<EventGist, GistParseError> {
    let mut f = Fields::new(obj, "");
    let gist = EventGist {
        primary_intent: f.text("primary_intent", true),
        behavioral_implications: f.list("behavioral_implications"),
        risk_reward_calculus: f.text("risk_reward_calculus", false),
    };
    f.finish(gist)
}

fn action_from(obj: &Map<String, Value>) -> Result<ActionGist, GistParseError> {
    let mut f = Fields::new(obj, "");
    let gist = ActionGist {
        primary_intent: f.text("primary_intent", true),
        habit_adherence: f.rated("habit_adherence"),
        event_compliance: f.rated("event_compliance"),
    };
    f.finish(gist)
}

/// Extracts the first JSON object in `text` and validates it against
/// `schema`.
pub fn parse_structured_gist(text: &str, schema: GistSchema) -> Result<Gist, GistParseError> {
    let obj = first_json_object(text).ok_or(GistParseError::NoJson)?;
    match schema {
        GistSchema::Pattern => pattern_from(&obj).map(Gist::Pattern),
        GistSchema::Event => event_from(&obj).map(Gist::Event),
        GistSchema::Action => action_from(&obj).map(Gist::Action),
    }
}

fn parse_with<T>(text: &str, f: fn(&Map<String, Value>) -> Result<T, GistParseError>) -> Result<T, String> {
    let obj = first_json_object(text).ok_or_else(|| GistParseError::NoJson.to_string())?;
    f(&obj).map_err(|e| e.to_string())
}

/// `HH:MM, category, subcategory, (lat, lon)` per visit.
pub fn render_visits(traj: &Trajectory) -> String {
    let mut out = String::new();
    for s in &traj.steps {
        let _ = writeln!(
            out,
            "{}, {}, {}, ({:.3}, {:.3})",
            s.at.format("%H:%M"),
            s.visit.category,
            s.visit.subcategory,
            s.visit.point.lat(),
            s.visit.point.lon()
        );
    }
    out
}

/// Visit lines grouped under a date header per day.
pub fn render_days(days: &[Trajectory]) -> String {
    if days.is_empty() {
        return "(no records)\n".into();
    }
    let mut out = String::new();
    for t in days {
        let _ = writeln!(out, "{} ({})", t.date, t.date.format("%a"));
        for line in render_visits(t).lines() {
            let _ = writeln!(out, "  {line}");
        }
    }
    out
}

/// A single planned day; an empty plan renders as staying home.
pub fn render_plan(traj: &Trajectory) -> String {
    if traj.steps.is_empty() {
        "(no visits: stays at home all day)\n".into()
    } else {
        render_visits(traj)
    }
}

type Slot<T> = Arc<Mutex<Option<T>>>;

/// Run-scoped caches: one pattern gist per user, one event gist per event
/// key. Concurrent requests for the same key wait for a single extraction.
#[derive(Debug, Default)]
pub struct GistCache {
    patterns: Mutex<HashMap<String, Slot<PatternGist>>>,
    events: Mutex<HashMap<String, Slot<EventGist>>>,
}

fn cached<T: Clone, E>(
    map: &Mutex<HashMap<String, Slot<T>>>,
    key: &str,
    compute: impl FnOnce() -> Result<T, E>,
) -> Result<T, E> {
    let slot = map.lock().expect("cache lock").entry(key.to_string()).or_default().clone();
    let mut guard = slot.lock().expect("slot lock");
    if let Some(v) = guard.as_ref() {
        return Ok(v.clone());
    }
    let v = compute()?;
    *guard = Some(v.clone());
    Ok(v)
}

impl GistCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn pattern(&self, user_id: &str) -> Option<PatternGist> {
        let map = self.patterns.lock().expect("cache lock");
        map.get(user_id).and_then(|s| s.lock().expect("slot lock").clone())
    }
}

/// One `pattern_gist` call per user per run; later calls hit the cache.
pub fn extract_pattern_gist(
    history: &UserHistory,
    provider: &dyn ChatProvider,
    templates: &TemplateSet,
    cache: &GistCache,
) -> Result<PatternGist, GistError> {
    if history.is_empty() {
        return Err(GistError::EmptyHistory(history.user_id.clone()));
    }
    cached(&cache.patterns, &history.user_id, || {
        let long = render_days(&history.long_term);
        let short = render_days(&history.short_term);
        ask(
            provider,
            templates,
            Stage::PatternGist,
            &[("long_term", &long), ("short_term", &short)],
            |t| parse_with(t, pattern_from),
        )
        .map_err(GistError::from)
    })
}

/// One `event_gist` call per event (per day type for normal periods).
pub fn extract_event_gist(
    event: &EventInput,
    date: NaiveDate,
    provider: &dyn ChatProvider,
    templates: &TemplateSet,
    cache: &GistCache,
) -> Result<EventGist, GistError> {
    cached(&cache.events, &event.gist_key(date), || {
        let rendered = event.render(Some(date));
        ask(provider, templates, Stage::EventGist, &[("event_context", &rendered)], |t| {
            parse_with(t, event_from)
        })
        .map_err(GistError::from)
    })
}

/// One `action_gist` call; never cached.
pub fn extract_action_gist(
    traj: &Trajectory,
    justification: &Justification,
    provider: &dyn ChatProvider,
    templates: &TemplateSet,
) -> Result<ActionGist, GistError> {
    let plan = render_plan(traj);
    ask(
        provider,
        templates,
        Stage::ActionGist,
        &[("trajectory", &plan), ("justification", &justification.0)],
        |t| parse_with(t, action_from),
    )
    .map_err(GistError::from)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::model::{GeoPoint, Step, Visit};
    use crate::provider::ScriptedProvider;

    pub(crate) const PATTERN: &str = r#"{"core_behavior":"Daily commute to a office","points_of_inertia":["Returning home to a specific neighborhood at night"],"points_of_fracture":["Reliance on a single train line that might be suspended"]}"#;
    pub(crate) const EVENT: &str = r#"{"primary_intent":"High risk outdoors, strong incentive to stay home","behavioral_implications":["Evacuation from coastal areas, seeking indoor shelter"],"risk_reward_calculus":"Risk of injury outweighs reward of a non-essential outing"}"#;
    pub(crate) const ACTION: &str = r#"{"primary_intent":"To get essential supplies from a nearby store","habit_adherence":{"level":"low","rationale":"this trip deviates from the usual work commute"},"event_compliance":{"level":"high","rationale":"the trip is short and avoids dangerous areas"}}"#;

    pub(crate) fn date() -> NaiveDate {
        NaiveDate::from_ymd_opt(2019, 10, 12).unwrap()
    }

    pub(crate) fn history() -> UserHistory {
        let d = NaiveDate::from_ymd_opt(2019, 10, 7).unwrap();
        UserHistory {
            user_id: "u1".into(),
            long_term: vec![],
            short_term: vec![Trajectory {
                user_id: "u1".into(),
                date: d,
                steps: vec![Step {
                    visit: Visit {
                        point: GeoPoint::new(35.65234, 139.5431).unwrap(),
                        poi_id: Some("1003".into()),
                        category: "Retail".into(),
                        subcategory: "Home Appliance Store".into(),
                    },
                    at: d.and_hms_opt(18, 33, 0).unwrap(),
                }],
            }],
            event_start: date().and_hms_opt(0, 0, 0).unwrap(),
            short_window_days: 7,
        }
    }

    #[test]
    fn parses_table_examples() {
        let Gist::Pattern(p) = parse_structured_gist(PATTERN, GistSchema::Pattern).unwrap() else { panic!() };
        assert_eq!(p.core_behavior, "Daily commute to a office");
        assert_eq!(p.points_of_fracture.len(), 1);
        let Gist::Event(e) = parse_structured_gist(EVENT, GistSchema::Event).unwrap() else { panic!() };
        assert!(e.primary_intent.contains("stay home"));
        let Gist::Action(a) = parse_structured_gist(ACTION, GistSchema::Action).unwrap() else { panic!() };
        assert_eq!(a.habit_adherence.level, Level::Low);
        assert_eq!(a.event_compliance.level, Level::High);
    }

    #[test]
    fn fenced_and_first_object() {
        let text = format!("Here is the gist:\n```json\n{PATTERN}\n```\nand another {{\"core_behavior\":\"x\"}}");
        let Gist::Pattern(p) = parse_structured_gist(&text, GistSchema::Pattern).unwrap() else { panic!() };
        assert_eq!(p.core_behavior, "Daily commute to a office");
    }

    #[test]
    fn schema_violations_are_listed() {
        let err = parse_structured_gist("{}", GistSchema::Action).unwrap_err();
        let GistParseError::Schema(v) = err else { panic!() };
        assert_eq!(
            v,
            vec!["missing field: primary_intent", "missing field: habit_adherence", "missing field: event_compliance"]
        );
        let bad = ACTION.replace("\"high\"", "\"very-high\"");
        let GistParseError::Schema(v) = parse_structured_gist(&bad, GistSchema::Action).unwrap_err() else { panic!() };
        assert!(v[0].contains("very-high"));
        assert_eq!(parse_structured_gist("none", GistSchema::Event), Err(GistParseError::NoJson));
    }

    #[test]
    fn qualitative_levels_accepted() {
        assert_eq!(Level::parse("Low;"), Some(Level::Low));
        assert_eq!(Level::parse(" HIGH "), Some(Level::High));
        assert_eq!(Level::parse("very-high"), None);
    }

    #[test]
    fn pattern_gist_is_cached_per_user() {
        let p = ScriptedProvider::from_responses([PATTERN]);
        let cache = GistCache::new();
        let t = TemplateSet::builtin();
        let a = extract_pattern_gist(&history(), &p, &t, &cache).unwrap();
        let before = p.ledger().snapshot();
        let b = extract_pattern_gist(&history(), &p, &t, &cache).unwrap();
        assert_eq!(a, b);
        assert_eq!(p.ledger().snapshot(), before);
        assert_eq!(before.calls("pattern_gist"), 1);
        let prompt = &p.captured()[0].user_prompt;
        assert!(prompt.contains("18:33, Retail, Home Appliance Store, (35.652, 139.543)"), "{prompt}");
    }

    #[test]
    fn pattern_gist_fails_after_reask() {
        let broken = PATTERN.replace("core_behavior", "behavior");
        let p = ScriptedProvider::from_responses([broken.clone(), broken]);
        let err = extract_pattern_gist(&history(), &p, &TemplateSet::builtin(), &GistCache::new()).unwrap_err();
        assert!(matches!(err, GistError::Ask(AskError::Unusable { .. })));
        assert_eq!(p.ledger().snapshot().calls("pattern_gist"), 2);
        let empty = UserHistory { short_term: vec![], ..history() };
        assert!(matches!(
            extract_pattern_gist(&empty, &p, &TemplateSet::builtin(), &GistCache::new()),
            Err(GistError::EmptyHistory(_))
        ));
    }

    #[test]
    fn event_gist_cached_and_repaired() {
        let p = ScriptedProvider::from_responses(["```not json```", EVENT]);
        let cache = GistCache::new();
        let t = TemplateSet::builtin();
        let input = EventInput::Raw("typhoon".into());
        let g = extract_event_gist(&input, date(), &p, &t, &cache).unwrap();
        assert!(g.primary_intent.contains("stay home"));
        extract_event_gist(&input, date(), &p, &t, &cache).unwrap();
        assert_eq!(p.ledger().snapshot().calls("event_gist"), 2);
    }

    #[test]
    fn normal_period_event_gist() {
        let p = ScriptedProvider::from_responses([EVENT]);
        let input = EventInput::NormalPeriod { regions: "Tokyo".into() };
        extract_event_gist(&input, date(), &p, &TemplateSet::builtin(), &GistCache::new()).unwrap();
        assert!(p.captured()[0].user_prompt.contains("\"official_directives\": []"));
    }

    #[test]
    fn action_gist_for_stay_home() {
        let p = ScriptedProvider::from_responses([ACTION]);
        let empty = Trajectory::new("u1", date());
        let g = extract_action_gist(&empty, &Justification("stay at home".into()), &p, &TemplateSet::builtin()).unwrap();
        assert_eq!(g.event_compliance.level, Level::High);
        let prompt = &p.captured()[0].user_prompt;
        assert!(prompt.contains("stays at home") && prompt.contains("stay at home"));
    }

    #[test]
    fn concurrent_pattern_requests_share_one_call() {
        let p = ScriptedProvider::from_responses([PATTERN]);
        let cache = GistCache::new();
        let t = TemplateSet::builtin();
        std::thread::scope(|s| {
            for _ in 0..8 {
                s.spawn(|| extract_pattern_gist(&history(), &p, &t, &cache).unwrap());
            }
        });
        assert_eq!(p.ledger().snapshot().calls("pattern_gist"), 1);
    }

    proptest::proptest! {
        #[test]
        fn parsing_is_total(s in ".{0,300}") {
            for schema in [GistSchema::Pattern, GistSchema::Event, GistSchema::Action] {
                let _ = parse_structured_gist(&s, schema);
            }
        }
    }
}
