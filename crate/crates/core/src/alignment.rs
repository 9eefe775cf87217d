//! The generate / extract / audit / refine loop for one user-day.
//!
//! Pattern and event gists are extracted once before the loop. Each
//! iteration produces a candidate (initial generation, or regeneration from
//! the previous candidate and the auditor's failing rationales), extracts
//! its action gist and audits it on two axes: internal (habits) and
//! external (event). The first candidate passing both is accepted. After
//! `max_iterations` failures the last candidate is kept and the unmet
//! constraints are reported.

use chrono::{NaiveDate, NaiveTime};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::ask::{ask, AskError};
use crate::event::EventInput;
use crate::extract::first_json_object;
use crate::gist::{
    extract_action_gist, extract_event_gist, extract_pattern_gist, render_days, render_plan, ActionGist, EventGist,
    GistCache, GistError, Justification, PatternGist,
};
use crate::model::{snap_to_time_grid, validate_trajectory, GeoPoint, Step, Trajectory, UserHistory, Visit};
use crate::provider::ChatProvider;
use crate::template::{Stage, TemplateSet};

pub const DEFAULT_MAX_ITERATIONS: u32 = 3;
const NOT_ASSESSED: &str = "not assessed (axis ablated)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopConfig {
    pub max_iterations: u32,
    /// Skip the internal (habit) audit axis.
    pub ablate_internal: bool,
    /// Skip the external (event) audit axis.
    pub ablate_external: bool,
    /// Condition on the raw event text instead of a structured context.
    pub ablate_event_schema: bool,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            max_iterations: DEFAULT_MAX_ITERATIONS,
            ablate_internal: false,
            ablate_external: false,
            ablate_event_schema: false,
        }
    }
}

impl LoopConfig {
    /// Both audit axes off: one generation, accepted as is.
    pub fn single_pass(&self) -> bool {
        self.ablate_internal && self.ablate_external
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditVerdict {
    pub internal_ok: bool,
    pub external_ok: bool,
    pub internal_rationale: String,
    pub external_rationale: String,
}

impl AuditVerdict {
    pub fn passes(&self) -> bool {
        self.internal_ok && self.external_ok
    }

    /// Failing axes as `internal: ...` / `external: ...` lines.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.internal_ok {
            out.push(format!("internal: {}", self.internal_rationale));
        }
        if !self.external_ok {
            out.push(format!("external: {}", self.external_rationale));
        }
        out
    }

    fn skipped() -> Self {
        Self {
            internal_ok: true,
            external_ok: true,
            internal_rationale: NOT_ASSESSED.into(),
            external_rationale: NOT_ASSESSED.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationOutcome {
    pub trajectory: Trajectory,
    pub justification: Justification,
    pub accepted: bool,
    pub iterations_used: u32,
    pub unmet_constraints: Vec<String>,
    pub audit_trail: Vec<AuditVerdict>,
}

#[derive(Debug, Error)]
pub enum LoopError {
    #[error(transparent)]
    Gist(#[from] GistError),
    #[error(transparent)]
    Ask(#[from] AskError),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

impl LoopError {
    /// Pipeline stage the failure came from.
    pub fn stage(&self) -> &str {
        match self {
            LoopError::Gist(GistError::EmptyHistory(_)) => "input",
            LoopError::Gist(GistError::Ask(a)) | LoopError::Ask(a) => match a {
                AskError::Unusable { stage, .. } | AskError::Provider { stage, .. } => stage,
                AskError::Template(_) => "template",
            },
            LoopError::Precondition(_) => "input",
        }
    }
}

fn number(obj: &Map<String, Value>, key: &str, idx: usize) -> Result<f64, String> {
    match obj.get(key) {
        Some(Value::Number(n)) => n.as_f64().ok_or_else(|| format!("steps[{idx}].{key} is not a number")),
        Some(Value::String(s)) => s.trim().parse().map_err(|_| format!("steps[{idx}].{key} is not a number")),
        _ => Err(format!("steps[{idx}].{key} is missing")),
    }
}

fn text(obj: &Map<String, Value>, key: &str, idx: usize) -> Result<String, String> {
    match obj.get(key) {
        Some(Value::String(s)) if !s.trim().is_empty() => Ok(s.trim().to_string()),
        _ => Err(format!("steps[{idx}].{key} must be a non-empty string")),
    }
}

fn clock(s: &str) -> Option<NaiveTime> {
    let s = s.trim();
    NaiveTime::parse_from_str(s, "%H:%M")
        .or_else(|_| NaiveTime::parse_from_str(s, "%H:%M:%S"))
        .ok()
}

/// Parses a generated plan for `date`. Times are snapped to the 10-minute
/// grid; the result must pass trajectory validation.
pub fn parse_plan(text_in: &str, user_id: &str, date: NaiveDate) -> Result<(Trajectory, Justification), String> {
    let obj = first_json_object(text_in).ok_or("no JSON object found")?;
    let steps = match obj.get("steps") {
        Some(Value::Array(items)) => items,
        _ => return Err("\"steps\" must be an array (empty for a stay-at-home day)".into()),
    };
    let mut traj = Trajectory::new(user_id, date);
    for (idx, item) in steps.iter().enumerate() {
        let s = item.as_object().ok_or_else(|| format!("steps[{idx}] must be an object"))?;
        let raw_time = s.get("time").and_then(Value::as_str).unwrap_or_default();
        let time = clock(raw_time).ok_or_else(|| format!("steps[{idx}].time {raw_time:?} is not HH:MM"))?;
        let point = GeoPoint::new(number(s, "lat", idx)?, number(s, "lon", idx)?)
            .map_err(|e| format!("steps[{idx}]: {e}"))?;
        traj.steps.push(Step {
            visit: Visit {
                point,
                poi_id: None,
                category: text(s, "category", idx)?,
                subcategory: text(s, "subcategory", idx)?,
            },
            at: snap_to_time_grid(date.and_time(time)),
        });
    }
    if let Err(violations) = validate_trajectory(&traj) {
        let list: Vec<String> = violations.iter().map(ToString::to_string).collect();
        return Err(format!("invalid trajectory: {}", list.join("; ")));
    }
    let justification = match obj.get("justification") {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Null) | None => String::new(),
        Some(other) => other.to_string(),
    };
    Ok((traj, Justification(justification)))
}

fn day_values(history: &UserHistory, event: &EventInput, date: NaiveDate) -> [(&'static str, String); 5] {
    [
        ("long_term", render_days(&history.long_term)),
        ("short_term", render_days(&history.short_term)),
        ("event_context", event.render(Some(date))),
        ("target_date", date.to_string()),
        ("weekday", date.format("%A").to_string()),
    ]
}

fn as_refs<'a>(values: &'a [(&'static str, String)]) -> Vec<(&'a str, &'a str)> {
    values.iter().map(|(k, v)| (*k, v.as_str())).collect()
}

/// One `generate` call (plus at most one corrective re-ask).
pub fn generate_initial_trajectory(
    history: &UserHistory,
    event: &EventInput,
    date: NaiveDate,
    provider: &dyn ChatProvider,
    templates: &TemplateSet,
) -> Result<(Trajectory, Justification), LoopError> {
    if history.is_empty() {
        return Err(LoopError::Precondition(format!("user {} has no history", history.user_id)));
    }
    let values = day_values(history, event, date);
    Ok(ask(provider, templates, Stage::Generate, &as_refs(&values), |t| {
        parse_plan(t, &history.user_id, date)
    })?)
}

/// Audit failures as prompt feedback, rationales quoted verbatim.
pub fn render_feedback(verdict: &AuditVerdict) -> String {
    let mut out = String::new();
    if !verdict.internal_ok {
        out.push_str(&format!(
            "- Internal alignment failed (conflict with the user's habits): {}\n",
            verdict.internal_rationale
        ));
    }
    if !verdict.external_ok {
        out.push_str(&format!(
            "- External alignment failed (conflict with the event situation): {}\n",
            verdict.external_rationale
        ));
    }
    out
}

/// One `regenerate` call conditioned on the previous candidate and the
/// failing audit rationales.
pub fn regenerate_trajectory(
    history: &UserHistory,
    event: &EventInput,
    previous: &Trajectory,
    feedback: &AuditVerdict,
    provider: &dyn ChatProvider,
    templates: &TemplateSet,
) -> Result<(Trajectory, Justification), LoopError> {
    if feedback.passes() {
        return Err(LoopError::Precondition("regeneration needs a failing audit verdict".into()));
    }
    let date = previous.date;
    let mut values = day_values(history, event, date).to_vec();
    values.push(("previous_trajectory", render_plan(previous)));
    values.push(("feedback", render_feedback(feedback)));
    Ok(ask(provider, templates, Stage::Regenerate, &as_refs(&values), |t| {
        parse_plan(t, &history.user_id, date)
    })?)
}

fn flag(obj: &Map<String, Value>, key: &str) -> Result<bool, String> {
    match obj.get(key) {
        Some(Value::Bool(b)) => Ok(*b),
        Some(Value::String(s)) => match s.trim().to_ascii_lowercase().as_str() {
            "true" | "yes" | "pass" => Ok(true),
            "false" | "no" | "fail" => Ok(false),
            _ => Err(format!("{key} must be a boolean")),
        },
        None | Some(Value::Null) => Err(format!("missing field: {key}")),
        _ => Err(format!("{key} must be a boolean")),
    }
}

fn axis(obj: &Map<String, Value>, name: &str, enabled: bool) -> Result<(bool, String), String> {
    if !enabled {
        return Ok((true, NOT_ASSESSED.into()));
    }
    let ok = flag(obj, &format!("{name}_ok"))?;
    let rationale = obj
        .get(&format!("{name}_rationale"))
        .and_then(Value::as_str)
        .unwrap_or_default()
        .trim()
        .to_string();
    if !ok && rationale.is_empty() {
        return Err(format!("{name}_rationale must explain the failed {name} judgment"));
    }
    Ok((ok, rationale))
}

/// Parses an auditor reply; ablated axes are forced to pass.
pub fn parse_verdict(text: &str, cfg: &LoopConfig) -> Result<AuditVerdict, String> {
    let obj = first_json_object(text).ok_or("no JSON object found")?;
    let (internal_ok, internal_rationale) = axis(&obj, "internal", !cfg.ablate_internal)?;
    let (external_ok, external_rationale) = axis(&obj, "external", !cfg.ablate_external)?;
    Ok(AuditVerdict {
        internal_ok,
        external_ok,
        internal_rationale,
        external_rationale,
    })
}

fn pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("gist serializes")
}

/// One `audit` call judging the action gist against the enabled reference
/// gists. A disabled axis is left out of the prompt and forced to pass.
pub fn audit_alignment(
    action: &ActionGist,
    pattern: Option<&PatternGist>,
    event: Option<&EventGist>,
    cfg: &LoopConfig,
    provider: &dyn ChatProvider,
    templates: &TemplateSet,
) -> Result<AuditVerdict, LoopError> {
    if cfg.single_pass() {
        return Ok(AuditVerdict::skipped());
    }
    let mut references = Vec::new();
    let mut criteria = Vec::new();
    let mut format = Map::new();
    if !cfg.ablate_internal {
        let p = pattern.ok_or_else(|| LoopError::Precondition("internal audit needs a pattern gist".into()))?;
        references.push(format!("User habits (pattern gist):\n{}", pretty(p)));
        criteria.push(
            "- internal: is the plan a coherent expression of the user's habitual routine and recent tendencies?",
        );
        format.insert("internal_ok".into(), json!("true | false"));
        format.insert("internal_rationale".into(), json!("string"));
    }
    if !cfg.ablate_external {
        let e = event.ok_or_else(|| LoopError::Precondition("external audit needs an event gist".into()))?;
        references.push(format!("Event situation (event gist):\n{}", pretty(e)));
        criteria.push("- external: is the plan a rational and compliant response to the event's constraints and implications?");
        format.insert("external_ok".into(), json!("true | false"));
        format.insert("external_rationale".into(), json!("string"));
    }
    let action_text = pretty(action);
    let references = references.join("\n\n");
    let criteria = criteria.join("\n");
    let format = Value::Object(format).to_string();
    Ok(ask(
        provider,
        templates,
        Stage::Audit,
        &[
            ("action_gist", &action_text),
            ("reference_gists", &references),
            ("criteria", &criteria),
            ("response_format", &format),
        ],
        |t| parse_verdict(t, cfg),
    )?)
}

/// Runs the full loop for one user-day.
pub fn run_generation_loop(
    history: &UserHistory,
    event: &EventInput,
    date: NaiveDate,
    cfg: &LoopConfig,
    provider: &dyn ChatProvider,
    templates: &TemplateSet,
    cache: &GistCache,
) -> Result<GenerationOutcome, LoopError> {
    if cfg.max_iterations == 0 {
        return Err(LoopError::Precondition("max_iterations must be at least 1".into()));
    }
    if history.is_empty() {
        return Err(LoopError::Precondition(format!("user {} has no history", history.user_id)));
    }
    if cfg.ablate_event_schema && matches!(event, EventInput::Structured(_)) {
        return Err(LoopError::Precondition(
            "event-schema ablation expects the raw event text, not a structured context".into(),
        ));
    }
    let pattern = if cfg.ablate_internal {
        None
    } else {
        Some(extract_pattern_gist(history, provider, templates, cache)?)
    };
    let event_gist = if cfg.ablate_external {
        None
    } else {
        Some(extract_event_gist(event, date, provider, templates, cache)?)
    };

    let mut trail = Vec::new();
    let mut last: Option<(Trajectory, Justification)> = None;
    for iteration in 1..=cfg.max_iterations {
        let (traj, justification) = match (&last, trail.last()) {
            (Some((prev, _)), Some(feedback)) => {
                regenerate_trajectory(history, event, prev, feedback, provider, templates)?
            }
            _ => generate_initial_trajectory(history, event, date, provider, templates)?,
        };
        let verdict = if cfg.single_pass() {
            AuditVerdict::skipped()
        } else {
            let action = extract_action_gist(&traj, &justification, provider, templates)?;
            audit_alignment(&action, pattern.as_ref(), event_gist.as_ref(), cfg, provider, templates)?
        };
        let passed = verdict.passes();
        trail.push(verdict);
        if passed {
            return Ok(GenerationOutcome {
                trajectory: traj,
                justification,
                accepted: true,
                iterations_used: iteration,
                unmet_constraints: Vec::new(),
                audit_trail: trail,
            });
        }
        last = Some((traj, justification));
    }
    let (trajectory, justification) = last.expect("at least one iteration ran");
    let unmet_constraints = trail.last().map(AuditVerdict::failures).unwrap_or_default();
    Ok(GenerationOutcome {
        trajectory,
        justification,
        accepted: false,
        iterations_used: cfg.max_iterations,
        unmet_constraints,
        audit_trail: trail,
    })
}
