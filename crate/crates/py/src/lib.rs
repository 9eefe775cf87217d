use chrono::{NaiveDate, NaiveDateTime};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use eventmob::alignment::{run_generation_loop, LoopConfig};
use eventmob::artifacts::OutcomeRecord;
use eventmob::event::EventInput;
use eventmob::gist::{parse_structured_gist, GistCache, GistSchema};
use eventmob::ingest::{group_trajectories, parse_records, partition_history};
use eventmob::metrics::{self, BoundingBox, CompareOptions, Distribution, GridSpec, TripRule};
use eventmob::model::{self, CheckIn};
use eventmob::provider::{self, ChatProvider, Script};
use eventmob::template::TemplateSet;

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Converts any serializable value into plain Python objects via `json`.
fn to_py<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(value_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn records(jsonl: &str) -> PyResult<Vec<CheckIn>> {
    let parsed = parse_records(jsonl.as_bytes()).map_err(value_err)?;
    if let Some(bad) = parsed.skipped.first() {
        return Err(value_err(format!("line {}: {}", bad.line, bad.reason)));
    }
    Ok(parsed.records)
}

fn timezone(tz: &str) -> PyResult<chrono::FixedOffset> {
    tz.parse().map_err(|_| value_err(format!("{tz:?} is not a UTC offset like +09:00")))
}

fn local_datetime(s: &str) -> PyResult<NaiveDateTime> {
    NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S")
        .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M"))
        .map_err(|e| value_err(format!("{s:?}: {e}")))
}

#[pyclass(frozen, skip_from_py_object, module = "eventmob")]
#[derive(Clone, Copy)]
struct GeoPoint(model::GeoPoint);

#[pymethods]
impl GeoPoint {
    #[new]
    fn new(lat: f64, lon: f64) -> PyResult<Self> {
        model::GeoPoint::new(lat, lon).map(Self).map_err(value_err)
    }

    #[getter]
    fn lat(&self) -> f64 {
        self.0.lat()
    }

    #[getter]
    fn lon(&self) -> f64 {
        self.0.lon()
    }

    fn distance_km(&self, other: &GeoPoint) -> f64 {
        metrics::haversine_km(self.0, other.0)
    }

    fn __repr__(&self) -> String {
        format!("GeoPoint(lat={}, lon={})", self.0.lat(), self.0.lon())
    }
}

#[pyfunction]
fn haversine_km(a: &GeoPoint, b: &GeoPoint) -> f64 {
    metrics::haversine_km(a.0, b.0)
}

/// Base-2 Jensen-Shannon divergence of two aligned probability vectors.
#[pyfunction]
fn jsd(p: Vec<f64>, q: Vec<f64>) -> PyResult<f64> {
    let labels: Vec<String> = (0..p.len()).map(|i| i.to_string()).collect();
    let q_labels: Vec<String> = (0..q.len()).map(|i| i.to_string()).collect();
    metrics::jsd(&Distribution { labels, mass: p }, &Distribution { labels: q_labels, mass: q }).map_err(value_err)
}

/// Floors a local `YYYY-MM-DDTHH:MM[:SS]` timestamp to its 10-minute slot.
#[pyfunction]
fn snap_to_time_grid(timestamp: &str) -> PyResult<String> {
    Ok(model::snap_to_time_grid(local_datetime(timestamp)?)
        .format("%Y-%m-%dT%H:%M:%S")
        .to_string())
}

#[pyfunction]
fn estimate_tokens(text: &str) -> u64 {
    provider::estimate_tokens(text)
}

/// Parses a gist reply; `kind` is `pattern`, `event` or `action`.
#[pyfunction]
fn parse_gist<'py>(py: Python<'py>, text: &str, kind: &str) -> PyResult<Bound<'py, PyAny>> {
    let schema = match kind {
        "pattern" => GistSchema::Pattern,
        "event" => GistSchema::Event,
        "action" => GistSchema::Action,
        other => return Err(value_err(format!("unknown gist kind {other:?}"))),
    };
    to_py(py, &parse_structured_gist(text, schema).map_err(value_err)?)
}

/// Counts over check-in JSON lines: `{checkins, pois, subcategories, users}`.
#[pyfunction]
fn dataset_statistics<'py>(py: Python<'py>, jsonl: &str) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &eventmob::ingest::dataset_statistics(&records(jsonl)?))
}

/// Metric report for generated vs. truth check-in JSON lines. The grid box
/// is the tight box around the truth points unless `bbox` is given as
/// `(lat_min, lat_max, lon_min, lon_max)`.
#[pyfunction]
#[pyo3(signature = (generated, truth, grid_size = 10, bbox = None, timezone = "+09:00"))]
fn compare<'py>(
    py: Python<'py>,
    generated: &str,
    truth: &str,
    grid_size: usize,
    bbox: Option<(f64, f64, f64, f64)>,
    timezone: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let tz = self::timezone(timezone)?;
    let gen = group_trajectories(&records(generated)?, &tz);
    let tru = group_trajectories(&records(truth)?, &tz);
    let bbox = match bbox {
        Some((lat_min, lat_max, lon_min, lon_max)) => BoundingBox { lat_min, lat_max, lon_min, lon_max },
        None => BoundingBox::enclosing(tru.iter().flat_map(|t| t.points()))
            .ok_or_else(|| value_err("truth has no points"))?,
    };
    let grid = GridSpec::new(grid_size, bbox).map_err(value_err)?;
    let mut report = metrics::compare(&gen, &tru, &grid, CompareOptions::default()).map_err(value_err)?;
    report.active_users = metrics::evaluate_active_users(&gen, &tru, TripRule::default(), &grid).ok();
    to_py(py, &report)
}

/// Deterministic provider replaying a JSON response script.
#[pyclass(frozen, module = "eventmob")]
struct ScriptedProvider(provider::ScriptedProvider);

#[pymethods]
impl ScriptedProvider {
    #[new]
    fn new(script_json: &str) -> PyResult<Self> {
        Ok(Self(provider::ScriptedProvider::new(Script::from_json(script_json).map_err(value_err)?)))
    }

    fn ledger<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.0.ledger().snapshot())
    }

    fn captured<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.0.captured())
    }

    fn remaining(&self) -> usize {
        self.0.remaining()
    }
}

/// Runs the generation loop for one user-day and returns the outcome record.
#[pyfunction]
#[pyo3(signature = (provider, history, event, date, event_start, max_iterations = 3, ablate = Vec::new(), short_window_days = 7, timezone = "+09:00"))]
#[allow(clippy::too_many_arguments)]
fn generate_day<'py>(
    py: Python<'py>,
    provider: &ScriptedProvider,
    history: &str,
    event: &str,
    date: &str,
    event_start: &str,
    max_iterations: u32,
    ablate: Vec<String>,
    short_window_days: i64,
    timezone: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let tz = self::timezone(timezone)?;
    let recs = records(history)?;
    let user = recs.first().map(|r| r.user_id.clone()).ok_or_else(|| value_err("empty history"))?;
    if recs.iter().any(|r| r.user_id != user) {
        return Err(value_err("history must belong to a single user"));
    }
    let start = local_datetime(event_start)?;
    let part = partition_history(&user, &recs, start, short_window_days, &tz);
    let date = NaiveDate::parse_from_str(date, "%Y-%m-%d").map_err(value_err)?;
    let mut cfg = LoopConfig { max_iterations, ..Default::default() };
    for a in &ablate {
        match a.as_str() {
            "ia" => cfg.ablate_internal = true,
            "ea" => cfg.ablate_external = true,
            "schema" => cfg.ablate_event_schema = true,
            other => return Err(value_err(format!("unknown ablation {other:?}"))),
        }
    }
    let input = EventInput::from_text(event).map_err(value_err)?;
    let outcome = run_generation_loop(
        &part.history,
        &input,
        date,
        &cfg,
        &provider.0,
        &TemplateSet::builtin(),
        &GistCache::new(),
    )
    .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    to_py(py, &OutcomeRecord::from(&outcome))
}

/// Runs a command-line invocation (without the program name) and returns
/// its summary.
#[pyfunction]
fn run_cli<'py>(py: Python<'py>, args: Vec<String>) -> PyResult<Bound<'py, PyAny>> {
    use clap::Parser;
    let cli = eventmob::cli::Cli::try_parse_from(std::iter::once("eventmob".to_string()).chain(args))
        .map_err(value_err)?;
    let summary = eventmob::cli::run(cli).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    to_py(py, &summary)
}

#[pymodule]
#[pyo3(name = "eventmob")]
fn py_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<GeoPoint>()?;
    m.add_class::<ScriptedProvider>()?;
    m.add_function(wrap_pyfunction!(haversine_km, m)?)?;
    m.add_function(wrap_pyfunction!(jsd, m)?)?;
    m.add_function(wrap_pyfunction!(snap_to_time_grid, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_tokens, m)?)?;
    m.add_function(wrap_pyfunction!(parse_gist, m)?)?;
    m.add_function(wrap_pyfunction!(dataset_statistics, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(generate_day, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}
