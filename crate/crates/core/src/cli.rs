//! Command-line entry points: `ingest`, `schema`, `generate`, `evaluate`
//! and `report`.
//!
//! Every subcommand prints a JSON summary on stdout. Failures print
//! `{"error":{"kind":..,"message":..}}` on stderr and exit nonzero.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::alignment::{run_generation_loop, LoopError};
use crate::artifacts::{parse_generated, to_jsonl, write_atomic, FailureRecord, GeneratedLine, OutcomeRecord};
use crate::config::{ConfigError, RunConfig};
use crate::event::{construct_event_context, EventInput, EventSchemaError};
use crate::gist::GistCache;
use crate::ingest::{
    anonymize_records, dataset_statistics, group_trajectories, parse_records, partition_all, IngestError,
    ParsedRecords, Pseudonymizer,
};
use crate::metrics::{compare, evaluate_active_users, BoundingBox, GridSpec, MetricReport, MetricsError};
use crate::model::{CheckIn, Trajectory};
use crate::provider::{ChatProvider, HttpProvider, ProviderError, Script, ScriptedProvider};
use crate::template::TemplateSet;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("cannot read {path}: {message}")]
    Input { path: String, message: String },
    #[error("cannot write {path}: {message}")]
    Output { path: String, message: String },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Event(#[from] EventSchemaError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Usage(_) => "usage",
            CliError::Input { .. } => "input",
            CliError::Output { .. } => "output",
            CliError::Ingest(_) => "ingest",
            CliError::Event(_) => "event",
            CliError::Provider(_) => "provider",
            CliError::Metrics(_) => "metrics",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProviderKind {
    Http,
    Scripted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Ablation {
    /// Internal (habit) alignment.
    Ia,
    /// External (event) alignment.
    Ea,
    /// Structured event schema.
    Schema,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for sampling, retry jitter and the default anonymization salt.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, global = true)]
    pub provider: Option<ProviderKind>,
    /// Response script for the scripted provider.
    #[arg(long, global = true)]
    pub script: Option<PathBuf>,
    /// Write every provider request as JSON lines (scripted provider only).
    #[arg(long, global = true)]
    pub capture: Option<PathBuf>,
    /// Disable a pipeline component; repeatable or comma-separated.
    #[arg(long, value_enum, value_delimiter = ',', global = true)]
    pub ablate: Vec<Ablation>,
}

#[derive(Debug, Parser)]
#[command(name = "eventmob", version, about = "Event-conditioned mobility generation and evaluation")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Anonymize check-in records and compute dataset statistics.
    Ingest {
        /// Check-in JSON lines.
        #[arg(long)]
        users: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Statistics output; defaults to `<out>.stats.json`.
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// Build a structured event context from event text.
    Schema {
        #[arg(long)]
        event: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate event-day trajectories for every user with history.
    Generate {
        #[arg(long)]
        users: PathBuf,
        #[arg(long)]
        event: PathBuf,
        /// Outcome JSON lines; failures go to `<out>.failures.jsonl`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare generated trajectories against ground truth.
    Evaluate {
        /// Outcome or check-in JSON lines.
        #[arg(long)]
        generated: PathBuf,
        /// Ground-truth check-in JSON lines.
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Optional CSV of the raw distributions.
        #[arg(long)]
        distributions: Option<PathBuf>,
    },
    /// Merge metric reports into one comparison table (JSON, or CSV by extension).
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn execute<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
            0
        }
        Err(e) => {
            eprintln!("{}", json!({"error": {"kind": e.kind(), "message": e.to_string()}}));
            1
        }
    }
}

/// Runs a parsed command and returns its summary.
pub fn run(cli: Cli) -> Result<Value, CliError> {
    let cfg = effective_config(&cli.common)?;
    match cli.command {
        Command::Ingest { users, out, stats } => ingest(&cfg, &users, &out, stats),
        Command::Schema { event, out } => schema(&cfg, &cli.common, &event, &out),
        Command::Generate { users, event, out } => generate(&cfg, &cli.common, &users, &event, &out),
        Command::Evaluate {
            generated,
            truth,
            out,
            distributions,
        } => evaluate(&cfg, &generated, &truth, &out, distributions.as_deref()),
        Command::Report { reports, out } => report(&reports, &out),
    }
}

/// Config file (or defaults) with command-line overrides applied.
pub fn effective_config(common: &CommonArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    for a in &common.ablate {
        match a {
            Ablation::Ia => cfg.loop_.ablate_internal = true,
            Ablation::Ea => cfg.loop_.ablate_external = true,
            Ablation::Schema => cfg.loop_.ablate_event_schema = true,
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn input_err(path: &Path, message: impl ToString) -> CliError {
    CliError::Input {
        path: path.display().to_string(),
        message: message.to_string(),
    }
}

fn write(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    write_atomic(path, contents).map_err(|e| CliError::Output {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| input_err(path, e))
}

fn read_records(path: &Path) -> Result<ParsedRecords, CliError> {
    let file = std::fs::File::open(path).map_err(|e| input_err(path, e))?;
    Ok(parse_records(BufReader::new(file))?)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn pretty<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("artifact serializes");
    s.push('\n');
    s.into_bytes()
}

fn templates(cfg: &RunConfig) -> Result<TemplateSet, CliError> {
    match &cfg.paths.templates_dir {
        Some(dir) => TemplateSet::load_dir(dir).map_err(|e| CliError::Usage(e.to_string())),
        None => Ok(TemplateSet::builtin()),
    }
}

enum Backend {
    Scripted(ScriptedProvider),
    Http(Box<HttpProvider>),
}

impl Backend {
    fn build(cfg: &RunConfig, common: &CommonArgs) -> Result<Self, CliError> {
        match common.provider.unwrap_or(ProviderKind::Http) {
            ProviderKind::Scripted => {
                let path = common
                    .script
                    .as_ref()
                    .ok_or_else(|| CliError::Usage("--provider scripted needs --script".into()))?;
                Ok(Backend::Scripted(ScriptedProvider::new(Script::from_file(path)?)))
            }
            ProviderKind::Http => {
                if common.capture.is_some() {
                    return Err(CliError::Usage("--capture is only supported with --provider scripted".into()));
                }
                Ok(Backend::Http(Box::new(HttpProvider::new(cfg.provider.http_config(cfg.seed))?)))
            }
        }
    }

    fn provider(&self) -> &dyn ChatProvider {
        match self {
            Backend::Scripted(p) => p,
            Backend::Http(p) => p.as_ref(),
        }
    }

    fn workers(&self, cfg: &RunConfig) -> usize {
        match self {
            // Script queues are consumed in call order, so stay sequential.
            Backend::Scripted(_) => 1,
            Backend::Http(_) => cfg.provider.max_in_flight,
        }
    }

    fn write_capture(&self, common: &CommonArgs) -> Result<(), CliError> {
        if let (Some(path), Backend::Scripted(p)) = (&common.capture, self) {
            write(path, to_jsonl(&p.captured()).as_bytes())?;
        }
        Ok(())
    }
}

fn ingest(cfg: &RunConfig, input: &Path, out: &Path, stats_path: Option<PathBuf>) -> Result<Value, CliError> {
    let parsed = read_records(input)?;
    let read = parsed.records.len();
    let kept = cfg.data.filter.apply(parsed.records);
    let anonymized = anonymize_records(&kept, &Pseudonymizer::new(cfg.salt()));
    let stats = dataset_statistics(&anonymized);
    let stats_path = stats_path.unwrap_or_else(|| sibling(out, ".stats.json"));
    write(out, to_jsonl(&anonymized).as_bytes())?;
    write(&stats_path, &pretty(&stats))?;
    Ok(json!({
        "command": "ingest",
        "records_read": read,
        "records_written": anonymized.len(),
        "filtered_out": read - anonymized.len(),
        "skipped": parsed.skipped,
        "stats": stats,
        "out": out,
        "stats_out": stats_path,
    }))
}

fn schema(cfg: &RunConfig, common: &CommonArgs, event: &Path, out: &Path) -> Result<Value, CliError> {
    let text = read_text(event)?;
    if cfg.loop_.ablate_event_schema {
        let raw = match EventInput::from_text(&text)? {
            EventInput::Raw(raw) => raw,
            _ => return Err(CliError::Usage("--ablate schema expects unstructured event text".into())),
        };
        write(out, &pretty(&json!({ "raw_text": raw })))?;
        return Ok(json!({"command": "schema", "mode": "raw", "provider_calls": 0, "out": out}));
    }
    let raw = match EventInput::from_text(&text)? {
        EventInput::Raw(raw) => raw,
        EventInput::Structured(ctx) => {
            write(out, ctx.to_pretty_json().as_bytes())?;
            return Ok(json!({"command": "schema", "mode": "structured", "provider_calls": 0, "out": out}));
        }
        EventInput::NormalPeriod { .. } => {
            write(out, text.as_bytes())?;
            return Ok(json!({"command": "schema", "mode": "normal_period", "provider_calls": 0, "out": out}));
        }
    };
    let digest = Sha256::digest(raw.as_bytes());
    let key: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
    let cached = cfg.paths.cache_dir.as_ref().map(|d| d.join(format!("event-context-{key}.json")));
    if let Some(path) = cached.as_ref().filter(|p| p.exists()) {
        if let Ok(EventInput::Structured(ctx)) = EventInput::from_text(&read_text(path)?) {
            write(out, ctx.to_pretty_json().as_bytes())?;
            return Ok(json!({"command": "schema", "mode": "cached", "provider_calls": 0, "out": out}));
        }
    }
    let backend = Backend::build(cfg, common)?;
    let result = construct_event_context(&raw, backend.provider(), &templates(cfg)?);
    backend.write_capture(common)?;
    let ctx = result?;
    if let Some(path) = &cached {
        write(path, ctx.to_pretty_json().as_bytes())?;
    }
    write(out, ctx.to_pretty_json().as_bytes())?;
    Ok(json!({
        "command": "schema",
        "mode": "constructed",
        "ledger": backend.provider().ledger().snapshot(),
        "out": out,
    }))
}

fn generate(cfg: &RunConfig, common: &CommonArgs, users: &Path, event: &Path, out: &Path) -> Result<Value, CliError> {
    let window = cfg
        .event
        .as_ref()
        .ok_or_else(|| CliError::Config(ConfigError::Invalid("missing config key: event".into())))?;
    let tz = cfg.data.tz()?;
    let event_input = EventInput::load(event)?;
    match (&event_input, cfg.loop_.ablate_event_schema) {
        (EventInput::Structured(_) | EventInput::NormalPeriod { .. }, true) => {
            return Err(CliError::Usage(
                "--ablate schema needs the raw event text (see `schema --ablate schema`)".into(),
            ))
        }
        (EventInput::Raw(_), false) => {
            return Err(CliError::Usage(
                "event file is unstructured text; run `schema` first or pass --ablate schema".into(),
            ))
        }
        _ => {}
    }

    let parsed = read_records(users)?;
    let records = cfg.data.filter.apply(parsed.records);
    let partitions = partition_all(&records, window.event_start, cfg.data.short_window_days, &tz);
    let rejected: usize = partitions.iter().map(|p| p.rejected.len()).sum();
    let mut histories: Vec<_> = partitions
        .into_iter()
        .map(|p| p.history)
        .filter(|h| !h.is_empty())
        .collect();
    if let Some(n) = cfg.data.sample_users.filter(|&n| n < histories.len()) {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut chosen: BTreeSet<String> = BTreeSet::new();
        for h in histories.choose_multiple(&mut rng, n) {
            chosen.insert(h.user_id.clone());
        }
        histories.retain(|h| chosen.contains(&h.user_id));
    }
    let dates = window.event_dates();
    let work: Vec<(usize, NaiveDate)> = (0..histories.len())
        .flat_map(|u| dates.iter().map(move |d| (u, *d)))
        .collect();

    let backend = Backend::build(cfg, common)?;
    let tpl = templates(cfg)?;
    let cache = GistCache::new();
    let results: Vec<Mutex<Option<Result<OutcomeRecord, FailureRecord>>>> =
        work.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let run_one = |i: usize| {
        let (u, date) = work[i];
        let h = &histories[u];
        let r = run_generation_loop(h, &event_input, date, &cfg.loop_, backend.provider(), &tpl, &cache)
            .map(|o| OutcomeRecord::from(&o))
            .map_err(|e: LoopError| FailureRecord {
                user_id: h.user_id.clone(),
                date,
                stage: e.stage().to_string(),
                error: e.to_string(),
            });
        *results[i].lock().expect("result slot") = Some(r);
    };
    let workers = backend.workers(cfg).clamp(1, work.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= work.len() {
                    break;
                }
                run_one(i);
            });
        }
    });

    let mut outcomes = Vec::new();
    let mut failures = Vec::new();
    for slot in results {
        match slot.into_inner().expect("result slot").expect("every item ran") {
            Ok(o) => outcomes.push(o),
            Err(f) => failures.push(f),
        }
    }
    let failures_path = sibling(out, ".failures.jsonl");
    write(out, to_jsonl(&outcomes).as_bytes())?;
    write(&failures_path, to_jsonl(&failures).as_bytes())?;
    backend.write_capture(common)?;
    let accepted = outcomes.iter().filter(|o| o.accepted).count();
    Ok(json!({
        "command": "generate",
        "users": histories.len(),
        "user_days": work.len(),
        "accepted": accepted,
        "fallback": outcomes.len() - accepted,
        "failed": failures.len(),
        "skipped_lines": parsed.skipped.len(),
        "records_at_or_after_event_start": rejected,
        "ledger": backend.provider().ledger().snapshot(),
        "out": out,
        "failures_out": failures_path,
    }))
}

/// Pads `trajs` so every (user, date) pair has a trajectory, then sorts.
fn pad_days(mut trajs: Vec<Trajectory>, users: &BTreeSet<String>, dates: &BTreeSet<NaiveDate>) -> Vec<Trajectory> {
    let present: BTreeSet<(String, NaiveDate)> = trajs.iter().map(|t| (t.user_id.clone(), t.date)).collect();
    for u in users {
        for d in dates {
            if !present.contains(&(u.clone(), *d)) {
                trajs.push(Trajectory::new(u.clone(), *d));
            }
        }
    }
    trajs.sort_by(|a, b| (&a.user_id, a.date).cmp(&(&b.user_id, b.date)));
    trajs
}

fn distributions_csv(set: &crate::metrics::DistributionSet) -> String {
    let mut out = String::from("metric,label,generated,truth\n");
    for (name, (g, t)) in [("si", &set.si), ("sd", &set.sd), ("cd", &set.cd), ("sgd", &set.sgd)] {
        let (g, t) = crate::metrics::align(g, t);
        for (i, label) in g.labels.iter().enumerate() {
            let label = if label.contains([',', '"']) {
                format!("\"{}\"", label.replace('"', "\"\""))
            } else {
                label.clone()
            };
            out.push_str(&format!("{name},{label},{},{}\n", g.mass[i], t.mass[i]));
        }
    }
    out
}

fn evaluate(
    cfg: &RunConfig,
    generated: &Path,
    truth: &Path,
    out: &Path,
    distributions: Option<&Path>,
) -> Result<Value, CliError> {
    let tz = cfg.data.tz()?;
    let event_dates: Option<BTreeSet<NaiveDate>> = cfg.event.as_ref().map(|w| w.event_dates().into_iter().collect());
    let in_window = |d: NaiveDate| event_dates.as_ref().is_none_or(|s| s.contains(&d));

    let mut gen_trajs = Vec::new();
    let mut gen_checkins: Vec<CheckIn> = Vec::new();
    for line in parse_generated(&read_text(generated)?).map_err(|e| input_err(generated, e))? {
        match line {
            GeneratedLine::Outcome(o) => gen_trajs.push(o.trajectory().map_err(|e| input_err(generated, e))?),
            GeneratedLine::CheckIn(c) => gen_checkins.push(c),
        }
    }
    gen_trajs.extend(group_trajectories(&gen_checkins, &tz));
    gen_trajs.retain(|t| in_window(t.date));

    let truth_records: Vec<CheckIn> = read_records(truth)?
        .records
        .into_iter()
        .filter(|r| in_window(r.local_time(&tz).date()))
        .collect();
    let universe: BTreeSet<String> = gen_trajs.iter().map(|t| t.user_id.clone()).collect();
    if universe.is_empty() {
        return Err(MetricsError::EmptyInput("generated").into());
    }
    let mut truth_trajs = group_trajectories(&truth_records, &tz);
    let truth_users: BTreeSet<String> = truth_trajs.iter().map(|t| t.user_id.clone()).collect();
    let excluded = truth_users.difference(&universe).count();
    truth_trajs.retain(|t| universe.contains(&t.user_id));

    let dates: BTreeSet<NaiveDate> = match &event_dates {
        Some(d) => d.clone(),
        None => gen_trajs.iter().chain(&truth_trajs).map(|t| t.date).collect(),
    };
    let gen_trajs = pad_days(gen_trajs, &universe, &dates);
    let truth_trajs = pad_days(truth_trajs, &universe, &dates);

    let bbox = match cfg.data.bbox {
        Some(b) => b,
        None => BoundingBox::enclosing(truth_trajs.iter().flat_map(|t| t.points()))
            .ok_or(MetricsError::EmptyInput("truth"))?,
    };
    let grid = GridSpec::new(cfg.data.grid_size, bbox).map_err(MetricsError::from)?;
    let opts = cfg.data.compare_options();
    let mut report: MetricReport = compare(&gen_trajs, &truth_trajs, &grid, opts)?;
    report.active_users =
        Some(evaluate_active_users(&gen_trajs, &truth_trajs, cfg.data.trip_rule, &grid).map_err(MetricsError::from)?);
    write(out, &pretty(&report))?;
    if let Some(path) = distributions {
        let (set, _) = crate::metrics::build_distributions(&gen_trajs, &truth_trajs, &grid, opts);
        write(path, distributions_csv(&set).as_bytes())?;
    }
    Ok(json!({
        "command": "evaluate",
        "users": universe.len(),
        "user_days": gen_trajs.len(),
        "truth_users_without_generated_days": excluded,
        "jsd": report.jsd,
        "out": out,
    }))
}

#[derive(Debug, Serialize)]
struct ReportRow {
    name: String,
    si: f64,
    sd: f64,
    cd: f64,
    sgd: f64,
    precision: Option<f64>,
    recall: Option<f64>,
    f1: Option<f64>,
}

fn report(inputs: &[PathBuf], out: &Path) -> Result<Value, CliError> {
    let mut rows = Vec::new();
    let mut names: BTreeMap<String, usize> = BTreeMap::new();
    for path in inputs {
        let r: MetricReport = serde_json::from_str(&read_text(path)?).map_err(|e| input_err(path, e))?;
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let n = names.entry(stem.clone()).or_default();
        *n += 1;
        let name = if *n > 1 { format!("{stem}#{n}") } else { stem };
        rows.push(ReportRow {
            name,
            si: r.jsd.si,
            sd: r.jsd.sd,
            cd: r.jsd.cd,
            sgd: r.jsd.sgd,
            precision: r.active_users.map(|a| a.precision),
            recall: r.active_users.map(|a| a.recall),
            f1: r.active_users.map(|a| a.f1),
        });
    }
    let is_csv = out.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut csv = String::from("name,si,sd,cd,sgd,precision,recall,f1\n");
        for r in &rows {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.name,
                r.si,
                r.sd,
                r.cd,
                r.sgd,
                opt(r.precision),
                opt(r.recall),
                opt(r.f1)
            ));
        }
        write(out, csv.as_bytes())?;
    } else {
        write(out, &pretty(&json!({ "runs": rows })))?;
    }
    Ok(json!({"command": "report", "runs": rows.len(), "out": out}))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ablation_flags_accumulate() {
        let cli = Cli::try_parse_from(["eventmob", "--ablate", "ia,ea", "--ablate", "schema", "report", "a.json", "--out", "x"])
            .unwrap();
        let cfg = effective_config(&cli.common).unwrap();
        assert!(cfg.loop_.ablate_internal && cfg.loop_.ablate_external && cfg.loop_.ablate_event_schema);
    }

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"seed":3,"loop":{"max_iterations":2}}"#).unwrap();
        let p = path.to_str().unwrap();
        let cli = Cli::try_parse_from(["eventmob", "report", "a.json", "--out", "x", "--config", p, "--seed", "11"]).unwrap();
        let cfg = effective_config(&cli.common).unwrap();
        assert_eq!((cfg.seed, cfg.loop_.max_iterations), (11, 2));
    }

    #[test]
    fn missing_config_is_an_error() {
        let code = execute(["eventmob", "--config", "/no/such/config.json", "report", "a.json", "--out", "x"]);
        assert_eq!(code, 1);
        assert_eq!(execute(["eventmob", "frobnicate"]), 2);
    }

    #[test]
    fn padding_fills_every_user_day() {
        let users: BTreeSet<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
        let d1 = NaiveDate::from_ymd_opt(2019, 10, 12).unwrap();
        let dates: BTreeSet<NaiveDate> = [d1, d1.succ_opt().unwrap()].into();
        let padded = pad_days(vec![Trajectory::new("b", d1)], &users, &dates);
        let keys: Vec<(String, NaiveDate)> = padded.iter().map(|t| (t.user_id.clone(), t.date)).collect();
        assert_eq!(keys.len(), 4);
        assert!(keys.windows(2).all(|w| w[0] < w[1]));
    }
}
