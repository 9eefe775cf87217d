#![allow(dead_code)]

use std::path::PathBuf;

use chrono::NaiveDate;
use clap::Parser;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use eventmob::cli::{run, Cli};
use eventmob::model::{GeoPoint, Step, Trajectory, Visit};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn fixture_str(name: &str) -> String {
    fixture(name).to_string_lossy().into_owned()
}

/// Runs the CLI in-process and returns its summary.
pub fn cli(args: &[&str]) -> Result<Value, String> {
    let cli = Cli::try_parse_from(std::iter::once("eventmob").chain(args.iter().copied())).map_err(|e| e.to_string())?;
    run(cli).map_err(|e| e.to_string())
}

pub fn step(date: NaiveDate, minute: u32, lat: f64, lon: f64, poi: &str, cat: &str, sub: &str) -> Step {
    Step {
        visit: Visit {
            point: GeoPoint::new(lat, lon).unwrap(),
            poi_id: Some(poi.to_string()),
            category: cat.to_string(),
            subcategory: sub.to_string(),
        },
        at: date.and_hms_opt(minute / 60, minute % 60, 0).unwrap(),
    }
}

const CATS: [(&str, &str); 6] = [
    ("Residence", "Home (private)"),
    ("Retail", "Convenience Store"),
    ("Retail", "Supermarket"),
    ("Dining and Drinking", "Cafe"),
    ("Travel and Transportation", "Train Station"),
    ("Professional and Other Places", "Office"),
];

/// `n` random check-ins spread over user-days around Tokyo, on the 10-minute grid.
pub fn synthetic_trajectories(n: usize, seed: u64) -> Vec<Trajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let date = NaiveDate::from_ymd_opt(2019, 10, 12).unwrap();
    let mut out = Vec::new();
    let mut made = 0;
    let mut user = 0;
    while made < n {
        let len = rng.random_range(1..=12).min(n - made);
        let mut minutes: Vec<u32> = (0..len).map(|_| rng.random_range(0..144u32) * 10).collect();
        minutes.sort_unstable();
        let mut t = Trajectory::new(format!("u{user}"), date);
        for m in minutes {
            let (cat, sub) = CATS[rng.random_range(0..CATS.len())];
            let poi = format!("p{}", rng.random_range(0..5000));
            t.steps.push(step(date, m, rng.random_range(35.4..35.9), rng.random_range(139.4..139.9), &poi, cat, sub));
        }
        made += len;
        user += 1;
        out.push(t);
    }
    out
}
