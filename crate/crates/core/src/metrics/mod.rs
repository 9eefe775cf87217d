//! Evaluation of generated trajectories against ground truth: four
//! distributions compared by Jensen-Shannon divergence, plus scalar mobility
//! statistics and active-user classification.

pub mod active;
pub mod distribution;
pub mod geo;
pub mod grid;
pub mod stats;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use active::{evaluate_active_users, ActiveUserScores, TripRule, UniverseMismatch};
pub use distribution::{
    align, build_cd_distribution, build_sd_distribution, build_si_distribution, jsd, CategoryGranularity,
    Distribution, DistributionError,
};
pub use geo::{haversine_km, radius_of_gyration_km, BoundingBox, DegenerateBox, DistanceMetric, EARTH_RADIUS_KM};
pub use grid::{build_sgd_distribution, cell_counts, CellCounts, GridSpec};
pub use stats::{mobility_statistics, MobilityStats};

use crate::model::Trajectory;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("nothing to compare: {0} is empty")]
    EmptyInput(&'static str),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error(transparent)]
    Grid(#[from] DegenerateBox),
    #[error(transparent)]
    Universe(#[from] UniverseMismatch),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct JsdScores {
    pub si: f64,
    pub sd: f64,
    pub cd: f64,
    pub sgd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatsPair {
    pub generated: MobilityStats,
    pub truth: MobilityStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub jsd: JsdScores,
    pub stats: StatsPair,
    #[serde(default)]
    pub active_users: Option<ActiveUserScores>,
    pub dropped_out_of_bbox: u64,
    /// Metrics where exactly one side had no observations; scored 1.0.
    #[serde(default)]
    pub empty_distributions: Vec<String>,
}

/// Raw distributions behind a [`MetricReport`], label-aligned pairwise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionSet {
    pub si: (Distribution, Distribution),
    pub sd: (Distribution, Distribution),
    pub cd: (Distribution, Distribution),
    pub sgd: (Distribution, Distribution),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompareOptions {
    pub granularity: CategoryGranularity,
    pub distance: DistanceMetric,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            granularity: CategoryGranularity::Subcategory,
            distance: DistanceMetric::Haversine,
        }
    }
}

fn pair_jsd(
    name: &str,
    p: &Distribution,
    q: &Distribution,
    empties: &mut Vec<String>,
) -> Result<f64, DistributionError> {
    match (p.is_empty(), q.is_empty()) {
        (true, true) => Ok(0.0),
        (false, false) => jsd(p, q),
        _ => {
            empties.push(name.to_string());
            Ok(1.0)
        }
    }
}

pub fn build_distributions(
    generated: &[Trajectory],
    truth: &[Trajectory],
    grid: &GridSpec,
    opts: CompareOptions,
) -> (DistributionSet, u64) {
    let (cd_gen, cd_truth) = align(
        &build_cd_distribution(generated, opts.granularity),
        &build_cd_distribution(truth, opts.granularity),
    );
    let reference = cell_counts(truth, grid);
    let sgd_gen = build_sgd_distribution(generated, grid, &reference);
    let sgd_truth = build_sgd_distribution(truth, grid, &reference);
    let set = DistributionSet {
        si: (build_si_distribution(generated), build_si_distribution(truth)),
        sd: (
            build_sd_distribution(generated, opts.distance),
            build_sd_distribution(truth, opts.distance),
        ),
        cd: (cd_gen, cd_truth),
        sgd: (sgd_gen.distribution, sgd_truth.distribution),
    };
    (set, sgd_gen.dropped + sgd_truth.dropped)
}

/// Compares pooled generated trajectories against pooled truth. The retained
/// spatial cells come from the truth side.
pub fn compare(
    generated: &[Trajectory],
    truth: &[Trajectory],
    grid: &GridSpec,
    opts: CompareOptions,
) -> Result<MetricReport, MetricsError> {
    if generated.is_empty() {
        return Err(MetricsError::EmptyInput("generated"));
    }
    if truth.is_empty() {
        return Err(MetricsError::EmptyInput("truth"));
    }
    let (set, dropped) = build_distributions(generated, truth, grid, opts);
    let mut empties = Vec::new();
    let jsd = JsdScores {
        si: pair_jsd("si", &set.si.0, &set.si.1, &mut empties)?,
        sd: pair_jsd("sd", &set.sd.0, &set.sd.1, &mut empties)?,
        cd: pair_jsd("cd", &set.cd.0, &set.cd.1, &mut empties)?,
        sgd: pair_jsd("sgd", &set.sgd.0, &set.sgd.1, &mut empties)?,
    };
    Ok(MetricReport {
        jsd,
        stats: StatsPair {
            generated: mobility_statistics(generated),
            truth: mobility_statistics(truth),
        },
        active_users: None,
        dropped_out_of_bbox: dropped,
        empty_distributions: empties,
    })
}
